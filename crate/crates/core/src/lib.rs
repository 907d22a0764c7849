pub mod assets;
pub mod backends;
pub mod datagen;
pub mod dialect;
pub mod evalkit;
pub mod knowledge;
pub mod orchestrator;
pub mod prompting;
pub mod validator;
