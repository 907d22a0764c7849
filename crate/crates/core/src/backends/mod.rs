//! Text-generation backends and model-output parsing.

pub mod parse;
pub mod remote;
pub mod stub;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::{PromptBundle, DEFAULT_TOKEN_BUDGET};

pub use parse::parse_model_output;
pub use remote::RemoteChatGenerator;
pub use stub::{stub_behavior, FailureKind, StubGenerator, StubScript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    RemoteChat,
    Stub,
}

/// One model path: a backend plus whether retrieval feeds its prompt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub label: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub retrieval_enabled: bool,
    #[serde(default = "default_budget")]
    pub token_budget: usize,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub stub: Option<StubScript>,
    #[serde(default)]
    pub seed: u64,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

fn default_budget() -> usize {
    DEFAULT_TOKEN_BUDGET
}

fn default_timeout() -> u64 {
    60_000
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config `{0}`: a remote backend needs an endpoint and a model name")]
    MissingRemoteFields(String),
    #[error("config `{0}`: a stub backend needs a script")]
    MissingScript(String),
    #[error("config `{0}`: temperature must be a finite number >= 0")]
    Temperature(String),
    #[error("config label must not be empty")]
    EmptyLabel,
    #[error("duplicate config label `{0}`")]
    DuplicateLabel(String),
    #[error("config file: {0}")]
    Parse(String),
}

impl GeneratorConfig {
    pub fn stub(label: &str, script: StubScript, retrieval_enabled: bool) -> Self {
        Self {
            label: label.to_string(),
            kind: BackendKind::Stub,
            endpoint: None,
            model_name: None,
            temperature: 0.0,
            retrieval_enabled,
            token_budget: DEFAULT_TOKEN_BUDGET,
            timeout_ms: default_timeout(),
            stub: Some(script),
            seed: 0,
            api_key_env: None,
        }
    }

    pub fn remote(label: &str, endpoint: &str, model: &str, retrieval_enabled: bool) -> Self {
        Self {
            label: label.to_string(),
            kind: BackendKind::RemoteChat,
            endpoint: Some(endpoint.to_string()),
            model_name: Some(model.to_string()),
            temperature: 0.2,
            retrieval_enabled,
            token_budget: DEFAULT_TOKEN_BUDGET,
            timeout_ms: default_timeout(),
            stub: None,
            seed: 0,
            api_key_env: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.label.trim().is_empty() {
            return Err(ConfigError::EmptyLabel);
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ConfigError::Temperature(self.label.clone()));
        }
        match self.kind {
            BackendKind::RemoteChat if self.endpoint.is_none() || self.model_name.is_none() => {
                Err(ConfigError::MissingRemoteFields(self.label.clone()))
            }
            BackendKind::Stub if self.stub.is_none() => Err(ConfigError::MissingScript(self.label.clone())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinishReason {
    Complete,
    Truncated,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationOutput {
    pub raw_text: String,
    pub code: Option<String>,
    pub explanation: Option<String>,
    pub finish_reason: FinishReason,
}

#[derive(Clone, Debug, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendError {
    #[error("backend timed out: {0}")]
    Timeout(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("backend rejected credentials: {0}")]
    Auth(String),
    #[error("backend unreachable: {0}")]
    Transport(String),
    #[error("invalid backend config: {0}")]
    Config(String),
}

/// A generation backend. `sink` receives streamed text chunks as they
/// arrive; the returned output holds the full text.
pub trait TextGenerator: Send {
    fn label(&self) -> &str;
    fn generate(&mut self, prompt: &PromptBundle, sink: &mut dyn FnMut(&str))
        -> Result<GenerationOutput, BackendError>;
}

pub const BUNDLED_STUB_CONFIGS: &str = include_str!("../../assets/configs/stub.toml");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    config: Vec<GeneratorConfig>,
}

/// Parses a `[[config]]` list; labels must be unique and every entry valid.
pub fn parse_configs(text: &str) -> Result<Vec<GeneratorConfig>, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    for c in &file.config {
        c.validate()?;
        if !seen.insert(c.label.clone()) {
            return Err(ConfigError::DuplicateLabel(c.label.clone()));
        }
    }
    Ok(file.config)
}

pub fn bundled_stub_configs() -> Vec<GeneratorConfig> {
    parse_configs(BUNDLED_STUB_CONFIGS).expect("bundled configs are valid")
}

/// Builds the backend a config describes.
pub fn create_generator(config: &GeneratorConfig) -> Result<Box<dyn TextGenerator>, BackendError> {
    config.validate().map_err(|e| BackendError::Config(e.to_string()))?;
    Ok(match config.kind {
        BackendKind::Stub => Box::new(StubGenerator::new(config.clone())),
        BackendKind::RemoteChat => Box::new(RemoteChatGenerator::new(config.clone())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants() {
        assert!(GeneratorConfig::stub("s", StubScript::EmitCanonical, true)
            .validate()
            .is_ok());
        let mut remote = GeneratorConfig::remote("r", "http://localhost:1/v1", "m", true);
        assert!(remote.validate().is_ok());
        remote.model_name = None;
        assert_eq!(remote.validate(), Err(ConfigError::MissingRemoteFields("r".into())));
        let mut s = GeneratorConfig::stub("s", StubScript::EmitProse, false);
        s.temperature = -1.0;
        assert!(s.validate().is_err());
        s.temperature = 0.0;
        s.stub = None;
        assert!(s.validate().is_err());
    }

    #[test]
    fn config_files() {
        let cs = bundled_stub_configs();
        assert_eq!(cs.len(), 3);
        assert!(cs[0].retrieval_enabled && !cs[1].retrieval_enabled);
        let remote = parse_configs(include_str!("../../assets/configs/remote.example.toml")).unwrap();
        assert!(remote.iter().all(|c| c.kind == BackendKind::RemoteChat));
        let dup = "[[config]]\nlabel = \"a\"\nkind = \"Stub\"\nstub = { script = \"emit_prose\" }\n".repeat(2);
        assert_eq!(parse_configs(&dup), Err(ConfigError::DuplicateLabel("a".into())));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = GeneratorConfig::stub(
            "stub-rag",
            StubScript::EmitWithDefects {
                k: 2,
                categories: vec![crate::validator::Category::TypeMismatch],
                fix_one_per_repair: true,
            },
            true,
        );
        let text = toml::to_string(&c).unwrap();
        let back: GeneratorConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
