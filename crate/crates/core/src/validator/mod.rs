//! Dialect profiles, static checks, diagnostics, and the compile oracle.

pub mod check;
pub mod compiler;
pub mod diagnostic;
pub mod inject;
pub mod profile;
pub mod types;

pub use check::{validate, validate_with_labels};
pub use compiler::{
    parse_for_compile, CompileOptions, CompilerAdapter, HttpCompilerAdapter, InternalCompiler, INTERNAL_COMPILER_ID,
};
pub use diagnostic::{sort_diagnostics, to_json_lines, Category, CompileReport, CompileStatus, Diagnostic, Severity};
pub use inject::{defect_corpus, inject, inject_all, inject_source, Defect, DefectCase, InjectError};
pub use profile::{
    load_profile, CallableKind, DialectProfile, FbCatalog, IdentifierRules, Param, ProfileError, Signature,
};
pub use types::Ty;
