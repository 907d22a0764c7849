//! Compiler adapters: the internal oracle and a seam for an external vendor tool.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dialect::{extract_labels, parse_with_recovery, tokenize, CompilationUnit, LabelManifest, SourceSpan};

use super::check::validate_with_labels;
use super::diagnostic::{sort_diagnostics, Category, CompileReport, Diagnostic};
use super::profile::DialectProfile;

pub const INTERNAL_COMPILER_ID: &str = "internal-oracle";

#[derive(Clone, Debug)]
pub struct CompileOptions {
    /// Overrides the profile's setting when present.
    pub strict_labels: Option<bool>,
    /// Externally registered labels visible to the source.
    pub labels: Option<LabelManifest>,
    pub timeout: Duration,
    pub attempt: u32,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            strict_labels: None,
            labels: None,
            timeout: Duration::from_secs(30),
            attempt: 1,
        }
    }
}

impl CompileOptions {
    pub fn attempt(mut self, attempt: u32) -> Self {
        self.attempt = attempt;
        self
    }
}

/// Anything that turns source text into a [`CompileReport`]. Failures of the
/// underlying tool must map onto diagnostic categories or a timeout status.
pub trait CompilerAdapter: Send + Sync {
    fn id(&self) -> &str;
    fn compile(&self, source: &str, options: &CompileOptions) -> CompileReport;
}

/// Lexes and parses, turning lexical and syntax errors into diagnostics.
pub fn parse_for_compile(source: &str) -> (CompilationUnit, Vec<Diagnostic>) {
    let tokens = match tokenize(source) {
        Ok(t) => t,
        Err(e) => {
            let d = Diagnostic::error(Category::StructureViolation, e.span(), format!("lexical error: {e}"));
            return (CompilationUnit::default(), vec![d]);
        }
    };
    let (unit, errors) = parse_with_recovery(&tokens);
    let diags = errors
        .into_iter()
        .map(|e| Diagnostic::error(Category::StructureViolation, e.span, format!("syntax error: {e}")))
        .collect();
    (unit, diags)
}

/// The bundled validator acting as the compile oracle.
#[derive(Clone, Debug)]
pub struct InternalCompiler {
    profile: DialectProfile,
}

impl InternalCompiler {
    pub fn new(profile: DialectProfile) -> Self {
        Self { profile }
    }

    pub fn profile(&self) -> &DialectProfile {
        &self.profile
    }

    pub fn diagnostics(&self, source: &str, options: &CompileOptions) -> Vec<Diagnostic> {
        let (unit, mut diags) = parse_for_compile(source);
        if !diags.is_empty() {
            sort_diagnostics(&mut diags);
            return diags;
        }
        let profile = match options.strict_labels {
            Some(s) if s != self.profile.strict_labels => self.profile.clone().with_strict_labels(s),
            _ => self.profile.clone(),
        };
        validate_with_labels(&unit, &profile, options.labels.as_ref())
    }

    /// Extracts labels, then validates the stripped unit against them.
    pub fn compile_with_manifest(
        &self,
        source: &str,
        options: &CompileOptions,
    ) -> (CompileReport, Option<LabelManifest>) {
        let start = Instant::now();
        let (unit, diags) = parse_for_compile(source);
        if !diags.is_empty() {
            let report = CompileReport::from_diagnostics(diags, options.attempt, elapsed(start), self.id());
            return (report, None);
        }
        match extract_labels(&unit) {
            Ok((mut manifest, stripped)) => {
                if let Some(extra) = &options.labels {
                    manifest.labels.extend(extra.labels.iter().cloned());
                }
                let diags = validate_with_labels(&stripped, &self.profile, Some(&manifest));
                let report = CompileReport::from_diagnostics(diags, options.attempt, elapsed(start), self.id());
                (report, Some(manifest))
            }
            Err(crate::dialect::LabelError::DuplicateLabel { name, spans }) => {
                let span = spans.last().copied().unwrap_or_else(SourceSpan::origin);
                let d = Diagnostic::error(
                    Category::DuplicateDeclaration,
                    span,
                    format!("label `{name}` is registered more than once"),
                )
                .with_related(spans);
                let report = CompileReport::from_diagnostics(vec![d], options.attempt, elapsed(start), self.id());
                (report, None)
            }
        }
    }
}

fn elapsed(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

impl CompilerAdapter for InternalCompiler {
    fn id(&self) -> &str {
        INTERNAL_COMPILER_ID
    }

    fn compile(&self, source: &str, options: &CompileOptions) -> CompileReport {
        let start = Instant::now();
        let diags = self.diagnostics(source, options);
        let took = start.elapsed();
        if took > options.timeout {
            return CompileReport::timeout(options.attempt, took.as_millis() as u64, self.id());
        }
        CompileReport::from_diagnostics(diags, options.attempt, took.as_millis() as u64, self.id())
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    schema_version: u32,
    source: &'a str,
    strict_labels: bool,
}

#[derive(Deserialize)]
struct RemoteResponse {
    diagnostics: Vec<Diagnostic>,
    #[serde(default)]
    timeout: bool,
}

/// Forwards compilation to an external service that speaks the same JSON
/// schema as `POST /compile`. Transport failures become a timeout report.
pub struct HttpCompilerAdapter {
    url: String,
    id: String,
}

impl HttpCompilerAdapter {
    pub fn new(url: &str) -> Self {
        Self {
            url: url.to_string(),
            id: format!("external:{url}"),
        }
    }
}

impl CompilerAdapter for HttpCompilerAdapter {
    fn id(&self) -> &str {
        &self.id
    }

    fn compile(&self, source: &str, options: &CompileOptions) -> CompileReport {
        let start = Instant::now();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(options.timeout))
            .build()
            .into();
        let body = RemoteRequest {
            schema_version: 1,
            source,
            strict_labels: options.strict_labels.unwrap_or(false),
        };
        let result = agent
            .post(&self.url)
            .send_json(&body)
            .and_then(|mut r| r.body_mut().read_json::<RemoteResponse>());
        let ms = elapsed(start);
        match result {
            Ok(r) if !r.timeout => {
                let mut diags = r.diagnostics;
                sort_diagnostics(&mut diags);
                CompileReport::from_diagnostics(diags, options.attempt, ms, &self.id)
            }
            Ok(_) => CompileReport::timeout(options.attempt, ms, &self.id),
            Err(e) => {
                tracing::warn!(error = %e, "external compiler unreachable");
                CompileReport::timeout(options.attempt, ms, &self.id)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validator::CompileStatus;

    #[test]
    fn syntax_errors_become_structure_violations() {
        let c = InternalCompiler::new(DialectProfile::default_profile());
        let r = c.compile("PROGRAM P IF b END_PROGRAM", &CompileOptions::default());
        assert_eq!(r.status, CompileStatus::Failed);
        assert!(r.diagnostics.iter().all(|d| d.category == Category::StructureViolation));
        assert_eq!(r.compiler_id, INTERNAL_COMPILER_ID);
    }

    #[test]
    fn lex_error_reported() {
        let c = InternalCompiler::new(DialectProfile::default_profile());
        let r = c.compile("PROGRAM P x := 'abc", &CompileOptions::default());
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].category, Category::StructureViolation);
    }

    #[test]
    fn manifest_compile_accepts_strict_labels() {
        let c = InternalCompiler::new(DialectProfile::default_profile().with_strict_labels(true));
        let src = "PROGRAM Main VAR nn : INT; END_VAR nn := 1; END_PROGRAM";
        assert!(!c.compile(src, &CompileOptions::default()).is_success());
        let (r, m) = c.compile_with_manifest(src, &CompileOptions::default());
        assert!(r.is_success(), "{:?}", r.diagnostics);
        assert_eq!(m.unwrap().len(), 1);
    }

    #[test]
    fn unreachable_external_compiler_times_out() {
        let c = HttpCompilerAdapter::new("http://127.0.0.1:9/compile");
        let opts = CompileOptions {
            timeout: Duration::from_millis(500),
            ..CompileOptions::default()
        };
        assert_eq!(
            c.compile("PROGRAM Main ; END_PROGRAM", &opts).status,
            CompileStatus::Timeout
        );
    }
}
