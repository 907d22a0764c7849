//! Synthetic query generation from personas and functional flags, and
//! compile-filtered curation of (query, code) training pairs.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{GeneratorConfig, TextGenerator};
use crate::orchestrator::{null_sink, ChatSession, FinalStatus, Orchestrator, SessionSettings};
use crate::prompting::build_persona_prompt;
use crate::validator::{Category, CompileOptions, CompileReport};

pub const BUNDLED_PERSONAS: &str = include_str!("../../assets/datagen/personas.toml");
pub const BUNDLED_FLAGS: &str = include_str!("../../assets/datagen/flags.toml");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub style: String,
    /// Each contains one `{task}` placeholder.
    pub templates: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    /// Topic word every task of this flag mentions.
    pub keyword: String,
    pub tasks: Vec<String>,
}

#[derive(Deserialize)]
struct PersonaFile {
    persona: Vec<Persona>,
}

#[derive(Deserialize)]
struct FlagFile {
    flag: Vec<Flag>,
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid persona or flag file: {0}")]
    Config(String),
    #[error("n must be at least 1 and persona and flag lists must be non-empty")]
    EmptyInput,
    #[error("dataset sink failed after {accepted} accepted pairs: {source}")]
    Sink {
        accepted: usize,
        #[source]
        source: std::io::Error,
    },
}

pub fn parse_personas(text: &str) -> Result<Vec<Persona>, DatagenError> {
    let f: PersonaFile = toml::from_str(text).map_err(|e| DatagenError::Config(e.to_string()))?;
    for p in &f.persona {
        if p.templates.is_empty() || p.templates.iter().any(|t| !t.contains("{task}")) {
            return Err(DatagenError::Config(format!(
                "persona `{}` needs templates with {{task}}",
                p.name
            )));
        }
    }
    Ok(f.persona)
}

pub fn parse_flags(text: &str) -> Result<Vec<Flag>, DatagenError> {
    let f: FlagFile = toml::from_str(text).map_err(|e| DatagenError::Config(e.to_string()))?;
    for fl in &f.flag {
        let kw = fl.keyword.to_lowercase();
        if fl.tasks.is_empty() || fl.tasks.iter().any(|t| !t.to_lowercase().contains(&kw)) {
            return Err(DatagenError::Config(format!(
                "flag `{}` needs tasks that mention `{}`",
                fl.name, fl.keyword
            )));
        }
    }
    Ok(f.flag)
}

pub fn bundled_personas() -> Vec<Persona> {
    parse_personas(BUNDLED_PERSONAS).expect("bundled personas are valid")
}

pub fn bundled_flags() -> Vec<Flag> {
    parse_flags(BUNDLED_FLAGS).expect("bundled flags are valid")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub persona: String,
    pub flags: Vec<String>,
    pub seed: u64,
    pub text: String,
}

/// Builds `n` query specs. Persona `i % P` and flag `i % F` (over seeded
/// permutations) keep both coverages within one of each other. With a
/// generator the template draft is restated in the persona's voice.
pub fn generate_queries(
    personas: &[Persona],
    flags: &[Flag],
    n: usize,
    seed: u64,
    mut generator: Option<&mut dyn TextGenerator>,
) -> Result<Vec<QuerySpec>, DatagenError> {
    if n == 0 || personas.is_empty() || flags.is_empty() {
        return Err(DatagenError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p_order: Vec<usize> = (0..personas.len()).collect();
    let mut f_order: Vec<usize> = (0..flags.len()).collect();
    p_order.shuffle(&mut rng);
    f_order.shuffle(&mut rng);

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let persona = &personas[p_order[i % personas.len()]];
        let flag = &flags[f_order[i % flags.len()]];
        let template = &persona.templates[rng.gen_range(0..persona.templates.len())];
        let task = &flag.tasks[rng.gen_range(0..flag.tasks.len())];
        let spec_seed: u64 = rng.gen();
        let draft = template.replace("{task}", task);
        let text = match generator.as_deref_mut() {
            None => draft,
            Some(g) => restate(g, persona, flag, &draft),
        };
        out.push(QuerySpec {
            persona: persona.name.clone(),
            flags: vec![flag.name.clone()],
            seed: spec_seed,
            text,
        });
    }
    Ok(out)
}

/// Falls back to the draft when the model fails or drops the topic word.
fn restate(g: &mut dyn TextGenerator, persona: &Persona, flag: &Flag, draft: &str) -> String {
    let prompt = build_persona_prompt(&persona.name, &persona.style, draft);
    match g.generate(&prompt, &mut |_| {}) {
        Ok(o) => {
            let text = o
                .raw_text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("")
                .trim()
                .to_string();
            if text.to_lowercase().contains(&flag.keyword.to_lowercase()) {
                text
            } else {
                draft.to_string()
            }
        }
        Err(e) => {
            tracing::warn!(error = %e, "persona restatement failed; keeping draft");
            draft.to_string()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    CompileFailed,
    UnusedFB,
    NoCode,
    BackendError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_label: String,
    pub seed: u64,
    pub attempt: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuratedPair {
    pub query: String,
    pub code: String,
    pub report: CompileReport,
    pub provenance: Provenance,
}

/// One dataset line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub query: String,
    pub code: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationSummary {
    pub accepted: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl CurationSummary {
    pub fn total(&self) -> usize {
        self.accepted + self.rejected.values().sum::<usize>()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CurationOptions {
    /// Also accept programs that compiled only after repairs.
    pub allow_repaired: bool,
}

fn reject_reason(report: &CompileReport) -> RejectReason {
    if report.has_category(Category::UnusedFunctionBlock) {
        RejectReason::UnusedFB
    } else {
        RejectReason::CompileFailed
    }
}

/// Runs the pipeline once per spec and appends accepted pairs to `sink`.
/// Acceptance needs a first-shot compile success unless repairs are allowed.
pub fn curate_dataset(
    orchestrator: &Orchestrator,
    specs: &[QuerySpec],
    config: &GeneratorConfig,
    sink: &mut dyn Write,
    options: CurationOptions,
) -> Result<CurationSummary, DatagenError> {
    let mut summary = CurationSummary::default();
    let settings = SessionSettings {
        expansion: false,
        draft_mode: !options.allow_repaired,
        compile_enabled: options.allow_repaired,
    };
    let session = ChatSession::new("datagen", settings);
    for spec in specs {
        let cfg = config.clone().with_seed(spec.seed);
        let result = orchestrator.run_path(&cfg, &spec.text, &session, &[], &null_sink());
        let accepted = match (result.final_status, &result.output.code) {
            (FinalStatus::Failed(crate::orchestrator::FailureReason::NoCode), _) | (_, None) => {
                Err(RejectReason::NoCode)
            }
            (FinalStatus::Failed(crate::orchestrator::FailureReason::BackendError), _) => {
                Err(RejectReason::BackendError)
            }
            (FinalStatus::NotCompiled, Some(code)) => {
                let report = orchestrator.compiler.compile(code, &CompileOptions::default());
                if report.is_success() {
                    Ok((code.clone(), report))
                } else {
                    Err(reject_reason(&report))
                }
            }
            (status, Some(code)) if status.compiled() => {
                let report = result.reports.last().cloned().expect("compiled path has reports");
                Ok((code.clone(), report))
            }
            (_, Some(_)) => Err(result
                .reports
                .last()
                .map(reject_reason)
                .unwrap_or(RejectReason::CompileFailed)),
        };
        match accepted {
            Ok((code, report)) => {
                let pair = CuratedPair {
                    query: spec.text.clone(),
                    code,
                    provenance: Provenance {
                        config_label: cfg.label.clone(),
                        seed: spec.seed,
                        attempt: report.attempt,
                    },
                    report,
                };
                write_pair(sink, &pair).map_err(|source| DatagenError::Sink {
                    accepted: summary.accepted,
                    source,
                })?;
                summary.accepted += 1;
            }
            Err(reason) => *summary.rejected.entry(reason).or_default() += 1,
        }
    }
    sink.flush().map_err(|source| DatagenError::Sink {
        accepted: summary.accepted,
        source,
    })?;
    Ok(summary)
}

fn write_pair(sink: &mut dyn Write, pair: &CuratedPair) -> std::io::Result<()> {
    let rec = DatasetRecord {
        query: pair.query.clone(),
        code: pair.code.clone(),
        provenance: pair.provenance.clone(),
    };
    let line = serde_json::to_string(&rec).map_err(std::io::Error::other)?;
    writeln!(sink, "{line}")
}

/// Reads a dataset written by [`curate_dataset`].
pub fn read_dataset(text: &str) -> Result<Vec<DatasetRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
