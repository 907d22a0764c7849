//! Competitive fan-out across model paths, the compile-repair loop, and
//! session persistence.

pub mod repair;
pub mod session;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{create_generator, FinishReason, GenerationOutput, GeneratorConfig, TextGenerator};
use crate::knowledge::KnowledgeIndex;
use crate::prompting::{
    build_generation_prompt, condense_history, expand_query, retrieve_context, PromptOptions, Retrieved,
};
use crate::validator::{CompileOptions, CompileReport, CompilerAdapter, DialectProfile};

pub use repair::{classify_success, repair_loop, FailureReason, FinalStatus, RepairOutcome, MAX_COMPILE_ATTEMPTS};
pub use session::{now_ms, ChatSession, ChatTurn, Role, SessionError, SessionGuard, SessionSettings, SessionStore};

/// Outcome of one model path for one user turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathResult {
    pub config_label: String,
    pub output: GenerationOutput,
    pub reports: Vec<CompileReport>,
    pub final_status: FinalStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanded_query: Option<String>,
}

impl PathResult {
    fn failed(label: &str, reason: FailureReason, error: String) -> Self {
        Self {
            config_label: label.to_string(),
            output: GenerationOutput {
                raw_text: String::new(),
                code: None,
                explanation: None,
                finish_reason: FinishReason::Error,
            },
            reports: Vec::new(),
            final_status: FinalStatus::Failed(reason),
            error: Some(error),
            expanded_query: None,
        }
    }
}

/// Progress notifications, tagged with the path they belong to. Per path
/// the order is deltas, then compiles, then `PathDone`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum PathEvent {
    Delta {
        config_label: String,
        text: String,
    },
    Compile {
        config_label: String,
        report: CompileReport,
    },
    PathDone {
        result: PathResult,
    },
}

pub type EventSink = Arc<dyn Fn(PathEvent) + Send + Sync>;

pub fn null_sink() -> EventSink {
    Arc::new(|_| {})
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("unknown model label `{0}`")]
    UnknownModelLabel(String),
    #[error("no model configurations given")]
    NoConfigs,
    #[error("follow-up needs a selected model")]
    NoSelectedModel,
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Shared, read-only pipeline state. Cheap to clone.
#[derive(Clone)]
pub struct Orchestrator {
    pub profile: DialectProfile,
    pub compiler: Arc<dyn CompilerAdapter>,
    pub index: Arc<KnowledgeIndex>,
    pub configs: Vec<GeneratorConfig>,
    pub path_timeout: Duration,
    /// Share of a path's token budget reserved for conversation history.
    pub history_fraction: usize,
}

impl Orchestrator {
    pub fn new(
        profile: DialectProfile,
        compiler: Arc<dyn CompilerAdapter>,
        index: Arc<KnowledgeIndex>,
        configs: Vec<GeneratorConfig>,
    ) -> Self {
        Self {
            profile,
            compiler,
            index,
            configs,
            path_timeout: Duration::from_secs(300),
            history_fraction: 4,
        }
    }

    pub fn with_path_timeout(mut self, timeout: Duration) -> Self {
        self.path_timeout = timeout;
        self
    }

    pub fn config(&self, label: &str) -> Option<&GeneratorConfig> {
        self.configs.iter().find(|c| c.label == label)
    }

    /// Runs every config concurrently and returns results in config order.
    pub fn answer_initial(
        &self,
        query: &str,
        session: &ChatSession,
        configs: &[GeneratorConfig],
        sink: &EventSink,
    ) -> Vec<PathResult> {
        let (tx, rx) = mpsc::channel::<(usize, PathResult)>();
        let mut closed = Vec::with_capacity(configs.len());
        for (i, config) in configs.iter().enumerate() {
            let tx = tx.clone();
            let this = self.clone();
            let config = config.clone();
            let query = query.to_string();
            let session = session.clone();
            let open = Arc::new(AtomicBool::new(true));
            closed.push(open.clone());
            let outer = sink.clone();
            // Events of a path that already timed out are dropped.
            let gated: EventSink = Arc::new(move |e| {
                if open.load(Ordering::Acquire) {
                    outer(e)
                }
            });
            std::thread::spawn(move || {
                let r = this.run_path(&config, &query, &session, &[], &gated);
                let _ = tx.send((i, r));
            });
        }
        drop(tx);

        let deadline = Instant::now() + self.path_timeout;
        let mut results: Vec<Option<PathResult>> = vec![None; configs.len()];
        let mut pending = configs.len();
        while pending > 0 {
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok((i, r)) => {
                    results[i] = Some(r);
                    pending -= 1;
                }
                Err(_) => break,
            }
        }
        results
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.unwrap_or_else(|| {
                    closed[i].store(false, Ordering::Release);
                    let r = PathResult::failed(
                        &configs[i].label,
                        FailureReason::Timeout,
                        format!("path did not finish within {} ms", self.path_timeout.as_millis()),
                    );
                    sink(PathEvent::PathDone { result: r.clone() });
                    r
                })
            })
            .collect()
    }

    /// Answers with the session's selected model and condensed history.
    pub fn answer_followup(
        &self,
        query: &str,
        session: &ChatSession,
        sink: &EventSink,
    ) -> Result<PathResult, OrchestratorError> {
        let label = session
            .selected_model
            .as_deref()
            .ok_or(OrchestratorError::NoSelectedModel)?;
        let config = self
            .config(label)
            .ok_or_else(|| OrchestratorError::UnknownModelLabel(label.to_string()))?;
        let budget = config.token_budget / self.history_fraction.max(1);
        let history = condense_history(&session.turns, budget);
        Ok(self.run_path(config, query, session, &history, sink))
    }

    /// One path: expansion, retrieval, prompt, generation, compile-repair.
    pub fn run_path(
        &self,
        config: &GeneratorConfig,
        query: &str,
        session: &ChatSession,
        history: &[ChatTurn],
        sink: &EventSink,
    ) -> PathResult {
        let result = self.run_path_inner(config, query, session, history, sink);
        sink(PathEvent::PathDone { result: result.clone() });
        result
    }

    fn run_path_inner(
        &self,
        config: &GeneratorConfig,
        query: &str,
        session: &ChatSession,
        history: &[ChatTurn],
        sink: &EventSink,
    ) -> PathResult {
        let label = config.label.as_str();
        let mut generator: Box<dyn TextGenerator> = match create_generator(config) {
            Ok(g) => g,
            Err(e) => return PathResult::failed(label, FailureReason::BackendError, e.to_string()),
        };

        let mut expanded_query = None;
        let effective = if session.settings.expansion {
            let outcome = expand_query(query, generator.as_mut());
            if let Some(w) = &outcome.warning {
                tracing::warn!(label, warning = %w, "query expansion skipped");
            }
            if outcome.expanded {
                expanded_query = Some(outcome.text.clone());
            }
            outcome.text
        } else {
            query.to_string()
        };

        let retrieved = if config.retrieval_enabled {
            match retrieve_context(&self.index, &effective) {
                Ok(r) => r,
                Err(e) => {
                    tracing::warn!(label, error = %e, "retrieval failed; continuing without context");
                    Retrieved::new()
                }
            }
        } else {
            Retrieved::new()
        };

        let options = PromptOptions {
            token_budget: config.token_budget,
        };
        let prompt = match build_generation_prompt(&effective, &retrieved, &self.profile, history, &options) {
            Ok(p) => p,
            Err(e) => return PathResult::failed(label, FailureReason::BackendError, e.to_string()),
        };
        tracing::debug!(label, digest = %prompt.digest(), tokens = prompt.token_estimate, "prompt built");

        let delta_sink = sink.clone();
        let owned_label = label.to_string();
        let output = match generator.generate(&prompt, &mut |d| {
            delta_sink(PathEvent::Delta {
                config_label: owned_label.clone(),
                text: d.to_string(),
            })
        }) {
            Ok(o) => o,
            Err(e) => {
                let reason = match e {
                    crate::backends::BackendError::Timeout(_) => FailureReason::Timeout,
                    _ => FailureReason::BackendError,
                };
                let mut r = PathResult::failed(label, reason, e.to_string());
                r.expanded_query = expanded_query;
                return r;
            }
        };

        if output.code.is_none() {
            return PathResult {
                config_label: label.to_string(),
                output,
                reports: Vec::new(),
                final_status: FinalStatus::Failed(FailureReason::NoCode),
                error: None,
                expanded_query,
            };
        }
        if !session.settings.compiles() {
            return PathResult {
                config_label: label.to_string(),
                output,
                reports: Vec::new(),
                final_status: FinalStatus::NotCompiled,
                error: None,
                expanded_query,
            };
        }

        let compiler = self.compiler.clone();
        let outcome = repair_loop(
            output,
            generator.as_mut(),
            &self.profile,
            &mut |src, attempt| compiler.compile(src, &CompileOptions::default().attempt(attempt)),
            &mut |report| {
                sink(PathEvent::Compile {
                    config_label: label.to_string(),
                    report: report.clone(),
                })
            },
        );
        PathResult {
            config_label: label.to_string(),
            output: outcome.output,
            reports: outcome.reports,
            final_status: outcome.status,
            error: outcome.error.map(|e| e.to_string()),
            expanded_query,
        }
    }

    /// Handles one user message in a stored session: initial fan-out when no
    /// model is selected yet, otherwise a single-path follow-up. The user and
    /// assistant turns are appended to the store.
    pub fn converse(
        &self,
        store: &SessionStore,
        session_id: &str,
        query: &str,
        sink: &EventSink,
    ) -> Result<Vec<PathResult>, OrchestratorError> {
        let _guard = store.begin_turn(session_id)?;
        let session = store.load(session_id)?;
        let results = match &session.selected_model {
            None => {
                if self.configs.is_empty() {
                    return Err(OrchestratorError::NoConfigs);
                }
                self.answer_initial(query, &session, &self.configs, sink)
            }
            Some(_) => vec![self.answer_followup(query, &session, sink)?],
        };
        let ts = now_ms();
        store.append_turn(session_id, &ChatTurn::user(query, ts))?;
        for r in &results {
            let turn = ChatTurn::assistant(&r.config_label, &r.output.raw_text, r.reports.last().cloned(), ts);
            store.append_turn(session_id, &turn)?;
        }
        Ok(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{FailureKind, StubScript};
    use crate::knowledge::{seed_index, HashingEmbedder};
    use crate::validator::{Category, InternalCompiler};

    fn orch(configs: Vec<GeneratorConfig>) -> Orchestrator {
        let profile = DialectProfile::default_profile();
        let index = KnowledgeIndex::in_memory(Box::new(HashingEmbedder::default()));
        seed_index(&index).unwrap();
        Orchestrator::new(
            profile.clone(),
            Arc::new(InternalCompiler::new(profile)),
            Arc::new(index),
            configs,
        )
    }

    fn three() -> Vec<GeneratorConfig> {
        vec![
            GeneratorConfig::stub("canon", StubScript::EmitCanonical, true),
            GeneratorConfig::stub("prose", StubScript::EmitProse, false),
            GeneratorConfig::stub(
                "defects",
                StubScript::EmitWithDefects {
                    k: 1,
                    categories: vec![Category::UndeclaredVariable],
                    fix_one_per_repair: true,
                },
                true,
            ),
        ]
    }

    #[test]
    fn three_paths_three_statuses() {
        let o = orch(three());
        let s = ChatSession::new("t", SessionSettings::default());
        let r = o.answer_initial("toggle a lamp", &s, &o.configs, &null_sink());
        let st: Vec<_> = r.iter().map(|p| p.final_status).collect();
        assert_eq!(
            st,
            vec![
                FinalStatus::CompiledClean,
                FinalStatus::Failed(FailureReason::NoCode),
                FinalStatus::CompiledAfterRepair(1)
            ]
        );
    }

    #[test]
    fn draft_mode_skips_compilation() {
        let o = orch(three());
        let mut s = ChatSession::new("t", SessionSettings::default());
        s.settings.draft_mode = true;
        let r = o.answer_initial("toggle a lamp", &s, &o.configs, &null_sink());
        assert!(r.iter().all(|p| p.reports.is_empty()));
    }

    #[test]
    fn failing_path_is_isolated() {
        let o = orch(three());
        let s = ChatSession::new("t", SessionSettings::default());
        let mut with_fault = three();
        with_fault.insert(
            1,
            GeneratorConfig::stub(
                "broken",
                StubScript::Fail {
                    kind: FailureKind::Auth,
                },
                false,
            ),
        );
        let strip = |mut v: Vec<PathResult>| {
            for p in &mut v {
                for r in &mut p.reports {
                    r.elapsed_ms = 0;
                }
            }
            v
        };
        let base = strip(o.answer_initial("count parts", &s, &o.configs, &null_sink()));
        let mut faulty = strip(o.answer_initial("count parts", &s, &with_fault, &null_sink()));
        let broken = faulty.remove(1);
        assert_eq!(broken.final_status, FinalStatus::Failed(FailureReason::BackendError));
        assert_eq!(faulty, base);
    }

    #[test]
    fn followup_uses_selected_model() {
        let o = orch(three());
        let mut s = ChatSession::new("t", SessionSettings::default());
        s.selected_model = Some("canon".into());
        let r = o.answer_followup("again", &s, &null_sink()).unwrap();
        assert_eq!(r.config_label, "canon");
        s.selected_model = Some("ghost".into());
        assert!(matches!(
            o.answer_followup("again", &s, &null_sink()),
            Err(OrchestratorError::UnknownModelLabel(_))
        ));
    }
}
