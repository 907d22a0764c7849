//! The bounded compile-repair loop and success classification.

use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, GenerationOutput, TextGenerator};
use crate::prompting::build_repair_prompt;
use crate::validator::{CompileReport, CompileStatus, DialectProfile};

/// One initial compilation plus at most two repairs.
pub const MAX_COMPILE_ATTEMPTS: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureReason {
    BudgetExhausted,
    Timeout,
    NoCode,
    BackendError,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::BudgetExhausted => "BudgetExhausted",
            FailureReason::Timeout => "Timeout",
            FailureReason::NoCode => "NoCode",
            FailureReason::BackendError => "BackendError",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalStatus {
    CompiledClean,
    CompiledAfterRepair(u32),
    Failed(FailureReason),
    /// Code was produced but compilation was switched off.
    NotCompiled,
}

impl FinalStatus {
    pub fn compiled(self) -> bool {
        matches!(self, FinalStatus::CompiledClean | FinalStatus::CompiledAfterRepair(_))
    }

    pub fn repairs(self) -> u32 {
        match self {
            FinalStatus::CompiledAfterRepair(n) => n,
            _ => 0,
        }
    }

    pub fn failure(self) -> Option<FailureReason> {
        match self {
            FinalStatus::Failed(r) => Some(r),
            _ => None,
        }
    }
}

/// Derives the final status from the attempt reports.
pub fn classify_success(reports: &[CompileReport], output: &GenerationOutput) -> FinalStatus {
    if output.code.is_none() {
        return FinalStatus::Failed(FailureReason::NoCode);
    }
    if let Some(i) = reports.iter().position(CompileReport::is_success) {
        return match i {
            0 => FinalStatus::CompiledClean,
            n => FinalStatus::CompiledAfterRepair(n as u32),
        };
    }
    match reports.last() {
        None => FinalStatus::NotCompiled,
        Some(r) if r.status == CompileStatus::Timeout => FinalStatus::Failed(FailureReason::Timeout),
        Some(_) => FinalStatus::Failed(FailureReason::BudgetExhausted),
    }
}

#[derive(Clone, Debug)]
pub struct RepairOutcome {
    pub code: String,
    /// Output of the last generation that produced `code`.
    pub output: GenerationOutput,
    pub reports: Vec<CompileReport>,
    pub status: FinalStatus,
    pub error: Option<BackendError>,
}

/// Compiles `initial`, then regenerates from diagnostics until it compiles,
/// the compiler times out, or three compilations have happened. `compile`
/// receives the source and the 1-based attempt number.
pub fn repair_loop(
    initial: GenerationOutput,
    generator: &mut dyn TextGenerator,
    profile: &DialectProfile,
    compile: &mut dyn FnMut(&str, u32) -> CompileReport,
    on_report: &mut dyn FnMut(&CompileReport),
) -> RepairOutcome {
    let mut output = initial;
    let mut code = output.code.clone().unwrap_or_default();
    let mut reports: Vec<CompileReport> = Vec::new();
    let mut error = None;
    for attempt in 1..=MAX_COMPILE_ATTEMPTS {
        let report = compile(&code, attempt);
        on_report(&report);
        let status = report.status;
        reports.push(report);
        if status != CompileStatus::Failed || attempt == MAX_COMPILE_ATTEMPTS {
            break;
        }
        let prompt = match build_repair_prompt(&code, reports.last().expect("report just pushed"), profile) {
            Ok(p) => p,
            Err(e) => {
                error = Some(BackendError::Protocol(e.to_string()));
                break;
            }
        };
        match generator.generate(&prompt, &mut |_| {}) {
            Ok(next) => match next.code.clone() {
                Some(c) => {
                    code = c;
                    output = next;
                }
                // A repair reply without code leaves nothing to compile.
                None => break,
            },
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    let mut status = classify_success(&reports, &output);
    if let (FinalStatus::Failed(FailureReason::BudgetExhausted), Some(e)) = (status, &error) {
        status = FinalStatus::Failed(match e {
            BackendError::Timeout(_) => FailureReason::Timeout,
            _ => FailureReason::BackendError,
        });
    }
    RepairOutcome {
        code,
        output,
        reports,
        status,
        error,
    }
}
