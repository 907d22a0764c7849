//! Deterministic scripted backend for offline tests and benchmarks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{parse_model_output, BackendError, GenerationOutput, GeneratorConfig, TextGenerator};
use crate::assets::CANONICAL_EXAMPLE;
use crate::knowledge::{suffix_semantics, VariantTag};
use crate::prompting::{
    infer_categories, PromptBundle, PromptTask, AUGMENT_DESCRIPTION, AUGMENT_TAGS, EXPAND_QUERY, PERSONA_DRAFT,
    SECTION_FUNCTION_BLOCKS,
};
use crate::validator::{inject_source, Category, DialectProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Timeout,
    Protocol,
    Auth,
    Transport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "script", rename_all = "snake_case")]
pub enum StubScript {
    /// Always the canonical example.
    EmitCanonical,
    /// The canonical example with `k` seeded defects, cycling through
    /// `categories`. With `fix_one_per_repair`, call `i` carries `k - i`.
    EmitWithDefects {
        k: usize,
        #[serde(default)]
        categories: Vec<Category>,
        #[serde(default)]
        fix_one_per_repair: bool,
    },
    /// Prose without any code.
    EmitProse,
    /// Uses function blocks named in the retrieved reference when present;
    /// without retrieval it mostly invents vendor-incorrect names.
    EmitCatalogAware,
    /// Every call fails.
    Fail { kind: FailureKind },
}

pub const DEFAULT_DEFECT_CATEGORIES: [Category; 4] = [
    Category::UndeclaredVariable,
    Category::TypeMismatch,
    Category::ReservedWordViolation,
    Category::DisallowedInstruction,
];

/// Planned defects for a call. MissingProgram goes last because it removes
/// the PROGRAM the other injections target.
fn planned_defects(k: usize, categories: &[Category], remaining: usize) -> Vec<Category> {
    let cats: &[Category] = if categories.is_empty() {
        &DEFAULT_DEFECT_CATEGORIES
    } else {
        categories
    };
    let mut plan: Vec<Category> = (0..k).map(|i| cats[i % cats.len()]).collect();
    plan.truncate(remaining);
    plan.sort_by_key(|c| *c == Category::MissingProgram);
    plan
}

fn fenced(code: &str, explanation: &str) -> String {
    format!("```st\n{}\n```\n{explanation}\n", code.trim_end())
}

fn hash64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
        h.update([0]);
    }
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
}

/// The request line of a generation prompt.
fn request_of(prompt: &PromptBundle) -> &str {
    prompt
        .user_text
        .split_once("Request:\n")
        .map(|(_, r)| r.trim())
        .unwrap_or(prompt.user_text.trim())
}

/// Function block names in the retrieved reference section, in order.
fn retrieved_names(prompt: &PromptBundle) -> Vec<String> {
    let Some(section) = prompt.section(SECTION_FUNCTION_BLOCKS) else {
        return Vec::new();
    };
    section
        .split("\n---\n")
        .filter_map(|doc| {
            doc.lines()
                .find(|l| !l.starts_with('#') && !l.trim().is_empty())
                .and_then(|l| l.split_once(": "))
                .map(|(n, _)| n.trim())
        })
        .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
        .map(str::to_string)
        .collect()
}

/// A small program built around one catalog entry, or `None` if there is no
/// template for it.
pub fn program_using(name: &str) -> Option<String> {
    let upper = name.to_ascii_uppercase();
    let (decls, body) = match upper.as_str() {
        "TON" | "TOF" | "TP" => (
            format!("    delayTimer : {upper};\n    enable : BOOL;\n    output : BOOL;\n"),
            "delayTimer(IN := enable, PT := T#2s);\noutput := delayTimer.Q;\n".to_string(),
        ),
        "R_TRIG" | "F_TRIG" => (
            format!("    edgeDetect : {upper};\n    button : BOOL;\n    presses : INT;\n"),
            "edgeDetect(CLK := button);\nIF edgeDetect.Q THEN\n    presses := presses + 1;\nEND_IF;\n".to_string(),
        ),
        "CTU" => (
            "    partCounter : CTU;\n    pulse : BOOL;\n    reset : BOOL;\n    done : BOOL;\n".to_string(),
            "partCounter(CU := pulse, R := reset, PV := 10);\ndone := partCounter.Q;\n".to_string(),
        ),
        "CTD" => (
            "    stockCounter : CTD;\n    pulse : BOOL;\n    reload : BOOL;\n    empty : BOOL;\n".to_string(),
            "stockCounter(CD := pulse, LD := reload, PV := 10);\nempty := stockCounter.Q;\n".to_string(),
        ),
        "ZPUSH" | "ZPUSHP" | "ZPOP" | "ZPOPP" => (
            "    request : BOOL;\n    saveArea : WORD;\n    ok : BOOL;\n".to_string(),
            format!("ok := {upper}(request, saveArea);\n"),
        ),
        "INC" | "INCP" | "INC_U" | "INCP_U" => (
            "    request : BOOL;\n    value : INT;\n    ok : BOOL;\n".to_string(),
            format!("ok := {upper}(request, value);\n"),
        ),
        _ => return None,
    };
    Some(format!("PROGRAM Main\nVAR\n{decls}END_VAR\n{body}END_PROGRAM\n"))
}

const GENERIC_PROGRAM: &str = "PROGRAM Main\nVAR\n    inputSignal : BOOL;\n    enabled : BOOL;\n    outputSignal : BOOL;\nEND_VAR\noutputSignal := inputSignal AND enabled;\nEND_PROGRAM\n";

/// What a model without vendor knowledge writes: a generic timer type name
/// that the dialect does not know.
const MISUSED_FB_PROGRAM: &str = "PROGRAM Main\nVAR\n    delay : TIMER;\n    enable : BOOL;\n    output : BOOL;\nEND_VAR\ndelay(IN := enable, PT := T#2s);\noutput := delay.Q;\nEND_PROGRAM\n";

fn augment_reply(prompt: &PromptBundle) -> String {
    let text = &prompt.user_text;
    let tags: BTreeSet<VariantTag> = text
        .lines()
        .find_map(|l| l.strip_prefix(AUGMENT_TAGS))
        .unwrap_or("")
        .split(',')
        .filter_map(|t| VariantTag::parse(t.trim()))
        .collect();
    let raw = text
        .split_once(&format!("{AUGMENT_DESCRIPTION}\n"))
        .map(|(_, d)| d.trim())
        .unwrap_or("");
    let mut out = raw.to_string();
    for s in suffix_semantics(&tags) {
        out.push(' ');
        out.push_str(s);
    }
    out
}

fn persona_reply(prompt: &PromptBundle) -> String {
    prompt
        .user_text
        .lines()
        .find_map(|l| l.strip_prefix(PERSONA_DRAFT))
        .unwrap_or("")
        .trim()
        .to_string()
}

fn expand_reply(prompt: &PromptBundle) -> String {
    let query = prompt
        .user_text
        .lines()
        .find_map(|l| l.strip_prefix(EXPAND_QUERY))
        .unwrap_or("")
        .trim();
    let cats = infer_categories(query);
    if cats.is_empty() {
        format!("{query}\nRestated: a Structured Text program for this request.")
    } else {
        format!(
            "{query}\nRestated: a Structured Text program involving {}.",
            cats.join(", ")
        )
    }
}

/// Raw reply of a code-producing call (`Generate` or `Repair`).
/// `state` carries the last clean program between calls of one path.
pub fn stub_behavior(
    script: &StubScript,
    call_index: usize,
    prompt: &PromptBundle,
    seed: u64,
    state: &mut Option<String>,
) -> Result<String, BackendError> {
    match script {
        StubScript::Fail { kind } => {
            let msg = "scripted failure".to_string();
            Err(match kind {
                FailureKind::Timeout => BackendError::Timeout(msg),
                FailureKind::Protocol => BackendError::Protocol(msg),
                FailureKind::Auth => BackendError::Auth(msg),
                FailureKind::Transport => BackendError::Transport(msg),
            })
        }
        StubScript::EmitProse => {
            Ok("A timer-based program would be a good fit here. Consider using an on-delay timer.".into())
        }
        StubScript::EmitCanonical => Ok(fenced(CANONICAL_EXAMPLE, "This is the reference program.")),
        StubScript::EmitWithDefects {
            k,
            categories,
            fix_one_per_repair,
        } => {
            let remaining = if *fix_one_per_repair {
                k.saturating_sub(call_index)
            } else {
                *k
            };
            let plan = planned_defects(*k, categories, remaining);
            let code = inject_source(CANONICAL_EXAMPLE, &plan, &DialectProfile::default_profile())
                .map_err(|e| BackendError::Protocol(format!("stub could not build program: {e}")))?;
            Ok(fenced(&code, &format!("Program with {} open issue(s).", plan.len())))
        }
        StubScript::EmitCatalogAware => {
            if prompt.task == PromptTask::Repair {
                // A repair returns the clean program the path intended, or
                // repeats its own mistake if it never had one.
                let code = state.clone().unwrap_or_else(|| MISUSED_FB_PROGRAM.to_string());
                return Ok(fenced(&code, "Corrected program."));
            }
            let request = request_of(prompt);
            let h = hash64(&[&seed.to_be_bytes(), request.as_bytes()]);
            let names = retrieved_names(prompt);
            if !names.is_empty() {
                let clean = names
                    .iter()
                    .find_map(|n| program_using(n))
                    .unwrap_or_else(|| GENERIC_PROGRAM.to_string());
                *state = Some(clean.clone());
                if h.is_multiple_of(10) {
                    let broken = inject_source(
                        &clean,
                        &[Category::UndeclaredVariable],
                        &DialectProfile::default_profile(),
                    )
                    .map_err(|e| BackendError::Protocol(e.to_string()))?;
                    return Ok(fenced(&broken, "Program using the retrieved function blocks."));
                }
                Ok(fenced(&clean, "Program using the retrieved function blocks."))
            } else if h % 10 < 4 {
                *state = Some(GENERIC_PROGRAM.to_string());
                Ok(fenced(GENERIC_PROGRAM, "Generic program."))
            } else {
                *state = None;
                Ok(fenced(MISUSED_FB_PROGRAM, "Program using a timer."))
            }
        }
    }
}

/// Scripted backend with a per-path call counter.
pub struct StubGenerator {
    config: GeneratorConfig,
    calls: usize,
    state: Option<String>,
}

impl StubGenerator {
    pub fn new(config: GeneratorConfig) -> Self {
        Self {
            config,
            calls: 0,
            state: None,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

const CHUNK: usize = 48;

impl TextGenerator for StubGenerator {
    fn label(&self) -> &str {
        &self.config.label
    }

    fn generate(
        &mut self,
        prompt: &PromptBundle,
        sink: &mut dyn FnMut(&str),
    ) -> Result<GenerationOutput, BackendError> {
        let script = self
            .config
            .stub
            .clone()
            .ok_or_else(|| BackendError::Config("stub without script".into()))?;
        let raw = match (prompt.task, &script) {
            (_, StubScript::Fail { .. }) => {
                stub_behavior(&script, self.calls, prompt, self.config.seed, &mut self.state)?
            }
            (PromptTask::Augment, _) => augment_reply(prompt),
            (PromptTask::Expand, _) => expand_reply(prompt),
            (PromptTask::Persona, _) => persona_reply(prompt),
            (PromptTask::Generate | PromptTask::Repair, _) => {
                let r = stub_behavior(&script, self.calls, prompt, self.config.seed, &mut self.state)?;
                self.calls += 1;
                r
            }
        };
        let chars: Vec<char> = raw.chars().collect();
        for piece in chars.chunks(CHUNK) {
            sink(&piece.iter().collect::<String>());
        }
        Ok(parse_model_output(&raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::{build_generation_prompt, PromptOptions, Retrieved};
    use crate::validator::{CompileOptions, CompilerAdapter, InternalCompiler};

    fn prompt(query: &str) -> PromptBundle {
        build_generation_prompt(
            query,
            &Retrieved::new(),
            &DialectProfile::default_profile(),
            &[],
            &PromptOptions::default(),
        )
        .unwrap()
    }

    fn errors(code: &str) -> Vec<Category> {
        let c = InternalCompiler::new(DialectProfile::default_profile());
        c.compile(code, &CompileOptions::default())
            .errors()
            .map(|d| d.category)
            .collect()
    }

    #[test]
    fn defect_script_counts_down() {
        let cfg = GeneratorConfig::stub(
            "d",
            StubScript::EmitWithDefects {
                k: 1,
                categories: vec![Category::UndeclaredVariable],
                fix_one_per_repair: true,
            },
            false,
        );
        let mut g = StubGenerator::new(cfg);
        let p = prompt("make something");
        let first = g.generate(&p, &mut |_| {}).unwrap();
        assert_eq!(errors(&first.code.unwrap()), vec![Category::UndeclaredVariable]);
        let second = g.generate(&p, &mut |_| {}).unwrap();
        assert!(errors(&second.code.unwrap()).is_empty());
    }

    #[test]
    fn k_defects_on_first_call() {
        let cfg = GeneratorConfig::stub(
            "d",
            StubScript::EmitWithDefects {
                k: 2,
                categories: vec![],
                fix_one_per_repair: false,
            },
            false,
        );
        let mut g = StubGenerator::new(cfg);
        let out = g.generate(&prompt("x y z"), &mut |_| {}).unwrap();
        assert_eq!(errors(&out.code.unwrap()).len(), 2);
    }

    #[test]
    fn deterministic_and_streamed() {
        let cfg = GeneratorConfig::stub("c", StubScript::EmitCanonical, false);
        let mut chunks = Vec::new();
        let a = StubGenerator::new(cfg.clone())
            .generate(&prompt("q"), &mut |c| chunks.push(c.to_string()))
            .unwrap();
        let b = StubGenerator::new(cfg).generate(&prompt("q"), &mut |_| {}).unwrap();
        assert_eq!(a, b);
        assert_eq!(chunks.concat(), a.raw_text);
        assert_eq!(a.code.as_deref(), Some(CANONICAL_EXAMPLE.trim_end()));
    }

    #[test]
    fn catalog_aware_without_retrieval_misuses_or_stays_generic() {
        let cfg = GeneratorConfig::stub("s", StubScript::EmitCatalogAware, false);
        let mut misused = 0;
        for i in 0..20 {
            let mut g = StubGenerator::new(cfg.clone());
            let out = g.generate(&prompt(&format!("query number {i}")), &mut |_| {}).unwrap();
            let code = out.code.unwrap();
            let errs = errors(&code);
            if code.contains("TIMER") {
                misused += 1;
                assert_eq!(errs, vec![Category::UnknownDatatype]);
            } else {
                assert!(errs.is_empty());
            }
        }
        assert!(misused > 0);
    }

    #[test]
    fn every_template_compiles() {
        for name in [
            "TON", "TOF", "TP", "R_TRIG", "F_TRIG", "CTU", "CTD", "ZPUSH", "ZPUSHP", "ZPOP", "ZPOPP", "INC", "INCP",
            "INC_U", "INCP_U",
        ] {
            let code = program_using(name).unwrap();
            assert!(errors(&code).is_empty(), "{name}: {:?}", errors(&code));
        }
        assert!(errors(GENERIC_PROGRAM).is_empty());
    }
}
