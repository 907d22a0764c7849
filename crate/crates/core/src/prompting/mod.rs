//! Prompt construction: the single generation prompt, the repair prompt,
//! query expansion, description augmentation, and history condensation.

pub mod expand;
pub mod history;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assets::CANONICAL_EXAMPLE;
use crate::dialect::PouKind;
use crate::knowledge::{FunctionBlockEntry, KnowledgeError, KnowledgeIndex, SearchHit, Segment};
use crate::orchestrator::ChatTurn;
use crate::validator::{CompileReport, CompileStatus, DialectProfile};

pub use expand::{expand_query, infer_categories, ExpansionOutcome, EXPANSION_MIN_WORDS};
pub use history::{condense_history, SUMMARY_LABEL};

const ROLE: &str = include_str!("../../assets/prompts/role.txt");
const CONSTRAINTS: &str = include_str!("../../assets/prompts/constraints.txt");
const OUTPUT_FORMAT: &str = include_str!("../../assets/prompts/output_format.txt");
const REPAIR: &str = include_str!("../../assets/prompts/repair.txt");
const AUGMENT: &str = include_str!("../../assets/prompts/augment.txt");
const EXPAND: &str = include_str!("../../assets/prompts/expand.txt");
const PERSONA: &str = include_str!("../../assets/prompts/persona.txt");

pub const DEFAULT_TOKEN_BUDGET: usize = 12_000;
pub const CAP_FUNCTION_BLOCKS: usize = 4_000;
pub const CAP_SPECS: usize = 3_000;
pub const CAP_AUXILIARY: usize = 2_000;
pub const K_FUNCTION_BLOCKS: usize = 6;
pub const K_SPECS: usize = 4;
pub const K_AUXILIARY: usize = 2;

pub const SECTION_ROLE: &str = "role";
pub const SECTION_CONSTRAINTS: &str = "constraints";
pub const SECTION_FUNCTION_BLOCKS: &str = "function_blocks";
pub const SECTION_SPECS: &str = "specs";
pub const SECTION_AUXILIARY: &str = "auxiliary";
pub const SECTION_EXAMPLE: &str = "canonical_example";
pub const SECTION_OUTPUT: &str = "output_format";
pub const SECTION_REPAIR: &str = "repair_guidance";

/// Characters per estimated token.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptTask {
    Generate,
    Repair,
    Augment,
    Expand,
    Persona,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task: PromptTask,
    pub system_text: String,
    pub user_text: String,
    pub token_estimate: usize,
    /// `(name, text)` in order; their concatenation is `system_text`.
    pub sections: Vec<(String, String)>,
}

impl PromptBundle {
    fn assemble(task: PromptTask, sections: Vec<(String, String)>, user_text: String) -> Self {
        let system_text: String = sections.iter().map(|(_, t)| t.as_str()).collect();
        let token_estimate = estimate_tokens(&system_text) + estimate_tokens(&user_text);
        Self {
            task,
            system_text,
            user_text,
            token_estimate,
            sections,
        }
    }

    pub fn section(&self, name: &str) -> Option<&str> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }

    pub fn section_names(&self) -> Vec<&str> {
        self.sections.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Hex SHA-256 of task, system and user text.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}", self.task).as_bytes());
        h.update([0]);
        h.update(self.system_text.as_bytes());
        h.update([0]);
        h.update(self.user_text.as_bytes());
        hex::encode(h.finalize())
    }

    /// Plain-text dump for the audit log.
    pub fn audit_dump(&self) -> String {
        let mut out = format!("task: {:?}\ntokens: {}\n", self.task, self.token_estimate);
        for (name, text) in &self.sections {
            let _ = write!(out, "--- section {name} ({} chars)\n{text}", text.chars().count());
        }
        let _ = write!(out, "--- user\n{}\n", self.user_text);
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("fixed prompt parts need {needed} tokens but the budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Retrieved documents per segment.
pub type Retrieved = BTreeMap<Segment, Vec<SearchHit>>;

/// Per-segment retrieval with the default k values. Segments with no
/// documents are simply absent.
pub fn retrieve_context(index: &KnowledgeIndex, query: &str) -> Result<Retrieved, KnowledgeError> {
    let mut out = Retrieved::new();
    for (segment, k) in [
        (Segment::FunctionBlocks, K_FUNCTION_BLOCKS),
        (Segment::Specs, K_SPECS),
        (Segment::Auxiliary, K_AUXILIARY),
    ] {
        match index.search(query, Some(segment), k) {
            Ok(hits) => {
                out.insert(segment, hits);
            }
            Err(KnowledgeError::EmptyIndex) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Drops control characters other than newline and tab.
pub fn sanitize(text: &str) -> String {
    text.chars()
        .filter(|c| !c.is_control() || matches!(c, '\n' | '\t'))
        .collect()
}

/// Truncates to at most `cap` characters.
pub fn cap_chars(text: &str, cap: usize) -> String {
    match text.char_indices().nth(cap) {
        Some((i, _)) => text[..i].to_string(),
        None => text.to_string(),
    }
}

/// Replaces `{{key}}` placeholders; panics on leftovers since templates are
/// bundled and a miss is a programming error.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    assert!(!out.contains("{{"), "unfilled placeholder in template");
    out
}

fn join_sorted<'a>(items: impl Iterator<Item = &'a String>) -> String {
    items.map(String::as_str).collect::<Vec<_>>().join(", ")
}

fn section(name: &str, text: String) -> (String, String) {
    let mut t = text.trim_end().to_string();
    t.push_str("\n\n");
    (name.to_string(), t)
}

pub fn render_role(profile: &DialectProfile) -> String {
    render_template(ROLE, &[("profile_id", &profile.id)])
}

/// The hard-constraint section rendered from the profile.
pub fn render_constraints(profile: &DialectProfile) -> String {
    let mut table = String::new();
    for kind in [PouKind::Program, PouKind::Function, PouKind::FunctionBlock] {
        let blocks: Vec<&str> = profile
            .block_kind_table
            .get(&kind)
            .map(|s| s.iter().map(|b| b.keyword()).collect())
            .unwrap_or_default();
        let _ = writeln!(table, "- {}: {}", kind.keyword(), blocks.join(", "));
    }
    let forbidden = if profile.identifier_rules.forbidden_names.is_empty() {
        "(none)".to_string()
    } else {
        join_sorted(profile.identifier_rules.forbidden_names.iter())
    };
    let disallowed = if profile.disallowed_instructions.is_empty() {
        "(none)".to_string()
    } else {
        join_sorted(profile.disallowed_instructions.iter())
    };
    render_template(
        CONSTRAINTS,
        &[
            ("reserved_words", &join_sorted(profile.reserved_words.iter())),
            ("datatypes", &join_sorted(profile.allowed_datatypes.iter())),
            ("min_length", &profile.identifier_rules.min_length.to_string()),
            ("forbidden_names", &forbidden),
            ("disallowed", &disallowed),
            ("block_table", table.trim_end()),
        ],
    )
}

fn example_section() -> String {
    format!(
        "## Canonical example\nThis program compiles cleanly and shows compliant timer usage, a CASE state machine, and edge detection:\n```st\n{}\n```\n",
        CANONICAL_EXAMPLE.trim_end()
    )
}

fn retrieved_body(hits: &[SearchHit]) -> String {
    hits.iter()
        .map(|h| sanitize(&h.doc.text))
        .collect::<Vec<_>>()
        .join("\n---\n")
}

fn history_text(history: &[ChatTurn]) -> String {
    let mut out = String::new();
    for t in history {
        let _ = writeln!(out, "[{}] {}", t.role.name(), sanitize(&t.text));
    }
    out
}

#[derive(Clone, Debug)]
pub struct PromptOptions {
    pub token_budget: usize,
}

impl Default for PromptOptions {
    fn default() -> Self {
        Self {
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

/// Builds the single generation prompt.
pub fn build_generation_prompt(
    query: &str,
    retrieved: &Retrieved,
    profile: &DialectProfile,
    history: &[ChatTurn],
    options: &PromptOptions,
) -> Result<PromptBundle, PromptError> {
    let query = sanitize(query);
    if query.trim().is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    let mut user_text = String::new();
    if !history.is_empty() {
        let _ = write!(user_text, "Conversation so far:\n{}\n", history_text(history));
    }
    let _ = write!(user_text, "Request:\n{}\n", query.trim());

    let role = section(SECTION_ROLE, render_role(profile));
    let constraints = section(SECTION_CONSTRAINTS, render_constraints(profile));
    let example = section(SECTION_EXAMPLE, example_section());
    let output = section(SECTION_OUTPUT, OUTPUT_FORMAT.to_string());
    let fixed: usize = [&role, &constraints, &example, &output]
        .iter()
        .map(|(_, t)| t.chars().count())
        .sum::<usize>()
        + user_text.chars().count();
    let fixed_tokens = fixed.div_ceil(4) + 1;
    if fixed_tokens > options.token_budget {
        return Err(PromptError::BudgetExceeded {
            needed: fixed_tokens,
            budget: options.token_budget,
        });
    }

    // Retrieved sections get what remains, each within its own cap. The
    // header and separator of a section count against the same allowance.
    let mut remaining_chars = (options.token_budget - fixed_tokens) * 4;
    let mut retrieved_sections = Vec::new();
    for (segment, name, header, cap) in [
        (
            Segment::FunctionBlocks,
            SECTION_FUNCTION_BLOCKS,
            "## Function block reference\n",
            CAP_FUNCTION_BLOCKS,
        ),
        (Segment::Specs, SECTION_SPECS, "## Dialect rules\n", CAP_SPECS),
        (
            Segment::Auxiliary,
            SECTION_AUXILIARY,
            "## User-supplied material\n",
            CAP_AUXILIARY,
        ),
    ] {
        let hits = retrieved.get(&segment).map(Vec::as_slice).unwrap_or_default();
        if hits.is_empty() {
            continue;
        }
        let overhead = header.chars().count() + 2;
        if remaining_chars <= overhead {
            continue;
        }
        let body = cap_chars(&retrieved_body(hits), cap.min(remaining_chars - overhead));
        if body.trim().is_empty() {
            continue;
        }
        let s = section(name, format!("{header}{body}"));
        remaining_chars = remaining_chars.saturating_sub(s.1.chars().count());
        retrieved_sections.push(s);
    }

    let mut sections = vec![role, constraints];
    sections.extend(retrieved_sections);
    sections.push(example);
    sections.push(output);
    Ok(PromptBundle::assemble(PromptTask::Generate, sections, user_text))
}

/// Builds the diagnostic-guided repair prompt for a failed compile.
pub fn build_repair_prompt(
    code: &str,
    report: &CompileReport,
    profile: &DialectProfile,
) -> Result<PromptBundle, PromptError> {
    if report.status != CompileStatus::Failed {
        return Err(PromptError::Contract(format!(
            "repair prompt needs a Failed report, got {:?}",
            report.status
        )));
    }
    let mut extra = String::new();
    for d in &report.diagnostics {
        let line = match d.category.name() {
            "UndeclaredVariable" | "ReservedWordViolation" | "TypeMismatch" | "DisallowedInstruction" => continue,
            "UnusedFunctionBlock" => "- UnusedFunctionBlock: invoke the instance with its named parameters and use its outputs, or remove the declaration.",
            "MissingProgram" => "- MissingProgram: the code must contain a PROGRAM ... END_PROGRAM block.",
            "UnknownDatatype" => "- UnknownDatatype: use only the allowed datatypes or a function block type from the reference.",
            "DuplicateDeclaration" => "- DuplicateDeclaration: declare each name once; remove or rename the duplicate.",
            "StructureViolation" => "- StructureViolation: follow the POU templates and the allowed variable blocks; fix the syntax at the reported position.",
            _ => "- IdentifierRule: use identifiers of at least the minimum length that are not forbidden.",
        };
        if !extra.contains(line) {
            extra.push_str(line);
            extra.push('\n');
        }
    }
    let sections = vec![
        section(SECTION_ROLE, render_role(profile)),
        section(SECTION_CONSTRAINTS, render_constraints(profile)),
        section(
            SECTION_REPAIR,
            render_template(REPAIR, &[("extra_guidance", extra.trim_end())]),
        ),
        section(SECTION_OUTPUT, OUTPUT_FORMAT.to_string()),
    ];
    let mut user = String::from("Compiler diagnostics:\n");
    for d in &report.diagnostics {
        let _ = writeln!(user, "{}", d.render());
    }
    let _ = write!(user, "\nFailing program:\n```st\n{}\n```\n", code.trim_end());
    Ok(PromptBundle::assemble(PromptTask::Repair, sections, user))
}

/// Labels of the structured block in the augmentation request.
pub const AUGMENT_NAME: &str = "INSTRUCTION: ";
pub const AUGMENT_TAGS: &str = "VARIANTS: ";
pub const AUGMENT_DESCRIPTION: &str = "DESCRIPTION:";

pub fn build_augment_prompt(entry: &FunctionBlockEntry) -> PromptBundle {
    let sections = vec![section(SECTION_ROLE, AUGMENT.to_string())];
    let user = format!(
        "{AUGMENT_NAME}{}\nBASE: {}\n{AUGMENT_TAGS}{}\nSIGNATURE: {}\n{AUGMENT_DESCRIPTION}\n{}\n",
        entry.name,
        entry.base_name,
        entry.tag_list(),
        entry.signature.render(&entry.name),
        sanitize(&entry.raw_description)
    );
    PromptBundle::assemble(PromptTask::Augment, sections, user)
}

pub const EXPAND_QUERY: &str = "REQUEST: ";

pub fn build_expand_prompt(query: &str) -> PromptBundle {
    let sections = vec![section(SECTION_ROLE, EXPAND.to_string())];
    PromptBundle::assemble(
        PromptTask::Expand,
        sections,
        format!("{EXPAND_QUERY}{}\n", sanitize(query)),
    )
}

pub const PERSONA_DRAFT: &str = "DRAFT: ";

/// Asks a model to restate a template-composed query in a persona's voice.
pub fn build_persona_prompt(persona: &str, style: &str, draft: &str) -> PromptBundle {
    let sections = vec![section(SECTION_ROLE, PERSONA.to_string())];
    let user = format!(
        "PERSONA: {persona}\nSTYLE: {style}\n{PERSONA_DRAFT}{}\n",
        sanitize(draft)
    );
    PromptBundle::assemble(PromptTask::Persona, sections, user)
}
