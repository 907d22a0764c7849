use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dialect::SourceSpan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    UndeclaredVariable,
    ReservedWordViolation,
    TypeMismatch,
    DisallowedInstruction,
    UnusedFunctionBlock,
    MissingProgram,
    UnknownDatatype,
    DuplicateDeclaration,
    StructureViolation,
    IdentifierRule,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::UndeclaredVariable,
        Category::ReservedWordViolation,
        Category::TypeMismatch,
        Category::DisallowedInstruction,
        Category::UnusedFunctionBlock,
        Category::MissingProgram,
        Category::UnknownDatatype,
        Category::DuplicateDeclaration,
        Category::StructureViolation,
        Category::IdentifierRule,
    ];

    /// Stable diagnostic code. The mapping is fixed.
    pub fn code(self) -> &'static str {
        match self {
            Category::UndeclaredVariable => "E001",
            Category::ReservedWordViolation => "E002",
            Category::TypeMismatch => "E003",
            Category::DisallowedInstruction => "E004",
            Category::UnusedFunctionBlock => "E005",
            Category::MissingProgram => "E006",
            Category::UnknownDatatype => "E007",
            Category::DuplicateDeclaration => "E008",
            Category::StructureViolation => "E009",
            Category::IdentifierRule => "E010",
        }
    }

    pub fn from_code(code: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::UndeclaredVariable => "UndeclaredVariable",
            Category::ReservedWordViolation => "ReservedWordViolation",
            Category::TypeMismatch => "TypeMismatch",
            Category::DisallowedInstruction => "DisallowedInstruction",
            Category::UnusedFunctionBlock => "UnusedFunctionBlock",
            Category::MissingProgram => "MissingProgram",
            Category::UnknownDatatype => "UnknownDatatype",
            Category::DuplicateDeclaration => "DuplicateDeclaration",
            Category::StructureViolation => "StructureViolation",
            Category::IdentifierRule => "IdentifierRule",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub category: Category,
    pub severity: Severity,
    pub span: SourceSpan,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related: Option<Vec<SourceSpan>>,
}

impl Diagnostic {
    pub fn error(category: Category, span: SourceSpan, message: impl Into<String>) -> Self {
        Self {
            code: category.code().to_string(),
            category,
            severity: Severity::Error,
            span,
            message: message.into(),
            related: None,
        }
    }

    pub fn with_related(mut self, spans: Vec<SourceSpan>) -> Self {
        self.related = Some(spans);
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// One-line rendering used verbatim in repair prompts.
    pub fn render(&self) -> String {
        format!("{} {} at {}: {}", self.code, self.category, self.span, self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Sorts by span start, then code.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| (a.span.start(), &a.code).cmp(&(b.span.start(), &b.code)));
}

/// Serializes diagnostics as one JSON record per line.
pub fn to_json_lines(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| serde_json::to_string(d).expect("diagnostic serializes") + "\n")
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompileStatus {
    Success,
    Failed,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileReport {
    pub status: CompileStatus,
    pub diagnostics: Vec<Diagnostic>,
    pub attempt: u32,
    pub elapsed_ms: u64,
    pub compiler_id: String,
}

impl CompileReport {
    /// Builds a report whose status follows from the diagnostics.
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>, attempt: u32, elapsed_ms: u64, compiler_id: &str) -> Self {
        let status = if diagnostics.iter().any(Diagnostic::is_error) {
            CompileStatus::Failed
        } else {
            CompileStatus::Success
        };
        Self {
            status,
            diagnostics,
            attempt,
            elapsed_ms,
            compiler_id: compiler_id.to_string(),
        }
    }

    pub fn timeout(attempt: u32, elapsed_ms: u64, compiler_id: &str) -> Self {
        Self {
            status: CompileStatus::Timeout,
            diagnostics: Vec::new(),
            attempt,
            elapsed_ms,
            compiler_id: compiler_id.to_string(),
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == CompileStatus::Success
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn has_category(&self, category: Category) -> bool {
        self.diagnostics.iter().any(|d| d.category == category)
    }
}
