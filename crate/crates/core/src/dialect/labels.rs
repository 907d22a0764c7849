//! External label registration: program-level `VAR` / `VAR_EXTERNAL`
//! declarations move into a manifest the engineering tool imports, and the
//! program is stripped of those blocks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{CompilationUnit, PouKind, VarBlockKind};
use super::printer::{expr_text, type_text};
use super::span::SourceSpan;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "pou")]
pub enum LabelScope {
    Global,
    Local(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    /// Canonical type text, e.g. `INT` or `ARRAY[0..9] OF INT`.
    pub data_type: String,
    pub scope: LabelScope,
    pub initializer: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelManifest {
    pub labels: Vec<Label>,
}

impl LabelManifest {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels visible from the named POU: globals plus its locals.
    pub fn visible_from<'a>(&'a self, pou: &'a str) -> impl Iterator<Item = &'a Label> + 'a {
        self.labels.iter().filter(move |l| match &l.scope {
            LabelScope::Global => true,
            LabelScope::Local(p) => p.eq_ignore_ascii_case(pou),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("label `{name}` registered twice in the same scope")]
    DuplicateLabel { name: String, spans: Vec<SourceSpan> },
}

/// Moves every `VAR` (local) and `VAR_EXTERNAL` (global) declaration of each
/// PROGRAM into a manifest. Function and function block blocks stay put.
pub fn extract_labels(unit: &CompilationUnit) -> Result<(LabelManifest, CompilationUnit), LabelError> {
    let mut manifest = LabelManifest::default();
    let mut seen: Vec<(LabelScope, String, SourceSpan)> = Vec::new();
    let mut stripped = unit.clone();

    for pou in &mut stripped.pous {
        if pou.kind != PouKind::Program {
            continue;
        }
        let (extracted, kept): (Vec<_>, Vec<_>) = pou
            .var_blocks
            .drain(..)
            .partition(|b| matches!(b.kind, VarBlockKind::Var | VarBlockKind::VarExternal));
        pou.var_blocks = kept;
        for block in extracted {
            let scope = if block.kind == VarBlockKind::VarExternal {
                LabelScope::Global
            } else {
                LabelScope::Local(pou.name.clone())
            };
            for decl in block.decls {
                if let Some((_, _, first)) = seen
                    .iter()
                    .find(|(s, n, _)| *s == scope && n.eq_ignore_ascii_case(&decl.name))
                {
                    return Err(LabelError::DuplicateLabel {
                        name: decl.name,
                        spans: vec![*first, decl.span],
                    });
                }
                seen.push((scope.clone(), decl.name.clone(), decl.span));
                manifest.labels.push(Label {
                    name: decl.name,
                    data_type: type_text(&decl.data_type),
                    scope: scope.clone(),
                    initializer: decl.initializer.as_ref().map(expr_text),
                });
            }
        }
    }
    Ok((manifest, stripped))
}
