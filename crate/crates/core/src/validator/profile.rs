//! Vendor dialect profiles: the rule tables the validator enforces.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialect::{PouKind, VarBlockKind};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

const DEFAULT_PROFILE: &str = include_str!("../../assets/profiles/mitsubishi-iqr.toml");

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("profile invariant violated: {0}")]
    Invariant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallableKind {
    FunctionBlock,
    Function,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub data_type: String,
}

impl Param {
    pub fn new(name: &str, data_type: &str) -> Self {
        Self {
            name: name.to_string(),
            data_type: data_type.to_string(),
        }
    }
}

/// Interface of a callable known to the dialect.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signature {
    pub name: String,
    pub kind: CallableKind,
    #[serde(default)]
    pub inputs: Vec<Param>,
    #[serde(default)]
    pub outputs: Vec<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_type: Option<String>,
}

impl Signature {
    pub fn input(&self, name: &str) -> Option<&Param> {
        self.inputs.iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn output(&self, name: &str) -> Option<&Param> {
        self.outputs.iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FbCatalog {
    entries: Vec<Signature>,
}

impl FbCatalog {
    pub fn new(entries: Vec<Signature>) -> Self {
        Self { entries }
    }

    pub fn get(&self, name: &str) -> Option<&Signature> {
        self.entries.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|s| s.name.as_str())
    }

    pub fn entries(&self) -> &[Signature] {
        &self.entries
    }

    pub fn function_blocks(&self) -> impl Iterator<Item = &Signature> {
        self.entries.iter().filter(|s| s.kind == CallableKind::FunctionBlock)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifierRules {
    pub min_length: usize,
    #[serde(default)]
    pub forbidden_names: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockKinds {
    program: Vec<VarBlockKind>,
    function: Vec<VarBlockKind>,
    function_block: Vec<VarBlockKind>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDocument {
    schema_version: u32,
    id: String,
    #[serde(default)]
    strict_labels: bool,
    reserved_words: Vec<String>,
    allowed_datatypes: Vec<String>,
    #[serde(default)]
    disallowed_instructions: Vec<String>,
    identifier_rules: IdentifierRules,
    block_kinds: BlockKinds,
    #[serde(default)]
    catalog: Vec<Signature>,
}

/// Immutable rule set for one vendor dialect. Name sets hold upper-case
/// entries; lookups are case-insensitive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DialectProfile {
    pub id: String,
    pub reserved_words: BTreeSet<String>,
    pub allowed_datatypes: BTreeSet<String>,
    pub disallowed_instructions: BTreeSet<String>,
    pub block_kind_table: BTreeMap<PouKind, BTreeSet<VarBlockKind>>,
    pub identifier_rules: IdentifierRules,
    pub fb_catalog: FbCatalog,
    pub strict_labels: bool,
}

fn upper_set(items: Vec<String>) -> BTreeSet<String> {
    items.into_iter().map(|s| s.to_ascii_uppercase()).collect()
}

/// Parses and checks a profile document.
pub fn load_profile(document: &str) -> Result<DialectProfile, ProfileError> {
    let doc: ProfileDocument = toml::from_str(document)?;
    if doc.schema_version != PROFILE_SCHEMA_VERSION {
        return Err(ProfileError::Invariant(format!(
            "unsupported schema_version {} (expected {})",
            doc.schema_version, PROFILE_SCHEMA_VERSION
        )));
    }
    let profile = DialectProfile {
        id: doc.id,
        reserved_words: upper_set(doc.reserved_words),
        allowed_datatypes: upper_set(doc.allowed_datatypes),
        disallowed_instructions: upper_set(doc.disallowed_instructions),
        block_kind_table: BTreeMap::from([
            (PouKind::Program, doc.block_kinds.program.into_iter().collect()),
            (PouKind::Function, doc.block_kinds.function.into_iter().collect()),
            (
                PouKind::FunctionBlock,
                doc.block_kinds.function_block.into_iter().collect(),
            ),
        ]),
        identifier_rules: IdentifierRules {
            min_length: doc.identifier_rules.min_length,
            forbidden_names: upper_set(doc.identifier_rules.forbidden_names.into_iter().collect()),
        },
        fb_catalog: FbCatalog::new(doc.catalog),
        strict_labels: doc.strict_labels,
    };
    profile.check_invariants()?;
    Ok(profile)
}

impl DialectProfile {
    /// The bundled Mitsubishi-style profile.
    pub fn default_profile() -> DialectProfile {
        load_profile(DEFAULT_PROFILE).expect("bundled profile is valid")
    }

    pub fn default_document() -> &'static str {
        DEFAULT_PROFILE
    }

    fn check_invariants(&self) -> Result<(), ProfileError> {
        let fail = |msg: String| Err(ProfileError::Invariant(msg));
        if self.id.trim().is_empty() {
            return fail("id must not be empty".into());
        }
        if self.allowed_datatypes.is_empty() {
            return fail("allowed_datatypes must not be empty".into());
        }
        if let Some(w) = self.reserved_words.intersection(&self.allowed_datatypes).next() {
            return fail(format!("`{w}` is both a reserved word and an allowed datatype"));
        }
        let mut seen = BTreeSet::new();
        for sig in self.fb_catalog.entries() {
            let name = sig.name.to_ascii_uppercase();
            if !seen.insert(name.clone()) {
                return fail(format!("catalog entry `{}` listed twice", sig.name));
            }
            if self.reserved_words.contains(&name) {
                return fail(format!("catalog entry `{}` is a reserved word", sig.name));
            }
            let mut params = BTreeSet::new();
            for p in sig.inputs.iter().chain(&sig.outputs) {
                if !params.insert(p.name.to_ascii_uppercase()) {
                    return fail(format!("catalog entry `{}` repeats parameter `{}`", sig.name, p.name));
                }
            }
            if sig.kind == CallableKind::FunctionBlock && sig.return_type.is_some() {
                return fail(format!("function block `{}` cannot declare a return type", sig.name));
            }
        }
        Ok(())
    }

    pub fn is_reserved(&self, name: &str) -> bool {
        self.reserved_words.contains(&name.to_ascii_uppercase())
    }

    pub fn is_disallowed(&self, callee: &str) -> bool {
        self.disallowed_instructions.contains(&callee.to_ascii_uppercase())
    }

    pub fn allows_block(&self, pou: PouKind, block: VarBlockKind) -> bool {
        self.block_kind_table.get(&pou).is_some_and(|s| s.contains(&block))
    }

    pub fn with_strict_labels(mut self, strict: bool) -> Self {
        self.strict_labels = strict;
        self
    }
}
