//! Function-block catalog entries and their suffix-variant semantics.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::KnowledgeError;
use crate::validator::{CallableKind, Param};

pub const BUNDLED_CATALOG: &str = include_str!("../../assets/catalog.jsonl");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantTag {
    /// Trailing `P`: runs once on the rising edge of the execution condition.
    EdgeExecuted,
    /// `_U`: operands are unsigned.
    Unsigned,
    /// `_E`: exposes EN/ENO.
    EnEno,
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantTag::EdgeExecuted => "EdgeExecuted",
            VariantTag::Unsigned => "Unsigned",
            VariantTag::EnEno => "EnEno",
        })
    }
}

impl VariantTag {
    pub fn parse(s: &str) -> Option<VariantTag> {
        match s {
            "EdgeExecuted" => Some(VariantTag::EdgeExecuted),
            "Unsigned" => Some(VariantTag::Unsigned),
            "EnEno" => Some(VariantTag::EnEno),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FbSignature {
    #[serde(default)]
    pub inputs: Vec<Param>,
    #[serde(default)]
    pub outputs: Vec<Param>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub return_type: Option<String>,
}

impl FbSignature {
    /// `NAME(IN: BOOL, PT: TIME) => (Q: BOOL, ET: TIME)` or `NAME(...) : T`.
    pub fn render(&self, name: &str) -> String {
        let list = |ps: &[Param]| {
            ps.iter()
                .map(|p| format!("{}: {}", p.name, p.data_type))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = format!("{name}({})", list(&self.inputs));
        if !self.outputs.is_empty() {
            s.push_str(&format!(" => ({})", list(&self.outputs)));
        }
        if let Some(rt) = &self.return_type {
            s.push_str(&format!(" : {rt}"));
        }
        s
    }
}

/// One catalog record. `variant_tags` is derived from the name on load and
/// never read from the record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionBlockEntry {
    pub name: String,
    pub base_name: String,
    #[serde(skip_deserializing, default)]
    pub variant_tags: BTreeSet<VariantTag>,
    pub kind: CallableKind,
    pub signature: FbSignature,
    pub raw_description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmented_description: Option<String>,
}

/// Tags encoded by the part of `name` after `base_name`. Accepted suffixes
/// are, in order: an optional `P`, an optional `_U`, an optional `_E`.
pub fn variant_tags(name: &str, base_name: &str) -> Option<BTreeSet<VariantTag>> {
    let upper = name.to_ascii_uppercase();
    let mut rest = upper.strip_prefix(&base_name.to_ascii_uppercase())?;
    let mut tags = BTreeSet::new();
    if let Some(r) = rest.strip_prefix('P') {
        tags.insert(VariantTag::EdgeExecuted);
        rest = r;
    }
    if let Some(r) = rest.strip_prefix("_U") {
        tags.insert(VariantTag::Unsigned);
        rest = r;
    }
    if let Some(r) = rest.strip_prefix("_E") {
        tags.insert(VariantTag::EnEno);
        rest = r;
    }
    rest.is_empty().then_some(tags)
}

impl FunctionBlockEntry {
    /// Checks invariants and fills in `variant_tags`.
    pub fn normalized(mut self) -> Result<Self, KnowledgeError> {
        let invalid = |why: String| KnowledgeError::InvalidEntry {
            name: self.name.clone(),
            reason: why,
        };
        let tags = variant_tags(&self.name, &self.base_name)
            .ok_or_else(|| invalid(format!("suffix does not decorate base name `{}`", self.base_name)))?;
        let mut seen = BTreeSet::new();
        for p in self.signature.inputs.iter().chain(&self.signature.outputs) {
            if !seen.insert(p.name.to_ascii_uppercase()) {
                return Err(invalid(format!("parameter `{}` repeated", p.name)));
            }
        }
        if self.raw_description.trim().is_empty() {
            return Err(invalid("empty description".into()));
        }
        self.variant_tags = tags;
        Ok(self)
    }

    /// Text that is embedded and shown in prompts.
    pub fn doc_text(&self) -> String {
        let body = self.augmented_description.as_deref().unwrap_or(&self.raw_description);
        format!(
            "{}: {}\nSignature: {}",
            self.name,
            body,
            self.signature.render(&self.name)
        )
    }

    pub fn tag_list(&self) -> String {
        self.variant_tags
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Parses one entry per line; blank lines are skipped.
pub fn parse_catalog(text: &str) -> Result<Vec<FunctionBlockEntry>, KnowledgeError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let e: FunctionBlockEntry = serde_json::from_str(l).map_err(|e| KnowledgeError::Record {
                line: i + 1,
                message: e.to_string(),
            })?;
            e.normalized()
        })
        .collect()
}

pub fn bundled_catalog() -> Vec<FunctionBlockEntry> {
    parse_catalog(BUNDLED_CATALOG).expect("bundled catalog is valid")
}

/// Fixed sentences explaining each variant tag. The EN/ENO sentence is
/// always present because every instruction follows that convention.
pub fn suffix_semantics(tags: &BTreeSet<VariantTag>) -> Vec<&'static str> {
    let mut out = Vec::new();
    if tags.contains(&VariantTag::EdgeExecuted) {
        out.push(
            "The P suffix marks the pulse variant: it executes on the rising edge of the execution condition, once per off-to-on transition, instead of on every scan.",
        );
    }
    if tags.contains(&VariantTag::Unsigned) {
        out.push("The _U suffix marks the unsigned variant: operands are treated as unsigned values.");
    }
    if tags.contains(&VariantTag::EnEno) {
        out.push("The _E suffix marks the variant with explicit EN and ENO parameters: it runs only while EN is TRUE and sets ENO when it completed.");
    } else {
        out.push(
            "Execution follows the EN/ENO convention: the instruction runs only while its execution condition is TRUE.",
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validator::DialectProfile;

    #[test]
    fn suffix_tags() {
        let t = |n, b| variant_tags(n, b).map(|s| s.into_iter().collect::<Vec<_>>());
        assert_eq!(t("ZPUSHP", "ZPUSH"), Some(vec![VariantTag::EdgeExecuted]));
        assert_eq!(t("INC_U", "INC"), Some(vec![VariantTag::Unsigned]));
        assert_eq!(
            t("INCP_U", "INC"),
            Some(vec![VariantTag::EdgeExecuted, VariantTag::Unsigned])
        );
        assert_eq!(t("ADD_E", "ADD"), Some(vec![VariantTag::EnEno]));
        assert_eq!(t("TON", "TON"), Some(vec![]));
        assert_eq!(t("ZPUSHX", "ZPUSH"), None);
        assert_eq!(t("MOV", "ZPUSH"), None);
    }

    #[test]
    fn bundled_catalog_matches_profile() {
        let profile = DialectProfile::default_profile();
        let entries = bundled_catalog();
        assert_eq!(entries.len(), profile.fb_catalog.entries().len());
        for e in &entries {
            let sig = profile.fb_catalog.get(&e.name).expect("entry in profile");
            assert_eq!(sig.kind, e.kind);
            assert_eq!(sig.inputs, e.signature.inputs);
            assert_eq!(sig.outputs, e.signature.outputs);
            assert_eq!(sig.return_type, e.signature.return_type);
        }
    }

    #[test]
    fn bad_suffix_rejected() {
        let line = r#"{"name":"ZPUSHQ","base_name":"ZPUSH","kind":"function","signature":{},"raw_description":"x"}"#;
        assert!(matches!(parse_catalog(line), Err(KnowledgeError::InvalidEntry { .. })));
    }

    #[test]
    fn signature_rendering() {
        let e = bundled_catalog().into_iter().find(|e| e.name == "TON").unwrap();
        assert_eq!(
            e.signature.render("TON"),
            "TON(IN: BOOL, PT: TIME) => (Q: BOOL, ET: TIME)"
        );
    }
}
