//! Offline description augmentation: a model restates each catalog entry
//! with the semantics its name suffixes imply.

use crate::backends::{BackendError, TextGenerator};
use crate::prompting::build_augment_prompt;

use super::catalog::FunctionBlockEntry;

/// Asks `generator` for an augmented description of one entry.
pub fn augment_description(
    entry: &FunctionBlockEntry,
    generator: &mut dyn TextGenerator,
) -> Result<String, BackendError> {
    let prompt = build_augment_prompt(entry);
    let out = generator.generate(&prompt, &mut |_| {})?;
    let text = out.explanation.unwrap_or(out.raw_text);
    let text = text.trim();
    if text.is_empty() {
        return Err(BackendError::Protocol(format!(
            "empty augmentation for `{}`",
            entry.name
        )));
    }
    Ok(text.to_string())
}

/// Augments every entry. An entry whose call fails keeps its raw
/// description; the failures are returned alongside.
pub fn augment_catalog(
    entries: &[FunctionBlockEntry],
    generator: &mut dyn TextGenerator,
) -> (Vec<FunctionBlockEntry>, Vec<(String, BackendError)>) {
    let mut failures = Vec::new();
    let out = entries
        .iter()
        .map(|e| {
            let mut e = e.clone();
            match augment_description(&e, generator) {
                Ok(text) => e.augmented_description = Some(text),
                Err(err) => {
                    tracing::warn!(entry = %e.name, error = %err, "augmentation failed");
                    failures.push((e.name.clone(), err));
                }
            }
            e
        })
        .collect();
    (out, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{GeneratorConfig, StubGenerator, StubScript};
    use crate::knowledge::bundled_catalog;

    fn stub() -> StubGenerator {
        StubGenerator::new(GeneratorConfig::stub("aug", StubScript::EmitCanonical, false))
    }

    #[test]
    fn pulse_variant_gains_edge_semantics() {
        let cat = bundled_catalog();
        let zpushp = cat.iter().find(|e| e.name == "ZPUSHP").unwrap();
        let text = augment_description(zpushp, &mut stub()).unwrap();
        assert!(text.starts_with(zpushp.raw_description.trim()));
        assert!(text.contains("executes on the rising edge"));
    }

    #[test]
    fn plain_entry_only_gains_en_eno_note() {
        let cat = bundled_catalog();
        let ton = cat.iter().find(|e| e.name == "TON").unwrap();
        let text = augment_description(ton, &mut stub()).unwrap();
        assert!(!text.contains("rising edge of the execution"));
        assert!(text.contains("EN"));
    }

    #[test]
    fn failures_keep_raw_text() {
        let cat = bundled_catalog();
        let mut g = StubGenerator::new(GeneratorConfig::stub(
            "f",
            StubScript::Fail {
                kind: crate::backends::FailureKind::Timeout,
            },
            false,
        ));
        let (out, fails) = augment_catalog(&cat[..2], &mut g);
        assert_eq!(fails.len(), 2);
        assert!(out.iter().all(|e| e.augmented_description.is_none()));
    }
}
