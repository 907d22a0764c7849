use crate::backends::TextGenerator;

use super::build_expand_prompt;

/// Queries with fewer words are returned unchanged.
pub const EXPANSION_MIN_WORDS: usize = 3;

/// Keyword table used to infer program categories from a request.
const CATEGORY_KEYWORDS: &[(&str, &[&str])] = &[
    (
        "timer",
        &[
            "blink", "flash", "second", "seconds", "delay", "wait", "timer", "timeout", "minute", "pulse", "interval",
        ],
    ),
    (
        "counter",
        &["count", "counter", "counts", "tally", "number of", "batch"],
    ),
    (
        "edge detection",
        &[
            "edge",
            "button",
            "press",
            "pushbutton",
            "rising",
            "falling",
            "trigger",
            "once",
        ],
    ),
    (
        "state machine",
        &["state", "sequence", "step", "steps", "mode", "phase", "cycle"],
    ),
    (
        "array processing",
        &["array", "list", "buffer", "table", "average", "values", "samples"],
    ),
    (
        "pid control",
        &["pid", "setpoint", "regulate", "control loop", "temperature", "pressure"],
    ),
    (
        "communication",
        &[
            "communication",
            "modbus",
            "send",
            "receive",
            "message",
            "network",
            "serial",
        ],
    ),
];

/// Categories whose keywords occur in `query`, in table order.
pub fn infer_categories(query: &str) -> Vec<&'static str> {
    let lower = query.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    CATEGORY_KEYWORDS
        .iter()
        .filter(|(_, keys)| {
            keys.iter().any(|k| {
                if k.contains(' ') {
                    lower.contains(k)
                } else {
                    words.contains(k)
                }
            })
        })
        .map(|(c, _)| *c)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionOutcome {
    pub text: String,
    pub expanded: bool,
    pub warning: Option<String>,
}

/// Expands a query through the generator. Short queries and backend failures
/// fall back to the original text; failures leave a warning.
pub fn expand_query(query: &str, generator: &mut dyn TextGenerator) -> ExpansionOutcome {
    let unchanged = |warning| ExpansionOutcome {
        text: query.to_string(),
        expanded: false,
        warning,
    };
    if query.split_whitespace().count() < EXPANSION_MIN_WORDS {
        return unchanged(None);
    }
    let prompt = build_expand_prompt(query);
    match generator.generate(&prompt, &mut |_| {}) {
        Ok(out) if !out.raw_text.trim().is_empty() => ExpansionOutcome {
            text: out.raw_text.trim().to_string(),
            expanded: true,
            warning: None,
        },
        Ok(_) => unchanged(Some("query expansion returned no text".into())),
        Err(e) => {
            tracing::warn!(error = %e, "query expansion failed; using the original query");
            unchanged(Some(format!("query expansion failed: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_table() {
        assert_eq!(infer_categories("blink a lamp every second"), vec!["timer"]);
        assert!(infer_categories("count parts on a conveyor").contains(&"counter"));
        assert!(infer_categories("nothing relevant here").is_empty());
    }
}
