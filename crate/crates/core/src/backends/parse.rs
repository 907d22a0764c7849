use serde::Deserialize;

use super::{FinishReason, GenerationOutput};

#[derive(Deserialize)]
struct CodeRecord {
    code: String,
    #[serde(default)]
    explanation: Option<String>,
}

const ST_LABELS: &[&str] = &["", "st", "iecst", "iec-st", "structured-text", "structuredtext", "scl"];

fn non_empty(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn from_record(text: &str) -> Option<(String, Option<String>)> {
    let rec: CodeRecord = serde_json::from_str(text.trim()).ok()?;
    let code = non_empty(&rec.code)?;
    Some((code, rec.explanation.as_deref().and_then(non_empty)))
}

struct Fence<'a> {
    label: &'a str,
    body: &'a str,
    start: usize,
    end: usize,
}

fn fences(raw: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(open) = raw[pos..].find("```").map(|i| i + pos) {
        let after = open + 3;
        let line_end = raw[after..].find('\n').map(|i| i + after).unwrap_or(raw.len());
        let label = raw[after..line_end].trim();
        let body_start = (line_end + 1).min(raw.len());
        let (body_end, end) = match raw[body_start..].find("```") {
            Some(i) => (body_start + i, body_start + i + 3),
            // An unterminated fence runs to the end of a truncated response.
            None => (raw.len(), raw.len()),
        };
        out.push(Fence {
            label,
            body: &raw[body_start..body_end],
            start: open,
            end,
        });
        pos = end;
        if end >= raw.len() {
            break;
        }
    }
    out
}

/// Extracts code and explanation from model text. Tries, in order: a JSON
/// record with `code`/`explanation` (bare or in a json fence), the first
/// fenced block labelled for ST or unlabelled, then gives up on code.
pub fn parse_model_output(raw: &str) -> GenerationOutput {
    let done = |code: Option<String>, explanation: Option<String>| GenerationOutput {
        raw_text: raw.to_string(),
        code,
        explanation,
        finish_reason: FinishReason::Complete,
    };
    if let Some((code, expl)) = from_record(raw) {
        return done(Some(code), expl);
    }
    let fs = fences(raw);
    for f in fs.iter().filter(|f| f.label.eq_ignore_ascii_case("json")) {
        if let Some((code, expl)) = from_record(f.body) {
            return done(Some(code), expl);
        }
    }
    for f in &fs {
        if !ST_LABELS.iter().any(|l| f.label.eq_ignore_ascii_case(l)) {
            continue;
        }
        if let Some(code) = non_empty(f.body) {
            let parts: Vec<&str> = [&raw[..f.start], &raw[f.end..]]
                .into_iter()
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .collect();
            return done(Some(code), non_empty(&parts.join("\n\n")));
        }
    }
    done(None, non_empty(raw).or_else(|| Some(String::new())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_record() {
        let o = parse_model_output(r#"{"code": "PROGRAM Main ; END_PROGRAM", "explanation": "does nothing"}"#);
        assert_eq!(o.code.as_deref(), Some("PROGRAM Main ; END_PROGRAM"));
        assert_eq!(o.explanation.as_deref(), Some("does nothing"));
    }

    #[test]
    fn fenced_block_with_prose() {
        let o = parse_model_output("Here you go:\n```st\nPROGRAM Main\nEND_PROGRAM\n```\nIt is empty.");
        assert_eq!(o.code.as_deref(), Some("PROGRAM Main\nEND_PROGRAM"));
        assert_eq!(o.explanation.as_deref(), Some("Here you go:\n\nIt is empty."));
    }

    #[test]
    fn other_languages_skipped() {
        let o = parse_model_output("```python\nprint(1)\n```\n```\nPROGRAM P END_PROGRAM\n```");
        assert_eq!(o.code.as_deref(), Some("PROGRAM P END_PROGRAM"));
    }

    #[test]
    fn json_inside_fence() {
        let o = parse_model_output("```json\n{\"code\":\"PROGRAM P END_PROGRAM\"}\n```");
        assert_eq!(o.code.as_deref(), Some("PROGRAM P END_PROGRAM"));
        assert_eq!(o.explanation, None);
    }

    #[test]
    fn prose_has_no_code() {
        let o = parse_model_output("I cannot help with that.");
        assert_eq!(o.code, None);
        assert_eq!(o.explanation.as_deref(), Some("I cannot help with that."));
    }

    #[test]
    fn unterminated_fence_keeps_code() {
        let o = parse_model_output("```st\nPROGRAM P\n");
        assert_eq!(o.code.as_deref(), Some("PROGRAM P"));
    }

    #[test]
    fn empty_code_field_is_not_code() {
        let o = parse_model_output(r#"{"code": "  "}"#);
        assert_eq!(o.code, None);
    }
}
