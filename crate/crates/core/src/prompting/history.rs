use crate::orchestrator::{ChatTurn, Role};

use super::estimate_tokens;

/// Model label carried by the synthetic summary turn.
pub const SUMMARY_LABEL: &str = "history-summary";
const SNIPPET_CHARS: usize = 60;

fn turn_tokens(t: &ChatTurn) -> usize {
    estimate_tokens(&t.text) + 4
}

/// Keeps the newest turns verbatim within `budget` tokens and folds all
/// older turns into one summary turn placed first.
pub fn condense_history(turns: &[ChatTurn], budget: usize) -> Vec<ChatTurn> {
    let total: usize = turns.iter().map(turn_tokens).sum();
    if total <= budget {
        return turns.to_vec();
    }
    // Reserve room for the summary, then take turns from the newest end.
    let summary_reserve = (budget / 4).max(8).min(budget);
    let mut used = 0;
    let mut keep = 0;
    for t in turns.iter().rev() {
        let cost = turn_tokens(t);
        if used + cost + summary_reserve > budget {
            break;
        }
        used += cost;
        keep += 1;
    }
    let folded = &turns[..turns.len() - keep];
    let mut summary = format!("[Summary of {} earlier turns]", folded.len());
    for t in folded.iter().filter(|t| t.role == Role::User) {
        let snippet: String = t.text.chars().take(SNIPPET_CHARS).collect();
        let candidate = format!("{summary} | {snippet}");
        if estimate_tokens(&candidate) + 4 > summary_reserve {
            break;
        }
        summary = candidate;
    }
    let mut out = Vec::with_capacity(keep + 1);
    let ts = folded.last().map(|t| t.timestamp_ms).unwrap_or_default();
    out.push(ChatTurn::assistant(SUMMARY_LABEL, &summary, None, ts));
    out.extend_from_slice(&turns[turns.len() - keep..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turns(n: usize, len: usize) -> Vec<ChatTurn> {
        (0..n)
            .map(|i| {
                let text = format!("{i:03} {}", "x".repeat(len));
                if i % 2 == 0 {
                    ChatTurn::user(&text, i as u64)
                } else {
                    ChatTurn::assistant("stub", &text, None, i as u64)
                }
            })
            .collect()
    }

    #[test]
    fn short_history_unchanged() {
        let t = turns(2, 10);
        assert_eq!(condense_history(&t, 1000), t);
        assert!(condense_history(&[], 10).is_empty());
    }

    #[test]
    fn long_history_is_folded_within_budget() {
        let t = turns(50, 96);
        // Each turn costs ceil(100/4) + 4 = 29 tokens.
        let budget = 300;
        let out = condense_history(&t, budget);
        let used: usize = out.iter().map(turn_tokens).sum();
        assert!(used <= budget, "{used}");
        assert_eq!(out[0].model_label.as_deref(), Some(SUMMARY_LABEL));
        // 300 - 75 reserved leaves room for 7 turns of 29 tokens.
        assert_eq!(out.len(), 1 + 7);
        assert_eq!(out.last(), t.last());
        assert!(out[0].text.starts_with("[Summary of 43 earlier turns]"));
    }
}
