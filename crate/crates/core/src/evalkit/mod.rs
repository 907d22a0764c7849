//! Benchmark runner: a fixed query set against model configurations, scored
//! as Compiled% and Repaired% per configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::GeneratorConfig;
use crate::orchestrator::{null_sink, ChatSession, FinalStatus, Orchestrator, SessionSettings};

pub const BUNDLED_QUERIES: &str = include_str!("../../assets/bench/queries.jsonl");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchQuery {
    pub id: String,
    #[serde(default)]
    pub category: String,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query file has no queries")]
    NoQueries,
    #[error("no model configurations selected")]
    NoConfigs,
    #[error("unknown config label `{0}`")]
    UnknownConfig(String),
    #[error("query file line {line}: {message}")]
    QueryRecord { line: usize, message: String },
    #[error("cannot read query file: {0}")]
    Io(#[from] std::io::Error),
}

pub fn parse_queries(text: &str) -> Result<Vec<BenchQuery>, EvalError> {
    let qs = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::QueryRecord {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<BenchQuery>, _>>()?;
    if qs.is_empty() {
        return Err(EvalError::NoQueries);
    }
    Ok(qs)
}

pub fn bundled_queries() -> Vec<BenchQuery> {
    parse_queries(BUNDLED_QUERIES).expect("bundled queries are valid")
}

pub fn load_queries(path: &std::path::Path) -> Result<Vec<BenchQuery>, EvalError> {
    parse_queries(&std::fs::read_to_string(path)?)
}

/// Picks configs by label, keeping the requested order.
pub fn select_configs(available: &[GeneratorConfig], labels: &[String]) -> Result<Vec<GeneratorConfig>, EvalError> {
    labels
        .iter()
        .map(|l| {
            available
                .iter()
                .find(|c| &c.label == l)
                .cloned()
                .ok_or_else(|| EvalError::UnknownConfig(l.clone()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub config_label: String,
    pub compiled: bool,
    pub repairs_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    pub elapsed_ms: u64,
}

impl EvalRecord {
    pub fn from_status(query_id: &str, config_label: &str, status: FinalStatus, elapsed_ms: u64) -> Self {
        let failure_reason = match status {
            FinalStatus::Failed(r) => Some(r.name().to_string()),
            FinalStatus::NotCompiled => Some("NotCompiled".to_string()),
            _ => None,
        };
        Self {
            query_id: query_id.to_string(),
            config_label: config_label.to_string(),
            compiled: status.compiled(),
            repairs_used: status.repairs(),
            failure_reason,
            elapsed_ms,
        }
    }
}

/// Runs every (query, config) cell through the full pipeline. Records come
/// back grouped by config in the given order, then by query order.
pub fn run_benchmark(
    orchestrator: &Orchestrator,
    queries: &[BenchQuery],
    configs: &[GeneratorConfig],
    seed: u64,
    parallelism: usize,
) -> Result<Vec<EvalRecord>, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    if configs.is_empty() {
        return Err(EvalError::NoConfigs);
    }
    let cells: Vec<(&GeneratorConfig, &BenchQuery)> = configs
        .iter()
        .flat_map(|c| queries.iter().map(move |q| (c, q)))
        .collect();
    let session = ChatSession::new("bench", SessionSettings::default());
    let run = |(config, query): &(&GeneratorConfig, &BenchQuery)| {
        let cfg = (*config).clone().with_seed(seed);
        let start = Instant::now();
        let r = orchestrator.run_path(&cfg, &query.text, &session, &[], &null_sink());
        EvalRecord::from_status(
            &query.id,
            &cfg.label,
            r.final_status,
            start.elapsed().as_millis() as u64,
        )
    };
    let width = parallelism.max(1);
    let mut records = Vec::with_capacity(cells.len());
    for batch in cells.chunks(width) {
        let out: Vec<EvalRecord> = std::thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|cell| s.spawn(move || run(cell))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("benchmark cell panicked"))
                .collect()
        });
        records.extend(out);
    }
    Ok(records)
}

/// Integer percentage rounded half-up.
pub fn percent_half_up(count: usize, n: usize) -> u32 {
    if n == 0 {
        return 0;
    }
    ((200 * count + n) / (2 * n)) as u32
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRow {
    pub config_label: String,
    pub n: usize,
    pub compiled: usize,
    /// Compiled only after at least one repair.
    pub repaired: usize,
    pub compiled_pct: u32,
    pub repaired_pct: u32,
    pub failures: BTreeMap<String, usize>,
}

impl EvalRow {
    pub fn summary(&self) -> String {
        format!("{}% / {}%", self.compiled_pct, self.repaired_pct)
    }
}

/// Aggregates records per config, in order of first appearance.
pub fn eval_table(records: &[EvalRecord]) -> Vec<EvalRow> {
    let mut rows: Vec<EvalRow> = Vec::new();
    for r in records {
        let i = match rows.iter().position(|row| row.config_label == r.config_label) {
            Some(i) => i,
            None => {
                rows.push(EvalRow {
                    config_label: r.config_label.clone(),
                    n: 0,
                    compiled: 0,
                    repaired: 0,
                    compiled_pct: 0,
                    repaired_pct: 0,
                    failures: BTreeMap::new(),
                });
                rows.len() - 1
            }
        };
        let row = &mut rows[i];
        row.n += 1;
        if r.compiled {
            row.compiled += 1;
            if r.repairs_used > 0 {
                row.repaired += 1;
            }
        } else {
            let reason = r.failure_reason.clone().unwrap_or_else(|| "Unknown".into());
            *row.failures.entry(reason).or_default() += 1;
        }
    }
    for row in &mut rows {
        row.compiled_pct = percent_half_up(row.compiled, row.n);
        row.repaired_pct = percent_half_up(row.repaired, row.n);
    }
    rows
}

/// Plain-text report: the Compiled/Repaired table and a failure appendix.
/// Timing is left out so seeded runs render identically.
pub fn render_report(records: &[EvalRecord]) -> String {
    let rows = eval_table(records);
    let width = rows
        .iter()
        .map(|r| r.config_label.len())
        .chain(["Model Configuration".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::from("Compilation success rates\n\n");
    let _ = writeln!(out, "| {:<width$} | Compiled | Repaired |   n |", "Model Configuration");
    let _ = writeln!(out, "|-{}-|---------:|---------:|----:|", "-".repeat(width));
    for r in &rows {
        let _ = writeln!(
            out,
            "| {:<width$} | {:>7}% | {:>7}% | {:>3} |",
            r.config_label, r.compiled_pct, r.repaired_pct, r.n
        );
    }
    out.push_str("\nFailure reasons\n\n");
    let any = rows.iter().any(|r| !r.failures.is_empty());
    if !any {
        out.push_str("(none)\n");
    }
    for r in rows.iter().filter(|r| !r.failures.is_empty()) {
        for (reason, count) in &r.failures {
            let _ = writeln!(out, "- {}: {reason} {count}", r.config_label);
        }
    }
    out
}

pub fn records_to_jsonl(records: &[EvalRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(label: &str, compiled: bool, repairs: u32) -> EvalRecord {
        EvalRecord {
            query_id: "q".into(),
            config_label: label.into(),
            compiled,
            repairs_used: repairs,
            failure_reason: (!compiled).then(|| "BudgetExhausted".into()),
            elapsed_ms: 7,
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent_half_up(1, 8), 13); // 12.5
        assert_eq!(percent_half_up(1, 3), 33);
        assert_eq!(percent_half_up(2, 3), 67);
        assert_eq!(percent_half_up(0, 5), 0);
        assert_eq!(percent_half_up(5, 5), 100);
    }

    #[test]
    fn single_and_all_failed_rows() {
        let one = eval_table(&[rec("a", true, 0)]);
        assert_eq!(one[0].summary(), "100% / 0%");
        let failed = eval_table(&[rec("b", false, 0), rec("b", false, 0)]);
        assert_eq!(failed[0].summary(), "0% / 0%");
        let text = render_report(&[rec("b", false, 0)]);
        assert!(text.contains("- b: BudgetExhausted 1"));
    }

    #[test]
    fn bundled_queries_are_unique() {
        let qs = bundled_queries();
        assert_eq!(qs.len(), 100);
        let ids: std::collections::BTreeSet<_> = qs.iter().map(|q| &q.id).collect();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(parse_queries("\n"), Err(EvalError::NoQueries)));
        assert!(matches!(
            select_configs(&[], &["x".to_string()]),
            Err(EvalError::UnknownConfig(_))
        ));
    }
}
