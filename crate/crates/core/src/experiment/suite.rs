use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::CurveKind;
use super::pipeline::{load_summary, run_regime, RegimeResult};
use super::regime::RegimeSpec;
use crate::error::{Error, Result};

/// Outcome of one regime in a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub id: String,
    pub result: Option<RegimeResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteSummary {
    pub fn results(&self) -> impl Iterator<Item = &RegimeResult> {
        self.entries.iter().filter_map(|e| e.result.as_ref())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .filter_map(|e| e.error.as_deref().map(|m| (e.id.as_str(), m)))
    }

    pub fn table(&self) -> String {
        let results: Vec<&RegimeResult> = self.results().collect();
        let mut out = render_tables(&results);
        for (id, msg) in self.failures() {
            let _ = writeln!(out, "failed: {id}: {msg}");
        }
        out
    }
}

/// Runs regimes on a pool of `jobs` workers. A failing regime is recorded
/// and the others continue. With `out_dir`, each regime persists its own
/// directory and the suite writes `suite.json` and `tables.md`.
pub fn run_suite(specs: &[RegimeSpec], jobs: usize, out_dir: Option<&Path>) -> Result<SuiteSummary> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let entries = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| match run_regime(spec, out_dir) {
                Ok(r) => SuiteEntry {
                    id: spec.id(),
                    result: Some(r),
                    error: None,
                },
                Err(e) => SuiteEntry {
                    id: spec.id(),
                    result: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    });
    let summary = SuiteSummary { entries };
    if let Some(dir) = out_dir {
        let path = dir.join("suite.json");
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let path = dir.join("tables.md");
        fs::write(&path, summary.table()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(summary)
}

/// Loads every `<dir>/*/summary.json`, sorted by regime id.
pub fn load_summaries(dir: &Path) -> Result<Vec<RegimeResult>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path().join("summary.json");
        if path.is_file() {
            out.push(load_summary(&path)?);
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

fn key(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

/// One error table per diagnostic: rows `F_x`, a `Red.`/`Z.O.` column pair
/// for every `(λ, F_y)` block.
pub fn render_tables(results: &[&RegimeResult]) -> String {
    let blocks: BTreeSet<(i64, i64)> = results
        .iter()
        .map(|r| (key(r.params.lambda_x), key(r.params.f_y)))
        .collect();
    let rows: BTreeSet<i64> = results.iter().map(|r| key(r.params.f_x)).collect();
    let mut out = String::new();
    for (n, kind) in CurveKind::ALL.into_iter().enumerate() {
        let _ = writeln!(out, "Table {}: L2 errors of the {}\n", n + 1, kind.title());
        let mut header = String::from("| F_x |");
        let mut rule = String::from("|---|");
        for &(lam, fy) in &blocks {
            let _ = write!(header, " λ={}, F_y={} Red. | Z.O. |", lam as f64 / 1e6, fy as f64 / 1e6);
            rule.push_str("---|---|");
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for &fx in &rows {
            let _ = write!(out, "| {} |", fx as f64 / 1e6);
            for &(lam, fy) in &blocks {
                let cell = results
                    .iter()
                    .find(|r| key(r.params.lambda_x) == lam && key(r.params.f_y) == fy && key(r.params.f_x) == fx);
                match cell {
                    Some(r) => {
                        let _ = write!(
                            out,
                            " {:.4e} | {:.4e} |",
                            r.errors.reduced.get(kind),
                            r.errors.zero_order.get(kind)
                        );
                    }
                    None => out.push_str(" - | - |"),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_is_empty() {
        let s = run_suite(&[], 2, None).unwrap();
        assert!(s.entries.is_empty());
        assert_eq!(s.failures().count(), 0);
    }

    #[test]
    fn failures_are_recorded_and_suite_continues() {
        let mut bad = RegimeSpec::reference(0.3, 6.0, 8.0);
        bad.t_stats = 1.0;
        let s = run_suite(&[bad.clone(), bad], 2, None).unwrap();
        assert_eq!(s.entries.len(), 2);
        assert!(s.entries.iter().all(|e| e.result.is_none() && e.error.is_some()));
        assert!(s.table().contains("failed:"));
    }
}
