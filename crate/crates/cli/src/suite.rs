//! The `suite` command: a grid of experiments run in parallel workers.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cna_core::analysis::GroupBy;
use serde::Serialize;

use crate::config::{ExperimentConfig, SuiteConfig};
use crate::error::{CliError, Result};
use crate::experiment::{record_path, run_training, RECORDS_DIR};
use crate::fsutil::write_json;
use crate::report::{run_report, ReportOutput};

pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_DIR: &str = "report";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum CellStatus {
    Trained,
    Skipped,
    Failed { exit_code: i32, error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct CellOutcome {
    pub name: String,
    #[serde(flatten)]
    pub status: CellStatus,
}

#[derive(Debug, Serialize)]
pub struct SuiteSummary {
    pub cells: Vec<CellOutcome>,
    #[serde(skip)]
    pub report: Option<ReportOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_error: Option<String>,
}

impl SuiteSummary {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c.status, CellStatus::Failed { .. })).count()
    }
}

fn is_complete(cfg: &ExperimentConfig) -> bool {
    record_path(&cfg.output_dir, cfg.epochs).exists()
}

/// Runs every cell not yet complete, then reports over the latest record of
/// each cell.
pub fn run_suite(suite: &SuiteConfig, jobs: usize, log: &(dyn Fn(&str) + Sync)) -> Result<SuiteSummary> {
    let cells = suite.cells();
    let mut seen = std::collections::BTreeSet::new();
    if let Some((dup, _)) = cells.iter().find(|(n, _)| !seen.insert(n.clone())) {
        return Err(CliError::Config(format!("two suite cells share the name {dup}")));
    }
    for (_, cfg) in &cells {
        cfg.validate()?;
    }
    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<Option<CellStatus>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((name, cfg)) = cells.get(i) else { break };
                let status = if is_complete(cfg) {
                    log(&format!("[{name}] complete, skipping"));
                    CellStatus::Skipped
                } else {
                    let mut cell_log = |line: &str| log(&format!("[{name}] {line}"));
                    match run_training(cfg, &mut cell_log) {
                        Ok(_) => CellStatus::Trained,
                        Err(e) => {
                            log(&format!("[{name}] failed: {e}"));
                            CellStatus::Failed {
                                exit_code: e.exit_code(),
                                error: e.to_string(),
                            }
                        }
                    }
                };
                outcomes.lock().expect("outcome lock")[i] = Some(status);
            });
        }
    });
    let cells: Vec<CellOutcome> = cells
        .iter()
        .zip(outcomes.into_inner().expect("outcome lock"))
        .map(|((name, _), s)| CellOutcome {
            name: name.clone(),
            status: s.expect("every cell visited"),
        })
        .collect();

    let pattern = records_glob(&suite.output_dir);
    let (report, report_error) = match run_report(&pattern, GroupBy::Arch, true, &suite.output_dir.join(REPORT_DIR)) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = SuiteSummary {
        cells,
        report,
        report_error,
    };
    write_json(&suite.output_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn records_glob(out: &Path) -> String {
    let escaped = glob::Pattern::escape(&out.to_string_lossy());
    let p: PathBuf = [escaped.as_str(), "*", RECORDS_DIR, "*.json"].iter().collect();
    p.to_string_lossy().into_owned()
}
