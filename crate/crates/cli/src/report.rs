//! The `report` command: metric-versus-gap correlations over run records.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cna_core::analysis::{cna_accuracy_points, gap_correlation_report, GapReport, GroupBy, RunRecord, ALL_NETS};
use cna_core::metrics::GapMetricSet;

use crate::csvio::{write_csv, ReportRow, REPORT_SCHEMA};
use crate::error::{CliError, Result};
use crate::fsutil::{write_atomic, write_json};
use crate::svg;

/// Metrics whose correlation with the gap is reported.
pub const REPORT_METRICS: [&str; 6] = GapMetricSet::NAMES;
/// Metrics that must be defined for every run group in a complete report.
pub const CORE_METRICS: [&str; 5] = ["cna", "cna_margin", "frobenius", "spectral", "path"];

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub records: usize,
    pub report: GapReport,
    pub dir: PathBuf,
}

/// Loads records matching `pattern`. With `latest`, only the highest-epoch
/// record of each run directory is kept.
pub fn load_records(pattern: &str, latest: bool) -> Result<Vec<(PathBuf, RunRecord)>> {
    let paths = glob::glob(pattern).map_err(|e| CliError::Config(format!("bad glob `{pattern}`: {e}")))?;
    let mut found = Vec::new();
    for entry in paths {
        let path = entry.map_err(|e| CliError::Data(e.to_string()))?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let record: RunRecord =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        found.push((path, record));
    }
    if found.is_empty() {
        return Err(CliError::Data(format!("no run records match `{pattern}`")));
    }
    if latest {
        let mut best: BTreeMap<PathBuf, (PathBuf, RunRecord)> = BTreeMap::new();
        for (path, record) in found {
            let run = path.parent().and_then(Path::parent).unwrap_or(Path::new("")).to_path_buf();
            match best.get(&run) {
                Some((_, r)) if r.epoch >= record.epoch => {}
                _ => {
                    best.insert(run, (path, record));
                }
            }
        }
        found = best.into_values().collect();
    }
    Ok(found)
}

pub fn run_report(pattern: &str, group_by: GroupBy, latest: bool, out: &Path) -> Result<ReportOutput> {
    let found = load_records(pattern, latest)?;
    if found.len() < cna_core::analysis::MIN_RUNS {
        return Err(CliError::Data(format!(
            "{} run records match `{pattern}`; at least {} are needed",
            found.len(),
            cna_core::analysis::MIN_RUNS
        )));
    }
    let records: Vec<RunRecord> = found.into_iter().map(|(_, r)| r).collect();
    let report = gap_correlation_report(&records, &REPORT_METRICS, group_by);
    let rows: Vec<ReportRow> = report
        .cells
        .iter()
        .map(|c| ReportRow {
            metric: c.metric.clone(),
            group: c.group.clone(),
            rho: c.rho,
            n: c.n,
        })
        .collect();
    write_csv(&out.join("report.csv"), REPORT_SCHEMA, &rows)?;
    write_json(&out.join("report.json"), &report)?;
    let bars = svg::correlation_bars(&report, &REPORT_METRICS, "Correlation of each metric with the generalization gap");
    write_atomic(&out.join("report_bars.svg"), bars.as_bytes())?;
    let series: Vec<String> = records.iter().filter(|r| r.metrics.cna.is_some()).map(|r| r.arch.clone()).collect();
    let points: Vec<(f64, f64, String)> =
        cna_accuracy_points(&records).into_iter().zip(series).map(|((x, y), s)| (x, y, s)).collect();
    let scatter = svg::scatter(&points, "CNA against test accuracy", "CNA", "test accuracy");
    write_atomic(&out.join("cna_accuracy.svg"), scatter.as_bytes())?;
    Ok(ReportOutput {
        records: records.len(),
        report,
        dir: out.to_path_buf(),
    })
}

/// Human-readable table plus the CNA-Margin versus norm-baseline comparison.
pub fn summarize(report: &GapReport) -> String {
    let mut s = String::new();
    let mut groups: Vec<&str> = Vec::new();
    for c in &report.cells {
        if !groups.contains(&c.group.as_str()) {
            groups.push(&c.group);
        }
    }
    s.push_str(&format!("{:<18}", "metric"));
    for g in &groups {
        s.push_str(&format!("{g:>14}"));
    }
    s.push('\n');
    for m in REPORT_METRICS {
        s.push_str(&format!("{m:<18}"));
        for g in &groups {
            let v = report.get(m, g).and_then(|c| c.rho).map_or("undefined".to_string(), |r| format!("{r:.3}"));
            s.push_str(&format!("{v:>14}"));
        }
        s.push('\n');
    }
    if let Some(finding) = margin_finding(report) {
        s.push_str(&finding);
        s.push('\n');
    }
    s
}

/// Whether |rho(CNA-Margin, gap)| beats every norm baseline over all runs.
pub fn margin_finding(report: &GapReport) -> Option<String> {
    let rho = |m: &str| report.get(m, ALL_NETS).and_then(|c| c.rho);
    let margin = rho("cna_margin")?;
    let baselines: Vec<(&str, f64)> = ["frobenius", "spectral", "path", "spectral_product"]
        .into_iter()
        .filter_map(|m| rho(m).map(|r| (m, r)))
        .collect();
    let best = baselines.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    let verdict = if margin.abs() > best.1.abs() { "exceeds" } else { "does not exceed" };
    Some(format!(
        "finding: |rho(cna_margin, gap)| = {:.3} {verdict} the strongest norm baseline ({}: |rho| = {:.3})",
        margin.abs(),
        best.0,
        best.1.abs()
    ))
}
