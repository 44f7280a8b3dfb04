use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{pearson, GapMetricSet};
use crate::{Error, Result};

/// Group label covering every run.
pub const ALL_NETS: &str = "All Nets";
/// Smallest number of runs for which a group correlation is reported.
pub const MIN_RUNS: usize = 3;

/// Scalar ledger of one trained snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub arch: String,
    pub corruption: f64,
    pub epoch: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// `train_acc - test_acc`.
    pub gap: f64,
    pub metrics: GapMetricSet,
    /// Fields this version does not know about, kept for round-tripping.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl RunRecord {
    pub fn new(
        dataset: &str,
        arch: &str,
        corruption: f64,
        epoch: u64,
        train_acc: f64,
        test_acc: f64,
        metrics: GapMetricSet,
    ) -> Result<Self> {
        let ok = |a: f64| (0.0..=1.0).contains(&a);
        if !ok(train_acc) || !ok(test_acc) {
            return Err(Error::Config(format!(
                "accuracies must lie in [0, 1], got {train_acc} and {test_acc}"
            )));
        }
        Ok(Self {
            dataset: dataset.into(),
            arch: arch.into(),
            corruption,
            epoch,
            train_acc,
            test_acc,
            gap: train_acc - test_acc,
            metrics,
            extra: BTreeMap::new(),
        })
    }

    fn sort_key(&self) -> (&str, &str, u64, u64, u64, u64) {
        (
            &self.dataset,
            &self.arch,
            self.corruption.to_bits(),
            self.epoch,
            self.train_acc.to_bits(),
            self.test_acc.to_bits(),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    #[default]
    Arch,
    Dataset,
}

impl GroupBy {
    fn key<'a>(&self, r: &'a RunRecord) -> &'a str {
        match self {
            GroupBy::Arch => &r.arch,
            GroupBy::Dataset => &r.dataset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub metric: String,
    pub group: String,
    /// Pearson correlation with the gap; `None` when undefined.
    pub rho: Option<f64>,
    /// Runs in the group with a defined value for the metric.
    pub n: usize,
    /// Why `rho` is undefined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub cells: Vec<ReportCell>,
}

impl GapReport {
    pub fn get(&self, metric: &str, group: &str) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.metric == metric && c.group == group)
    }
}

/// Pearson correlation of every metric with the gap, per group and over all runs.
///
/// Runs lacking a metric value are left out of that metric's cells only.
/// Groups are listed alphabetically with [`ALL_NETS`] last.
pub fn gap_correlation_report(runs: &[RunRecord], metrics: &[&str], group_by: GroupBy) -> GapReport {
    let mut sorted: Vec<&RunRecord> = runs.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut groups: Vec<&str> = sorted.iter().map(|r| group_by.key(r)).collect();
    groups.sort_unstable();
    groups.dedup();
    let mut cells = Vec::new();
    for &metric in metrics {
        let mut emit = |group: &str, members: Vec<&RunRecord>| {
            let (values, gaps): (Vec<f64>, Vec<f64>) = members
                .iter()
                .filter_map(|r| r.metrics.get(metric).filter(|v| v.is_finite()).map(|v| (v, r.gap)))
                .unzip();
            let n = values.len();
            let (rho, note) = if n < MIN_RUNS {
                (None, Some(format!("fewer than {MIN_RUNS} runs with a value")))
            } else {
                match pearson(&values, &gaps) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            cells.push(ReportCell {
                metric: metric.into(),
                group: group.into(),
                rho,
                n,
                note,
            });
        };
        for &g in &groups {
            emit(g, sorted.iter().copied().filter(|r| group_by.key(r) == g).collect());
        }
        emit(ALL_NETS, sorted.clone());
    }
    GapReport { cells }
}

/// `(CNA, test accuracy)` for every run with a defined CNA.
pub fn cna_accuracy_points(runs: &[RunRecord]) -> Vec<(f64, f64)> {
    runs.iter()
        .filter_map(|r| r.metrics.cna.map(|c| (c, r.test_acc)))
        .collect()
}
