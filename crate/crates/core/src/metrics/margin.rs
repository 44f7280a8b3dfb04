//! Output margins and the margin-coupled CNA variant.
//!
//! CNA-Margin multiplies the training-set CNA by a confidence factor
//! `clamp(γ / σ, 0, 1)`, where `γ` is the 10th-percentile output margin over
//! the training set and `σ` the sample standard deviation of every logit gap
//! `logit[y] - logit[j]`, `j != y`.

use serde::{Deserialize, Serialize};

use super::cna::{cna_from_vectors, slopes, CnaConfig};
use super::entropy::entropies;
use crate::data::LabeledDataset;
use crate::nn::{Network, EVAL_CHUNK};
use crate::{Error, Result, Tensor};

/// Percentile of the training margins used as `γ`.
pub const MARGIN_PERCENTILE: f64 = 0.10;

/// `logit[label] - max_{j != label} logit[j]`.
pub fn output_margin(logits: &[f64], label: usize) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::Shape("output margin needs at least 2 classes".into()));
    }
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let other = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(logits[label] - other)
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of no values");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    /// 10th-percentile output margin `γ`.
    pub percentile_margin: f64,
    /// Sample standard deviation `σ` of all logit gaps.
    pub gap_std: f64,
    /// `clamp(γ / σ, 0, 1)`; with `σ = 0` it is 1 when `γ > 0`, else 0.
    pub factor: f64,
}

pub fn margin_summary(logits: &Tensor, labels: &[usize]) -> Result<MarginSummary> {
    let classes = logits.item_len();
    if logits.rows() != labels.len() || labels.is_empty() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let mut margins = Vec::with_capacity(labels.len());
    let mut gaps = Vec::with_capacity(labels.len() * classes.saturating_sub(1));
    for (row, &y) in logits.data().chunks_exact(classes).zip(labels) {
        margins.push(output_margin(row, y)?);
        gaps.extend(
            row.iter()
                .enumerate()
                .filter(|&(j, _)| j != y)
                .map(|(_, &v)| row[y] - v),
        );
    }
    let gamma = percentile(&margins, MARGIN_PERCENTILE);
    let gap_std = if gaps.len() < 2 {
        0.0
    } else {
        let m = gaps.iter().sum::<f64>() / gaps.len() as f64;
        (gaps.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (gaps.len() - 1) as f64).sqrt()
    };
    let factor = if gap_std > 0.0 {
        (gamma / gap_std).clamp(0.0, 1.0)
    } else if gamma > 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(MarginSummary {
        percentile_margin: gamma,
        gap_std,
        factor,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnaMarginBreakdown {
    pub cna: f64,
    pub margin: MarginSummary,
    pub value: f64,
}

/// CNA on the training set scaled by the clamped normalized margin.
pub fn cna_margin(net: &Network, train: &LabeledDataset, cfg: &CnaConfig) -> Result<f64> {
    cna_margin_breakdown(net, train, cfg).map(|b| b.value)
}

pub fn cna_margin_breakdown(
    net: &Network,
    train: &LabeledDataset,
    cfg: &CnaConfig,
) -> Result<CnaMarginBreakdown> {
    let (logits, trace) = net.forward_chunked(&train.inputs, Some(cfg.aggregation), EVAL_CHUNK)?;
    let alpha = entropies(&train.inputs, &cfg.entropy)?;
    let beta = slopes(&trace.expect("recorded"))?;
    let cna = cna_from_vectors(&alpha, &beta)?;
    let margin = margin_summary(&logits, &train.labels)?;
    Ok(CnaMarginBreakdown {
        cna,
        margin,
        // adding 0.0 turns a -0.0 product into 0.0
        value: cna * margin.factor + 0.0,
    })
}
