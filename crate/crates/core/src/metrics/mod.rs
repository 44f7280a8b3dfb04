//! Scalar metrics: entropy `α`, slope `β`, Pearson correlation, CNA,
//! CNA-Margin, output margins and the norm-based baselines.

mod cna;
mod correlation;
mod entropy;
mod margin;
mod norms;
mod regression;

pub use cna::{cna, cna_breakdown, cna_from_vectors, slopes, CnaBreakdown, CnaConfig, ALPHA_NAME, BETA_NAME};
pub use correlation::{pearson, pearson_named};
pub use entropy::{entropies, entropy, EntropyConfig, RangeMode};
pub use margin::{
    cna_margin, cna_margin_breakdown, margin_summary, output_margin, percentile,
    CnaMarginBreakdown, MarginSummary, MARGIN_PERCENTILE,
};
pub use norms::{
    frobenius_squared, norm_metrics, norm_products, normalize_by_margin, path_norm, spectral_norm,
    NormMetrics, NormProducts, SPECTRAL_MAX_ITER, SPECTRAL_TOL,
};
pub use regression::slope;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::nn::Network;
use crate::{Error, Result};

/// Which dataset supplies the inputs for plain CNA.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnaInputs {
    #[default]
    Test,
    Train,
}

/// Generalization-gap predictors for one network snapshot. `None` marks a
/// value that is undefined for this snapshot (e.g. zero-variance slopes or a
/// non-positive margin for the normalized norms).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GapMetricSet {
    pub cna: Option<f64>,
    pub cna_margin: Option<f64>,
    /// Margin-normalized Frobenius product.
    pub frobenius: Option<f64>,
    /// Unnormalized product of squared spectral norms.
    pub spectral_product: Option<f64>,
    /// Margin-normalized spectral measure.
    pub spectral: Option<f64>,
    /// Margin-normalized path norm.
    pub path: Option<f64>,
}

impl GapMetricSet {
    pub const NAMES: [&'static str; 6] = [
        "cna",
        "cna_margin",
        "frobenius",
        "spectral_product",
        "spectral",
        "path",
    ];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "cna" => self.cna,
            "cna_margin" => self.cna_margin,
            "frobenius" => self.frobenius,
            "spectral_product" => self.spectral_product,
            "spectral" => self.spectral,
            "path" => self.path,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapMetrics {
    pub set: GapMetricSet,
    pub margin: Option<MarginSummary>,
    /// `(metric, reason)` for every undefined entry.
    pub undefined: Vec<(String, String)>,
}

/// Computes the full [`GapMetricSet`]. Undefined entries are recorded with a
/// reason; non-finite network output is still an error.
pub fn gap_metrics(
    net: &Network,
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &CnaConfig,
    cna_inputs: CnaInputs,
) -> Result<GapMetrics> {
    let mut undefined = Vec::new();
    let mut keep = |name: &str, r: Result<f64>| -> Result<Option<f64>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e @ (Error::UndefinedCorrelation(_) | Error::Degenerate(_))) => {
                undefined.push((name.to_string(), e.to_string()));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let cna_set = match cna_inputs {
        CnaInputs::Test => test,
        CnaInputs::Train => train,
    };
    let cna_value = keep("cna", cna(net, &cna_set.inputs, cfg))?;
    let (margin, cna_margin_value) = match cna_margin_breakdown(net, train, cfg) {
        Ok(b) => (Some(b.margin), keep("cna_margin", Ok(b.value))?),
        Err(e) => {
            let (logits, _) = net.forward_chunked(&train.inputs, None, crate::nn::EVAL_CHUNK)?;
            (
                Some(margin_summary(&logits, &train.labels)?),
                keep("cna_margin", Err(e))?,
            )
        }
    };
    let products = norm_products(net)?;
    let gamma = margin.map_or(f64::NAN, |m| m.percentile_margin);
    let normalized = keep_norms(normalize_by_margin(&products, gamma), &mut undefined)?;
    Ok(GapMetrics {
        set: GapMetricSet {
            cna: cna_value,
            cna_margin: cna_margin_value,
            frobenius: normalized.map(|n| n.frobenius),
            spectral_product: Some(products.spectral_product),
            spectral: normalized.map(|n| n.spectral),
            path: normalized.map(|n| n.path),
        },
        margin,
        undefined,
    })
}

fn keep_norms(
    r: Result<NormMetrics>,
    undefined: &mut Vec<(String, String)>,
) -> Result<Option<NormMetrics>> {
    match r {
        Ok(n) => Ok(Some(n)),
        Err(Error::Degenerate(reason)) => {
            for name in ["frobenius", "spectral", "path"] {
                undefined.push((name.to_string(), reason.clone()));
            }
            Ok(None)
        }
        Err(e) => Err(e),
    }
}
