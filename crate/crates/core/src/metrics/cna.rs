use serde::{Deserialize, Serialize};

use super::correlation::pearson_named;
use super::entropy::{entropies, EntropyConfig};
use super::regression::slope;
use crate::nn::{ActivationTrace, Aggregation, Network, EVAL_CHUNK};
use crate::{Result, Tensor};

pub const ALPHA_NAME: &str = "alpha (input entropy)";
pub const BETA_NAME: &str = "beta (activation slope)";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CnaConfig {
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub aggregation: Aggregation,
}

/// The two per-datapoint vectors behind a CNA value.
#[derive(Debug, Clone, PartialEq)]
pub struct CnaBreakdown {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub value: f64,
}

/// `β` of every datapoint in a trace.
pub fn slopes(trace: &ActivationTrace) -> Result<Vec<f64>> {
    (0..trace.datapoints()).map(|i| slope(trace.row(i))).collect()
}

/// Correlation of entropy `α` with activation slope `β`.
pub fn cna_from_vectors(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    pearson_named(alpha, ALPHA_NAME, beta, BETA_NAME)
}

/// CNA of `net` over the datapoints in `inputs`.
pub fn cna(net: &Network, inputs: &Tensor, cfg: &CnaConfig) -> Result<f64> {
    cna_breakdown(net, inputs, cfg).map(|b| b.value)
}

pub fn cna_breakdown(net: &Network, inputs: &Tensor, cfg: &CnaConfig) -> Result<CnaBreakdown> {
    let alpha = entropies(inputs, &cfg.entropy)?;
    let (_, trace) = net.forward_chunked(inputs, Some(cfg.aggregation), EVAL_CHUNK)?;
    let beta = slopes(&trace.expect("recorded"))?;
    let value = cna_from_vectors(&alpha, &beta)?;
    Ok(CnaBreakdown { alpha, beta, value })
}
