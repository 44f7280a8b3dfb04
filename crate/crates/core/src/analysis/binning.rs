use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Quantile bins over per-datapoint entropies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAssignment {
    /// Bin of every datapoint, in datapoint order.
    pub bin_of: Vec<usize>,
    pub sizes: Vec<usize>,
    /// `q + 1` edges: the smallest `α` of each bin, then the overall maximum.
    pub edges: Vec<f64>,
}

impl BinAssignment {
    pub fn bins(&self) -> usize {
        self.sizes.len()
    }

    /// Datapoint indices of bin `b`, ascending.
    pub fn members(&self, b: usize) -> Vec<usize> {
        (0..self.bin_of.len()).filter(|&i| self.bin_of[i] == b).collect()
    }
}

/// Sorts datapoints by `(α, index)`; sorted positions `[bN/q, (b+1)N/q)` form bin `b`.
pub fn complexity_bins(alphas: &[f64], q: usize) -> Result<BinAssignment> {
    let n = alphas.len();
    if q < 2 || n < q {
        return Err(Error::Config(format!("cannot split {n} datapoints into {q} bins")));
    }
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("entropy".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| alphas[a].total_cmp(&alphas[b]).then(a.cmp(&b)));
    let mut bin_of = vec![0; n];
    let mut sizes = vec![0; q];
    let mut edges = Vec::with_capacity(q + 1);
    for (b, size) in sizes.iter_mut().enumerate() {
        let (lo, hi) = (b * n / q, (b + 1) * n / q);
        edges.push(alphas[order[lo]]);
        for &i in &order[lo..hi] {
            bin_of[i] = b;
        }
        *size = hi - lo;
    }
    edges.push(alphas[order[n - 1]]);
    Ok(BinAssignment { bin_of, sizes, edges })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedErrorCurves {
    pub edges: Vec<f64>,
    pub sizes: Vec<usize>,
    /// `curves[b][e]`: mean error of bin `b` at the `e`-th recorded epoch.
    pub curves: Vec<Vec<f64>>,
}

impl BinnedErrorCurves {
    /// Size-weighted mean over bins at epoch `e`.
    pub fn overall(&self, e: usize) -> f64 {
        let total: usize = self.sizes.iter().sum();
        self.curves
            .iter()
            .zip(&self.sizes)
            .map(|(c, &s)| c[e] * s as f64)
            .sum::<f64>()
            / total as f64
    }
}

/// `errors[e][i]` is true when datapoint `i` was misclassified at epoch `e`.
pub fn binned_error_curves(errors: &[Vec<bool>], bins: &BinAssignment) -> Result<BinnedErrorCurves> {
    let n = bins.bin_of.len();
    if let Some(bad) = errors.iter().find(|f| f.len() != n) {
        return Err(Error::Shape(format!(
            "{} error flags for {n} binned datapoints",
            bad.len()
        )));
    }
    let mut curves = vec![Vec::with_capacity(errors.len()); bins.bins()];
    for flags in errors {
        let mut wrong = vec![0usize; bins.bins()];
        for (&b, &f) in bins.bin_of.iter().zip(flags) {
            wrong[b] += f as usize;
        }
        for (b, c) in curves.iter_mut().enumerate() {
            c.push(wrong[b] as f64 / bins.sizes[b] as f64);
        }
    }
    Ok(BinnedErrorCurves {
        edges: bins.edges.clone(),
        sizes: bins.sizes.clone(),
        curves,
    })
}
