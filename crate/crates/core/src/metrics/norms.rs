//! Norm-based capacity measures over a network's weight matrices.
//!
//! Conv kernels are viewed as `out_channels x (in_channels * k * k)` matrices.
//! Biases are ignored throughout.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::nn::Network;
use crate::rng::{self, Purpose};
use crate::{Error, Result, Tensor};

pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 100_000;

pub fn frobenius_squared(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}

/// Largest singular value of the row-major `rows x cols` matrix `w`, by power
/// iteration on `WᵀW`. Stops once the eigen-residual `‖WᵀWv - λv‖ <= tol·λ`.
pub fn spectral_norm(w: &[f64], rows: usize, cols: usize, tol: f64, max_iter: usize) -> Result<f64> {
    if rows == 0 || cols == 0 || w.len() != rows * cols {
        return Err(Error::Shape(format!(
            "spectral norm of a {rows}x{cols} matrix with {} entries",
            w.len()
        )));
    }
    let mut rng = rng::stream(0, Purpose::PowerIteration);
    let mut v: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    let mut wv = vec![0.0; rows];
    let mut u = vec![0.0; cols];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        for (r, out) in wv.iter_mut().enumerate() {
            *out = dot(&w[r * cols..(r + 1) * cols], &v);
        }
        u.fill(0.0);
        for (r, &s) in wv.iter().enumerate() {
            for (acc, &x) in u.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                *acc += s * x;
            }
        }
        lambda = dot(&v, &u);
        if lambda <= 0.0 {
            // v is in the null space; only possible for W = 0 given a random start
            if u.iter().all(|&x| x == 0.0) {
                return Ok(0.0);
            }
        }
        let residual = u
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= tol * lambda.abs() {
            return Ok(lambda.max(0.0).sqrt());
        }
        v.copy_from_slice(&u);
        normalize(&mut v);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last: lambda.max(0.0).sqrt(),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Sum over all input-output paths of the product of squared weights,
/// computed by propagating an all-ones input through the squared,
/// bias-free network.
pub fn path_norm(net: &Network) -> Result<f64> {
    let mut squared = net.clone();
    for p in squared.params_mut().iter_mut().flatten() {
        p.weight.data_mut().iter_mut().for_each(|w| *w *= *w);
        if let Some(b) = p.bias.as_mut() {
            b.data_mut().fill(0.0);
        }
    }
    let mut shape = vec![1];
    shape.extend_from_slice(net.input_shape());
    let ones = Tensor::new(shape, vec![1.0; net.input_shape().iter().product()])?;
    // every quantity is non-negative, so relu passes values through unchanged
    let (out, _) = squared.forward(&ones, None)?;
    Ok(out.data().iter().sum())
}

/// Unnormalized norm products of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormProducts {
    /// `Π ‖W‖_F²`
    pub frobenius_product: f64,
    /// `Π ‖W‖₂²`
    pub spectral_product: f64,
    /// `Σ ‖W‖_F² / ‖W‖₂²`
    pub stable_rank_sum: f64,
    pub path_norm: f64,
}

pub fn norm_products(net: &Network) -> Result<NormProducts> {
    let mut frobenius_product = 1.0;
    let mut spectral_product = 1.0;
    let mut stable_rank_sum = 0.0;
    for (rows, cols, w) in net.weight_matrices() {
        let fro = frobenius_squared(w);
        let spec = spectral_norm(w, rows, cols, SPECTRAL_TOL, SPECTRAL_MAX_ITER)?.powi(2);
        frobenius_product *= fro;
        spectral_product *= spec;
        stable_rank_sum += if spec > 0.0 { fro / spec } else { 0.0 };
    }
    Ok(NormProducts {
        frobenius_product,
        spectral_product,
        stable_rank_sum,
        path_norm: path_norm(net)?,
    })
}

/// Margin-normalized measures for margin `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormMetrics {
    /// `Π ‖W‖_F² / γ²`
    pub frobenius: f64,
    /// `Π ‖W‖₂² · Σ (‖W‖_F² / ‖W‖₂²) / γ²`
    pub spectral: f64,
    /// `path_norm / γ²`
    pub path: f64,
}

pub fn normalize_by_margin(products: &NormProducts, gamma: f64) -> Result<NormMetrics> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Degenerate(format!(
            "margin-normalized norms need a positive margin, got {gamma}"
        )));
    }
    let g2 = gamma * gamma;
    Ok(NormMetrics {
        frobenius: products.frobenius_product / g2,
        spectral: products.spectral_product * products.stable_rank_sum / g2,
        path: products.path_norm / g2,
    })
}

pub fn norm_metrics(net: &Network, gamma: f64) -> Result<NormMetrics> {
    normalize_by_margin(&norm_products(net)?, gamma)
}
