//! Metrics against independent brute-force oracles on small random instances.

mod common;

use common::{entropy_of_bins, mean, naive_forward, naive_pearson, naive_slope};
use cna_core::metrics::{
    cna, entropy, frobenius_squared, margin_summary, norm_metrics, norm_products, path_norm, pearson,
    slope, spectral_norm, CnaConfig, EntropyConfig, RangeMode, SPECTRAL_MAX_ITER, SPECTRAL_TOL,
};
use cna_core::nn::{build_network_with, DepthSelection, LayerSpec, Network};
use cna_core::Tensor;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(128)
}

/// Values placed strictly inside known bins, so the oracle knows every bin index.
fn binned_values(bins: usize) -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((0..bins, 0.05f64..0.95), 1..60)
}

fn oracle_spectral(w: &[f64], rows: usize, cols: usize) -> f64 {
    let m = DMatrix::from_row_slice(rows, cols, w);
    let eig = SymmetricEigen::new(m.transpose() * &m);
    eig.eigenvalues.iter().copied().fold(0.0, f64::max).sqrt()
}

/// A small dense or convolutional classifier.
fn small_net() -> impl Strategy<Value = Network> {
    let mlp = (1usize..5, prop::collection::vec(1usize..5, 1..4), 2usize..4, any::<u64>()).prop_map(
        |(inputs, hidden, classes, seed)| {
            let mut specs = Vec::new();
            let mut width = inputs;
            for h in hidden {
                specs.push(LayerSpec::dense(width, h));
                specs.push(LayerSpec::Relu);
                width = h;
            }
            specs.push(LayerSpec::dense(width, classes));
            build_network_with(&[inputs], &specs, seed, DepthSelection { include_output: true }).unwrap()
        },
    );
    let cnn = (1usize..3, 3usize..6, 1usize..3, 1usize..3, 1usize..3, any::<u64>()).prop_map(
        |(c, hw, k, s, out, seed)| {
            let conv = LayerSpec::conv2d(c, out, k, s);
            let flat = conv.output_shape(&[c, hw, hw]).unwrap().iter().product();
            let specs = vec![conv, LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::dense(flat, 3)];
            build_network_with(&[c, hw, hw], &specs, seed, DepthSelection { include_output: true }).unwrap()
        },
    );
    prop_oneof![mlp, cnn]
}

/// Neuron-level edges `(from, to, weight)` of every parameterized layer.
fn neuron_graph(net: &Network) -> Vec<Vec<(usize, usize, f64)>> {
    let mut shape = net.input_shape().to_vec();
    let mut layers = Vec::new();
    for (spec, params) in net.specs().iter().zip(net.params()) {
        let mut edges = Vec::new();
        match *spec {
            LayerSpec::Dense { inputs, outputs, .. } => {
                let w = params.as_ref().unwrap().weight.data();
                for o in 0..outputs {
                    for i in 0..inputs {
                        edges.push((i, o, w[o * inputs + i]));
                    }
                }
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                let w = params.as_ref().unwrap().weight.data();
                let (h, wd) = (shape[shape.len() - 2], shape[shape.len() - 1]);
                let (oh, ow) = ((h - kernel) / stride + 1, (wd - kernel) / stride + 1);
                for o in 0..out_channels {
                    for y in 0..oh {
                        for x in 0..ow {
                            for i in 0..in_channels {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let from = (i * h + y * stride + ky) * wd + x * stride + kx;
                                        let to = (o * oh + y) * ow + x;
                                        let wi = ((o * in_channels + i) * kernel + ky) * kernel + kx;
                                        edges.push((from, to, w[wi]));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        if spec.is_parameterized() {
            layers.push(edges);
        }
        shape = spec.output_shape(&shape).unwrap();
    }
    layers
}

/// Sum over every input-to-output path of the product of squared weights,
/// enumerating paths one by one.
fn enumerate_paths(graph: &[Vec<(usize, usize, f64)>], layer: usize, neuron: usize, acc: f64) -> f64 {
    if layer == graph.len() {
        return acc;
    }
    graph[layer]
        .iter()
        .filter(|e| e.0 == neuron)
        .map(|&(_, to, w)| enumerate_paths(graph, layer + 1, to, acc * w * w))
        .sum()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn entropy_fixed_range_matches_histogram(
        bins in 2usize..300,
        lo in -5.0f64..5.0,
        width in 0.5f64..10.0,
        placed in binned_values(300),
        below in 0usize..3,
        above in 0usize..3,
    ) {
        let hi = lo + width;
        let mut xs = Vec::new();
        let mut idx = Vec::new();
        for (k, u) in placed {
            let k = k % bins;
            xs.push(lo + (k as f64 + u) * width / bins as f64);
            idx.push(k);
        }
        for j in 0..below {
            xs.push(lo - 1.0 - j as f64);
            idx.push(0);
        }
        for j in 0..above {
            xs.push(hi + 1.0 + j as f64);
            idx.push(bins - 1);
        }
        let cfg = EntropyConfig { bins, range: RangeMode::Fixed { lo, hi } };
        let got = entropy(&xs, &cfg).unwrap();
        prop_assert!((got - entropy_of_bins(&idx)).abs() <= 1e-10);
    }

    #[test]
    fn entropy_per_datapoint_matches_histogram(
        bins in 2usize..300,
        lo in -5.0f64..5.0,
        width in 0.5f64..10.0,
        placed in binned_values(300),
    ) {
        let hi = lo + width;
        let mut xs = vec![lo, hi];
        let mut idx = vec![0, bins - 1];
        for (k, u) in placed {
            let k = k % bins;
            xs.push(lo + (k as f64 + u) * width / bins as f64);
            idx.push(k);
        }
        let cfg = EntropyConfig { bins, range: RangeMode::PerDatapoint };
        let got = entropy(&xs, &cfg).unwrap();
        prop_assert!((got - entropy_of_bins(&idx)).abs() <= 1e-10);
    }

    #[test]
    fn pearson_matches_direct_formula(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..40)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let var = |v: &[f64]| { let m = mean(v); v.iter().map(|x| (x - m).powi(2)).sum::<f64>() };
        prop_assume!(var(&a) > 1e-3 && var(&b) > 1e-3);
        prop_assert!((pearson(&a, &b).unwrap() - naive_pearson(&a, &b)).abs() <= 1e-10);
    }

    #[test]
    fn slope_matches_least_squares_solve(z in prop::collection::vec(-1e3f64..1e3, 2..40)) {
        let l = z.len();
        let design = DMatrix::from_fn(l, 2, |i, j| if j == 0 { 1.0 } else { (i + 1) as f64 });
        let rhs = DMatrix::from_column_slice(l, 1, &z);
        let coef = design.svd(true, true).solve(&rhs, 1e-14).unwrap();
        let expected = coef[(1, 0)];
        prop_assert!((slope(&z).unwrap() - expected).abs() <= 1e-10 * expected.abs().max(1.0));
        prop_assert!((naive_slope(&z) - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn spectral_norm_matches_eigen_oracle(
        rows in 1usize..7,
        cols in 1usize..7,
        entries in prop::collection::vec(-3.0f64..3.0, 36),
    ) {
        let w = &entries[..rows * cols];
        let got = spectral_norm(w, rows, cols, SPECTRAL_TOL, SPECTRAL_MAX_ITER).unwrap();
        let expected = oracle_spectral(w, rows, cols);
        prop_assert!((got - expected).abs() <= 1e-8 * expected.max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn path_norm_matches_path_enumeration(net in small_net()) {
        let graph = neuron_graph(&net);
        let inputs: usize = net.input_shape().iter().product();
        let expected: f64 = (0..inputs).map(|i| enumerate_paths(&graph, 0, i, 1.0)).sum();
        let got = path_norm(&net).unwrap();
        prop_assert!((got - expected).abs() <= 1e-10 * expected.max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn norm_metrics_match_direct_formulas(net in small_net(), gamma in 0.05f64..3.0) {
        let mut frob = 1.0;
        let mut spec = 1.0;
        let mut ratio = 0.0;
        for (rows, cols, w) in net.weight_matrices() {
            let f: f64 = w.iter().map(|v| v * v).sum();
            let s = oracle_spectral(w, rows, cols).powi(2);
            frob *= f;
            spec *= s;
            ratio += f / s;
            prop_assert!((frobenius_squared(w) - f).abs() <= 1e-12 * f.max(1.0));
        }
        let products = norm_products(&net).unwrap();
        prop_assert!((products.spectral_product - spec).abs() <= 1e-8 * spec.max(1.0));
        let m = norm_metrics(&net, gamma).unwrap();
        let g2 = gamma * gamma;
        prop_assert!((m.frobenius - frob / g2).abs() <= 1e-10 * (frob / g2).max(1.0));
        prop_assert!((m.spectral - spec * ratio / g2).abs() <= 1e-7 * (spec * ratio / g2).max(1.0));
        prop_assert!((m.path - products.path_norm / g2).abs() <= 1e-10 * (products.path_norm / g2).max(1.0));
    }

    #[test]
    fn margin_summary_matches_direct_computation(
        rows in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 3), 0usize..3), 2..11),
    ) {
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.0.clone()).collect();
        let logits = Tensor::matrix(rows.len(), 3, flat).unwrap();
        let mut margins = Vec::new();
        let mut gaps = Vec::new();
        for (l, y) in &rows {
            let other = (0..3).filter(|j| j != y).map(|j| l[j]).fold(f64::NEG_INFINITY, f64::max);
            margins.push(l[*y] - other);
            for j in (0..3).filter(|j| j != y) {
                gaps.push(l[*y] - l[j]);
            }
        }
        margins.sort_by(f64::total_cmp);
        let pos = 0.1 * (margins.len() - 1) as f64;
        let f = pos.floor() as usize;
        let gamma = margins[f] + (pos - f as f64) * (margins[(f + 1).min(margins.len() - 1)] - margins[f]);
        let m = mean(&gaps);
        let sigma = (gaps.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (gaps.len() - 1) as f64).sqrt();
        let s = margin_summary(&logits, &labels).unwrap();
        prop_assert!((s.percentile_margin - gamma).abs() <= 1e-10);
        prop_assert!((s.gap_std - sigma).abs() <= 1e-10);
        prop_assert!((s.factor - (gamma / sigma).clamp(0.0, 1.0)).abs() <= 1e-10);
    }

    #[test]
    fn cna_matches_naive_pipeline(
        net in small_net(),
        points in prop::collection::vec(prop::collection::vec((0usize..256, 0.05f64..0.95), 75), 3..11),
    ) {
        let item: usize = net.input_shape().iter().product();
        let n = points.len();
        let mut data = Vec::with_capacity(n * item);
        let mut alpha = Vec::with_capacity(n);
        for p in &points {
            let p = &p[..item];
            data.extend(p.iter().map(|&(k, u)| (k as f64 + u) / 256.0));
            alpha.push(entropy_of_bins(&p.iter().map(|e| e.0).collect::<Vec<_>>()));
        }
        let mut shape = vec![n];
        shape.extend_from_slice(net.input_shape());
        let x = Tensor::new(shape, data).unwrap();
        let beta: Vec<f64> = (0..n)
            .map(|i| {
                let (_, pre) = naive_forward(&net, x.row(i));
                let z: Vec<f64> = net.depth_map().iter().enumerate().map(|(d, _)| mean(&pre[d])).collect();
                naive_slope(&z)
            })
            .collect();
        let spread = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        prop_assume!(spread(&alpha) > 1e-3 && spread(&beta) > 1e-6);
        let got = cna(&net, &x, &CnaConfig::default()).unwrap();
        prop_assert!((got - naive_pearson(&alpha, &beta)).abs() <= 1e-12, "{got} vs {}", naive_pearson(&alpha, &beta));
    }
}
