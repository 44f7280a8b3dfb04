//! Structural properties of traces and metrics.

mod common;

use common::naive_forward;
use cna_core::metrics::{
    cna, cna_from_vectors, entropies, entropy, frobenius_squared, pearson, slope, slopes, spectral_norm,
    CnaConfig, EntropyConfig, RangeMode, SPECTRAL_MAX_ITER, SPECTRAL_TOL,
};
use cna_core::nn::{build_network, build_network_with, Aggregation, DepthSelection, LayerSpec};
use cna_core::rng::{stream, Purpose};
use cna_core::Tensor;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn uniform_batch(shape: &[usize], n: usize, seed: u64) -> Tensor {
    let mut r = stream(seed, Purpose::Synthetic);
    let mut full = vec![n];
    full.extend_from_slice(shape);
    let len = full.iter().product();
    Tensor::new(full, (0..len).map(|_| r.random::<f64>()).collect()).unwrap()
}

#[test]
fn scaling_a_layer_scales_its_trace_column() {
    let specs = [LayerSpec::dense(5, 4), LayerSpec::dense(4, 4), LayerSpec::dense(4, 3), LayerSpec::dense(3, 2)];
    let base = build_network(&[5], &specs, 9).unwrap();
    let x = uniform_batch(&[5], 6, 1);
    let (_, t0) = base.forward(&x, Some(Aggregation::Mean)).unwrap();
    let t0 = t0.unwrap();
    assert_eq!(t0.layers(), 3);
    for (column, layer) in base.depth_map().iter().copied().enumerate() {
        let s = -2.5;
        let mut net = base.clone();
        let p = net.params_mut()[layer].as_mut().unwrap();
        p.weight.data_mut().iter_mut().for_each(|w| *w *= s);
        p.bias.as_mut().unwrap().data_mut().iter_mut().for_each(|b| *b = 0.1 * s);
        let mut unscaled = base.clone();
        let q = unscaled.params_mut()[layer].as_mut().unwrap();
        q.bias.as_mut().unwrap().data_mut().iter_mut().for_each(|b| *b = 0.1);
        let (_, ts) = net.forward(&x, Some(Aggregation::Mean)).unwrap();
        let (_, tu) = unscaled.forward(&x, Some(Aggregation::Mean)).unwrap();
        let (ts, tu) = (ts.unwrap(), tu.unwrap());
        for i in 0..x.rows() {
            for c in 0..column {
                assert_eq!(ts.row(i)[c], tu.row(i)[c]);
            }
            let (a, b) = (ts.row(i)[column], s * tu.row(i)[column]);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn conv_aggregate_equals_flattened_block_aggregate() {
    let specs = [
        LayerSpec::conv2d(2, 3, 3, 1),
        LayerSpec::Relu,
        LayerSpec::conv2d(3, 4, 2, 2),
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::dense(4 * 2 * 2, 5),
    ];
    let net = build_network(&[2, 6, 6], &specs, 4).unwrap();
    let x = uniform_batch(&[2, 6, 6], 5, 2);
    for aggregation in [Aggregation::Mean, Aggregation::Sum] {
        let (_, trace) = net.forward(&x, Some(aggregation)).unwrap();
        let trace = trace.unwrap();
        for i in 0..x.rows() {
            let (_, pre) = naive_forward(&net, x.row(i));
            for (col, block) in pre.iter().take(2).enumerate() {
                // The naive pass indexes the block as c x h x w; its flat
                // buffer is the flattened representation.
                let sum: f64 = block.iter().sum();
                let expected = match aggregation {
                    Aggregation::Sum => sum,
                    Aggregation::Mean => sum / block.len() as f64,
                };
                let got = trace.row(i)[col];
                assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
            }
        }
    }
}

#[test]
fn mean_and_sum_aggregation_agree_on_constant_width() {
    let specs = [
        LayerSpec::dense(16, 8),
        LayerSpec::Relu,
        LayerSpec::dense(8, 8),
        LayerSpec::Relu,
        LayerSpec::dense(8, 8),
        LayerSpec::Relu,
        LayerSpec::dense(8, 3),
    ];
    let net = build_network(&[16], &specs, 3).unwrap();
    let x = uniform_batch(&[16], 40, 3);
    let mean_cfg = CnaConfig { entropy: EntropyConfig { bins: 8, ..Default::default() }, aggregation: Aggregation::Mean };
    let sum_cfg = CnaConfig { aggregation: Aggregation::Sum, ..mean_cfg };
    let a = cna(&net, &x, &mean_cfg).unwrap();
    let b = cna(&net, &x, &sum_cfg).unwrap();
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn shuffled_pairing_has_no_correlation() {
    let specs = [LayerSpec::dense(32, 16), LayerSpec::Relu, LayerSpec::dense(16, 16), LayerSpec::Relu, LayerSpec::dense(16, 4)];
    let net = build_network(&[32], &specs, 5).unwrap();
    let n = 300;
    let x = uniform_batch(&[32], n, 5).map(|v| v * v);
    let cfg = EntropyConfig { bins: 16, ..Default::default() };
    let mut alpha = entropies(&x, &cfg).unwrap();
    let (_, trace) = net.forward(&x, Some(Aggregation::Mean)).unwrap();
    let beta = slopes(&trace.unwrap()).unwrap();
    let mut r = stream(77, Purpose::Shuffle);
    let mut total = 0.0;
    for _ in 0..100 {
        alpha.shuffle(&mut r);
        total += cna_from_vectors(&alpha, &beta).unwrap().abs();
    }
    let bound = 3.0 / (n as f64).sqrt();
    assert!(total / 100.0 < bound, "mean |rho| {} >= {bound}", total / 100.0);
}

fn matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(-2.0f64..2.0, r * c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn entropy_permutation_invariant(xs in prop::collection::vec(-1.0f64..2.0, 1..80), seed in any::<u64>()) {
        let cfg = EntropyConfig { bins: 32, ..Default::default() };
        let mut ys = xs.clone();
        ys.shuffle(&mut stream(seed, Purpose::Shuffle));
        prop_assert_eq!(entropy(&xs, &cfg).unwrap(), entropy(&ys, &cfg).unwrap());
    }

    #[test]
    fn per_datapoint_entropy_shift_invariant(ks in prop::collection::vec(0i32..64, 1..80), shift in -8i32..8) {
        // Sixteenths and integer shifts are exact in binary floating point.
        let xs: Vec<f64> = ks.iter().map(|&k| k as f64 / 16.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + shift as f64).collect();
        let cfg = EntropyConfig { bins: 20, range: RangeMode::PerDatapoint };
        prop_assert_eq!(entropy(&xs, &cfg).unwrap(), entropy(&ys, &cfg).unwrap());
    }

    #[test]
    fn slope_is_linear(z in prop::collection::vec(-10.0f64..10.0, 2..20), a in -5.0f64..5.0, c in -5.0f64..5.0) {
        let moved: Vec<f64> = z.iter().map(|v| a * v + c).collect();
        let expected = a * slope(&z).unwrap();
        prop_assert!((slope(&moved).unwrap() - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn pearson_affine_symmetry(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
        p in 0.1f64..10.0,
        q in -10.0f64..10.0,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let rho = match pearson(&a, &b) { Ok(r) => r, Err(_) => return Ok(()) };
        let moved: Vec<f64> = a.iter().map(|x| p * x + q).collect();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        prop_assert!((pearson(&moved, &b).unwrap() - rho).abs() <= 1e-10);
        prop_assert!((pearson(&neg, &b).unwrap() + rho).abs() <= 1e-12);
        prop_assert!((pearson(&b, &a).unwrap() - rho).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&rho));
    }

    #[test]
    fn spectral_bounded_by_frobenius((rows, cols, w) in matrix()) {
        let s = spectral_norm(&w, rows, cols, SPECTRAL_TOL, SPECTRAL_MAX_ITER).unwrap();
        prop_assert!(s * s <= frobenius_squared(&w) * (1.0 + 1e-12));
    }

    #[test]
    fn rank_one_spectral_equals_frobenius(
        u in prop::collection::vec(-2.0f64..2.0, 1..6),
        v in prop::collection::vec(-2.0f64..2.0, 1..6),
    ) {
        let w: Vec<f64> = u.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        let f = frobenius_squared(&w).sqrt();
        prop_assume!(f > 1e-6);
        let s = spectral_norm(&w, u.len(), v.len(), SPECTRAL_TOL, SPECTRAL_MAX_ITER).unwrap();
        prop_assert!((s - f).abs() <= 1e-8 * f);
    }
}

#[test]
fn include_output_extends_depth_by_one() {
    let specs = [LayerSpec::dense(4, 3), LayerSpec::Relu, LayerSpec::dense(3, 3), LayerSpec::Relu, LayerSpec::dense(3, 2)];
    let hidden = build_network(&[4], &specs, 1).unwrap();
    let with_out = build_network_with(&[4], &specs, 1, DepthSelection { include_output: true }).unwrap();
    assert_eq!(hidden.depth() + 1, with_out.depth());
    let x = uniform_batch(&[4], 3, 8);
    let (la, ta) = hidden.forward(&x, Some(Aggregation::Mean)).unwrap();
    let (lb, tb) = with_out.forward(&x, Some(Aggregation::Mean)).unwrap();
    assert_eq!(la, lb);
    let (ta, tb) = (ta.unwrap(), tb.unwrap());
    for i in 0..3 {
        assert_eq!(ta.row(i), &tb.row(i)[..2]);
        assert_eq!(tb.row(i)[2], la.row(i).iter().sum::<f64>() / 2.0);
    }
}
