#![allow(dead_code)]

use cna_core::nn::{LayerSpec, Network};

/// Direct-loop forward pass of one datapoint. Returns the logits and the
/// pre-activation block of every parameterized layer in order.
pub fn naive_forward(net: &Network, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut shape = net.input_shape().to_vec();
    let mut cur = x.to_vec();
    let mut pre = Vec::new();
    for (spec, params) in net.specs().iter().zip(net.params()) {
        match *spec {
            LayerSpec::Dense { inputs, outputs, .. } => {
                let p = params.as_ref().unwrap();
                let w = p.weight.data();
                let mut out = vec![0.0; outputs];
                for o in 0..outputs {
                    let mut acc = p.bias.as_ref().map_or(0.0, |b| b.data()[o]);
                    for i in 0..inputs {
                        acc += w[o * inputs + i] * cur[i];
                    }
                    out[o] = acc;
                }
                pre.push(out.clone());
                cur = out;
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                let p = params.as_ref().unwrap();
                let w = p.weight.data();
                let (h, wd) = (shape[shape.len() - 2], shape[shape.len() - 1]);
                let (oh, ow) = ((h - kernel) / stride + 1, (wd - kernel) / stride + 1);
                let mut out = vec![0.0; out_channels * oh * ow];
                for o in 0..out_channels {
                    for y in 0..oh {
                        for xx in 0..ow {
                            let mut acc = p.bias.as_ref().map_or(0.0, |b| b.data()[o]);
                            for i in 0..in_channels {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let wi = ((o * in_channels + i) * kernel + ky) * kernel + kx;
                                        let xi = (i * h + y * stride + ky) * wd + xx * stride + kx;
                                        acc += w[wi] * cur[xi];
                                    }
                                }
                            }
                            out[(o * oh + y) * ow + xx] = acc;
                        }
                    }
                }
                pre.push(out.clone());
                cur = out;
            }
            LayerSpec::Relu => cur.iter_mut().for_each(|v| *v = v.max(0.0)),
            LayerSpec::Flatten => {}
        }
        shape = spec.output_shape(&shape).unwrap();
    }
    (cur, pre)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation with the `1/(n-1)` sample covariance and standard deviations.
pub fn naive_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
    let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sa * sb)
}

/// Least-squares slope of `z` against abscissae `1..=L`.
pub fn naive_slope(z: &[f64]) -> f64 {
    let l = z.len();
    let xs: Vec<f64> = (1..=l).map(|i| i as f64).collect();
    let (mx, mz) = (mean(&xs), mean(z));
    let num: f64 = xs.iter().zip(z).map(|(x, v)| (x - mx) * (v - mz)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Shannon entropy in bits of the histogram with the given bin indices.
pub fn entropy_of_bins(bins: &[usize]) -> f64 {
    let mut counts = std::collections::BTreeMap::new();
    for &b in bins {
        *counts.entry(b).or_insert(0usize) += 1;
    }
    let k = bins.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / k;
            p * p.log2()
        })
        .sum::<f64>()
}
