use super::layer::LayerSpec;
use super::network::{Network, Params};
use super::ops;
use crate::{Error, Result, Tensor};

/// Gradients of the mean cross-entropy, laid out like [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub params: Vec<Option<Params>>,
}

impl Gradients {
    /// Gradient buffers in the same order as [`Network::param_slices`].
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.params.iter().flatten().flat_map(|p| {
            std::iter::once(p.weight.data()).chain(p.bias.as_ref().map(Tensor::data))
        })
    }
}

/// Numerically stable `log Σ exp`.
fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

/// Per-row cross-entropy of `logits` (`n x classes`).
pub fn cross_entropy(logits: &[f64], classes: usize, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(labels, classes)?;
    Ok(logits
        .chunks_exact(classes)
        .zip(labels)
        .map(|(row, &y)| log_sum_exp(row) - row[y])
        .collect())
}

/// Mean softmax cross-entropy and its gradient with respect to every parameter.
pub fn backward(net: &Network, batch: &Tensor, labels: &[usize]) -> Result<Gradients> {
    backward_with_logits(net, batch, labels).map(|(g, _)| g)
}

pub(crate) fn backward_with_logits(
    net: &Network,
    batch: &Tensor,
    labels: &[usize],
) -> Result<(Gradients, Vec<f64>)> {
    let n = net.check_batch(batch)?;
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} datapoints", labels.len())));
    }
    let classes = net.classes();
    check_labels(labels, classes)?;

    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(net.specs().len());
    let logits = net.run_layers(batch, |_, out| outputs.push(out.to_vec()))?;

    let mut loss = 0.0;
    let mut delta = vec![0.0; logits.len()];
    for ((row, d), &y) in logits
        .chunks_exact(classes)
        .zip(delta.chunks_exact_mut(classes))
        .zip(labels)
    {
        let lse = log_sum_exp(row);
        loss += lse - row[y];
        for (dv, &v) in d.iter_mut().zip(row) {
            *dv = (v - lse).exp() / n as f64;
        }
        d[y] -= 1.0 / n as f64;
    }
    loss /= n as f64;

    let mut grads: Vec<Option<Params>> = vec![None; net.specs().len()];
    for layer in (0..net.specs().len()).rev() {
        let input: &[f64] = if layer == 0 {
            batch.data()
        } else {
            &outputs[layer - 1]
        };
        let need_dx = layer > 0;
        delta = match net.specs()[layer] {
            LayerSpec::Relu => input
                .iter()
                .zip(&delta)
                .map(|(&x, &d)| if x > 0.0 { d } else { 0.0 })
                .collect(),
            LayerSpec::Flatten => delta,
            spec @ (LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. }) => {
                let p = net.params()[layer].as_ref().expect("parameterized");
                let (dw, db, dx) = match spec {
                    LayerSpec::Dense {
                        inputs, outputs, ..
                    } => ops::dense_backward(
                        input,
                        &delta,
                        n,
                        inputs,
                        outputs,
                        p.weight.data(),
                        spec.has_bias(),
                    ),
                    _ => ops::conv_backward(
                        input,
                        &delta,
                        n,
                        &net.conv_geometry(layer),
                        p.weight.data(),
                        spec.has_bias(),
                    ),
                };
                grads[layer] = Some(Params {
                    weight: Tensor::new(p.weight.shape().to_vec(), dw)?,
                    bias: db.map(Tensor::from_vec),
                });
                if need_dx {
                    dx
                } else {
                    Vec::new()
                }
            }
        };
        if !need_dx {
            break;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((
        Gradients {
            loss,
            params: grads,
        },
        logits,
    ))
}
