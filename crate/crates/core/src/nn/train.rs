use rand::seq::SliceRandom;

use super::backprop::{backward_with_logits, check_labels, cross_entropy};
use super::network::{argmax, Network};
use super::optim::Optimizer;
use crate::data::LabeledDataset;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

/// Items per forward pass when evaluating whole datasets.
pub const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Mean minibatch cross-entropy, measured before each update.
    pub mean_loss: f64,
    /// Fraction of datapoints classified correctly before their update.
    pub accuracy: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub epoch: u64,
    /// Optimizer step count after this update.
    pub step: u64,
    /// Loss of the minibatch, before the update.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `true` where the prediction is wrong.
    pub errors: Vec<bool>,
}

/// Order in which epoch `epoch` visits the training set.
pub fn epoch_order(n: usize, shuffle_seed: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(shuffle_seed, Purpose::Shuffle, epoch));
    order
}

/// One pass over `data` in shuffled minibatches.
pub fn train_epoch(
    net: &mut Network,
    opt: &mut Optimizer,
    data: &LabeledDataset,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: u64,
) -> Result<EpochStats> {
    train_epoch_observed(net, opt, data, batch_size, shuffle_seed, epoch, &mut |_, _| Ok(()))
}

/// As [`train_epoch`], calling `observer` after every update.
pub fn train_epoch_observed(
    net: &mut Network,
    opt: &mut Optimizer,
    data: &LabeledDataset,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: u64,
    observer: &mut dyn FnMut(&StepInfo, &Network) -> Result<()>,
) -> Result<EpochStats> {
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 || batch_size > n {
        return Err(Error::Config(format!(
            "batch size {batch_size} must be in 1..={n}"
        )));
    }
    opt.config.validate()?;
    let classes = net.classes();
    check_labels(&data.labels, classes)?;

    let order = epoch_order(n, shuffle_seed, epoch);
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut steps = 0;
    for idx in order.chunks(batch_size) {
        let batch = data.inputs.select_rows(idx);
        let labels: Vec<usize> = idx.iter().map(|&i| data.labels[i]).collect();
        let (grads, logits) = backward_with_logits(net, &batch, &labels)?;
        loss_sum += grads.loss * idx.len() as f64;
        correct += logits
            .chunks_exact(classes)
            .zip(&labels)
            .filter(|(row, &y)| argmax(row) == y)
            .count();
        opt.apply(net, &grads);
        if net.param_slices().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("parameters after step {}", opt.step)));
        }
        steps += 1;
        observer(
            &StepInfo {
                epoch,
                step: opt.step,
                loss: grads.loss,
            },
            net,
        )?;
    }
    Ok(EpochStats {
        mean_loss: loss_sum / n as f64,
        accuracy: correct as f64 / n as f64,
        steps,
    })
}

/// Accuracy, mean loss and per-datapoint error flags over `data`.
pub fn evaluate(net: &Network, data: &LabeledDataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (logits, _) = net.forward_chunked(&data.inputs, None, EVAL_CHUNK)?;
    let classes = net.classes();
    let losses = cross_entropy(logits.data(), classes, &data.labels)?;
    let errors: Vec<bool> = logits
        .data()
        .chunks_exact(classes)
        .zip(&data.labels)
        .map(|(row, &y)| argmax(row) != y)
        .collect();
    let n = data.len() as f64;
    let wrong = errors.iter().filter(|&&e| e).count();
    Ok(Evaluation {
        accuracy: (data.len() - wrong) as f64 / n,
        mean_loss: losses.iter().sum::<f64>() / n,
        errors,
    })
}
