//! Labeled datasets: IDX loading, Gaussian-noise synthesis, label corruption and splits.

mod corrupt;
mod idx;
mod synthetic;

pub use corrupt::{corrupt_labels, MAX_CORRUPTION};
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, load_idx_prefix, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synthetic::{gaussian_noise_dataset, gaussian_noise_split, NOISE_CLASSES, NOISE_SHAPE};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Purpose};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// Fraction of labels that took part in the corruption permutation.
    pub corruption: f64,
    pub corruption_seed: Option<u64>,
    /// Seed of the generator for synthetic sources.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// `N x features` or `N x c x h x w` (also `N x h x w` for single-channel images).
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize, source: &str) -> Result<Self> {
        if inputs.shape().len() < 2 {
            return Err(Error::Shape(format!(
                "dataset inputs need a leading datapoint dimension, got {:?}",
                inputs.shape()
            )));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self {
            inputs,
            labels,
            classes,
            provenance: Provenance {
                source: source.to_string(),
                ..Provenance::default()
            },
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn item_shape(&self) -> &[usize] {
        self.inputs.item_shape()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            provenance: self.provenance.clone(),
        }
    }

    /// The first `n` datapoints (all of them when `n >= len`).
    pub fn take(&self, n: usize) -> LabeledDataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }
}

/// Shuffles indices with `seed`, then cuts at `round(train_fraction * N)`.
pub fn split(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let n = ds.len();
    let cut = (train_fraction * n as f64).round() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} of {n} datapoints leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::Split));
    Ok((ds.subset(&order[..cut]), ds.subset(&order[cut..])))
}
