use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{split, LabeledDataset};
use crate::rng::{self, Purpose};
use crate::{Result, Tensor};

/// Per-datapoint shape of the noise dataset (`c x h x w`).
pub const NOISE_SHAPE: [usize; 3] = [3, 32, 32];
pub const NOISE_CLASSES: usize = 10;

/// `n` i.i.d. standard-normal images with uniformly random labels.
pub fn gaussian_noise_dataset(n: usize, seed: u64) -> Result<LabeledDataset> {
    let mut rng = rng::stream(seed, Purpose::Synthetic);
    let per_item: usize = NOISE_SHAPE.iter().product();
    let mut data = Vec::with_capacity(n * per_item);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        data.extend((0..per_item).map(|_| rng.sample::<f64, _>(StandardNormal)));
        labels.push(rng.random_range(0..NOISE_CLASSES));
    }
    let mut shape = vec![n];
    shape.extend_from_slice(&NOISE_SHAPE);
    let mut ds = LabeledDataset::new(Tensor::new(shape, data)?, labels, NOISE_CLASSES, "gaussian-noise")?;
    ds.provenance.seed = Some(seed);
    Ok(ds)
}

/// Draws `n_train + n_test` noise points and splits them, giving a held-out noise set.
pub fn gaussian_noise_split(
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let total = n_train + n_test;
    let all = gaussian_noise_dataset(total, seed)?;
    split(&all, n_train as f64 / total as f64, seed)
}
