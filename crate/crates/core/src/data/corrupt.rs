use rand::seq::index;

use super::LabeledDataset;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

pub const MAX_CORRUPTION: f64 = 0.5;

/// Selects `floor(fraction * N)` datapoints uniformly and rotates their labels
/// one position along the selection order. The label multiset is preserved.
pub fn corrupt_labels(ds: &LabeledDataset, fraction: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.0..=MAX_CORRUPTION).contains(&fraction) {
        return Err(Error::Config(format!(
            "corruption fraction {fraction} outside [0, {MAX_CORRUPTION}]"
        )));
    }
    let n = ds.len();
    let count = (fraction * n as f64).floor() as usize;
    let chosen = index::sample(&mut rng::stream(seed, Purpose::Corruption), n, count).into_vec();
    let mut out = ds.clone();
    for (j, &i) in chosen.iter().enumerate() {
        out.labels[i] = ds.labels[chosen[(j + 1) % count]];
    }
    out.provenance.corruption = fraction;
    out.provenance.corruption_seed = Some(seed);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn distinct(n: usize) -> LabeledDataset {
        let inputs = Tensor::zeros(vec![n, 1]).unwrap();
        LabeledDataset::new(inputs, (0..n).collect(), n, "distinct").unwrap()
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn zero_fraction_is_identity() {
        let ds = distinct(10);
        let out = corrupt_labels(&ds, 0.0, 1).unwrap();
        assert_eq!(out.labels, ds.labels);
        assert_eq!(out.provenance.corruption, 0.0);
    }

    #[test]
    fn half_of_ten_moves_five() {
        let ds = distinct(10);
        let out = corrupt_labels(&ds, 0.5, 3).unwrap();
        let moved = out.labels.iter().zip(&ds.labels).filter(|(a, b)| a != b).count();
        assert_eq!(moved, 5);
        assert_eq!(sorted(out.labels), ds.labels);
    }

    #[test]
    fn distinct_labels_change_exactly_floor_fraction() {
        let ds = distinct(1000);
        let out = corrupt_labels(&ds, 0.3, 11).unwrap();
        let moved = out.labels.iter().zip(&ds.labels).filter(|(a, b)| a != b).count();
        assert_eq!(moved, 300);
        assert_eq!(out.provenance.corruption_seed, Some(11));
    }

    #[test]
    fn out_of_range_fraction() {
        let ds = distinct(4);
        assert!(corrupt_labels(&ds, 0.6, 0).is_err());
        assert!(corrupt_labels(&ds, -0.1, 0).is_err());
    }
}
