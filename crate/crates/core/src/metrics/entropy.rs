use serde::{Deserialize, Serialize};

use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    /// Shared `[lo, hi]`; values outside are clamped into the edge bins.
    Fixed { lo: f64, hi: f64 },
    /// Each datapoint's own `[min, max]`.
    PerDatapoint,
}

/// Histogram settings for the per-datapoint entropy `α`. Entropy is in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub bins: usize,
    pub range: RangeMode,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            bins: 256,
            range: RangeMode::Fixed { lo: 0.0, hi: 1.0 },
        }
    }
}

impl EntropyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("entropy needs >= 2 bins, got {}", self.bins)));
        }
        if let RangeMode::Fixed { lo, hi } = self.range {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::Config(format!("degenerate entropy range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Bin of `v` among `bins` equal-width bins over `[lo, hi]`; `hi` lands in the last bin.
fn bin_index(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = ((v - lo) / (hi - lo) * bins as f64).floor();
    if t <= 0.0 {
        0
    } else {
        (t as usize).min(bins - 1)
    }
}

/// Histogram-binned Shannon entropy of one datapoint's feature values.
pub fn entropy(x: &[f64], cfg: &EntropyConfig) -> Result<f64> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::Shape("entropy of an empty vector".into()));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("entropy input ({v})")));
    }
    let (lo, hi) = match cfg.range {
        RangeMode::Fixed { lo, hi } => (lo, hi),
        RangeMode::PerDatapoint => {
            let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                return Ok(0.0);
            }
            (lo, hi)
        }
    };
    let mut counts = vec![0usize; cfg.bins];
    for &v in x {
        counts[bin_index(v, lo, hi, cfg.bins)] += 1;
    }
    let k = x.len() as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / k;
            -p * p.log2()
        })
        .sum::<f64>();
    // a single occupied bin gives -1·log2(1) = -0.0
    Ok(h.max(0.0))
}

/// `α` for every leading-dimension item of `inputs`.
pub fn entropies(inputs: &Tensor, cfg: &EntropyConfig) -> Result<Vec<f64>> {
    (0..inputs.rows()).map(|i| entropy(inputs.row(i), cfg)).collect()
}
