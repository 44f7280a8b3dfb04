use serde::{Deserialize, Serialize};

use crate::metrics::{entropies, slope, EntropyConfig};
use crate::nn::{Aggregation, Network};
use crate::{Error, Result, Tensor};

/// How a state vector is laid out.
///
/// Aggregated states hold `probe x L` per-layer aggregates. Full states hold
/// every neuron of every depth-mapped layer, probe-major, and are reduced to
/// aggregates only when slopes are needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StateLayout {
    Aggregated {
        probe: usize,
        layers: usize,
        aggregation: Aggregation,
    },
    Full {
        probe: usize,
        widths: Vec<usize>,
        aggregation: Aggregation,
    },
}

impl StateLayout {
    pub fn probe(&self) -> usize {
        match self {
            StateLayout::Aggregated { probe, .. } | StateLayout::Full { probe, .. } => *probe,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StateLayout::Aggregated { probe, layers, .. } => probe * layers,
            StateLayout::Full { probe, widths, .. } => probe * widths.iter().sum::<usize>(),
        }
    }

    /// Per-layer aggregates (`probe x L`, row-major) of a state.
    pub fn aggregates(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.dim() {
            return Err(Error::Shape(format!(
                "state has {} entries, layout expects {}",
                state.len(),
                self.dim()
            )));
        }
        match self {
            StateLayout::Aggregated { .. } => Ok(state.to_vec()),
            StateLayout::Full {
                probe,
                widths,
                aggregation,
            } => {
                let per_point: usize = widths.iter().sum();
                let mut out = Vec::with_capacity(probe * widths.len());
                for point in state.chunks_exact(per_point) {
                    let mut offset = 0;
                    for &w in widths {
                        out.push(aggregation.reduce(&point[offset..offset + w]));
                        offset += w;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Activation slope `β` of every probe point encoded in `state`.
    pub fn betas(&self, state: &[f64]) -> Result<Vec<f64>> {
        let z = self.aggregates(state)?;
        let layers = z.len() / self.probe();
        z.chunks_exact(layers).map(slope).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub step: u64,
    pub loss: f64,
    pub state: Vec<f64>,
}

/// Aggregated state of `net` on `probe`.
pub fn record_state(
    net: &Network,
    probe: &Tensor,
    step: u64,
    loss: f64,
    aggregation: Aggregation,
) -> Result<TrajectorySample> {
    let (_, trace) = net.forward(probe, Some(aggregation))?;
    Ok(TrajectorySample {
        step,
        loss,
        state: trace.expect("recorded").z.into_data(),
    })
}

/// Full-neuron state of `net` on `probe`.
pub fn record_state_full(net: &Network, probe: &Tensor, step: u64, loss: f64) -> Result<TrajectorySample> {
    let (_, blocks) = net.forward_full(probe)?;
    let n = probe.rows();
    let mut state = Vec::with_capacity(n * blocks.iter().map(Tensor::item_len).sum::<usize>());
    for i in 0..n {
        for b in &blocks {
            state.extend_from_slice(b.row(i));
        }
    }
    Ok(TrajectorySample { step, loss, state })
}

/// A sequence of states of one fixed probe batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub layout: StateLayout,
    /// Entropy `α` of every probe point.
    pub probe_alphas: Vec<f64>,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(layout: StateLayout, probe_alphas: Vec<f64>) -> Result<Self> {
        if probe_alphas.len() != layout.probe() {
            return Err(Error::Shape(format!(
                "{} probe entropies for a probe of {}",
                probe_alphas.len(),
                layout.probe()
            )));
        }
        Ok(Self {
            layout,
            probe_alphas,
            samples: Vec::new(),
        })
    }

    /// Trajectory for `net` on `probe`, aggregated or full-neuron.
    pub fn for_network(
        net: &Network,
        probe: &Tensor,
        entropy: &EntropyConfig,
        aggregation: Aggregation,
        full: bool,
    ) -> Result<Self> {
        let layout = if full {
            StateLayout::Full {
                probe: probe.rows(),
                widths: net.depth_map().iter().map(|&l| net.layer_output_len(l)).collect(),
                aggregation,
            }
        } else {
            StateLayout::Aggregated {
                probe: probe.rows(),
                layers: net.depth(),
                aggregation,
            }
        };
        Self::new(layout, entropies(probe, entropy)?)
    }

    /// Records and appends the state of `net` on `probe`.
    pub fn record(&mut self, net: &Network, probe: &Tensor, step: u64, loss: f64) -> Result<()> {
        if probe.rows() != self.layout.probe() {
            return Err(Error::Shape(format!(
                "probe of {} points, trajectory was started with {}",
                probe.rows(),
                self.layout.probe()
            )));
        }
        let sample = match &self.layout {
            StateLayout::Aggregated { aggregation, .. } => record_state(net, probe, step, loss, *aggregation)?,
            StateLayout::Full { .. } => record_state_full(net, probe, step, loss)?,
        };
        self.push(sample)
    }

    pub fn push(&mut self, sample: TrajectorySample) -> Result<()> {
        if sample.state.len() != self.layout.dim() {
            return Err(Error::Shape(format!(
                "state of {} entries, trajectory holds {}",
                sample.state.len(),
                self.layout.dim()
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn states(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.state.as_slice()).collect()
    }
}
