use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::ops::{self, ConvGeometry};
use crate::rng::{self, Purpose};
use crate::{Error, Result, Tensor};

/// How a layer's pre-activation values are reduced to one number per datapoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

impl Aggregation {
    pub fn reduce(self, values: &[f64]) -> f64 {
        let sum: f64 = values.iter().sum();
        match self {
            Aggregation::Sum => sum,
            Aggregation::Mean => sum / values.len() as f64,
        }
    }
}

/// Which parameterized layers count as depths `1..=L`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthSelection {
    /// Also count the output (logit) layer.
    #[serde(default)]
    pub include_output: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

/// Per-layer aggregated pre-activations, `N x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub z: Tensor,
    pub aggregation: Aggregation,
}

impl ActivationTrace {
    pub fn datapoints(&self) -> usize {
        self.z.shape()[0]
    }

    pub fn layers(&self) -> usize {
        self.z.shape()[1]
    }

    /// Depth profile `z_1..z_L` of datapoint `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        self.z.row(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    /// Output shape of every layer.
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<Params>>,
    depth_map: Vec<usize>,
}

/// Builds a network with fan-scaled uniform weights and zero biases.
pub fn build_network(input_shape: &[usize], specs: &[LayerSpec], seed: u64) -> Result<Network> {
    build_network_with(input_shape, specs, seed, DepthSelection::default())
}

pub fn build_network_with(
    input_shape: &[usize],
    specs: &[LayerSpec],
    seed: u64,
    depth: DepthSelection,
) -> Result<Network> {
    let mut rng = rng::stream(seed, Purpose::Init);
    let mut net = Network::zeroed(input_shape, specs, depth)?;
    for (spec, params) in net.specs.iter().zip(net.params.iter_mut()) {
        if let Some(p) = params {
            let (fan_in, fan_out) = spec.fans().expect("parameterized layer has fans");
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in p.weight.data_mut() {
                *w = rng.random_range(-limit..limit);
            }
        }
    }
    Ok(net)
}

impl Network {
    /// Network with every parameter set to zero.
    pub fn zeroed(input_shape: &[usize], specs: &[LayerSpec], depth: DepthSelection) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("empty layer list".into()));
        }
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Shape(format!("bad input shape {input_shape:?}")));
        }
        let mut shapes = Vec::with_capacity(specs.len());
        let mut current = input_shape.to_vec();
        for (i, spec) in specs.iter().enumerate() {
            current = spec
                .output_shape(&current)
                .map_err(|e| Error::Shape(format!("layer {i} ({}): {e}", spec.kind())))?;
            shapes.push(current.clone());
        }
        if current.len() != 1 {
            return Err(Error::Shape(format!(
                "network must end in a flat logit vector, got {current:?}"
            )));
        }
        let params: Vec<Option<Params>> = specs
            .iter()
            .map(|spec| {
                spec.weight_shape().map(|ws| {
                    let outputs = ws[0];
                    Params {
                        weight: Tensor::zeros(ws).expect("rank <= 4"),
                        bias: spec.has_bias().then(|| Tensor::from_vec(vec![0.0; outputs])),
                    }
                })
            })
            .collect();
        let parameterized: Vec<usize> = (0..specs.len())
            .filter(|&i| specs[i].is_parameterized())
            .collect();
        let Some((&output, hidden)) = parameterized.split_last() else {
            return Err(Error::Config("network has no parameterized layer".into()));
        };
        let mut depth_map = hidden.to_vec();
        if depth.include_output {
            depth_map.push(output);
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            specs: specs.to_vec(),
            shapes,
            params,
            depth_map,
        })
    }

    /// Reassembles a network from stored parts, validating shapes.
    pub(crate) fn from_parts(
        input_shape: Vec<usize>,
        specs: Vec<LayerSpec>,
        params: Vec<Option<Params>>,
        depth_map: Vec<usize>,
    ) -> Result<Self> {
        let mut net = Network::zeroed(&input_shape, &specs, DepthSelection::default())?;
        if params.len() != specs.len() {
            return Err(Error::Shape("parameter table length differs from layer count".into()));
        }
        for (i, (slot, given)) in net.params.iter_mut().zip(params).enumerate() {
            match (slot.as_mut(), given) {
                (None, None) => {}
                (Some(slot), Some(given)) => {
                    if slot.weight.shape() != given.weight.shape()
                        || slot.bias.as_ref().map(Tensor::len) != given.bias.as_ref().map(Tensor::len)
                    {
                        return Err(Error::Shape(format!("parameter shapes of layer {i} differ")));
                    }
                    *slot = given;
                }
                _ => return Err(Error::Shape(format!("parameter presence of layer {i} differs"))),
            }
        }
        let strictly_increasing = depth_map.windows(2).all(|w| w[0] < w[1]);
        if !strictly_increasing
            || depth_map
                .iter()
                .any(|&i| i >= specs.len() || !specs[i].is_parameterized())
        {
            return Err(Error::Shape(format!("invalid depth map {depth_map:?}")));
        }
        net.depth_map = depth_map;
        Ok(net)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Option<Params>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<Params>] {
        &mut self.params
    }

    /// Layer indices counted as depths `1..=L`.
    pub fn depth_map(&self) -> &[usize] {
        &self.depth_map
    }

    /// `L`, the number of depth-mapped layers.
    pub fn depth(&self) -> usize {
        self.depth_map.len()
    }

    pub fn classes(&self) -> usize {
        self.shapes.last().expect("non-empty")[0]
    }

    pub fn layer_output_len(&self, layer: usize) -> usize {
        self.shapes[layer].iter().product()
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().map(<[f64]>::len).sum()
    }

    /// Every parameter buffer in canonical order: per layer, weight then bias.
    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.params.iter().flatten().flat_map(|p| {
            std::iter::once(p.weight.data()).chain(p.bias.as_ref().map(Tensor::data))
        })
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.params.iter_mut().flatten().flat_map(|p| {
            std::iter::once(p.weight.data_mut()).chain(p.bias.as_mut().map(Tensor::data_mut))
        })
    }

    /// Weight matrices of parameterized layers; conv kernels viewed as `out x (in*k*k)`.
    pub fn weight_matrices(&self) -> Vec<(usize, usize, &[f64])> {
        self.params
            .iter()
            .flatten()
            .map(|p| {
                let rows = p.weight.shape()[0];
                (rows, p.weight.len() / rows, p.weight.data())
            })
            .collect()
    }

    pub(crate) fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        if batch.shape().len() < 2 || batch.rows() == 0 {
            return Err(Error::Shape(format!(
                "batch needs a non-empty leading dimension, got {:?}",
                batch.shape()
            )));
        }
        let item = batch.item_shape();
        let compatible = item == self.input_shape.as_slice()
            || (item.iter().product::<usize>() == self.input_shape.iter().product::<usize>()
                && squeeze(item) == squeeze(&self.input_shape));
        if !compatible {
            return Err(Error::Shape(format!(
                "batch items have shape {item:?}, network expects {:?}",
                self.input_shape
            )));
        }
        Ok(batch.rows())
    }

    pub(crate) fn conv_geometry(&self, layer: usize) -> ConvGeometry {
        let input = if layer == 0 {
            &self.input_shape
        } else {
            &self.shapes[layer - 1]
        };
        let (channels, height, width) = match *input.as_slice() {
            [c, h, w] => (c, h, w),
            [h, w] => (1, h, w),
            _ => unreachable!("validated at construction"),
        };
        match self.specs[layer] {
            LayerSpec::Conv2d {
                out_channels,
                kernel,
                stride,
                ..
            } => ConvGeometry {
                channels,
                height,
                width,
                out_channels,
                kernel,
                stride,
            },
            _ => unreachable!("not a conv layer"),
        }
    }

    /// Applies layer `layer` to a batch of `n` flat items.
    pub(crate) fn apply_layer(&self, layer: usize, x: &[f64], n: usize) -> Vec<f64> {
        let params = self.params[layer].as_ref();
        match self.specs[layer] {
            LayerSpec::Dense {
                inputs, outputs, ..
            } => {
                let p = params.expect("dense has params");
                ops::dense_forward(
                    x,
                    n,
                    inputs,
                    outputs,
                    p.weight.data(),
                    p.bias.as_ref().map(Tensor::data),
                )
            }
            LayerSpec::Conv2d { .. } => {
                let p = params.expect("conv has params");
                ops::conv_forward(
                    x,
                    n,
                    &self.conv_geometry(layer),
                    p.weight.data(),
                    p.bias.as_ref().map(Tensor::data),
                )
            }
            LayerSpec::Relu => x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
            LayerSpec::Flatten => x.to_vec(),
        }
    }

    /// Runs every layer, handing each output to `visit`. Returns the logits buffer.
    pub(crate) fn run_layers(
        &self,
        batch: &Tensor,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<Vec<f64>> {
        let n = self.check_batch(batch)?;
        let mut current: Option<Vec<f64>> = None;
        for layer in 0..self.specs.len() {
            let input = current.as_deref().unwrap_or(batch.data());
            let out = self.apply_layer(layer, input, n);
            if !out.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "layer {layer} ({}) output",
                    self.specs[layer].kind()
                )));
            }
            visit(layer, &out);
            current = Some(out);
        }
        Ok(current.expect("at least one layer"))
    }

    /// Forward pass. With `record`, also returns the per-layer aggregate of
    /// every depth-mapped layer's pre-activations.
    pub fn forward(
        &self,
        batch: &Tensor,
        record: Option<Aggregation>,
    ) -> Result<(Tensor, Option<ActivationTrace>)> {
        let n = batch.shape().first().copied().unwrap_or(0);
        let depth = self.depth();
        let mut z = vec![0.0; n * depth];
        let logits = self.run_layers(batch, |layer, out| {
            let Some(mode) = record else { return };
            if let Some(col) = self.depth_map.iter().position(|&d| d == layer) {
                let width = self.layer_output_len(layer);
                for (i, item) in out.chunks_exact(width).enumerate() {
                    z[i * depth + col] = mode.reduce(item);
                }
            }
        })?;
        let logits = Tensor::matrix(n, self.classes(), logits)?;
        let trace = match record {
            Some(aggregation) => Some(ActivationTrace {
                z: Tensor::matrix(n, depth, z)?,
                aggregation,
            }),
            None => None,
        };
        Ok((logits, trace))
    }

    /// Forward pass returning every depth-mapped layer's full pre-activation
    /// block, shaped `N x width` per layer.
    pub fn forward_full(&self, batch: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let n = batch.shape().first().copied().unwrap_or(0);
        let mut blocks = Vec::with_capacity(self.depth());
        let logits = self.run_layers(batch, |layer, out| {
            if self.depth_map.contains(&layer) {
                let width = self.layer_output_len(layer);
                blocks.push(Tensor::matrix(n, width, out.to_vec()).expect("sized by layer"));
            }
        })?;
        Ok((Tensor::matrix(n, self.classes(), logits)?, blocks))
    }

    /// Forward in chunks of at most `chunk` items, concatenating results.
    pub fn forward_chunked(
        &self,
        inputs: &Tensor,
        record: Option<Aggregation>,
        chunk: usize,
    ) -> Result<(Tensor, Option<ActivationTrace>)> {
        let n = self.check_batch(inputs)?;
        if n <= chunk {
            return self.forward(inputs, record);
        }
        let mut logits = Vec::with_capacity(n * self.classes());
        let mut z = Vec::with_capacity(n * self.depth());
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let (l, t) = self.forward(&inputs.select_rows(&idx), record)?;
            logits.extend_from_slice(l.data());
            if let Some(t) = t {
                z.extend_from_slice(t.z.data());
            }
            start = end;
        }
        let trace = match record {
            Some(aggregation) => Some(ActivationTrace {
                z: Tensor::matrix(n, self.depth(), z)?,
                aggregation,
            }),
            None => None,
        };
        Ok((Tensor::matrix(n, self.classes(), logits)?, trace))
    }
}

fn squeeze(shape: &[usize]) -> Vec<usize> {
    shape.iter().copied().filter(|&d| d != 1).collect()
}

/// Index of the largest logit; ties go to the lowest class index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mlp() -> Vec<LayerSpec> {
        vec![
            LayerSpec::dense(4, 3),
            LayerSpec::Relu,
            LayerSpec::dense(3, 3),
            LayerSpec::Relu,
            LayerSpec::dense(3, 2),
        ]
    }

    #[test]
    fn depth_map_excludes_output_by_default() {
        let net = build_network(&[4], &mlp(), 0).unwrap();
        assert_eq!(net.depth_map(), &[0, 2]);
        let net = build_network_with(&[4], &mlp(), 0, DepthSelection { include_output: true }).unwrap();
        assert_eq!(net.depth_map(), &[0, 2, 4]);
    }

    #[test]
    fn mnist_shaped_mlp_has_one_hidden_depth() {
        let specs = [LayerSpec::dense(784, 128), LayerSpec::Relu, LayerSpec::dense(128, 10)];
        let net = build_network(&[784], &specs, 7).unwrap();
        assert_eq!(net.depth(), 1);
        assert_eq!(net.classes(), 10);
        let net = build_network_with(&[784], &specs, 7, DepthSelection { include_output: true }).unwrap();
        assert_eq!(net.depth(), 2);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(build_network(&[4], &[], 0), Err(Error::Config(_))));
        let bad = [LayerSpec::dense(4, 3), LayerSpec::dense(4, 2)];
        assert!(matches!(build_network(&[4], &bad, 0), Err(Error::Shape(_))));
        assert!(build_network(&[5], &mlp(), 0).is_err());
        assert!(build_network(&[4], &[LayerSpec::Relu], 0).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = build_network(&[4], &mlp(), 9).unwrap();
        let b = build_network(&[4], &mlp(), 9).unwrap();
        let c = build_network(&[4], &mlp(), 10).unwrap();
        let bits = |n: &Network| n.param_slices().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn init_is_bounded_and_biases_zero() {
        let net = build_network(&[4], &mlp(), 1).unwrap();
        let p = net.params()[0].as_ref().unwrap();
        let limit = (6.0f64 / 7.0).sqrt();
        assert!(p.weight.data().iter().all(|w| w.abs() <= limit));
        assert!(p.bias.as_ref().unwrap().data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn identity_net_trace() {
        let specs = [LayerSpec::dense(3, 3), LayerSpec::dense(3, 3), LayerSpec::dense(3, 3)];
        let mut net = Network::zeroed(&[3], &specs, DepthSelection::default()).unwrap();
        for p in net.params_mut().iter_mut().flatten() {
            for i in 0..3 {
                p.weight.data_mut()[i * 3 + i] = 1.0;
            }
        }
        let batch = Tensor::new(vec![1, 3], vec![1.0; 3]).unwrap();
        let (logits, trace) = net.forward(&batch, Some(Aggregation::Mean)).unwrap();
        assert_eq!(trace.unwrap().row(0), &[1.0, 1.0]);
        assert_eq!(logits.data(), &[1.0; 3]);
    }

    #[test]
    fn zero_net_trace_is_zero() {
        let net = Network::zeroed(&[4], &mlp(), DepthSelection::default()).unwrap();
        let batch = Tensor::new(vec![2, 4], vec![0.3, -1.0, 2.0, 5.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let (_, trace) = net.forward(&batch, Some(Aggregation::Sum)).unwrap();
        assert!(trace.unwrap().z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recording_does_not_change_logits() {
        let net = build_network(&[4], &mlp(), 3).unwrap();
        let batch = Tensor::new(vec![2, 4], vec![0.3, -1.0, 2.0, 5.0, 1.0, 0.5, 1.0, -1.0]).unwrap();
        let (a, none) = net.forward(&batch, None).unwrap();
        let (b, some) = net.forward(&batch, Some(Aggregation::Mean)).unwrap();
        assert!(none.is_none() && some.is_some());
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn shape_mismatch_and_non_finite() {
        let net = build_network(&[4], &mlp(), 3).unwrap();
        let wrong = Tensor::new(vec![1, 5], vec![0.0; 5]).unwrap();
        assert!(matches!(net.forward(&wrong, None), Err(Error::Shape(_))));
        let nan = Tensor::new(vec![1, 4], vec![f64::NAN, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(net.forward(&nan, None), Err(Error::NonFinite(_))));
    }

    #[test]
    fn chunked_forward_matches_single_pass() {
        let net = build_network(&[4], &mlp(), 5).unwrap();
        let data: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin()).collect();
        let batch = Tensor::new(vec![10, 4], data).unwrap();
        let (a, ta) = net.forward(&batch, Some(Aggregation::Mean)).unwrap();
        let (b, tb) = net.forward_chunked(&batch, Some(Aggregation::Mean), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 1.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }
}
