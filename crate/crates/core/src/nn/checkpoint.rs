//! Binary checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic          4 bytes  "CNAC"
//! version        u32      currently 1
//! epoch          u64      epochs completed
//! shuffle_seed   u64      key of the per-epoch shuffle streams
//! input_rank     u32
//! input_dims     u32 x input_rank
//! layer_count    u32
//! layer table    layer_count x 18 bytes:
//!                  kind u8 (0 dense, 1 conv2d, 2 relu, 3 flatten)
//!                  bias u8 (0/1)
//!                  a, b, c, d u32  dense: inputs, outputs, 0, 0
//!                                  conv2d: in_channels, out_channels, kernel, stride
//!                                  relu/flatten: 0, 0, 0, 0
//! depth_count    u32
//! depth_map      u32 x depth_count (layer indices)
//! parameters     per parameterized layer, in layer order:
//!                  weight_len u64, weight f64 x weight_len
//!                  [bias_len u64, bias f64 x bias_len]   when bias = 1
//! optimizer      kind u8 (0 sgd, 1 adam)
//!                lr, beta1, beta2, eps f64 (betas/eps are 0 for sgd)
//!                step u64
//!                moment_len u64
//!                first moment f64 x moment_len
//!                second moment f64 x moment_len
//! ```
//!
//! The shuffle stream of epoch `e` is a pure function of `(shuffle_seed, e)`,
//! so `(shuffle_seed, epoch)` is the complete random state of training.
//! Trailing bytes are rejected.

use std::path::Path;

use super::layer::LayerSpec;
use super::network::{Network, Params};
use super::optim::{Optimizer, OptimizerConfig};
use crate::{Error, Result, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CNAC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub optimizer: Optimizer,
    pub epoch: u64,
    pub shuffle_seed: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("extent fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn block(&mut self, values: &[f64]) {
        self.u64(values.len() as u64);
        for &v in values {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }
    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn block(&mut self, expected: usize) -> std::result::Result<Vec<f64>, String> {
        let len = self.u64()?;
        if len != expected as u64 {
            return Err(format!("block of {len} values where {expected} expected"));
        }
        (0..expected).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        w.u64(self.epoch);
        w.u64(self.shuffle_seed);
        let net = &self.network;
        w.u32(net.input_shape().len());
        for &d in net.input_shape() {
            w.u32(d);
        }
        w.u32(net.specs().len());
        for spec in net.specs() {
            let (kind, fields) = match *spec {
                LayerSpec::Dense {
                    inputs, outputs, ..
                } => (0, [inputs, outputs, 0, 0]),
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    ..
                } => (1, [in_channels, out_channels, kernel, stride]),
                LayerSpec::Relu => (2, [0; 4]),
                LayerSpec::Flatten => (3, [0; 4]),
            };
            w.u8(kind);
            w.u8(spec.has_bias() as u8);
            for f in fields {
                w.u32(f);
            }
        }
        w.u32(net.depth_map().len());
        for &d in net.depth_map() {
            w.u32(d);
        }
        for p in net.params().iter().flatten() {
            w.block(p.weight.data());
            if let Some(b) = &p.bias {
                w.block(b.data());
            }
        }
        let opt = &self.optimizer;
        let (kind, lr, b1, b2, eps) = match opt.config {
            OptimizerConfig::Sgd { lr } => (0, lr, 0.0, 0.0, 0.0),
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => (1, lr, beta1, beta2, eps),
        };
        w.u8(kind);
        for v in [lr, b1, b2, eps] {
            w.f64(v);
        }
        w.u64(opt.step);
        w.u64(opt.first_moment.len() as u64);
        for &v in opt.first_moment.iter().chain(&opt.second_moment) {
            w.f64(v);
        }
        w.0
    }

    /// Parses checkpoint bytes; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        Self::parse(bytes).map_err(|reason| Error::format(path, reason))
    }

    fn parse(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err("bad magic, not a checkpoint".into());
        }
        let version = r.u32()? as u32;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unknown checkpoint version {version}"));
        }
        let epoch = r.u64()?;
        let shuffle_seed = r.u64()?;
        let rank = r.u32()?;
        if rank == 0 || rank > 3 {
            return Err(format!("bad input rank {rank}"));
        }
        let input_shape = (0..rank).map(|_| r.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
        let layer_count = r.u32()?;
        let mut specs = Vec::new();
        for _ in 0..layer_count {
            let kind = r.u8()?;
            let bias = match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(format!("bad bias flag {other}")),
            };
            let [a, b, c, d] = [r.u32()?, r.u32()?, r.u32()?, r.u32()?];
            specs.push(match kind {
                0 => LayerSpec::Dense {
                    inputs: a,
                    outputs: b,
                    bias,
                },
                1 => LayerSpec::Conv2d {
                    in_channels: a,
                    out_channels: b,
                    kernel: c,
                    stride: d,
                    bias,
                },
                2 => LayerSpec::Relu,
                3 => LayerSpec::Flatten,
                other => return Err(format!("unknown layer kind {other}")),
            });
        }
        let depth_count = r.u32()?;
        let depth_map = (0..depth_count)
            .map(|_| r.u32())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut params = Vec::with_capacity(specs.len());
        for spec in &specs {
            let Some(ws) = spec.weight_shape() else {
                params.push(None);
                continue;
            };
            let outputs = ws[0];
            let wlen = ws.iter().product();
            let weight = Tensor::new(ws, r.block(wlen)?).map_err(|e| e.to_string())?;
            let bias = if spec.has_bias() {
                Some(Tensor::from_vec(r.block(outputs)?))
            } else {
                None
            };
            params.push(Some(Params { weight, bias }));
        }
        let network = Network::from_parts(input_shape, specs, params, depth_map)
            .map_err(|e| e.to_string())?;

        let kind = r.u8()?;
        let [lr, beta1, beta2, eps] = [r.f64()?, r.f64()?, r.f64()?, r.f64()?];
        let config = match kind {
            0 => OptimizerConfig::Sgd { lr },
            1 => OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            },
            other => return Err(format!("unknown optimizer kind {other}")),
        };
        let step = r.u64()?;
        let moments = r.u64()? as usize;
        let expected = match config {
            OptimizerConfig::Sgd { .. } => 0,
            OptimizerConfig::Adam { .. } => network.num_params(),
        };
        if moments != expected {
            return Err(format!("optimizer state has {moments} entries, expected {expected}"));
        }
        let first_moment = (0..moments).map(|_| r.f64()).collect::<std::result::Result<_, _>>()?;
        let second_moment = (0..moments).map(|_| r.f64()).collect::<std::result::Result<_, _>>()?;
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Checkpoint {
            network,
            optimizer: Optimizer {
                config,
                step,
                first_moment,
                second_moment,
            },
            epoch,
            shuffle_seed,
        })
    }
}

/// Writes via a temporary sibling and rename, so readers never see a partial file.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, checkpoint.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, path)
}
