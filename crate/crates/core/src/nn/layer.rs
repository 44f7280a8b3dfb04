use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

/// One stage of a feedforward network.
///
/// Dense layers consume any feature shape whose element count equals
/// `inputs` (row-major flattening is implicit). Conv layers take `[c, h, w]`,
/// or `[h, w]` when `in_channels == 1`, and use no padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    Relu,
    Flatten,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Dense {
            inputs,
            outputs,
            bias: true,
        }
    }

    pub fn conv2d(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            bias: true,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. })
    }

    pub fn has_bias(&self) -> bool {
        match *self {
            LayerSpec::Dense { bias, .. } | LayerSpec::Conv2d { bias, .. } => bias,
            _ => false,
        }
    }

    /// Weight shape: `[outputs, inputs]` for dense, `[out, in, k, k]` for conv.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Dense {
                inputs, outputs, ..
            } => Some(vec![outputs, inputs]),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some(vec![out_channels, in_channels, kernel, kernel]),
            _ => None,
        }
    }

    /// `(fan_in, fan_out)` of a parameterized layer.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Dense {
                inputs, outputs, ..
            } => Some((inputs, outputs)),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((in_channels * kernel * kernel, out_channels * kernel * kernel)),
            _ => None,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let elements: usize = input.iter().product();
        match *self {
            LayerSpec::Dense {
                inputs, outputs, ..
            } => {
                if inputs == 0 || outputs == 0 {
                    return Err(Error::Shape("dense extents must be > 0".into()));
                }
                if elements != inputs {
                    return Err(Error::Shape(format!(
                        "dense layer expects {inputs} inputs, previous shape {input:?} has {elements}"
                    )));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::Shape("conv2d extents must be > 0".into()));
                }
                let (c, h, w) = match *input {
                    [c, h, w] => (c, h, w),
                    [h, w] => (1, h, w),
                    _ => {
                        return Err(Error::Shape(format!(
                            "conv2d expects [c, h, w] or [h, w], got {input:?}"
                        )))
                    }
                };
                if c != in_channels {
                    return Err(Error::Shape(format!(
                        "conv2d expects {in_channels} channels, got {c}"
                    )));
                }
                if h < kernel || w < kernel {
                    return Err(Error::Shape(format!(
                        "conv2d kernel {kernel} larger than input {h}x{w}"
                    )));
                }
                Ok(vec![
                    out_channels,
                    (h - kernel) / stride + 1,
                    (w - kernel) / stride + 1,
                ])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![elements]),
        }
    }
}
