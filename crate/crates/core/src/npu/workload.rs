// SPDX-License-Identifier: Apache-2.0

//! Quantized workloads and their TOML description.
//!
//! A workload file looks like
//!
//! ```toml
//! seed = 42            # generates any weights, biases or inputs not given inline
//! num_inputs = 16
//! input_shape = [1, 4, 4]   # [channels, height, width]
//!
//! [[layers]]
//! kind = "conv3x3"     # same padding, stride 1
//! out_channels = 2
//! shift = 7            # optional requantization shift
//!
//! [[layers]]
//! kind = "relu"
//!
//! [[layers]]
//! kind = "dense"
//! out_features = 4
//! weights = [ ... ]    # optional, row-major [out][in]
//! bias = [ ... ]       # optional
//!
//! [[layers]]
//! kind = "argmax"
//! ```
//!
//! Tensors are stored channel-major (`[c][y][x]`); a dense layer consumes the
//! flattened input. Conv weights are `[out][in][ky][kx]`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NpuError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
}

impl Shape {
    pub fn new(channels: u32, height: u32, width: u32) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels as usize * self.height as usize * self.width as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense { out_features: u32 },
    Conv3x3 { out_channels: u32 },
    Relu,
    ArgmaxHead,
}

impl LayerKind {
    pub fn is_compute(&self) -> bool {
        matches!(self, LayerKind::Dense { .. } | LayerKind::Conv3x3 { .. })
    }
}

/// One layer. Activation layers carry empty weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub kind: LayerKind,
    pub weights: Vec<i8>,
    pub bias: Vec<i32>,
    /// Arithmetic right shift applied to the int32 accumulator before clamping to int8.
    pub shift: u8,
}

impl Layer {
    pub fn dense(out_features: u32, weights: Vec<i8>, bias: Vec<i32>, shift: u8) -> Self {
        Layer {
            kind: LayerKind::Dense { out_features },
            weights,
            bias,
            shift,
        }
    }

    pub fn conv3x3(out_channels: u32, weights: Vec<i8>, bias: Vec<i32>, shift: u8) -> Self {
        Layer {
            kind: LayerKind::Conv3x3 { out_channels },
            weights,
            bias,
            shift,
        }
    }

    pub fn relu() -> Self {
        Layer {
            kind: LayerKind::Relu,
            weights: Vec::new(),
            bias: Vec::new(),
            shift: 0,
        }
    }

    pub fn argmax() -> Self {
        Layer {
            kind: LayerKind::ArgmaxHead,
            weights: Vec::new(),
            bias: Vec::new(),
            shift: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub input_shape: Shape,
    pub layers: Vec<Layer>,
    pub inputs: Vec<Vec<i8>>,
    pub seed: u64,
}

/// Reduction length of a compute layer over an input of `shape`.
pub(crate) fn reduction_len(kind: &LayerKind, input: Shape) -> usize {
    match kind {
        LayerKind::Dense { .. } => input.len(),
        LayerKind::Conv3x3 { .. } => input.channels as usize * 9,
        _ => 0,
    }
}

/// Default requantization shift for a reduction of length `k`.
pub fn default_shift(k: usize) -> u8 {
    let ceil_log2 = usize::BITS - k.max(1).saturating_sub(1).leading_zeros();
    6 + ceil_log2.div_ceil(2) as u8
}

impl Workload {
    /// Output shape after every layer, validating the chain.
    pub fn shapes(&self) -> Result<Vec<Shape>, NpuError> {
        let bad = |msg: String| Err(NpuError::Shape(msg));
        let s = self.input_shape;
        if s.is_empty() {
            return bad("input shape has a zero dimension".into());
        }
        if self.inputs.is_empty() {
            return bad("workload has no inputs".into());
        }
        if self.inputs.len() > u16::MAX as usize {
            return bad("too many inputs".into());
        }
        for (i, x) in self.inputs.iter().enumerate() {
            if x.len() != s.len() {
                return bad(format!("input {i} has {} values, expected {}", x.len(), s.len()));
            }
        }

        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = s;
        let mut last_compute = false;
        for (i, layer) in self.layers.iter().enumerate() {
            let next = match layer.kind {
                LayerKind::Dense { out_features: o } | LayerKind::Conv3x3 { out_channels: o } => {
                    if o == 0 {
                        return bad(format!("layer {i}: zero outputs"));
                    }
                    let k = reduction_len(&layer.kind, cur);
                    if layer.weights.len() != o as usize * k {
                        return bad(format!(
                            "layer {i}: {} weights, expected {}",
                            layer.weights.len(),
                            o as usize * k
                        ));
                    }
                    if layer.bias.len() != o as usize {
                        return bad(format!(
                            "layer {i}: {} biases, expected {o}",
                            layer.bias.len()
                        ));
                    }
                    if layer.shift > 31 {
                        return bad(format!("layer {i}: shift {} above 31", layer.shift));
                    }
                    last_compute = true;
                    match layer.kind {
                        LayerKind::Dense { .. } => Shape::new(o, 1, 1),
                        _ => Shape::new(o, cur.height, cur.width),
                    }
                }
                LayerKind::Relu => {
                    if !last_compute {
                        return bad(format!("layer {i}: relu must follow a dense or conv3x3 layer"));
                    }
                    cur
                }
                LayerKind::ArgmaxHead => {
                    if i + 1 != self.layers.len() {
                        return bad(format!("layer {i}: argmax head must be the last layer"));
                    }
                    if !self.layers.iter().any(|l| l.kind.is_compute()) {
                        return bad("argmax head without any compute layer".into());
                    }
                    cur
                }
            };
            for v in [next.channels, next.height, next.width] {
                if v > u16::MAX as u32 {
                    return bad(format!("layer {i}: dimension {v} exceeds 16 bits"));
                }
            }
            shapes.push(next);
            cur = next;
        }
        if !matches!(self.layers.last().map(|l| l.kind), Some(LayerKind::ArgmaxHead)) {
            return bad("workload must end with an argmax head".into());
        }
        Ok(shapes)
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// Built-in workloads by name: `tiny-cnn`, `toy-dense`, `zero-weight`.
    pub fn preset(name: &str, seed: u64, num_inputs: usize) -> Result<Workload, NpuError> {
        let file = match name {
            "tiny-cnn" => WorkloadFile::tiny_cnn(seed, num_inputs),
            "toy-dense" => WorkloadFile {
                seed,
                num_inputs,
                input_shape: [4, 1, 1],
                inputs: None,
                layers: vec![
                    LayerSpec::compute("dense", 3),
                    LayerSpec::simple("argmax"),
                ],
            },
            "zero-weight" => {
                let mut f = WorkloadFile::tiny_cnn(seed, num_inputs);
                for l in &mut f.layers {
                    l.zero = l.kind == "conv3x3" || l.kind == "dense";
                }
                f
            }
            other => {
                return Err(NpuError::WorkloadFile(format!("unknown workload preset `{other}`")))
            }
        };
        file.build()
    }

    pub fn from_toml_str(text: &str) -> Result<Workload, NpuError> {
        let file: WorkloadFile =
            toml::from_str(text).map_err(|e| NpuError::WorkloadFile(e.to_string()))?;
        file.build()
    }

    pub fn load(path: &Path) -> Result<Workload, NpuError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NpuError::WorkloadFile(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// On-disk workload description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_inputs")]
    pub num_inputs: usize,
    pub input_shape: [u32; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<Vec<i8>>>,
    pub layers: Vec<LayerSpec>,
}

fn default_inputs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_features: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<i8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<i32>>,
    /// Fill weights and biases with zeros instead of generating them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero: bool,
}

impl LayerSpec {
    fn simple(kind: &str) -> Self {
        LayerSpec {
            kind: kind.into(),
            out_features: None,
            out_channels: None,
            shift: None,
            weights: None,
            bias: None,
            zero: false,
        }
    }

    fn compute(kind: &str, out: u32) -> Self {
        let mut l = Self::simple(kind);
        if kind == "dense" {
            l.out_features = Some(out);
        } else {
            l.out_channels = Some(out);
        }
        l
    }
}

impl WorkloadFile {
    pub fn tiny_cnn(seed: u64, num_inputs: usize) -> Self {
        WorkloadFile {
            seed,
            num_inputs,
            input_shape: [1, 4, 4],
            inputs: None,
            layers: vec![
                LayerSpec::compute("conv3x3", 2),
                LayerSpec::simple("relu"),
                LayerSpec::compute("dense", 4),
                LayerSpec::simple("argmax"),
            ],
        }
    }

    /// Resolves generated values and validates the result.
    pub fn build(&self) -> Result<Workload, NpuError> {
        let err = |m: String| NpuError::WorkloadFile(m);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let [c, h, w] = self.input_shape;
        let input_shape = Shape::new(c, h, w);
        let mut cur = input_shape;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let kind = match spec.kind.as_str() {
                "dense" => LayerKind::Dense {
                    out_features: spec
                        .out_features
                        .ok_or_else(|| err(format!("layers[{i}]: dense needs out_features")))?,
                },
                "conv3x3" => LayerKind::Conv3x3 {
                    out_channels: spec
                        .out_channels
                        .ok_or_else(|| err(format!("layers[{i}]: conv3x3 needs out_channels")))?,
                },
                "relu" => LayerKind::Relu,
                "argmax" | "argmax-head" => LayerKind::ArgmaxHead,
                other => return Err(err(format!("layers[{i}]: unknown kind `{other}`"))),
            };
            if !kind.is_compute() {
                layers.push(Layer {
                    kind,
                    weights: Vec::new(),
                    bias: Vec::new(),
                    shift: 0,
                });
                continue;
            }
            let out = match kind {
                LayerKind::Dense { out_features } => out_features,
                LayerKind::Conv3x3 { out_channels } => out_channels,
                _ => unreachable!(),
            } as usize;
            let k = reduction_len(&kind, cur);
            let weights = match (&spec.weights, spec.zero) {
                (_, true) => vec![0; out * k],
                (Some(w), false) => w.clone(),
                (None, false) => (0..out * k).map(|_| rng.gen_range(-32i8..=32)).collect(),
            };
            let bias = match (&spec.bias, spec.zero) {
                (_, true) => vec![0; out],
                (Some(b), false) => b.clone(),
                (None, false) => (0..out).map(|_| rng.gen_range(-64i32..=64)).collect(),
            };
            layers.push(Layer {
                kind,
                weights,
                bias,
                shift: spec.shift.unwrap_or_else(|| default_shift(k)),
            });
            cur = match kind {
                LayerKind::Dense { .. } => Shape::new(out as u32, 1, 1),
                _ => Shape::new(out as u32, cur.height, cur.width),
            };
        }
        let inputs = match &self.inputs {
            Some(v) => v.clone(),
            None => (0..self.num_inputs)
                .map(|_| (0..input_shape.len()).map(|_| rng.gen_range(0i8..=127)).collect())
                .collect(),
        };
        let workload = Workload {
            input_shape,
            layers,
            inputs,
            seed: self.seed,
        };
        workload.shapes()?;
        Ok(workload)
    }
}
