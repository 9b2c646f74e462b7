// SPDX-License-Identifier: Apache-2.0

//! Host-side compilation of a [`Workload`] into NPU commands and memory images.
//!
//! Each compute layer becomes six `REG` configuration words:
//!
//! | word | contents |
//! |------|----------|
//! | `cfg[0]` | opcode (bits 0..4: 1 = dense, 2 = conv3x3), relu (bit 4), shift (bits 8..13) |
//! | `cfg[1]` | height (bits 0..16), width (bits 16..32) |
//! | `cfg[2]` | input channels / features (bits 0..16), output channels (bits 16..32) |
//! | `cfg[3]` | input activation base (bits 0..16), output base (bits 16..32) |
//! | `cfg[4]` | weight base in the shared buffer |
//! | `cfg[5]` | weight blob address in external memory |
//!
//! `cfg[6]` and `cfg[7]` are reserved and never read.
//!
//! The shared buffer holds two ping-pong activation regions followed by the
//! weight region. A weight blob is the `[out][k]` int8 weight matrix padded to
//! a word boundary, followed by little-endian int32 biases.

use super::workload::reduction_len;
use super::{LayerKind, NpuError, Shape, Workload};

pub(crate) const OP_DENSE: u32 = 1;
pub(crate) const OP_CONV3X3: u32 = 2;

fn align4(n: usize) -> usize {
    (n + 3) & !3
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CompiledOp {
    pub cfg: [u32; 6],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub(crate) ops: Vec<CompiledOp>,
    /// External (host) memory: weight blobs then input tensors.
    pub(crate) ext: Vec<u8>,
    pub(crate) input_addrs: Vec<u32>,
    pub(crate) output_addr: usize,
    pub(crate) output_len: usize,
    pub(crate) buffer_required: usize,
}

impl Program {
    pub fn compile(workload: &Workload, buffer_bytes: u32) -> Result<Program, NpuError> {
        let shapes = workload.shapes()?;

        // Compute layers with any directly following relu fused in.
        struct Op {
            kind: LayerKind,
            input: Shape,
            output: Shape,
            relu: bool,
            layer: usize,
        }
        let mut ops: Vec<Op> = Vec::new();
        let mut cur = workload.input_shape;
        for (i, layer) in workload.layers.iter().enumerate() {
            match layer.kind {
                LayerKind::Dense { .. } | LayerKind::Conv3x3 { .. } => ops.push(Op {
                    kind: layer.kind,
                    input: cur,
                    output: shapes[i],
                    relu: false,
                    layer: i,
                }),
                LayerKind::Relu => ops.last_mut().expect("validated").relu = true,
                LayerKind::ArgmaxHead => {}
            }
            cur = shapes[i];
        }

        let act_region = ops
            .iter()
            .map(|op| align4(op.input.len()).max(align4(op.output.len())))
            .max()
            .unwrap_or(0);
        let blob_len = |op: &Op| {
            let k = reduction_len(&op.kind, op.input);
            align4(op.output.channels as usize * k) + 4 * op.output.channels as usize
        };
        let weight_base = 2 * act_region;
        let max_blob = ops.iter().map(blob_len).max().unwrap_or(0);
        let buffer_required = weight_base + max_blob;
        if buffer_required > buffer_bytes as usize {
            return Err(NpuError::Shape(format!(
                "shared buffer too small: workload needs {buffer_required} bytes, buffer has {buffer_bytes}"
            )));
        }
        if blob_len(ops.iter().max_by_key(|o| blob_len(o)).expect("one op")) / 4 > u16::MAX as usize {
            return Err(NpuError::Shape("weight blob exceeds a 16-bit burst".into()));
        }

        let mut ext = Vec::new();
        let mut compiled = Vec::with_capacity(ops.len());
        for (n, op) in ops.iter().enumerate() {
            let layer = &workload.layers[op.layer];
            let k = reduction_len(&op.kind, op.input);
            let weight_src = ext.len();
            ext.extend(layer.weights.iter().map(|&w| w as u8));
            ext.resize(align4(ext.len()), 0);
            for b in &layer.bias {
                ext.extend_from_slice(&b.to_le_bytes());
            }
            debug_assert_eq!(ext.len() - weight_src, blob_len(op));

            let (opcode, h, w, cin) = match op.kind {
                LayerKind::Dense { .. } => (OP_DENSE, 1, 1, k as u32),
                _ => (OP_CONV3X3, op.input.height, op.input.width, op.input.channels),
            };
            if cin > u16::MAX as u32 {
                return Err(NpuError::Shape(format!("layer {}: input exceeds 16 bits", op.layer)));
            }
            let (ifm, ofm) = if n % 2 == 0 {
                (0, act_region)
            } else {
                (act_region, 0)
            };
            compiled.push(CompiledOp {
                cfg: [
                    opcode | (u32::from(op.relu) << 4) | (u32::from(layer.shift) << 8),
                    h | (w << 16),
                    cin | (op.output.channels << 16),
                    ifm as u32 | ((ofm as u32) << 16),
                    weight_base as u32,
                    weight_src as u32,
                ],
            });
        }

        let mut input_addrs = Vec::with_capacity(workload.inputs.len());
        for x in &workload.inputs {
            input_addrs.push(ext.len() as u32);
            ext.extend(x.iter().map(|&v| v as u8));
            ext.resize(align4(ext.len()), 0);
        }

        let last = ops.last().expect("validated");
        let output_addr = if (ops.len() - 1).is_multiple_of(2) { act_region } else { 0 };
        Ok(Program {
            ops: compiled,
            ext,
            input_addrs,
            output_addr,
            output_len: last.output.len(),
            buffer_required,
        })
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn buffer_required(&self) -> usize {
        self.buffer_required
    }
}
