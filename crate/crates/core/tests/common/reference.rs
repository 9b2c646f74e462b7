// SPDX-License-Identifier: Apache-2.0

//! Straight-line int8 inference, written without any reference to the
//! simulator. Used as the oracle for golden runs and MAC perturbations.

use npu_sdc::npu::{LayerKind, Shape, Workload};

/// Adds `delta` (wrapping) to one accumulator before bias and requantization.
#[derive(Debug, Clone, Copy)]
pub struct Perturb {
    /// Index into `workload.layers`.
    pub layer: usize,
    /// Flat `[c][y][x]` index of the output element.
    pub output: usize,
    pub delta: i32,
}

fn requant(acc: i32, shift: u8) -> i8 {
    (acc >> shift).clamp(-128, 127) as i8
}

pub fn forward(w: &Workload, input: &[i8], perturb: Option<Perturb>) -> Vec<i8> {
    let mut x: Vec<i8> = input.to_vec();
    let mut shape = w.input_shape;
    for (li, layer) in w.layers.iter().enumerate() {
        let bump = |o: usize| match perturb {
            Some(p) if p.layer == li && p.output == o => p.delta,
            _ => 0,
        };
        match layer.kind {
            LayerKind::Dense { out_features } => {
                let n_in = x.len();
                let mut y = Vec::with_capacity(out_features as usize);
                for o in 0..out_features as usize {
                    let mut acc: i32 = 0;
                    for i in 0..n_in {
                        acc = acc.wrapping_add(i32::from(layer.weights[o * n_in + i]) * i32::from(x[i]));
                    }
                    acc = acc.wrapping_add(bump(o)).wrapping_add(layer.bias[o]);
                    y.push(requant(acc, layer.shift));
                }
                x = y;
                shape = Shape::new(out_features, 1, 1);
            }
            LayerKind::Conv3x3 { out_channels } => {
                let (c, h, wd) = (shape.channels as usize, shape.height as usize, shape.width as usize);
                let at = |ci: usize, yy: isize, xx: isize| -> i32 {
                    if yy < 0 || xx < 0 || yy as usize >= h || xx as usize >= wd {
                        0
                    } else {
                        i32::from(x[(ci * h + yy as usize) * wd + xx as usize])
                    }
                };
                let mut y = vec![0i8; out_channels as usize * h * wd];
                for co in 0..out_channels as usize {
                    for py in 0..h {
                        for px in 0..wd {
                            let mut acc: i32 = 0;
                            for ci in 0..c {
                                for ky in 0..3 {
                                    for kx in 0..3 {
                                        let wv = layer.weights[((co * c + ci) * 3 + ky) * 3 + kx];
                                        let a = at(ci, py as isize + ky as isize - 1, px as isize + kx as isize - 1);
                                        acc = acc.wrapping_add(i32::from(wv) * a);
                                    }
                                }
                            }
                            let o = (co * h + py) * wd + px;
                            acc = acc.wrapping_add(bump(o)).wrapping_add(layer.bias[co]);
                            y[o] = requant(acc, layer.shift);
                        }
                    }
                }
                x = y;
                shape = Shape::new(out_channels, shape.height, shape.width);
            }
            LayerKind::Relu => {
                for v in &mut x {
                    *v = (*v).max(0);
                }
            }
            LayerKind::ArgmaxHead => {}
        }
    }
    x
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[i8]) -> u16 {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best as u16
}

pub fn labels(w: &Workload, perturb: Option<(usize, Perturb)>) -> Vec<u16> {
    w.inputs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = perturb.and_then(|(img, p)| (img == i).then_some(p));
            argmax(&forward(w, x, p))
        })
        .collect()
}
