//! Minimal reverse-mode differentiation over the ops the pipeline needs.
//! Forward passes record a topologically ordered op list; `backward` walks
//! it in reverse, accumulating gradients in preallocated slots.

use crate::features::{add_channel_bias, zero_pad};
use crate::patchmatch::extract_patches;
use crate::tensor::{chw, conv2d_valid, Real, Tensor};
use crate::features::Tap;

use super::TrainError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

enum Op {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        pad: usize,
        stride: usize,
    },
    Relu {
        x: Var,
    },
    LeakyRelu {
        x: Var,
        slope: Real,
    },
    Sigmoid {
        x: Var,
    },
    MaxPool2 {
        x: Var,
        /// Flat input index feeding each output element.
        argmax: Vec<usize>,
    },
    Add {
        a: Var,
        b: Var,
    },
    ReplicateGray {
        x: Var,
    },
    Normalize {
        x: Var,
        std: [Real; 3],
    },
    /// Sum over dense k-patches of squared distance to fixed targets.
    PatchSqLoss {
        x: Var,
        k: usize,
        tap: Tap,
        targets: Tensor,
    },
    TvLoss {
        x: Var,
    },
    /// mean((x - target)^2) over all elements.
    MeanSq {
        x: Var,
        target: Real,
    },
    /// Weighted sum of recorded scalars.
    SumWeighted {
        terms: Vec<(Var, Real)>,
    },
}

struct Node {
    value: Tensor,
    /// Scalar ops also keep their double-precision value so downstream
    /// consumers (history, finite differences) avoid f32 quantization.
    scalar_f64: Option<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Real {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value.data()[0]
    }

    /// Double-precision readback for scalar loss nodes.
    pub fn scalar_f64(&self, v: Var) -> f64 {
        self.nodes[v.0]
            .scalar_f64
            .unwrap_or_else(|| self.scalar(v) as f64)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            scalar_f64: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_scalar(&mut self, value: f64, op: Op) -> Var {
        self.nodes.push(Node {
            value: Tensor::new(&[1], vec![value as Real]).expect("scalar"),
            scalar_f64: Some(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records an input or parameter tensor.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// 3x3-or-any conv with zero padding and stride; bias optional.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        pad: usize,
        stride: usize,
    ) -> Result<Var, TrainError> {
        let padded = if pad > 0 {
            zero_pad(self.value(x), pad)
        } else {
            self.value(x).clone()
        };
        let mut out = conv2d_valid(&padded, self.value(w), stride)?;
        if let Some(bv) = b {
            add_channel_bias(&mut out, self.value(bv).data());
        }
        Ok(self.push(out, Op::Conv2d { x, w, b, pad, stride }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = crate::tensor::relu(self.value(x));
        self.push(out, Op::Relu { x })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: Real) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu { x, slope })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(out, Op::Sigmoid { x })
    }

    /// 2x2 stride-2 max pooling, ceil extents, first maximum wins ties.
    pub fn max_pool2(&mut self, x: Var) -> Var {
        let input = self.value(x);
        let (c, h, w) = chw(input);
        let oh = h.div_ceil(2);
        let ow = w.div_ceil(2);
        let mut out = vec![0.0 as Real; c * oh * ow];
        let mut argmax = vec![0usize; c * oh * ow];
        let inp = input.data();
        for ci in 0..c {
            for oi in 0..oh {
                for oj in 0..ow {
                    let mut m = Real::NEG_INFINITY;
                    let mut mi = 0usize;
                    for a in 0..2.min(h - oi * 2) {
                        for b in 0..2.min(w - oj * 2) {
                            let idx = ci * h * w + (oi * 2 + a) * w + oj * 2 + b;
                            if inp[idx] > m {
                                m = inp[idx];
                                mi = idx;
                            }
                        }
                    }
                    out[ci * oh * ow + oi * ow + oj] = m;
                    argmax[ci * oh * ow + oi * ow + oj] = mi;
                }
            }
        }
        let value = Tensor::new(&[c, oh, ow], out).expect("pool shape");
        self.push(value, Op::MaxPool2 { x, argmax })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        debug_assert_eq!(va.shape(), vb.shape());
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let out = Tensor::new(va.shape(), data).expect("add shape");
        self.push(out, Op::Add { a, b })
    }

    /// 1-channel image replicated to 3 channels.
    pub fn replicate_gray(&mut self, x: Var) -> Var {
        let (c, h, w) = chw(self.value(x));
        debug_assert_eq!(c, 1);
        let mut data = Vec::with_capacity(3 * h * w);
        for _ in 0..3 {
            data.extend_from_slice(&self.value(x).data()[..h * w]);
        }
        let out = Tensor::new(&[3, h, w], data).expect("replicate shape");
        self.push(out, Op::ReplicateGray { x })
    }

    /// Per-channel (x - mean) / std on a 3-channel image.
    pub fn normalize(&mut self, x: Var, mean: [Real; 3], std: [Real; 3]) -> Var {
        let (c, h, w) = chw(self.value(x));
        debug_assert_eq!(c, 3);
        let mut out = self.value(x).clone();
        for ci in 0..3 {
            for v in &mut out.data_mut()[ci * h * w..(ci + 1) * h * w] {
                *v = (*v - mean[ci]) / std[ci];
            }
        }
        self.push(out, Op::Normalize { x, std })
    }

    /// Sum_j ||patch_j(x) - targets_j||^2 over the dense k-patch grid.
    pub fn patch_sq_loss(
        &mut self,
        x: Var,
        k: usize,
        tap: Tap,
        targets: Tensor,
    ) -> Result<Var, TrainError> {
        let (grid, patches) = extract_patches(self.value(x), k, tap)?;
        if patches.shape() != targets.shape() {
            return Err(TrainError::TargetShape {
                got: patches.shape().to_vec(),
                expected: targets.shape().to_vec(),
            });
        }
        let _ = grid;
        let mut total = 0.0f64;
        for (a, b) in patches.data().iter().zip(targets.data()) {
            let d = (*a - *b) as f64;
            total += d * d;
        }
        Ok(self.push_scalar(total, Op::PatchSqLoss { x, k, tap, targets }))
    }

    pub fn tv_loss(&mut self, x: Var) -> Var {
        let fm = self.value(x);
        let (_, h, w) = chw(fm);
        let d = fm.data();
        let mut total = 0.0f64;
        for i in 0..h {
            for j in 0..w {
                if i + 1 < h {
                    let diff = (d[(i + 1) * w + j] - d[i * w + j]) as f64;
                    total += diff * diff;
                }
                if j + 1 < w {
                    let diff = (d[i * w + j + 1] - d[i * w + j]) as f64;
                    total += diff * diff;
                }
            }
        }
        self.push_scalar(total, Op::TvLoss { x })
    }

    pub fn mean_sq(&mut self, x: Var, target: Real) -> Var {
        let data = self.value(x).data();
        let mut total = 0.0f64;
        for &v in data {
            let d = (v - target) as f64;
            total += d * d;
        }
        self.push_scalar(total / data.len() as f64, Op::MeanSq { x, target })
    }

    pub fn sum_weighted(&mut self, terms: Vec<(Var, Real)>) -> Var {
        let mut total = 0.0f64;
        for &(v, c) in &terms {
            total += self.scalar_f64(v) * c as f64;
        }
        self.push_scalar(total, Op::SumWeighted { terms })
    }

    /// Gradients of a recorded scalar with respect to every node. Entries
    /// stay `None` for nodes the loss does not depend on.
    pub fn backward(&self, root: Var) -> Result<Vec<Option<Tensor>>, TrainError> {
        if root.0 >= self.nodes.len() {
            return Err(TrainError::UnknownVar(root.0));
        }
        if self.nodes[root.0].value.len() != 1 {
            return Err(TrainError::NonScalarLoss(
                self.nodes[root.0].value.shape().to_vec(),
            ));
        }
        let mut grads: Vec<Option<Vec<Real>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|data| {
                    Tensor::new(self.nodes[i].value.shape(), data).expect("grad shape")
                })
            })
            .collect())
    }

    fn propagate(&self, i: usize, g: &[Real], grads: &mut [Option<Vec<Real>>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, contrib: Vec<Real>| {
            match &mut grads[v.0] {
                Some(slot) => {
                    for (s, c) in slot.iter_mut().zip(&contrib) {
                        *s += c;
                    }
                }
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, pad, stride } => {
                let (dx, dw, db) = self.conv2d_backward(*x, *w, g, *pad, *stride);
                acc(*x, dx);
                acc(*w, dw);
                if let Some(bv) = b {
                    acc(*bv, db);
                }
            }
            Op::Relu { x } => {
                let xin = self.value(*x).data();
                acc(
                    *x,
                    g.iter()
                        .zip(xin)
                        .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                        .collect(),
                );
            }
            Op::LeakyRelu { x, slope } => {
                let xin = self.value(*x).data();
                acc(
                    *x,
                    g.iter()
                        .zip(xin)
                        .map(|(&gv, &xv)| if xv > 0.0 { gv } else { slope * gv })
                        .collect(),
                );
            }
            Op::Sigmoid { x } => {
                let y = node.value.data();
                acc(
                    *x,
                    g.iter().zip(y).map(|(&gv, &yv)| gv * yv * (1.0 - yv)).collect(),
                );
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = vec![0.0 as Real; self.value(*x).len()];
                for (o, &src) in argmax.iter().enumerate() {
                    dx[src] += g[o];
                }
                acc(*x, dx);
            }
            Op::Add { a, b } => {
                acc(*a, g.to_vec());
                acc(*b, g.to_vec());
            }
            Op::ReplicateGray { x } => {
                let n = self.value(*x).len();
                let mut dx = vec![0.0 as Real; n];
                for ch in 0..3 {
                    for (d, &gv) in dx.iter_mut().zip(&g[ch * n..(ch + 1) * n]) {
                        *d += gv;
                    }
                }
                acc(*x, dx);
            }
            Op::Normalize { x, std } => {
                let n = self.value(*x).len() / 3;
                let mut dx = vec![0.0 as Real; 3 * n];
                for ci in 0..3 {
                    for (d, &gv) in dx[ci * n..(ci + 1) * n].iter_mut().zip(&g[ci * n..(ci + 1) * n])
                    {
                        *d = gv / std[ci];
                    }
                }
                acc(*x, dx);
            }
            Op::PatchSqLoss { x, k, tap, targets } => {
                // overlapping patches: each map element receives 2(p - t)
                // from every patch containing it
                let fm = self.value(*x);
                let (grid, patches) = extract_patches(fm, *k, *tap).expect("recorded grid");
                let (c, h, w) = chw(fm);
                let mut dx = vec![0.0 as Real; fm.len()];
                let half = k / 2;
                let plen = c * k * k;
                let pd = patches.data();
                let td = targets.data();
                for j in 0..grid.count() {
                    let (cy, cx) = grid.center(j);
                    let (r0, c0) = (cy - half, cx - half);
                    for ci in 0..c {
                        for a in 0..*k {
                            for bcol in 0..*k {
                                let pi = j * plen + ci * k * k + a * k + bcol;
                                let fi = ci * h * w + (r0 + a) * w + c0 + bcol;
                                dx[fi] += g[0] * 2.0 * (pd[pi] - td[pi]);
                            }
                        }
                    }
                }
                acc(*x, dx);
            }
            Op::TvLoss { x } => {
                let fm = self.value(*x);
                let (_, h, w) = chw(fm);
                let d = fm.data();
                let mut dx = vec![0.0 as Real; fm.len()];
                for i in 0..h {
                    for j in 0..w {
                        if i + 1 < h {
                            let diff = d[(i + 1) * w + j] - d[i * w + j];
                            dx[(i + 1) * w + j] += g[0] * 2.0 * diff;
                            dx[i * w + j] -= g[0] * 2.0 * diff;
                        }
                        if j + 1 < w {
                            let diff = d[i * w + j + 1] - d[i * w + j];
                            dx[i * w + j + 1] += g[0] * 2.0 * diff;
                            dx[i * w + j] -= g[0] * 2.0 * diff;
                        }
                    }
                }
                acc(*x, dx);
            }
            Op::MeanSq { x, target } => {
                let d = self.value(*x).data();
                let scale = 2.0 / d.len() as Real;
                acc(*x, d.iter().map(|&v| g[0] * scale * (v - target)).collect());
            }
            Op::SumWeighted { terms } => {
                for &(v, c) in terms {
                    acc(v, vec![g[0] * c]);
                }
            }
        }
    }

    fn conv2d_backward(
        &self,
        x: Var,
        w: Var,
        g: &[Real],
        pad: usize,
        stride: usize,
    ) -> (Vec<Real>, Vec<Real>, Vec<Real>) {
        let input = self.value(x);
        let weight = self.value(w);
        let (c, h, w_in) = chw(input);
        let ws = weight.shape();
        let (k, kh, kw) = (ws[0], ws[2], ws[3]);
        let (ph, pw) = (h + 2 * pad, w_in + 2 * pad);
        let oh = (ph - kh) / stride + 1;
        let ow = (pw - kw) / stride + 1;
        let inp = input.data();
        let ker = weight.data();
        let mut dx = vec![0.0 as Real; c * h * w_in];
        let mut dw = vec![0.0 as Real; weight.len()];
        let mut db = vec![0.0 as Real; k];
        for ki in 0..k {
            for oi in 0..oh {
                for oj in 0..ow {
                    let gv = g[ki * oh * ow + oi * ow + oj];
                    if gv == 0.0 {
                        continue;
                    }
                    db[ki] += gv;
                    for ci in 0..c {
                        for a in 0..kh {
                            let iy = (oi * stride + a) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for bcol in 0..kw {
                                let ix = (oj * stride + bcol) as isize - pad as isize;
                                if ix < 0 || ix >= w_in as isize {
                                    continue;
                                }
                                let fi = ci * h * w_in + iy as usize * w_in + ix as usize;
                                let wi = ki * c * kh * kw + ci * kh * kw + a * kw + bcol;
                                dx[fi] += gv * ker[wi];
                                dw[wi] += gv * inp[fi];
                            }
                        }
                    }
                }
            }
        }
        (dx, dw, db)
    }
}
