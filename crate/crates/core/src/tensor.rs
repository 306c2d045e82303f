//! Dense numeric arrays and the small kernel set the rest of the crate
//! builds on: valid correlation, 2x2 max pooling, relu and a symmetric
//! eigensolver.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::par;

/// Element type for training-path tensors. Double precision is selectable
/// build-wide with the `f64` feature; metrics and eigensolves always run
/// in f64 regardless.
#[cfg(not(feature = "f64"))]
pub type Real = f32;
#[cfg(feature = "f64")]
pub type Real = f64;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape {shape:?} does not match data length {len}")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
    #[error("extent of zero in shape {0:?}")]
    ZeroExtent(Vec<usize>),
    #[error("rank {0} outside supported range 1..=4")]
    BadRank(usize),
    #[error("conv2d: input has {input} channels but kernels expect {kernels}")]
    ChannelMismatch { input: usize, kernels: usize },
    #[error("conv2d: kernel {kh}x{kw} larger than input {h}x{w}")]
    KernelTooLarge { kh: usize, kw: usize, h: usize, w: usize },
    #[error("conv2d: stride must be positive")]
    ZeroStride,
    #[error("eig_sym: matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("eig_sym: asymmetry {0} exceeds 1e-8")]
    NotSymmetric(f64),
    #[error("eig_sym: non-finite entry at ({0},{1})")]
    NonFinite(usize, usize),
}

/// Row-major dense array of rank 1 to 4.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Real>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<Real>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(TensorError::BadRank(shape.len()));
        }
        if shape.iter().any(|&e| e == 0) {
            return Err(TensorError::ZeroExtent(shape.to_vec()));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(TensorError::ShapeMismatch {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Self::new(shape, vec![0.0; n]).expect("valid shape")
    }

    pub fn filled(shape: &[usize], value: Real) -> Self {
        let n: usize = shape.iter().product();
        Self::new(shape, vec![value; n]).expect("valid shape")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Real> {
        self.data
    }

    /// Reinterprets the buffer under a new shape of equal volume.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self, TensorError> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                shape: shape.to_vec(),
                len: self.data.len(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(Real) -> Real) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn dot(&self, other: &Tensor) -> Real {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm_l2(&self) -> Real {
        self.data.iter().map(|&v| v * v).sum::<Real>().sqrt()
    }

    pub fn max_abs(&self) -> Real {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Valid-mode correlation (no kernel flip): `input` C x H x W against
/// `kernels` K x C x kh x kw, producing K x H' x W'.
///
/// Reduction order per output cell is fixed (c, then row, then column) so
/// results do not depend on thread count.
pub fn conv2d_valid(input: &Tensor, kernels: &Tensor, stride: usize) -> Result<Tensor, TensorError> {
    if stride == 0 {
        return Err(TensorError::ZeroStride);
    }
    let (c, h, w) = chw(input);
    let ks = kernels.shape();
    assert_eq!(ks.len(), 4, "kernels must be K x C x kh x kw");
    let (k, kc, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
    if kc != c {
        return Err(TensorError::ChannelMismatch {
            input: c,
            kernels: kc,
        });
    }
    if kh > h || kw > w {
        return Err(TensorError::KernelTooLarge { kh, kw, h, w });
    }
    let oh = (h - kh) / stride + 1;
    let ow = (w - kw) / stride + 1;
    let mut out = vec![0.0 as Real; k * oh * ow];
    let inp = input.data();
    let ker = kernels.data();
    par::for_each_indexed(&mut out, oh * ow, |ki, plane| {
        let kbase = ki * c * kh * kw;
        for oi in 0..oh {
            for oj in 0..ow {
                // f64 accumulation: one rounding at the store instead of
                // one per term
                let mut acc = 0.0f64;
                for ci in 0..c {
                    let ibase = ci * h * w;
                    let kcbase = kbase + ci * kh * kw;
                    for a in 0..kh {
                        let irow = ibase + (oi * stride + a) * w + oj * stride;
                        let krow = kcbase + a * kw;
                        for b in 0..kw {
                            acc += inp[irow + b] as f64 * ker[krow + b] as f64;
                        }
                    }
                }
                plane[oi * ow + oj] = acc as Real;
            }
        }
    });
    Tensor::new(&[k, oh, ow], out)
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns form truncated
/// windows so the output extent is the ceiling of half the input extent.
pub fn max_pool2(input: &Tensor) -> Tensor {
    let (c, h, w) = chw(input);
    let oh = h.div_ceil(2);
    let ow = w.div_ceil(2);
    let mut out = vec![0.0 as Real; c * oh * ow];
    let inp = input.data();
    par::for_each_indexed(&mut out, oh * ow, |ci, plane| {
        let ibase = ci * h * w;
        for oi in 0..oh {
            for oj in 0..ow {
                let mut m = Real::NEG_INFINITY;
                for a in 0..2.min(h - oi * 2) {
                    for b in 0..2.min(w - oj * 2) {
                        let v = inp[ibase + (oi * 2 + a) * w + oj * 2 + b];
                        if v > m {
                            m = v;
                        }
                    }
                }
                plane[oi * ow + oj] = m;
            }
        }
    });
    Tensor::new(&[c, oh, ow], out).expect("pool shape")
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

#[derive(Debug, Clone)]
pub struct SymEigResult {
    /// Descending-sorted eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Column-major orthonormal eigenvectors, column i pairs with eigenvalue i.
    pub eigenvectors: DMatrix<f64>,
}

/// Eigendecomposition of a symmetric matrix, computed in double precision.
/// The input is symmetrized as (A + A^T)/2 after checking the asymmetry
/// stays within 1e-8.
pub fn eig_sym(matrix: &DMatrix<f64>) -> Result<SymEigResult, TensorError> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(TensorError::NotSquare { rows, cols });
    }
    for i in 0..rows {
        for j in 0..cols {
            if !matrix[(i, j)].is_finite() {
                return Err(TensorError::NonFinite(i, j));
            }
        }
    }
    let mut asym = 0.0f64;
    for i in 0..rows {
        for j in (i + 1)..cols {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    let scale = matrix.amax().max(1.0);
    if asym > 1e-8 * scale {
        return Err(TensorError::NotSymmetric(asym));
    }
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Interprets a tensor as C x H x W, promoting rank-2 H x W to single channel.
pub fn chw(t: &Tensor) -> (usize, usize, usize) {
    match t.shape() {
        [h, w] => (1, *h, *w),
        [c, h, w] => (*c, *h, *w),
        s => panic!("expected rank 2 or 3 tensor, got shape {s:?}"),
    }
}
