//! Quantitative assessment of synthesized sketches: SSIM, FSIM, bilateral
//! smoothing, and null-space LDA recognition. Everything here computes in
//! double precision.

mod bilateral;
mod fsim;
mod nlda;
mod ssim;

pub use bilateral::{bilateral_filter, BilateralParams};
pub use fsim::fsim;
pub use nlda::{nlda_fit, recognition_curve, NldaModel, RecognitionCurve};
pub use ssim::ssim;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("image extents differ: {ah}x{aw} vs {bh}x{bw}")]
    ExtentMismatch {
        ah: usize,
        aw: usize,
        bh: usize,
        bw: usize,
    },
    #[error("image {h}x{w} smaller than the {win}x{win} analysis window")]
    TooSmall { h: usize, w: usize, win: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("within-class scatter has no null space (rank {rank} of dimension {dim})")]
    EmptyNullSpace { rank: usize, dim: usize },
    #[error("{got} samples but {labels} labels")]
    LabelMismatch { got: usize, labels: usize },
    #[error("inconsistent feature dimension: sample {index} has {got}, expected {expected}")]
    DimMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

/// Per-pair metric scores plus dataset means, optionally with
/// bilateral-smoothed variants.
#[derive(Debug, Clone, Default)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone)]
pub struct MetricRow {
    pub name: String,
    pub ssim: f64,
    pub fsim: f64,
    pub ssim_smoothed: Option<f64>,
    pub fsim_smoothed: Option<f64>,
}

impl MetricReport {
    pub fn mean_ssim(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.ssim))
    }

    pub fn mean_fsim(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.fsim))
    }

    pub fn mean_ssim_smoothed(&self) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.ssim_smoothed).collect();
        (!vals.is_empty()).then(|| mean(vals.iter().copied()))
    }

    pub fn mean_fsim_smoothed(&self) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.fsim_smoothed).collect();
        (!vals.is_empty()).then(|| mean(vals.iter().copied()))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in it {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub(crate) fn gray_f64(img: &crate::tensor::Tensor) -> (Vec<f64>, usize, usize) {
    let (c, h, w) = crate::tensor::chw(img);
    assert_eq!(c, 1, "metrics operate on grayscale images");
    (img.data().iter().map(|&v| v as f64).collect(), h, w)
}
