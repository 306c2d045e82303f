//! Semi-supervised face sketch synthesis.
//!
//! Dense feature-space patch matching against a small photo-sketch
//! reference set builds a pseudo sketch feature supervision signal, which
//! trains a residual generator alongside least-squares GAN and total
//! variation losses. The crate also carries the evaluation stack used to
//! score synthesized sketches: SSIM, FSIM and null-space LDA recognition.

pub mod eval;
pub mod features;
pub mod image_io;
pub mod losses;
pub mod par;
pub mod patchmatch;
pub mod preprocess;
pub mod tensor;
pub mod train;
