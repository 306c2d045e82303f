//! Training objectives: pseudo sketch feature loss, least-squares GAN
//! losses for both players, total variation, and the weighted totals. All
//! reductions accumulate in f64 regardless of the build's tensor precision.

use thiserror::Error;

use crate::features::{FeatureSet, Tap};
use crate::patchmatch::{extract_patches, PatchMatchError, PseudoSketchFeature};
use crate::tensor::{chw, Real, Tensor};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("pseudo feature grids disagree at tap {tap}: query {qk}x{qm}, target {tk}x{tm} (k x m)")]
    GridMismatch {
        tap: Tap,
        qk: usize,
        qm: usize,
        tk: usize,
        tm: usize,
    },
    #[error("component {0} is non-finite")]
    NonFinite(&'static str),
    #[error("score tensor is empty")]
    EmptyScores,
    #[error(transparent)]
    PatchMatch(#[from] PatchMatchError),
}

/// Trade-off weights and the layer set the pseudo feature loss sums over.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    pub lambda_p: Real,
    pub lambda_adv: Real,
    pub lambda_tv: Real,
    pub layers: Vec<Tap>,
}

impl LossWeights {
    /// lambda_tv preset used with CUFS-style reference sets.
    pub const TV_CUFS: Real = 1e-5;
    /// lambda_tv preset used with CUFSF-style reference sets.
    pub const TV_CUFSF: Real = 1e-2;
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_p: 1.0,
            lambda_adv: 1e3,
            lambda_tv: Self::TV_CUFS,
            layers: vec![Tap::RELU3_1, Tap::RELU4_1, Tap::RELU5_1],
        }
    }
}

/// Sum over layers and patches of the squared L2 distance between the
/// synthesized sketch's feature patches and the pseudo sketch feature
/// patches. Unnormalized (no 1/m).
pub fn pseudo_feature_loss(
    gen_features: &FeatureSet,
    pseudo: &[PseudoSketchFeature],
) -> Result<Real, LossError> {
    let mut total = 0.0f64;
    for target in pseudo {
        let fm = gen_features.get(target.tap).map_err(PatchMatchError::from)?;
        let (grid, patches) = extract_patches(fm, target.grid.k, target.tap)?;
        if grid.count() != target.grid.count() || grid.k != target.grid.k {
            return Err(LossError::GridMismatch {
                tap: target.tap,
                qk: grid.k,
                qm: grid.count(),
                tk: target.grid.k,
                tm: target.grid.count(),
            });
        }
        for (a, b) in patches.data().iter().zip(target.patches.data()) {
            let d = (*a - *b) as f64;
            total += d * d;
        }
    }
    Ok(total as Real)
}

/// Sum of squared forward differences along both axes, valid neighbors only.
pub fn tv_loss(image: &Tensor) -> Real {
    let (c, h, w) = chw(image);
    debug_assert_eq!(c, 1);
    let d = image.data();
    let mut total = 0.0f64;
    for i in 0..h {
        for j in 0..w {
            let v = d[i * w + j] as f64;
            if i + 1 < h {
                let dv = d[(i + 1) * w + j] as f64 - v;
                total += dv * dv;
            }
            if j + 1 < w {
                let dh = d[i * w + j + 1] as f64 - v;
                total += dh * dh;
            }
        }
    }
    total as Real
}

fn mean_sq_vs(scores: &Tensor, target: f64) -> f64 {
    let sum: f64 = scores
        .data()
        .iter()
        .map(|&v| {
            let d = v as f64 - target;
            d * d
        })
        .sum();
    sum / scores.len() as f64
}

/// Least-squares discriminator loss: 1/2 mean[(d_real - 1)^2] + 1/2 mean[d_fake^2].
pub fn lsgan_d_loss(d_real: &Tensor, d_fake: &Tensor) -> Result<Real, LossError> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(LossError::EmptyScores);
    }
    Ok((0.5 * mean_sq_vs(d_real, 1.0) + 0.5 * mean_sq_vs(d_fake, 0.0)) as Real)
}

/// Least-squares generator loss: mean[(d_fake - 1)^2].
pub fn lsgan_g_loss(d_fake: &Tensor) -> Result<Real, LossError> {
    if d_fake.is_empty() {
        return Err(LossError::EmptyScores);
    }
    Ok(mean_sq_vs(d_fake, 1.0) as Real)
}

/// L_G = lambda_p * L_p + lambda_adv * L_GAN_G + lambda_tv * L_tv.
pub fn generator_total(
    lp: Real,
    lgan_g: Real,
    ltv: Real,
    weights: &LossWeights,
) -> Result<Real, LossError> {
    if !lp.is_finite() {
        return Err(LossError::NonFinite("pseudo_feature_loss"));
    }
    if !lgan_g.is_finite() {
        return Err(LossError::NonFinite("lsgan_g_loss"));
    }
    if !ltv.is_finite() {
        return Err(LossError::NonFinite("tv_loss"));
    }
    Ok(weights.lambda_p * lp + weights.lambda_adv * lgan_g + weights.lambda_tv * ltv)
}

/// L_D = L_GAN_D.
pub fn discriminator_total(lgan_d: Real) -> Result<Real, LossError> {
    if !lgan_d.is_finite() {
        return Err(LossError::NonFinite("lsgan_d_loss"));
    }
    Ok(lgan_d)
}
