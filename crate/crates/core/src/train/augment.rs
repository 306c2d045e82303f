//! Online color-space augmentation: brightness, contrast, saturation and
//! sharpness jitter, all clamped back to [0,1].

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{chw, Real, Tensor};

/// Sampled jitter; `identity()` leaves the photo untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Additive brightness shift.
    pub brightness: Real,
    /// Contrast factor about the image mean.
    pub contrast: Real,
    /// Blend factor toward per-pixel luma (1 = unchanged).
    pub saturation: Real,
    /// Unsharp-mask blend factor (1 = unchanged).
    pub sharpness: Real,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            brightness: 0.0,
            contrast: 1.0,
            saturation: 1.0,
            sharpness: 1.0,
        }
    }

    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        Self {
            brightness: rng.gen_range(-0.2..=0.2),
            contrast: rng.gen_range(0.8..=1.2),
            saturation: rng.gen_range(0.8..=1.2),
            sharpness: rng.gen_range(0.8..=1.2),
        }
    }
}

pub fn augment(photo: &Tensor, params: &AugmentParams) -> Tensor {
    let (c, h, w) = chw(photo);
    let mut data: Vec<Real> = photo.data().to_vec();

    // sharpness: blend toward/away from a 3x3 box blur per channel
    if params.sharpness != 1.0 {
        let mut blurred = vec![0.0 as Real; data.len()];
        for ci in 0..c {
            let plane = &data[ci * h * w..(ci + 1) * h * w];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0 as Real;
                    let mut cnt = 0.0 as Real;
                    for dy in -1i32..=1 {
                        for dx in -1i32..=1 {
                            let yy = y as i32 + dy;
                            let xx = x as i32 + dx;
                            if yy >= 0 && yy < h as i32 && xx >= 0 && xx < w as i32 {
                                acc += plane[yy as usize * w + xx as usize];
                                cnt += 1.0;
                            }
                        }
                    }
                    blurred[ci * h * w + y * w + x] = acc / cnt;
                }
            }
        }
        for (v, b) in data.iter_mut().zip(&blurred) {
            *v = b + params.sharpness * (*v - b);
        }
    }

    // saturation: blend each channel toward the per-pixel luma
    if params.saturation != 1.0 && c == 3 {
        let plane = h * w;
        for i in 0..plane {
            let (r, g, b) = (data[i], data[plane + i], data[2 * plane + i]);
            let luma = 0.299 * r + 0.587 * g + 0.114 * b;
            for ci in 0..3 {
                let v = &mut data[ci * plane + i];
                *v = luma + params.saturation * (*v - luma);
            }
        }
    }

    // contrast about the global mean
    if params.contrast != 1.0 {
        let mean = data.iter().map(|&v| v as f64).sum::<f64>() / data.len() as f64;
        let mean = mean as Real;
        for v in &mut data {
            *v = mean + params.contrast * (*v - mean);
        }
    }

    if params.brightness != 0.0 {
        for v in &mut data {
            *v += params.brightness;
        }
    }

    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    Tensor::new(photo.shape(), data).expect("augment shape")
}
