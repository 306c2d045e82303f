//! Bilateral smoothing used by the SSIM/FSIM smoothing study: spatial
//! Gaussian times range Gaussian, renormalized per pixel, windows clipped
//! at the borders.

use crate::par;
use crate::tensor::{chw, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilateralParams {
    pub sigma_spatial: f64,
    pub sigma_range: f64,
    pub radius: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self {
            sigma_spatial: 3.0,
            sigma_range: 0.1,
            radius: 7,
        }
    }
}

pub fn bilateral_filter(img: &Tensor, params: &BilateralParams) -> Tensor {
    let (c, h, w) = chw(img);
    debug_assert_eq!(c, 1);
    let r = params.radius as isize;
    let inv_2ss = 1.0 / (2.0 * params.sigma_spatial * params.sigma_spatial);
    let inv_2sr = 1.0 / (2.0 * params.sigma_range * params.sigma_range);
    let src = img.data();
    let mut out = vec![0.0 as Real; h * w];
    par::for_each_indexed(&mut out, w, |y, row| {
        for (x, slot) in row.iter_mut().enumerate() {
            let center = src[y * w + x] as f64;
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for dy in -r..=r {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x as isize + dx;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let v = src[yy as usize * w + xx as usize] as f64;
                    let ds = (dy * dy + dx * dx) as f64;
                    let dr = v - center;
                    let wgt = (-ds * inv_2ss - dr * dr * inv_2sr).exp();
                    num += wgt * v;
                    den += wgt;
                }
            }
            *slot = (num / den) as Real;
        }
    });
    Tensor::new(&[1, h, w], out).expect("filtered shape")
}
