//! Structural similarity with the canonical 11x11 Gaussian window
//! (sigma 1.5) and constants C1 = (0.01 L)^2, C2 = (0.03 L)^2. Local
//! statistics are taken over valid window positions only.

use super::{gray_f64, EvalError};
use crate::tensor::Tensor;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode Gaussian filtering.
fn filter_valid(img: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let k = gaussian_window();
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += img[y * w + x + i] * kv;
            }
            rows[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                acc += rows[(y + i) * ow + x] * kv;
            }
            out[y * ow + x] = acc;
        }
    }
    (out, oh, ow)
}

/// Mean local SSIM between two grayscale images of equal extent.
/// `dynamic_range` is the value span L (1.0 for [0,1] images).
pub fn ssim(a: &Tensor, b: &Tensor, dynamic_range: f64) -> Result<f64, EvalError> {
    let (da, ah, aw) = gray_f64(a);
    let (db, bh, bw) = gray_f64(b);
    if (ah, aw) != (bh, bw) {
        return Err(EvalError::ExtentMismatch {
            ah,
            aw,
            bh,
            bw,
        });
    }
    if ah < WINDOW || aw < WINDOW {
        return Err(EvalError::TooSmall {
            h: ah,
            w: aw,
            win: WINDOW,
        });
    }
    let l = dynamic_range;
    let c1 = (0.01 * l) * (0.01 * l);
    let c2 = (0.03 * l) * (0.03 * l);

    let sq = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| x * x).collect() };
    let prod: Vec<f64> = da.iter().zip(&db).map(|(&x, &y)| x * y).collect();

    let (mu_a, oh, ow) = filter_valid(&da, ah, aw);
    let (mu_b, _, _) = filter_valid(&db, ah, aw);
    let (m_aa, _, _) = filter_valid(&sq(&da), ah, aw);
    let (m_bb, _, _) = filter_valid(&sq(&db), ah, aw);
    let (m_ab, _, _) = filter_valid(&prod, ah, aw);

    let mut sum = 0.0;
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = m_aa[i] - ma * ma;
        let vb = m_bb[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        let s = ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        sum += s;
    }
    Ok(sum / (oh * ow) as f64)
}
