//! Feature similarity index: phase congruency from a log-Gabor filter bank
//! (4 scales x 4 orientations) combined with Scharr gradient magnitude,
//! pooled with phase-congruency weights.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{gray_f64, EvalError};
use crate::tensor::Tensor;

const NSCALE: usize = 4;
const NORIENT: usize = 4;
const MIN_WAVELENGTH: f64 = 6.0;
const MULT: f64 = 2.0;
/// Radial bandwidth parameter of the log-Gabor transfer function.
const SIGMA_R: f64 = 0.5978;
const D_THETA_ON_SIGMA: f64 = 1.2;
const NOISE_K: f64 = 2.0;
const EPSILON: f64 = 1e-4;
const T1: f64 = 0.85;
const T2: f64 = 160.0;

/// FSIM between two grayscale images of equal extent, values in [0,1].
pub fn fsim(a: &Tensor, b: &Tensor) -> Result<f64, EvalError> {
    let (da, ah, aw) = gray_f64(a);
    let (db, bh, bw) = gray_f64(b);
    if (ah, aw) != (bh, bw) {
        return Err(EvalError::ExtentMismatch { ah, aw, bh, bw });
    }
    if ah < 8 || aw < 8 {
        return Err(EvalError::TooSmall {
            h: ah,
            w: aw,
            win: 8,
        });
    }
    // reference protocol works on a 0..255 scale and downsamples large images
    let to_255 = |v: &[f64]| -> Vec<f64> { v.iter().map(|&x| x * 255.0).collect() };
    let (ia, h, w) = downsample(&to_255(&da), ah, aw);
    let (ib, _, _) = downsample(&to_255(&db), ah, aw);

    let pc1 = phase_congruency(&ia, h, w);
    let pc2 = phase_congruency(&ib, h, w);
    let g1 = scharr_magnitude(&ia, h, w);
    let g2 = scharr_magnitude(&ib, h, w);

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..h * w {
        let s_pc = (2.0 * pc1[i] * pc2[i] + T1) / (pc1[i] * pc1[i] + pc2[i] * pc2[i] + T1);
        let s_g = (2.0 * g1[i] * g2[i] + T2) / (g1[i] * g1[i] + g2[i] * g2[i] + T2);
        let pcm = pc1[i].max(pc2[i]);
        num += s_pc * s_g * pcm;
        den += pcm;
    }
    if den == 0.0 {
        // featureless pair; similarity defined by the gradient term alone
        let mut s = 0.0;
        for i in 0..h * w {
            s += (2.0 * g1[i] * g2[i] + T2) / (g1[i] * g1[i] + g2[i] * g2[i] + T2);
        }
        return Ok(s / (h * w) as f64);
    }
    Ok(num / den)
}

fn downsample(img: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let f = ((h.min(w) as f64 / 256.0).round() as usize).max(1);
    if f == 1 {
        return (img.to_vec(), h, w);
    }
    let (oh, ow) = (h / f, w / f);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for dy in 0..f {
                for dx in 0..f {
                    acc += img[(y * f + dy) * w + x * f + dx];
                }
            }
            out[y * ow + x] = acc / (f * f) as f64;
        }
    }
    (out, oh, ow)
}

fn fft2(data: &mut [Complex<f64>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in data.chunks_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    if inverse {
        let scale = 1.0 / (h * w) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Normalized frequency coordinates: radius and angle per FFT bin.
fn freq_grid(h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut radius = vec![0.0; h * w];
    let mut theta = vec![0.0; h * w];
    for y in 0..h {
        let fy = if y <= h / 2 {
            y as f64 / h as f64
        } else {
            y as f64 / h as f64 - 1.0
        };
        for x in 0..w {
            let fx = if x <= w / 2 {
                x as f64 / w as f64
            } else {
                x as f64 / w as f64 - 1.0
            };
            radius[y * w + x] = (fx * fx + fy * fy).sqrt();
            theta[y * w + x] = (-fy).atan2(fx);
        }
    }
    radius[0] = 1.0; // avoid log(0) at DC; the filter is zeroed there anyway
    (radius, theta)
}

/// Kovesi-style phase congruency summed over orientations:
/// PC = sum_o max(Energy_o - T_o, 0) / (epsilon + sum_o sum_n A_n).
fn phase_congruency(img: &[f64], h: usize, w: usize) -> Vec<f64> {
    let n = h * w;
    let mut spectrum: Vec<Complex<f64>> = img.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2(&mut spectrum, h, w, false);

    let (radius, theta) = freq_grid(h, w);
    // butterworth low-pass keeps the radial filters well-behaved at the
    // corners of the spectrum
    let lowpass: Vec<f64> = radius
        .iter()
        .map(|&r| 1.0 / (1.0 + (r / 0.45).powi(30)))
        .collect();
    let log_sigma = SIGMA_R.ln();
    let mut radial = vec![vec![0.0; n]; NSCALE];
    for (s, filt) in radial.iter_mut().enumerate() {
        let f0 = 1.0 / (MIN_WAVELENGTH * MULT.powi(s as i32));
        for i in 0..n {
            let v = (-( (radius[i] / f0).ln().powi(2)) / (2.0 * log_sigma * log_sigma)).exp();
            filt[i] = v * lowpass[i];
        }
        filt[0] = 0.0;
    }

    let theta_sigma = std::f64::consts::PI / NORIENT as f64 / D_THETA_ON_SIGMA;
    let mut total_energy = vec![0.0; n];
    let mut total_an = vec![0.0; n];
    for o in 0..NORIENT {
        let angle = o as f64 * std::f64::consts::PI / NORIENT as f64;
        let spread: Vec<f64> = theta
            .iter()
            .map(|&t| {
                let ds = (t - angle).sin();
                let dc = (t - angle).cos();
                let dtheta = ds.atan2(dc).abs();
                (-dtheta * dtheta / (2.0 * theta_sigma * theta_sigma)).exp()
            })
            .collect();

        let mut sum_e = vec![0.0; n];
        let mut sum_o = vec![0.0; n];
        let mut sum_an = vec![0.0; n];
        let mut responses: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(NSCALE);
        for filt in radial.iter() {
            let mut buf: Vec<Complex<f64>> = spectrum
                .iter()
                .zip(filt.iter().zip(&spread))
                .map(|(&sv, (&rv, &av))| sv * rv * av)
                .collect();
            fft2(&mut buf, h, w, true);
            let even: Vec<f64> = buf.iter().map(|c| c.re).collect();
            let odd: Vec<f64> = buf.iter().map(|c| c.im).collect();
            for i in 0..n {
                sum_e[i] += even[i];
                sum_o[i] += odd[i];
                sum_an[i] += (even[i] * even[i] + odd[i] * odd[i]).sqrt();
            }
            responses.push((even, odd));
        }

        // noise threshold from the smallest-scale amplitude distribution
        let mut a0: Vec<f64> = responses[0]
            .0
            .iter()
            .zip(&responses[0].1)
            .map(|(&e, &od)| (e * e + od * od).sqrt())
            .collect();
        a0.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = a0[a0.len() / 2];
        let tau = median / (4.0f64.ln()).sqrt();
        let total_tau = tau * (1.0 - (1.0 / MULT).powi(NSCALE as i32)) / (1.0 - 1.0 / MULT);
        let noise_mean = total_tau * (std::f64::consts::PI / 2.0).sqrt();
        let noise_sigma = total_tau * ((4.0 - std::f64::consts::PI) / 2.0).sqrt();
        let threshold = noise_mean + NOISE_K * noise_sigma;

        for i in 0..n {
            let mag = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt();
            let (me, mo) = if mag > EPSILON {
                (sum_e[i] / mag, sum_o[i] / mag)
            } else {
                (0.0, 0.0)
            };
            let mut energy = 0.0;
            for (even, odd) in &responses {
                energy += even[i] * me + odd[i] * mo - (even[i] * mo - odd[i] * me).abs();
            }
            total_energy[i] += (energy - threshold).max(0.0);
            total_an[i] += sum_an[i];
        }
    }
    (0..n)
        .map(|i| total_energy[i] / (EPSILON + total_an[i]))
        .collect()
}

/// Scharr gradient magnitude ('same' extent, zero padding).
fn scharr_magnitude(img: &[f64], h: usize, w: usize) -> Vec<f64> {
    const KX: [[f64; 3]; 3] = [
        [3.0 / 16.0, 0.0, -3.0 / 16.0],
        [10.0 / 16.0, 0.0, -10.0 / 16.0],
        [3.0 / 16.0, 0.0, -3.0 / 16.0],
    ];
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (i, row) in KX.iter().enumerate() {
                for (j, &kv) in row.iter().enumerate() {
                    let yy = y as isize + i as isize - 1;
                    let xx = x as isize + j as isize - 1;
                    if yy < 0 || yy >= h as isize || xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let v = img[yy as usize * w + xx as usize];
                    gx += kv * v;
                    // gy kernel is the transpose
                    gy += KX[j][i] * v;
                }
            }
            out[y * w + x] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Real;
    use rand::Rng as _;
    use rand::SeedableRng as _;
    use rand_chacha::ChaCha8Rng;

    fn textured_image(seed: u64, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0 as Real; h * w];
        for y in 0..h {
            for x in 0..w {
                let stripes = (((x as f64) * 0.7).sin() * 0.3 + 0.5) as Real;
                let blob = if (x / 8 + y / 8) % 2 == 0 { 0.15 } else { -0.15 };
                let noise: Real = rng.gen_range(-0.02..0.02);
                data[y * w + x] = (stripes + blob as Real + noise).clamp(0.0, 1.0);
            }
        }
        Tensor::new(&[1, h, w], data).unwrap()
    }

    #[test]
    fn identity_is_one() {
        let img = textured_image(1, 48, 48);
        let s = fsim(&img, &img).unwrap();
        assert!((s - 1.0).abs() <= 1e-6, "fsim(x,x) = {s}");
    }

    #[test]
    fn symmetric() {
        let a = textured_image(2, 40, 40);
        let b = textured_image(3, 40, 40);
        let ab = fsim(&a, &b).unwrap();
        let ba = fsim(&b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-9);
    }

    #[test]
    fn in_unit_interval_and_discriminative() {
        let a = textured_image(4, 40, 40);
        let b = textured_image(5, 40, 40);
        let s = fsim(&a, &b).unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert!(s < 0.9999);
    }

    #[test]
    fn contrast_scaling_slightly_below_identity() {
        let a = textured_image(6, 40, 40);
        let b = a.map(|v| v * 0.9 + 0.05);
        let s = fsim(&a, &b).unwrap();
        assert!(s > 0.9 && s < 1.0, "fsim = {s}");
    }

    #[test]
    fn rejects_extent_mismatch() {
        let a = textured_image(7, 32, 32);
        let b = textured_image(8, 32, 36);
        assert!(matches!(fsim(&a, &b), Err(EvalError::ExtentMismatch { .. })));
    }

    #[test]
    fn phase_congruency_peaks_on_edges() {
        // a step edge should carry higher PC than flat regions
        let (h, w) = (32, 32);
        let mut data = vec![0.2; h * w];
        for y in 0..h {
            for x in 16..w {
                data[y * w + x] = 0.8;
            }
        }
        let pc = phase_congruency(&data.iter().map(|&v| v * 255.0).collect::<Vec<_>>(), h, w);
        let edge_mean: f64 = (0..h).map(|y| pc[y * w + 16]).sum::<f64>() / h as f64;
        let flat_mean: f64 = (0..h).map(|y| pc[y * w + 4]).sum::<f64>() / h as f64;
        assert!(
            edge_mean > 2.0 * flat_mean,
            "edge {edge_mean}, flat {flat_mean}"
        );
    }
}
