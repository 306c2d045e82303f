//! Central-difference verification of every differentiable op on the
//! generator loss path. Components are registered by name so the CLI
//! selfcheck and the test suite share one implementation.

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::features::Tap;
use crate::tensor::{Real, Tensor};

use super::tape::{Tape, Var};
use super::TrainError;

/// Finite-difference step size.
#[cfg(not(feature = "f64"))]
pub const FD_EPS: Real = 1e-3;
#[cfg(feature = "f64")]
pub const FD_EPS: Real = 1e-5;

/// Acceptance threshold on the max relative error.
#[cfg(not(feature = "f64"))]
pub const FD_TOL: f64 = 1e-3;
#[cfg(feature = "f64")]
pub const FD_TOL: f64 = 1e-6;

pub const COMPONENTS: &[&str] = &[
    "conv2d",
    "relu",
    "leaky_relu",
    "sigmoid",
    "max_pool2",
    "add",
    "pseudo_feature_loss",
    "tv_loss",
    "lsgan",
    "generator",
];

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub component: String,
    pub trials: usize,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= FD_TOL
    }
}

/// Runs `trials` randomized checks of one component on roughly
/// `extent`-sized instances and reports the worst relative error seen.
pub fn gradient_check(
    component: &str,
    trials: usize,
    extent: usize,
    seed: u64,
) -> Result<GradCheckReport, TrainError> {
    if !COMPONENTS.contains(&component) {
        return Err(TrainError::UnknownComponent(component.to_string()));
    }
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64 * 7919));
        let err = check_once(component, extent, &mut rng)?;
        worst = worst.max(err);
    }
    Ok(GradCheckReport {
        component: component.to_string(),
        trials,
        max_rel_err: worst,
    })
}

pub fn gradient_check_all(
    trials: usize,
    extent: usize,
    seed: u64,
) -> Result<Vec<GradCheckReport>, TrainError> {
    COMPONENTS
        .iter()
        .map(|c| gradient_check(c, trials, extent, seed))
        .collect()
}

/// Random values kept away from relu/pool decision boundaries so the
/// finite-difference window never crosses a kink.
fn safe_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<Real> {
    (0..n)
        .map(|_| {
            let mut v: Real = rng.gen_range(-1.0..1.0);
            if v.abs() < 0.1 {
                v += if v >= 0.0 { 0.15 } else { -0.15 };
            }
            v
        })
        .collect()
}

/// Values made pairwise well-separated (pooling argmax stability).
fn separated_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<Real> {
    let mut order: Vec<usize> = (0..n).collect();
    // Fisher-Yates for a random rank assignment
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let base: Real = rng.gen_range(-0.5..0.5);
    order
        .into_iter()
        .map(|rank| base + rank as Real * 0.07)
        .collect()
}

fn check_once(component: &str, extent: usize, rng: &mut ChaCha8Rng) -> Result<f64, TrainError> {
    let e = extent.clamp(4, 6);
    match component {
        "conv2d" => {
            let x = Tensor::new(&[2, e, e], safe_values(rng, 2 * e * e))?;
            let w = Tensor::new(&[2, 2, 3, 3], safe_values(rng, 36))?;
            let b = Tensor::new(&[2], safe_values(rng, 2))?;
            check_against_fd(&[x, w, b], |tape, leaves| {
                let c = tape.conv2d(leaves[0], leaves[1], Some(leaves[2]), 1, 1)?;
                Ok(tape.mean_sq(c, 0.2))
            })
        }
        "relu" => {
            let x = Tensor::new(&[1, e, e], safe_values(rng, e * e))?;
            check_against_fd(&[x], |tape, leaves| {
                let r = tape.relu(leaves[0]);
                Ok(tape.mean_sq(r, 0.1))
            })
        }
        "leaky_relu" => {
            let x = Tensor::new(&[1, e, e], safe_values(rng, e * e))?;
            check_against_fd(&[x], |tape, leaves| {
                let r = tape.leaky_relu(leaves[0], 0.2);
                Ok(tape.mean_sq(r, -0.1))
            })
        }
        "sigmoid" => {
            let x = Tensor::new(&[1, e, e], safe_values(rng, e * e))?;
            check_against_fd(&[x], |tape, leaves| {
                let s = tape.sigmoid(leaves[0]);
                Ok(tape.mean_sq(s, 0.4))
            })
        }
        "max_pool2" => {
            let x = Tensor::new(&[1, e, e], separated_values(rng, e * e))?;
            check_against_fd(&[x], |tape, leaves| {
                let p = tape.max_pool2(leaves[0]);
                Ok(tape.mean_sq(p, 0.0))
            })
        }
        "add" => {
            let a = Tensor::new(&[1, e, e], safe_values(rng, e * e))?;
            let b = Tensor::new(&[1, e, e], safe_values(rng, e * e))?;
            check_against_fd(&[a, b], |tape, leaves| {
                let s = tape.add(leaves[0], leaves[1]);
                Ok(tape.mean_sq(s, 0.3))
            })
        }
        "pseudo_feature_loss" => {
            let x = Tensor::new(&[2, e, e], safe_values(rng, 2 * e * e))?;
            let m = (e - 2) * (e - 2);
            let targets = Tensor::new(&[m, 2, 3, 3], safe_values(rng, m * 18))?;
            check_against_fd(&[x], move |tape, leaves| {
                tape.patch_sq_loss(leaves[0], 3, Tap::RELU1_1, targets.clone())
            })
        }
        "tv_loss" => {
            let x = Tensor::new(&[1, e, e], safe_values(rng, e * e))?;
            check_against_fd(&[x], |tape, leaves| Ok(tape.tv_loss(leaves[0])))
        }
        "lsgan" => {
            let x = Tensor::new(&[1, e, e], safe_values(rng, e * e))?;
            check_against_fd(&[x], |tape, leaves| Ok(tape.mean_sq(leaves[0], 1.0)))
        }
        "generator" => {
            // small residual stack ending in the sigmoid squash, driven
            // through a composite loss like L_G; resample until the stem
            // pre-activations clear the leaky-relu kink by a wide margin,
            // otherwise the finite-difference window straddles it
            // resample until every stem pre-activation clears the
            // leaky-relu kink by far more than the finite-difference step
            // can shift it; a straddled kink is a fixture artifact, not a
            // gradient bug
            let mut attempts = 0;
            let (x, stem_w, stem_b) = loop {
                attempts += 1;
                let x = Tensor::new(
                    &[1, e, e],
                    safe_values(rng, e * e).iter().map(|v| v.abs()).collect(),
                )?;
                let stem_w = Tensor::new(&[2, 3, 3, 3], safe_values(rng, 54))?;
                let stem_b = Tensor::new(&[2], safe_values(rng, 2))?;
                let mut rgb_data = Vec::with_capacity(3 * e * e);
                for _ in 0..3 {
                    rgb_data.extend_from_slice(x.data());
                }
                let rgb = Tensor::new(&[3, e, e], rgb_data)?;
                let padded = crate::features::zero_pad(&rgb, 1);
                let mut pre = crate::tensor::conv2d_valid(&padded, &stem_w, 1)?;
                crate::features::add_channel_bias(&mut pre, stem_b.data());
                if attempts >= 200 || pre.data().iter().all(|v| v.abs() > 0.05) {
                    break (x, stem_w, stem_b);
                }
            };
            // small head weights keep the sigmoid well away from its
            // saturated tails, where the analytic gradient vanishes under
            // single-precision evaluation noise
            let head_w = Tensor::new(
                &[1, 2, 3, 3],
                safe_values(rng, 18).iter().map(|v| 0.2 * v).collect(),
            )?;
            let head_b = Tensor::new(&[1], safe_values(rng, 1).iter().map(|v| 0.2 * v).collect())?;
            check_against_fd(&[stem_w, stem_b, head_w, head_b, x], |tape, leaves| {
                let rgb = tape.replicate_gray(leaves[4]);
                let s = tape.conv2d(rgb, leaves[0], Some(leaves[1]), 1, 1)?;
                let s = tape.leaky_relu(s, 0.2);
                let h = tape.add(s, s);
                let raw = tape.conv2d(h, leaves[2], Some(leaves[3]), 1, 1)?;
                let y = tape.sigmoid(raw);
                let adv = tape.mean_sq(y, 1.0);
                let tv = tape.tv_loss(y);
                Ok(tape.sum_weighted(vec![(adv, 2.0), (tv, 0.5)]))
            })
        }
        _ => Err(TrainError::UnknownComponent(component.to_string())),
    }
}

/// Builds the graph once for analytic gradients and re-evaluates it under
/// per-element perturbations; returns the max relative error over all
/// checked leaves.
fn check_against_fd(
    inputs: &[Tensor],
    build: impl Fn(&mut Tape, &[Var]) -> Result<Var, TrainError>,
) -> Result<f64, TrainError> {
    let eval = |tensors: &[Tensor]| -> Result<f64, TrainError> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &leaves)?;
        Ok(tape.scalar_f64(loss))
    };
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &leaves)?;
    let grads = tape.backward(loss)?;

    // gradients of all leaves concatenated into one vector; the relative
    // error is taken over the whole vector so evaluation noise on leaves
    // with few elements (biases) cannot dominate
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (li, input) in inputs.iter().enumerate() {
        analytic.extend(
            grads[leaves[li].0]
                .as_ref()
                .map(|t| t.data().to_vec())
                .unwrap_or_else(|| vec![0.0; input.len()]),
        );
        for i in 0..input.len() {
            let mut work: Vec<Tensor> = inputs.to_vec();
            work[li].data_mut()[i] = input.data()[i] + FD_EPS;
            let plus_x = work[li].data()[i];
            let fplus = eval(&work)?;
            work[li].data_mut()[i] = input.data()[i] - FD_EPS;
            let minus_x = work[li].data()[i];
            let fminus = eval(&work)?;
            // divide by the actually-representable perturbation
            numeric.push((fplus - fminus) / (plus_x as f64 - minus_x as f64));
        }
    }
    let mut diff = 0.0f64;
    let mut na = 0.0f64;
    let mut nn = 0.0f64;
    for (&a, &n) in analytic.iter().zip(&numeric) {
        let a = a as f64;
        diff += (a - n) * (a - n);
        na += a * a;
        nn += n * n;
    }
    Ok(diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-8))
}
