//! Adam with bias correction. Moments are held in f64 so the update is
//! identical across thread counts and accumulation orders.

use crate::tensor::Real;

use super::TrainError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Optimizer state for one parameter group (a fixed-order list of flat
/// parameter slices).
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One Adam step over a parameter group; `params[i]` and `grads[i]` must
/// match the sizes the state was created with.
pub fn adam_step(
    params: &mut [&mut [Real]],
    grads: &[&[Real]],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::ParamGroupMismatch {
            params: params.len(),
            grads: grads.len(),
            state: state.m.len(),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(TrainError::ParamGroupMismatch {
                params: p.len(),
                grads: g.len(),
                state: m.len(),
            });
        }
        for i in 0..p.len() {
            let gi = g[i] as f64;
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] = (p[i] as f64 - lr * mhat / (vhat.sqrt() + EPS)) as Real;
        }
    }
    Ok(())
}
