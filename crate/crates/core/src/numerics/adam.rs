use crate::error::{Error, Result};

use super::{DenseMatrix, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<DenseMatrix<F>>,
    pub second: Vec<DenseMatrix<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new(shapes: &[(usize, usize)], config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            first: shapes
                .iter()
                .map(|&(r, c)| DenseMatrix::zeros(r, c))
                .collect(),
            second: shapes
                .iter()
                .map(|&(r, c)| DenseMatrix::zeros(r, c))
                .collect(),
        }
    }
}

/// One bias-corrected Adam update of every tensor in `params`.
pub fn adam_step<F: Real>(
    params: &mut [&mut DenseMatrix<F>],
    grads: &[&DenseMatrix<F>],
    state: &mut AdamState<F>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.first[k].shape() {
            return Err(Error::Shape(format!(
                "adam tensor {k}: param {:?}, grad {:?}, state {:?}",
                p.shape(),
                g.shape(),
                state.first[k].shape()
            )));
        }
    }

    state.step += 1;
    let cfg = state.config;
    let b1 = F::c(cfg.beta1);
    let b2 = F::c(cfg.beta2);
    let one = F::one();
    let t = state.step as i32;
    let bc1 = one - F::c(cfg.beta1.powi(t));
    let bc2 = one - F::c(cfg.beta2.powi(t));
    let lr = F::c(cfg.lr);
    let eps = F::c(cfg.eps);

    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.first[k].as_mut_slice();
        let v = state.second[k].as_mut_slice();
        for (((pi, &gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
