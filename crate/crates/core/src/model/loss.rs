//! Reweighted binary cross-entropy losses.
//!
//! Both losses return the value and its gradient with respect to the
//! probabilities. The reweighting factor `f(p)` is treated as a constant
//! weight: no gradient flows through it.

use crate::error::{Error, Result};
use crate::kg::TypeId;
use crate::numerics::Real;

use super::LossSign;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Down-weights negatives whose probability is very low (easy) or very
/// high (likely false negatives). Peaks at `f(0.5) = 1`.
pub fn reweight(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(x));
    }
    Ok(reweight_weight(x))
}

#[inline]
pub(crate) fn reweight_weight<F: Real>(x: F) -> F {
    let two = F::c(2.0);
    if x <= F::c(0.5) {
        F::c(3.0) * x - two * x * x
    } else {
        x - two * x * x + F::one()
    }
}

#[inline]
fn clamp<F: Real>(p: F) -> (F, bool) {
    let lo = F::c(PROB_CLAMP);
    let hi = F::one() - lo;
    if p < lo {
        (lo, true)
    } else if p > hi {
        (hi, true)
    } else {
        (p, false)
    }
}

#[inline]
fn sign_factor<F: Real>(sign: LossSign) -> F {
    match sign {
        LossSign::NegLogLikelihood => F::one(),
        LossSign::AsPrinted => -F::one(),
    }
}

/// `f(clamp(p))` for every entry: the constant negative-term weights.
pub fn reweight_row<F: Real>(probs: &[F]) -> Vec<F> {
    probs.iter().map(|&p| reweight_weight(clamp(p).0)).collect()
}

/// SFNA loss for one entity. `positives` lists its known types.
pub fn sfna_loss<F: Real>(probs: &[F], positives: &[TypeId], sign: LossSign) -> (F, Vec<F>) {
    sfna_loss_weighted(probs, positives, &reweight_row(probs), sign)
}

/// [`sfna_loss`] with the negative-term weights supplied by the caller.
pub fn sfna_loss_weighted<F: Real>(
    probs: &[F],
    positives: &[TypeId],
    weights: &[F],
    sign: LossSign,
) -> (F, Vec<F>) {
    let mut is_pos = vec![false; probs.len()];
    for t in positives {
        is_pos[t.index()] = true;
    }
    let neg = sign_factor::<F>(sign);
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(probs.len());
    for ((&p, &pos), &w) in probs.iter().zip(&is_pos).zip(weights) {
        let (pc, clamped) = clamp(p);
        let g = if pos {
            loss -= pc.ln();
            -F::one() / pc
        } else {
            loss -= neg * w * (F::one() - pc).ln();
            neg * w / (F::one() - pc)
        };
        grad.push(if clamped { F::zero() } else { g });
    }
    (loss, grad)
}

/// Distillation loss aligning student probabilities `student` with the
/// fixed teacher row `teacher`.
pub fn kd_loss<F: Real>(teacher: &[F], student: &[F], sign: LossSign) -> (F, Vec<F>) {
    kd_loss_weighted(teacher, student, &reweight_row(student), sign)
}

/// [`kd_loss`] with the student-side weights `f(q)` supplied by the caller.
pub fn kd_loss_weighted<F: Real>(
    teacher: &[F],
    student: &[F],
    weights: &[F],
    sign: LossSign,
) -> (F, Vec<F>) {
    debug_assert_eq!(teacher.len(), student.len());
    let neg = sign_factor::<F>(sign);
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(student.len());
    for ((&p, &q), &f) in teacher.iter().zip(student).zip(weights) {
        let (qc, clamped) = clamp(q);
        let w = (F::one() - p) * f;
        loss -= neg * w * (F::one() - qc).ln() + p * qc.ln();
        let g = neg * w / (F::one() - qc) - p / qc;
        grad.push(if clamped { F::zero() } else { g });
    }
    (loss, grad)
}

/// Chain `dL/dp` through `p = sigmoid(x)`.
pub fn logit_grad<F: Real>(probs: &[F], dl_dp: &[F]) -> Vec<F> {
    probs
        .iter()
        .zip(dl_dp)
        .map(|(&p, &g)| g * p * (F::one() - p))
        .collect()
}
