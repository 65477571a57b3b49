use crate::error::{Error, Result};

use super::Real;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compare the analytic gradient returned by `loss_fn` against central
/// differences with step `h`.
///
/// `loss_fn` maps a flat parameter vector to `(loss, gradient)`. Only the
/// coordinates in `coords` are perturbed; `None` checks all of them.
/// The relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn finite_difference_check<F, L>(
    mut loss_fn: L,
    params: &[F],
    h: F,
    coords: Option<&[usize]>,
) -> Result<GradCheckReport>
where
    F: Real,
    L: FnMut(&[F]) -> Result<(F, Vec<F>)>,
{
    if h <= F::zero() {
        return Err(Error::Config(
            "finite difference step must be positive".into(),
        ));
    }
    let (loss, grad) = loss_fn(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss}")));
    }
    if grad.len() != params.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries for {} parameters",
            grad.len(),
            params.len()
        )));
    }

    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coord: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut x = params.to_vec();
    for &k in coords {
        let orig = x[k];
        x[k] = orig + h;
        let (fp, _) = loss_fn(&x)?;
        x[k] = orig - h;
        let (fm, _) = loss_fn(&x)?;
        x[k] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!("loss at coordinate {k}")));
        }
        let numeric = ((fp - fm) / (h + h)).f64();
        let analytic = grad[k].f64();
        let denom = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        let rel = (analytic - numeric).abs() / denom;
        report.checked += 1;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coord = k;
            report.analytic = analytic;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
