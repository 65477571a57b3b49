//! Class-specific residual attention pooling.
//!
//! For a score matrix `s` with one row per piece of evidence and one column
//! per type, each temperature `T` yields a pooled vector
//! `s_T[j] = Σ_i softmax_i(T · s[i][j]) · s[i][j]`. The returned logit sums
//! `s_T + mean_i s[i]` over all temperatures, so the mean term is counted
//! once per head.

use crate::error::{Error, Result};

use super::{DenseMatrix, Real};

/// Softmax weights over column `j` of `s` at temperature `t`, written to `w`.
fn column_softmax<F: Real>(s: &DenseMatrix<F>, j: usize, t: F, w: &mut [F]) {
    let n = s.rows();
    let mut max = F::neg_infinity();
    for i in 0..n {
        max = max.max(t * s.get(i, j));
    }
    let mut z = F::zero();
    for (i, wi) in w.iter_mut().enumerate().take(n) {
        *wi = (t * s.get(i, j) - max).exp();
        z += *wi;
    }
    for wi in w.iter_mut().take(n) {
        *wi /= z;
    }
}

fn check<F: Real>(s: &DenseMatrix<F>, temps: &[F]) -> Result<()> {
    if s.rows() == 0 {
        return Err(Error::Shape("csra_pool on an empty score matrix".into()));
    }
    if temps.is_empty() {
        return Err(Error::Shape(
            "csra_pool needs at least one temperature".into(),
        ));
    }
    Ok(())
}

/// Pre-sigmoid pooled logits, one per column of `s`.
pub fn csra_pool<F: Real>(s: &DenseMatrix<F>, temps: &[F]) -> Result<Vec<F>> {
    check(s, temps)?;
    let (n, cols) = s.shape();
    let inv_n = F::one() / F::c(n as f64);
    let heads = F::c(temps.len() as f64);
    let mut w = vec![F::zero(); n];
    let mut out = Vec::with_capacity(cols);
    for j in 0..cols {
        let mean = (0..n).map(|i| s.get(i, j)).sum::<F>() * inv_n;
        let mut acc = heads * mean;
        for &t in temps {
            column_softmax(s, j, t, &mut w);
            acc += (0..n).map(|i| w[i] * s.get(i, j)).sum::<F>();
        }
        out.push(acc);
    }
    Ok(out)
}

/// Gradient of `Σ_j grad_out[j] · csra_pool(s)[j]` with respect to `s`.
pub fn csra_pool_backward<F: Real>(
    s: &DenseMatrix<F>,
    temps: &[F],
    grad_out: &[F],
) -> Result<DenseMatrix<F>> {
    check(s, temps)?;
    let (n, cols) = s.shape();
    if grad_out.len() != cols {
        return Err(Error::Shape(format!(
            "csra gradient has {} entries for {cols} columns",
            grad_out.len()
        )));
    }
    let inv_n = F::one() / F::c(n as f64);
    let heads = F::c(temps.len() as f64);
    let mut w = vec![F::zero(); n];
    let mut grad = DenseMatrix::zeros(n, cols);
    for (j, &g) in grad_out.iter().enumerate() {
        if g == F::zero() {
            continue;
        }
        for i in 0..n {
            grad.set(i, j, heads * inv_n * g);
        }
        for &t in temps {
            column_softmax(s, j, t, &mut w);
            let pooled: F = (0..n).map(|i| w[i] * s.get(i, j)).sum();
            // d s_T / d s_i = w_i (1 + T (s_i - s_T))
            for (i, &wi) in w.iter().enumerate() {
                let d = wi * (F::one() + t * (s.get(i, j) - pooled));
                let cur = grad.get(i, j);
                grad.set(i, j, cur + g * d);
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_row_is_2h_times_score() {
        let s = DenseMatrix::from_rows(&[vec![0.3f64, -1.5, 2.0]]).unwrap();
        let temps = [1.0, 2.0, 5.0];
        let out = csra_pool(&s, &temps).unwrap();
        for (o, v) in out.iter().zip(s.row(0)) {
            assert_abs_diff_eq!(*o, 6.0 * v, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_temperature_is_mean() {
        let s = DenseMatrix::from_rows(&[vec![0.0f64], vec![2.0]]).unwrap();
        // s_T = 1, mean = 1
        assert_abs_diff_eq!(csra_pool(&s, &[0.0]).unwrap()[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn unit_temperature_matches_direct_softmax() {
        let s = DenseMatrix::from_rows(&[vec![0.0f64], vec![2.0]]).unwrap();
        let e2 = 2.0f64.exp();
        // brute force: weights 1/(1+e²), e²/(1+e²)
        let s_t = 0.0 * 1.0 / (1.0 + e2) + 2.0 * e2 / (1.0 + e2);
        assert_abs_diff_eq!(s_t, 2.0 * e2 / (1.0 + e2), epsilon = 1e-15);
        assert_abs_diff_eq!(
            csra_pool(&s, &[1.0]).unwrap()[0],
            s_t + 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn errors_on_empty() {
        let s = DenseMatrix::<f64>::zeros(0, 3);
        assert!(csra_pool(&s, &[1.0]).is_err());
        let s = DenseMatrix::<f64>::zeros(1, 3);
        assert!(csra_pool(&s, &[]).is_err());
    }

    #[test]
    fn backward_matches_central_differences() {
        let s = DenseMatrix::from_rows(&[
            vec![0.2f64, -0.4, 1.1],
            vec![-0.7, 0.9, 0.3],
            vec![0.5, 0.1, -1.3],
        ])
        .unwrap();
        let temps = [0.0, 1.0, 3.5];
        let g = [0.7, -1.1, 0.4];
        let analytic = csra_pool_backward(&s, &temps, &g).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut p = s.clone();
                let mut m = s.clone();
                p.set(i, j, s.get(i, j) + h);
                m.set(i, j, s.get(i, j) - h);
                let f = |x: &DenseMatrix<f64>| -> f64 {
                    csra_pool(x, &temps)
                        .unwrap()
                        .iter()
                        .zip(&g)
                        .map(|(a, b)| a * b)
                        .sum()
                };
                let numeric = (f(&p) - f(&m)) / (2.0 * h);
                assert_abs_diff_eq!(analytic.get(i, j), numeric, epsilon = 1e-8);
            }
        }
    }
}
