use super::{dot, norm2, DenseMatrix, Real};

/// ELU with unit alpha: `x` for `x > 0`, `exp(x) - 1` otherwise.
#[inline]
pub fn elu<F: Real>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of [`elu`]; the left derivative is used at 0 (both equal 1).
#[inline]
pub fn elu_grad<F: Real>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else {
        x.exp()
    }
}

pub fn elu_matrix<F: Real>(x: &DenseMatrix<F>) -> DenseMatrix<F> {
    x.map(elu)
}

/// `v / max(‖v‖₂, eps)`
pub fn l2_normalize<F: Real>(v: &[F], eps: F) -> Vec<F> {
    let n = norm2(v).max(eps);
    v.iter().map(|&x| x / n).collect()
}

/// Gradient of [`l2_normalize`] with respect to its input, given the
/// upstream gradient `g` of the normalised output.
pub fn l2_normalize_backward<F: Real>(v: &[F], g: &[F], eps: F) -> Vec<F> {
    let n = norm2(v);
    if n <= eps {
        return g.iter().map(|&x| x / eps).collect();
    }
    // (I - u uᵀ) g / n with u = v / n
    let proj = dot(v, g) / (n * n);
    v.iter()
        .zip(g)
        .map(|(&vi, &gi)| (gi - proj * vi) / n)
        .collect()
}

/// Divide every row by `max(‖row‖₂, eps)`.
pub fn l2_normalize_rows<F: Real>(x: &DenseMatrix<F>, eps: F) -> DenseMatrix<F> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let n = norm2(out.row(i)).max(eps);
        out.row_mut(i).iter_mut().for_each(|v| *v /= n);
    }
    out
}
