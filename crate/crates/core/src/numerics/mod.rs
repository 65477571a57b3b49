//! Dense numerical kernel used by the aggregation model.
//!
//! Everything is generic over [`Real`] so that training runs in `f32` while
//! gradient verification runs the identical code path in `f64`.

mod activation;
mod adam;
mod csra;
mod gradcheck;
mod matrix;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use activation::{
    elu, elu_grad, elu_matrix, l2_normalize, l2_normalize_backward, l2_normalize_rows,
};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use csra::{csra_pool, csra_pool_backward};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use matrix::DenseMatrix;

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn c(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("constant representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("finite float")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `y += a * x`
#[inline]
pub fn axpy<F: Real>(a: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn dot<F: Real>(x: &[F], y: &[F]) -> F {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

#[inline]
pub fn norm2<F: Real>(x: &[F]) -> F {
    dot(x, x).sqrt()
}

#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}
