//! Real scalar abstraction: the whole library is generic over `f32`/`f64`
//! through this trait, with `f64` being the precision all default
//! tolerances are calibrated for.

use num_complex::Complex;
use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar the library is generic over.
pub trait Real:
    Float + FromPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Convert an `f64` constant into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable")
    }

    /// Lossy view as `f64`, used for diagnostics and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over the library scalar.
pub type Cx<T> = Complex<T>;

/// Complex constant from `f64` parts.
#[inline]
pub fn cx<T: Real>(re: f64, im: f64) -> Cx<T> {
    Complex::new(T::of(re), T::of(im))
}

/// Real constant lifted into the complex plane.
#[inline]
pub fn cre<T: Real>(re: T) -> Cx<T> {
    Complex::new(re, T::zero())
}

/// Purely imaginary unit.
#[inline]
pub fn ci<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), T::one())
}

/// `exp(z) - 1` without cancellation for small `|z|`.
pub fn exp_m1_cx<T: Real>(z: Cx<T>) -> Cx<T> {
    if z.norm() < T::of(0.5) {
        // Horner form of z * (1 + z/2 (1 + z/3 (...)))
        let mut acc = Cx::new(T::zero(), T::zero());
        for k in (2..=20).rev() {
            acc = (acc + Cx::new(T::one(), T::zero())) * z / cre(T::of(k as f64));
        }
        (acc + Cx::new(T::one(), T::zero())) * z
    } else {
        z.exp() - Cx::new(T::one(), T::zero())
    }
}

/// Numerical tolerances used across the library.
///
/// Values are calibrated for `f64`; instantiating at `f32` is supported for
/// the algebraic paths but the defaults below are then far below `f32`
/// resolution and callers should override them.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances<T: Real> {
    /// Absolute floor for approximate equality.
    pub atol: T,
    /// Relative tolerance for approximate equality.
    pub rtol: T,
    /// Determinant magnitude (relative to a norm scale) below which a matrix
    /// is reported singular rather than inverted.
    pub eps_sing: T,
    /// Acceptable Lyapunov-equation residual, relative to operator scale.
    pub eps_lyap: T,
    /// Minimal distance from a spectral-parameter sample to an eigenvalue.
    pub eps_spec: T,
    /// |beta'| mask threshold in PDE residuals (the equation divides by it).
    pub eps_beta: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Tolerances {
            atol: T::of(1e-12),
            rtol: T::of(1e-10),
            eps_sing: T::of(1e-12),
            eps_lyap: T::of(1e-10),
            eps_spec: T::of(1e-8),
            eps_beta: T::of(1e-8),
        }
    }
}
