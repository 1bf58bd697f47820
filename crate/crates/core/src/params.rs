//! Vessel parameter triples (sigma1, sigma2, gamma) and the fundamental
//! solutions of the constant-coefficient input LDE
//!
//!     lambda sigma2 u - sigma1 u' + gamma u = 0.
//!
//! With constant coefficients the fundamental matrix is the exponential
//! Phi(lambda, x) = exp(x sigma1^{-1}(lambda sigma2 + gamma)), computed by
//! the exact 2x2 closed form. The output LDE replaces gamma by a potential
//! gamma_*(x) and is integrated numerically (classical RK4).

use crate::error::{Result, VesselError};
use crate::matrix::{expm2, mat2, Matrix};
use crate::scalar::{cre, cx, Cx, Real, Tolerances};

/// The triple of 2x2 parameter matrices defining an LDE family.
///
/// Invariants: sigma1 is selfadjoint and invertible, sigma2 is selfadjoint,
/// gamma is anti-selfadjoint.
#[derive(Debug, Clone)]
pub struct VesselParameters<T: Real> {
    pub sigma1: Matrix<T>,
    pub sigma2: Matrix<T>,
    pub gamma: Matrix<T>,
    sigma1_inv: Matrix<T>,
}

impl<T: Real> VesselParameters<T> {
    pub fn new(sigma1: Matrix<T>, sigma2: Matrix<T>, gamma: Matrix<T>) -> Result<Self> {
        let tol = Tolerances::<T>::default();
        let check_2x2 = |m: &Matrix<T>, name: &str| -> Result<()> {
            if m.rows() != 2 || m.cols() != 2 {
                return Err(VesselError::Dimension(format!("{name} must be 2x2")));
            }
            Ok(())
        };
        check_2x2(&sigma1, "sigma1")?;
        check_2x2(&sigma2, "sigma2")?;
        check_2x2(&gamma, "gamma")?;
        let close = |a: &Matrix<T>, b: &Matrix<T>| a.approx_eq(b, tol.atol, tol.rtol);
        if !close(&sigma1, &sigma1.adjoint()) {
            return Err(VesselError::Invalid("sigma1 must be selfadjoint".into()));
        }
        if !close(&sigma2, &sigma2.adjoint()) {
            return Err(VesselError::Invalid("sigma2 must be selfadjoint".into()));
        }
        if !close(&gamma, &gamma.adjoint().map(|z| -z)) {
            return Err(VesselError::Invalid("gamma must be anti-selfadjoint".into()));
        }
        let sigma1_inv = sigma1.inverse(tol.eps_sing)?;
        Ok(VesselParameters { sigma1, sigma2, gamma, sigma1_inv })
    }

    pub fn sigma1_inv(&self) -> &Matrix<T> {
        &self.sigma1_inv
    }

    /// The coefficient matrix of the input LDE in explicit form:
    /// u' = sigma1^{-1}(lambda sigma2 + gamma) u.
    pub fn input_coeff(&self, lambda: Cx<T>) -> Matrix<T> {
        &self.sigma1_inv * &(&self.sigma2.scale(lambda) + &self.gamma)
    }

    /// Canonical-systems preset: sigma1 = [[0,i],[-i,0]], sigma2 = I, gamma = 0.
    pub fn canonical() -> Self {
        let sigma1 = mat2(cx(0.0, 0.0), cx(0.0, 1.0), cx(0.0, -1.0), cx(0.0, 0.0));
        let sigma2 = Matrix::identity(2);
        let gamma = Matrix::zeros(2, 2);
        Self::new(sigma1, sigma2, gamma).expect("canonical preset is valid")
    }

    /// Preset used for the KdV realization: sigma1 = [[0,1],[1,0]],
    /// sigma2 = diag(1,0), gamma = diag(0,i). The associated PDE is not
    /// verified here; the preset exists for building and evolving vessels.
    pub fn kdv() -> Self {
        let sigma1 = mat2(cx(0.0, 0.0), cx(1.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0));
        let sigma2 = mat2(cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0));
        let gamma = mat2(cx(0.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(0.0, 1.0));
        Self::new(sigma1, sigma2, gamma).expect("kdv preset is valid")
    }

    /// Preset used for the NLS realization: sigma1 = I,
    /// sigma2 = diag(1,-1)/2, gamma = 0. Same caveat as [`Self::kdv`].
    pub fn nls() -> Self {
        let sigma1 = Matrix::identity(2);
        let sigma2 = mat2(cx(0.5, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(-0.5, 0.0));
        let gamma = Matrix::zeros(2, 2);
        Self::new(sigma1, sigma2, gamma).expect("nls preset is valid")
    }

    /// Whether this is (entrywise) the canonical preset.
    pub fn is_canonical(&self) -> bool {
        let c = Self::canonical();
        let tol = Tolerances::<T>::default();
        self.sigma1.approx_eq(&c.sigma1, tol.atol, tol.rtol)
            && self.sigma2.approx_eq(&c.sigma2, tol.atol, tol.rtol)
            && self.gamma.approx_eq(&c.gamma, tol.atol, tol.rtol)
    }

    /// Fundamental solution Phi(lambda, x) of the input LDE with
    /// Phi(lambda, 0) = I.
    pub fn fundamental_input(&self, lambda: Cx<T>, x: T) -> Matrix<T> {
        expm2(&self.input_coeff(lambda).scale_re(x))
    }
}

/// Closed form of the canonical-preset fundamental matrix,
/// [[cosh(lx), i sinh(lx)], [-i sinh(lx), cosh(lx)]]. Kept as an
/// independent oracle against the exponential path.
pub fn canonical_phi_closed_form<T: Real>(lambda: Cx<T>, x: T) -> Matrix<T> {
    let lx = lambda * cre(x);
    let ch = lx.cosh();
    let sh = lx.sinh();
    let i = cx::<T>(0.0, 1.0);
    mat2(ch, i * sh, -i * sh, ch)
}

/// RK4 integration of the output LDE fundamental matrix
///
///     Phi_*' = sigma1^{-1}(lambda sigma2 + gamma_*(x)) Phi_*,
///
/// anchored to the identity at `x_from`, integrated to `x_to` with
/// `n_steps` uniform steps; the potential is an arbitrary callable.
pub fn fundamental_output_fn<T: Real>(
    params: &VesselParameters<T>,
    gamma_star: &dyn Fn(T) -> Matrix<T>,
    lambda: Cx<T>,
    x_from: T,
    x_to: T,
    n_steps: usize,
) -> Matrix<T> {
    let mut phi: Matrix<T> = Matrix::identity(2);
    if x_to == x_from || n_steps == 0 {
        return phi;
    }
    let h = (x_to - x_from) / T::of(n_steps as f64);
    let rhs = |x: T, m: &Matrix<T>| -> Matrix<T> {
        let coeff = &self_coeff(params, gamma_star, lambda, x);
        coeff * m
    };
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    let mut x = x_from;
    for _ in 0..n_steps {
        let k1 = rhs(x, &phi);
        let k2 = rhs(x + h * half, &(&phi + &k1.scale_re(h * half)));
        let k3 = rhs(x + h * half, &(&phi + &k2.scale_re(h * half)));
        let k4 = rhs(x + h, &(&phi + &k3.scale_re(h)));
        let incr = &(&k1 + &k4) + &(&k2 + &k3).scale_re(two);
        phi = &phi + &incr.scale_re(h * sixth);
        x = x + h;
    }
    phi
}

fn self_coeff<T: Real>(
    params: &VesselParameters<T>,
    gamma_star: &dyn Fn(T) -> Matrix<T>,
    lambda: Cx<T>,
    x: T,
) -> Matrix<T> {
    params.sigma1_inv() * &(&params.sigma2.scale(lambda) + &gamma_star(x))
}

/// A 2x2-matrix-valued potential sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct SampledPotential<T: Real> {
    pub x0: T,
    pub dx: T,
    pub values: Vec<Matrix<T>>,
}

impl<T: Real> SampledPotential<T> {
    pub fn x_max(&self) -> T {
        self.x0 + self.dx * T::of((self.values.len() - 1) as f64)
    }

    fn contains(&self, x: T) -> bool {
        let lo = self.x0.min(self.x_max());
        let hi = self.x0.max(self.x_max());
        let slack = self.dx.abs() * T::of(1e-9);
        x >= lo - slack && x <= hi + slack
    }

    /// Cubic (4-point Lagrange) interpolation of the potential.
    fn interp(&self, x: T) -> Matrix<T> {
        let n = self.values.len();
        if n == 1 {
            return self.values[0].clone();
        }
        let pos = ((x - self.x0) / self.dx).as_f64();
        let i0 = ((pos.floor() as isize - 1).max(0) as usize).min(n.saturating_sub(4));
        let count = 4.min(n);
        let mut acc = Matrix::zeros(2, 2);
        for a in 0..count {
            let xa = self.x0 + self.dx * T::of((i0 + a) as f64);
            let mut w = T::one();
            for b in 0..count {
                if a == b {
                    continue;
                }
                let xb = self.x0 + self.dx * T::of((i0 + b) as f64);
                w = w * (x - xb) / (xa - xb);
            }
            acc = &acc + &self.values[i0 + a].scale(cre(w));
        }
        acc
    }
}

/// Fundamental solution of the output LDE for a grid-sampled potential.
/// Anchored at x = 0 (which must lie in the sampled range), integrates with
/// RK4 at the grid resolution; interior sub-steps interpolate the potential
/// cubically so the fourth-order accuracy of the integrator is preserved.
pub fn fundamental_output<T: Real>(
    params: &VesselParameters<T>,
    gamma_star: &SampledPotential<T>,
    lambda: Cx<T>,
    x: T,
) -> Result<Matrix<T>> {
    if !gamma_star.contains(x) || !gamma_star.contains(T::zero()) {
        return Err(VesselError::OutOfDomain {
            x: x.as_f64(),
            lo: gamma_star.x0.min(gamma_star.x_max()).as_f64(),
            hi: gamma_star.x0.max(gamma_star.x_max()).as_f64(),
        });
    }
    let span = x.abs();
    if span == T::zero() {
        return Ok(Matrix::identity(2));
    }
    let steps = ((span / gamma_star.dx.abs()).as_f64().ceil() as usize).max(1);
    let f = |y: T| gamma_star.interp(y);
    Ok(fundamental_output_fn(params, &f, lambda, T::zero(), x, steps))
}
