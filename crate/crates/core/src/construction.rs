//! Standard construction of prevessels from spectral data, time evolution,
//! and the built-in soliton generators.
//!
//! For diagonal generators A = diag(lambda_j), A_zeta = diag(mu_l) the
//! residue form of the construction collapses to per-row/per-column matrix
//! exponentials
//!
//!     row_j B(x,t) = row_j(B0) exp(-((x-x0) + i lambda_j t) K_j),
//!     col_l C(x,t) = exp(((x-x0) - i mu_l t) N_l) col_l(C0),
//!
//! with K_j = (lambda_j sigma2 + gamma) sigma1^{-1} and
//! N_l = sigma1^{-1}(-mu_l sigma2 + gamma). These satisfy the translation
//! equations in x and the evolutionary equations in t simultaneously, and
//! they reduce to the anchor operators at (x0, 0). X is produced by exact
//! integration of exponential sums: first along t at the anchor, then along
//! x, so the Lyapunov equation holds at every point to rounding accuracy.

use crate::error::{Result, VesselError};
use crate::exppoly::{exp_of, ExpMat2};
use crate::matrix::{expm2, Matrix};
use crate::params::VesselParameters;
use crate::scalar::{cre, cx, Cx, Real, Tolerances};
use crate::vessel::{NodeState, VesselState};

/// Eigenvalue lists and anchor operators defining a node at (x0, 0).
#[derive(Debug, Clone)]
pub struct SpectralData<T: Real> {
    /// Eigenvalues of A (length n).
    pub lambdas: Vec<Cx<T>>,
    /// Eigenvalues of A_zeta (length n).
    pub mus: Vec<Cx<T>>,
    /// Anchor input map, n x 2.
    pub b0: Matrix<T>,
    /// Anchor output map, 2 x n.
    pub c0: Matrix<T>,
    /// Anchor coupling operator, n x n.
    pub x0: Matrix<T>,
    /// Anchor coordinate.
    pub anchor: T,
}

impl<T: Real> SpectralData<T> {
    /// The empty node: no inner space, transfer function identically I.
    pub fn trivial() -> Self {
        SpectralData {
            lambdas: Vec::new(),
            mus: Vec::new(),
            b0: Matrix::zeros(0, 2),
            c0: Matrix::zeros(2, 0),
            x0: Matrix::zeros(0, 0),
            anchor: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// Check shapes and the anchor Lyapunov equation
    /// A X0 + X0 A_zeta + B0 sigma1 C0 = 0.
    pub fn validate(&self, params: &VesselParameters<T>) -> Result<()> {
        let n = self.dim();
        if self.mus.len() != n {
            return Err(VesselError::Dimension(format!(
                "mus has length {}, lambdas has length {n}",
                self.mus.len()
            )));
        }
        if self.b0.rows() != n || self.b0.cols() != 2 {
            return Err(VesselError::Dimension("B0 must be n x 2".into()));
        }
        if self.c0.rows() != 2 || self.c0.cols() != n {
            return Err(VesselError::Dimension("C0 must be 2 x n".into()));
        }
        if self.x0.rows() != n || self.x0.cols() != n {
            return Err(VesselError::Dimension("X0 must be n x n".into()));
        }
        let node = self.node_at_anchor(params);
        let scale = self.b0.norm_inf().max(self.x0.norm_inf()).max(T::one());
        let tol = Tolerances::<T>::default();
        let res = node.lyapunov_residual();
        if res > tol.eps_lyap * scale {
            return Err(VesselError::Invalid(format!(
                "anchor node violates the Lyapunov equation: residual {:.3e}",
                res.as_f64()
            )));
        }
        Ok(())
    }

    /// Symmetric in the Krein sense with identity signature:
    /// mus = conj(lambdas) and C0 = B0 adjoint.
    pub fn is_symmetric(&self) -> bool {
        let tol = Tolerances::<T>::default();
        if self.lambdas.len() != self.mus.len() {
            return false;
        }
        let conj_ok = self
            .lambdas
            .iter()
            .zip(&self.mus)
            .all(|(l, m)| (l.conj() - *m).norm() <= tol.atol + tol.rtol * l.norm());
        conj_ok && self.c0.approx_eq(&self.b0.adjoint(), tol.atol, tol.rtol)
    }

    fn node_at_anchor(&self, params: &VesselParameters<T>) -> NodeState<T> {
        NodeState::from_diagonal(
            &self.lambdas,
            &self.mus,
            self.x0.clone(),
            self.b0.clone(),
            self.c0.clone(),
            params.clone(),
        )
    }
}

/// Row coefficient K_j = (lambda_j sigma2 + gamma) sigma1^{-1}; rows of B
/// evolve by right-multiplication with exp(-(s + i lambda_j t) K_j).
fn row_coeff<T: Real>(params: &VesselParameters<T>, lambda: Cx<T>) -> Matrix<T> {
    &(&params.sigma2.scale(lambda) + &params.gamma) * params.sigma1_inv()
}

/// Column coefficient N_l = sigma1^{-1}(-mu_l sigma2 + gamma).
fn col_coeff<T: Real>(params: &VesselParameters<T>, mu: Cx<T>) -> Matrix<T> {
    params.sigma1_inv() * &(&params.sigma2.scale(-mu) + &params.gamma)
}

/// Input map at (x, t).
pub fn evolved_b<T: Real>(
    data: &SpectralData<T>,
    params: &VesselParameters<T>,
    x: T,
    t: T,
) -> Matrix<T> {
    let n = data.dim();
    let s = x - data.anchor;
    let mut b = Matrix::zeros(n, 2);
    for j in 0..n {
        let k = row_coeff(params, data.lambdas[j]);
        let arg = -(cre(s) + cx::<T>(0.0, 1.0) * data.lambdas[j] * cre(t));
        let factor = expm2(&k.scale(arg));
        let row = &data.b0.row(j) * &factor;
        b[(j, 0)] = row[(0, 0)];
        b[(j, 1)] = row[(0, 1)];
    }
    b
}

/// Output map at (x, t).
pub fn evolved_c<T: Real>(
    data: &SpectralData<T>,
    params: &VesselParameters<T>,
    x: T,
    t: T,
) -> Matrix<T> {
    let n = data.dim();
    let s = x - data.anchor;
    let mut c = Matrix::zeros(2, n);
    for l in 0..n {
        let nmat = col_coeff(params, data.mus[l]);
        let arg = cre(s) - cx::<T>(0.0, 1.0) * data.mus[l] * cre(t);
        let factor = expm2(&nmat.scale(arg));
        let col = &factor * &data.c0.col(l);
        c[(0, l)] = col[(0, 0)];
        c[(1, l)] = col[(1, 0)];
    }
    c
}

/// Coupling operator at (x, t) by exact integration of exponential sums:
///
///     X(x,t) = X0 + int_0^t dX/dt(x0, u) du + int_{x0}^x dX/dx(y, t) dy
///
/// with dX/dx = B sigma2 C and
/// dX/dt = i A B sigma2 C - i B sigma2 C A_zeta + i B gamma C. Entry (j,l)
/// of either integrand is a finite sum of terms c s^k e^{a s}, integrated in
/// closed form; resonant terms (a = 0) integrate to polynomials, which is
/// where a vanishing lambda_j + mu_l lands.
pub fn evolved_x<T: Real>(
    data: &SpectralData<T>,
    params: &VesselParameters<T>,
    x: T,
    t: T,
) -> Matrix<T> {
    let n = data.dim();
    let s = x - data.anchor;
    let i = cx::<T>(0.0, 1.0);
    let mut out = data.x0.clone();
    let sigma2_sym = ExpMat2::from_const(&params.sigma2);
    for j in 0..n {
        let kj = row_coeff(params, data.lambdas[j]);
        let row0 = data.b0.row(j);
        // symbolic exponentials for the t-leg at the anchor
        let kj_t = exp_of(&kj.scale(-(i * data.lambdas[j])));
        // and for the x-leg (fixed t prefactor applied to the row)
        let kj_x = exp_of(&kj.map(|z| -z));
        let row_t = &row0 * &expm2(&kj.scale(-(i * data.lambdas[j] * cre(t))));
        for l in 0..n {
            let nl = col_coeff(params, data.mus[l]);
            let col0 = data.c0.col(l);
            // t-leg: row0 exp(-i lam u K) [i(lam - mu) sigma2 + i gamma] exp(-i mu u N) col0
            if t != T::zero() {
                let g = &params.sigma2.scale(i * (data.lambdas[j] - data.mus[l]))
                    + &params.gamma.scale(i);
                let nl_t = exp_of(&nl.scale(-(i * data.mus[l])));
                let mid = kj_t.mul(&ExpMat2::from_const(&g)).mul(&nl_t);
                let integrand = mid.bilinear(&row0, &col0);
                out[(j, l)] = out[(j, l)] + integrand.integrate(t);
            }
            // x-leg at fixed t: row_t exp(-s' K) sigma2 exp(s' N) col_t
            if s != T::zero() {
                let col_t = &expm2(&nl.scale(-(i * data.mus[l] * cre(t)))) * &col0;
                let nl_x = exp_of(&nl);
                let mid = kj_x.mul(&sigma2_sym).mul(&nl_x);
                let integrand = mid.bilinear(&row_t, &col_t);
                out[(j, l)] = out[(j, l)] + integrand.integrate(s);
            }
        }
    }
    out
}

/// A vessel family: spectral data plus parameters, evaluable anywhere in
/// the (x, t) plane where X stays invertible.
#[derive(Debug, Clone)]
pub struct VesselFamily<T: Real> {
    pub data: SpectralData<T>,
    pub params: VesselParameters<T>,
    anchor_det: Cx<T>,
}

impl<T: Real> VesselFamily<T> {
    pub fn new(data: SpectralData<T>, params: VesselParameters<T>) -> Result<Self> {
        data.validate(&params)?;
        let anchor_det = data.x0.det()?;
        Ok(VesselFamily { data, params, anchor_det })
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn anchor_det(&self) -> Cx<T> {
        self.anchor_det
    }

    /// (B, C, X) at a point of the plane.
    pub fn operators_at(&self, x: T, t: T) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
        (
            evolved_b(&self.data, &self.params, x, t),
            evolved_c(&self.data, &self.params, x, t),
            evolved_x(&self.data, &self.params, x, t),
        )
    }

    pub fn node_at(&self, x: T, t: T) -> NodeState<T> {
        let (b, c, x_op) = self.operators_at(x, t);
        NodeState::from_diagonal(
            &self.data.lambdas,
            &self.data.mus,
            x_op,
            b,
            c,
            self.params.clone(),
        )
    }

    /// Vessel state at (x, t); errors where X is singular.
    pub fn state(&self, x: T, t: T) -> Result<VesselState<T>> {
        VesselState::new(self.node_at(x, t), x, t, self.anchor_det)
    }

    /// Normalized tau = det X(x,t) / det X(anchor), with no invertibility
    /// guard so callers can map the zero set.
    pub fn tau_unchecked(&self, x: T, t: T) -> Cx<T> {
        let xm = evolved_x(&self.data, &self.params, x, t);
        xm.det().unwrap_or(Cx::new(T::zero(), T::zero())) / self.anchor_det
    }
}

/// Specification of a built-in soliton family.
#[derive(Debug, Clone, Copy)]
pub enum SolitonSpec<T: Real> {
    /// One-dimensional inner space, generator k^2 + i m; amplitudes are
    /// fixed at (sqrt(2) k, k), which keeps X real with a single moving
    /// zero line.
    Exponential { k: T, m: T },
    /// One-dimensional inner space, generator i k, amplitude b.
    Rational { b: Cx<T>, k: T },
    /// Two-dimensional inner space, generator diag(i k1, i k2); equal
    /// frequencies are supported through the degenerate (resonant) limit.
    TwoDim { k1: T, k2: T, b1: Cx<T>, b2: Cx<T> },
}

/// Printed closed forms attached to a built-in soliton, used as external
/// references for what the constructed vessel must reproduce.
pub struct SolitonReference<T: Real> {
    /// Closed form for beta(x, t).
    pub beta: Box<dyn Fn(T, T) -> T + Send + Sync>,
    /// Closed form for tau(x, t) (normalized to 1 at the origin).
    pub tau: Box<dyn Fn(T, T) -> T + Send + Sync>,
    /// The zero line of tau as x(t), when the variant has exactly one.
    pub singular_x: Option<Box<dyn Fn(T) -> T + Send + Sync>>,
}

/// A built vessel family together with its reference closed forms.
pub struct Soliton<T: Real> {
    pub family: VesselFamily<T>,
    pub reference: SolitonReference<T>,
}

/// sin(c z)/c with the resonant limit z at c = 0.
fn sinc_scaled<T: Real>(c: T, z: T) -> T {
    if c.abs() < T::of(1e-13) {
        z
    } else {
        (c * z).sin() / c
    }
}

/// Build one of the built-in soliton families with canonical parameters.
pub fn build_soliton<T: Real>(spec: SolitonSpec<T>) -> Result<Soliton<T>> {
    let params = VesselParameters::canonical();
    match spec {
        SolitonSpec::Exponential { k, m } => {
            let b1 = T::of(2.0).sqrt() * k;
            let b2 = k;
            let lambda = cx::<T>(0.0, 0.0) + cre(k * k) + cx::<T>(0.0, 1.0) * cre(m);
            let b0 = Matrix::from_rows(&[vec![
                cre(b1 + b2),
                cx::<T>(0.0, -1.0) * cre(b1 - b2),
            ]]);
            let c0 = b0.adjoint();
            let data = SpectralData {
                lambdas: vec![lambda],
                mus: vec![lambda.conj()],
                b0,
                c0,
                x0: Matrix::identity(1),
                anchor: T::zero(),
            };
            let family = VesselFamily::new(data, params)?;
            let kk = k * k;
            let beta = move |x: T, t: T| {
                let e_t = (T::of(8.0) * kk * m * t).exp();
                let e_x = (T::of(4.0) * kk * x).exp();
                -(T::of(2.0) * kk) * (e_t + T::of(2.0) * e_x) / (e_t - T::of(2.0) * e_x)
            };
            let tau = move |x: T, t: T| {
                let w = T::of(2.0) * kk * (x - T::of(2.0) * m * t);
                T::of(2.0) * w.exp() - (-w).exp()
            };
            let singular = move |t: T| {
                T::of(2.0) * m * t - T::of(2.0f64.ln()) / (T::of(4.0) * kk)
            };
            Ok(Soliton {
                family,
                reference: SolitonReference {
                    beta: Box::new(beta),
                    tau: Box::new(tau),
                    singular_x: Some(Box::new(singular)),
                },
            })
        }
        SolitonSpec::Rational { b, k } => {
            let lambda = cx::<T>(0.0, 1.0) * cre(k);
            let b0 = Matrix::from_rows(&[vec![b, Cx::new(T::zero(), T::zero())]]);
            let c0 = b0.adjoint();
            let data = SpectralData {
                lambdas: vec![lambda],
                mus: vec![lambda.conj()],
                b0,
                c0,
                x0: Matrix::identity(1),
                anchor: T::zero(),
            };
            let family = VesselFamily::new(data, params)?;
            let bb = b.norm_sqr();
            let beta = move |x: T, t: T| bb / (T::one() + bb * (x - T::of(2.0) * k * t));
            let tau = move |x: T, t: T| T::one() + bb * (x - T::of(2.0) * k * t);
            // tau vanishes on x = 2kt - 1/|b|^2, translating at speed 2k
            let singular = move |t: T| T::of(2.0) * k * t - T::one() / bb;
            Ok(Soliton {
                family,
                reference: SolitonReference {
                    beta: Box::new(beta),
                    tau: Box::new(tau),
                    singular_x: Some(Box::new(singular)),
                },
            })
        }
        SolitonSpec::TwoDim { k1, k2, b1, b2 } => {
            let zero = Cx::new(T::zero(), T::zero());
            let l1 = cx::<T>(0.0, 1.0) * cre(k1);
            let l2 = cx::<T>(0.0, 1.0) * cre(k2);
            let b0 = Matrix::from_rows(&[vec![b1, zero], vec![b2, zero]]);
            let c0 = b0.adjoint();
            let data = SpectralData {
                lambdas: vec![l1, l2],
                mus: vec![l1.conj(), l2.conj()],
                b0,
                c0,
                x0: Matrix::identity(2),
                anchor: T::zero(),
            };
            let family = VesselFamily::new(data, params)?;
            let (q1, q2) = (b1.norm_sqr(), b2.norm_sqr());
            let dk = k1 - k2;
            let two = T::of(2.0);
            let tau = move |x: T, t: T| {
                let s1 = sinc_scaled(dk, (k1 + k2) * t - x);
                (T::one() - q1 * (two * k1 * t - x)) * (T::one() - q2 * (two * k2 * t - x))
                    - q1 * q2 * s1 * s1
            };
            let beta = move |x: T, t: T| {
                let z = (k1 + k2) * t - x;
                // sin(2 dk z)/dk with its dk -> 0 limit 2z
                let sin2term = if dk.abs() < T::of(1e-13) {
                    two * z
                } else {
                    (two * dk * z).sin() / dk
                };
                let s1 = sinc_scaled(dk, z);
                let num = q1 + q2 - two * q1 * q2 * z + q1 * q2 * sin2term;
                let den = (-T::one() + q1 * (two * k1 * t - x))
                    * (-T::one() + q2 * (two * k2 * t - x))
                    - q1 * q2 * s1 * s1;
                num / den
            };
            Ok(Soliton {
                family,
                reference: SolitonReference {
                    beta: Box::new(beta),
                    tau: Box::new(tau),
                    singular_x: None,
                },
            })
        }
    }
}

/// RK4 integration of the prevessel translation system
///
///     B' = -(A B sigma2 + B gamma) sigma1^{-1}
///     C' = sigma1^{-1}(-sigma2 C A_zeta + gamma C)
///     X' = B sigma2 C
///
/// from the anchor (at t = 0) to `x_to`. This is an independent evolution
/// path used to cross-check the closed-form construction.
pub fn integrate_prevessel_ode<T: Real>(
    data: &SpectralData<T>,
    params: &VesselParameters<T>,
    x_to: T,
    n_steps: usize,
) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
    let a = Matrix::diag(&data.lambdas);
    let az = Matrix::diag(&data.mus);
    let s1i = params.sigma1_inv().clone();
    let db = |b: &Matrix<T>| -> Matrix<T> {
        let inner = &(&(&a * b) * &params.sigma2) + &(b * &params.gamma);
        (&inner * &s1i).map(|z| -z)
    };
    let dc = |c: &Matrix<T>| -> Matrix<T> {
        let inner = &(&(&params.sigma2.map(|z| -z) * c) * &az) + &(&params.gamma * c);
        &s1i * &inner
    };
    let dx = |b: &Matrix<T>, c: &Matrix<T>| -> Matrix<T> { &(b * &params.sigma2) * c };

    let mut b = data.b0.clone();
    let mut c = data.c0.clone();
    let mut x = data.x0.clone();
    if n_steps == 0 || x_to == data.anchor {
        return (b, c, x);
    }
    let h = (x_to - data.anchor) / T::of(n_steps as f64);
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    for _ in 0..n_steps {
        let (kb1, kc1) = (db(&b), dc(&c));
        let kx1 = dx(&b, &c);
        let (b2, c2) = (&b + &kb1.scale_re(h * half), &c + &kc1.scale_re(h * half));
        let (kb2, kc2) = (db(&b2), dc(&c2));
        let kx2 = dx(&b2, &c2);
        let (b3, c3) = (&b + &kb2.scale_re(h * half), &c + &kc2.scale_re(h * half));
        let (kb3, kc3) = (db(&b3), dc(&c3));
        let kx3 = dx(&b3, &c3);
        let (b4, c4) = (&b + &kb3.scale_re(h), &c + &kc3.scale_re(h));
        let (kb4, kc4) = (db(&b4), dc(&c4));
        let kx4 = dx(&b4, &c4);
        b = &b + &(&(&kb1 + &kb4) + &(&kb2 + &kb3).scale_re(two)).scale_re(h * sixth);
        c = &c + &(&(&kc1 + &kc4) + &(&kc2 + &kc3).scale_re(two)).scale_re(h * sixth);
        x = &x + &(&(&kx1 + &kx4) + &(&kx2 + &kx3).scale_re(two)).scale_re(h * sixth);
    }
    (b, c, x)
}

/// RK4 integration of the evolutionary system in t at fixed x, starting
/// from the slice (B, C, X)(x, 0):
///
///     dB/dt = -i A (A B sigma2 + B gamma) sigma1^{-1}
///     dC/dt = -i sigma1^{-1}(-sigma2 C A_zeta + gamma C) A_zeta
///     dX/dt = i A B sigma2 C - i B sigma2 C A_zeta + i B gamma C
pub fn integrate_prevessel_t_ode<T: Real>(
    data: &SpectralData<T>,
    params: &VesselParameters<T>,
    x: T,
    t_to: T,
    n_steps: usize,
) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
    let a = Matrix::diag(&data.lambdas);
    let az = Matrix::diag(&data.mus);
    let s1i = params.sigma1_inv().clone();
    let i = cx::<T>(0.0, 1.0);
    let db = |b: &Matrix<T>| -> Matrix<T> {
        let inner = &(&(&a * b) * &params.sigma2) + &(b * &params.gamma);
        (&a * &(&inner * &s1i)).scale(-i)
    };
    let dc = |c: &Matrix<T>| -> Matrix<T> {
        let inner = &(&(&params.sigma2.map(|z| -z) * c) * &az) + &(&params.gamma * c);
        (&(&s1i * &inner) * &az).scale(-i)
    };
    let dx = |b: &Matrix<T>, c: &Matrix<T>| -> Matrix<T> {
        let bs2c = &(b * &params.sigma2) * c;
        let term1 = (&a * &bs2c).scale(i);
        let term2 = (&bs2c * &az).scale(-i);
        let term3 = (&(b * &params.gamma) * c).scale(i);
        &(&term1 + &term2) + &term3
    };

    let mut b = evolved_b(data, params, x, T::zero());
    let mut c = evolved_c(data, params, x, T::zero());
    let mut xm = evolved_x(data, params, x, T::zero());
    if n_steps == 0 || t_to == T::zero() {
        return (b, c, xm);
    }
    let h = t_to / T::of(n_steps as f64);
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    for _ in 0..n_steps {
        let (kb1, kc1) = (db(&b), dc(&c));
        let kx1 = dx(&b, &c);
        let (b2, c2) = (&b + &kb1.scale_re(h * half), &c + &kc1.scale_re(h * half));
        let (kb2, kc2) = (db(&b2), dc(&c2));
        let kx2 = dx(&b2, &c2);
        let (b3, c3) = (&b + &kb2.scale_re(h * half), &c + &kc2.scale_re(h * half));
        let (kb3, kc3) = (db(&b3), dc(&c3));
        let kx3 = dx(&b3, &c3);
        let (b4, c4) = (&b + &kb3.scale_re(h), &c + &kc3.scale_re(h));
        let (kb4, kc4) = (db(&b4), dc(&c4));
        let kx4 = dx(&b4, &c4);
        b = &b + &(&(&kb1 + &kb4) + &(&kb2 + &kb3).scale_re(two)).scale_re(h * sixth);
        c = &c + &(&(&kc1 + &kc4) + &(&kc2 + &kc3).scale_re(two)).scale_re(h * sixth);
        xm = &xm + &(&(&kx1 + &kx4) + &(&kx2 + &kx3).scale_re(two)).scale_re(h * sixth);
    }
    (b, c, xm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn cz(re: f64, im: f64) -> Cx<f64> {
        cx(re, im)
    }

    fn rational(b: f64, k: f64) -> Soliton<f64> {
        build_soliton(SolitonSpec::Rational { b: cz(b, 0.0), k }).unwrap()
    }

    #[test]
    fn anchor_operators_reproduced() {
        let sol = rational(1.0, 1.0);
        let (b, c, x) = sol.family.operators_at(0.0, 0.0);
        assert!(b.approx_eq(&sol.family.data.b0, 1e-15, 1e-15));
        assert!(c.approx_eq(&sol.family.data.c0, 1e-15, 1e-15));
        assert!(x.approx_eq(&sol.family.data.x0, 1e-15, 1e-15));
    }

    #[test]
    fn rational_b_is_trigonometric() {
        // row of B at t=0 must be b (cos kx, sin kx)
        let sol = rational(0.8, 1.3);
        for &x in &[-0.7, 0.2, 1.1] {
            let b = evolved_b(&sol.family.data, &sol.family.params, x, 0.0);
            let th: f64 = 1.3 * x;
            assert!((b[(0, 0)] - cz(0.8 * th.cos(), 0.0)).norm() < 1e-13);
            assert!((b[(0, 1)] - cz(0.8 * th.sin(), 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn rational_b_evolves_with_moving_phase() {
        // with t: b (cos(kx - k^2 t), sin(kx - k^2 t))
        let sol = rational(1.0, 1.5);
        let (x, t) = (0.4, 0.3);
        let b = evolved_b(&sol.family.data, &sol.family.params, x, t);
        let th: f64 = 1.5 * x - 1.5 * 1.5 * t;
        assert!((b[(0, 0)] - cz(th.cos(), 0.0)).norm() < 1e-13);
        assert!((b[(0, 1)] - cz(th.sin(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn rational_x_matches_printed_form() {
        let sol = rational(1.0, 1.0);
        for &(x, t) in &[(0.5, 0.0), (1.0, 0.2), (-0.3, -0.1)] {
            let xm = evolved_x(&sol.family.data, &sol.family.params, x, t);
            let want = 1.0 + (x - 2.0 * t);
            assert!((xm[(0, 0)] - cz(want, 0.0)).norm() < 1e-13, "at ({x},{t})");
        }
    }

    #[test]
    fn rational_degenerate_k_zero() {
        // k = 0: tau(x, 0) = 1 + x and beta(1, 0) = 1/2
        let sol = rational(1.0, 0.0);
        let st = sol.family.state(1.0, 0.0).unwrap();
        let tau = st.tau().unwrap();
        assert!((tau - cz(2.0, 0.0)).norm() < 1e-13);
        let beta = st.beta().unwrap();
        assert!((beta - cz(0.5, 0.0)).norm() < 1e-13);
        assert!((sol.reference.beta)(1.0, 0.0) - 0.5 < 1e-15);
    }

    #[test]
    fn exponential_x_matches_printed_form() {
        let sol = build_soliton(SolitonSpec::Exponential { k: 1.0, m: 0.3 }).unwrap();
        for &(x, t) in &[(0.3, 0.1), (-0.6, 0.0), (0.9, -0.2)] {
            let xm = evolved_x(&sol.family.data, &sol.family.params, x, t);
            let w: f64 = 2.0 * (x - 2.0 * 0.3 * t);
            let want = 2.0 * w.exp() - (-w).exp();
            assert!(
                (xm[(0, 0)] - cz(want, 0.0)).norm() < 1e-10 * want.abs().max(1.0),
                "at ({x},{t}): {} vs {}",
                xm[(0, 0)],
                want
            );
        }
    }

    #[test]
    fn exponential_lyapunov_residual_small() {
        let sol = build_soliton(SolitonSpec::Exponential { k: 1.0, m: 0.0 }).unwrap();
        let node = sol.family.node_at(0.3, 0.1);
        assert!(node.lyapunov_residual() < 1e-10);
    }

    #[test]
    fn two_dim_x_matches_printed_form() {
        let sol = build_soliton(SolitonSpec::TwoDim {
            k1: 1.0,
            k2: 2.0,
            b1: cz(1.0, 0.0),
            b2: cz(0.5, 0.0),
        })
        .unwrap();
        let (x, t) = (0.7, 0.15);
        let xm = evolved_x(&sol.family.data, &sol.family.params, x, t);
        // diagonal entries
        let want11 = 1.0 + 1.0 * (x - 2.0 * t);
        let want22 = 1.0 + 0.25 * (x - 4.0 * t);
        assert!((xm[(0, 0)] - cz(want11, 0.0)).norm() < 1e-12);
        assert!((xm[(1, 1)] - cz(want22, 0.0)).norm() < 1e-12);
        // off-diagonal: b1 conj(b2) sin((k1-k2)((k1+k2)t - x))/(k2-k1)
        let arg: f64 = (1.0 - 2.0) * ((1.0 + 2.0) * t - x);
        let want12 = 0.5 * arg.sin() / (2.0 - 1.0);
        assert!((xm[(0, 1)] - cz(want12, 0.0)).norm() < 1e-12);
        assert!((xm[(1, 0)] - cz(want12, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_dim_degenerate_limit() {
        // k1 = k2 exactly: the off-diagonal resonance integrates to a
        // linear-in-(x - 2kt) entry, the limit of sin(eps z)/eps
        let sol = build_soliton(SolitonSpec::TwoDim {
            k1: 1.5,
            k2: 1.5,
            b1: cz(1.0, 0.0),
            b2: cz(0.5, 0.0),
        })
        .unwrap();
        let (x, t) = (0.4, 0.1);
        let xm = evolved_x(&sol.family.data, &sol.family.params, x, t);
        let z = x - 3.0 * t;
        assert!((xm[(0, 1)] - cz(0.5 * z, 0.0)).norm() < 1e-12);
        // reference tau agrees with det X
        let det = xm.det().unwrap();
        let want = (sol.reference.tau)(x, t);
        assert!((det - cz(want, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn x_integration_is_path_independent() {
        // integrating t-then-x must equal x-then-t; check against the
        // independent RK4 path in t at fixed x
        let sol = build_soliton(SolitonSpec::TwoDim {
            k1: 0.8,
            k2: 1.7,
            b1: cz(0.9, 0.2),
            b2: cz(0.4, -0.3),
        })
        .unwrap();
        let (x, t) = (0.5, 0.25);
        let closed = evolved_x(&sol.family.data, &sol.family.params, x, t);
        let (_, _, rk) = integrate_prevessel_t_ode(&sol.family.data, &sol.family.params, x, t, 400);
        assert!(
            closed.approx_eq(&rk, 1e-9, 1e-9),
            "diff {:.3e}",
            (&closed - &rk).norm_inf()
        );
    }

    #[test]
    fn closed_form_matches_rk4_in_x() {
        let sol = build_soliton(SolitonSpec::Exponential { k: 0.9, m: 0.2 }).unwrap();
        let x = 0.6;
        let (b_rk, c_rk, x_rk) =
            integrate_prevessel_ode(&sol.family.data, &sol.family.params, x, 600);
        let (b, c, xm) = sol.family.operators_at(x, 0.0);
        assert!(b.approx_eq(&b_rk, 1e-8, 1e-8));
        assert!(c.approx_eq(&c_rk, 1e-8, 1e-8));
        assert!(xm.approx_eq(&x_rk, 1e-8, 1e-8));
    }

    #[test]
    fn validate_rejects_broken_anchor() {
        let params = VesselParameters::canonical();
        let mut data = SpectralData::trivial();
        data.lambdas = vec![cz(1.0, 0.0)];
        data.mus = vec![cz(1.0, 0.0)];
        data.b0 = Matrix::from_rows(&[vec![cz(1.0, 0.0), cz(0.0, 0.0)]]);
        data.c0 = data.b0.adjoint();
        data.x0 = Matrix::identity(1); // violates Lyapunov
        assert!(data.validate(&params).is_err());
    }

    #[test]
    fn trivial_family_state_everywhere() {
        let family =
            VesselFamily::new(SpectralData::trivial(), VesselParameters::canonical()).unwrap();
        let st = family.state(1.2, -0.4).unwrap();
        assert!((st.tau().unwrap() - cz(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(st.gamma_star.norm_inf(), 0.0);
    }

    #[test]
    fn symmetric_flag_detects_symmetry() {
        let sol = rational(1.0, 2.0);
        assert!(sol.family.data.is_symmetric());
        let mut broken = sol.family.data.clone();
        broken.c0[(0, 0)] = broken.c0[(0, 0)] + cz(0.5, 0.0);
        assert!(!broken.is_symmetric());
    }

    #[test]
    fn singular_line_of_rational_soliton() {
        let sol = rational(1.0, 1.0);
        let xs = sol.reference.singular_x.as_ref().unwrap();
        for &t in &[0.0, 0.3, -0.2] {
            let x_sing = xs(t);
            let tau = sol.family.tau_unchecked(x_sing, t);
            assert!(tau.norm() < 1e-12, "tau at singular line: {:.3e}", tau.norm());
        }
    }

    #[test]
    fn exponential_singular_line_location() {
        // at t = 0, m = 0: x = -ln2/4 = -0.17328679...
        let sol = build_soliton(SolitonSpec::Exponential { k: 1.0, m: 0.0 }).unwrap();
        let xs = sol.reference.singular_x.as_ref().unwrap();
        let x0: f64 = xs(0.0);
        assert!((x0 + 0.173_286_795_139_986_3).abs() < 1e-12);
        assert!(sol.family.tau_unchecked(x0, 0.0).norm() < 1e-12);
    }
}
