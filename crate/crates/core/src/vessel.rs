//! Node and vessel state: Lyapunov residuals, the transfer function and its
//! inverse, moments, the linkage condition, and the scalar fields (p, q,
//! tau, beta) derived from the zero moment.
//!
//! A node is the operator tuple (A, A_zeta, X, B, C) with a selfadjoint
//! invertible sigma1 tying B and C through the Lyapunov equation
//!
//!     A X + X A_zeta + B sigma1 C = 0.
//!
//! With X invertible the transfer function
//!
//!     S(lambda) = I - C X^{-1} (lambda I - A)^{-1} B sigma1
//!
//! maps input-LDE solutions to output-LDE solutions for the potential
//! gamma_* attached by the linkage condition.

use crate::error::{Result, VesselError};
use crate::matrix::Matrix;
use crate::params::VesselParameters;
use crate::scalar::{cre, Cx, Real, Tolerances};

/// Hard cap on the moment order; desk scale needs no more.
pub const MOMENT_CAP: usize = 8;

/// Operator tuple of a node at one point of the parameter plane.
#[derive(Debug, Clone)]
pub struct NodeState<T: Real> {
    /// Generator A (n x n), diagonal for everything this crate constructs.
    pub a: Matrix<T>,
    /// Companion generator A_zeta (n x n).
    pub a_zeta: Matrix<T>,
    /// Coupling operator X (n x n).
    pub x_op: Matrix<T>,
    /// Input map B (n x 2).
    pub b: Matrix<T>,
    /// Output map C (2 x n).
    pub c: Matrix<T>,
    /// Parameter triple.
    pub params: VesselParameters<T>,
    /// Eigenvalues of A (diagonal entries for diagonal A).
    pub spectrum_a: Vec<Cx<T>>,
    /// Eigenvalues of A_zeta.
    pub spectrum_a_zeta: Vec<Cx<T>>,
}

impl<T: Real> NodeState<T> {
    /// Node from diagonal generators; spectra are read off the diagonals.
    pub fn from_diagonal(
        lambdas: &[Cx<T>],
        mus: &[Cx<T>],
        x_op: Matrix<T>,
        b: Matrix<T>,
        c: Matrix<T>,
        params: VesselParameters<T>,
    ) -> Self {
        NodeState {
            a: Matrix::diag(lambdas),
            a_zeta: Matrix::diag(mus),
            x_op,
            b,
            c,
            params,
            spectrum_a: lambdas.to_vec(),
            spectrum_a_zeta: mus.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    /// Sup-norm of A X + X A_zeta + B sigma1 C.
    pub fn lyapunov_residual(&self) -> T {
        let lhs = &(&(&self.a * &self.x_op) + &(&self.x_op * &self.a_zeta))
            + &(&(&self.b * &self.params.sigma1) * &self.c);
        lhs.norm_inf()
    }

    /// Sup-norm of the inverted form
    /// A_zeta X^{-1} + X^{-1} A + X^{-1} B sigma1 C X^{-1},
    /// obtained from the Lyapunov equation by conjugating with X^{-1}.
    pub fn lyapunov_inverse_residual(&self, eps_sing: T) -> Result<T> {
        let xi = self.x_op.inverse(eps_sing)?;
        let lhs = &(&(&self.a_zeta * &xi) + &(&xi * &self.a))
            + &(&(&(&xi * &self.b) * &self.params.sigma1) * &(&self.c * &xi));
        Ok(lhs.norm_inf())
    }

    /// Distance from lambda to the spectrum of A.
    fn spectrum_distance(&self, lambda: Cx<T>) -> T {
        self.spectrum_a
            .iter()
            .map(|ev| (lambda - *ev).norm())
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// Distance from lambda to the spectrum of -A_zeta.
    fn neg_zeta_spectrum_distance(&self, lambda: Cx<T>) -> T {
        self.spectrum_a_zeta
            .iter()
            .map(|ev| (lambda + *ev).norm())
            .fold(T::infinity(), |a, b| a.min(b))
    }
}

/// A node with invertible X evaluated at a point (x) or (x, t), carrying the
/// linked potential and the anchor determinant used to normalize tau.
#[derive(Debug, Clone)]
pub struct VesselState<T: Real> {
    pub node: NodeState<T>,
    /// Potential attached by the linkage condition.
    pub gamma_star: Matrix<T>,
    pub x: T,
    pub t: T,
    /// det X at the anchor point, fixing tau(anchor) = 1.
    pub anchor_det: Cx<T>,
    tol: Tolerances<T>,
}

impl<T: Real> VesselState<T> {
    /// Wrap a node evaluated at (x, t). Fails if X is not invertible at the
    /// working threshold; gamma_* is computed from the linkage condition.
    pub fn new(node: NodeState<T>, x: T, t: T, anchor_det: Cx<T>) -> Result<Self> {
        let tol = Tolerances::<T>::default();
        let gamma_star = linkage_gamma_star(&node, tol.eps_sing)?;
        Ok(VesselState { node, gamma_star, x, t, anchor_det, tol })
    }

    pub fn params(&self) -> &VesselParameters<T> {
        &self.node.params
    }

    fn x_inv(&self) -> Result<Matrix<T>> {
        self.node.x_op.inverse(self.tol.eps_sing)
    }

    fn guard_spectrum(&self, lambda: Cx<T>) -> Result<()> {
        let d = self.node.spectrum_distance(lambda);
        if d <= self.tol.eps_spec {
            return Err(VesselError::NearSpectrum {
                index: self
                    .node
                    .spectrum_a
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        (lambda - **a).norm().partial_cmp(&(lambda - **b).norm()).unwrap()
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0),
                dist: d.as_f64(),
            });
        }
        Ok(())
    }

    /// Transfer function S(lambda) = I - C X^{-1} (lambda I - A)^{-1} B sigma1.
    pub fn transfer(&self, lambda: Cx<T>) -> Result<Matrix<T>> {
        self.guard_spectrum(lambda)?;
        let n = self.node.dim();
        if n == 0 {
            return Ok(Matrix::identity(2));
        }
        let xi = self.x_inv()?;
        let shifted = &Matrix::diag(&vec![lambda; n]) - &self.node.a;
        let resolvent = shifted.inverse(self.tol.eps_sing)?;
        let prod = &(&(&self.node.c * &xi) * &resolvent) * &(&self.node.b * &self.node.params.sigma1);
        Ok(&Matrix::identity(2) - &prod)
    }

    /// Inverse transfer function
    /// S^{-1}(lambda) = I + C (lambda I + A_zeta)^{-1} X^{-1} B sigma1,
    /// derived from the resolvent inversion lemma plus the Lyapunov
    /// equation, which turns lambda - A - B sigma1 C X^{-1} into
    /// X (lambda + A_zeta) X^{-1}.
    pub fn transfer_inverse(&self, lambda: Cx<T>) -> Result<Matrix<T>> {
        let d = self.node.neg_zeta_spectrum_distance(lambda);
        if d <= self.tol.eps_spec {
            return Err(VesselError::NearSpectrum { index: 0, dist: d.as_f64() });
        }
        let n = self.node.dim();
        if n == 0 {
            return Ok(Matrix::identity(2));
        }
        let xi = self.x_inv()?;
        let shifted = &Matrix::diag(&vec![lambda; n]) + &self.node.a_zeta;
        let resolvent = shifted.inverse(self.tol.eps_sing)?;
        let prod = &(&self.node.c * &resolvent) * &(&(&xi * &self.node.b) * &self.node.params.sigma1);
        Ok(&Matrix::identity(2) + &prod)
    }

    /// n-th moment H_n = C X^{-1} A^n B, the coefficients of the transfer
    /// function's expansion at infinity.
    pub fn moment(&self, n: usize) -> Result<Matrix<T>> {
        if n > MOMENT_CAP {
            return Err(VesselError::OrderCap { n, cap: MOMENT_CAP });
        }
        if self.node.dim() == 0 {
            return Ok(Matrix::zeros(2, 2));
        }
        let xi = self.x_inv()?;
        let apow = self.node.a.pow(n)?;
        Ok(&(&(&self.node.c * &xi) * &apow) * &self.node.b)
    }

    /// Potential entries for the canonical preset, read from the zero
    /// moment H_0 = [[a0, b0], [c0, d0]] as p = -b0 - c0, q = a0 - d0.
    /// For symmetric vessels these come out real.
    pub fn potential_pq(&self) -> Result<(Cx<T>, Cx<T>)> {
        if !self.node.params.is_canonical() {
            return Err(VesselError::NonCanonicalParameters);
        }
        let h0 = self.moment(0)?;
        let p = -h0[(0, 1)] - h0[(1, 0)];
        let q = h0[(0, 0)] - h0[(1, 1)];
        Ok((p, q))
    }

    /// Normalized tau: det X(x, t) / det X(anchor).
    pub fn tau(&self) -> Result<Cx<T>> {
        let d = self.node.x_op.det()?;
        if self.anchor_det.norm() == T::zero() {
            return Err(VesselError::Singular { det_mag: 0.0, threshold: 0.0 });
        }
        let tau = d / self.anchor_det;
        if tau.norm() < self.tol.eps_sing {
            return Err(VesselError::Singular {
                det_mag: tau.norm().as_f64(),
                threshold: self.tol.eps_sing.as_f64(),
            });
        }
        Ok(tau)
    }

    /// Logarithmic derivative of tau: beta = tau'/tau = trace(sigma2 H_0),
    /// an exact algebraic form (no finite differences) since
    /// d/dx log det X = trace(X^{-1} B sigma2 C).
    pub fn beta(&self) -> Result<Cx<T>> {
        let h0 = self.moment(0)?;
        Ok((&self.node.params.sigma2 * &h0).trace())
    }

    /// Defect of the symmetry identity S^*(-conj(lambda)) sigma1 S(lambda) = sigma1,
    /// which holds for symmetric vessels at points of analyticity.
    pub fn sigma1_symmetry_defect(&self, lambda: Cx<T>) -> Result<T> {
        let s = self.transfer(lambda)?;
        let s_refl = self.transfer(-lambda.conj())?;
        let lhs = &(&s_refl.adjoint() * &self.node.params.sigma1) * &s;
        Ok((&lhs - &self.node.params.sigma1).norm_inf())
    }
}

/// Potential attached to a node by the linkage condition:
/// gamma_* = gamma + sigma2 H_0 sigma1 - sigma1 H_0 sigma2
/// where H_0 = C X^{-1} B.
pub fn linkage_gamma_star<T: Real>(node: &NodeState<T>, eps_sing: T) -> Result<Matrix<T>> {
    if node.dim() == 0 {
        return Ok(node.params.gamma.clone());
    }
    let xi = node.x_op.inverse(eps_sing)?;
    let h0 = &(&node.c * &xi) * &node.b;
    let s2 = &node.params.sigma2;
    let s1 = &node.params.sigma1;
    let twist = &(s2 * &h0) * s1;
    let untwist = &(s1 * &h0) * s2;
    Ok(&(&node.params.gamma + &twist) - &untwist)
}

/// Residuals tying the tau function to the potential for canonical-preset
/// symmetric vessels:
///
/// * `trace_vs_fd`: |trace(sigma2 H_0)(x) - numerical tau'/tau| with the
///   derivative taken by central differences on tau;
/// * `trace_vs_quadrature`: |beta(x) - beta(x_ref) + int_{x_ref}^x (p^2+q^2)|
///   with a Simpson quadrature, i.e. the integrated form of
///   beta' = -(p^2+q^2) anchored inside the current smooth component.
#[derive(Debug, Clone, Copy)]
pub struct TauIdentityResiduals<T> {
    pub trace_vs_fd: T,
    pub trace_vs_quadrature: T,
}

/// Evaluate both tau-identity residuals for a family evaluable at (x, t).
/// `state_at` must produce states on the closed interval with endpoints
/// `x_ref` and `x`; the quadrature uses `n_panels` Simpson panels.
pub fn tau_log_derivative_identity<T: Real>(
    state_at: &dyn Fn(T) -> Result<VesselState<T>>,
    x_ref: T,
    x: T,
    n_panels: usize,
) -> Result<TauIdentityResiduals<T>> {
    let beta_at = |y: T| -> Result<Cx<T>> { state_at(y)?.beta() };
    // finite-difference tau'/tau via central differences on tau itself
    let h = T::of(1e-5) * (T::one() + x.abs());
    let tau_p = state_at(x + h)?.tau()?;
    let tau_m = state_at(x - h)?.tau()?;
    let tau_0 = state_at(x)?.tau()?;
    let fd = (tau_p - tau_m) / (cre(h) * cre(T::of(2.0)) * tau_0);
    let trace_vs_fd = (beta_at(x)? - fd).norm();

    // Simpson quadrature of p^2 + q^2 from x_ref to x
    let n = if n_panels % 2 == 0 { n_panels } else { n_panels + 1 };
    let h_q = (x - x_ref) / T::of(n as f64);
    let pq2 = |y: T| -> Result<Cx<T>> {
        let (p, q) = state_at(y)?.potential_pq()?;
        Ok(p * p + q * q)
    };
    let mut acc = pq2(x_ref)? + pq2(x)?;
    for i in 1..n {
        let w = if i % 2 == 1 { T::of(4.0) } else { T::of(2.0) };
        acc = acc + pq2(x_ref + h_q * T::of(i as f64))? * cre(w);
    }
    let integral = acc * cre(h_q / T::of(3.0));
    let trace_vs_quadrature = (beta_at(x)? - beta_at(x_ref)? + integral).norm();
    Ok(TauIdentityResiduals { trace_vs_fd, trace_vs_quadrature })
}
