//! Forward moment generation from analytic potentials, moment-recursion
//! residuals, Taylor reconstruction of the potential from moment values at
//! a point, and the finite-quadrature realization of a node from moments.
//!
//! Everything here works with the canonical parameter preset, for which the
//! zero moment has the structure
//!
//!     H_0 = [[ (beta + q)/2, -p/2 ], [ -p/2, (beta - q)/2 ]],
//!     beta' = -(p^2 + q^2),
//!
//! and each following moment is determined by two algebraic relations and
//! two quadratures, up to integration constants collected in
//! [`MomentPolicy`].

use crate::construction::{SpectralData, VesselFamily};
use crate::error::{Result, VesselError};
use crate::grid::{fd_derivative, Axis, AxisKind, Grid2, GridFunction, MatField, Stride};
use crate::matrix::{eigenvalues_durand_kerner, mat2, Matrix};
use crate::scalar::{cre, cx, Cx, Real};
use crate::vessel::MOMENT_CAP;

/// Integration constants for the quadrature components of the moment
/// recursion. Defaults are all zero, which keeps the generated sequence in
/// the "i^n times real" normal form for real potentials.
#[derive(Debug, Clone)]
pub struct MomentPolicy<T: Real> {
    /// trace of H_0 at x = 0 (the logarithmic derivative of tau at 0).
    pub beta0: Cx<T>,
    /// (a + d)(0) for each generated level n = 1, 2, ...
    pub trace_constants: Vec<Cx<T>>,
    /// (b - c)(0) for each generated level n = 1, 2, ...
    pub skew_constants: Vec<Cx<T>>,
}

impl<T: Real> Default for MomentPolicy<T> {
    fn default() -> Self {
        MomentPolicy {
            beta0: Cx::new(T::zero(), T::zero()),
            trace_constants: Vec::new(),
            skew_constants: Vec::new(),
        }
    }
}

impl<T: Real> MomentPolicy<T> {
    fn trace_at(&self, level: usize) -> Cx<T> {
        self.trace_constants.get(level).copied().unwrap_or(Cx::new(T::zero(), T::zero()))
    }

    fn skew_at(&self, level: usize) -> Cx<T> {
        self.skew_constants.get(level).copied().unwrap_or(Cx::new(T::zero(), T::zero()))
    }

    /// Harvest constants from explicit moment values at x = 0 (e.g. from a
    /// vessel), so a generated sequence reproduces that vessel's moments.
    pub fn from_moment_values(h_at_zero: &[Matrix<T>]) -> Self {
        let mut policy = MomentPolicy::default();
        if let Some(h0) = h_at_zero.first() {
            policy.beta0 = h0[(0, 0)] + h0[(1, 1)];
        }
        for h in h_at_zero.iter().skip(1) {
            policy.trace_constants.push(h[(0, 0)] + h[(1, 1)]);
            policy.skew_constants.push(h[(0, 1)] - h[(1, 0)]);
        }
        policy
    }
}

/// A generated (or harvested) moment sequence over a uniform grid.
#[derive(Debug, Clone)]
pub struct MomentSequence<T: Real> {
    /// Highest moment index present.
    pub order: usize,
    pub axis: Axis<T>,
    /// h[n][i]: 2x2 value of H_n at grid point i.
    pub h: Vec<Vec<Matrix<T>>>,
    pub policy: MomentPolicy<T>,
}

fn index_of_zero<T: Real>(axis: &Axis<T>) -> Result<usize> {
    for i in 0..axis.count {
        if axis.coord(i).abs() < axis.step.abs() * T::of(1e-9) {
            return Ok(i);
        }
    }
    Err(VesselError::OutOfDomain {
        x: 0.0,
        lo: axis.start.as_f64(),
        hi: axis.coord(axis.count - 1).as_f64(),
    })
}

/// Sixth-order first derivative on a uniform grid, one-sided at the edges.
/// The moment recursion composes derivatives through up to eight levels, so
/// each one has to stay far below the final reconstruction tolerances.
fn grid_derivative<T: Real>(f: &[Cx<T>], h: T) -> Vec<Cx<T>> {
    let n = f.len();
    assert!(n >= 7, "need at least 7 points");
    let d = cre(T::of(60.0) * h);
    let mut out = vec![Cx::new(T::zero(), T::zero()); n];
    let comb = |w: &[f64; 7], base: usize| -> Cx<T> {
        let mut acc = Cx::new(T::zero(), T::zero());
        for (k, &c) in w.iter().enumerate() {
            if c != 0.0 {
                acc = acc + f[base + k] * cre(T::of(c));
            }
        }
        acc
    };
    const FWD0: [f64; 7] = [-147.0, 360.0, -450.0, 400.0, -225.0, 72.0, -10.0];
    const FWD1: [f64; 7] = [-10.0, -77.0, 150.0, -100.0, 50.0, -15.0, 2.0];
    const FWD2: [f64; 7] = [2.0, -24.0, -35.0, 80.0, -30.0, 8.0, -1.0];
    const MID: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
    let rev = |w: &[f64; 7]| -> [f64; 7] {
        let mut r = [0.0; 7];
        for k in 0..7 {
            r[k] = -w[6 - k];
        }
        r
    };
    for i in 0..n {
        out[i] = if i >= 3 && i + 3 < n {
            comb(&MID, i - 3) / d
        } else if i == 0 {
            comb(&FWD0, 0) / d
        } else if i == 1 {
            comb(&FWD1, 0) / d
        } else if i == 2 {
            comb(&FWD2, 0) / d
        } else if i + 1 == n {
            comb(&rev(&FWD0), n - 7) / d
        } else if i + 2 == n {
            comb(&rev(&FWD1), n - 7) / d
        } else {
            comb(&rev(&FWD2), n - 7) / d
        };
    }
    out
}

/// Fourth-order cumulative integral anchored at grid index `i0`
/// (F[i0] = 0), built from per-interval cubic Newton-Cotes segments.
fn cumulative_integral<T: Real>(f: &[Cx<T>], h: T, i0: usize) -> Vec<Cx<T>> {
    let n = f.len();
    assert!(n >= 4, "need at least 4 points");
    let c = |x: f64| cre::<T>(T::of(x) * h / T::of(24.0));
    // segment integral over [i, i+1]
    let seg = |i: usize| -> Cx<T> {
        if i == 0 {
            f[0] * c(9.0) + f[1] * c(19.0) + f[2] * c(-5.0) + f[3] * c(1.0)
        } else if i + 2 >= n {
            f[n - 4] * c(1.0) + f[n - 3] * c(-5.0) + f[n - 2] * c(19.0) + f[n - 1] * c(9.0)
        } else {
            f[i - 1] * c(-1.0) + f[i] * c(13.0) + f[i + 1] * c(13.0) + f[i + 2] * c(-1.0)
        }
    };
    let mut out = vec![Cx::new(T::zero(), T::zero()); n];
    for i in i0..n - 1 {
        out[i + 1] = out[i] + seg(i);
    }
    for i in (0..i0).rev() {
        out[i] = out[i + 1] - seg(i);
    }
    out
}

/// Generate moments H_0 .. H_N of an analytic potential sampled on a
/// uniform grid containing x = 0. Derivatives inside the recursion are
/// sixth-order finite differences; the two quadrature components per level
/// are fourth-order cumulative integrals anchored at 0 with constants from
/// `policy`.
///
/// Every level differentiates the previous one, so roundoff noise grows by
/// roughly a factor 1/step per level; on typical grids the results are
/// trustworthy to level 5 or so. [`moments_from_series`] propagates exact
/// jets instead and is the right tool for deep levels when the potential's
/// Taylor germ is available.
pub fn moments_from_potential<T: Real>(
    p: &dyn Fn(T) -> T,
    q: &dyn Fn(T) -> T,
    order: usize,
    axis: Axis<T>,
    policy: MomentPolicy<T>,
) -> Result<MomentSequence<T>> {
    if order > MOMENT_CAP {
        return Err(VesselError::OrderCap { n: order, cap: MOMENT_CAP });
    }
    if axis.count < 7 {
        return Err(VesselError::Stencil { order: 1, need: 7, have: axis.count });
    }
    let i0 = index_of_zero(&axis)?;
    let n = axis.count;
    let h = axis.step;
    let xs = axis.coords();
    let pv: Vec<Cx<T>> = xs.iter().map(|&x| cre(p(x))).collect();
    let qv: Vec<Cx<T>> = xs.iter().map(|&x| cre(q(x))).collect();
    let pq2: Vec<Cx<T>> = pv.iter().zip(&qv).map(|(a, b)| *a * *a + *b * *b).collect();
    let int_pq2 = cumulative_integral(&pq2, h, i0);
    let beta: Vec<Cx<T>> = int_pq2.iter().map(|v| policy.beta0 - *v).collect();

    let half = cre(T::of(0.5));
    let mut levels: Vec<Vec<Matrix<T>>> = Vec::with_capacity(order + 1);
    let h0: Vec<Matrix<T>> = (0..n)
        .map(|i| {
            mat2(
                (beta[i] + qv[i]) * half,
                -pv[i] * half,
                -pv[i] * half,
                (beta[i] - qv[i]) * half,
            )
        })
        .collect();
    levels.push(h0);

    let i_unit = cx::<T>(0.0, 1.0);
    for level in 0..order {
        let prev = &levels[level];
        let a: Vec<Cx<T>> = prev.iter().map(|m| m[(0, 0)]).collect();
        let b: Vec<Cx<T>> = prev.iter().map(|m| m[(0, 1)]).collect();
        let cc: Vec<Cx<T>> = prev.iter().map(|m| m[(1, 0)]).collect();
        let dd: Vec<Cx<T>> = prev.iter().map(|m| m[(1, 1)]).collect();
        let da = grid_derivative(&a, h);
        let db = grid_derivative(&b, h);
        // algebraic components of the next level
        let diff: Vec<Cx<T>> = (0..n)
            .map(|i| i_unit * (-dd[i] * pv[i] + b[i] * qv[i] + db[i]))
            .collect();
        let sum_bc: Vec<Cx<T>> = (0..n)
            .map(|i| -i_unit * (-cc[i] * pv[i] + a[i] * qv[i] + da[i]))
            .collect();
        // quadrature components
        let trace_rhs: Vec<Cx<T>> =
            (0..n).map(|i| pv[i] * sum_bc[i] - qv[i] * diff[i]).collect();
        let skew_rhs: Vec<Cx<T>> =
            (0..n).map(|i| -pv[i] * diff[i] - qv[i] * sum_bc[i]).collect();
        let trace = cumulative_integral(&trace_rhs, h, i0);
        let skew = cumulative_integral(&skew_rhs, h, i0);
        let t0 = policy.trace_at(level);
        let s0 = policy.skew_at(level);
        let next: Vec<Matrix<T>> = (0..n)
            .map(|i| {
                let tr = trace[i] + t0;
                let sk = skew[i] + s0;
                mat2(
                    (tr + diff[i]) * half,
                    (sum_bc[i] + sk) * half,
                    (sum_bc[i] - sk) * half,
                    (tr - diff[i]) * half,
                )
            })
            .collect();
        levels.push(next);
    }
    Ok(MomentSequence { order, axis, h: levels, policy })
}

impl<T: Real> MomentSequence<T> {
    /// Moment values at x = 0, one per level.
    pub fn values_at_zero(&self) -> Result<Vec<Matrix<T>>> {
        let i0 = index_of_zero(&self.axis)?;
        Ok(self.h.iter().map(|level| level[i0].clone()).collect())
    }

    /// The potential entries read back from H_0.
    pub fn potential(&self) -> (Vec<Cx<T>>, Vec<Cx<T>>) {
        let p = self.h[0].iter().map(|m| -(m[(0, 1)] + m[(1, 0)])).collect();
        let q = self.h[0].iter().map(|m| m[(0, 0)] - m[(1, 1)]).collect();
        (p, q)
    }

    /// tau over the grid: exp of the cumulative integral of trace(H_0),
    /// anchored to 1 at x = 0.
    pub fn tau(&self) -> Result<Vec<Cx<T>>> {
        let i0 = index_of_zero(&self.axis)?;
        let tr: Vec<Cx<T>> = self.h[0].iter().map(|m| m[(0, 0)] + m[(1, 1)]).collect();
        Ok(cumulative_integral(&tr, self.axis.step, i0)
            .into_iter()
            .map(|v| v.exp())
            .collect())
    }

    /// gamma_* on the grid from the linkage form of H_0 (canonical preset).
    pub fn gamma_star(&self) -> Vec<Matrix<T>> {
        let i = cx::<T>(0.0, 1.0);
        self.h[0]
            .iter()
            .map(|m| {
                let p = -(m[(0, 1)] + m[(1, 0)]);
                let q = m[(0, 0)] - m[(1, 1)];
                mat2(i * p, i * q, i * q, -(i * p))
            })
            .collect()
    }

    /// Sup-norm residual of the moment recursion at level n (needs level
    /// n+1 present):
    /// [sigma1^{-1} sigma2, H_{n+1} sigma1] - (H_n)' sigma1 + sigma1^{-1} gamma_* H_n sigma1.
    pub fn recursion_residual(&self, n: usize) -> Result<T> {
        if n + 1 > self.order {
            return Err(VesselError::OrderCap { n: n + 1, cap: self.order });
        }
        let params = crate::params::VesselParameters::<T>::canonical();
        let s1 = &params.sigma1;
        let s1i = params.sigma1_inv();
        let s2 = &params.sigma2;
        let gs = self.gamma_star();
        let npts = self.axis.count;
        // entrywise derivative of H_n
        let mut dh: Vec<Matrix<T>> = vec![Matrix::zeros(2, 2); npts];
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let series: Vec<Cx<T>> = self.h[n].iter().map(|m| m[(r, c)]).collect();
            let ds = grid_derivative(&series, self.axis.step);
            for i in 0..npts {
                dh[i][(r, c)] = ds[i];
            }
        }
        let mut sup = T::zero();
        for i in 0..npts {
            let hs1 = &self.h[n + 1][i] * s1;
            let comm = &(&(s1i * s2) * &hs1) - &(&hs1 * &(s2 * s1i));
            let res = &(&comm - &(&dh[i] * s1)) + &(&(s1i * &gs[i]) * &(&self.h[n][i] * s1));
            sup = sup.max(res.norm_inf());
        }
        Ok(sup)
    }
}

// ---- series (jet) arithmetic -------------------------------------------

fn jet_mul<T: Real>(a: &[Cx<T>], b: &[Cx<T>], deg: usize) -> Vec<Cx<T>> {
    let mut out = vec![Cx::new(T::zero(), T::zero()); deg + 1];
    for (i, &ai) in a.iter().enumerate().take(deg + 1) {
        for (j, &bj) in b.iter().enumerate() {
            if i + j > deg {
                break;
            }
            out[i + j] = out[i + j] + ai * bj;
        }
    }
    out
}

fn jet_diff<T: Real>(a: &[Cx<T>]) -> Vec<Cx<T>> {
    if a.len() <= 1 {
        return vec![Cx::new(T::zero(), T::zero())];
    }
    (1..a.len()).map(|m| a[m] * cre(T::of(m as f64))).collect()
}

fn jet_antider<T: Real>(a: &[Cx<T>], constant: Cx<T>, deg: usize) -> Vec<Cx<T>> {
    let mut out = vec![Cx::new(T::zero(), T::zero()); deg + 1];
    out[0] = constant;
    for m in 0..a.len().min(deg) {
        out[m + 1] = a[m] / cre(T::of((m + 1) as f64));
    }
    out
}

fn jet_axpy<T: Real>(y: &mut [Cx<T>], c: Cx<T>, x: &[Cx<T>]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi = *yi + c * *xi;
    }
}

fn jet_eval<T: Real>(a: &[Cx<T>], x: T) -> Cx<T> {
    let mut acc = Cx::new(T::zero(), T::zero());
    for c in a.iter().rev() {
        acc = acc * cre(x) + *c;
    }
    acc
}

/// Moment levels as truncated power series around x = 0: levels[n] holds
/// the four entry jets of H_n. This is the exact-arithmetic counterpart of
/// [`moments_from_potential`], free of differencing noise, for potentials
/// given by their Taylor germs.
#[derive(Debug, Clone)]
pub struct MomentJets<T: Real> {
    pub order: usize,
    pub degree: usize,
    /// levels[n][e]: jet of entry e (row-major 2x2) of H_n.
    pub levels: Vec<[Vec<Cx<T>>; 4]>,
    pub policy: MomentPolicy<T>,
}

impl<T: Real> MomentJets<T> {
    pub fn value_at_zero(&self, n: usize) -> Matrix<T> {
        let l = &self.levels[n];
        mat2(l[0][0], l[1][0], l[2][0], l[3][0])
    }

    pub fn values_at_zero(&self) -> Vec<Matrix<T>> {
        (0..=self.order).map(|n| self.value_at_zero(n)).collect()
    }

    pub fn value_at(&self, n: usize, x: T) -> Matrix<T> {
        let l = &self.levels[n];
        mat2(
            jet_eval(&l[0], x),
            jet_eval(&l[1], x),
            jet_eval(&l[2], x),
            jet_eval(&l[3], x),
        )
    }

    /// Evaluate the jets on a grid, producing a sampled sequence (useful
    /// within the series' accuracy radius only).
    pub fn to_sequence(&self, axis: Axis<T>) -> MomentSequence<T> {
        let h = (0..=self.order)
            .map(|n| axis.coords().iter().map(|&x| self.value_at(n, x)).collect())
            .collect();
        MomentSequence { order: self.order, axis, h, policy: self.policy.clone() }
    }
}

/// Order cap for the exact series generator. Deeper than the grid path's
/// cap because jet propagation carries no differencing noise, and a
/// 2 n_q-moment quadrature fit at n_q = 8 nodes needs sixteen values.
pub const SERIES_CAP: usize = 2 * MOMENT_CAP - 1;

/// Generate moment jets from the Taylor germs of p and q at x = 0. Exact
/// truncated-series arithmetic throughout: derivatives shift jets,
/// quadratures lift them, so the values at zero carry no discretization
/// error at all.
pub fn moments_from_series<T: Real>(
    p_coeffs: &[Cx<T>],
    q_coeffs: &[Cx<T>],
    order: usize,
    degree: usize,
    policy: MomentPolicy<T>,
) -> Result<MomentJets<T>> {
    if order > SERIES_CAP {
        return Err(VesselError::OrderCap { n: order, cap: SERIES_CAP });
    }
    let deg = degree.max(order + 2);
    let zero = Cx::new(T::zero(), T::zero());
    let pad = |c: &[Cx<T>]| -> Vec<Cx<T>> {
        let mut v = c.to_vec();
        v.resize(deg + 1, zero);
        v
    };
    let p = pad(p_coeffs);
    let q = pad(q_coeffs);
    let half = cre(T::of(0.5));
    let i_unit = cx::<T>(0.0, 1.0);

    // beta = beta0 - int (p^2 + q^2)
    let mut pq2 = jet_mul(&p, &p, deg);
    jet_axpy(&mut pq2, Cx::new(T::one(), T::zero()), &jet_mul(&q, &q, deg));
    let int_pq2 = jet_antider(&pq2, zero, deg);
    let mut beta = vec![zero; deg + 1];
    beta[0] = policy.beta0;
    jet_axpy(&mut beta, -Cx::new(T::one(), T::zero()), &int_pq2);

    let comb = |jets: &[(Cx<T>, &Vec<Cx<T>>)]| -> Vec<Cx<T>> {
        let mut out = vec![zero; deg + 1];
        for (c, j) in jets {
            jet_axpy(&mut out, *c, j);
        }
        out
    };

    let one = Cx::new(T::one(), T::zero());
    let a0 = comb(&[(half, &beta), (half, &q)]);
    let d0 = comb(&[(half, &beta), (-half, &q)]);
    let b0 = comb(&[(-half, &p)]);
    let mut levels: Vec<[Vec<Cx<T>>; 4]> = vec![[a0, b0.clone(), b0, d0]];

    for level in 0..order {
        let [a, b, c, d] = &levels[level];
        let db = jet_diff(b);
        let da = jet_diff(a);
        // diff = a_{n+1} - d_{n+1} = i(-d p + b q + b'),
        // sum  = b_{n+1} + c_{n+1} = -i(-c p + a q + a')
        let mut diff = vec![zero; deg + 1];
        jet_axpy(&mut diff, -i_unit, &jet_mul(d, &p, deg));
        jet_axpy(&mut diff, i_unit, &jet_mul(b, &q, deg));
        jet_axpy(&mut diff, i_unit, &db);
        let mut sum = vec![zero; deg + 1];
        jet_axpy(&mut sum, i_unit, &jet_mul(c, &p, deg));
        jet_axpy(&mut sum, -i_unit, &jet_mul(a, &q, deg));
        jet_axpy(&mut sum, -i_unit, &da);
        // trace' = p sum - q diff; skew' = -p diff - q sum
        let mut trace_rhs = jet_mul(&p, &sum, deg);
        jet_axpy(&mut trace_rhs, -one, &jet_mul(&q, &diff, deg));
        let mut skew_rhs = vec![zero; deg + 1];
        jet_axpy(&mut skew_rhs, -one, &jet_mul(&p, &diff, deg));
        jet_axpy(&mut skew_rhs, -one, &jet_mul(&q, &sum, deg));
        let trace = jet_antider(&trace_rhs, policy.trace_at(level), deg);
        let skew = jet_antider(&skew_rhs, policy.skew_at(level), deg);
        let a1 = comb(&[(half, &trace), (half, &diff)]);
        let d1 = comb(&[(half, &trace), (-half, &diff)]);
        let b1 = comb(&[(half, &sum), (half, &skew)]);
        let c1 = comb(&[(half, &sum), (-half, &skew)]);
        levels.push([a1, b1, c1, d1]);
    }
    Ok(MomentJets { order, degree: deg, levels, policy })
}

/// Sup over sample points of the moment-recursion residual for a vessel
/// family at t = 0, with the x-derivative of H_n taken by a five-point
/// fourth-order stencil of width `fd_h`.
pub fn vessel_moment_recursion_residual<T: Real>(
    family: &VesselFamily<T>,
    n: usize,
    xs: &[T],
    fd_h: T,
) -> Result<T> {
    let params = &family.params;
    let s1 = &params.sigma1;
    let s1i = params.sigma1_inv();
    let s2 = &params.sigma2;
    let moment_at = |x: T, k: usize| -> Result<Matrix<T>> { family.state(x, T::zero())?.moment(k) };
    let mut sup = T::zero();
    for &x in xs {
        let f2p = moment_at(x + fd_h + fd_h, n)?;
        let f1p = moment_at(x + fd_h, n)?;
        let f1m = moment_at(x - fd_h, n)?;
        let f2m = moment_at(x - fd_h - fd_h, n)?;
        let dh = (&(&f1p - &f1m).scale_re(T::of(8.0)) - &(&f2p - &f2m))
            .scale_re(T::one() / (T::of(12.0) * fd_h));
        let state = family.state(x, T::zero())?;
        let hn = state.moment(n)?;
        let hn1 = state.moment(n + 1)?;
        let hs1 = &hn1 * s1;
        let comm = &(&(s1i * s2) * &hs1) - &(&hs1 * &(s2 * s1i));
        let res = &(&comm - &(&dh * s1)) + &(&(s1i * &state.gamma_star) * &(&hn * s1));
        sup = sup.max(res.norm_inf());
    }
    Ok(sup)
}

/// Sup of the evolutionary moment identity
/// dH_n/dt = i dH_{n+1}/dx + i d[H_0]/dx sigma1 H_n
/// over an (x, t) grid; points where the vessel is singular are excluded
/// (count reported alongside).
pub fn kdv_moment_evolution_residual<T: Real>(
    family: &VesselFamily<T>,
    n: usize,
    grid: Grid2<T>,
) -> Result<(T, usize)> {
    let fill = Matrix::zeros(2, 2);
    let sample = |k: usize| -> MatField<T> {
        GridFunction::sample(
            grid,
            |x, t| family.state(x, t).ok().and_then(|s| s.moment(k).ok()),
            fill.clone(),
        )
    };
    let hn = sample(n);
    let hn1 = sample(n + 1);
    let h0 = sample(0);
    let excluded = grid.len() - hn.valid_count();
    let dt_hn = fd_derivative(&hn, AxisKind::T, 1, Stride::Fixed(1))?;
    let dx_hn1 = fd_derivative(&hn1, AxisKind::X, 1, Stride::Fixed(1))?;
    let dx_h0 = fd_derivative(&h0, AxisKind::X, 1, Stride::Fixed(1))?;
    let i = cx::<T>(0.0, 1.0);
    let s1 = &family.params.sigma1;
    let mut sup = T::zero();
    let mut any = false;
    for idx in 0..grid.len() {
        if !(dt_hn.mask[idx] && dx_hn1.mask[idx] && dx_h0.mask[idx] && hn.mask[idx]) {
            continue;
        }
        let want = &dx_hn1.values[idx].scale(i)
            + &(&(&dx_h0.values[idx].scale(i) * s1) * &hn.values[idx]);
        let r = (&dt_hn.values[idx] - &want).norm_inf();
        let scale = dt_hn.values[idx]
            .norm_inf()
            .max(want.norm_inf())
            .max(T::of(1e-30));
        sup = sup.max(r / scale.max(T::one()));
        any = true;
    }
    if !any {
        return Err(VesselError::DegenerateInput(
            "moment evolution: all grid points masked".into(),
        ));
    }
    Ok((sup, excluded))
}

/// Taylor reconstruction of H_0 (and hence p, q) around x = 0 from moment
/// values at 0.
#[derive(Debug, Clone)]
pub struct TaylorReconstruction<T: Real> {
    /// Taylor coefficients of H_0, degrees 0..=order.
    pub h0_coeffs: Vec<Matrix<T>>,
    /// Taylor coefficients of p.
    pub p_coeffs: Vec<Cx<T>>,
    /// Taylor coefficients of q.
    pub q_coeffs: Vec<Cx<T>>,
}

impl<T: Real> TaylorReconstruction<T> {
    pub fn eval_p(&self, x: T) -> Cx<T> {
        eval_poly(&self.p_coeffs, x)
    }

    pub fn eval_q(&self, x: T) -> Cx<T> {
        eval_poly(&self.q_coeffs, x)
    }
}

fn eval_poly<T: Real>(coeffs: &[Cx<T>], x: T) -> Cx<T> {
    let mut acc = Cx::new(T::zero(), T::zero());
    for c in coeffs.iter().rev() {
        acc = acc * cre(x) + *c;
    }
    acc
}

/// Rebuild the Taylor polynomial of H_0 at 0, to degree `order`, from the
/// moment values H_0(0) .. H_{order+1}(0).
///
/// The derivative relation behind the recursion,
///
///     H_k' = s2' H_{k+1} - H_{k+1} s2'' + sigma1^{-1} gamma_* H_k - H_k gamma sigma1^{-1}
///
/// (s2' = sigma1^{-1} sigma2, s2'' = sigma2 sigma1^{-1}, gamma_* eliminated
/// through the linkage with H_0), propagates jets degree by degree: after
/// round j the coefficients of degree j+1 are known for every level k with
/// k + j + 1 <= order + 1, which is exactly enough to reach H_0's
/// degree-`order` coefficient.
pub fn reconstruct_potential_taylor<T: Real>(
    h_at_zero: &[Matrix<T>],
    order: usize,
) -> Result<TaylorReconstruction<T>> {
    if order > MOMENT_CAP {
        return Err(VesselError::OrderCap { n: order, cap: MOMENT_CAP });
    }
    if h_at_zero.len() < order + 2 {
        return Err(VesselError::InconsistentMoments(format!(
            "need {} moment values for order {order}, got {}",
            order + 2,
            h_at_zero.len()
        )));
    }
    let h0 = &h_at_zero[0];
    let offdiag_gap = (h0[(0, 1)] - h0[(1, 0)]).norm();
    let scale = h0.norm_inf().max(T::one());
    if offdiag_gap > T::of(1e-8) * scale {
        return Err(VesselError::InconsistentMoments(format!(
            "H_0(0) must have equal off-diagonal entries (b0 = c0); gap {:.3e}",
            offdiag_gap.as_f64()
        )));
    }
    let params = crate::params::VesselParameters::<T>::canonical();
    let s1 = params.sigma1.clone();
    let s1i = params.sigma1_inv().clone();
    let s2 = params.sigma2.clone();
    let gamma = params.gamma.clone();
    let left = &s1i * &s2;
    let right = &s2 * &s1i;

    let levels = h_at_zero.len();
    // jets[k][m] = degree-m coefficient of H_k
    let mut jets: Vec<Vec<Matrix<T>>> = (0..levels)
        .map(|k| vec![h_at_zero[k].clone()])
        .collect();
    for round in 0..order {
        // compute degree round+1 coefficients for k + round + 1 <= levels - 1
        for k in 0..levels.saturating_sub(round + 1) {
            // gamma_*(x) jet coefficient of degree `round`
            let h0_j = jets[0][round].clone();
            let mut gs_j = &(&(&s2 * &h0_j) * &s1) - &(&(&s1 * &h0_j) * &s2);
            if round == 0 {
                gs_j = &gs_j + &gamma;
            }
            // [sigma1^{-1} gamma_* H_k]_round via Cauchy product
            let mut conv = Matrix::zeros(2, 2);
            for r in 0..=round {
                let h0_r = &jets[0][r];
                let mut gs_r = &(&(&s2 * h0_r) * &s1) - &(&(&s1 * h0_r) * &s2);
                if r == 0 {
                    gs_r = &gs_r + &gamma;
                }
                conv = &conv + &(&(&s1i * &gs_r) * &jets[k][round - r]);
            }
            let _ = gs_j;
            let lead = &(&left * &jets[k + 1][round]) - &(&jets[k + 1][round] * &right);
            let tail = &jets[k][round] * &(&gamma * &s1i);
            let rhs = &(&lead + &conv) - &tail;
            let coeff = rhs.scale_re(T::one() / T::of((round + 1) as f64));
            jets[k].push(coeff);
        }
    }
    let h0_coeffs: Vec<Matrix<T>> = jets[0].iter().take(order + 1).cloned().collect();
    let p_coeffs = h0_coeffs.iter().map(|m| -(m[(0, 1)] + m[(1, 0)])).collect();
    let q_coeffs = h0_coeffs.iter().map(|m| m[(0, 0)] - m[(1, 1)]).collect();
    Ok(TaylorReconstruction { h0_coeffs, p_coeffs, q_coeffs })
}

/// Report of the moment match achieved by a quadrature node.
#[derive(Debug, Clone)]
pub struct QuadratureFit<T: Real> {
    /// Quadrature nodes mu_j > 0.
    pub nodes: Vec<T>,
    /// 2x2 weight matrices, one per node (full least-squares fit).
    pub weights: Vec<Matrix<T>>,
    /// ||i^n sum_j mu_j^n W_j - H_n(0)|| per supplied moment order, for the
    /// full least-squares weights. Monotone nonincreasing in n_q on a fixed
    /// moment list (the node ladder is nested).
    pub per_moment_residual: Vec<T>,
    /// Largest of the least-squares per-moment residuals.
    pub max_residual: T,
    /// Same residuals for the rank-reduced realization that was actually
    /// assembled into the returned node.
    pub realized_per_moment: Vec<T>,
    /// Largest realized residual.
    pub realized_max: T,
}

/// Nested node ladder (factors applied to the estimated dominant scale), so
/// the fitted span only grows with n_q and the match residual is monotone
/// nonincreasing in n_q on a fixed moment set.
const NODE_LADDER: [f64; 12] =
    [1.0, 1.75, 0.5714285714285714, 3.0625, 0.32653061224489793, 5.359375, 0.1865889212827988, 9.37890625, 0.10662224073302789, 2.0, 0.75, 4.0];

/// Singular triples (sigma, u, v) of a 2x2 complex matrix, sigma descending,
/// via the closed-form eigendecomposition of W^* W.
fn svd2<T: Real>(w: &Matrix<T>) -> Vec<(T, Matrix<T>, Matrix<T>)> {
    let h = &w.adjoint() * w;
    let a = h[(0, 0)].re;
    let b = h[(0, 1)];
    let c = h[(1, 1)].re;
    let half = T::of(0.5);
    let e1 = Matrix::from_rows(&[vec![Cx::new(T::one(), T::zero())], vec![Cx::new(T::zero(), T::zero())]]);
    let e2 = Matrix::from_rows(&[vec![Cx::new(T::zero(), T::zero())], vec![Cx::new(T::one(), T::zero())]]);
    let pair = |sigma2: T, v: Matrix<T>| -> (T, Matrix<T>, Matrix<T>) {
        let sigma = sigma2.max(T::zero()).sqrt();
        let u = if sigma > T::zero() {
            (w * &v).scale(cre(T::one() / sigma))
        } else {
            Matrix::zeros(2, 1)
        };
        (sigma, u, v)
    };
    if b.norm() <= T::of(1e-14) * (a.abs() + c.abs() + T::of(1e-300)) {
        // (near-)diagonal gram matrix: the coordinate directions are the
        // right singular vectors, one each
        let mut out = vec![pair(a, e1), pair(c, e2)];
        if out[1].0 > out[0].0 {
            out.swap(0, 1);
        }
        return out;
    }
    let disc = ((a - c) * (a - c) + T::of(4.0) * b.norm_sqr()).sqrt();
    let eig_hi = (a + c + disc) * half;
    let eig_lo = (a + c - disc) * half;
    let mut out = Vec::new();
    for eig in [eig_hi, eig_lo] {
        let raw = Matrix::from_rows(&[vec![b], vec![cre(eig - a)]]);
        let nrm = (b.norm_sqr() + (eig - a) * (eig - a)).sqrt();
        out.push(pair(eig, raw.scale(cre(T::one() / nrm))));
    }
    out
}

/// A few rounds of shifted inverse iteration with a Rayleigh-quotient
/// refinement; returns the (normalized eigenvector, refined eigenvalue).
fn eigen_pair<T: Real>(m: &Matrix<T>, nu0: Cx<T>, seed: usize) -> Result<(Matrix<T>, Cx<T>)> {
    let dim = m.rows();
    let scale = m.norm_inf().max(T::one());
    let mut v = Matrix::from_fn(dim, 1, |i, _| {
        cx::<T>(1.0 + ((i + seed) % 5) as f64 * 0.37, 0.2 + ((i * 3 + seed) % 7) as f64 * 0.11)
    });
    let mut nu = nu0;
    for round in 0..6 {
        let delta = if round < 3 { T::of(1e-11) } else { T::of(1e-13) };
        let shift = nu + Cx::new(delta * scale, delta * scale);
        let shifted = Matrix::from_fn(dim, dim, |i, j| {
            let d = if i == j { shift } else { Cx::new(T::zero(), T::zero()) };
            m[(i, j)] - d
        });
        v = match shifted.solve(&v, T::of(1e-300)) {
            Ok(x) => x,
            Err(_) => break,
        };
        let nrm = v.norm_inf().max(T::of(1e-300));
        v = v.scale(cre(T::one() / nrm));
        // two-sided Rayleigh refinement
        let mv = m * &v;
        let mut num = Cx::new(T::zero(), T::zero());
        let mut den = Cx::new(T::zero(), T::zero());
        for i in 0..dim {
            num = num + v[(i, 0)].conj() * mv[(i, 0)];
            den = den + v[(i, 0)].conj() * v[(i, 0)];
        }
        if den.norm() > T::zero() {
            nu = num / den;
        }
    }
    let res = (&(m * &v) - &v.scale(nu)).norm_inf();
    if res > T::of(1e-8) * scale {
        return Err(VesselError::IllConditioned(format!(
            "eigenvector residual {:.3e} for eigenvalue {nu0}",
            res.as_f64()
        )));
    }
    Ok((v, nu))
}

/// Realize moment values at x = 0 by a finite signed quadrature: n_q nodes
/// mu_j > 0 with 2x2 weight matrices W_j fitted entrywise in least squares
/// to i^{-n} H_n(0) for n = 0 .. 2 n_q - 1, then assembled into a node with
///
///     A = diag(i mu_j) per 2x2 block, B0 = stacked identities,
///     C0 = [W_1 .. W_{n_q}], X0 = I,
///     A_zeta = -A - B0 sigma1 C0,
///
/// and finally carried into spectral (diagonal A_zeta) coordinates through
/// the two-sided node similarity X -> X Q, C -> C Q with Q the eigenvector
/// matrix of A_zeta. The moments and the realized potential are invariant
/// under that similarity.
pub fn quadrature_node_from_moments<T: Real>(
    h_at_zero: &[Matrix<T>],
    n_q: usize,
) -> Result<(SpectralData<T>, QuadratureFit<T>)> {
    if n_q == 0 {
        return Err(VesselError::Invalid("need at least one quadrature node".into()));
    }
    if h_at_zero.len() < 2 * n_q {
        return Err(VesselError::InconsistentMoments(format!(
            "need {} moment values for n_q = {n_q}, got {}",
            2 * n_q,
            h_at_zero.len()
        )));
    }
    if n_q > NODE_LADDER.len() {
        return Err(VesselError::Invalid(format!(
            "n_q = {n_q} above supported ladder size {}",
            NODE_LADDER.len()
        )));
    }
    let params = crate::params::VesselParameters::<T>::canonical();
    // fit against every supplied moment (at least 2 n_q of them); with the
    // nested node ladder this keeps the match residual monotone in n_q
    let n_mom = h_at_zero.len();
    // de-rotated targets R_n = i^{-n} H_n(0)
    let minus_i = cx::<T>(0.0, -1.0);
    let mut rot = Cx::new(T::one(), T::zero());
    let mut targets: Vec<Matrix<T>> = Vec::with_capacity(n_mom);
    for h in h_at_zero.iter().take(n_mom) {
        targets.push(h.scale(rot));
        rot = rot * minus_i;
    }
    // dominant growth scale from consecutive norms
    let norms: Vec<T> = targets.iter().map(|m| m.norm_inf()).collect();
    let overall = norms.iter().fold(T::zero(), |a, b| a.max(*b));
    let mut ratio = T::zero();
    let mut count = 0;
    for i in 0..n_mom - 1 {
        if norms[i] > overall * T::of(1e-10) && norms[i + 1] > T::zero() {
            ratio = ratio + norms[i + 1] / norms[i];
            count += 1;
        }
    }
    let scale_mu = if count > 0 && ratio > T::zero() {
        (ratio / T::of(count as f64)).max(T::of(0.05))
    } else {
        T::one()
    };
    let nodes: Vec<T> = NODE_LADDER[..n_q].iter().map(|&f| scale_mu * T::of(f)).collect();

    // all moments negligible: the empty node realizes them exactly
    if overall <= T::of(1e-300) {
        let fit = QuadratureFit {
            nodes,
            weights: vec![Matrix::zeros(2, 2); n_q],
            per_moment_residual: vec![T::zero(); n_mom],
            max_residual: T::zero(),
            realized_per_moment: vec![T::zero(); n_mom],
            realized_max: T::zero(),
        };
        return Ok((SpectralData::trivial(), fit));
    }

    // entrywise least squares on the row-scaled Vandermonde system
    let mut vandermonde = Matrix::zeros(n_mom, n_q);
    let mut row_scales: Vec<T> = Vec::with_capacity(n_mom);
    for row in 0..n_mom {
        let mut rmax = T::zero();
        let mut pows: Vec<T> = Vec::with_capacity(n_q);
        for &mu in &nodes {
            let mut v = T::one();
            for _ in 0..row {
                v = v * mu;
            }
            pows.push(v);
            rmax = rmax.max(v.abs());
        }
        let rs = rmax.max(T::of(1e-300));
        row_scales.push(rs);
        for (j, v) in pows.iter().enumerate() {
            vandermonde[(row, j)] = cre(*v / rs);
        }
    }
    let mut weights: Vec<Matrix<T>> = vec![Matrix::zeros(2, 2); n_q];
    for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let rhs = Matrix::from_fn(n_mom, 1, |row, _| targets[row][(r, c)] / cre(row_scales[row]));
        let w = vandermonde.least_squares(&rhs)?;
        for j in 0..n_q {
            weights[j][(r, c)] = w[(j, 0)];
        }
    }

    // least-squares match report of the full weights
    let residuals_of = |triples: &[(T, Matrix<T>, Matrix<T>)]| -> (Vec<T>, T) {
        let mut per = Vec::with_capacity(n_mom);
        let mut max = T::zero();
        for row in 0..n_mom {
            let mut acc = Matrix::zeros(2, 2);
            for (mu, col, rowv) in triples {
                let mut v = T::one();
                for _ in 0..row {
                    v = v * *mu;
                }
                acc = &acc + &(col * rowv).scale_re(v);
            }
            let r = (&acc - &targets[row]).norm_inf();
            per.push(r);
            max = max.max(r);
        }
        (per, max)
    };
    let mut full_triples: Vec<(T, Matrix<T>, Matrix<T>)> = Vec::new();
    for (j, w) in weights.iter().enumerate() {
        for (sigma, u, v) in svd2(w) {
            if sigma > T::zero() {
                full_triples.push((nodes[j], u.scale(cre(sigma)), v.adjoint()));
            }
        }
    }
    let (per_moment_residual, max_residual) = residuals_of(&full_triples);

    // assemble with rank reduction: zero or rank-deficient weights would
    // leave the node non-minimal and its A_zeta defective, and nearly
    // decoupled directions cluster its eigenvalues, so the drop threshold
    // escalates until the spectral coordinates are well conditioned
    let sigma_max = full_triples.iter().map(|(_, c, _)| c.norm_inf()).fold(T::zero(), |a, b| a.max(b));
    let mut last_err: VesselError =
        VesselError::IllConditioned("quadrature assembly failed".into());
    for threshold_rel in [1e-9f64, 1e-7, 1e-5, 1e-3] {
        let keep = sigma_max * T::of(threshold_rel);
        let mut lambdas: Vec<Cx<T>> = Vec::new();
        let mut c_cols: Vec<Matrix<T>> = Vec::new();
        let mut b_rows: Vec<Matrix<T>> = Vec::new();
        let mut kept: Vec<(T, Matrix<T>, Matrix<T>)> = Vec::new();
        for (j, w) in weights.iter().enumerate() {
            for (sigma, u, v) in svd2(w) {
                if sigma > keep {
                    lambdas.push(cx::<T>(0.0, 1.0) * cre(nodes[j]));
                    c_cols.push(u.scale(cre(sigma)));
                    b_rows.push(v.adjoint());
                    kept.push((nodes[j], u.scale(cre(sigma)), v.adjoint()));
                }
            }
        }
        if lambdas.is_empty() {
            let (realized_per_moment, realized_max) = residuals_of(&[]);
            let fit = QuadratureFit {
                nodes,
                weights,
                per_moment_residual,
                max_residual,
                realized_per_moment,
                realized_max,
            };
            return Ok((SpectralData::trivial(), fit));
        }
        match assemble_spectral(&params, &lambdas, &b_rows, &c_cols) {
            Ok(data) => {
                let (realized_per_moment, realized_max) = residuals_of(&kept);
                let fit = QuadratureFit {
                    nodes,
                    weights,
                    per_moment_residual,
                    max_residual,
                    realized_per_moment,
                    realized_max,
                };
                return Ok((data, fit));
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Carry the coordinate realization (A = diag(lambdas), B0 rows, C0
/// columns, X0 = I, A_zeta = -A - B0 sigma1 C0) into spectral coordinates
/// for A_zeta: Durand-Kerner eigenvalues, inverse-iteration eigenvectors,
/// then the two-sided similarity X -> X Q, C -> C Q which leaves the
/// transfer function and the moments unchanged.
fn assemble_spectral<T: Real>(
    params: &crate::params::VesselParameters<T>,
    lambdas: &[Cx<T>],
    b_rows: &[Matrix<T>],
    c_cols: &[Matrix<T>],
) -> Result<SpectralData<T>> {
    let dim = lambdas.len();
    let b0 = Matrix::vstack(&b_rows.iter().collect::<Vec<_>>());
    let c0 = Matrix::hstack(&c_cols.iter().collect::<Vec<_>>());
    let a_mat = Matrix::diag(lambdas);
    let coupling = &(&b0 * &params.sigma1) * &c0;
    let a_zeta = (&a_mat + &coupling).map(|z| -z);
    let eigs = eigenvalues_durand_kerner(&a_zeta)?;
    let sep_scale = a_zeta.norm_inf().max(T::one());
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            if (eigs[i] - eigs[j]).norm() < T::of(1e-8) * sep_scale {
                return Err(VesselError::IllConditioned(format!(
                    "A_zeta eigenvalues {i} and {j} nearly coincide"
                )));
            }
        }
    }
    let mut q_mat = Matrix::zeros(dim, dim);
    let mut mus = Vec::with_capacity(dim);
    for (col, &nu) in eigs.iter().enumerate() {
        let (v, nu_refined) = eigen_pair(&a_zeta, nu, col)?;
        mus.push(nu_refined);
        for i in 0..dim {
            q_mat[(i, col)] = v[(i, 0)];
        }
    }
    let data = SpectralData {
        lambdas: lambdas.to_vec(),
        mus,
        b0,
        c0: &c0 * &q_mat,
        x0: q_mat,
        anchor: T::zero(),
    };
    // invertible-node check at the quadrature tolerance
    let node = crate::vessel::NodeState::from_diagonal(
        &data.lambdas,
        &data.mus,
        data.x0.clone(),
        data.b0.clone(),
        data.c0.clone(),
        params.clone(),
    );
    let res = node.lyapunov_residual();
    if res > T::of(1e-8) * sep_scale {
        return Err(VesselError::IllConditioned(format!(
            "assembled node violates the Lyapunov equation: residual {:.3e}",
            res.as_f64()
        )));
    }
    data.x0.inverse(T::of(1e-12))?;
    Ok(data)
}
