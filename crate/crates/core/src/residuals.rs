//! Residual evaluation for the integrable evolution equation satisfied by
//! beta = tau'/tau and for every intermediate identity in its derivation
//! chain (the p/q evolution, the beta_t identity, the (p')^2+(q')^2
//! identity, the fourth-order form, and the potential's t-evolution).
//!
//! All residuals are relative: each is divided pointwise by the largest of
//! its constituent terms, so tolerances are scale-free across solitons.
//! Derivatives are taken at fixed stride 1 so mesh-refinement studies see
//! the analytic convergence order.

use crate::construction::VesselFamily;
use crate::error::{Result, VesselError};
use crate::grid::{fd_derivative, AxisKind, Grid2, GridFunction, MatField, ScalarField, Stride};
use crate::matrix::Matrix;
use crate::scalar::{cre, cx, Cx, Real, Tolerances};

/// Scalar fields carried by a vessel family on a grid.
#[derive(Debug, Clone)]
pub struct FieldSet<T: Real> {
    pub tau: ScalarField<T>,
    pub beta: ScalarField<T>,
    pub p: ScalarField<T>,
    pub q: ScalarField<T>,
}

/// Sample tau, beta, p, q of a family over a grid. Points where tau is
/// (relatively) below `mask_rel` or where the state cannot be formed are
/// masked.
pub fn sample_fields<T: Real>(
    family: &VesselFamily<T>,
    grid: Grid2<T>,
    mask_rel: T,
) -> Result<FieldSet<T>> {
    let zero = Cx::new(T::zero(), T::zero());
    let tau_raw: Vec<Cx<T>> = grid
        .t
        .coords()
        .iter()
        .flat_map(|&t| {
            grid.x
                .coords()
                .iter()
                .map(|&x| family.tau_unchecked(x, t))
                .collect::<Vec<_>>()
        })
        .collect();
    let tau_scale = tau_raw.iter().map(|z| z.norm()).fold(T::zero(), |a, b| a.max(b));
    if tau_scale == T::zero() {
        return Err(VesselError::DegenerateInput("tau vanishes on the whole grid".into()));
    }
    let mut tau = GridFunction {
        grid,
        values: tau_raw,
        mask: vec![true; grid.len()],
    };
    for i in 0..tau.values.len() {
        if tau.values[i].norm() < mask_rel * tau_scale {
            tau.mask[i] = false;
        }
    }
    let mut beta = GridFunction { grid, values: vec![zero; grid.len()], mask: vec![false; grid.len()] };
    let mut p = beta.clone();
    let mut q = beta.clone();
    for it in 0..grid.t.count {
        for ix in 0..grid.x.count {
            let idx = grid.index(ix, it);
            if !tau.mask[idx] {
                continue;
            }
            let state = match family.state(grid.x.coord(ix), grid.t.coord(it)) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let (pv, qv) = match state.potential_pq() {
                Ok(v) => v,
                Err(_) => continue,
            };
            let bv = match state.beta() {
                Ok(v) => v,
                Err(_) => continue,
            };
            beta.values[idx] = bv;
            p.values[idx] = pv;
            q.values[idx] = qv;
            beta.mask[idx] = true;
            p.mask[idx] = true;
            q.mask[idx] = true;
        }
    }
    Ok(FieldSet { tau, beta, p, q })
}

/// Mark the cells adjacent to a sign change of Re(tau) along x (the zero
/// line of tau passes within one cell of every marked point), plus any
/// cell where |tau| is negligibly small outright.
pub fn singular_mask<T: Real>(tau: &ScalarField<T>) -> Vec<bool> {
    let grid = tau.grid;
    let scale = tau.values.iter().map(|z| z.norm()).fold(T::zero(), |a, b| a.max(b));
    let mut out = vec![false; grid.len()];
    if scale == T::zero() {
        return vec![true; grid.len()];
    }
    let tiny = T::of(1e-10) * scale;
    for it in 0..grid.t.count {
        for ix in 0..grid.x.count {
            let idx = grid.index(ix, it);
            let v = tau.values[idx];
            if v.norm() < tiny {
                out[idx] = true;
                continue;
            }
            // only meaningful when tau is essentially real
            if v.im.abs() > T::of(1e-6) * scale {
                continue;
            }
            if ix + 1 < grid.x.count {
                let w = tau.values[grid.index(ix + 1, it)];
                if w.im.abs() <= T::of(1e-6) * scale && (v.re * w.re) < T::zero() {
                    out[idx] = true;
                    out[grid.index(ix + 1, it)] = true;
                }
            }
        }
    }
    out
}

/// Linear-interpolated roots of Re(tau) along each t-row; returns
/// (t-index, interpolated x of the zero).
pub fn locate_tau_zeros_x<T: Real>(tau: &ScalarField<T>) -> Vec<(usize, T)> {
    let grid = tau.grid;
    let mut out = Vec::new();
    for it in 0..grid.t.count {
        for ix in 0..grid.x.count.saturating_sub(1) {
            let a = tau.values[grid.index(ix, it)];
            let b = tau.values[grid.index(ix + 1, it)];
            if a.re * b.re < T::zero() {
                let frac = a.re / (a.re - b.re);
                out.push((it, grid.x.coord(ix) + grid.x.step * frac));
            }
        }
    }
    out
}

fn d<T: Real>(
    f: &ScalarField<T>,
    axis: AxisKind,
    order: usize,
) -> Result<ScalarField<T>> {
    fd_derivative(f, axis, order, Stride::Fixed(1))
}

fn dmat<T: Real>(
    f: &MatField<T>,
    axis: AxisKind,
    order: usize,
) -> Result<MatField<T>> {
    fd_derivative(f, axis, order, Stride::Fixed(1))
}

/// numerator / max(|terms|, floor), sharing masks; `floor` is relative to
/// the largest term magnitude seen anywhere on the grid, so fully vanishing
/// identities report zero rather than noise ratios.
fn normalize<T: Real>(
    numerator: &ScalarField<T>,
    terms: &[&ScalarField<T>],
) -> ScalarField<T> {
    let grid = numerator.grid;
    let mut global = T::zero();
    for t in terms {
        global = global.max(t.sup_norm());
    }
    let floor = (global * T::of(1e-10)).max(T::of(1e-300));
    let mut out = numerator.clone();
    for i in 0..out.values.len() {
        let mut ok = numerator.mask[i];
        let mut denom = floor;
        for t in terms {
            ok = ok && t.mask[i];
            if ok {
                denom = denom.max(t.values[i].norm());
            }
        }
        out.mask[i] = ok;
        if ok {
            out.values[i] = numerator.values[i] / cre(denom);
        }
    }
    let _ = grid;
    out
}

fn require_unmasked<T: Real>(f: &ScalarField<T>, what: &str) -> Result<()> {
    if f.valid_count() == 0 {
        return Err(VesselError::DegenerateInput(format!(
            "{what}: every grid point is masked"
        )));
    }
    Ok(())
}

/// Pointwise product helper.
fn mul<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> ScalarField<T> {
    a.zip_with(b, |x, y| *x * *y)
}

fn add<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> ScalarField<T> {
    a.zip_with(b, |x, y| *x + *y)
}

fn sub<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> ScalarField<T> {
    a.zip_with(b, |x, y| *x - *y)
}

fn scale<T: Real>(a: &ScalarField<T>, c: Cx<T>) -> ScalarField<T> {
    a.map(|v| *v * c)
}

/// Relative residual of the evolution equation for beta:
///
///     beta_tt = d/dx [ -1/2 (beta')^2 - 1/4 beta''' + ((beta_t)^2 + 1/4 (beta'')^2) / beta' ]
///
/// Points with |beta'| below `eps_beta` are masked (the equation divides by
/// beta'). Errors if the whole grid ends up masked.
pub fn canonical_pde_residual<T: Real>(
    beta: &ScalarField<T>,
    eps_beta: T,
) -> Result<ScalarField<T>> {
    let bx = d(beta, AxisKind::X, 1)?;
    let bxx = d(beta, AxisKind::X, 2)?;
    let bxxx = d(beta, AxisKind::X, 3)?;
    let bt = d(beta, AxisKind::T, 1)?;
    let btt = d(beta, AxisKind::T, 2)?;

    // bracket pieces
    let g1 = scale(&mul(&bx, &bx), cx::<T>(-0.5, 0.0));
    let g2 = scale(&bxxx, cx::<T>(-0.25, 0.0));
    let mut ratio_num = add(&mul(&bt, &bt), &scale(&mul(&bxx, &bxx), cx::<T>(0.25, 0.0)));
    // mask the division where beta' is too small
    for i in 0..ratio_num.values.len() {
        if !bx.mask[i] || bx.values[i].norm() < eps_beta {
            ratio_num.mask[i] = false;
        }
    }
    let g3 = ratio_num.zip_with(&bx, |n, b| *n / *b);

    let d1 = d(&g1, AxisKind::X, 1)?;
    let d2 = d(&g2, AxisKind::X, 1)?;
    let d3 = d(&g3, AxisKind::X, 1)?;

    let rhs = add(&add(&d1, &d2), &d3);
    let numerator = sub(&btt, &rhs);
    let out = normalize(&numerator, &[&btt, &d1, &d2, &d3]);
    require_unmasked(&out, "canonical pde residual")?;
    Ok(out)
}

/// Relative residual of the fourth-order form of the same equation,
///
///     beta_tt + beta' beta'' + 1/4 beta'''' + d/dx[(p')^2 + (q')^2] = 0,
///
/// which carries the derivation-chain algebra without the beta' division.
pub fn dbetapre_residual<T: Real>(
    beta: &ScalarField<T>,
    p: &ScalarField<T>,
    q: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    let bx = d(beta, AxisKind::X, 1)?;
    let bxx = d(beta, AxisKind::X, 2)?;
    let bxxxx = d(beta, AxisKind::X, 4)?;
    let btt = d(beta, AxisKind::T, 2)?;
    let px = d(p, AxisKind::X, 1)?;
    let qx = d(q, AxisKind::X, 1)?;
    let grad2 = add(&mul(&px, &px), &mul(&qx, &qx));
    let dgrad2 = d(&grad2, AxisKind::X, 1)?;
    let t2 = mul(&bx, &bxx);
    let t3 = scale(&bxxxx, cx::<T>(0.25, 0.0));
    let numerator = add(&add(&btt, &t2), &add(&t3, &dgrad2));
    let out = normalize(&numerator, &[&btt, &t2, &t3, &dgrad2]);
    require_unmasked(&out, "fourth-order form residual")?;
    Ok(out)
}

/// Relative residuals of the coupled evolution of the potential entries:
///
///     p_t = q (p^2 + q^2) - q_xx / 2,
///     q_t = -p (p^2 + q^2) + p_xx / 2.
pub fn pq_evolution_residual<T: Real>(
    p: &ScalarField<T>,
    q: &ScalarField<T>,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    let pt = d(p, AxisKind::T, 1)?;
    let qt = d(q, AxisKind::T, 1)?;
    let pxx = d(p, AxisKind::X, 2)?;
    let qxx = d(q, AxisKind::X, 2)?;
    let p2q2 = add(&mul(p, p), &mul(q, q));
    let half = cx::<T>(0.5, 0.0);

    let t_p = mul(q, &p2q2);
    let t_p2 = scale(&qxx, half);
    let num_p = sub(&pt, &sub(&t_p, &t_p2));
    let r_p = normalize(&num_p, &[&pt, &t_p, &t_p2]);

    let t_q = mul(p, &p2q2);
    let t_q2 = scale(&pxx, half);
    let num_q = sub(&qt, &sub(&scale(&t_q, cx::<T>(-1.0, 0.0)), &scale(&t_q2, cx::<T>(-1.0, 0.0))));
    let r_q = normalize(&num_q, &[&qt, &t_q, &t_q2]);
    require_unmasked(&r_p, "p evolution residual")?;
    require_unmasked(&r_q, "q evolution residual")?;
    Ok((r_p, r_q))
}

/// Relative residual of -beta_t = q p_x - p q_x. The identity holds up to a
/// constant of integration; `mean_offset` subtracts the grid mean of the
/// raw numerator before normalizing.
pub fn beta_t_identity_residual<T: Real>(
    beta: &ScalarField<T>,
    p: &ScalarField<T>,
    q: &ScalarField<T>,
    mean_offset: bool,
) -> Result<ScalarField<T>> {
    let bt = d(beta, AxisKind::T, 1)?;
    let px = d(p, AxisKind::X, 1)?;
    let qx = d(q, AxisKind::X, 1)?;
    let t1 = mul(q, &px);
    let t2 = mul(p, &qx);
    let mut numerator = add(&bt, &sub(&t1, &t2));
    if mean_offset {
        let mut acc = Cx::new(T::zero(), T::zero());
        let mut count = 0usize;
        for i in 0..numerator.values.len() {
            if numerator.mask[i] {
                acc = acc + numerator.values[i];
                count += 1;
            }
        }
        if count > 0 {
            let mean = acc / cre(T::of(count as f64));
            for i in 0..numerator.values.len() {
                if numerator.mask[i] {
                    numerator.values[i] = numerator.values[i] - mean;
                }
            }
        }
    }
    let out = normalize(&numerator, &[&bt, &t1, &t2]);
    require_unmasked(&out, "beta_t identity residual")?;
    Ok(out)
}

/// Relative residual of (beta_t)^2 + 1/4 (beta'')^2 = -beta' ((p_x)^2 + (q_x)^2).
pub fn px2qx2_identity_residual<T: Real>(
    beta: &ScalarField<T>,
    p: &ScalarField<T>,
    q: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    let bt = d(beta, AxisKind::T, 1)?;
    let bx = d(beta, AxisKind::X, 1)?;
    let bxx = d(beta, AxisKind::X, 2)?;
    let px = d(p, AxisKind::X, 1)?;
    let qx = d(q, AxisKind::X, 1)?;
    let t1 = mul(&bt, &bt);
    let t2 = scale(&mul(&bxx, &bxx), cx::<T>(0.25, 0.0));
    let t3 = mul(&bx, &add(&mul(&px, &px), &mul(&qx, &qx)));
    let numerator = add(&add(&t1, &t2), &t3);
    let out = normalize(&numerator, &[&t1, &t2, &t3]);
    require_unmasked(&out, "gradient identity residual")?;
    Ok(out)
}

/// Relative residual of the potential's evolution equation,
///
///     (gamma_*)_t = -i gamma_* (H_0)_x sigma1 + i sigma1 (H_0)_xx sigma1
///                   + i sigma1 (H_0)_x gamma_*,
///
/// evaluated from the family's own gamma_* and H_0 samples.
pub fn gamma_star_evolution_residual<T: Real>(
    family: &VesselFamily<T>,
    grid: Grid2<T>,
) -> Result<ScalarField<T>> {
    let tol = Tolerances::<T>::default();
    let fill = Matrix::zeros(2, 2);
    let gs: MatField<T> = GridFunction::sample(
        grid,
        |x, t| family.state(x, t).ok().map(|s| s.gamma_star),
        fill.clone(),
    );
    let h0: MatField<T> = GridFunction::sample(
        grid,
        |x, t| family.state(x, t).ok().and_then(|s| s.moment(0).ok()),
        fill.clone(),
    );
    let gst = dmat(&gs, AxisKind::T, 1)?;
    let h0x = dmat(&h0, AxisKind::X, 1)?;
    let h0xx = dmat(&h0, AxisKind::X, 2)?;
    let s1 = &family.params.sigma1;
    let i = cx::<T>(0.0, 1.0);
    let zero = Cx::new(T::zero(), T::zero());

    let mut num = GridFunction { grid, values: vec![zero; grid.len()], mask: vec![false; grid.len()] };
    let mut t1f = num.clone();
    let mut t2f = num.clone();
    let mut t3f = num.clone();
    for idx in 0..grid.len() {
        if !(gst.mask[idx] && h0x.mask[idx] && h0xx.mask[idx] && gs.mask[idx]) {
            continue;
        }
        let term1 = (&(&gs.values[idx] * &h0x.values[idx]) * s1).scale(-i);
        let term2 = (&(s1 * &h0xx.values[idx]) * s1).scale(i);
        let term3 = (&(s1 * &h0x.values[idx]) * &gs.values[idx]).scale(i);
        let want = &(&term1 + &term2) + &term3;
        let r = (&gst.values[idx] - &want).norm_inf();
        num.values[idx] = Cx::new(r, T::zero());
        t1f.values[idx] = Cx::new(term1.norm_inf().max(gst.values[idx].norm_inf()), T::zero());
        t2f.values[idx] = Cx::new(term2.norm_inf(), T::zero());
        t3f.values[idx] = Cx::new(term3.norm_inf(), T::zero());
        num.mask[idx] = true;
        t1f.mask[idx] = true;
        t2f.mask[idx] = true;
        t3f.mask[idx] = true;
    }
    let out = normalize(&num, &[&t1f, &t2f, &t3f]);
    require_unmasked(&out, "potential evolution residual")?;
    let _ = tol;
    Ok(out)
}
