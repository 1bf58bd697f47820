//! Rectangular grids, masked grid functions, and finite-difference
//! differentiation.
//!
//! Derivatives are central differences, second-order accurate, promoted to
//! fourth order by one Richardson step whenever the grid affords the wider
//! stencil. Points whose stencil would touch a masked or out-of-range
//! sample are masked in the output; singularity masks therefore propagate
//! by stencil radius, never silently.

use crate::error::{Result, VesselError};
use crate::matrix::Matrix;
use crate::scalar::{cre, Cx, Real};

/// One uniformly spaced axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis<T: Real> {
    pub start: T,
    pub step: T,
    pub count: usize,
}

impl<T: Real> Axis<T> {
    pub fn linspace(start: T, stop: T, count: usize) -> Self {
        assert!(count >= 1);
        let step = if count > 1 {
            (stop - start) / T::of((count - 1) as f64)
        } else {
            T::one()
        };
        Axis { start, step, count }
    }

    pub fn coord(&self, i: usize) -> T {
        self.start + self.step * T::of(i as f64)
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.count).map(|i| self.coord(i)).collect()
    }
}

/// Which axis of a 2-d grid an operation runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    X,
    T,
}

/// Rectangular (x, t) grid; a pure-x grid has `t.count == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2<T: Real> {
    pub x: Axis<T>,
    pub t: Axis<T>,
}

impl<T: Real> Grid2<T> {
    pub fn len(&self) -> usize {
        self.x.count * self.t.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, it: usize) -> usize {
        it * self.x.count + ix
    }

    pub fn axis(&self, kind: AxisKind) -> &Axis<T> {
        match kind {
            AxisKind::X => &self.x,
            AxisKind::T => &self.t,
        }
    }
}

/// Values a grid function can carry: closed under linear combinations and
/// measurable in sup norm.
pub trait GridValue<T: Real>: Clone {
    fn vscale(&self, c: T) -> Self;
    fn vadd(&self, other: &Self) -> Self;
    fn vsub(&self, other: &Self) -> Self;
    fn vnorm(&self) -> T;
}

impl<T: Real> GridValue<T> for Cx<T> {
    fn vscale(&self, c: T) -> Self {
        *self * cre(c)
    }
    fn vadd(&self, other: &Self) -> Self {
        *self + *other
    }
    fn vsub(&self, other: &Self) -> Self {
        *self - *other
    }
    fn vnorm(&self) -> T {
        self.norm()
    }
}

impl<T: Real> GridValue<T> for Matrix<T> {
    fn vscale(&self, c: T) -> Self {
        self.scale_re(c)
    }
    fn vadd(&self, other: &Self) -> Self {
        self + other
    }
    fn vsub(&self, other: &Self) -> Self {
        self - other
    }
    fn vnorm(&self) -> T {
        self.norm_inf()
    }
}

/// Samples of a scalar- or matrix-valued function on a grid, with a
/// validity mask (true = valid).
#[derive(Debug, Clone)]
pub struct GridFunction<T: Real, V> {
    pub grid: Grid2<T>,
    pub values: Vec<V>,
    pub mask: Vec<bool>,
}

/// Scalar samples.
pub type ScalarField<T> = GridFunction<T, Cx<T>>;
/// 2x2-matrix samples.
pub type MatField<T> = GridFunction<T, Matrix<T>>;

impl<T: Real, V: GridValue<T>> GridFunction<T, V> {
    /// Sample a function; `None` marks the point masked.
    pub fn sample(grid: Grid2<T>, mut f: impl FnMut(T, T) -> Option<V>, fill: V) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut mask = Vec::with_capacity(grid.len());
        for it in 0..grid.t.count {
            for ix in 0..grid.x.count {
                match f(grid.x.coord(ix), grid.t.coord(it)) {
                    Some(v) => {
                        values.push(v);
                        mask.push(true);
                    }
                    None => {
                        values.push(fill.clone());
                        mask.push(false);
                    }
                }
            }
        }
        GridFunction { grid, values, mask }
    }

    pub fn get(&self, ix: usize, it: usize) -> Option<&V> {
        let idx = self.grid.index(ix, it);
        if self.mask[idx] {
            Some(&self.values[idx])
        } else {
            None
        }
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Sup of the value norms over unmasked points.
    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v.vnorm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Pointwise combination of two functions over the shared mask.
    pub fn zip_with(&self, other: &Self, f: impl Fn(&V, &V) -> V) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        let mut values = Vec::with_capacity(self.values.len());
        let mut mask = Vec::with_capacity(self.values.len());
        for i in 0..self.values.len() {
            let ok = self.mask[i] && other.mask[i];
            mask.push(ok);
            values.push(if ok {
                f(&self.values[i], &other.values[i])
            } else {
                self.values[i].clone()
            });
        }
        GridFunction { grid: self.grid, values, mask }
    }

    pub fn map(&self, f: impl Fn(&V) -> V) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(&f).collect(),
            mask: self.mask.clone(),
        }
    }
}

/// Stride policy for finite differences.
///
/// `Auto` widens the stencil step on grids much finer than the
/// roundoff-optimal step for the requested order (high-order differences on
/// very fine grids are otherwise dominated by cancellation noise);
/// convergence studies should pin `Fixed(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stride {
    Auto,
    Fixed(usize),
}

/// 2nd-order central stencil (offset, coefficient) table and its radius.
fn stencil(order: usize) -> Result<(&'static [(isize, f64)], usize)> {
    match order {
        1 => Ok((&[(-1, -0.5), (1, 0.5)], 1)),
        2 => Ok((&[(-1, 1.0), (0, -2.0), (1, 1.0)], 1)),
        3 => Ok((&[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)], 2)),
        4 => Ok((&[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)], 2)),
        _ => Err(VesselError::Stencil { order, need: 0, have: 0 }),
    }
}

/// Roundoff-balanced step target for a 4th-order-accurate difference of the
/// given order (f64 calibration; ~eps^(1/(order+4))).
fn optimal_step(order: usize) -> f64 {
    let eps = 2.2e-16f64;
    eps.powf(1.0 / (order as f64 + 4.0))
}

/// Finite-difference derivative along an axis.
///
/// Second-order central differences with one Richardson step (effective
/// fourth order) whenever the doubled stencil fits; points whose stencil
/// leaves the grid or touches a masked sample are masked in the output.
pub fn fd_derivative<T: Real, V: GridValue<T>>(
    f: &GridFunction<T, V>,
    axis: AxisKind,
    order: usize,
    stride: Stride,
) -> Result<GridFunction<T, V>> {
    let (coeffs, radius) = stencil(order)?;
    let ax = f.grid.axis(axis);
    let n = ax.count;
    let stride = match stride {
        Stride::Fixed(s) => s.max(1),
        Stride::Auto => {
            let dx = ax.step.abs().as_f64();
            let target = optimal_step(order);
            let mut s = if dx > 0.0 { (target / dx).floor() as usize } else { 1 };
            s = s.max(1);
            // keep at least a few interior points after the doubled stencil
            let cap = ((n.saturating_sub(1)) / (4 * radius)).max(1);
            s.min(cap)
        }
    };
    let need = 4 * radius * stride + 1;
    if n < 2 * radius * stride + 1 {
        return Err(VesselError::Stencil { order, need, have: n });
    }
    let rich = n >= need;

    let h = ax.step * T::of(stride as f64);
    let mut hp = T::one();
    for _ in 0..order {
        hp = hp * h;
    }
    let combine = |f: &GridFunction<T, V>, ix: usize, it: usize, step_mult: usize| -> Option<V> {
        let (pos, max) = match axis {
            AxisKind::X => (ix as isize, f.grid.x.count as isize),
            AxisKind::T => (it as isize, f.grid.t.count as isize),
        };
        let mut acc: Option<V> = None;
        for &(off, c) in coeffs {
            let j = pos + off * (stride * step_mult) as isize;
            if j < 0 || j >= max {
                return None;
            }
            let (jx, jt) = match axis {
                AxisKind::X => (j as usize, it),
                AxisKind::T => (ix, j as usize),
            };
            let idx = f.grid.index(jx, jt);
            if !f.mask[idx] {
                return None;
            }
            let mut hm = T::one();
            for _ in 0..order {
                hm = hm * T::of(step_mult as f64);
            }
            let scaled = f.values[idx].vscale(T::of(c) / (hp * hm));
            acc = Some(match acc {
                None => scaled,
                Some(a) => a.vadd(&scaled),
            });
        }
        acc
    };

    let mut values = Vec::with_capacity(f.values.len());
    let mut mask = Vec::with_capacity(f.values.len());
    for it in 0..f.grid.t.count {
        for ix in 0..f.grid.x.count {
            // a masked input point stays masked even when its centered
            // stencil happens not to touch offset zero
            if !f.mask[f.grid.index(ix, it)] {
                values.push(f.values[f.grid.index(ix, it)].clone());
                mask.push(false);
                continue;
            }
            // uniform accuracy: when the grid affords Richardson, a point
            // either gets the full fourth-order value or is masked
            let out = if rich {
                match (combine(f, ix, it, 1), combine(f, ix, it, 2)) {
                    // Richardson: (4 D_h - D_2h)/3 cancels the h^2 error term
                    (Some(dh), Some(d2h)) => {
                        Some(dh.vscale(T::of(4.0 / 3.0)).vsub(&d2h.vscale(T::of(1.0 / 3.0))))
                    }
                    _ => None,
                }
            } else {
                combine(f, ix, it, 1)
            };
            match out {
                Some(v) => {
                    values.push(v);
                    mask.push(true);
                }
                None => {
                    values.push(f.values[f.grid.index(ix, it)].clone());
                    mask.push(false);
                }
            }
        }
    }
    Ok(GridFunction { grid: f.grid, values, mask })
}
