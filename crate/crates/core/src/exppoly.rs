//! Exponential polynomials: finite sums of terms `c * s^k * e^{a s}`.
//!
//! Entries of the evolved vessel operators are exactly of this form, so the
//! x- and t-integrals defining X can be evaluated in closed form instead of
//! by quadrature. Resonant terms (rate a = 0) integrate to polynomials; the
//! degenerate two-mode soliton rides on exactly that branch.

use crate::matrix::Matrix;
use crate::scalar::{cre, exp_m1_cx, Cx, Real};

/// Rates with magnitude below this absolute threshold are treated as exact
/// resonances and integrated on the polynomial branch.
const RESONANCE_EPS: f64 = 1e-13;

/// One term `coeff * s^power * e^{rate * s}`.
#[derive(Debug, Clone, Copy)]
pub struct Term<T: Real> {
    pub coeff: Cx<T>,
    pub power: u32,
    pub rate: Cx<T>,
}

/// Finite sum of exponential-polynomial terms in one variable.
#[derive(Debug, Clone)]
pub struct ExpPoly<T: Real> {
    terms: Vec<Term<T>>,
}

impl<T: Real> ExpPoly<T> {
    pub fn zero() -> Self {
        ExpPoly { terms: Vec::new() }
    }

    pub fn constant(c: Cx<T>) -> Self {
        ExpPoly {
            terms: vec![Term { coeff: c, power: 0, rate: Cx::new(T::zero(), T::zero()) }],
        }
    }

    /// `c * s^k * e^{a s}`.
    pub fn term(coeff: Cx<T>, power: u32, rate: Cx<T>) -> Self {
        ExpPoly { terms: vec![Term { coeff, power, rate }] }
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        let mut out = ExpPoly { terms };
        out.merge();
        out
    }

    pub fn scale(&self, c: Cx<T>) -> Self {
        ExpPoly {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: t.coeff * c, power: t.power, rate: t.rate })
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(Term {
                    coeff: a.coeff * b.coeff,
                    power: a.power + b.power,
                    rate: a.rate + b.rate,
                });
            }
        }
        let mut out = ExpPoly { terms };
        out.merge();
        out
    }

    /// Combine terms with bit-identical (power, rate) and drop exact zeros.
    fn merge(&mut self) {
        let mut merged: Vec<Term<T>> = Vec::with_capacity(self.terms.len());
        'outer: for t in &self.terms {
            for m in merged.iter_mut() {
                if m.power == t.power && m.rate == t.rate {
                    m.coeff = m.coeff + t.coeff;
                    continue 'outer;
                }
            }
            merged.push(*t);
        }
        merged.retain(|t| t.coeff.norm_sqr() != T::zero());
        self.terms = merged;
    }

    pub fn eval(&self, s: T) -> Cx<T> {
        let mut acc = Cx::new(T::zero(), T::zero());
        for t in &self.terms {
            let mut p = Cx::new(T::one(), T::zero());
            for _ in 0..t.power {
                p = p * cre(s);
            }
            acc = acc + t.coeff * p * (t.rate * cre(s)).exp();
        }
        acc
    }

    /// Exact integral over [0, s].
    pub fn integrate(&self, s: T) -> Cx<T> {
        let mut acc = Cx::new(T::zero(), T::zero());
        for t in &self.terms {
            acc = acc + t.coeff * int_pow_exp(t.power, t.rate, s);
        }
        acc
    }
}

/// `int_0^s v^k e^{a v} dv`, exact with resonance and cancellation handling.
fn int_pow_exp<T: Real>(k: u32, rate: Cx<T>, s: T) -> Cx<T> {
    let zero = Cx::new(T::zero(), T::zero());
    if s == T::zero() {
        return zero;
    }
    let spow = |p: u32| -> Cx<T> {
        let mut acc = Cx::new(T::one(), T::zero());
        for _ in 0..p {
            acc = acc * cre(s);
        }
        acc
    };
    if rate.norm() < T::of(RESONANCE_EPS) {
        // polynomial branch: s^{k+1}/(k+1)
        return spow(k + 1) / cre(T::of((k + 1) as f64));
    }
    let u = rate * cre(s);
    if u.norm() < T::of(0.5) {
        // series branch, avoids cancellation of e^u - 1 style expressions:
        // int = s^{k+1} * sum_m u^m / (m! (k+m+1))
        let mut sum = zero;
        let mut upow = Cx::new(T::one(), T::zero());
        let mut fact = T::one();
        for m in 0..24u32 {
            if m > 0 {
                upow = upow * u;
                fact = fact * T::of(m as f64);
            }
            sum = sum + upow / cre(fact * T::of((k + m + 1) as f64));
        }
        return spow(k + 1) * sum;
    }
    // upward recursion: I_0 = (e^u - 1)/a, I_k = (s^k e^u - k I_{k-1})/a
    let eu = u.exp();
    let mut acc = exp_m1_cx(u) / rate;
    for j in 1..=k {
        acc = (spow(j) * eu - acc * cre(T::of(j as f64))) / rate;
    }
    acc
}

/// 2x2 matrix whose entries are exponential polynomials in one variable.
#[derive(Debug, Clone)]
pub struct ExpMat2<T: Real> {
    pub e: [ExpPoly<T>; 4],
}

impl<T: Real> ExpMat2<T> {
    pub fn from_const(m: &Matrix<T>) -> Self {
        assert!(m.rows() == 2 && m.cols() == 2);
        ExpMat2 {
            e: [
                ExpPoly::constant(m[(0, 0)]),
                ExpPoly::constant(m[(0, 1)]),
                ExpPoly::constant(m[(1, 0)]),
                ExpPoly::constant(m[(1, 1)]),
            ],
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let a = &self.e;
        let b = &other.e;
        ExpMat2 {
            e: [
                a[0].mul(&b[0]).add(&a[1].mul(&b[2])),
                a[0].mul(&b[1]).add(&a[1].mul(&b[3])),
                a[2].mul(&b[0]).add(&a[3].mul(&b[2])),
                a[2].mul(&b[1]).add(&a[3].mul(&b[3])),
            ],
        }
    }

    /// row (1x2) * self * col (2x1) as a scalar exponential polynomial.
    pub fn bilinear(&self, row: &Matrix<T>, col: &Matrix<T>) -> ExpPoly<T> {
        assert!(row.rows() == 1 && row.cols() == 2 && col.rows() == 2 && col.cols() == 1);
        let mut acc = ExpPoly::zero();
        for (idx, e) in self.e.iter().enumerate() {
            let (i, j) = (idx / 2, idx % 2);
            let c = row[(0, i)] * col[(j, 0)];
            if c.norm_sqr() != T::zero() {
                acc = acc.add(&e.scale(c));
            }
        }
        acc
    }
}

/// Entries of `e^{s M}` for a constant 2x2 matrix M, as exponential
/// polynomials in s. Uses the trace/traceless split; a (near-)defective M
/// takes the polynomial branch `e^{mu s}(I + s N)`.
pub fn exp_of<T: Real>(m: &Matrix<T>) -> ExpMat2<T> {
    assert!(m.rows() == 2 && m.cols() == 2);
    let half = cre(T::of(0.5));
    let mu = m.trace() * half;
    let n = m - &Matrix::diag(&[mu, mu]);
    let detn = n[(0, 0)] * n[(1, 1)] - n[(0, 1)] * n[(1, 0)];
    let delta = (-detn).sqrt();
    let scale = m.norm_inf().max(T::one());
    let one = Cx::new(T::one(), T::zero());
    if delta.norm() <= T::of(1e-8) * scale {
        // e^{mu s} (I + s N)
        let ident: Matrix<T> = Matrix::identity(2);
        let mk = |i: usize, j: usize| {
            let mut p = ExpPoly::zero();
            if ident[(i, j)].norm_sqr() != T::zero() {
                p = p.add(&ExpPoly::term(ident[(i, j)], 0, mu));
            }
            let nij = n[(i, j)];
            if nij.norm_sqr() != T::zero() {
                p = p.add(&ExpPoly::term(nij, 1, mu));
            }
            p
        };
        ExpMat2 { e: [mk(0, 0), mk(0, 1), mk(1, 0), mk(1, 1)] }
    } else {
        // cosh(delta s) I + sinh(delta s)/delta N, expanded into e^{(mu±delta)s}
        let rp = mu + delta;
        let rm = mu - delta;
        let mk = |i: usize, j: usize| {
            let idv = if i == j { one } else { Cx::new(T::zero(), T::zero()) };
            let cp = (idv + n[(i, j)] / delta) * half;
            let cm = (idv - n[(i, j)] / delta) * half;
            let mut p = ExpPoly::zero();
            if cp.norm_sqr() != T::zero() {
                p = p.add(&ExpPoly::term(cp, 0, rp));
            }
            if cm.norm_sqr() != T::zero() {
                p = p.add(&ExpPoly::term(cm, 0, rm));
            }
            p
        };
        ExpMat2 { e: [mk(0, 0), mk(0, 1), mk(1, 0), mk(1, 1)] }
    }
}
