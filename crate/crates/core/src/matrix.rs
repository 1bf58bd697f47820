//! Minimal dense complex linear algebra sized for 2x2 blocks and small
//! inner-space operators (dimensions up to a few dozen).
//!
//! Determinants and inverses use exact cofactor formulas for dimensions 1
//! and 2 and LU with partial pivoting above that. Everything is a pure
//! function of its inputs; matrices are plain values.

use crate::error::{Result, VesselError};
use crate::scalar::{cre, Cx, Real};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Hard ceiling on operator dimensions; this library is desk-scale by design.
pub const DIM_CEILING: usize = 64;

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Cx::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::new(T::one(), T::zero());
        }
        m
    }

    /// Build from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Build from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<Cx<T>>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn diag(entries: &[Cx<T>]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Matrix<T> {
        Matrix::from_fn(1, self.cols, |_, j| self[(i, j)])
    }

    pub fn col(&self, j: usize) -> Matrix<T> {
        Matrix::from_fn(self.rows, 1, |i, _| self[(i, j)])
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Matrix<T> {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(Cx<T>) -> Cx<T>) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, c: Cx<T>) -> Matrix<T> {
        self.map(|z| z * c)
    }

    pub fn scale_re(&self, c: T) -> Matrix<T> {
        self.map(|z| z * cre(c))
    }

    pub fn trace(&self) -> Cx<T> {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).fold(Cx::new(T::zero(), T::zero()), |a, b| a + b)
    }

    /// Max-absolute-entry norm; the library's working infinity norm.
    pub fn norm_inf(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Mixed absolute/relative closeness on every entry.
    pub fn approx_eq(&self, other: &Matrix<T>, atol: T, rtol: T) -> bool {
        if self.rows != other.rows || self.cols != other.cols {
            return false;
        }
        let scale = self.norm_inf().max(other.norm_inf());
        self.data
            .iter()
            .zip(other.data.iter())
            .all(|(a, b)| (*a - *b).norm() <= atol + rtol * scale)
    }

    /// All entries finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn expect_square(&self, what: &str) -> Result<()> {
        if !self.is_square() {
            return Err(VesselError::Dimension(format!(
                "{what} requires a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.rows > DIM_CEILING {
            return Err(VesselError::Dimension(format!(
                "{what}: dimension {} above ceiling {DIM_CEILING}",
                self.rows
            )));
        }
        Ok(())
    }

    /// Determinant: exact cofactor formulas for n <= 2, LU with partial
    /// pivoting above. The empty matrix has determinant one.
    pub fn det(&self) -> Result<Cx<T>> {
        self.expect_square("det")?;
        let one = Cx::new(T::one(), T::zero());
        match self.rows {
            0 => Ok(one),
            1 => Ok(self[(0, 0)]),
            2 => Ok(self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)]),
            _ => {
                let (lu, _, sign_flips) = self.lu_factor();
                let mut det = if sign_flips % 2 == 0 { one } else { -one };
                for i in 0..self.rows {
                    det = det * lu[(i, i)];
                }
                Ok(det)
            }
        }
    }

    fn lu_factor(&self) -> (Matrix<T>, Vec<usize>, usize) {
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut flips = 0usize;
        for k in 0..n {
            // partial pivot on column k
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in k + 1..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                flips += 1;
            }
            let piv = lu[(k, k)];
            if piv.norm() == T::zero() {
                continue; // exactly singular column; det picks up the zero
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - f * v;
                }
            }
        }
        (lu, perm, flips)
    }

    /// Scale against which |det| is judged for singularity reporting:
    /// the product of row maxima (Hadamard-style bound), floored at one
    /// so that tiny matrices are still caught.
    fn det_scale(&self) -> T {
        let mut scale = T::one();
        for i in 0..self.rows {
            let mut row_max = T::zero();
            for j in 0..self.cols {
                row_max = row_max.max(self[(i, j)].norm());
            }
            if row_max > T::zero() {
                scale = scale * row_max;
            }
        }
        scale.max(T::one())
    }

    /// Inverse with a singularity guard: |det| must clear
    /// `eps_sing * det_scale`. Near-singular input is reported, not
    /// silently inverted, because a vanishing determinant marks genuine
    /// vessel singularities downstream.
    pub fn inverse(&self, eps_sing: T) -> Result<Matrix<T>> {
        self.expect_square("inverse")?;
        let det = self.det()?;
        let threshold = eps_sing * self.det_scale();
        if det.norm() <= threshold {
            return Err(VesselError::Singular {
                det_mag: det.norm().as_f64(),
                threshold: threshold.as_f64(),
            });
        }
        match self.rows {
            0 => Ok(Matrix::zeros(0, 0)),
            1 => {
                let mut m = Matrix::zeros(1, 1);
                m[(0, 0)] = Cx::new(T::one(), T::zero()) / self[(0, 0)];
                Ok(m)
            }
            2 => {
                let mut m = Matrix::zeros(2, 2);
                m[(0, 0)] = self[(1, 1)] / det;
                m[(0, 1)] = -self[(0, 1)] / det;
                m[(1, 0)] = -self[(1, 0)] / det;
                m[(1, 1)] = self[(0, 0)] / det;
                Ok(m)
            }
            n => {
                let (lu, perm, _) = self.lu_factor();
                let mut inv = Matrix::zeros(n, n);
                for col in 0..n {
                    let mut b = vec![Cx::new(T::zero(), T::zero()); n];
                    b[col] = Cx::new(T::one(), T::zero());
                    let x = lu_solve_vec(&lu, &perm, &b);
                    for i in 0..n {
                        inv[(i, col)] = x[i];
                    }
                }
                Ok(inv)
            }
        }
    }

    /// Solve `self * X = rhs` by LU.
    pub fn solve(&self, rhs: &Matrix<T>, eps_sing: T) -> Result<Matrix<T>> {
        self.expect_square("solve")?;
        if rhs.rows != self.rows {
            return Err(VesselError::Dimension(format!(
                "solve: rhs has {} rows, matrix is {}x{}",
                rhs.rows, self.rows, self.cols
            )));
        }
        let inv = self.inverse(eps_sing)?;
        Ok(&inv * rhs)
    }

    /// Least-squares solution of `self * x = rhs` (rows >= cols) by
    /// Householder QR. Returns the minimizer.
    pub fn least_squares(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        let (m, n) = (self.rows, self.cols);
        if m < n {
            return Err(VesselError::Dimension(format!(
                "least_squares: underdetermined system {m}x{n}"
            )));
        }
        if rhs.rows != m {
            return Err(VesselError::Dimension("least_squares: rhs row mismatch".into()));
        }
        let mut a = self.clone();
        let mut b = rhs.clone();
        let zero = Cx::new(T::zero(), T::zero());
        // Householder triangularization applied to [A | b].
        for k in 0..n {
            let mut alpha = T::zero();
            for i in k..m {
                alpha = alpha + a[(i, k)].norm_sqr();
            }
            let alpha = alpha.sqrt();
            if alpha == T::zero() {
                return Err(VesselError::IllConditioned(format!(
                    "least_squares: column {k} numerically zero"
                )));
            }
            let akk = a[(k, k)];
            let phase = if akk.norm() > T::zero() {
                akk / cre(akk.norm())
            } else {
                Cx::new(T::one(), T::zero())
            };
            let mut v = vec![zero; m - k];
            v[0] = akk + phase * cre(alpha);
            for i in k + 1..m {
                v[i - k] = a[(i, k)];
            }
            let vnorm2 = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
            if vnorm2 == T::zero() {
                continue;
            }
            let two_over = cre(T::of(2.0) / vnorm2);
            for j in k..n {
                let mut dot = zero;
                for i in 0..m - k {
                    dot = dot + v[i].conj() * a[(k + i, j)];
                }
                let f = dot * two_over;
                for i in 0..m - k {
                    let old = a[(k + i, j)];
                    a[(k + i, j)] = old - f * v[i];
                }
            }
            for j in 0..b.cols {
                let mut dot = zero;
                for i in 0..m - k {
                    dot = dot + v[i].conj() * b[(k + i, j)];
                }
                let f = dot * two_over;
                for i in 0..m - k {
                    let old = b[(k + i, j)];
                    b[(k + i, j)] = old - f * v[i];
                }
            }
        }
        // back substitution on the upper-triangular leading n x n block
        let mut x = Matrix::zeros(n, b.cols);
        for j in 0..b.cols {
            for i in (0..n).rev() {
                let mut s = b[(i, j)];
                for l in i + 1..n {
                    s = s - a[(i, l)] * x[(l, j)];
                }
                let piv = a[(i, i)];
                if piv.norm() == T::zero() {
                    return Err(VesselError::IllConditioned(
                        "least_squares: rank-deficient system".into(),
                    ));
                }
                x[(i, j)] = s / piv;
            }
        }
        Ok(x)
    }

    /// Integer matrix power by repeated multiplication.
    pub fn pow(&self, n: usize) -> Result<Matrix<T>> {
        self.expect_square("pow")?;
        let mut acc = Matrix::identity(self.rows);
        for _ in 0..n {
            acc = &acc * self;
        }
        Ok(acc)
    }

    /// Stack vertically.
    pub fn vstack(blocks: &[&Matrix<T>]) -> Matrix<T> {
        assert!(!blocks.is_empty());
        let cols = blocks[0].cols;
        assert!(blocks.iter().all(|b| b.cols == cols));
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut r0 = 0;
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..cols {
                    out[(r0 + i, j)] = b[(i, j)];
                }
            }
            r0 += b.rows;
        }
        out
    }

    /// Stack horizontally.
    pub fn hstack(blocks: &[&Matrix<T>]) -> Matrix<T> {
        assert!(!blocks.is_empty());
        let rows = blocks[0].rows;
        assert!(blocks.iter().all(|b| b.rows == rows));
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut c0 = 0;
        for b in blocks {
            for i in 0..rows {
                for j in 0..b.cols {
                    out[(i, c0 + j)] = b[(i, j)];
                }
            }
            c0 += b.cols;
        }
        out
    }
}

fn lu_solve_vec<T: Real>(lu: &Matrix<T>, perm: &[usize], b: &[Cx<T>]) -> Vec<Cx<T>> {
    let n = lu.rows();
    let mut y = vec![Cx::new(T::zero(), T::zero()); n];
    for i in 0..n {
        let mut s = b[perm[i]];
        for j in 0..i {
            s = s - lu[(i, j)] * y[j];
        }
        y[i] = s;
    }
    let mut x = vec![Cx::new(T::zero(), T::zero()); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s = s - lu[(i, j)] * x[j];
        }
        x[i] = s / lu[(i, i)];
    }
    x
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = Cx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cx<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl<T: Real> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|z| -z)
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in mul");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// 2x2 matrix literal.
pub fn mat2<T: Real>(a: Cx<T>, b: Cx<T>, c: Cx<T>, d: Cx<T>) -> Matrix<T> {
    Matrix::from_rows(&[vec![a, b], vec![c, d]])
}

/// Column 2-vector.
pub fn col2<T: Real>(a: Cx<T>, b: Cx<T>) -> Matrix<T> {
    Matrix::from_rows(&[vec![a], vec![b]])
}

/// Row 2-vector.
pub fn row2<T: Real>(a: Cx<T>, b: Cx<T>) -> Matrix<T> {
    Matrix::from_rows(&[vec![a, b]])
}

/// Exact 2x2 matrix exponential through the trace/traceless split.
///
/// Writing M = (tr M/2) I + N with N traceless, N^2 = -det(N) I, so with
/// delta^2 = -det(N):
///   exp(M) = e^{tr/2} [cosh(delta) I + sinh(delta)/delta * N]
/// and the defective case delta = 0 degenerates to e^{tr/2}(I + N).
pub fn expm2<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    assert!(m.rows() == 2 && m.cols() == 2, "expm2 needs a 2x2 matrix");
    let half = Cx::new(T::of(0.5), T::zero());
    let mu = m.trace() * half;
    let n = m - &Matrix::diag(&[mu, mu]);
    let detn = n[(0, 0)] * n[(1, 1)] - n[(0, 1)] * n[(1, 0)];
    let delta = (-detn).sqrt();
    let emu = mu.exp();
    let scale = m.norm_inf().max(T::one());
    if delta.norm() <= T::of(1e-8) * scale {
        // double eigenvalue: exp = e^mu (I + N), with O(|delta|^2) error
        // far below working precision at this threshold
        let mut out = n.clone();
        out[(0, 0)] = out[(0, 0)] + Cx::new(T::one(), T::zero());
        out[(1, 1)] = out[(1, 1)] + Cx::new(T::one(), T::zero());
        out.scale(emu)
    } else {
        let ch = delta.cosh();
        let sh_over = delta.sinh() / delta;
        let mut out = n.scale(sh_over);
        out[(0, 0)] = out[(0, 0)] + ch;
        out[(1, 1)] = out[(1, 1)] + ch;
        out.scale(emu)
    }
}

/// Solve A X + X A_z = -RHS entrywise for diagonal A = diag(lambda),
/// A_z = diag(mu): X_ij = -RHS_ij / (lambda_i + mu_j).
///
/// Errors on exact resonance lambda_i + mu_j = 0; callers whose right-hand
/// side vanishes at the resonant pair must handle that structure themselves.
pub fn solve_sylvester_diag<T: Real>(
    lambdas: &[Cx<T>],
    mus: &[Cx<T>],
    rhs: &Matrix<T>,
) -> Result<Matrix<T>> {
    let (n, m) = (lambdas.len(), mus.len());
    if rhs.rows() != n || rhs.cols() != m {
        return Err(VesselError::Dimension(format!(
            "sylvester: rhs is {}x{}, expected {}x{}",
            rhs.rows(),
            rhs.cols(),
            n,
            m
        )));
    }
    let mut x = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let denom = lambdas[i] + mus[j];
            if denom.norm() == T::zero() {
                return Err(VesselError::Resonance { i, j });
            }
            x[(i, j)] = -rhs[(i, j)] / denom;
        }
    }
    Ok(x)
}

/// Roots of det(zI - M) via Durand-Kerner iteration with the determinant
/// evaluated directly by LU at each iterate (no characteristic-polynomial
/// coefficients are ever formed).
pub fn eigenvalues_durand_kerner<T: Real>(m: &Matrix<T>) -> Result<Vec<Cx<T>>> {
    m.expect_square("eigenvalues")?;
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = m.norm_inf().max(T::of(1e-3));
    let radius = scale * T::of(1.5) * T::of(n as f64).max(T::one());
    // deterministic non-symmetric starting circle
    let mut z: Vec<Cx<T>> = (0..n)
        .map(|k| {
            let ang = T::of(2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.3);
            Cx::new(radius * ang.cos(), radius * ang.sin())
        })
        .collect();
    let det_at = |lambda: Cx<T>| -> Cx<T> {
        let shifted = Matrix::from_fn(n, n, |i, j| {
            let d = if i == j { lambda } else { Cx::new(T::zero(), T::zero()) };
            d - m[(i, j)]
        });
        shifted.det().unwrap_or(Cx::new(T::zero(), T::zero()))
    };
    let tol = T::of(1e-13) * scale;
    for _ in 0..400 {
        let mut max_step = T::zero();
        for i in 0..n {
            let p = det_at(z[i]);
            let mut denom = Cx::new(T::one(), T::zero());
            for j in 0..n {
                if j != i {
                    denom = denom * (z[i] - z[j]);
                }
            }
            if denom.norm() == T::zero() {
                denom = Cx::new(T::of(1e-30), T::zero());
            }
            let step = p / denom;
            z[i] = z[i] - step;
            max_step = max_step.max(step.norm());
        }
        if max_step < tol {
            return Ok(z);
        }
    }
    Err(VesselError::IllConditioned(
        "eigenvalue iteration did not converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    type M = Matrix<f64>;

    fn cz(re: f64, im: f64) -> Cx<f64> {
        cx(re, im)
    }

    fn sigma1() -> M {
        mat2(cz(0.0, 0.0), cz(0.0, 1.0), cz(0.0, -1.0), cz(0.0, 0.0))
    }

    fn random_matrix(rng: &mut StdRng, n: usize) -> M {
        Matrix::from_fn(n, n, |_, _| cz(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn det_identity_is_one() {
        assert_eq!(M::identity(2).det().unwrap(), cz(1.0, 0.0));
    }

    #[test]
    fn det_sigma1_is_minus_one() {
        // hand cofactor oracle: 0*0 - (i)(-i) = -1
        let d = sigma1().det().unwrap();
        assert!((d - cz(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn det_inverse_product_is_one() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4);
            let d = a.det().unwrap();
            if d.norm() < 1e-6 {
                continue;
            }
            let di = a.inverse(1e-12).unwrap().det().unwrap();
            assert!((d * di - cz(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn det_is_multiplicative() {
        let mut rng = StdRng::seed_from_u64(11);
        for n in [2usize, 3, 5] {
            for _ in 0..10 {
                let a = random_matrix(&mut rng, n);
                let b = random_matrix(&mut rng, n);
                let lhs = (&a * &b).det().unwrap();
                let rhs = a.det().unwrap() * b.det().unwrap();
                let scale = lhs.norm().max(rhs.norm()).max(1.0);
                assert!((lhs - rhs).norm() / scale < 1e-10);
            }
        }
    }

    #[test]
    fn inverse_identity() {
        let i = M::identity(3);
        assert!(i.inverse(1e-12).unwrap().approx_eq(&i, 1e-14, 1e-14));
    }

    #[test]
    fn inverse_sigma1_is_itself() {
        // sigma1^2 = I for the canonical sigma1, so inverse(sigma1) = sigma1
        let s = sigma1();
        let prod = &s * &s;
        assert!(prod.approx_eq(&M::identity(2), 1e-15, 1e-15));
        assert!(s.inverse(1e-12).unwrap().approx_eq(&s, 1e-15, 1e-15));
    }

    #[test]
    fn inverse_of_diagonal_reciprocals() {
        let d = Matrix::diag(&[cz(2.0, 0.0), cz(0.0, 4.0)]);
        let want = Matrix::diag(&[cz(0.5, 0.0), cz(0.0, -0.25)]);
        assert!(d.inverse(1e-12).unwrap().approx_eq(&want, 1e-15, 1e-15));
    }

    #[test]
    fn inverse_residual_bound_on_random_matrices() {
        let mut rng = StdRng::seed_from_u64(3);
        for n in [1usize, 2, 3, 6, 12] {
            for _ in 0..8 {
                let a = random_matrix(&mut rng, n);
                if a.det().unwrap().norm() < 1e-6 {
                    continue;
                }
                let inv = a.inverse(1e-12).unwrap();
                let res = &(&a * &inv) - &M::identity(n);
                assert!(res.norm_inf() < 1e-10, "residual {} at n={}", res.norm_inf(), n);
            }
        }
    }

    #[test]
    fn inverse_rejects_singular() {
        let a = Matrix::from_rows(&[
            vec![cz(1.0, 0.0), cz(2.0, 0.0)],
            vec![cz(2.0, 0.0), cz(4.0, 0.0)],
        ]);
        match a.inverse(1e-12) {
            Err(VesselError::Singular { det_mag, .. }) => assert!(det_mag < 1e-12),
            other => panic!("expected singularity error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn det_rejects_non_square() {
        let a = M::zeros(2, 3);
        assert!(matches!(a.det(), Err(VesselError::Dimension(_))));
    }

    #[test]
    fn empty_matrix_det_is_one() {
        assert_eq!(M::zeros(0, 0).det().unwrap(), cz(1.0, 0.0));
    }

    #[test]
    fn sylvester_scalar_case() {
        // lambda=1, mu=1, RHS=[[2]] -> X = [[-1]]
        let x = solve_sylvester_diag(
            &[cz(1.0, 0.0)],
            &[cz(1.0, 0.0)],
            &Matrix::from_rows(&[vec![cz(2.0, 0.0)]]),
        )
        .unwrap();
        assert!((x[(0, 0)] - cz(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn sylvester_zero_rhs_gives_zero() {
        let x = solve_sylvester_diag(
            &[cz(1.0, 2.0), cz(0.5, -1.0)],
            &[cz(2.0, 0.0), cz(1.0, 1.0)],
            &M::zeros(2, 2),
        )
        .unwrap();
        assert_eq!(x.norm_inf(), 0.0);
    }

    #[test]
    fn sylvester_random_residual() {
        let mut rng = StdRng::seed_from_u64(5);
        let lambdas: Vec<_> = (0..3).map(|_| cz(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0))).collect();
        let mus: Vec<_> = (0..3).map(|_| cz(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0))).collect();
        let rhs = random_matrix(&mut rng, 3);
        let x = solve_sylvester_diag(&lambdas, &mus, &rhs).unwrap();
        let a = Matrix::diag(&lambdas);
        let az = Matrix::diag(&mus);
        let res = &(&(&a * &x) + &(&x * &az)) + &rhs;
        assert!(res.norm_inf() < 1e-12 * rhs.norm_inf().max(1.0));
    }

    #[test]
    fn sylvester_reports_resonance() {
        let err = solve_sylvester_diag(
            &[cz(1.0, 0.0)],
            &[cz(-1.0, 0.0)],
            &Matrix::from_rows(&[vec![cz(1.0, 0.0)]]),
        )
        .unwrap_err();
        assert!(matches!(err, VesselError::Resonance { i: 0, j: 0 }));
    }

    #[test]
    fn expm2_of_zero_is_identity() {
        let e = expm2(&M::zeros(2, 2));
        assert!(e.approx_eq(&M::identity(2), 1e-15, 1e-15));
    }

    #[test]
    fn expm2_matches_series_on_random_inputs() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..25 {
            let m = random_matrix(&mut rng, 2);
            let e = expm2(&m);
            // brute-force Taylor series oracle
            let mut sum = M::identity(2);
            let mut term = M::identity(2);
            for k in 1..40 {
                term = &term * &m;
                term = term.scale_re(1.0 / k as f64);
                sum = &sum + &term;
            }
            assert!(e.approx_eq(&sum, 1e-12, 1e-12));
        }
    }

    #[test]
    fn expm2_nilpotent_defective_case() {
        let m = mat2(cz(0.0, 0.0), cz(3.0, 1.0), cz(0.0, 0.0), cz(0.0, 0.0));
        let e = expm2(&m);
        let want = mat2(cz(1.0, 0.0), cz(3.0, 1.0), cz(0.0, 0.0), cz(1.0, 0.0));
        assert!(e.approx_eq(&want, 1e-14, 1e-14));
    }

    #[test]
    fn least_squares_exact_on_square_system() {
        let a = mat2(cz(2.0, 0.0), cz(1.0, 0.0), cz(1.0, 1.0), cz(3.0, 0.0));
        let x_true = col2(cz(1.0, -1.0), cz(0.5, 2.0));
        let b = &a * &x_true;
        let x = a.least_squares(&b).unwrap();
        assert!(x.approx_eq(&x_true, 1e-12, 1e-12));
    }

    #[test]
    fn least_squares_overdetermined_consistent() {
        let a = Matrix::from_rows(&[
            vec![cz(1.0, 0.0), cz(1.0, 0.0)],
            vec![cz(1.0, 0.0), cz(2.0, 0.0)],
            vec![cz(1.0, 0.0), cz(3.0, 0.0)],
            vec![cz(1.0, 0.0), cz(4.0, 0.0)],
        ]);
        let x_true = col2(cz(0.5, 0.0), cz(-2.0, 0.0));
        let b = &a * &x_true;
        let x = a.least_squares(&b).unwrap();
        assert!(x.approx_eq(&x_true, 1e-12, 1e-12));
    }

    #[test]
    fn durand_kerner_finds_diagonal_spectrum() {
        let m: M = Matrix::diag(&[cz(1.0, 2.0), cz(-0.5, 0.25), cz(3.0, -1.0)]);
        let mut eigs = eigenvalues_durand_kerner(&m).unwrap();
        eigs.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        let mut want = [cz(1.0, 2.0), cz(-0.5, 0.25), cz(3.0, -1.0)];
        want.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        for (g, w) in eigs.iter().zip(want.iter()) {
            assert!((*g - *w).norm() < 1e-10, "{g} vs {w}");
        }
    }

    #[test]
    fn durand_kerner_on_companion_like_matrix() {
        // eigenvalues of [[0,1],[-2,-3]] are -1 and -2
        let m: M = mat2(cz(0.0, 0.0), cz(1.0, 0.0), cz(-2.0, 0.0), cz(-3.0, 0.0));
        let mut eigs = eigenvalues_durand_kerner(&m).unwrap();
        eigs.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((eigs[0] - cz(-2.0, 0.0)).norm() < 1e-10);
        assert!((eigs[1] - cz(-1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn generic_scalar_compiles_at_f32() {
        let a: Matrix<f32> = mat2(
            Cx::new(2.0f32, 0.0),
            Cx::new(0.0, 1.0),
            Cx::new(-1.0, 0.0),
            Cx::new(1.0, 1.0),
        );
        let inv = a.inverse(1e-5).unwrap();
        let res = &(&a * &inv) - &Matrix::identity(2);
        assert!(res.norm_inf() < 1e-3);
    }
}
