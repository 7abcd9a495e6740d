//! Dense complex linear algebra.
//!
//! Storage is row-major with interleaved `(re, im)` pairs (`Complex64` is
//! `repr(C)`). Tolerances are relative to the Frobenius norm with an absolute
//! floor of `1e-12` unless stated otherwise.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Absolute tolerance floor shared by every relative check.
pub const ABS_FLOOR: f64 = 1e-12;

/// Relative Hermiticity tolerance for [`HermitianOperator`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Largest dimension accepted by the eigensolver.
pub const MAX_EIG_DIM: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from real row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(rows.len(), cols, |r, c| C64::new(rows[r][c], 0.0))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| if r == c { C64::new(diag[r], 0.0) } else { ZERO })
    }

    /// Rank-one projector `|v><v|` (no normalization applied).
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Tr[self * other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        debug_assert_eq!(self.cols, other.rows);
        debug_assert_eq!(self.rows, other.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    /// Frobenius distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||M - M^dagger||_F`.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                acc += (self[(r, c)] - self[(c, r)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_residual() <= HERMITIAN_TOL * self.frobenius_norm().max(1.0)
    }

    /// `(M + M^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A B A^dagger`.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        a.matmul(self).matmul(&a.adjoint())
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn submatrix(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self[(row0 + r, col0 + c)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// A square matrix that is Hermitian within [`HERMITIAN_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Accepts `m` if it is square and Hermitian within tolerance; the stored
    /// matrix is symmetrized so downstream code sees an exactly Hermitian array.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!("{}x{} is not square", m.rows, m.cols)));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let residual = m.hermitian_residual();
        if residual > HERMITIAN_TOL * m.frobenius_norm().max(1.0) {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self { matrix: m.hermitian_part() })
    }

    /// Symmetrizes an arbitrary square matrix.
    pub fn from_hermitian_part(m: &ComplexMatrix) -> Self {
        assert!(m.is_square());
        Self { matrix: m.hermitian_part() }
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { matrix: ComplexMatrix::zeros(n, n) }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self { matrix: ComplexMatrix::from_diag(diag) }
    }

    pub fn projector(v: &[C64]) -> Self {
        Self { matrix: ComplexMatrix::outer(v) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale_real(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { matrix: &self.matrix - &other.matrix }
    }

    pub fn eigvalsh(&self) -> Result<Vec<f64>> {
        Ok(eig_hermitian(self)?.0)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigvalsh()?.first().copied().unwrap_or(0.0))
    }
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac, br, bc) = (a.rows, a.cols, b.rows, b.cols);
    ComplexMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Which tensor factor of a bipartite operator to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Traces out one factor of an operator on `C^d1 ⊗ C^d2`.
pub fn partial_trace(m: &ComplexMatrix, dims: [usize; 2], keep: Keep) -> Result<ComplexMatrix> {
    let [d1, d2] = dims;
    if !m.is_square() || m.rows != d1 * d2 {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of {}x{} over {d1}x{d2}",
            m.rows, m.cols
        )));
    }
    Ok(match keep {
        Keep::First => ComplexMatrix::from_fn(d1, d1, |i, j| (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()),
        Keep::Second => ComplexMatrix::from_fn(d2, d2, |i, j| (0..d1).map(|k| m[(k * d2 + i, k * d2 + j)]).sum()),
    })
}

/// Spectral decomposition of a Hermitian operator.
///
/// Eigenvalues are returned in ascending order with the matching orthonormal
/// eigenvectors as the columns of the second value. Within a degenerate
/// cluster the choice of eigenvectors is arbitrary.
pub fn eig_hermitian(h: &HermitianOperator) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = h.dim();
    if n > MAX_EIG_DIM {
        return Err(Error::DimensionMismatch(format!("eigensolver capped at {MAX_EIG_DIM}, got {n}")));
    }
    if n == 0 {
        return Ok((Vec::new(), ComplexMatrix::zeros(0, 0)));
    }
    if !h.matrix().is_finite() {
        return Err(Error::NonFinite);
    }
    // Work on a unit-scale copy so the QL sweeps cannot overflow.
    let scale = h.matrix().max_abs();
    if scale == 0.0 {
        return Ok((vec![0.0; n], ComplexMatrix::identity(n)));
    }
    let (diag, offdiag, q) = tridiagonalize(&h.matrix().scale_real(1.0 / scale));
    let mut d = diag;
    let mut e = offdiag;
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &mut e, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k] * scale).collect();
    // V = Q Z, columns permuted into ascending order.
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| {
        let k = order[c];
        (0..n).map(|j| q[(r, j)] * z[j * n + k]).sum()
    });
    Ok((values, vectors))
}

/// Householder reduction to real symmetric tridiagonal form.
///
/// Returns `(diag, offdiag, Q)` with `H = Q T Q^dagger`, where `offdiag[k]`
/// couples `k` and `k + 1` and `offdiag[n - 1] == 0`.
fn tridiagonalize(h: &ComplexMatrix) -> (Vec<f64>, Vec<f64>, ComplexMatrix) {
    let n = h.rows;
    let mut a = h.clone();
    let mut q = ComplexMatrix::identity(n);

    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|r| a[(r, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if xnorm == 0.0 || tail <= f64::EPSILON * f64::EPSILON * xnorm * xnorm {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;
        let m = n - k - 1;

        // A <- (I - tau v v^dagger) A (I - tau v v^dagger) on the trailing block.
        // Left: rows k+1.., all columns.
        for c in 0..n {
            let mut s = ZERO;
            for i in 0..m {
                s += v[i].conj() * a[(k + 1 + i, c)];
            }
            s *= tau;
            for i in 0..m {
                let vi = v[i];
                a[(k + 1 + i, c)] -= vi * s;
            }
        }
        // Right: all rows, columns k+1..
        for r in 0..n {
            let mut s = ZERO;
            for i in 0..m {
                s += a[(r, k + 1 + i)] * v[i];
            }
            s *= tau;
            for i in 0..m {
                let vi = v[i].conj();
                a[(r, k + 1 + i)] -= s * vi;
            }
        }
        // Q <- Q (I - tau v v^dagger)
        for r in 0..n {
            let mut s = ZERO;
            for i in 0..m {
                s += q[(r, k + 1 + i)] * v[i];
            }
            s *= tau;
            for i in 0..m {
                let vi = v[i].conj();
                q[(r, k + 1 + i)] -= s * vi;
            }
        }
    }

    // Remove the phases of the complex subdiagonal with a diagonal unitary.
    let mut diag = vec![0.0; n];
    let mut offdiag = vec![0.0; n];
    let mut phase = ONE;
    let mut phases = vec![ONE; n];
    for k in 0..n {
        diag[k] = a[(k, k)].re;
        if k + 1 < n {
            let sub = a[(k + 1, k)];
            let mag = sub.norm();
            offdiag[k] = mag;
            if mag > 0.0 {
                phase *= sub / mag;
            }
            phases[k + 1] = phase;
        }
    }
    for r in 0..n {
        for c in 0..n {
            let p = phases[c];
            q[(r, c)] *= p;
        }
    }
    (diag, offdiag, q)
}

/// Implicit QL iteration on a symmetric tridiagonal matrix (EISPACK `tql2`).
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_SWEEPS {
                    return Err(Error::NoConvergence(MAX_SWEEPS));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * h;
                        z[k * n + i] = c * z[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Reassembles `V diag(values) V^dagger`.
pub fn from_spectrum(values: &[f64], vectors: &ComplexMatrix) -> ComplexMatrix {
    let n = vectors.rows;
    ComplexMatrix::from_fn(n, n, |r, c| {
        values.iter().enumerate().map(|(k, &l)| vectors[(r, k)] * vectors[(c, k)].conj() * l).sum()
    })
}

/// Singular values, largest first.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let f = faer::Mat::<C64>::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)]);
    let mut v = f.singular_values().map_err(|_| Error::NoConvergence(0))?;
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("trace norm of a non-square matrix".into()));
    }
    if m.hermitian_residual() <= ABS_FLOOR.max(1e-14 * m.frobenius_norm()) {
        let h = HermitianOperator::from_hermitian_part(m);
        return Ok(h.eigvalsh()?.iter().map(|l| l.abs()).sum());
    }
    let gram = HermitianOperator::from_hermitian_part(&m.adjoint().matmul(m));
    Ok(gram.eigvalsh()?.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Nearest positive semidefinite operator in Frobenius norm (eigenvalue clipping).
pub fn psd_project(h: &HermitianOperator) -> Result<HermitianOperator> {
    let (values, vectors) = eig_hermitian(h)?;
    if values.first().is_none_or(|&l| l >= 0.0) {
        return Ok(h.clone());
    }
    let clipped: Vec<f64> = values.iter().map(|l| l.max(0.0)).collect();
    Ok(HermitianOperator::from_hermitian_part(&from_spectrum(&clipped, &vectors)))
}

/// Principal square root of a PSD operator (negative eigenvalues clipped).
pub fn psd_sqrt(h: &HermitianOperator) -> Result<HermitianOperator> {
    let (values, vectors) = eig_hermitian(h)?;
    let roots: Vec<f64> = values.iter().map(|l| l.max(0.0).sqrt()).collect();
    Ok(HermitianOperator::from_hermitian_part(&from_spectrum(&roots, &vectors)))
}

/// Weyl (generalized Pauli) operator `U_{ab} = Σ_k ω^{bk} |k+a><k|`, `ω = e^{2πi/d}`.
pub fn weyl(d: usize, a: usize, b: usize) -> ComplexMatrix {
    let mut u = ComplexMatrix::zeros(d, d);
    for k in 0..d {
        let phase = 2.0 * std::f64::consts::PI * ((b * k) % d) as f64 / d as f64;
        u[((k + a) % d, k)] = C64::from_polar(1.0, phase);
    }
    u
}

/// Inverse square root; eigenvalues below `floor` are treated as `floor`.
pub fn psd_inv_sqrt(h: &HermitianOperator, floor: f64) -> Result<HermitianOperator> {
    let (values, vectors) = eig_hermitian(h)?;
    let roots: Vec<f64> = values.iter().map(|l| 1.0 / l.max(floor).sqrt()).collect();
    Ok(HermitianOperator::from_hermitian_part(&from_spectrum(&roots, &vectors)))
}

/// Cholesky factor `L` (lower triangular, `A = L L^dagger`) of a Hermitian
/// positive definite matrix; `None` if `A` is not numerically positive definite.
pub fn cholesky(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = a.rows;
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Inverse of a Hermitian positive definite matrix from its Cholesky factor,
/// together with `ln det A`.
pub fn cholesky_inverse(l: &ComplexMatrix) -> (ComplexMatrix, f64) {
    let n = l.rows;
    let logdet = 2.0 * (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    // Invert L (lower triangular) by forward substitution.
    let mut linv = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = ONE / l[(j, j)];
        for i in j + 1..n {
            let mut s = ZERO;
            for k in j..i {
                s += l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = -s / l[(i, i)];
        }
    }
    // A^{-1} = L^{-dagger} L^{-1}
    let inv = ComplexMatrix::from_fn(n, n, |r, c| {
        let start = r.max(c);
        (start..n).map(|k| linv[(k, r)].conj() * linv[(k, c)]).sum()
    });
    (inv, logdet)
}
