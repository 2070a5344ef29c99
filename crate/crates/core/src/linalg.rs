//! Dense complex linear algebra for the small Hermitian problems that show up
//! in array processing: Cholesky factors, Hermitian eigendecompositions,
//! triangular solves and orthonormal complements.
//!
//! Matrices are stored row-major. Sizes of interest are N <= 64, so nothing
//! here is blocked or vectorised.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-12;
const UNIT_NORM_TOL: f64 = 1e-12;

/// Conjugate-linear inner product `aᴴ b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Ok(Self::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn column_vector(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Sub-block `[r0, r1) x [c0, c1)`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᴴ v` without forming the transpose.
    pub fn conj_transpose_mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, v.len(), "dimension mismatch");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    fn hermitian_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Square complex matrix with `A = Aᴴ`.
///
/// Construction validates symmetry to `1e-12 * max|A|` and then stores the
/// exactly Hermitian part, so diagonals are real and the two triangles are
/// conjugates bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let residual = m.hermitian_residual();
        if residual > HERMITIAN_TOL * m.max_abs() {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self::hermitian_part(&m))
    }

    /// `(M + Mᴴ)/2`, without validation. Used where a product is Hermitian in
    /// exact arithmetic and only rounding breaks the symmetry.
    pub fn hermitian_part(m: &ComplexMatrix) -> Self {
        assert_eq!(m.rows, m.cols);
        let n = m.rows;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = C64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..n {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
        Self(out)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.add(&other.0))
    }

    /// `A + c·u·uᴴ`.
    pub fn rank_one_update(&self, c: f64, u: &[C64]) -> Self {
        let n = self.dim();
        assert_eq!(u.len(), n);
        let mut m = self.0.clone();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += u[i] * u[j].conj() * c;
            }
        }
        Self::hermitian_part(&m)
    }

    /// `uᴴ A u`, real for Hermitian `A`.
    pub fn quadratic_form(&self, u: &[C64]) -> f64 {
        inner(u, &self.0.mul_vec(u)).re
    }

    pub fn mul_vec(&self, u: &[C64]) -> Vec<C64> {
        self.0.mul_vec(u)
    }

    /// `Bᴴ A B`, symmetrised.
    pub fn congruence(&self, b: &ComplexMatrix) -> Self {
        Self::hermitian_part(&b.conj_transpose().matmul(&self.0.matmul(b)))
    }
}

/// Lower-triangular `G` with real positive diagonal such that `G Gᴴ = A`.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    lower: ComplexMatrix,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &ComplexMatrix {
        &self.lower
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    /// Solves `G x = b`.
    pub fn solve_lower(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        forward_substitute(self.lower.data(), self.dim(), &mut x);
        x
    }

    /// Solves `Gᴴ x = b`.
    pub fn solve_lower_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        backward_substitute_adjoint(self.lower.data(), self.dim(), &mut x);
        x
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        forward_substitute(self.lower.data(), self.dim(), &mut x);
        backward_substitute_adjoint(self.lower.data(), self.dim(), &mut x);
        x
    }

    /// `G⁻¹ B`, column by column.
    pub fn solve_lower_matrix(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let cols: Vec<Vec<C64>> = (0..b.cols())
            .map(|j| self.solve_lower(&b.column(j)))
            .collect();
        ComplexMatrix::from_columns(&cols).expect("columns share a length")
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * self.lower[(i, i)].re.ln())
            .sum()
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        HermitianMatrix::hermitian_part(&self.lower.matmul(&self.lower.conj_transpose()))
    }
}

/// In-place Cholesky of a row-major `n x n` Hermitian buffer. On success the
/// lower triangle holds `G` and the strict upper triangle is zeroed.
pub(crate) fn cholesky_in_place(a: &mut [C64], n: usize, threshold: f64) -> Result<()> {
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > threshold) {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: d,
                threshold,
            });
        }
        let djj = d.sqrt();
        a[j * n + j] = C64::new(djj, 0.0);
        let inv = 1.0 / djj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s * inv;
        }
        for k in (j + 1)..n {
            a[j * n + k] = C64::new(0.0, 0.0);
        }
    }
    Ok(())
}

pub(crate) fn forward_substitute(l: &[C64], n: usize, x: &mut [C64]) {
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i].re;
    }
}

pub(crate) fn backward_substitute_adjoint(l: &[C64], n: usize, x: &mut [C64]) {
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[k * n + i].conj() * x[k];
        }
        x[i] = s / l[i * n + i].re;
    }
}

/// Pivot threshold `1e-12 · trace(A)/dim`.
pub(crate) fn pd_threshold(trace: f64, n: usize) -> f64 {
    1e-12 * trace / n as f64
}

pub fn cholesky(a: &HermitianMatrix) -> Result<CholeskyFactor> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    let mut data = a.as_matrix().data().to_vec();
    cholesky_in_place(&mut data, n, pd_threshold(a.trace(), n))?;
    Ok(CholeskyFactor {
        lower: ComplexMatrix {
            rows: n,
            cols: n,
            data,
        },
    })
}

/// Solves `A X = B` for positive-definite `A` through its Cholesky factor.
pub fn solve_hermitian(a: &HermitianMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if b.rows() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} rows, matrix is {}x{}",
            b.rows(),
            a.dim(),
            a.dim()
        )));
    }
    let g = cholesky(a)?;
    let cols: Vec<Vec<C64>> = (0..b.cols()).map(|j| g.solve_vec(&b.column(j))).collect();
    ComplexMatrix::from_columns(&cols)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianEig {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        let u = &self.eigenvectors;
        let n = self.dim();
        let scaled = ComplexMatrix::from_fn(n, n, |i, j| u[(i, j)] * self.eigenvalues[j]);
        HermitianMatrix::hermitian_part(&scaled.matmul(&u.conj_transpose()))
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Householder reduction to Hermitian tridiagonal form, a diagonal phase
/// change that makes the off-diagonal real, then implicit QL with Wilkinson
/// shifts on the real tridiagonal. The QL sweep budget is `64·dim` in total.
pub fn herm_eig(a: &HermitianMatrix) -> Result<HermitianEig> {
    let n = a.dim();
    if n == 0 {
        return Ok(HermitianEig {
            eigenvalues: vec![],
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let mut t = a.as_matrix().clone();
    let mut q = ComplexMatrix::identity(n);

    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = ((k + 1)..n).map(|i| t[(i, k)]).collect();
        let xnorm = norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        // u = x + phase·‖x‖·e1 avoids cancellation in the first component.
        let mut u = x;
        u[0] += phase * xnorm;
        let uu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let beta = 2.0 / uu;
        let m = n - k - 1;
        let off = k + 1;

        // Left: T[off.., :] -= beta·u·(uᴴ T[off.., :])
        let mut w = vec![C64::new(0.0, 0.0); n];
        for (r, ur) in u.iter().enumerate() {
            let uc = ur.conj();
            for (c, wc) in w.iter_mut().enumerate() {
                *wc += uc * t[(off + r, c)];
            }
        }
        for r in 0..m {
            let s = u[r] * beta;
            for (c, wc) in w.iter().enumerate() {
                t[(off + r, c)] -= s * wc;
            }
        }
        // Right: T[:, off..] -= beta·(T[:, off..]·u)·uᴴ
        for rrow in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (cc, uc) in u.iter().enumerate() {
                s += t[(rrow, off + cc)] * uc;
            }
            let s = s * beta;
            for (cc, uc) in u.iter().enumerate() {
                t[(rrow, off + cc)] -= s * uc.conj();
            }
        }
        // Q <- Q·H
        for rrow in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (cc, uc) in u.iter().enumerate() {
                s += q[(rrow, off + cc)] * uc;
            }
            let s = s * beta;
            for (cc, uc) in u.iter().enumerate() {
                q[(rrow, off + cc)] -= s * uc.conj();
            }
        }
    }

    let mut diag: Vec<f64> = (0..n).map(|i| t[(i, i)].re).collect();
    let mut off: Vec<f64> = vec![0.0; n];
    let mut phases = vec![C64::new(1.0, 0.0); n];
    for k in 0..n - 1 {
        let e = t[(k + 1, k)];
        let r = e.norm();
        off[k] = r;
        phases[k + 1] = if r > 0.0 {
            phases[k] * (e / r)
        } else {
            phases[k]
        };
    }

    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut diag, &mut off, &mut z, n, 64 * n)?;

    // U = Q·D·Z
    let qd = ComplexMatrix::from_fn(n, n, |i, j| q[(i, j)] * phases[j]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..n {
                s += qd[(i, k)] * z[k * n + src];
            }
            vectors[(i, dst)] = s;
        }
    }
    Ok(HermitianEig {
        eigenvalues: order.iter().map(|&i| diag[i]).collect(),
        eigenvectors: vectors,
    })
}

/// Implicit QL on a real symmetric tridiagonal (`d` diagonal, `e[i]` couples
/// `i` and `i+1`). Rotations accumulate into row-major `z`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize, cap: usize) -> Result<()> {
    let mut sweeps = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > cap {
                return Err(Error::NoConvergence { iterations: sweeps });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let zf = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * zf;
                    z[k * n + i] = c * z[k * n + i] - s * zf;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `N x (N-1)` semi-unitary matrix whose columns span the orthogonal
/// complement of the unit vector `v`.
///
/// Built from the Householder reflector `H = I - 2wwᴴ/‖w‖²`,
/// `w = v + φ·e_N` with `φ = v_N/|v_N|`, which maps `v` onto `-φ·e_N`. The
/// first `N-1` columns of `H` are returned.
pub fn orth_complement(v: &[C64]) -> Result<ComplexMatrix> {
    let n = v.len();
    let nv = norm(v);
    if n == 0 || (nv - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NotUnitNorm { norm: nv });
    }
    let last = v[n - 1];
    let phase = if last.norm() > 0.0 {
        last / last.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut w = v.to_vec();
    w[n - 1] += phase;
    let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let beta = 2.0 / ww;
    Ok(ComplexMatrix::from_fn(n, n - 1, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        C64::new(delta, 0.0) - w[i] * w[j].conj() * beta
    }))
}
