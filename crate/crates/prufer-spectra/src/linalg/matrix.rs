//! Dense complex matrices.
//!
//! Everything in this crate operates on small dense matrices (side ≤ a few
//! dozen), so the representation is a plain row-major `Vec<Complex64>` and the
//! algorithms are the classical dense ones: LU with partial pivoting for
//! solve/inverse/determinant, and modified Gram–Schmidt with one
//! re-orthogonalization pass for column orthonormalization.
//!
//! Shape agreement in the arithmetic operators is a programming contract and
//! panics on violation; the domain-level operations in the other modules
//! validate shapes first and report [`Error::Invariant`](crate::Error)
//! instead.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Shorthand constructor for a complex scalar.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, validating the element count and
    /// that every entry is finite.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Invariant(format!(
                "matrix data length {} does not match shape {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        let m = ComplexMatrix { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    /// Builds a matrix by evaluating `f(i, j)` for every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Builds a matrix from nested row slices of real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Invariant("ragged rows in matrix literal".into()));
        }
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| c64(x, 0.0)))
            .collect();
        ComplexMatrix::new(r, c, data)
    }

    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    /// Identity matrix of side `n`.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Complex64::ONE } else { Complex64::ZERO })
    }

    /// Diagonal matrix from complex entries.
    pub fn diagonal(entries: &[Complex64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { Complex64::ZERO })
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

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::Invariant("matrix has non-finite entries".into()))
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conj(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)].conj())
    }

    /// Multiplies every entry by a scalar.
    pub fn scale(&self, z: Complex64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * z)
    }

    /// Extracts the block of shape `nr x nc` whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Overwrites the block with top-left corner `(r0, c0)` by `b`.
    pub fn set_block(&mut self, r0: usize, c0: usize, b: &ComplexMatrix) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Horizontal concatenation `[a | b | ...]`.
    pub fn hstack(parts: &[&ComplexMatrix]) -> Self {
        assert!(!parts.is_empty(), "hstack of nothing");
        let rows = parts[0].rows;
        assert!(parts.iter().all(|p| p.rows == rows), "hstack row mismatch");
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            out.set_block(0, c0, p);
            c0 += p.cols;
        }
        out
    }

    /// Vertical concatenation.
    pub fn vstack(parts: &[&ComplexMatrix]) -> Self {
        assert!(!parts.is_empty(), "vstack of nothing");
        let cols = parts[0].cols;
        assert!(parts.iter().all(|p| p.cols == cols), "vstack column mismatch");
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            out.set_block(r0, 0, p);
            r0 += p.rows;
        }
        out
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Maximum deviation from the identity, `max |self - 1|`.
    pub fn deviation_from_identity(&self) -> f64 {
        assert!(self.is_square(), "identity deviation of non-square matrix");
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { Complex64::ONE } else { Complex64::ZERO };
                dev = dev.max((self[(i, j)] - target).norm());
            }
        }
        dev
    }

    /// LU decomposition with partial pivoting. Returns the packed factors,
    /// the row permutation, and the permutation sign, or `None` when a pivot
    /// collapses to zero (singular to working precision).
    fn lu(&self) -> Option<(Vec<Complex64>, Vec<usize>, f64)> {
        assert!(self.is_square(), "LU of non-square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].norm();
            for i in k + 1..n {
                let mag = a[i * n + k].norm();
                if mag > best {
                    best = mag;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                for j in k + 1..n {
                    let akj = a[k * n + j];
                    a[i * n + j] -= factor * akj;
                }
            }
        }
        Some((a, perm, sign))
    }

    /// Determinant via LU.
    pub fn det(&self) -> Complex64 {
        match self.lu() {
            None => Complex64::ZERO,
            Some((a, _, sign)) => {
                let n = self.rows;
                let mut d = c64(sign, 0.0);
                for k in 0..n {
                    d *= a[k * n + k];
                }
                d
            }
        }
    }

    /// Solves `self * X = rhs` for `X`.
    pub fn solve(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        assert_eq!(self.rows, rhs.rows, "solve shape mismatch");
        let (a, perm, _) = self
            .lu()
            .ok_or_else(|| Error::Invariant("matrix is singular to working precision".into()))?;
        let n = self.rows;
        let m = rhs.cols;
        let mut x = ComplexMatrix::zeros(n, m);
        for col in 0..m {
            // Apply the permutation, then forward and back substitution.
            let mut y = vec![Complex64::ZERO; n];
            for i in 0..n {
                y[i] = rhs[(perm[i], col)];
            }
            for i in 0..n {
                for j in 0..i {
                    let yj = y[j];
                    y[i] -= a[i * n + j] * yj;
                }
            }
            for i in (0..n).rev() {
                for j in i + 1..n {
                    let yj = y[j];
                    y[i] -= a[i * n + j] * yj;
                }
                y[i] /= a[i * n + i];
            }
            for i in 0..n {
                x[(i, col)] = y[i];
            }
        }
        Ok(x)
    }

    /// Matrix inverse via LU.
    pub fn inverse(&self) -> Result<ComplexMatrix> {
        self.solve(&ComplexMatrix::identity(self.rows))
    }

    /// Orthonormalizes the columns by modified Gram–Schmidt with a
    /// re-orthogonalization pass. Fails when the columns are numerically
    /// rank-deficient.
    pub fn orthonormalized_columns(&self) -> Result<ComplexMatrix> {
        let mut q = self.clone();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for j in 0..q.cols {
            for _pass in 0..2 {
                for i in 0..j {
                    let mut r = Complex64::ZERO;
                    for k in 0..q.rows {
                        r += q[(k, i)].conj() * q[(k, j)];
                    }
                    for k in 0..q.rows {
                        let qki = q[(k, i)];
                        q[(k, j)] -= qki * r;
                    }
                }
            }
            let norm: f64 = (0..q.rows).map(|k| q[(k, j)].norm_sqr()).sum::<f64>().sqrt();
            if norm <= 1e-13 * scale * (q.rows as f64) {
                return Err(Error::Invariant(format!(
                    "column {} is numerically dependent; cannot orthonormalize",
                    j
                )));
            }
            for k in 0..q.rows {
                q[(k, j)] /= norm;
            }
        }
        Ok(q)
    }

    /// Read-only access to the raw row-major data.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == Complex64::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(c64(-1.0, 0.0))
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
