//! Deterministic random matrix ensembles for tests, examples, and fuzzing.
//!
//! The generator is a self-contained SplitMix64, so every sample is
//! reproducible bit-for-bit across platforms and runs from the seed alone.
//! The ensembles cover the structured matrices used throughout the crate:
//! unitaries, Hermitian and positive-definite matrices, invertible matrices
//! with controlled singular values, Hermitian symplectic matrices (built from
//! group generators), and Lagrangian frames.

use num_complex::Complex64;

use crate::linalg::{c64, ComplexMatrix, UnitaryMatrix};
use crate::symplectic::{
    cayley_matrix, stereographic_inverse, HermitianSymplecticMatrix, LagrangianFrame,
};

/// SplitMix64 pseudo-random generator. Small state, full 64-bit period,
/// and no platform-dependent behavior.
#[derive(Debug, Clone)]
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform_01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform_01()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform_01() * n as f64) as usize % n.max(1)
    }

    /// Complex number with real and imaginary parts uniform in `[-1, 1)`.
    pub fn complex(&mut self) -> Complex64 {
        c64(self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0))
    }
}

/// Dense matrix with independent entries uniform in the complex box.
pub fn complex_matrix(rng: &mut Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex())
}

/// Unitary matrix: orthonormalized columns of a dense random matrix.
pub fn unitary(rng: &mut Rng, n: usize) -> UnitaryMatrix {
    loop {
        let m = complex_matrix(rng, n, n);
        if let Ok(q) = m.orthonormalized_columns() {
            return UnitaryMatrix::new(q).expect("orthonormalized columns form a unitary");
        }
        // A singular draw has probability zero; redraw if it happens.
    }
}

/// Hermitian matrix `(M + M*) / 2` scaled to the requested magnitude.
pub fn hermitian(rng: &mut Rng, n: usize, scale: f64) -> ComplexMatrix {
    let m = complex_matrix(rng, n, n);
    (&(&m + &m.adjoint())).scale(c64(0.5 * scale, 0.0))
}

/// Invertible matrix `U diag(sigma) V*` with singular values uniform in
/// `[sigma_min, sigma_max]`.
pub fn conditioned(rng: &mut Rng, n: usize, sigma_min: f64, sigma_max: f64) -> ComplexMatrix {
    let u = unitary(rng, n);
    let v = unitary(rng, n);
    let sigma: Vec<Complex64> = (0..n)
        .map(|_| c64(rng.uniform(sigma_min, sigma_max), 0.0))
        .collect();
    &(u.matrix() * &ComplexMatrix::diagonal(&sigma)) * &v.matrix().adjoint()
}

/// Positive-definite Hermitian matrix `U diag(lambda) U*` with eigenvalues
/// uniform in `[lambda_min, lambda_max]`.
pub fn positive_definite(rng: &mut Rng, n: usize, lambda_min: f64, lambda_max: f64) -> ComplexMatrix {
    let u = unitary(rng, n);
    let lambda: Vec<Complex64> = (0..n)
        .map(|_| c64(rng.uniform(lambda_min, lambda_max), 0.0))
        .collect();
    &(u.matrix() * &ComplexMatrix::diagonal(&lambda)) * &u.matrix().adjoint()
}

/// Hermitian symplectic matrix: a product of the three generator families
/// `diag(A, A^{-*})`, `[[1, B], [0, 1]]`, `[[1, 0], [C, 1]]` with `A`
/// invertible and `B`, `C` Hermitian.
pub fn hermitian_symplectic(rng: &mut Rng, half_dim: usize) -> HermitianSymplecticMatrix {
    let l = half_dim;
    let a = conditioned(rng, l, 0.5, 2.0);
    let a_inv_adj = a
        .inverse()
        .expect("conditioned matrix is invertible")
        .adjoint();
    let b = hermitian(rng, l, 0.7);
    let c = hermitian(rng, l, 0.7);
    let mut g1 = ComplexMatrix::zeros(2 * l, 2 * l);
    g1.set_block(0, 0, &a);
    g1.set_block(l, l, &a_inv_adj);
    let mut g2 = ComplexMatrix::identity(2 * l);
    g2.set_block(0, l, &b);
    let mut g3 = ComplexMatrix::identity(2 * l);
    g3.set_block(l, 0, &c);
    HermitianSymplecticMatrix::new(&(&g1 * &g2) * &g3)
        .expect("product of symplectic generators is symplectic")
}

/// Unitary Hermitian symplectic matrix `C* diag(U, V) C` (Cayley preimage of
/// a block-diagonal element of `U(l, l)`) with `e^{ik}` planted in the
/// spectrum of `U`.
pub fn unitary_symplectic_with_eigenphase(
    rng: &mut Rng,
    half_dim: usize,
    k: f64,
) -> HermitianSymplecticMatrix {
    let l = half_dim;
    let mut phases: Vec<Complex64> = vec![Complex64::from_polar(1.0, k)];
    for _ in 1..l {
        phases.push(Complex64::from_polar(1.0, rng.uniform(-3.1, 3.1)));
    }
    let w = unitary(rng, l);
    let u = &(w.matrix() * &ComplexMatrix::diagonal(&phases)) * &w.matrix().adjoint();
    let v = unitary(rng, l);
    let mut g = ComplexMatrix::zeros(2 * l, 2 * l);
    g.set_block(0, 0, &u);
    g.set_block(l, l, v.matrix());
    let cayley = cayley_matrix(l);
    let t = &(&cayley.adjoint() * &g) * &cayley;
    HermitianSymplecticMatrix::new(t).expect("Cayley preimage of U(l,l) is symplectic")
}

/// Lagrangian frame: the inverse stereographic image of a random unitary.
pub fn lagrangian_frame(rng: &mut Rng, half_dim: usize) -> LagrangianFrame {
    let u = unitary(rng, half_dim);
    stereographic_inverse(&u).expect("stereographic preimage of a unitary is Lagrangian")
}
