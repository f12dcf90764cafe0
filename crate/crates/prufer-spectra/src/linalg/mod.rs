//! Dense complex linear algebra: matrices, eigensolvers, singular values.
//!
//! The submodules are deliberately self-contained (no external linear-algebra
//! crate) because the Hermitian eigensolver doubles as the *independent
//! oracle* for everything the Prüfer-phase solver produces — sharing a
//! backend with the thing under test would defeat the cross-validation.
//!
//! Validated wrapper types ([`HermitianMatrix`], [`UnitaryMatrix`]) enforce
//! their defining identities eagerly at construction, with explicit default
//! tolerances collected in [`tol`].

pub mod eigen;
pub mod matrix;
pub mod svd;

pub use eigen::{hermitian_eig, polar_unitary, unitary_eigenphases, wrap_angle, HermitianEigen, UnitaryEigen};
pub use matrix::{c64, ComplexMatrix};
pub use svd::{condition_number, op_norm, rank, singular_values, RANK_REL_TOL};

use crate::error::{Error, Result};

/// Default numerical tolerances used by the validating constructors.
pub mod tol {
    /// Max-abs deviation from `M = M*` accepted by [`super::HermitianMatrix`],
    /// relative to `max(1, |M|)`.
    pub const HERMITICITY: f64 = 1e-12;
    /// Max-abs deviation from `U* U = 1` accepted by [`super::UnitaryMatrix`].
    pub const UNITARITY: f64 = 1e-10;
    /// Relative deviation from `Phi* J Phi = 0` accepted for Lagrangian frames.
    pub const LAGRANGIAN: f64 = 1e-10;
    /// Relative deviation from `T* J T = J` accepted for symplectic matrices.
    pub const SYMPLECTIC: f64 = 1e-10;
    /// Phase window under which a unitary eigenvalue counts as equal to 1
    /// when reading off intersection multiplicities.
    pub const KERNEL_PHASE: f64 = 1e-6;
}

/// A square matrix validated to be Hermitian.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    m: ComplexMatrix,
}

impl HermitianMatrix {
    /// Validates `|M - M*| <= tol::HERMITICITY * max(1, |M|)`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, tol::HERMITICITY)
    }

    /// Same as [`Self::new`] with an explicit tolerance.
    pub fn with_tolerance(m: ComplexMatrix, tolerance: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Invariant("Hermitian matrix must be square".into()));
        }
        let dev = m.max_abs_diff(&m.adjoint());
        let scale = m.max_abs().max(1.0);
        if dev > tolerance * scale {
            return Err(Error::Invariant(format!(
                "matrix is not Hermitian: |M - M*| = {dev:e} exceeds {tolerance:e} * {scale:e}"
            )));
        }
        Ok(HermitianMatrix { m })
    }

    /// Builds from `(M + M*)/2`, for inputs that are Hermitian analytically
    /// but carry roundoff asymmetry.
    pub fn symmetrized(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Invariant("Hermitian matrix must be square".into()));
        }
        let sym = (&(m + &m.adjoint())).scale(c64(0.5, 0.0));
        Ok(HermitianMatrix { m: sym })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    /// Full eigendecomposition by cyclic Jacobi rotations.
    pub fn eig(&self) -> Result<HermitianEigen> {
        hermitian_eig(&self.m)
    }

    /// Eigenvalues only, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eig()?.values)
    }

    /// Smallest eigenvalue (handy for positive-semidefiniteness checks).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let v = self.eigenvalues()?;
        v.first()
            .copied()
            .ok_or_else(|| Error::Invariant("empty matrix has no eigenvalues".into()))
    }
}

/// A square matrix validated to be unitary.
#[derive(Debug, Clone)]
pub struct UnitaryMatrix {
    m: ComplexMatrix,
}

impl UnitaryMatrix {
    /// Validates `|U* U - 1| <= tol::UNITARITY`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, tol::UNITARITY)
    }

    /// Same as [`Self::new`] with an explicit tolerance.
    pub fn with_tolerance(m: ComplexMatrix, tolerance: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Invariant("unitary matrix must be square".into()));
        }
        let dev = (&(&m.adjoint() * &m)).deviation_from_identity();
        if dev > tolerance {
            return Err(Error::Invariant(format!(
                "matrix is not unitary: |U*U - 1| = {dev:e} exceeds {tolerance:e}"
            )));
        }
        Ok(UnitaryMatrix { m })
    }

    /// Projects a near-unitary matrix onto the group, then validates.
    pub fn polar_projected(m: &ComplexMatrix) -> Result<Self> {
        Self::new(polar_unitary(m)?)
    }

    /// Validates that `m` is unitary up to `cap` — a structural sanity bound,
    /// not a precision target — then projects it onto the group, so
    /// downstream consumers see drift at machine scale no matter how
    /// ill-conditioned the arithmetic that produced `m` was.
    pub fn snapped(m: ComplexMatrix, cap: f64) -> Result<Self> {
        let dev = (&(&m.adjoint() * &m)).deviation_from_identity();
        if dev > cap {
            return Err(Error::Invariant(format!(
                "matrix is not unitary: |U*U - 1| = {dev:e} exceeds {cap:e}"
            )));
        }
        Self::new(polar_unitary(&m)?)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    /// Deviation of `U* U` from the identity (drift diagnostic).
    pub fn drift(&self) -> f64 {
        (&(&self.m.adjoint() * &self.m)).deviation_from_identity()
    }

    /// Eigenphases in `[-pi, pi)` with eigenvectors.
    pub fn eigenphases(&self) -> Result<UnitaryEigen> {
        unitary_eigenphases(&self.m)
    }

    /// Number of eigenphases within `phase_tol` of zero, i.e. the dimension
    /// of the eigenspace for eigenvalue 1 at the given resolution.
    pub fn kernel_dim_at_one(&self, phase_tol: f64) -> Result<usize> {
        let e = self.eigenphases()?;
        Ok(e.phases.iter().filter(|t| t.abs() <= phase_tol).count())
    }
}
