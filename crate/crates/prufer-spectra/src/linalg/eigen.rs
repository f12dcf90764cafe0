//! Eigendecompositions for Hermitian and unitary matrices.
//!
//! The Hermitian solver is a self-contained cyclic Jacobi iteration
//! generalized to complex Hermitian matrices: each rotation strips the phase
//! of the targeted off-diagonal entry and then applies the classical real
//! Jacobi rotation. It serves as the independent dense oracle that the
//! Prüfer-phase machinery is validated against, so it deliberately depends on
//! nothing else in the crate.
//!
//! Unitary matrices are diagonalized through their commuting Hermitian parts
//! `K = (U + U*)/2` and `S = (U - U*)/(2i)`: diagonalize `K`, re-diagonalize
//! `S` inside each near-degenerate cluster of `K`, and read the eigenphase of
//! each joint eigenvector as `atan2(s, k)`. The result is verified against
//! the residual `|U W - W diag(e^{i theta})|` and re-tried with the roles of
//! `K` and `S` swapped before giving up.

use num_complex::Complex64;

use super::matrix::{c64, ComplexMatrix};
use crate::error::{Error, Result};

/// Eigenvalues (ascending) and matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Eigenphases in `[-pi, pi)` (ascending) and matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    pub phases: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Diagonalizes a Hermitian matrix by cyclic Jacobi rotations.
///
/// The input must be Hermitian to `1e-12` in max-abs relative to its scale;
/// the caller-facing wrappers in [`super`] enforce that. Residuals satisfy
/// `|M v - lambda v| <= 1e-10 * |M|` for every returned pair.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::Invariant("eigendecomposition of non-square matrix".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    let off = |a: &ComplexMatrix| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                sum += a[(i, j)].norm_sqr();
            }
        }
        sum.sqrt()
    };

    let max_sweeps = 40;
    let mut converged = false;
    for _sweep in 0..max_sweeps {
        if off(&a) <= 1e-14 * scale * (n as f64) {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let g = a[(p, q)];
                let gn = g.norm();
                if gn <= 1e-18 * scale {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Phase removal + classical Jacobi: the 2x2 unitary is
                //   R = [[c, s], [-s e^{-i phi}, c e^{-i phi}]],  g = |g| e^{i phi}.
                let phase = g / gn;
                let tau = (aqq - app) / (2.0 * gn);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let phase_conj = phase.conj();

                // Column update A <- A R.
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c - aiq * phase_conj * s;
                    a[(i, q)] = aip * s + aiq * phase_conj * c;
                }
                // Row update A <- R* A.
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c - aqj * phase * s;
                    a[(q, j)] = apj * s + aqj * phase * c;
                }
                // Clean the rotated pair: exact zeros off-diagonal, real diagonal.
                a[(p, q)] = Complex64::ZERO;
                a[(q, p)] = Complex64::ZERO;
                a[(p, p)] = c64(a[(p, p)].re, 0.0);
                a[(q, q)] = c64(a[(q, q)].re, 0.0);
                // Accumulate V <- V R.
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * phase_conj * s;
                    v[(i, q)] = vip * s + viq * phase_conj * c;
                }
            }
        }
    }
    if !converged && off(&a) > 1e-12 * scale * (n as f64) {
        return Err(Error::Invariant(
            "Jacobi eigensolver failed to converge; matrix may be far from Hermitian".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut t = theta.rem_euclid(two_pi);
    if t >= std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

/// Diagonalizes a unitary matrix into eigenphases and eigenvectors.
pub fn unitary_eigenphases(u: &ComplexMatrix) -> Result<UnitaryEigen> {
    if !u.is_square() {
        return Err(Error::Invariant("eigenphases of non-square matrix".into()));
    }
    let ustar = u.adjoint();
    let k = (&(u + &ustar)).scale(c64(0.5, 0.0));
    let s = (&(u - &ustar)).scale(c64(0.0, -0.5));

    for (primary, secondary) in [(&k, &s), (&s, &k)] {
        if let Some(res) = joint_phases(u, primary, secondary)? {
            return Ok(res);
        }
    }
    Err(Error::Invariant(
        "unitary eigendecomposition failed residual verification".into(),
    ))
}

/// Joint diagonalization attempt with a chosen primary Hermitian part.
/// Returns `None` when the residual check fails (the caller retries).
fn joint_phases(
    u: &ComplexMatrix,
    primary: &ComplexMatrix,
    secondary: &ComplexMatrix,
) -> Result<Option<UnitaryEigen>> {
    let n = u.rows();
    let eig = hermitian_eig(primary)?;
    let mut w = eig.vectors;

    // Re-diagonalize the secondary part inside clusters of nearly equal
    // primary eigenvalues; outside clusters the basis is already joint.
    let cluster_tol = 1e-6;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (eig.values[end] - eig.values[end - 1]).abs() <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let cols = w.block(0, start, n, end - start);
            let sub = &(&cols.adjoint() * secondary) * &cols;
            let sub_sym = (&(&sub + &sub.adjoint())).scale(c64(0.5, 0.0));
            let sub_eig = hermitian_eig(&sub_sym)?;
            let rotated = &cols * &sub_eig.vectors;
            w.set_block(0, start, &rotated);
        }
        start = end;
    }

    // Phases from the diagonal of W* U W; verification against the residual.
    let d = &(&w.adjoint() * u) * &w;
    let mut phases: Vec<f64> = (0..n).map(|j| d[(j, j)].im.atan2(d[(j, j)].re)).collect();
    for t in phases.iter_mut() {
        *t = wrap_angle(*t);
    }

    let reconstructed = ComplexMatrix::from_fn(n, n, |i, j| {
        w[(i, j)] * Complex64::from_polar(1.0, phases[j])
    });
    let residual = (&(u * &w)).max_abs_diff(&reconstructed);
    if residual > 1e-9 * (1.0 + u.max_abs()) * (n as f64) {
        return Ok(None);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| phases[i].partial_cmp(&phases[j]).unwrap());
    let sorted_phases: Vec<f64> = order.iter().map(|&i| phases[i]).collect();
    let sorted_w = ComplexMatrix::from_fn(n, n, |i, j| w[(i, order[j])]);
    Ok(Some(UnitaryEigen {
        phases: sorted_phases,
        vectors: sorted_w,
    }))
}

/// Projects a near-unitary matrix onto the unitary group by Newton iteration
/// for the polar factor, `X <- (X + X^{-*})/2`.
pub fn polar_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::Invariant("polar projection of non-square matrix".into()));
    }
    let mut x = m.clone();
    for _ in 0..20 {
        let drift = (&(&x.adjoint() * &x)).deviation_from_identity();
        if drift <= 1e-15 * (x.rows() as f64) {
            break;
        }
        let inv_adj = x.inverse()?.adjoint();
        x = (&(&x + &inv_adj)).scale(c64(0.5, 0.0));
    }
    Ok(x)
}
