//! Singular values and numerical rank.
//!
//! Singular values are computed by one-sided Jacobi (Hestenes) rotations:
//! column pairs are rotated until all pairs are mutually orthogonal, and the
//! singular values are the final column norms. One-sided Jacobi is preferred
//! over diagonalizing `M* M` because it retains high *relative* accuracy for
//! small singular values, which is what makes a rank threshold of
//! `1e-8 * sigma_max` trustworthy: a true zero comes out at roundoff level
//! (~1e-15) instead of at `sqrt(eps)` (~1e-8).

use num_complex::Complex64;

use super::matrix::ComplexMatrix;

/// Relative gap under `sigma_max` treated as numerically zero by [`rank`].
pub const RANK_REL_TOL: f64 = 1e-8;

/// Singular values in descending order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Vec::new();
    }
    // Work on the tall orientation so sweeps run over the smaller index set.
    let mut a = if m.rows() >= m.cols() { m.clone() } else { m.adjoint() };
    let (rows, cols) = (a.rows(), a.cols());

    let max_sweeps = 60;
    for _sweep in 0..max_sweeps {
        let mut converged = true;
        for p in 0..cols {
            for q in p + 1..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::ZERO;
                for k in 0..rows {
                    let ap = a[(k, p)];
                    let aq = a[(k, q)];
                    alpha += ap.norm_sqr();
                    beta += aq.norm_sqr();
                    gamma += ap.conj() * aq;
                }
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                converged = false;
                // Unitary 2x2 rotation orthogonalizing the column pair: strip
                // the phase of the inner product, then a real Jacobi rotation.
                let phase = gamma / g; // e^{i phi}
                let tau = (beta - alpha) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let phase_conj = phase.conj();
                for k in 0..rows {
                    let ap = a[(k, p)];
                    let aq = a[(k, q)];
                    a[(k, p)] = ap * c - aq * phase_conj * s;
                    a[(k, q)] = ap * s + aq * phase_conj * c;
                }
            }
        }
        if converged {
            break;
        }
    }

    let mut sigmas: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|k| a[(k, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sigmas.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sigmas
}

/// Operator (spectral) norm: the largest singular value.
pub fn op_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Numerical rank: the number of singular values above `tol * sigma_max`.
/// The zero matrix has rank 0 for any tolerance.
pub fn rank(m: &ComplexMatrix, tol: f64) -> usize {
    let sigmas = singular_values(m);
    let sigma_max = sigmas.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return 0;
    }
    sigmas.iter().filter(|&&s| s > tol * sigma_max).count()
}

/// Condition number `sigma_max / sigma_min`, infinite for singular input.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let sigmas = singular_values(m);
    match (sigmas.first(), sigmas.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}
