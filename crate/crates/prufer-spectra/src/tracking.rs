//! Continuous eigenphase tracking along sampled paths of unitaries.
//!
//! The eigenvalues of a continuous unitary path move continuously on the
//! circle, but any single snapshot only shows an unordered set of phases.
//! This module reconstructs continuous per-branch phase lifts from samples:
//!
//! * [`LiftState`] carries the lifted phase of every branch at one sample
//!   and advances to the next sample by matching the two sorted phase lists
//!   with an optimal cyclic rotation — valid whenever consecutive samples
//!   are close (per-branch motion below ~1 rad), because continuous
//!   non-crossing transport on the circle preserves cyclic order;
//! * [`Geodesic`] interpolates between two sampled unitaries along
//!   `U(t) = U_0 (U_0* U_1)^t`, which is how intermediate points are
//!   obtained when a crossing has to be localized inside a segment.
//!
//! Branch labels follow sorted order at the first sample; where two branches
//! collide their labels may exchange, which leaves every net count through a
//! fixed level unchanged.

use crate::error::{Error, Result};
use crate::linalg::{unitary_eigenphases, wrap_angle, ComplexMatrix, UnitaryMatrix};

/// Eigenphases of a unitary, ascending in `[-pi, pi)`.
pub fn sorted_phases(u: &UnitaryMatrix) -> Result<Vec<f64>> {
    let mut phases = u.eigenphases()?.phases;
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(phases)
}

/// Signed circular displacement from `from` to `to`, in `[-pi, pi)`.
pub fn signed_gap(from: f64, to: f64) -> f64 {
    wrap_angle(to - from)
}

/// Result of matching two sorted phase lists by cyclic rotation.
#[derive(Debug, Clone)]
pub struct MatchedStep {
    /// Sorted position `p` of the old list matches `(p + shift) % m` of the new.
    pub shift: usize,
    /// Signed displacement for each sorted position of the old list.
    pub increments: Vec<f64>,
    /// Largest absolute displacement.
    pub motion: f64,
}

/// Matches two ascending phase lists on the circle by the cyclic rotation of
/// minimal total displacement.
pub fn cyclic_match(prev: &[f64], next: &[f64]) -> Result<MatchedStep> {
    let m = prev.len();
    if next.len() != m || m == 0 {
        return Err(Error::Invariant(
            "phase lists must be non-empty and of equal length".into(),
        ));
    }
    let mut best_shift = 0usize;
    let mut best_cost = f64::INFINITY;
    for s in 0..m {
        let cost: f64 = (0..m)
            .map(|p| signed_gap(prev[p], next[(p + s) % m]).abs())
            .sum();
        if cost < best_cost - 1e-15 {
            best_cost = cost;
            best_shift = s;
        }
    }
    let increments: Vec<f64> = (0..m)
        .map(|p| signed_gap(prev[p], next[(p + best_shift) % m]))
        .collect();
    let motion = increments.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    Ok(MatchedStep {
        shift: best_shift,
        increments,
        motion,
    })
}

/// Lifted eigenphases of all branches at one point of a unitary path.
///
/// Branch `j` is the branch that held sorted position `j` at the initial
/// sample; its lifted phase accumulates signed increments and never wraps.
#[derive(Debug, Clone)]
pub struct LiftState {
    /// Lifted (unwrapped) phase per branch label.
    lambdas: Vec<f64>,
    /// Sorted wrapped phases at the current sample.
    sorted: Vec<f64>,
    /// Branch label `j` currently sits at sorted position `(j + rotation) % m`.
    rotation: usize,
}

impl LiftState {
    /// Starts a lift at the given unitary; lifted phases are the sorted
    /// wrapped phases, labels in sorted order.
    pub fn initial(u: &UnitaryMatrix) -> Result<Self> {
        let sorted = sorted_phases(u)?;
        Ok(LiftState {
            lambdas: sorted.clone(),
            sorted,
            rotation: 0,
        })
    }

    pub fn branch_count(&self) -> usize {
        self.lambdas.len()
    }

    /// Lifted phase of branch `j`.
    pub fn branch(&self, j: usize) -> f64 {
        self.lambdas[j]
    }

    pub fn lifted(&self) -> &[f64] {
        &self.lambdas
    }

    /// Wrapped representative of branch `j` (its eigenphase on the circle).
    pub fn wrapped(&self, j: usize) -> f64 {
        self.sorted[(j + self.rotation) % self.lambdas.len()]
    }

    /// Advances the lift to the next sample. Returns the new state and the
    /// largest per-branch motion, which the caller should keep below ~0.5
    /// (sampling adequacy) for the matching to be unambiguous.
    pub fn advanced(&self, next: &UnitaryMatrix) -> Result<(LiftState, f64)> {
        let m = self.lambdas.len();
        let next_sorted = sorted_phases(next)?;
        if next_sorted.len() != m {
            return Err(Error::Invariant("branch count changed along the path".into()));
        }
        let step = cyclic_match(&self.sorted, &next_sorted)?;
        let mut lambdas = self.lambdas.clone();
        for (j, lambda) in lambdas.iter_mut().enumerate() {
            *lambda += step.increments[(j + self.rotation) % m];
        }
        Ok((
            LiftState {
                lambdas,
                sorted: next_sorted,
                rotation: (self.rotation + step.shift) % m,
            },
            step.motion,
        ))
    }
}

/// The geodesic `U(t) = U_0 (U_0* U_1)^t` between two unitaries, evaluated
/// through the eigendecomposition of the relative unitary. For `t` in
/// `[0, 1]` this is the minimal path when the relative eigenphases are taken
/// in `(-pi, pi]`; its determinant phase is linear in `t` with total
/// increment [`Geodesic::det_increment`].
#[derive(Debug, Clone)]
pub struct Geodesic {
    base_w: ComplexMatrix,
    w_adj: ComplexMatrix,
    thetas: Vec<f64>,
}

impl Geodesic {
    pub fn between(a: &UnitaryMatrix, b: &UnitaryMatrix) -> Result<Geodesic> {
        let rel = &a.matrix().adjoint() * b.matrix();
        let eig = unitary_eigenphases(&rel)?;
        Ok(Geodesic {
            base_w: a.matrix() * &eig.vectors,
            w_adj: eig.vectors.adjoint(),
            thetas: eig.phases,
        })
    }

    /// Point on the geodesic, `t = 0` giving the first endpoint and `t = 1`
    /// the second.
    pub fn at(&self, t: f64) -> Result<UnitaryMatrix> {
        let phase: Vec<_> = self
            .thetas
            .iter()
            .map(|&th| num_complex::Complex64::from_polar(1.0, t * th))
            .collect();
        let m = &(&self.base_w * &ComplexMatrix::diagonal(&phase)) * &self.w_adj;
        UnitaryMatrix::with_tolerance(m, 1e-8)
    }

    /// Increment of the lifted `arg det` along the full geodesic.
    pub fn det_increment(&self) -> f64 {
        self.thetas.iter().sum()
    }
}

/// Lifted phases along a whole sampled path, sample-major.
#[derive(Debug, Clone)]
pub struct PhaseLift {
    pub states: Vec<LiftState>,
    /// Largest single-step motion encountered.
    pub max_motion: f64,
}

/// Lifts eigenphases along a list of sampled unitaries. Errors if any step
/// moves a branch by `max_step` or more (inadequate sampling).
pub fn lift_phases(unitaries: &[UnitaryMatrix], max_step: f64) -> Result<PhaseLift> {
    if unitaries.is_empty() {
        return Err(Error::Invariant("cannot lift phases of an empty path".into()));
    }
    let mut states = Vec::with_capacity(unitaries.len());
    states.push(LiftState::initial(&unitaries[0])?);
    let mut max_motion = 0.0f64;
    for (i, u) in unitaries.iter().enumerate().skip(1) {
        let (next, motion) = states[i - 1].advanced(u)?;
        if motion >= max_step {
            return Err(Error::Invariant(format!(
                "sampling too coarse: eigenphase moved {motion:.3} rad in one step \
                 (limit {max_step}); refine the path"
            )));
        }
        max_motion = max_motion.max(motion);
        states.push(next);
    }
    Ok(PhaseLift { states, max_motion })
}

/// Floor of `lambda / 2 pi` with a snap window: values within `1e-9` below a
/// multiple of `2 pi` count as having reached it. Differences of this over a
/// lifted branch count its net signed crossings of full turns.
pub fn turn_count(lambda: f64) -> i64 {
    ((lambda + 1e-9) / std::f64::consts::TAU).floor() as i64
}
