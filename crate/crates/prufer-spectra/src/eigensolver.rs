//! Spectral solver built on matrix Prüfer phases.
//!
//! For a finite block Jacobi chain, the eigenphases of the detection unitary
//! (the Prüfer phases) rotate monotonically counterclockwise as the energy
//! sweeps the real line, and `E` is an eigenvalue of the chain exactly when
//! an eigenphase passes through zero — with the eigenvalue multiplicity
//! equal to the number of phases passing simultaneously. This module turns
//! that picture into a solver:
//!
//! 1. [`gershgorin_bounds`] confines the spectrum from the blocks alone;
//! 2. [`scan_flow`] samples the detection unitary over an energy grid
//!    (embarrassingly parallel, deterministic merge), refining adaptively
//!    until consecutive samples move < 0.5 in operator norm, then lifts the
//!    eigenphases into continuous monotone branches;
//! 3. [`find_eigenvalues`] locates every passage of a lifted branch through
//!    a multiple of `2 pi` by bisection (monotonicity guarantees
//!    bracketing), clusters coincident passages into multiplicities,
//!    verifies each isolated cluster against `dim ker(U - 1)`, and demands
//!    that the total count equal the matrix dimension `N L`;
//! 4. [`asymptotic_unitary`] is the common `E -> +-infinity` limit of the
//!    periodic detection unitaries, with eigenphases `+-pi/2`;
//! 5. [`compactified_frame_loop`] closes the energy path through `E =
//!    infinity` (where the boundary-data frame tends to the horizontal
//!    plane), so the total intersection index of the closed loop counts all
//!    `N L` eigenvalues at once.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::indices::{intersection_index, LagrangianPath};
use crate::jacobi::{dirichlet_unitary, prufer_unitaries, BlockJacobiModel, BoundaryCondition};
use crate::linalg::{
    condition_number, op_norm, tol::KERNEL_PHASE, ComplexMatrix, HermitianMatrix, UnitaryMatrix,
};
use crate::symplectic::{periodic_frame, periodic_pairing, stereographic, stereographic_inverse};
use crate::tracking::{lift_phases, turn_count, LiftState, PhaseLift};

/// Largest allowed operator-norm motion between consecutive scan samples.
const SCAN_STEP_LIMIT: f64 = 0.45;

/// Eigenphase motion limit for the lift, implied by [`SCAN_STEP_LIMIT`].
const LIFT_STEP_LIMIT: f64 = 0.55;

/// Lifted phases may step backwards by at most this much (roundoff on
/// stationary branches); anything larger flags a branch mis-association and
/// triggers local refinement.
const BACKWARD_PHASE_TOL: f64 = 1e-7;

/// Maximum grid-refinement rounds before giving up.
const MAX_REFINEMENT_ROUNDS: usize = 40;

/// Hopping blocks with condition number at or above this are refused by the
/// scanner: transfer matrices involve their inverses at every site.
const SCAN_CONDITION_LIMIT: f64 = 1e8;

/// Interval containing the whole spectrum of the chain under every boundary
/// closure `|omega| <= 1`, from block Gershgorin discs: site `n` contributes
/// the eigenvalue range of `V_n` widened by `‖T_n‖ + ‖T_{n+1}‖`.
pub fn gershgorin_bounds(model: &BlockJacobiModel) -> Result<(f64, f64)> {
    let n = model.site_count();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for site in 1..=n {
        let centers = HermitianMatrix::new(model.potential(site).clone())?.eigenvalues()?;
        let radius = op_norm(model.hopping(site)) + op_norm(model.hopping(site + 1));
        lo = lo.min(centers.first().copied().unwrap_or(0.0) - radius);
        hi = hi.max(centers.last().copied().unwrap_or(0.0) + radius);
    }
    Ok((lo, hi))
}

/// Default scan resolution: the total phase winding over the real line is
/// `2 pi N L`, so this keeps the expected per-interval motion well below the
/// refinement threshold.
pub fn default_grid_points(model: &BlockJacobiModel) -> usize {
    (64 * model.site_count() * model.block_size()).max(16)
}

/// Evaluates the boundary-adapted detection unitary at arbitrary energies.
struct Detector<'a> {
    model: &'a BlockJacobiModel,
    /// `Pi(Psi)*` of the boundary frame for frame-type closures; `None`
    /// selects the Dirichlet route (half-size unitary, no pairing).
    pairing: Option<ComplexMatrix>,
}

impl<'a> Detector<'a> {
    fn new(model: &'a BlockJacobiModel, bc: &BoundaryCondition) -> Result<Self> {
        for site in 1..=model.site_count() {
            let kappa = condition_number(model.hopping(site));
            if !(kappa < SCAN_CONDITION_LIMIT) {
                return Err(Error::Invariant(format!(
                    "hopping block {site} has condition number {kappa:.2e}, beyond the \
                     scanning limit {SCAN_CONDITION_LIMIT:.0e}"
                )));
            }
        }
        let pairing = match bc {
            BoundaryCondition::Dirichlet => None,
            BoundaryCondition::Periodic { k } => {
                if model.site_count() < 3 {
                    return Err(Error::Invariant(
                        "periodic closure needs at least 3 sites".into(),
                    ));
                }
                Some(periodic_pairing(model.block_size(), *k).matrix().clone())
            }
            BoundaryCondition::General { frame } => {
                if frame.half_dim() != 2 * model.block_size() {
                    return Err(Error::Invariant(format!(
                        "boundary frame has half-dimension {}, model needs {}",
                        frame.half_dim(),
                        2 * model.block_size()
                    )));
                }
                Some(stereographic(frame)?.matrix().adjoint())
            }
        };
        Ok(Detector { model, pairing })
    }

    fn unitary_at(&self, energy: f64) -> Result<UnitaryMatrix> {
        match &self.pairing {
            None => dirichlet_unitary(self.model, energy),
            Some(p) => {
                let (w, _) = prufer_unitaries(self.model, energy, 0.0)?;
                UnitaryMatrix::with_tolerance(p * w.matrix(), 1e-8)
            }
        }
    }

    fn branch_count(&self) -> usize {
        match self.pairing {
            None => self.model.block_size(),
            Some(_) => 2 * self.model.block_size(),
        }
    }
}

/// Evaluates a unitary family over a list of energies, splitting the work
/// over `jobs` threads. Results are merged in input order, so the output is
/// byte-identical for every job count.
fn eval_grid<F>(family: &F, energies: &[f64], jobs: usize) -> Result<Vec<UnitaryMatrix>>
where
    F: Fn(f64) -> Result<UnitaryMatrix> + Sync,
{
    let jobs = jobs.max(1).min(energies.len().max(1));
    if jobs == 1 {
        return energies.iter().map(|&e| family(e)).collect();
    }
    let chunk = energies.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = energies
            .chunks(chunk)
            .map(|c| scope.spawn(move || c.iter().map(|&e| family(e)).collect()))
            .collect();
        let mut out: Vec<UnitaryMatrix> = Vec::with_capacity(energies.len());
        for handle in handles {
            let part: Result<Vec<UnitaryMatrix>> = handle
                .join()
                .map_err(|_| Error::Invariant("scan worker thread panicked".into()))?;
            out.extend(part?);
        }
        Ok(out)
    })
}

/// A refined scan: energies ascending and the branch-matched phase lift.
pub(crate) struct Scan {
    pub(crate) energies: Vec<f64>,
    pub(crate) lift: PhaseLift,
}

pub(crate) fn scan_states<F>(
    family: &F,
    e_lo: f64,
    e_hi: f64,
    grid_points: usize,
    jobs: usize,
) -> Result<Scan>
where
    F: Fn(f64) -> Result<UnitaryMatrix> + Sync,
{
    if grid_points < 2 {
        return Err(Error::Invariant("scan needs at least 2 grid points".into()));
    }
    if !(e_hi > e_lo) {
        return Err(Error::Invariant(format!(
            "scan range [{e_lo}, {e_hi}] is empty"
        )));
    }
    let mut energies: Vec<f64> = (0..grid_points)
        .map(|i| e_lo + (e_hi - e_lo) * i as f64 / (grid_points - 1) as f64)
        .collect();
    let mut unitaries = eval_grid(family, &energies, jobs)?;
    for round in 0..=MAX_REFINEMENT_ROUNDS {
        let mut mids = Vec::new();
        let midpoint = |i: usize, energies: &[f64]| -> Option<f64> {
            let mid = 0.5 * (energies[i] + energies[i + 1]);
            (mid > energies[i] && mid < energies[i + 1]).then_some(mid)
        };
        for i in 0..energies.len() - 1 {
            let step = op_norm(&(unitaries[i + 1].matrix() - unitaries[i].matrix()));
            if step >= SCAN_STEP_LIMIT {
                mids.extend(midpoint(i, &energies));
            }
        }
        if mids.is_empty() {
            // Sampling looks adequate; lift the phases and accept unless some
            // branch steps backwards. A backward step is a branch
            // mis-association across a near-degenerate passage (true phases
            // are monotone), so the cure is local refinement, not failure.
            let lift = lift_phases(&unitaries, LIFT_STEP_LIMIT)?;
            for i in 0..energies.len() - 1 {
                let a = &lift.states[i];
                let b = &lift.states[i + 1];
                if (0..a.branch_count())
                    .any(|j| b.branch(j) - a.branch(j) < -BACKWARD_PHASE_TOL)
                {
                    mids.extend(midpoint(i, &energies));
                }
            }
            if mids.is_empty() {
                return Ok(Scan { energies, lift });
            }
        }
        if round == MAX_REFINEMENT_ROUNDS {
            return Err(Error::Invariant(format!(
                "scan refinement exhausted near E = {}: detector still moves >= \
                 {SCAN_STEP_LIMIT} per step",
                mids[0]
            )));
        }
        let new_us = eval_grid(family, &mids, jobs)?;
        let mut merged: Vec<(f64, UnitaryMatrix)> = energies
            .drain(..)
            .zip(unitaries.drain(..))
            .chain(mids.into_iter().zip(new_us))
            .collect();
        merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        (energies, unitaries) = merged.into_iter().unzip();
    }
    unreachable!("scan refinement loop always returns or errors");
}

/// The scan window: Gershgorin bounds padded by 10% of their width on each
/// side, so every eigenvalue lies strictly inside.
fn scan_range(model: &BlockJacobiModel) -> Result<(f64, f64)> {
    let (lo, hi) = gershgorin_bounds(model)?;
    let pad = 0.1 * (hi - lo);
    Ok((lo - pad, hi + pad))
}

/// Branch-matched eigenphase flow of the detection unitary over an energy
/// grid. Lifted phases are continuous and (for exact arithmetic)
/// nondecreasing in `E`; their passages through multiples of `2 pi` are the
/// eigenvalues of the chain.
#[derive(Debug, Clone)]
pub struct EigenphaseFlow {
    energies: Vec<f64>,
    lifted: Vec<Vec<f64>>,
    branch_count: usize,
}

impl EigenphaseFlow {
    /// Refined energy grid, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Number of phase branches (`L` for Dirichlet, `2L` otherwise).
    pub fn branch_count(&self) -> usize {
        self.branch_count
    }

    /// Lifted (continuous, unwrapped) phases at grid point `i`.
    pub fn lifted(&self, i: usize) -> &[f64] {
        &self.lifted[i]
    }

    /// Wrapped phase of branch `j` at grid point `i`, in `[-pi, pi)`.
    pub fn wrapped(&self, i: usize, j: usize) -> f64 {
        crate::linalg::wrap_angle(self.lifted[i][j])
    }

    /// Smallest single-step lifted increment over all branches; negative
    /// values beyond roundoff would contradict phase monotonicity.
    pub fn min_step_increment(&self) -> f64 {
        let mut min = f64::INFINITY;
        for pair in self.lifted.windows(2) {
            for j in 0..self.branch_count {
                min = min.min(pair[1][j] - pair[0][j]);
            }
        }
        min
    }

    /// Net number of full-turn passages summed over branches — the number
    /// of eigenvalues (with multiplicity) inside the scanned window.
    pub fn crossing_count(&self) -> i64 {
        let first = &self.lifted[0];
        let last = self.lifted.last().unwrap();
        (0..self.branch_count)
            .map(|j| turn_count(last[j]) - turn_count(first[j]))
            .sum()
    }
}

/// Scans the detection unitary over the padded Gershgorin window on
/// `grid_points` initial samples (adaptively refined) and lifts the
/// eigenphase branches. Single-threaded; see [`scan_flow_with_jobs`].
pub fn scan_flow(
    model: &BlockJacobiModel,
    bc: &BoundaryCondition,
    grid_points: usize,
) -> Result<EigenphaseFlow> {
    scan_flow_with_jobs(model, bc, grid_points, 1)
}

/// [`scan_flow`] with grid evaluation split over `jobs` threads. The result
/// is identical for every job count.
pub fn scan_flow_with_jobs(
    model: &BlockJacobiModel,
    bc: &BoundaryCondition,
    grid_points: usize,
    jobs: usize,
) -> Result<EigenphaseFlow> {
    let det = Detector::new(model, bc)?;
    let (e_lo, e_hi) = scan_range(model)?;
    let scan = scan_states(&|e| det.unitary_at(e), e_lo, e_hi, grid_points, jobs)?;
    Ok(EigenphaseFlow {
        energies: scan.energies,
        lifted: scan.lift.states.iter().map(|s| s.lifted().to_vec()).collect(),
        branch_count: det.branch_count(),
    })
}

/// One located eigenvalue of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub energy: f64,
    pub multiplicity: usize,
}

/// Full spectrum with multiplicities and solver diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Eigenvalues ascending; gaps exceed the clustering window.
    pub eigenvalues: Vec<Eigenvalue>,
    /// Sum of multiplicities; always `N L` (enforced).
    pub total_multiplicity: usize,
    /// Largest `min |eigenphase|` of the detector over phase-located
    /// eigenvalues — how far the located energies sit from exact phase
    /// crossings. Eigenvalues recovered by the oscillation-count rescue
    /// (passages too narrow for the scan) are excluded: their certificate is
    /// a counting bracket, not a small detector phase.
    pub max_phase_residual: f64,
}

/// Solves the chain: every passage of a lifted phase branch through a
/// multiple of `2 pi` is located by bisection (phases are monotone in `E`,
/// so brackets are guaranteed), passages within `max(tol, 1e-9 width)` of
/// each other merge into one eigenvalue with summed multiplicity, and
/// isolated tight clusters are verified against `dim ker(U - 1)`.
///
/// Eigenstates localized deep inside the chain cross the detector within an
/// energy width exponentially small in the distance to the boundary — often
/// narrower than any energy grid. For Dirichlet and periodic closures these
/// hidden passages are recovered by bisecting the discrete oscillation count
/// ([`crate::jacobi::states_below`]). The total must come out to `N L`,
/// otherwise a completeness error reports the per-branch windings.
pub fn find_eigenvalues(
    model: &BlockJacobiModel,
    bc: &BoundaryCondition,
    tol: f64,
) -> Result<SpectralResult> {
    find_eigenvalues_with_jobs(model, bc, tol, default_grid_points(model), 1)
}

/// [`find_eigenvalues`] with explicit grid resolution and thread count.
pub fn find_eigenvalues_with_jobs(
    model: &BlockJacobiModel,
    bc: &BoundaryCondition,
    tol: f64,
    grid_points: usize,
    jobs: usize,
) -> Result<SpectralResult> {
    let det = Detector::new(model, bc)?;
    let (e_lo, e_hi) = scan_range(model)?;
    let family = |e: f64| det.unitary_at(e);
    let count_below = |e: f64| crate::jacobi::states_below(model, bc, e);
    let counter: Option<&(dyn Fn(f64) -> Result<usize> + Sync)> = match bc {
        BoundaryCondition::General { .. } => None,
        _ => Some(&count_below),
    };
    let located = locate_spectrum(&family, e_lo, e_hi, grid_points, jobs, tol, counter)?;

    let total_multiplicity: usize = located.eigenvalues.iter().map(|e| e.multiplicity).sum();
    let expected = model.total_dimension();
    if total_multiplicity != expected {
        return Err(Error::Completeness(format!(
            "found {total_multiplicity} eigenvalues, expected {expected}; \
             per-branch windings {:?}",
            located.branch_windings
        )));
    }
    Ok(SpectralResult {
        eigenvalues: located.eigenvalues,
        total_multiplicity,
        max_phase_residual: located.max_phase_residual,
    })
}

/// Output of [`locate_spectrum`]: located eigenvalues plus sweep diagnostics.
pub(crate) struct LocatedSpectrum {
    pub(crate) eigenvalues: Vec<Eigenvalue>,
    pub(crate) max_phase_residual: f64,
    /// Net turns of each lifted phase branch over the swept window; empty
    /// when the scan fell through to pure count bisection.
    pub(crate) branch_windings: Vec<i64>,
}

/// Smallest useful spacing of counting probes near `|E| ~ scale`: a
/// twentieth of the user tolerance, floored by f64 spacing and by the
/// counting oracle's own resolution (its singular-pivot nudge band).
fn count_floor(tol: f64, scale: f64) -> f64 {
    let s = scale.max(1.0);
    (0.05 * tol)
        .max(4.0 * f64::EPSILON * s)
        .max(crate::jacobi::COUNT_RESOLUTION * s)
}

/// Inserts passages the energy scan could not see. `count_below(E)` returns
/// the number of eigenvalues strictly below `E` (the discrete oscillation
/// count, robust at any energy); comparing its increments against the
/// located passages over a bisection tree pins every hidden crossing —
/// typically a state exponentially localized away from the boundary, whose
/// phase transition is far narrower than any energy grid — to a bracket a
/// few bisection floors wide.
fn rescue_hidden_passages(
    count_below: &(dyn Fn(f64) -> Result<usize> + Sync),
    e_lo: f64,
    e_hi: f64,
    tol: f64,
    crossings: &mut Vec<(f64, bool)>,
) -> Result<()> {
    let c_lo = count_below(e_lo)?;
    let c_hi = count_below(e_hi)?;
    if c_hi < c_lo {
        return Err(Error::Invariant(format!(
            "oscillation count decreased from {c_lo} to {c_hi} over the scan window"
        )));
    }
    let expected = c_hi - c_lo;
    if crossings.len() > expected {
        return Err(Error::Invariant(format!(
            "{} phase passages located, but the oscillation count allows only {expected} \
             in the scan window",
            crossings.len()
        )));
    }
    if crossings.len() == expected {
        return Ok(());
    }

    let floor = count_floor(tol, e_lo.abs().max(e_hi.abs()));
    let mut rescued: Vec<f64> = Vec::new();
    let mut stack = vec![(e_lo, e_hi, c_lo, c_hi)];
    while let Some((lo, hi, clo, chi)) = stack.pop() {
        let expected_inside = chi - clo;
        let known = crossings
            .iter()
            .map(|c| c.0)
            .chain(rescued.iter().copied())
            .filter(|&x| x > lo && x <= hi)
            .count();
        if known >= expected_inside {
            continue;
        }
        if hi - lo <= 8.0 * floor {
            let mid = 0.5 * (lo + hi);
            rescued.extend(std::iter::repeat(mid).take(expected_inside - known));
            continue;
        }
        // Probe away from every known passage: passages are located to about
        // one floor, so two floors of clearance keeps their attribution to
        // subintervals unambiguous.
        let crowded = |x: f64| {
            crossings
                .iter()
                .map(|c| c.0)
                .chain(rescued.iter().copied())
                .any(|c| (c - x).abs() < 2.0 * floor)
        };
        let mut mid = 0.5 * (lo + hi);
        if crowded(mid) {
            let right = mid + 4.0 * floor;
            let left = mid - 4.0 * floor;
            if right < hi && !crowded(right) {
                mid = right;
            } else if left > lo && !crowded(left) {
                mid = left;
            } else {
                // Known passages crowd every probe; the interval is already
                // resolved to a few floors.
                rescued.extend(std::iter::repeat(mid).take(expected_inside - known));
                continue;
            }
        }
        let cmid = count_below(mid)?;
        if !(clo..=chi).contains(&cmid) {
            return Err(Error::Invariant(format!(
                "oscillation count {cmid} at E = {mid} outside its bracket [{clo}, {chi}]"
            )));
        }
        stack.push((lo, mid, clo, cmid));
        stack.push((mid, hi, cmid, chi));
    }
    crossings.extend(rescued.into_iter().map(|x| (x, true)));
    crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(())
}

/// Sweeps any family of detection unitaries whose eigenphases rotate
/// monotonically (counterclockwise) in the parameter, locating every passage
/// through `1` by bisection, merging passages within `max(tol, 1e-9 width)`
/// into multiplicities, and verifying isolated tight clusters against the
/// kernel dimension. Shared by the lattice and the continuum solvers.
///
/// `counter`, when available, supplies the exact number of eigenvalues below
/// an energy; it rescues passages whose phase transition is too narrow for
/// any grid (see [`rescue_hidden_passages`]). Rescued passages skip the
/// kernel verification and the residual statistic — their certificate is the
/// counting bracket, not a small detector phase.
pub(crate) fn locate_spectrum<F>(
    family: &F,
    e_lo: f64,
    e_hi: f64,
    grid_points: usize,
    jobs: usize,
    tol: f64,
    counter: Option<&(dyn Fn(f64) -> Result<usize> + Sync)>,
) -> Result<LocatedSpectrum>
where
    F: Fn(f64) -> Result<UnitaryMatrix> + Sync,
{
    if !(tol > 1e-12 && tol < 1e-3) {
        return Err(Error::Invariant(format!(
            "refinement tolerance {tol:e} outside (1e-12, 1e-3)"
        )));
    }
    // The scan resolves any passage wide enough for some grid. Strong
    // disorder can push a transition below f64 spacing (a state localized n
    // sites into the chain couples to the boundary like kappa^{-n}), leaving
    // a phase cliff between adjacent floats that no refinement flattens; when
    // the scan exhausts on such a cliff and a counter is available, the whole
    // window falls through to pure count bisection.
    let scan = match scan_states(family, e_lo, e_hi, grid_points, jobs) {
        Ok(scan) => Some(scan),
        Err(Error::Invariant(msg))
            if counter.is_some() && msg.starts_with("scan refinement exhausted") =>
        {
            None
        }
        Err(err) => return Err(err),
    };
    let width = e_hi - e_lo;

    let (mut crossings, branch_windings) = if let Some(scan) = &scan {
        let branch_count = scan.lift.states[0].branch_count();

        // Every (segment, branch, target multiple) whose lifted phase crosses.
        struct Task<'s> {
            segment: usize,
            branch: usize,
            target: f64,
            state: &'s LiftState,
        }
        let mut tasks = Vec::new();
        for i in 0..scan.energies.len() - 1 {
            let start = &scan.lift.states[i];
            let end = &scan.lift.states[i + 1];
            for j in 0..branch_count {
                let c0 = turn_count(start.branch(j));
                let c1 = turn_count(end.branch(j));
                if c1 < c0 {
                    return Err(Error::Invariant(format!(
                        "phase branch {j} lost a full turn between E = {} and {}: \
                         monotone flow violated",
                        scan.energies[i],
                        scan.energies[i + 1]
                    )));
                }
                for m in (c0 + 1)..=c1 {
                    tasks.push(Task {
                        segment: i,
                        branch: j,
                        target: TAU * m as f64,
                        state: start,
                    });
                }
            }
        }

        // Bisection refinement of every passage, parallel over passages. The
        // bracket shrinks to a twentieth of the clustering tolerance (or
        // machine precision, whichever is coarser), so cheap tolerances cost
        // few probes.
        let refine = |task: &Task| -> Result<f64> {
            let (mut lo, mut hi) = (
                scan.energies[task.segment],
                scan.energies[task.segment + 1],
            );
            for _ in 0..80 {
                let floor = (0.05 * tol).max(4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1.0));
                if hi - lo <= floor {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let u = family(mid)?;
                let (probe, _) = task.state.advanced(&u)?;
                if probe.branch(task.branch) >= task.target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        };
        let jobs_eff = jobs.max(1).min(tasks.len().max(1));
        let refine = &refine;
        let mut crossings: Vec<f64> = if jobs_eff == 1 {
            tasks.iter().map(refine).collect::<Result<_>>()?
        } else {
            let chunk = tasks.len().div_ceil(jobs_eff);
            std::thread::scope(|scope| {
                let handles: Vec<_> = tasks
                    .chunks(chunk)
                    .map(|c| {
                        scope.spawn(move || c.iter().map(refine).collect::<Result<Vec<f64>>>())
                    })
                    .collect();
                let mut out = Vec::with_capacity(tasks.len());
                for handle in handles {
                    let part = handle.join().map_err(|_| {
                        Error::Invariant("refinement worker thread panicked".into())
                    })?;
                    out.extend(part?);
                }
                Ok::<Vec<f64>, Error>(out)
            })?
        };
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let branch_windings: Vec<i64> = (0..branch_count)
            .map(|j| {
                turn_count(scan.lift.states.last().unwrap().branch(j))
                    - turn_count(scan.lift.states[0].branch(j))
            })
            .collect();
        let crossings: Vec<(f64, bool)> = crossings.into_iter().map(|x| (x, false)).collect();
        (crossings, branch_windings)
    } else {
        (Vec::new(), Vec::new())
    };
    if let Some(count_below) = counter {
        rescue_hidden_passages(count_below, e_lo, e_hi, tol, &mut crossings)?;
    }

    // Merge passages into eigenvalues with multiplicity.
    let window = tol.max(1e-9 * width);
    let mut eigenvalues = Vec::new();
    let mut max_phase_residual = 0.0f64;
    let mut i = 0;
    while i < crossings.len() {
        let mut j = i + 1;
        while j < crossings.len() && crossings[j].0 - crossings[j - 1].0 <= window {
            j += 1;
        }
        let cluster = &crossings[i..j];
        let energy = cluster.iter().map(|c| c.0).sum::<f64>() / cluster.len() as f64;
        let multiplicity = cluster.len();
        let rescued = cluster.iter().any(|c| c.1);
        let spread = cluster[cluster.len() - 1].0 - cluster[0].0;
        let isolation = f64::min(
            if i == 0 {
                f64::INFINITY
            } else {
                energy - crossings[i - 1].0
            },
            if j == crossings.len() {
                f64::INFINITY
            } else {
                crossings[j].0 - energy
            },
        );

        // Rescued passages are certified by the counting bracket; the
        // detector phase at their energy need not be small (the transition
        // can be narrower than the located bracket), so the residual and
        // kernel statistics only cover phase-located clusters.
        if !rescued {
            let u = family(energy)?;
            let phases = u.eigenphases()?.phases;
            let residual = phases.iter().fold(f64::INFINITY, |a, p| a.min(p.abs()));
            max_phase_residual = max_phase_residual.max(residual);

            // A tight, isolated cluster must match the kernel dimension of
            // the detector exactly; wide merges (distinct eigenvalues inside
            // the user window) legitimately may not.
            if spread <= 1e-8 * energy.abs().max(1.0) && isolation >= 1e-5 * width.max(1.0) {
                let kernel = u.kernel_dim_at_one(KERNEL_PHASE)?;
                if kernel != multiplicity {
                    // A passage sharper than the bisection floor is located
                    // accurately, yet no probe energy brings the detector
                    // phase near zero; the oscillation count across a small
                    // bracket settles its multiplicity exactly.
                    let Some(count_below) = counter else {
                        return Err(Error::Invariant(format!(
                            "eigenvalue at E = {energy}: {multiplicity} branch passages but \
                             kernel dimension {kernel}"
                        )));
                    };
                    let floor = count_floor(tol, energy.abs());
                    let delta = (4.0 * floor + 2.0 * spread).min(0.4 * isolation);
                    let below = count_below(energy - delta)? as i64;
                    let above = count_below(energy + delta)? as i64;
                    if above - below != multiplicity as i64 {
                        return Err(Error::Invariant(format!(
                            "eigenvalue at E = {energy}: {multiplicity} branch passages, \
                             kernel dimension {kernel}, and {} states in the counting bracket",
                            above - below
                        )));
                    }
                }
            }
        }
        eigenvalues.push(Eigenvalue {
            energy,
            multiplicity,
        });
        i = j;
    }

    Ok(LocatedSpectrum {
        eigenvalues,
        max_phase_residual,
        branch_windings,
    })
}

/// The common `E -> +-infinity` limit of the periodic detection unitaries:
/// `[[0, i e^{-ik}], [i e^{ik}, 0]]` in `L x L` blocks, with eigenphases
/// `+pi/2` and `-pi/2` each of multiplicity `L`.
pub fn asymptotic_unitary(k: f64, half_dim: usize) -> UnitaryMatrix {
    periodic_pairing(half_dim, k)
}

/// Largest allowed projection step between consecutive loop samples, with
/// margin below the hard limit [`crate::indices::MAX_SAMPLE_STEP`].
const LOOP_STEP_TARGET: f64 = 0.45;

/// Hard cap on compactified-loop samples (roughly 60 bisection levels into
/// any single feature before the budget runs out).
const LOOP_MAX_SAMPLES: usize = 1 << 17;

/// The boundary-data frames over the compactified energy line as one closed
/// Lagrangian loop. The line is wrapped onto a circle by `E = S tan(s)` with
/// `S` the spectral reach, `s` in `[-pi/2, pi/2]`; both endpoints carry the
/// `E = infinity` frame (the horizontal plane, the common limit of the
/// boundary-data frames), so the path closes. Sampling starts uniform in `s`
/// and every interval whose projection moves more than 0.45 in operator norm
/// is bisected — arbitrarily sharp features (eigenstates localized away from
/// the boundary) get resolved locally instead of forcing a global grid.
pub fn compactified_frame_loop(
    model: &BlockJacobiModel,
    grid_points: usize,
) -> Result<LagrangianPath> {
    use std::f64::consts::FRAC_PI_2;
    let (e_lo, e_hi) = scan_range(model)?;
    let reach = e_lo.abs().max(e_hi.abs()).max(1.0);
    let frame_at = |s: f64| -> Result<crate::symplectic::LagrangianFrame> {
        if s <= -FRAC_PI_2 || s >= FRAC_PI_2 {
            return Ok(crate::symplectic::LagrangianFrame::horizontal(
                2 * model.block_size(),
            ));
        }
        let (w, _) = prufer_unitaries(model, reach * s.tan(), 0.0)?;
        stereographic_inverse(&w)
    };

    // The window |E| <= reach occupies |s| <= pi/4, half of the circle;
    // doubling the requested resolution keeps the window as finely sampled
    // as a straight-line scan would.
    let points = 2 * grid_points.max(default_grid_points(model)) + 1;
    let mut params: Vec<f64> = (0..points)
        .map(|i| -FRAC_PI_2 + std::f64::consts::PI * i as f64 / (points - 1) as f64)
        .collect();
    let mut frames: Vec<crate::symplectic::LagrangianFrame> = Vec::with_capacity(points);
    let mut projections: Vec<UnitaryMatrix> = Vec::with_capacity(points);
    for &s in &params {
        let f = frame_at(s)?;
        projections.push(stereographic(&f)?);
        frames.push(f);
    }

    loop {
        let mut inserted = false;
        let mut i = 0;
        while i + 1 < params.len() {
            let step = op_norm(&(projections[i + 1].matrix() - projections[i].matrix()));
            let mid = 0.5 * (params[i] + params[i + 1]);
            if step >= LOOP_STEP_TARGET && mid > params[i] && mid < params[i + 1] {
                if params.len() >= LOOP_MAX_SAMPLES {
                    return Err(Error::Invariant(format!(
                        "compactified loop needs more than {LOOP_MAX_SAMPLES} samples: \
                         projection still moves {step:.3} near s = {mid:.6}"
                    )));
                }
                let f = frame_at(mid)?;
                params.insert(i + 1, mid);
                projections.insert(i + 1, stereographic(&f)?);
                frames.insert(i + 1, f);
                inserted = true;
                // Re-examine the left half of the split interval.
            } else {
                i += 1;
            }
        }
        if !inserted {
            break;
        }
    }
    LagrangianPath::new(params, frames)
}

/// Intersection index of the closed compactified loop against the periodic
/// frame at Bloch phase `k`: counts every eigenvalue passage over the whole
/// (compactified) energy line, so it equals `N L` for every `k`.
pub fn total_crossing_index(model: &BlockJacobiModel, k: f64, grid_points: usize) -> Result<i64> {
    let path = compactified_frame_loop(model, grid_points)?;
    intersection_index(&path, &periodic_frame(model.block_size(), k)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::winding_integral;
    use crate::jacobi::{assemble_dense, general_boundary_multiplicity};
    use crate::sampling;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    /// Golden ratio, the closed-form eigenvalue scale of the 5-ring at
    /// Bloch phase pi.
    const GOLDEN: f64 = 1.618033988749894848;

    fn free_chain(n: usize) -> BlockJacobiModel {
        BlockJacobiModel::free_chain(n, 1)
    }

    /// Two-band model: L=2, N=3, T = antidiag(1,1), V = diag(1,-1).
    fn two_band_model() -> BlockJacobiModel {
        let t = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let v = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        BlockJacobiModel::new(vec![v; 3], vec![t; 3]).unwrap()
    }

    fn random_model(rng: &mut sampling::Rng, n: usize, l: usize) -> BlockJacobiModel {
        let potentials: Vec<_> = (0..n).map(|_| sampling::hermitian(rng, l, 1.0)).collect();
        let hoppings: Vec<_> = (0..n).map(|_| sampling::conditioned(rng, l, 0.4, 1.8)).collect();
        BlockJacobiModel::new(potentials, hoppings).unwrap()
    }

    /// Dense-oracle spectrum clustered into (energy, multiplicity) pairs.
    fn oracle_spectrum(
        model: &BlockJacobiModel,
        omega: Complex64,
        window: f64,
    ) -> Vec<(f64, usize)> {
        let evs = assemble_dense(model, omega)
            .unwrap()
            .eigenvalues()
            .unwrap();
        let mut out: Vec<(f64, usize)> = Vec::new();
        for e in evs {
            if let Some((center, m)) = out.last_mut() {
                if (e - *center).abs() <= window {
                    *center = (*center * *m as f64 + e) / (*m as f64 + 1.0);
                    *m += 1;
                    continue;
                }
            }
            out.push((e, 1));
        }
        out
    }

    #[test]
    fn gershgorin_bounds_match_hand_calculations() {
        let (lo, hi) = gershgorin_bounds(&free_chain(4)).unwrap();
        assert!((lo + 2.0).abs() < 1e-14 && (hi - 2.0).abs() < 1e-14);

        // Diagonal shift translates the bounds.
        let v = ComplexMatrix::from_real_rows(&[&[0.7]]).unwrap();
        let t = ComplexMatrix::identity(1);
        let shifted =
            BlockJacobiModel::new(vec![v; 4], vec![t; 4]).unwrap();
        let (lo, hi) = gershgorin_bounds(&shifted).unwrap();
        assert!((lo + 1.3).abs() < 1e-14 && (hi - 2.7).abs() < 1e-14);

        // Bounds contain the dense spectrum of the two-band model.
        let model = two_band_model();
        let (lo, hi) = gershgorin_bounds(&model).unwrap();
        for (e, _) in oracle_spectrum(&model, Complex64::ONE, 1e-8) {
            assert!(lo <= e && e <= hi);
        }
    }

    #[test]
    fn flow_is_monotone_and_counts_the_ring_spectrum() {
        let model = free_chain(5);
        let bc = BoundaryCondition::Periodic { k: PI / 3.0 };
        let flow = scan_flow(&model, &bc, default_grid_points(&model)).unwrap();
        assert_eq!(flow.branch_count(), 2);
        assert!(flow.min_step_increment() > -1e-9);
        assert_eq!(flow.crossing_count(), 5);

        let dirichlet = scan_flow(&free_chain(3), &BoundaryCondition::Dirichlet, 200).unwrap();
        assert_eq!(dirichlet.branch_count(), 1);
        assert!(dirichlet.min_step_increment() > -1e-9);
        assert_eq!(dirichlet.crossing_count(), 3);
    }

    #[test]
    fn coarse_grids_refine_themselves() {
        let model = free_chain(3);
        let flow = scan_flow(&model, &BoundaryCondition::Periodic { k: 0.5 }, 2).unwrap();
        assert!(flow.energies().len() > 2);
        assert_eq!(flow.crossing_count(), 3);
        assert!(flow.min_step_increment() > -1e-9);
    }

    #[test]
    fn ring_spectrum_matches_the_closed_form() {
        let model = free_chain(5);
        let k = PI / 3.0;
        let result =
            find_eigenvalues(&model, &BoundaryCondition::Periodic { k }, 1e-9).unwrap();
        let mut expected: Vec<f64> = (0..5)
            .map(|j| 2.0 * ((TAU * j as f64 + k) / 5.0).cos())
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(result.eigenvalues.len(), 5);
        for (found, want) in result.eigenvalues.iter().zip(&expected) {
            assert!((found.energy - want).abs() < 1e-9, "{} vs {want}", found.energy);
            assert_eq!(found.multiplicity, 1);
        }
        assert!(result.max_phase_residual < 1e-9);

        // Bloch phase pi: degenerate pairs at the golden-ratio energies.
        let result =
            find_eigenvalues(&model, &BoundaryCondition::Periodic { k: PI }, 1e-9).unwrap();
        let want = [(-2.0, 1usize), (1.0 - GOLDEN, 2), (GOLDEN, 2)];
        assert_eq!(result.eigenvalues.len(), 3);
        for (found, (e, m)) in result.eigenvalues.iter().zip(want) {
            assert!((found.energy - e).abs() < 1e-9);
            assert_eq!(found.multiplicity, m);
        }
        assert_eq!(result.total_multiplicity, 5);
    }

    #[test]
    fn dirichlet_chain_matches_the_closed_form() {
        let result =
            find_eigenvalues(&free_chain(3), &BoundaryCondition::Dirichlet, 1e-9).unwrap();
        let expected = [-(2.0f64).sqrt(), 0.0, (2.0f64).sqrt()];
        assert_eq!(result.eigenvalues.len(), 3);
        for (found, want) in result.eigenvalues.iter().zip(expected) {
            assert!((found.energy - want).abs() < 1e-10);
            assert_eq!(found.multiplicity, 1);
        }
    }

    #[test]
    fn random_models_match_the_dense_oracle() {
        let mut rng = sampling::Rng::new(0x0e16);
        for (n, l) in [(3, 1), (4, 2), (5, 1), (3, 2)] {
            let model = random_model(&mut rng, n, l);
            let k = rng.uniform(-PI, PI);
            let cases = [
                (BoundaryCondition::Periodic { k }, Complex64::from_polar(1.0, k)),
                (BoundaryCondition::Dirichlet, Complex64::ZERO),
            ];
            for (bc, omega) in cases {
                let found = find_eigenvalues(&model, &bc, 1e-9).unwrap();
                let oracle = oracle_spectrum(&model, omega, 1e-8);
                assert_eq!(found.eigenvalues.len(), oracle.len());
                for (got, (e, m)) in found.eigenvalues.iter().zip(&oracle) {
                    assert!(
                        (got.energy - e).abs() < 1e-8,
                        "N={n} L={l}: {} vs {e}",
                        got.energy
                    );
                    assert_eq!(got.multiplicity, *m);
                }
                assert_eq!(found.total_multiplicity, n * l);
            }
        }
    }

    #[test]
    fn general_boundary_frames_are_counted_completely() {
        let mut rng = sampling::Rng::new(0x9e);
        let model = random_model(&mut rng, 3, 2);
        let frame = sampling::lagrangian_frame(&mut rng, 4);
        let bc = BoundaryCondition::General {
            frame: frame.clone(),
        };
        let result = find_eigenvalues(&model, &bc, 1e-9).unwrap();
        assert_eq!(result.total_multiplicity, 6);
        for ev in &result.eigenvalues {
            let m = general_boundary_multiplicity(&model, ev.energy, &frame).unwrap();
            assert_eq!(m, ev.multiplicity, "at E = {}", ev.energy);
        }
    }

    #[test]
    fn detection_unitary_reaches_its_asymptote() {
        let model = free_chain(3);
        let k = 0.9;
        let limit = asymptotic_unitary(k, 1);
        let distance = |e: f64| {
            let (_, u) = prufer_unitaries(&model, e, k).unwrap();
            op_norm(&(u.matrix() - limit.matrix()))
        };
        let d4 = distance(1e4);
        let d5 = distance(1e5);
        let ratio = d4 / d5;
        assert!(d4 < 1e-3 && d5 < d4);
        assert!((5.0..15.0).contains(&ratio), "decay ratio {ratio}");
        // Same limit from the far negative side.
        assert!(distance(-1e4) < 1e-3);

        // Eigenphases at the asymptote approach +-pi/2.
        let (_, u) = prufer_unitaries(&model, 1e4, k).unwrap();
        for p in u.eigenphases().unwrap().phases {
            assert!((p.abs() - PI / 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn compactified_loop_counts_every_eigenvalue() {
        for (model, nl) in [
            (free_chain(4), 4i64),
            (two_band_model(), 6),
        ] {
            let path = compactified_frame_loop(&model, 64).unwrap();
            assert!(path.is_closed());
            let w = winding_integral(&path).unwrap();
            assert!((w - nl as f64).abs() < 1e-6, "winding {w} vs {nl}");
            for k in [0.3, PI] {
                assert_eq!(total_crossing_index(&model, k, 64).unwrap(), nl);
            }
        }
        let mut rng = sampling::Rng::new(0x10a);
        let model = random_model(&mut rng, 3, 2);
        assert_eq!(total_crossing_index(&model, 1.2, 64).unwrap(), 6);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut rng = sampling::Rng::new(0x70b);
        let model = random_model(&mut rng, 4, 2);
        let bc = BoundaryCondition::Periodic { k: 0.8 };
        let flow1 = scan_flow_with_jobs(&model, &bc, 96, 1).unwrap();
        let flow3 = scan_flow_with_jobs(&model, &bc, 96, 3).unwrap();
        assert_eq!(flow1.energies(), flow3.energies());
        for i in 0..flow1.energies().len() {
            assert_eq!(flow1.lifted(i), flow3.lifted(i));
        }
        let r1 = find_eigenvalues_with_jobs(&model, &bc, 1e-9, 96, 1).unwrap();
        let r4 = find_eigenvalues_with_jobs(&model, &bc, 1e-9, 96, 4).unwrap();
        assert_eq!(r1.eigenvalues, r4.eigenvalues);
    }

    #[test]
    fn bad_tolerances_and_conditioning_are_refused() {
        let model = free_chain(3);
        let bc = BoundaryCondition::Dirichlet;
        assert!(matches!(
            find_eigenvalues(&model, &bc, 1e-2),
            Err(Error::Invariant(_))
        ));
        assert!(matches!(
            find_eigenvalues(&model, &bc, 1e-13),
            Err(Error::Invariant(_))
        ));

        // Hopping condition number above the scan limit is refused even
        // though the model itself is accepted.
        let t = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 3e-9]]).unwrap();
        let v = ComplexMatrix::zeros(2, 2);
        let model = BlockJacobiModel::new(vec![v; 3], vec![t; 3]).unwrap();
        assert!(matches!(
            scan_flow(&model, &bc, 16),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn scan_rejects_degenerate_grids() {
        let model = free_chain(3);
        assert!(scan_flow(&model, &BoundaryCondition::Dirichlet, 1).is_err());
    }

    #[test]
    fn two_band_spectrum_has_six_states_at_every_bloch_phase() {
        let model = two_band_model();
        for k in [0.0, 0.6] {
            let result =
                find_eigenvalues(&model, &BoundaryCondition::Periodic { k }, 1e-9).unwrap();
            assert_eq!(result.total_multiplicity, 6);
            let oracle = oracle_spectrum(&model, Complex64::from_polar(1.0, k), 1e-8);
            assert_eq!(result.eigenvalues.len(), oracle.len());
            for (got, (e, m)) in result.eigenvalues.iter().zip(&oracle) {
                assert!((got.energy - e).abs() < 1e-9);
                assert_eq!(got.multiplicity, *m);
            }
        }
    }
}
