//! Intersection indices of Lagrangian paths: crossing signatures, the
//! intersection (Bott–Maslov) index, the winding integral, and the
//! Conley–Zehnder index of symplectic paths.
//!
//! A path `gamma` of Lagrangian planes crosses a reference plane `Psi`
//! whenever the relative unitary `U^t = Pi(Psi)* Pi(gamma(t))` has
//! eigenvalue 1. Each transversal crossing carries a signature (phases
//! sweeping counterclockwise count `+`, clockwise `-`), and the index
//! `I(gamma, Psi)` is the signed total. This module computes it as a sum of
//! net turn counts of the continuously lifted eigenphases of `U^t`, which is
//! manifestly additive under concatenation and equals the signature sum for
//! transversally sampled paths:
//!
//! ```text
//! I(gamma, Psi) = sum_j ( turns(theta_j(end)) - turns(theta_j(start)) ).
//! ```
//!
//! Between samples the path is evaluated along unitary geodesics (the
//! sampling-adequacy invariant keeps per-step motion small enough that the
//! interpolant is homotopic to the sampled path with endpoints fixed, so the
//! index is unchanged). Degenerate data — a branch resting on the crossing
//! locus, or a crossing window that cannot be isolated — raises a tangency
//! error rather than guessing.
//!
//! For closed paths the index coincides exactly with the winding number of
//! `det Pi(gamma(t))` and is independent of `Psi`; for open paths the two
//! differ by at most the fiber dimension. The Conley–Zehnder index of a path
//! of Hermitian symplectic matrices is the intersection index of its
//! boundary-data frames against the periodic frame.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::linalg::{op_norm, unitary_eigenphases, UnitaryMatrix};
use crate::symplectic::{
    graph_frame, periodic_frame, stereographic, HermitianSymplecticMatrix, LagrangianFrame,
};
use crate::tracking::{lift_phases, turn_count, Geodesic, PhaseLift};

/// Largest allowed operator-norm step between consecutive sampled
/// projections (sampling adequacy).
pub const MAX_SAMPLE_STEP: f64 = 0.5;

/// Default half-width of the phase window used when classifying crossings.
pub const DEFAULT_CROSSING_WINDOW: f64 = 0.1;

/// Eigenphase motion limit handed to the lift: an operator-norm step of
/// [`MAX_SAMPLE_STEP`] moves phases by at most `2 asin(1/4) ~ 0.5054`.
const MAX_PHASE_MOTION: f64 = 0.55;

/// A branch whose wrapped phase stays within this of zero across a whole
/// segment is treated as resting on the crossing locus.
const ON_CYCLE_TOL: f64 = 1e-9;

/// A sampled path of Lagrangian planes with validated sampling adequacy.
#[derive(Debug, Clone)]
pub struct LagrangianPath {
    params: Vec<f64>,
    frames: Vec<LagrangianFrame>,
    projections: Vec<UnitaryMatrix>,
    closed: bool,
}

impl LagrangianPath {
    /// Validates parameters (ascending, at least two) and sampling adequacy:
    /// consecutive stereographic projections must differ by less than
    /// [`MAX_SAMPLE_STEP`] in operator norm.
    pub fn new(params: Vec<f64>, frames: Vec<LagrangianFrame>) -> Result<Self> {
        if params.len() < 2 || params.len() != frames.len() {
            return Err(Error::Invariant(format!(
                "path needs >= 2 samples with matching parameters, got {} and {}",
                params.len(),
                frames.len()
            )));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant("path parameters must be strictly increasing".into()));
        }
        let half_dim = frames[0].half_dim();
        if frames.iter().any(|f| f.half_dim() != half_dim) {
            return Err(Error::Invariant("path frames have mixed dimensions".into()));
        }
        let projections: Vec<UnitaryMatrix> =
            frames.iter().map(stereographic).collect::<Result<_>>()?;
        for (i, pair) in projections.windows(2).enumerate() {
            let step = op_norm(&(pair[1].matrix() - pair[0].matrix()));
            if step >= MAX_SAMPLE_STEP {
                return Err(Error::Invariant(format!(
                    "sampling too coarse between parameters {} and {}: projection moved {step:.3} \
                     (limit {MAX_SAMPLE_STEP}); insert samples",
                    params[i],
                    params[i + 1]
                )));
            }
        }
        let closed = projections
            .first()
            .unwrap()
            .matrix()
            .max_abs_diff(projections.last().unwrap().matrix())
            < 1e-8;
        Ok(LagrangianPath {
            params,
            frames,
            projections,
            closed,
        })
    }

    /// Builds the path of planes `Pi^{-1}(U_i)` from sampled unitaries.
    pub fn from_unitaries(params: Vec<f64>, unitaries: &[UnitaryMatrix]) -> Result<Self> {
        let frames = unitaries
            .iter()
            .map(crate::symplectic::stereographic_inverse)
            .collect::<Result<Vec<_>>>()?;
        LagrangianPath::new(params, frames)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn frames(&self) -> &[LagrangianFrame] {
        &self.frames
    }

    pub fn projections(&self) -> &[UnitaryMatrix] {
        &self.projections
    }

    pub fn half_dim(&self) -> usize {
        self.frames[0].half_dim()
    }

    /// True when first and last sample describe the same plane.
    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

/// A sampled path of Hermitian symplectic matrices. Sampling adequacy is
/// validated on the boundary-data frames (the graph embedding), which is
/// where the path is consumed by the Conley–Zehnder index.
#[derive(Debug, Clone)]
pub struct SymplecticPath {
    matrices: Vec<HermitianSymplecticMatrix>,
    graph_path: LagrangianPath,
    closed: bool,
}

impl SymplecticPath {
    pub fn new(params: Vec<f64>, matrices: Vec<HermitianSymplecticMatrix>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::Invariant("symplectic path needs samples".into()));
        }
        let frames = matrices.iter().map(graph_frame).collect::<Result<Vec<_>>>()?;
        let graph_path = LagrangianPath::new(params, frames)?;
        let first = matrices.first().unwrap().matrix();
        let last = matrices.last().unwrap().matrix();
        let closed = first.max_abs_diff(last) < 1e-9 * first.max_abs().max(1.0);
        Ok(SymplecticPath {
            matrices,
            graph_path,
            closed,
        })
    }

    pub fn matrices(&self) -> &[HermitianSymplecticMatrix] {
        &self.matrices
    }

    pub fn params(&self) -> &[f64] {
        self.graph_path.params()
    }

    /// The induced path of boundary-data frames in doubled dimension.
    pub fn graph_path(&self) -> &LagrangianPath {
        &self.graph_path
    }

    pub fn half_dim(&self) -> usize {
        self.matrices[0].half_dim()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

/// A located crossing of the reference plane.
#[derive(Debug, Clone, Copy)]
pub struct CrossingRecord {
    /// Path parameter of the crossing.
    pub parameter: f64,
    /// Dimension of the intersection there (kernel of `U - 1`).
    pub stratum: usize,
    /// Signed count of phases sweeping through, in `[-stratum, stratum]`.
    pub signature: i64,
}

/// Signature of a crossing from phase windows just before and just after:
/// `(1/2) (p_+ - n_+ - p_- + n_-)` where `p`/`n` count positive/negative
/// phases in the after/before windows.
///
/// Errors: phases must lie within `[-delta, delta]` (invariant violation
/// otherwise); a phase exactly at zero or at the window edge makes the
/// crossing ambiguous (tangency error — refine and retry); so does an odd
/// numerator, which cannot come from a genuine crossing.
pub fn crossing_signature(phases_before: &[f64], phases_after: &[f64], delta: f64) -> Result<i64> {
    if delta <= 0.0 {
        return Err(Error::Invariant("crossing window must be positive".into()));
    }
    let mut counts = [0i64; 4]; // p_before, n_before, p_after, n_after
    for (list, offset) in [(phases_before, 0usize), (phases_after, 2usize)] {
        for &p in list {
            if p.abs() > delta {
                return Err(Error::Invariant(format!(
                    "phase {p} outside the crossing window +/-{delta}"
                )));
            }
            if p == 0.0 || p.abs() == delta {
                return Err(Error::Tangency(format!(
                    "phase {p} sits exactly on the crossing window boundary"
                )));
            }
            counts[offset + usize::from(p < 0.0)] += 1;
        }
    }
    let numerator = (counts[2] - counts[3]) - (counts[0] - counts[1]);
    if numerator % 2 != 0 {
        return Err(Error::Tangency(
            "odd phase imbalance across the crossing window; not a clean crossing".into(),
        ));
    }
    Ok(numerator / 2)
}

/// Relative unitaries `Pi(Psi)* Pi(gamma(t_i))` along the path.
fn relative_unitaries(path: &LagrangianPath, psi: &LagrangianFrame) -> Result<Vec<UnitaryMatrix>> {
    if psi.half_dim() != path.half_dim() {
        return Err(Error::Invariant(format!(
            "reference plane half-dimension {} does not match path half-dimension {}",
            psi.half_dim(),
            path.half_dim()
        )));
    }
    let v_adj = stereographic(psi)?.matrix().adjoint();
    path.projections()
        .iter()
        .map(|u| UnitaryMatrix::with_tolerance(&v_adj * u.matrix(), 1e-8))
        .collect()
}

/// Errors when some branch rests on the crossing locus across a segment.
fn reject_on_cycle(lift: &PhaseLift, params: &[f64]) -> Result<()> {
    for (i, pair) in lift.states.windows(2).enumerate() {
        for j in 0..pair[0].branch_count() {
            if pair[0].wrapped(j).abs() < ON_CYCLE_TOL && pair[1].wrapped(j).abs() < ON_CYCLE_TOL {
                return Err(Error::Tangency(format!(
                    "path rests on the crossing locus between parameters {} and {}",
                    params[i],
                    params[i + 1]
                )));
            }
        }
    }
    Ok(())
}

/// The intersection index `I(gamma, Psi)`: the signed count of eigenphase
/// passages through 1 of the relative unitary, accumulated per branch as net
/// turn counts of the continuous lift. Additive under concatenation; for
/// closed paths equal to the winding number of the determinant and
/// independent of `Psi`.
pub fn intersection_index(path: &LagrangianPath, psi: &LagrangianFrame) -> Result<i64> {
    let rel = relative_unitaries(path, psi)?;
    let lift = lift_phases(&rel, MAX_PHASE_MOTION)?;
    reject_on_cycle(&lift, path.params())?;
    let first = &lift.states[0];
    let last = lift.states.last().unwrap();
    Ok((0..first.branch_count())
        .map(|j| turn_count(last.branch(j)) - turn_count(first.branch(j)))
        .sum())
}

/// The winding `W(gamma)` of `det Pi(gamma(t))` in full turns: the summed
/// relative eigenphases of consecutive projections, which is the exact
/// determinant winding of the piecewise-geodesic interpolant. Real-valued on
/// open paths; an exact integer (up to roundoff) on closed ones, where it
/// equals the intersection index.
pub fn winding_integral(path: &LagrangianPath) -> Result<f64> {
    let mut total = 0.0;
    for pair in path.projections().windows(2) {
        let rel = &pair[0].matrix().adjoint() * pair[1].matrix();
        total += unitary_eigenphases(&rel)?.phases.iter().sum::<f64>();
    }
    Ok(total / TAU)
}

/// The Conley–Zehnder index of a symplectic path at Bloch phase `k`: the
/// intersection index of its boundary-data frames against the periodic
/// frame. Counts unit-circle eigenvalue passages of the path through
/// `e^{+-ik}` with orientation.
pub fn conley_zehnder_index(path: &SymplecticPath, k: f64) -> Result<i64> {
    let psi = periodic_frame(path.half_dim(), k)?;
    intersection_index(path.graph_path(), &psi)
}

/// One localized branch crossing inside a segment, before clustering.
struct RawCrossing {
    parameter: f64,
    segment: usize,
    t: f64,
    branch: usize,
    direction: i64,
}

/// Locates every crossing of the reference plane and reports parameter,
/// intersection dimension, and signature. Signatures are computed through
/// the phase-window formula and cross-validated against the lift directions;
/// any disagreement or unresolvable window raises an error instead of a
/// silently wrong record.
pub fn crossing_records(
    path: &LagrangianPath,
    psi: &LagrangianFrame,
    delta: f64,
) -> Result<Vec<CrossingRecord>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Invariant(format!(
            "crossing window {delta} out of range (0, 1]"
        )));
    }
    let rel = relative_unitaries(path, psi)?;
    let lift = lift_phases(&rel, MAX_PHASE_MOTION)?;
    reject_on_cycle(&lift, path.params())?;
    let params = path.params();
    let span = params[params.len() - 1] - params[0];

    // Localize every branch crossing by bisection along segment geodesics.
    let mut raw: Vec<RawCrossing> = Vec::new();
    let mut geodesics: Vec<Option<Geodesic>> = vec![None; rel.len() - 1];
    for i in 0..rel.len() - 1 {
        let start = &lift.states[i];
        let end = &lift.states[i + 1];
        for j in 0..start.branch_count() {
            let c0 = turn_count(start.branch(j));
            let c1 = turn_count(end.branch(j));
            if c0 == c1 {
                continue;
            }
            let direction = if c1 > c0 { 1 } else { -1 };
            let target = TAU * c0.max(c1) as f64;
            if geodesics[i].is_none() {
                geodesics[i] = Some(Geodesic::between(&rel[i], &rel[i + 1])?);
            }
            let geo = geodesics[i].as_ref().unwrap();
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (probe, _) = start.advanced(&geo.at(mid)?)?;
                let reached = if direction > 0 {
                    probe.branch(j) >= target
                } else {
                    probe.branch(j) <= target
                };
                if reached {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            raw.push(RawCrossing {
                parameter: params[i] + t * (params[i + 1] - params[i]),
                segment: i,
                t,
                branch: j,
                direction,
            });
        }
    }
    raw.sort_by(|a, b| a.parameter.partial_cmp(&b.parameter).unwrap());

    // Cluster coincident crossings and classify each cluster.
    let window = (1e-9 * span.abs()).max(1e-12);
    let eval_at = |e: f64, geodesics: &mut Vec<Option<Geodesic>>| -> Result<UnitaryMatrix> {
        let e = e.clamp(params[0], params[params.len() - 1]);
        let mut seg = params.len() - 2;
        for i in 0..params.len() - 1 {
            if e <= params[i + 1] {
                seg = i;
                break;
            }
        }
        if geodesics[seg].is_none() {
            geodesics[seg] = Some(Geodesic::between(&rel[seg], &rel[seg + 1])?);
        }
        let t = (e - params[seg]) / (params[seg + 1] - params[seg]);
        geodesics[seg].as_ref().unwrap().at(t)
    };

    let mut records = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let mut j = i + 1;
        while j < raw.len() && raw[j].parameter - raw[j - 1].parameter <= window {
            j += 1;
        }
        let cluster = &raw[i..j];
        let parameter =
            cluster.iter().map(|c| c.parameter).sum::<f64>() / cluster.len() as f64;
        let direction_sum: i64 = cluster.iter().map(|c| c.direction).sum();

        // Intersection dimension at the located parameter.
        let seg = cluster[0].segment;
        if geodesics[seg].is_none() {
            geodesics[seg] = Some(Geodesic::between(&rel[seg], &rel[seg + 1])?);
        }
        let at_crossing = geodesics[seg].as_ref().unwrap().at(cluster[0].t)?;
        let stratum = at_crossing.kernel_dim_at_one(crate::linalg::tol::KERNEL_PHASE)?;

        // Window classification. The probe distance must keep other
        // crossings outside the probed stretch while landing the crossing
        // branches' phases inside the window, so cap it both by the gaps to
        // neighboring crossings and by the window size over the branch slope.
        let gap_left = if i == 0 {
            parameter - params[0]
        } else {
            parameter - raw[i - 1].parameter
        };
        let gap_right = if j == raw.len() {
            params[params.len() - 1] - parameter
        } else {
            raw[j].parameter - parameter
        };
        let max_slope = cluster
            .iter()
            .map(|c| {
                let width = params[c.segment + 1] - params[c.segment];
                let rise = lift.states[c.segment + 1].branch(c.branch)
                    - lift.states[c.segment].branch(c.branch);
                (rise / width).abs()
            })
            .fold(1e-12f64, f64::max);
        let mut h = (0.45 * gap_left.min(gap_right))
            .min(0.4 * delta / max_slope)
            .max(window);
        let mut signature = None;
        for _ in 0..8 {
            let before_u = eval_at(parameter - h, &mut geodesics)?;
            let after_u = eval_at(parameter + h, &mut geodesics)?;
            let collect = |u: &UnitaryMatrix| -> Result<Vec<f64>> {
                Ok(crate::tracking::sorted_phases(u)?
                    .into_iter()
                    .filter(|p| p.abs() <= delta)
                    .collect())
            };
            let before = collect(&before_u)?;
            let after = collect(&after_u)?;
            match crossing_signature(&before, &after, delta) {
                Ok(s) => {
                    signature = Some(s);
                    break;
                }
                Err(Error::Tangency(_)) => {
                    h *= 0.5;
                    if h < window {
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let signature = signature.ok_or_else(|| {
            Error::Tangency(format!(
                "could not isolate the crossing at parameter {parameter}"
            ))
        })?;
        if signature != direction_sum {
            return Err(Error::Invariant(format!(
                "crossing at {parameter}: window signature {signature} disagrees with lifted \
                 directions {direction_sum}"
            )));
        }
        records.push(CrossingRecord {
            parameter,
            stratum,
            signature,
        });
        i = j;
    }
    Ok(records)
}
