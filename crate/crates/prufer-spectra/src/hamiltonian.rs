//! Linear Hamiltonian (canonical) systems on the unit interval.
//!
//! A system of half-dimension `L` couples a state `Phi(x) in C^{2L}` through
//!
//! ```text
//!     J dPhi/dx + V(x) Phi = E P(x) Phi,        x in [0, 1],
//! ```
//!
//! with `V(x)` Hermitian and `P(x)` Hermitian positive semidefinite. The
//! fundamental solution `T^E(x)` solves the matrix form
//!
//! ```text
//!     dT/dx = -J (E P(x) - V(x)) T,        T^E(0) = 1,
//! ```
//!
//! and is symplectic for every `x`. The sign is fixed so that eigenphases of
//! the boundary detection unitaries rotate counterclockwise in `E`:
//! differentiating the symplectic pairing gives
//!
//! ```text
//!     T^E(1)* J  dT^E(1)/dE  =  integral_0^1 T* P T dx  >=  0,
//! ```
//!
//! the positive-semidefinite matrix returned by
//! [`energy_monotonicity_matrix`]. Eigenvalue counting then reduces to the
//! same monotone phase-crossing sweep as for block Jacobi chains.
//!
//! Block Sturm-Liouville operators `h = -d/dx (p d/dx + q) + q* d/dx + v`
//! reduce to this form with state `Phi = (phi, p phi' + q phi)`, weight
//! `P = diag(1, 0)` and potential
//!
//! ```text
//!     V = [[v - q* p^{-1} q,   q* p^{-1}],
//!          [p^{-1} q,          -p^{-1}  ]].
//! ```
//!
//! Boundary conditions close the problem either separately (a Lagrangian
//! plane at each endpoint, e.g. Dirichlet `phi(0) = phi(1) = 0`) or jointly:
//! the boundary data map [`boundary_data_map`] reorders `(Phi(1), Phi(0))`
//! into a symplectic vector of half-dimension `2L`, the graph of `T^E(1)`
//! becomes a Lagrangian frame there, and Bloch or fully coupled conditions
//! are intersections with a reference plane, exactly as on the lattice.
//!
//! Coefficients are supplied as matrix samples at nodes of `[0, 1]` and
//! interpolated linearly; both Hermiticity and positive semidefiniteness
//! survive linear interpolation, so validating the nodes validates the whole
//! profile.

use crate::error::{Error, Result};
use crate::linalg::matrix::{c64, ComplexMatrix};
use crate::linalg::svd::op_norm;
use crate::linalg::{HermitianMatrix, UnitaryMatrix};
use crate::symplectic::{
    intersection_dimension, periodic_frame, relative_unitary, stereographic, symplectic_form,
    LagrangianFrame,
};

pub use crate::eigensolver::Eigenvalue;
use crate::eigensolver::{locate_spectrum, scan_states};
use crate::indices::LagrangianPath;

/// Minimum admissible integration step count.
pub const MIN_STEPS: usize = 16;
/// Step count used by the one-shot operations (multiplicity queries,
/// monotonicity matrix, spatial paths) before step-doubling acceptance.
pub const DEFAULT_STEPS: usize = 2048;
/// Maximum number of step doublings before integration is declared failed.
const MAX_STEP_DOUBLINGS: usize = 12;
/// Accept an integration when doubling the step count moves the endpoint by
/// at most this, relative to `max(1, |T(1)|)`.
const RICHARDSON_TOL: f64 = 1e-9;
/// Accumulated symplectic-defect budget for an accepted integration.
const DRIFT_BUDGET: f64 = 1e-8;
/// At most this many intervals of the trajectory are stored.
const STORED_INTERVAL_CAP: usize = 4096;
/// Admissible Hermiticity / positivity slack for coefficient samples.
const COEFF_TOL: f64 = 1e-10;

/// Checks a coefficient sample and returns its exactly-Hermitian part.
fn checked_coefficient(label: &str, index: usize, m: &ComplexMatrix, dim: usize) -> Result<ComplexMatrix> {
    if m.rows() != dim || m.cols() != dim {
        return Err(Error::Invariant(format!(
            "{label} sample {index} is {}x{}, expected {dim}x{dim}",
            m.rows(),
            m.cols()
        )));
    }
    let dev = m.max_abs_diff(&m.adjoint());
    let scale = m.max_abs().max(1.0);
    if dev > COEFF_TOL * scale {
        return Err(Error::Invariant(format!(
            "{label} sample {index} is not Hermitian: |M - M*| = {dev:e}"
        )));
    }
    Ok(HermitianMatrix::symmetrized(m)?.matrix().clone())
}

fn checked_nodes(nodes: &[f64], count: usize) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::Invariant("coefficients need at least 2 nodes".into()));
    }
    if nodes.len() != count {
        return Err(Error::Invariant(format!(
            "{} nodes but {count} coefficient samples",
            nodes.len()
        )));
    }
    if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
        return Err(Error::Invariant(format!(
            "coefficient nodes must span [0, 1], got [{}, {}]",
            nodes[0],
            nodes.last().unwrap()
        )));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invariant("coefficient nodes must be strictly increasing".into()));
    }
    Ok(())
}

/// Linear interpolation over node samples; `x` is clamped to `[0, 1]`.
fn interpolate(nodes: &[f64], samples: &[ComplexMatrix], x: f64) -> ComplexMatrix {
    let x = x.clamp(0.0, 1.0);
    let seg = nodes.partition_point(|&n| n <= x).clamp(1, nodes.len() - 1);
    let (x0, x1) = (nodes[seg - 1], nodes[seg]);
    let t = (x - x0) / (x1 - x0);
    &samples[seg - 1].scale(c64(1.0 - t, 0.0)) + &samples[seg].scale(c64(t, 0.0))
}

/// A canonical system `J dPhi/dx + V(x) Phi = E P(x) Phi` with
/// piecewise-linear coefficients.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    half_dim: usize,
    nodes: Vec<f64>,
    potentials: Vec<ComplexMatrix>,
    weights: Vec<ComplexMatrix>,
}

impl HamiltonianSystem {
    /// Validates and stores coefficient samples: `potentials[i]` and
    /// `weights[i]` are `V` and `P` at `nodes[i]`; nodes must ascend strictly
    /// from `0` to `1`, every sample must be Hermitian `2L x 2L`, and every
    /// weight must be positive semidefinite.
    pub fn new(
        half_dim: usize,
        nodes: Vec<f64>,
        potentials: Vec<ComplexMatrix>,
        weights: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        if half_dim == 0 {
            return Err(Error::Invariant("half-dimension must be at least 1".into()));
        }
        checked_nodes(&nodes, potentials.len())?;
        if weights.len() != potentials.len() {
            return Err(Error::Invariant(format!(
                "{} potential samples but {} weight samples",
                potentials.len(),
                weights.len()
            )));
        }
        let dim = 2 * half_dim;
        let potentials = potentials
            .iter()
            .enumerate()
            .map(|(i, m)| checked_coefficient("potential", i, m, dim))
            .collect::<Result<Vec<_>>>()?;
        let weights = weights
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let w = checked_coefficient("weight", i, m, dim)?;
                let lo = HermitianMatrix::new(w.clone())?.min_eigenvalue()?;
                if lo < -COEFF_TOL * w.max_abs().max(1.0) {
                    return Err(Error::Invariant(format!(
                        "weight sample {i} has negative eigenvalue {lo:e}"
                    )));
                }
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HamiltonianSystem {
            half_dim,
            nodes,
            potentials,
            weights,
        })
    }

    /// Constant coefficients `V`, `P` on the whole interval.
    pub fn constant(half_dim: usize, potential: ComplexMatrix, weight: ComplexMatrix) -> Result<Self> {
        HamiltonianSystem::new(
            half_dim,
            vec![0.0, 1.0],
            vec![potential.clone(), potential],
            vec![weight.clone(), weight],
        )
    }

    /// The free Dirac-type system: `V = 0`, `P = 1`.
    pub fn free_dirac(half_dim: usize) -> Self {
        HamiltonianSystem::constant(
            half_dim,
            ComplexMatrix::zeros(2 * half_dim, 2 * half_dim),
            ComplexMatrix::identity(2 * half_dim),
        )
        .expect("constant free coefficients are always admissible")
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// State dimension `2L`.
    pub fn state_dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `V(x)` by linear interpolation of the node samples.
    pub fn potential_at(&self, x: f64) -> ComplexMatrix {
        interpolate(&self.nodes, &self.potentials, x)
    }

    /// `P(x)` by linear interpolation of the node samples.
    pub fn weight_at(&self, x: f64) -> ComplexMatrix {
        interpolate(&self.nodes, &self.weights, x)
    }

    /// Coefficient of the first-order system: `A(x) = J (V(x) - E P(x))`,
    /// so that `dT/dx = A(x) T`.
    fn flow_coefficient(&self, energy: f64, x: f64, j: &ComplexMatrix) -> ComplexMatrix {
        let m = &self.potential_at(x) - &self.weight_at(x).scale(c64(energy, 0.0));
        j * &m
    }
}

/// A block Sturm-Liouville operator `h = -d/dx (p d/dx + q) + q* d/dx + v`
/// with piecewise-linear `L x L` coefficients: `p` Hermitian uniformly
/// positive, `v` Hermitian, `q` arbitrary.
#[derive(Debug, Clone)]
pub struct SturmLiouvilleModel {
    half_dim: usize,
    nodes: Vec<f64>,
    p: Vec<ComplexMatrix>,
    q: Vec<ComplexMatrix>,
    v: Vec<ComplexMatrix>,
}

impl SturmLiouvilleModel {
    pub fn new(
        half_dim: usize,
        nodes: Vec<f64>,
        p: Vec<ComplexMatrix>,
        q: Vec<ComplexMatrix>,
        v: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        if half_dim == 0 {
            return Err(Error::Invariant("half-dimension must be at least 1".into()));
        }
        checked_nodes(&nodes, p.len())?;
        if q.len() != p.len() || v.len() != p.len() {
            return Err(Error::Invariant(format!(
                "coefficient sample counts differ: p {}, q {}, v {}",
                p.len(),
                q.len(),
                v.len()
            )));
        }
        let p = p
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let m = checked_coefficient("leading coefficient", i, m, half_dim)?;
                let lo = HermitianMatrix::new(m.clone())?.min_eigenvalue()?;
                if lo <= 1e-10 * m.max_abs().max(1.0) {
                    return Err(Error::Invariant(format!(
                        "leading coefficient sample {i} is not uniformly positive \
                         (smallest eigenvalue {lo:e})"
                    )));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        let v = v
            .iter()
            .enumerate()
            .map(|(i, m)| checked_coefficient("potential", i, m, half_dim))
            .collect::<Result<Vec<_>>>()?;
        for (i, m) in q.iter().enumerate() {
            if m.rows() != half_dim || m.cols() != half_dim {
                return Err(Error::Invariant(format!(
                    "mixed coefficient sample {i} is {}x{}, expected {half_dim}x{half_dim}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(SturmLiouvilleModel {
            half_dim,
            nodes,
            p,
            q,
            v,
        })
    }

    /// Constant coefficients on the whole interval.
    pub fn constant(half_dim: usize, p: ComplexMatrix, q: ComplexMatrix, v: ComplexMatrix) -> Result<Self> {
        SturmLiouvilleModel::new(
            half_dim,
            vec![0.0, 1.0],
            vec![p.clone(), p],
            vec![q.clone(), q],
            vec![v.clone(), v],
        )
    }

    /// The free string: `p = 1`, `q = 0`, `v = 0`, i.e. `h = -d^2/dx^2`.
    pub fn free(half_dim: usize) -> Self {
        SturmLiouvilleModel::constant(
            half_dim,
            ComplexMatrix::identity(half_dim),
            ComplexMatrix::zeros(half_dim, half_dim),
            ComplexMatrix::zeros(half_dim, half_dim),
        )
        .expect("constant free coefficients are always admissible")
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// Reduction to first-order canonical form with state
    /// `Phi = (phi, p phi' + q phi)`: weight `P = diag(1, 0)` and potential
    /// `V = [[v - q* p^{-1} q, q* p^{-1}], [p^{-1} q, -p^{-1}]]`, evaluated
    /// at the model's own nodes and interpolated linearly in between.
    pub fn to_hamiltonian(&self) -> Result<HamiltonianSystem> {
        let l = self.half_dim;
        let mut weight = ComplexMatrix::zeros(2 * l, 2 * l);
        weight.set_block(0, 0, &ComplexMatrix::identity(l));
        let mut potentials = Vec::with_capacity(self.nodes.len());
        for i in 0..self.nodes.len() {
            let p_inv = self.p[i].inverse()?;
            let q = &self.q[i];
            let q_adj = q.adjoint();
            let mut v = ComplexMatrix::zeros(2 * l, 2 * l);
            v.set_block(0, 0, &(&self.v[i] - &(&q_adj * &(&p_inv * q))));
            v.set_block(0, l, &(&q_adj * &p_inv));
            v.set_block(l, 0, &(&p_inv * q));
            v.set_block(l, l, &p_inv.scale(c64(-1.0, 0.0)));
            potentials.push(v);
        }
        HamiltonianSystem::new(
            l,
            self.nodes.clone(),
            potentials,
            vec![weight; self.nodes.len()],
        )
    }
}

/// The fundamental solution `T^E(x)` of one system at one energy, stored on
/// the accepted integration grid (decimated to at most
/// [`STORED_INTERVAL_CAP`] intervals; the endpoint is always exact).
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    energy: f64,
    steps: usize,
    stride: usize,
    samples: Vec<ComplexMatrix>,
    max_local_drift: f64,
    total_drift: f64,
}

impl FundamentalSolution {
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Accepted integration step count (a power of two, at least 16).
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of stored samples, endpoint included.
    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Position of stored sample `i`.
    pub fn x_at(&self, i: usize) -> f64 {
        (i * self.stride) as f64 / self.steps as f64
    }

    /// `T^E` at stored sample `i`.
    pub fn sample(&self, i: usize) -> &ComplexMatrix {
        &self.samples[i]
    }

    /// `T^E(1)`.
    pub fn endpoint(&self) -> &ComplexMatrix {
        self.samples.last().unwrap()
    }

    /// Largest per-step symplectic defect seen before re-projection.
    pub fn max_local_drift(&self) -> f64 {
        self.max_local_drift
    }

    /// Accumulated symplectic defect estimate of the raw integrator.
    pub fn total_drift(&self) -> f64 {
        self.total_drift
    }

    /// `|T(1)* J T(1) - J|` of the stored (re-projected) endpoint.
    pub fn endpoint_symplectic_defect(&self, half_dim: usize) -> f64 {
        let j = symplectic_form(half_dim);
        let t = self.endpoint();
        (&(&t.adjoint() * &j) * t).max_abs_diff(&j)
    }
}

/// One fixed-step RK4 pass with per-step symplectic re-projection.
fn integrate(sys: &HamiltonianSystem, energy: f64, steps: usize) -> Result<FundamentalSolution> {
    let dim = sys.state_dim();
    let j = symplectic_form(sys.half_dim());
    let h = 1.0 / steps as f64;
    let stride = (steps / STORED_INTERVAL_CAP).max(1);
    let mut t = ComplexMatrix::identity(dim);
    let mut samples = Vec::with_capacity(steps / stride + 1);
    samples.push(t.clone());
    let mut max_local_drift = 0.0f64;
    let mut total_drift = 0.0f64;
    for i in 0..steps {
        let x0 = i as f64 * h;
        let a0 = sys.flow_coefficient(energy, x0, &j);
        let am = sys.flow_coefficient(energy, x0 + 0.5 * h, &j);
        let a1 = sys.flow_coefficient(energy, x0 + h, &j);
        let k1 = &a0 * &t;
        let k2 = &am * &(&t + &k1.scale(c64(0.5 * h, 0.0)));
        let k3 = &am * &(&t + &k2.scale(c64(0.5 * h, 0.0)));
        let k4 = &a1 * &(&t + &k3.scale(c64(h, 0.0)));
        let incr = &(&(&k1 + &k4) + &(&k2 + &k3).scale(c64(2.0, 0.0))).scale(c64(h / 6.0, 0.0));
        t = &t + incr;

        // Newton correction back onto the symplectic group: with
        // S = T* J T, the update T <- T (1 + J (S - J) / 2) removes the
        // defect to second order. S - J is anti-Hermitian, so the corrected
        // defect is O(|S - J|^2).
        let defect = &(&(&t.adjoint() * &j) * &t) - &j;
        let drift = defect.max_abs();
        max_local_drift = max_local_drift.max(drift);
        total_drift += drift;
        if drift > 1e-15 * t.max_abs().max(1.0) {
            let correction = &ComplexMatrix::identity(dim) + &(&j * &defect).scale(c64(0.5, 0.0));
            t = &t * &correction;
        }
        if (i + 1) % stride == 0 {
            samples.push(t.clone());
        }
    }
    Ok(FundamentalSolution {
        energy,
        steps,
        stride,
        samples,
        max_local_drift,
        total_drift,
    })
}

/// Integrates the fundamental solution `dT/dx = -J (E P - V) T`, `T(0) = 1`,
/// by fixed-step RK4 with per-step symplectic re-projection. The requested
/// step count (rounded up to a power of two, at least [`MIN_STEPS`]) is
/// doubled until the endpoint moves by at most `1e-9` under a further
/// doubling and the accumulated symplectic defect fits the `1e-8` budget;
/// if that never happens the integration fails.
pub fn fundamental_solution(
    sys: &HamiltonianSystem,
    energy: f64,
    steps: usize,
) -> Result<FundamentalSolution> {
    fundamental_solution_to_accuracy(sys, energy, steps, RICHARDSON_TOL)
}

/// [`fundamental_solution`] with an explicit endpoint acceptance tolerance
/// (clamped to `[1e-12, 1e-5]`); coarse spectral sweeps need far less
/// integration accuracy than their bisection window.
pub fn fundamental_solution_to_accuracy(
    sys: &HamiltonianSystem,
    energy: f64,
    steps: usize,
    accept_tol: f64,
) -> Result<FundamentalSolution> {
    if !energy.is_finite() {
        return Err(Error::Invariant(format!("energy {energy} is not finite")));
    }
    let accept_tol = accept_tol.clamp(1e-12, 1e-5);
    let mut steps = steps.max(MIN_STEPS).next_power_of_two();
    let mut prev = integrate(sys, energy, steps)?;
    for _ in 0..MAX_STEP_DOUBLINGS {
        let cur = integrate(sys, energy, 2 * steps)?;
        let diff = cur.endpoint().max_abs_diff(prev.endpoint());
        let scale = cur.endpoint().max_abs().max(1.0);
        if diff <= accept_tol * scale && cur.total_drift <= DRIFT_BUDGET * scale {
            return Ok(cur);
        }
        steps *= 2;
        prev = cur;
    }
    Err(Error::Integration(format!(
        "step doubling exhausted at {steps} steps for E = {energy}: the \
         endpoint still moves more than {accept_tol:e} per refinement"
    )))
}

/// How the two endpoints of the interval are tied together.
#[derive(Debug, Clone)]
pub enum ContinuumBoundary {
    /// `phi`-component vanishes at both ends (for Sturm-Liouville systems:
    /// `phi(0) = phi(1) = 0`); the vertical plane at each endpoint.
    Dirichlet,
    /// Separated conditions: the solution starts on `start` at `x = 0` and
    /// must meet `end` at `x = 1` (frames of half-dimension `L`).
    Separated {
        start: LagrangianFrame,
        end: LagrangianFrame,
    },
    /// Bloch closure `Phi(1) = e^{ik} Phi(0)`.
    Periodic { k: f64 },
    /// Fully coupled conditions: the reordered boundary data
    /// `Q (Phi(1), Phi(0))` must lie on `frame` (half-dimension `2L`).
    General { frame: LagrangianFrame },
}

/// The boundary data map `Q`: reorders the stacked endpoint data
/// `(Phi_1(1), Phi_2(1), Phi_1(0), Phi_2(0))` into
/// `(Phi_2(0), Phi_1(1), Phi_1(0), Phi_2(1))` (blocks of size `L`). It
/// satisfies `Q* J_{2L} Q = diag(J_L, -J_L)`, so the graph of any symplectic
/// endpoint matrix becomes a Lagrangian frame of half-dimension `2L`, and
/// the Bloch condition becomes the standard quasi-periodic reference plane.
pub fn boundary_data_map(half_dim: usize) -> ComplexMatrix {
    let l = half_dim;
    let mut q = ComplexMatrix::zeros(4 * l, 4 * l);
    let sources = [3usize, 0, 2, 1];
    for (dst, &src) in sources.iter().enumerate() {
        q.set_block(dst * l, src * l, &ComplexMatrix::identity(l));
    }
    q
}

/// The start frame transported to `x = 1`: `[T^E(1) start]`.
fn transported_frame(fs: &FundamentalSolution, start: &LagrangianFrame) -> Result<LagrangianFrame> {
    LagrangianFrame::new(fs.endpoint() * start.matrix())?.canonicalized()
}

/// The graph of `T^E(1)` as a Lagrangian frame of half-dimension `2L`, in
/// the boundary data ordering.
fn coupled_frame(fs: &FundamentalSolution, half_dim: usize) -> Result<LagrangianFrame> {
    let stacked = ComplexMatrix::vstack(&[fs.endpoint(), &ComplexMatrix::identity(2 * half_dim)]);
    LagrangianFrame::new(&boundary_data_map(half_dim) * &stacked)?.canonicalized()
}

/// The (reference, moving) frame pair whose intersection dimension is the
/// eigenvalue multiplicity at this solution's energy.
fn boundary_frames(
    sys: &HamiltonianSystem,
    bc: &ContinuumBoundary,
    fs: &FundamentalSolution,
) -> Result<(LagrangianFrame, LagrangianFrame)> {
    let l = sys.half_dim();
    match bc {
        ContinuumBoundary::Dirichlet => Ok((
            LagrangianFrame::vertical(l),
            transported_frame(fs, &LagrangianFrame::vertical(l))?,
        )),
        ContinuumBoundary::Separated { start, end } => {
            if start.half_dim() != l || end.half_dim() != l {
                return Err(Error::Invariant(format!(
                    "separated boundary frames have half-dimensions {} and {}, expected {l}",
                    start.half_dim(),
                    end.half_dim()
                )));
            }
            Ok((end.clone(), transported_frame(fs, start)?))
        }
        ContinuumBoundary::Periodic { k } => Ok((periodic_frame(l, *k)?, coupled_frame(fs, l)?)),
        ContinuumBoundary::General { frame } => {
            if frame.half_dim() != 2 * l {
                return Err(Error::Invariant(format!(
                    "coupled boundary frame has half-dimension {}, expected {}",
                    frame.half_dim(),
                    2 * l
                )));
            }
            Ok((frame.clone(), coupled_frame(fs, l)?))
        }
    }
}

/// Geometric eigenvalue multiplicity of the closed problem at `energy`:
/// the intersection dimension of the transported boundary plane with the
/// reference plane of the condition.
pub fn eigenvalue_multiplicity(
    sys: &HamiltonianSystem,
    energy: f64,
    bc: &ContinuumBoundary,
) -> Result<usize> {
    let fs = fundamental_solution(sys, energy, DEFAULT_STEPS)?;
    let (reference, moving) = boundary_frames(sys, bc, &fs)?;
    intersection_dimension(&reference, &moving)
}

/// The detection unitary `Pi(reference)* Pi(moving)` of the closed problem:
/// its multiplicity of eigenvalue `1` is the eigenvalue multiplicity, and
/// its eigenphases rotate counterclockwise in `energy`.
pub fn detection_unitary(
    sys: &HamiltonianSystem,
    bc: &ContinuumBoundary,
    energy: f64,
    base_steps: usize,
) -> Result<UnitaryMatrix> {
    let fs = fundamental_solution(sys, energy, base_steps)?;
    let (reference, moving) = boundary_frames(sys, bc, &fs)?;
    relative_unitary(&reference, &moving)
}

/// Locates every eigenvalue in `[e_lo, e_hi]` by the monotone phase sweep
/// (grid scan, branch-matched lifting, and bisection of each passage
/// through `1`), merging passages within `max(tol, 1e-9 width)`. Unlike the
/// lattice solver there is no completeness total: the spectrum is unbounded
/// above, and the window is the user's choice.
pub fn locate_eigenvalues(
    sys: &HamiltonianSystem,
    bc: &ContinuumBoundary,
    e_lo: f64,
    e_hi: f64,
    grid_points: usize,
    tol: f64,
    base_steps: usize,
) -> Result<Vec<Eigenvalue>> {
    locate_eigenvalues_with_jobs(sys, bc, e_lo, e_hi, grid_points, tol, base_steps, 1)
}

/// [`locate_eigenvalues`] with an explicit worker thread count.
#[allow(clippy::too_many_arguments)]
pub fn locate_eigenvalues_with_jobs(
    sys: &HamiltonianSystem,
    bc: &ContinuumBoundary,
    e_lo: f64,
    e_hi: f64,
    grid_points: usize,
    tol: f64,
    base_steps: usize,
    jobs: usize,
) -> Result<Vec<Eigenvalue>> {
    // Integration only needs to resolve the endpoint well inside the
    // bisection window, so the acceptance tolerance tracks `tol`.
    let accept = (0.05 * tol).clamp(1e-9, 1e-5);
    let family = |e: f64| {
        let fs = fundamental_solution_to_accuracy(sys, e, base_steps, accept)?;
        let (reference, moving) = boundary_frames(sys, bc, &fs)?;
        relative_unitary(&reference, &moving)
    };
    let located = locate_spectrum(&family, e_lo, e_hi, grid_points, jobs, tol, None)?;
    Ok(located.eigenvalues)
}

/// The spatial Pruefer flow of one energy: the lifted eigenphases of
/// `Pi(T^E(x) start)` along `x` for the Dirichlet start plane, resolved on
/// at least `samples` points (densified from the stored trajectory until
/// consecutive projections move by less than `0.45` in operator norm).
pub fn space_prufer_path(
    sys: &HamiltonianSystem,
    energy: f64,
    samples: usize,
) -> Result<LagrangianPath> {
    if samples < 2 {
        return Err(Error::Invariant("a spatial path needs at least 2 samples".into()));
    }
    let fs = fundamental_solution(sys, energy, DEFAULT_STEPS)?;
    let start = LagrangianFrame::vertical(sys.half_dim());
    let stored = fs.sample_count();
    let mut frames: Vec<Option<(LagrangianFrame, UnitaryMatrix)>> = vec![None; stored];
    let mut count = samples.clamp(2, stored);
    loop {
        let idx: Vec<usize> = (0..count)
            .map(|i| i * (stored - 1) / (count - 1))
            .collect();
        for &i in &idx {
            if frames[i].is_none() {
                let f = LagrangianFrame::new(fs.sample(i) * start.matrix())?.canonicalized()?;
                let u = stereographic(&f)?;
                frames[i] = Some((f, u));
            }
        }
        let adequate = idx.windows(2).all(|w| {
            let a = &frames[w[0]].as_ref().unwrap().1;
            let b = &frames[w[1]].as_ref().unwrap().1;
            op_norm(&(b.matrix() - a.matrix())) < 0.45
        });
        if adequate {
            let params = idx.iter().map(|&i| fs.x_at(i)).collect();
            let chosen = idx
                .iter()
                .map(|&i| frames[i].as_ref().unwrap().0.clone())
                .collect();
            return LagrangianPath::new(params, chosen);
        }
        if count == stored {
            return Err(Error::Invariant(format!(
                "the stored trajectory cannot resolve the phase motion at \
                 E = {energy}: raise the integration step count"
            )));
        }
        count = (count * 2).min(stored);
    }
}

/// The positive-semidefinite matrix `T^E(1)* J dT^E(1)/dE` governing how
/// fast the boundary phases rotate with energy, computed as the quadrature
/// `integral_0^1 T* P T dx` over the stored trajectory (composite Simpson).
pub fn energy_monotonicity_matrix(sys: &HamiltonianSystem, energy: f64) -> Result<HermitianMatrix> {
    let fs = fundamental_solution(sys, energy, DEFAULT_STEPS)?;
    let intervals = fs.sample_count() - 1;
    let h = 1.0 / intervals as f64;
    let dim = sys.state_dim();
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for i in 0..=intervals {
        let weight = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let t = fs.sample(i);
        let term = &(&t.adjoint() * &sys.weight_at(fs.x_at(i))) * t;
        sum = &sum + &term.scale(c64(weight * h / 3.0, 0.0));
    }
    HermitianMatrix::symmetrized(&sum)
}

/// The lifted phase flow of the detection unitary over an energy grid,
/// exposing the same diagnostics as the lattice flow scan.
pub fn scan_detection_phases(
    sys: &HamiltonianSystem,
    bc: &ContinuumBoundary,
    e_lo: f64,
    e_hi: f64,
    grid_points: usize,
    base_steps: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let family = |e: f64| detection_unitary(sys, bc, e, base_steps);
    let scan = scan_states(&family, e_lo, e_hi, grid_points, 1)?;
    let lifted = scan
        .lift
        .states
        .iter()
        .map(|s| s.lifted().to_vec())
        .collect();
    Ok((scan.energies, lifted))
}
