//! Hermitian symplectic geometry of Lagrangian planes.
//!
//! Fixes the symplectic form `J = [[0, -1], [1, 0]]` (in `l x l` blocks) on
//! `C^{2l}` and provides:
//!
//! * [`LagrangianFrame`] — a `2l x l` frame of a maximally isotropic plane;
//! * [`stereographic`] / [`stereographic_inverse`] — the diffeomorphism
//!   between the Lagrangian Grassmannian and the unitary group,
//!   `Pi(a; b) = (a - ib)(a + ib)^{-1}`;
//! * [`HermitianSymplecticMatrix`] — invertibles with `T* J T = J`, acting on
//!   planes; [`cayley_conjugate`] maps them to [`LorentzMatrix`] (the group
//!   `U(l, l)`) whose [`moebius`] action on unitaries realizes the plane
//!   action through `Pi`;
//! * [`checkerboard_sum`] / [`checkerboard_frame_sum`] — the interleaved
//!   direct sum under which `J (+) J` is again the standard form in doubled
//!   dimension;
//! * [`periodic_frame`], [`graph_frame`], [`embed_unitary`],
//!   [`eigenvalue_detector`] — the boundary-condition frames and the unitary
//!   whose eigenvalue-1 multiplicity detects `e^{ik}` in the spectrum of a
//!   symplectic matrix;
//! * [`intersection_dimension`] — dimension of the intersection of two
//!   planes, computed by three independent routes that must agree.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, singular_values, ComplexMatrix, UnitaryMatrix};
use crate::linalg::{tol, unitary_eigenphases};

/// The standard symplectic form `J = [[0, -1_l], [1_l, 0]]` on `C^{2l}`.
pub fn symplectic_form(half_dim: usize) -> ComplexMatrix {
    let l = half_dim;
    ComplexMatrix::from_fn(2 * l, 2 * l, |i, j| {
        if i < l && j == i + l {
            c64(-1.0, 0.0)
        } else if i >= l && j == i - l {
            c64(1.0, 0.0)
        } else {
            Complex64::ZERO
        }
    })
}

/// A frame (basis matrix) of a Lagrangian plane: `2l x l`, full rank, with
/// `Phi* J Phi = 0`.
#[derive(Debug, Clone)]
pub struct LagrangianFrame {
    m: ComplexMatrix,
    half_dim: usize,
}

impl LagrangianFrame {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.rows() == 0 || m.rows() != 2 * m.cols() {
            return Err(Error::Invariant(format!(
                "Lagrangian frame must be 2l x l, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let half_dim = m.cols();
        let j = symplectic_form(half_dim);
        let iso = &(&m.adjoint() * &j) * &m;
        let scale = m.fro_norm().powi(2).max(f64::MIN_POSITIVE);
        if iso.max_abs() > tol::LAGRANGIAN * scale {
            return Err(Error::Invariant(format!(
                "frame is not Lagrangian: |Phi* J Phi| = {:e} at scale {:e}",
                iso.max_abs(),
                scale
            )));
        }
        // Full rank is required for the frame to span an l-plane.
        m.orthonormalized_columns()
            .map_err(|_| Error::Invariant("Lagrangian frame is rank-deficient".into()))?;
        Ok(LagrangianFrame { m, half_dim })
    }

    /// The plane spanned by the first `l` coordinate axes, frame `(1; 0)`.
    /// Seeds Dirichlet propagation (zero boundary value on the left).
    pub fn horizontal(half_dim: usize) -> Self {
        let mut m = ComplexMatrix::zeros(2 * half_dim, half_dim);
        m.set_block(0, 0, &ComplexMatrix::identity(half_dim));
        LagrangianFrame { m, half_dim }
    }

    /// The plane spanned by the last `l` coordinate axes, frame `(0; 1)`.
    /// The Dirichlet target plane (zero boundary value on the right).
    pub fn vertical(half_dim: usize) -> Self {
        let mut m = ComplexMatrix::zeros(2 * half_dim, half_dim);
        m.set_block(half_dim, 0, &ComplexMatrix::identity(half_dim));
        LagrangianFrame { m, half_dim }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// Top half `a` of the frame `(a; b)`.
    pub fn upper(&self) -> ComplexMatrix {
        self.m.block(0, 0, self.half_dim, self.half_dim)
    }

    /// Bottom half `b` of the frame `(a; b)`.
    pub fn lower(&self) -> ComplexMatrix {
        self.m.block(self.half_dim, 0, self.half_dim, self.half_dim)
    }

    /// Same plane with orthonormal frame columns. Propagation loops call this
    /// after every step to keep frames well conditioned.
    pub fn canonicalized(&self) -> Result<Self> {
        Ok(LagrangianFrame {
            m: self.m.orthonormalized_columns()?,
            half_dim: self.half_dim,
        })
    }
}

/// An invertible matrix with `T* J T = J` (Hermitian symplectic).
#[derive(Debug, Clone)]
pub struct HermitianSymplecticMatrix {
    m: ComplexMatrix,
    half_dim: usize,
}

impl HermitianSymplecticMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() || m.rows() % 2 != 0 || m.rows() == 0 {
            return Err(Error::Invariant(
                "Hermitian symplectic matrix must be square of even dimension".into(),
            ));
        }
        let half_dim = m.rows() / 2;
        let j = symplectic_form(half_dim);
        let dev = (&(&m.adjoint() * &j) * &m).max_abs_diff(&j);
        let scale = (m.max_abs().powi(2)).max(1.0);
        if dev > tol::SYMPLECTIC * scale {
            return Err(Error::Invariant(format!(
                "matrix is not Hermitian symplectic: |T* J T - J| = {dev:e} at scale {scale:e}"
            )));
        }
        Ok(HermitianSymplecticMatrix { m, half_dim })
    }

    pub fn identity(half_dim: usize) -> Self {
        HermitianSymplecticMatrix {
            m: ComplexMatrix::identity(2 * half_dim),
            half_dim,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// Block of the `l x l` partition: `(0,0) = A`, `(0,1) = B`, etc.
    pub fn part(&self, bi: usize, bj: usize) -> ComplexMatrix {
        let l = self.half_dim;
        self.m.block(bi * l, bj * l, l, l)
    }

    /// Group product.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.half_dim != rhs.half_dim {
            return Err(Error::Invariant("symplectic product dimension mismatch".into()));
        }
        Ok(HermitianSymplecticMatrix {
            m: &self.m * &rhs.m,
            half_dim: self.half_dim,
        })
    }

    /// Exact inverse `T^{-1} = -J T* J`, which stays in the group to
    /// roundoff (no LU needed).
    pub fn inverse(&self) -> Self {
        let j = symplectic_form(self.half_dim);
        let inv = (&(&j * &self.m.adjoint()) * &j).scale(c64(-1.0, 0.0));
        HermitianSymplecticMatrix {
            m: inv,
            half_dim: self.half_dim,
        }
    }

    /// Image of a Lagrangian plane, optionally re-canonicalized by the caller.
    pub fn apply(&self, frame: &LagrangianFrame) -> Result<LagrangianFrame> {
        if frame.half_dim() != self.half_dim {
            return Err(Error::Invariant("frame/matrix dimension mismatch".into()));
        }
        Ok(LagrangianFrame {
            m: &self.m * frame.matrix(),
            half_dim: self.half_dim,
        })
    }
}

/// A member of `U(l, l)`: blocks satisfy `A*A - C*C = 1`, `D*D - B*B = 1`,
/// `A*B = C*D`, with `A` and `D` invertible. These arise as Cayley
/// conjugates of Hermitian symplectic matrices and act on unitaries by
/// Möbius transformations.
#[derive(Debug, Clone)]
pub struct LorentzMatrix {
    m: ComplexMatrix,
    half_dim: usize,
}

impl LorentzMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() || m.rows() % 2 != 0 || m.rows() == 0 {
            return Err(Error::Invariant("Lorentz matrix must be square of even dimension".into()));
        }
        let l = m.rows() / 2;
        let (a, b) = (m.block(0, 0, l, l), m.block(0, l, l, l));
        let (c, d) = (m.block(l, 0, l, l), m.block(l, l, l, l));
        let scale = (m.max_abs().powi(2)).max(1.0);
        let id = ComplexMatrix::identity(l);
        let r1 = (&(&a.adjoint() * &a) - &(&c.adjoint() * &c)).max_abs_diff(&id);
        let r2 = (&(&d.adjoint() * &d) - &(&b.adjoint() * &b)).max_abs_diff(&id);
        let r3 = (&(&a.adjoint() * &b)).max_abs_diff(&(&c.adjoint() * &d));
        let t = tol::SYMPLECTIC * scale;
        if r1 > t || r2 > t || r3 > t {
            return Err(Error::Invariant(format!(
                "matrix is not in U(l,l): relation residuals {r1:e}, {r2:e}, {r3:e} at scale {scale:e}"
            )));
        }
        // A*A = 1 + C*C and D*D = 1 + B*B force invertibility; verify the
        // numerical margin anyway.
        for (name, blk) in [("A", &a), ("D", &d)] {
            let smin = singular_values(blk).last().copied().unwrap_or(0.0);
            if smin < 1.0 - 1e-6 * scale {
                return Err(Error::Invariant(format!(
                    "U(l,l) block {name} has singular value {smin} below 1"
                )));
            }
        }
        Ok(LorentzMatrix { m, half_dim: l })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn block_a(&self) -> ComplexMatrix {
        self.m.block(0, 0, self.half_dim, self.half_dim)
    }
    pub fn block_b(&self) -> ComplexMatrix {
        self.m.block(0, self.half_dim, self.half_dim, self.half_dim)
    }
    pub fn block_c(&self) -> ComplexMatrix {
        self.m.block(self.half_dim, 0, self.half_dim, self.half_dim)
    }
    pub fn block_d(&self) -> ComplexMatrix {
        self.m.block(self.half_dim, self.half_dim, self.half_dim, self.half_dim)
    }
}

/// The unitary Cayley matrix `(1/sqrt 2) [[1, -i], [1, i]]` in `l x l` blocks.
pub fn cayley_matrix(half_dim: usize) -> ComplexMatrix {
    let l = half_dim;
    let s = 1.0 / 2f64.sqrt();
    ComplexMatrix::from_fn(2 * l, 2 * l, |i, j| {
        if i < l && j < l {
            if i == j { c64(s, 0.0) } else { Complex64::ZERO }
        } else if i < l {
            if i == j - l { c64(0.0, -s) } else { Complex64::ZERO }
        } else if j < l {
            if i - l == j { c64(s, 0.0) } else { Complex64::ZERO }
        } else if i == j {
            c64(0.0, s)
        } else {
            Complex64::ZERO
        }
    })
}

/// Cayley conjugation `C T C*`, an isomorphism from the Hermitian symplectic
/// group onto `U(l, l)`. In blocks of `T = [[A, B], [C, D]]`:
///
/// `C T C* = (1/2) [[(A+D) + i(B-C), (A-D) - i(B+C)], [(A-D) + i(B+C), (A+D) - i(B-C)]]`.
pub fn cayley_conjugate(t: &HermitianSymplecticMatrix) -> Result<LorentzMatrix> {
    let (a, b) = (t.part(0, 0), t.part(0, 1));
    let (c, d) = (t.part(1, 0), t.part(1, 1));
    let p = &a + &d;
    let q = &b - &c;
    let r = &a - &d;
    let s = &b + &c;
    let half = c64(0.5, 0.0);
    let i = c64(0.0, 1.0);
    let tl = (&(&p + &q.scale(i))).scale(half);
    let tr = (&(&r - &s.scale(i))).scale(half);
    let bl = (&(&r + &s.scale(i))).scale(half);
    let br = (&(&p - &q.scale(i))).scale(half);
    let l = t.half_dim();
    let mut out = ComplexMatrix::zeros(2 * l, 2 * l);
    out.set_block(0, 0, &tl);
    out.set_block(0, l, &tr);
    out.set_block(l, 0, &bl);
    out.set_block(l, l, &br);
    LorentzMatrix::new(out)
}

/// Stereographic projection `Pi(a; b) = (a - ib)(a + ib)^{-1}` from Lagrangian
/// planes onto unitaries. Representative-independent; the frame is
/// canonicalized internally before the inversion.
pub fn stereographic(frame: &LagrangianFrame) -> Result<UnitaryMatrix> {
    let canon = frame.canonicalized()?;
    let a = canon.upper();
    let b = canon.lower();
    let i = c64(0.0, 1.0);
    let num = &a - &b.scale(i);
    let den = &a + &b.scale(i);
    let u = &num * &den.inverse().map_err(|_| {
        Error::Invariant("stereographic projection failed: a + ib is singular (frame not Lagrangian?)".into())
    })?;
    // Roundoff in the canonicalization and the inverse scales with the frame
    // conditioning; snap the result back onto the group.
    UnitaryMatrix::snapped(u, 1e-6)
}

/// Inverse stereographic projection: the plane with frame `((U + 1); i(U - 1))`.
pub fn stereographic_inverse(u: &UnitaryMatrix) -> Result<LagrangianFrame> {
    let l = u.dim();
    let id = ComplexMatrix::identity(l);
    let a = u.matrix() + &id;
    let b = (&(u.matrix() - &id)).scale(c64(0.0, 1.0));
    LagrangianFrame::new(ComplexMatrix::vstack(&[&a, &b]))
}

/// Möbius action of `U(l, l)` on unitaries: `g . U = (AU + B)(CU + D)^{-1}`.
/// Through [`stereographic`] this is equivariant with the plane action:
/// `Pi(T Phi) = cayley_conjugate(T) . Pi(Phi)`.
pub fn moebius(g: &LorentzMatrix, u: &UnitaryMatrix) -> Result<UnitaryMatrix> {
    if g.half_dim() != u.dim() {
        return Err(Error::Invariant("Moebius dimension mismatch".into()));
    }
    let num = &(&g.block_a() * u.matrix()) + &g.block_b();
    let den = &(&g.block_c() * u.matrix()) + &g.block_d();
    let inv = den
        .inverse()
        .map_err(|_| Error::Invariant("Moebius denominator CU + D is singular".into()))?;
    // Near-singular denominators (a plane passing through the reference)
    // amplify roundoff; snap the result back onto the group.
    UnitaryMatrix::snapped(&num * &inv, 1e-6)
}

/// Interleaved ("checkerboard") direct sum of two square matrices in halves
/// `[[A, B], [C, D]]` and `[[A', B'], [C', D']]`:
///
/// ```text
/// [ A  0  B  0 ]
/// [ 0  A' 0  B']
/// [ C  0  D  0 ]
/// [ 0  C' 0  D']
/// ```
///
/// Under this sum, `J (+) J` is again the standard symplectic form of the
/// doubled half-dimension, and the sum is multiplicative in each slot.
pub fn checkerboard_sum(m1: &ComplexMatrix, m2: &ComplexMatrix) -> Result<ComplexMatrix> {
    for m in [m1, m2] {
        if !m.is_square() || m.rows() % 2 != 0 {
            return Err(Error::Invariant("checkerboard sum needs square matrices of even dimension".into()));
        }
    }
    let (l1, l2) = (m1.rows() / 2, m2.rows() / 2);
    let l = l1 + l2;
    let mut out = ComplexMatrix::zeros(2 * l, 2 * l);
    // Halves of the output: rows [0, l) and [l, 2l); within each half the
    // first l1 indices belong to m1, the next l2 to m2.
    for (half_i, half_j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let b1 = m1.block(half_i * l1, half_j * l1, l1, l1);
        let b2 = m2.block(half_i * l2, half_j * l2, l2, l2);
        out.set_block(half_i * l, half_j * l, &b1);
        out.set_block(half_i * l + l1, half_j * l + l1, &b2);
    }
    Ok(out)
}

/// Checkerboard sum of two frames `(a; b)` and `(a'; b')`:
/// row blocks `(a, 0), (0, a'), (b, 0), (0, b')`.
pub fn checkerboard_frame_sum(f1: &LagrangianFrame, f2: &LagrangianFrame) -> Result<LagrangianFrame> {
    let (l1, l2) = (f1.half_dim(), f2.half_dim());
    let l = l1 + l2;
    let mut out = ComplexMatrix::zeros(2 * l, l);
    out.set_block(0, 0, &f1.upper());
    out.set_block(l1, l1, &f2.upper());
    out.set_block(l, 0, &f1.lower());
    out.set_block(l + l1, l1, &f2.lower());
    LagrangianFrame::new(out)
}

/// The periodic boundary-condition frame in doubled dimension: row blocks
/// `(0, 1), (e^{ik} 1, 0), (1, 0), (0, e^{ik} 1)` of size `4l x 2l`.
/// At `k = 0` this is the seed frame whose orbit under interleaved transfer
/// matrices carries the boundary data `(phi_0, T phi_{N+1}, T phi_1, phi_N)`.
pub fn periodic_frame(half_dim: usize, k: f64) -> Result<LagrangianFrame> {
    let l = half_dim;
    let id = ComplexMatrix::identity(l);
    let ph = id.scale(Complex64::from_polar(1.0, k));
    let mut m = ComplexMatrix::zeros(4 * l, 2 * l);
    m.set_block(0, l, &id);
    m.set_block(l, 0, &ph);
    m.set_block(2 * l, 0, &id);
    m.set_block(3 * l, l, &ph);
    LagrangianFrame::new(m)
}

/// Adjoint of the stereographic image of [`periodic_frame`]:
/// `[[0, i e^{-ik} 1], [i e^{ik} 1, 0]]` of size `2l x 2l`. This is the
/// pairing that turns the interleaved Prüfer unitary into the eigenvalue
/// detector, and simultaneously the limit of that detector as the spectral
/// parameter goes to plus or minus infinity.
pub fn periodic_pairing(half_dim: usize, k: f64) -> UnitaryMatrix {
    let l = half_dim;
    let up = Complex64::from_polar(1.0, k) * c64(0.0, 1.0);
    let um = Complex64::from_polar(1.0, -k) * c64(0.0, 1.0);
    let m = ComplexMatrix::from_fn(2 * l, 2 * l, |i, j| {
        if i < l && j == i + l {
            um
        } else if i >= l && j == i - l {
            up
        } else {
            Complex64::ZERO
        }
    });
    UnitaryMatrix::new(m).expect("periodic pairing is unitary by construction")
}

/// Frame of the boundary-data plane of a symplectic matrix `T = [[A, B], [C, D]]`:
/// row blocks `(0, 1), (A, B), (1, 0), (C, D)` of size `4l x 2l`. This is the
/// image of `periodic_frame(l, 0)` under the interleaved embedding
/// `1 (+) T`, spanning all vectors `(v_in, v_out, w_in, w_out)` with
/// `(v_out; w_out) = T (w_in; v_in)` ordered for boundary pairing.
pub fn graph_frame(t: &HermitianSymplecticMatrix) -> Result<LagrangianFrame> {
    let l = t.half_dim();
    let id = ComplexMatrix::identity(l);
    let mut m = ComplexMatrix::zeros(4 * l, 2 * l);
    m.set_block(0, l, &id);
    m.set_block(l, 0, &t.part(0, 0));
    m.set_block(l, l, &t.part(0, 1));
    m.set_block(2 * l, 0, &id);
    m.set_block(3 * l, 0, &t.part(1, 0));
    m.set_block(3 * l, l, &t.part(1, 1));
    LagrangianFrame::new(m)
}

/// Unitary embedding of a Hermitian symplectic matrix: with Cayley blocks
/// `[[A, B], [C, D]] = C T C*`,
///
/// `embed(T) = [[A - B D^{-1} C, i B D^{-1}], [i D^{-1} C, D^{-1}]]`.
///
/// `D` is invertible because `D* D = 1 + B* B >= 1`. The embedding satisfies
/// `embed(T) = [[0, i], [i, 0]] * Pi(graph_frame(T))` and detects unit-circle
/// spectrum through [`eigenvalue_detector`].
pub fn embed_unitary(t: &HermitianSymplecticMatrix) -> Result<UnitaryMatrix> {
    let g = cayley_conjugate(t)?;
    let (a, b) = (g.block_a(), g.block_b());
    let (c, d) = (g.block_c(), g.block_d());
    let dinv = d
        .inverse()
        .map_err(|_| Error::Invariant("Cayley block D unexpectedly singular".into()))?;
    let i = c64(0.0, 1.0);
    let tl = &a - &(&(&b * &dinv) * &c);
    let tr = (&(&b * &dinv)).scale(i);
    let bl = (&(&dinv * &c)).scale(i);
    let l = t.half_dim();
    let mut out = ComplexMatrix::zeros(2 * l, 2 * l);
    out.set_block(0, 0, &tl);
    out.set_block(0, l, &tr);
    out.set_block(l, 0, &bl);
    out.set_block(l, l, &dinv);
    // The Schur blocks inherit the conditioning of D; snap the assembled
    // matrix back onto the group.
    UnitaryMatrix::snapped(out, 1e-6)
}

/// Twists the embedding by the spectral phase: `diag(e^{-ik} 1, e^{ik} 1) * U`.
/// The multiplicity of 1 in the result equals the geometric multiplicity of
/// `e^{ik}` as an eigenvalue of the embedded symplectic matrix.
pub fn eigenvalue_detector(u_embedded: &UnitaryMatrix, k: f64) -> Result<UnitaryMatrix> {
    let n = u_embedded.dim();
    if n % 2 != 0 {
        return Err(Error::Invariant("detector needs an even-dimensional unitary".into()));
    }
    let l = n / 2;
    let em = Complex64::from_polar(1.0, -k);
    let ep = Complex64::from_polar(1.0, k);
    let twisted = ComplexMatrix::from_fn(n, n, |i, j| {
        let z = u_embedded.matrix()[(i, j)];
        if i < l {
            z * em
        } else {
            z * ep
        }
    });
    UnitaryMatrix::with_tolerance(twisted, 1e-8)
}

/// Result of [`intersection_dimension_detailed`]: the dimension according to
/// each route, plus a flag raised when any singular value or eigenphase falls
/// in the ambiguous band `(1e-8, 1e-6)` where the integer answer starts to
/// depend on the threshold.
#[derive(Debug, Clone, Copy)]
pub struct IntersectionDetail {
    /// `l - rank(Phi* J Psi)`.
    pub by_pairing: usize,
    /// `2l - rank([Phi  Psi])`.
    pub by_stacking: usize,
    /// Multiplicity of eigenvalue 1 of `Pi(Psi)* Pi(Phi)`.
    pub by_phases: usize,
    /// Some quantity fell in the ambiguous threshold band.
    pub ambiguous: bool,
}

const INTERSECTION_ABS_TOL: f64 = 1e-8;
const AMBIGUITY_BAND_HI: f64 = 1e-6;

/// Dimension of the intersection of two Lagrangian planes, with the three
/// routes reported separately. Frames are canonicalized first so all
/// thresholds are absolute against a unit scale.
pub fn intersection_dimension_detailed(
    phi: &LagrangianFrame,
    psi: &LagrangianFrame,
) -> Result<IntersectionDetail> {
    if phi.half_dim() != psi.half_dim() {
        return Err(Error::Invariant("intersection of planes of different dimension".into()));
    }
    let l = phi.half_dim();
    let cphi = phi.canonicalized()?;
    let cpsi = psi.canonicalized()?;

    let mut ambiguous = false;
    let mut flag = |x: f64| {
        if x > INTERSECTION_ABS_TOL && x < AMBIGUITY_BAND_HI {
            ambiguous = true;
        }
    };

    // Route 1: kernel of the symplectic pairing Phi* J Psi.
    let j = symplectic_form(l);
    let pairing = &(&cphi.matrix().adjoint() * &j) * cpsi.matrix();
    let s1 = singular_values(&pairing);
    for &s in &s1 {
        flag(s);
    }
    let by_pairing = s1.iter().filter(|&&s| s <= INTERSECTION_ABS_TOL).count();

    // Route 2: rank deficiency of the stacked frame [Phi  Psi].
    let stacked = ComplexMatrix::hstack(&[cphi.matrix(), cpsi.matrix()]);
    let s2 = singular_values(&stacked);
    for &s in &s2 {
        flag(s);
    }
    let by_stacking = 2 * l - s2.iter().filter(|&&s| s > INTERSECTION_ABS_TOL).count();

    // Route 3: eigenphases of Pi(Psi)* Pi(Phi) at zero.
    let u = stereographic(&cphi)?;
    let v = stereographic(&cpsi)?;
    let rel = &v.matrix().adjoint() * u.matrix();
    let phases = unitary_eigenphases(&rel)?.phases;
    for &t in &phases {
        flag(t.abs());
    }
    let by_phases = phases.iter().filter(|t| t.abs() <= INTERSECTION_ABS_TOL).count();

    Ok(IntersectionDetail {
        by_pairing,
        by_stacking,
        by_phases,
        ambiguous,
    })
}

/// Dimension of the intersection of two Lagrangian planes. Errors when the
/// three computation routes disagree (numerical degeneracy).
pub fn intersection_dimension(phi: &LagrangianFrame, psi: &LagrangianFrame) -> Result<usize> {
    let d = intersection_dimension_detailed(phi, psi)?;
    if d.by_pairing != d.by_stacking || d.by_pairing != d.by_phases {
        return Err(Error::Invariant(format!(
            "numerical degeneracy: intersection dimension routes disagree \
             (pairing {}, stacking {}, phases {})",
            d.by_pairing, d.by_stacking, d.by_phases
        )));
    }
    Ok(d.by_pairing)
}

/// `Pi(base)* Pi(frame)`: the unitary whose eigenvalue-1 multiplicity is the
/// intersection dimension of the two planes.
pub fn relative_unitary(base: &LagrangianFrame, frame: &LagrangianFrame) -> Result<UnitaryMatrix> {
    let u = stereographic(frame)?;
    let v = stereographic(base)?;
    UnitaryMatrix::with_tolerance(&v.matrix().adjoint() * u.matrix(), 1e-8)
}

/// Geometric multiplicity of `e^{ik}` in the spectrum of a Hermitian
/// symplectic matrix, read off the eigenvalue detector.
pub fn unit_eigenvalue_multiplicity(t: &HermitianSymplecticMatrix, k: f64) -> Result<usize> {
    let u = embed_unitary(t)?;
    let det = eigenvalue_detector(&u, k)?;
    det.kernel_dim_at_one(INTERSECTION_ABS_TOL)
}
