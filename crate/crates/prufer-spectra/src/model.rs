//! JSON file formats for models, paths, and frames.
//!
//! Every file carries a `format_version` (currently `1`). Complex numbers
//! are two-element arrays `[re, im]`; matrices are arrays of rows. A model
//! file declares its `kind` — `"jacobi"`, `"hamiltonian"`, or
//! `"sturm-liouville"` — plus the block size `l`, the kind-specific
//! coefficient lists, and optionally a `boundary` object
//! `{"type": "dirichlet" | "periodic" | "general", "k"?, "frame"?}`.
//!
//! Syntactic problems (malformed JSON, wrong shapes for the declared kind)
//! surface as [`Error::Parse`]; semantic ones (non-Hermitian samples,
//! singular hopping blocks, frames that are not Lagrangian, ...) as
//! [`Error::Invariant`] with a message naming the violated invariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{ContinuumBoundary, HamiltonianSystem, SturmLiouvilleModel};
use crate::indices::{LagrangianPath, SymplecticPath};
use crate::jacobi::{BlockJacobiModel, BoundaryCondition};
use crate::linalg::matrix::{c64, ComplexMatrix};
use crate::symplectic::{HermitianSymplecticMatrix, LagrangianFrame};

/// A matrix as rows of `[re, im]` entries.
pub type MatrixData = Vec<Vec<[f64; 2]>>;

/// Decodes a rectangular, non-empty matrix.
pub fn matrix_from_data(data: &MatrixData, what: &str) -> Result<ComplexMatrix> {
    if data.is_empty() || data[0].is_empty() {
        return Err(Error::Parse(format!("{what}: empty matrix")));
    }
    let cols = data[0].len();
    if data.iter().any(|row| row.len() != cols) {
        return Err(Error::Parse(format!("{what}: ragged matrix rows")));
    }
    let mut entries = Vec::with_capacity(data.len() * cols);
    for row in data {
        for &[re, im] in row {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Parse(format!("{what}: non-finite entry")));
            }
            entries.push(c64(re, im));
        }
    }
    ComplexMatrix::new(data.len(), cols, entries)
}

/// Encodes a matrix as rows of `[re, im]` entries.
pub fn matrix_to_data(m: &ComplexMatrix) -> MatrixData {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn matrices_from_data(data: &[MatrixData], what: &str) -> Result<Vec<ComplexMatrix>> {
    data.iter()
        .enumerate()
        .map(|(i, d)| matrix_from_data(d, &format!("{what}[{i}]")))
        .collect()
}

fn check_version(version: u32, what: &str) -> Result<()> {
    if version != 1 {
        return Err(Error::Parse(format!(
            "{what}: unsupported format_version {version} (this build reads version 1)"
        )));
    }
    Ok(())
}

/// The problem class a model file describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Jacobi,
    Hamiltonian,
    SturmLiouville,
}

/// How a boundary object in a model file ties the ends together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Dirichlet,
    Periodic,
    General,
}

/// The optional `boundary` object of a model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(rename = "type")]
    pub kind: BoundaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<MatrixData>,
}

impl BoundarySpec {
    fn frame(&self, half_dim: usize) -> Result<LagrangianFrame> {
        let data = self.frame.as_ref().ok_or_else(|| {
            Error::Invariant("general boundary needs a \"frame\" matrix".into())
        })?;
        let m = matrix_from_data(data, "boundary.frame")?;
        let frame = LagrangianFrame::new(m)?;
        if frame.half_dim() != half_dim {
            return Err(Error::Invariant(format!(
                "boundary frame has half-dimension {}, the model needs {half_dim}",
                frame.half_dim()
            )));
        }
        Ok(frame)
    }

    /// Resolves into a lattice boundary condition for a model of block size
    /// `l` (the general frame must have half-dimension `2l`).
    pub fn to_jacobi(&self, l: usize) -> Result<BoundaryCondition> {
        match self.kind {
            BoundaryKind::Dirichlet => Ok(BoundaryCondition::Dirichlet),
            BoundaryKind::Periodic => {
                let k = self
                    .k
                    .ok_or_else(|| Error::Invariant("periodic boundary needs \"k\"".into()))?;
                Ok(BoundaryCondition::Periodic { k })
            }
            BoundaryKind::General => Ok(BoundaryCondition::General {
                frame: self.frame(2 * l)?,
            }),
        }
    }

    /// Resolves into a continuum boundary condition for a system of
    /// half-dimension `l`.
    pub fn to_continuum(&self, l: usize) -> Result<ContinuumBoundary> {
        match self.kind {
            BoundaryKind::Dirichlet => Ok(ContinuumBoundary::Dirichlet),
            BoundaryKind::Periodic => {
                let k = self
                    .k
                    .ok_or_else(|| Error::Invariant("periodic boundary needs \"k\"".into()))?;
                Ok(ContinuumBoundary::Periodic { k })
            }
            BoundaryKind::General => Ok(ContinuumBoundary::General {
                frame: self.frame(2 * l)?,
            }),
        }
    }
}

/// A model file: one of the three problem kinds plus an optional boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: ModelKind,
    /// Block size `L`.
    pub l: usize,
    /// Site count `N` (jacobi only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Coefficient nodes in `[0, 1]` (continuum kinds only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
    /// Jacobi `V_1..V_N`, or Hamiltonian `V` at each node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potentials: Option<Vec<MatrixData>>,
    /// Jacobi `T_1..T_N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hoppings: Option<Vec<MatrixData>>,
    /// Hamiltonian `P` at each node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<MatrixData>>,
    /// Sturm-Liouville leading coefficient at each node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<MatrixData>>,
    /// Sturm-Liouville mixed coefficient at each node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<MatrixData>>,
    /// Sturm-Liouville potential at each node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<MatrixData>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundarySpec>,
}

impl ModelFile {
    /// Parses a model file from JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        check_version(file.format_version, "model file")?;
        Ok(file)
    }

    /// Reads and parses a model file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn required<'a, T>(field: &'a Option<T>, name: &str, kind: &str) -> Result<&'a T> {
        field
            .as_ref()
            .ok_or_else(|| Error::Parse(format!("{kind} model needs \"{name}\"")))
    }

    fn check_block_size(&self, matrices: &[ComplexMatrix], name: &str, dim: usize) -> Result<()> {
        for (i, m) in matrices.iter().enumerate() {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::Invariant(format!(
                    "{name}[{i}] is {}x{}, but l = {} demands {dim}x{dim}",
                    m.rows(),
                    m.cols(),
                    self.l
                )));
            }
        }
        Ok(())
    }

    /// Builds the block Jacobi model this file describes.
    pub fn to_jacobi(&self) -> Result<BlockJacobiModel> {
        if self.kind != ModelKind::Jacobi {
            return Err(Error::Invariant(
                "this operation needs a \"jacobi\" model file".into(),
            ));
        }
        let potentials = matrices_from_data(Self::required(&self.potentials, "potentials", "jacobi")?, "potentials")?;
        let hoppings = matrices_from_data(Self::required(&self.hoppings, "hoppings", "jacobi")?, "hoppings")?;
        if let Some(n) = self.n {
            if n != potentials.len() {
                return Err(Error::Invariant(format!(
                    "n = {n} but {} potential blocks given",
                    potentials.len()
                )));
            }
        }
        self.check_block_size(&potentials, "potentials", self.l)?;
        self.check_block_size(&hoppings, "hoppings", self.l)?;
        BlockJacobiModel::new(potentials, hoppings)
    }

    /// Builds the continuum system this file describes (a `hamiltonian` file
    /// directly; a `sturm-liouville` file through its reduction).
    pub fn to_hamiltonian(&self) -> Result<HamiltonianSystem> {
        match self.kind {
            ModelKind::Jacobi => Err(Error::Invariant(
                "this operation needs a continuum (\"hamiltonian\" or \
                 \"sturm-liouville\") model file"
                    .into(),
            )),
            ModelKind::Hamiltonian => {
                let nodes = Self::required(&self.nodes, "nodes", "hamiltonian")?.clone();
                let potentials = matrices_from_data(
                    Self::required(&self.potentials, "potentials", "hamiltonian")?,
                    "potentials",
                )?;
                let weights = matrices_from_data(
                    Self::required(&self.weights, "weights", "hamiltonian")?,
                    "weights",
                )?;
                self.check_block_size(&potentials, "potentials", 2 * self.l)?;
                self.check_block_size(&weights, "weights", 2 * self.l)?;
                HamiltonianSystem::new(self.l, nodes, potentials, weights)
            }
            ModelKind::SturmLiouville => Ok(self.to_sturm_liouville()?.to_hamiltonian()?),
        }
    }

    /// Builds the Sturm-Liouville model this file describes.
    pub fn to_sturm_liouville(&self) -> Result<SturmLiouvilleModel> {
        if self.kind != ModelKind::SturmLiouville {
            return Err(Error::Invariant(
                "this operation needs a \"sturm-liouville\" model file".into(),
            ));
        }
        let nodes = Self::required(&self.nodes, "nodes", "sturm-liouville")?.clone();
        let p = matrices_from_data(Self::required(&self.p, "p", "sturm-liouville")?, "p")?;
        let q = matrices_from_data(Self::required(&self.q, "q", "sturm-liouville")?, "q")?;
        let v = matrices_from_data(Self::required(&self.v, "v", "sturm-liouville")?, "v")?;
        self.check_block_size(&p, "p", self.l)?;
        self.check_block_size(&q, "q", self.l)?;
        self.check_block_size(&v, "v", self.l)?;
        SturmLiouvilleModel::new(self.l, nodes, p, q, v)
    }
}

/// What a path file samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    /// Lagrangian frames (`2l x l` matrices).
    LagrangianPath,
    /// Hermitian symplectic matrices (`2l x 2l`).
    SymplecticPath,
}

/// A sampled path: strictly increasing parameters plus one matrix each.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub format_version: u32,
    pub kind: PathKind,
    pub params: Vec<f64>,
    /// Lagrangian frames (for `kind = "lagrangian-path"`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<MatrixData>>,
    /// Symplectic matrices (for `kind = "symplectic-path"`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<MatrixData>>,
}

impl PathFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PathFile = serde_json::from_str(text)?;
        check_version(file.format_version, "path file")?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Builds the Lagrangian path (requires `kind = "lagrangian-path"`).
    pub fn to_lagrangian_path(&self) -> Result<LagrangianPath> {
        if self.kind != PathKind::LagrangianPath {
            return Err(Error::Invariant(
                "this operation needs a \"lagrangian-path\" file".into(),
            ));
        }
        let data = self
            .frames
            .as_ref()
            .ok_or_else(|| Error::Parse("lagrangian-path file needs \"frames\"".into()))?;
        let frames = matrices_from_data(data, "frames")?
            .into_iter()
            .map(LagrangianFrame::new)
            .collect::<Result<Vec<_>>>()?;
        LagrangianPath::new(self.params.clone(), frames)
    }

    /// Builds the symplectic path (requires `kind = "symplectic-path"`).
    pub fn to_symplectic_path(&self) -> Result<SymplecticPath> {
        if self.kind != PathKind::SymplecticPath {
            return Err(Error::Invariant(
                "this operation needs a \"symplectic-path\" file".into(),
            ));
        }
        let data = self
            .matrices
            .as_ref()
            .ok_or_else(|| Error::Parse("symplectic-path file needs \"matrices\"".into()))?;
        let matrices = matrices_from_data(data, "matrices")?
            .into_iter()
            .map(HermitianSymplecticMatrix::new)
            .collect::<Result<Vec<_>>>()?;
        SymplecticPath::new(self.params.clone(), matrices)
    }
}

/// A single reference Lagrangian frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFile {
    pub format_version: u32,
    pub frame: MatrixData,
}

impl FrameFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: FrameFile = serde_json::from_str(text)?;
        check_version(file.format_version, "frame file")?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_frame(&self) -> Result<LagrangianFrame> {
        LagrangianFrame::new(matrix_from_data(&self.frame, "frame")?)
    }
}
