//! Command-line interface.
//!
//! Five subcommands cover the pipeline: `oracle` (dense reference
//! spectrum), `flow` (phase-flow CSV/SVG over an energy sweep), `solve`
//! (lattice eigenvalues with multiplicities by phase tracking), `index`
//! (intersection and rotation indices of path files), and `ham-solve`
//! (continuum spectra over an energy window). Results go to stdout except
//! for `flow`, which writes the files named by `--out` and `--svg`.
//!
//! Exit codes: `0` success, `2` malformed input or usage error, `3`
//! violated invariant (bad boundary data, tolerance out of range, ...),
//! `4` I/O failure, `5` incomplete or unverifiable spectrum, `6` tangent
//! (ambiguous) crossing, `7` integration failure.
//!
//! Work is single-threaded unless `--jobs` asks for more; the
//! `PRUFER_SPECTRA_JOBS` environment variable, when set, overrides the
//! flag. Outputs are byte-identical for every job count.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::eigensolver::{default_grid_points, find_eigenvalues_with_jobs, scan_flow_with_jobs};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    locate_eigenvalues_with_jobs, scan_detection_phases, ContinuumBoundary, DEFAULT_STEPS,
};
use crate::indices::{conley_zehnder_index, intersection_index};
use crate::jacobi::{assemble_dense, BoundaryCondition};
use crate::model::{FrameFile, ModelFile, ModelKind, PathFile};
use crate::output::{to_json_pretty, FlowTable, OracleOutput, SolveOutput};

/// Environment variable that overrides `--jobs`.
pub const JOBS_ENV: &str = "PRUFER_SPECTRA_JOBS";

#[derive(Parser)]
#[command(
    name = "prufer-spectra",
    version,
    about = "Spectra of block Jacobi and linear Hamiltonian operators by phase tracking"
)]
struct Cli {
    /// Threads for energy-grid evaluation (PRUFER_SPECTRA_JOBS overrides).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BoundaryArgs {
    /// Periodic closure with this quasimomentum.
    #[arg(long, conflicts_with = "dirichlet")]
    k: Option<f64>,
    /// Dirichlet closure.
    #[arg(long)]
    dirichlet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Dense reference spectrum of a block Jacobi model.
    Oracle {
        /// Model file (kind "jacobi").
        model: PathBuf,
        /// Corner coupling as "re,im"; 0,0 closes with Dirichlet ends,
        /// modulus one closes the ring.
        #[arg(long, default_value = "0,0", value_parser = parse_omega)]
        omega: Complex64,
    },
    /// Detection-phase flow over an energy sweep, as CSV and optional SVG.
    Flow {
        /// Model file (any kind; continuum kinds need --emin/--emax).
        model: PathBuf,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Grid points before adaptive refinement (0 picks a default
        /// sized to the model).
        #[arg(long, default_value_t = 0)]
        grid: usize,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG plot path.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Sweep start (continuum models only).
        #[arg(long)]
        emin: Option<f64>,
        /// Sweep end (continuum models only).
        #[arg(long)]
        emax: Option<f64>,
        /// Base integration step count (continuum models only).
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
    },
    /// Eigenvalues with multiplicities of a block Jacobi model.
    Solve {
        /// Model file (kind "jacobi").
        model: PathBuf,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Energy tolerance for located eigenvalues.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Grid points before adaptive refinement (0 picks a default).
        #[arg(long, default_value_t = 0)]
        grid: usize,
    },
    /// Intersection index of a sampled path.
    Index {
        /// Path file (kind "lagrangian-path" or "symplectic-path").
        path: PathBuf,
        /// Reference frame file for a Lagrangian path.
        #[arg(long, conflicts_with = "cz")]
        psi: Option<PathBuf>,
        /// Rotation index of a symplectic path against the periodic
        /// pairing instead.
        #[arg(long)]
        cz: bool,
        /// Quasimomentum of the periodic pairing (with --cz).
        #[arg(long, requires = "cz", default_value_t = 0.0)]
        k: f64,
    },
    /// Continuum spectrum over an energy window.
    HamSolve {
        /// Model file (kind "hamiltonian" or "sturm-liouville").
        model: PathBuf,
        #[command(flatten)]
        boundary: BoundaryArgs,
        /// Window start.
        #[arg(long)]
        emin: f64,
        /// Window end.
        #[arg(long)]
        emax: f64,
        /// Base integration step count.
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        /// Energy tolerance for located eigenvalues.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Grid points before adaptive refinement.
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
}

/// Parses a complex CLI value written as `re,im`.
fn parse_omega(text: &str) -> std::result::Result<Complex64, String> {
    let mut parts = text.split(',');
    let bad = || format!("expected \"re,im\", got {text:?}");
    let re: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let im: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

/// Validates a `PRUFER_SPECTRA_JOBS` value.
fn parse_jobs_value(text: &str) -> Result<usize> {
    text.trim()
        .parse::<usize>()
        .ok()
        .filter(|&jobs| jobs >= 1)
        .ok_or_else(|| {
            Error::Invariant(format!(
                "{JOBS_ENV} must be a positive integer, got {text:?}"
            ))
        })
}

/// Job count: the environment variable wins over the flag.
fn resolve_jobs(flag: usize) -> Result<usize> {
    match std::env::var(JOBS_ENV) {
        Ok(text) => parse_jobs_value(&text),
        Err(std::env::VarError::NotPresent) => Ok(flag.max(1)),
        Err(err) => Err(Error::Invariant(format!("{JOBS_ENV}: {err}"))),
    }
}

/// Boundary for a lattice run: flags first, then the model file.
fn lattice_boundary(args: &BoundaryArgs, file: &ModelFile) -> Result<BoundaryCondition> {
    if args.dirichlet {
        return Ok(BoundaryCondition::Dirichlet);
    }
    if let Some(k) = args.k {
        return Ok(BoundaryCondition::Periodic { k });
    }
    if let Some(spec) = &file.boundary {
        return spec.to_jacobi(file.l);
    }
    Err(Error::Invariant(
        "no boundary condition: pass --dirichlet or --k, or add a \"boundary\" \
         object to the model file"
            .into(),
    ))
}

/// Boundary for a continuum run: flags first, then the model file.
fn continuum_boundary(args: &BoundaryArgs, file: &ModelFile) -> Result<ContinuumBoundary> {
    if args.dirichlet {
        return Ok(ContinuumBoundary::Dirichlet);
    }
    if let Some(k) = args.k {
        return Ok(ContinuumBoundary::Periodic { k });
    }
    if let Some(spec) = &file.boundary {
        return spec.to_continuum(file.l);
    }
    Err(Error::Invariant(
        "no boundary condition: pass --dirichlet or --k, or add a \"boundary\" \
         object to the model file"
            .into(),
    ))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text.as_bytes())?;
    Ok(())
}

fn cmd_oracle(model_path: &Path, omega: Complex64) -> Result<String> {
    let model = ModelFile::load(model_path)?.to_jacobi()?;
    let dense = assemble_dense(&model, omega)?;
    to_json_pretty(&OracleOutput {
        eigenvalues: dense.eigenvalues()?,
        source: "dense",
    })
}

fn flow_table(
    file: &ModelFile,
    boundary: &BoundaryArgs,
    grid: usize,
    window: (Option<f64>, Option<f64>),
    steps: usize,
    jobs: usize,
) -> Result<FlowTable> {
    if file.kind == ModelKind::Jacobi {
        if window.0.is_some() || window.1.is_some() {
            return Err(Error::Invariant(
                "--emin/--emax apply only to continuum models; the lattice sweep \
                 window is derived from the model"
                    .into(),
            ));
        }
        let model = file.to_jacobi()?;
        let bc = lattice_boundary(boundary, file)?;
        let grid = if grid == 0 { default_grid_points(&model) } else { grid };
        let flow = scan_flow_with_jobs(&model, &bc, grid, jobs)?;
        let rows = (0..flow.energies().len())
            .map(|i| flow.lifted(i).to_vec())
            .collect();
        FlowTable::new(flow.energies().to_vec(), rows)
    } else {
        let (Some(emin), Some(emax)) = window else {
            return Err(Error::Invariant(
                "continuum flow needs an energy window: pass --emin and --emax".into(),
            ));
        };
        if emin >= emax {
            return Err(Error::Invariant(format!(
                "empty energy window: emin = {emin} must lie below emax = {emax}"
            )));
        }
        let sys = file.to_hamiltonian()?;
        let bc = continuum_boundary(boundary, file)?;
        let grid = if grid == 0 { 200 } else { grid };
        let (energies, rows) = scan_detection_phases(&sys, &bc, emin, emax, grid, steps)?;
        FlowTable::new(energies, rows)
    }
}

fn cmd_solve(
    model_path: &Path,
    boundary: &BoundaryArgs,
    tol: f64,
    grid: usize,
    jobs: usize,
) -> Result<String> {
    let file = ModelFile::load(model_path)?;
    let model = file.to_jacobi()?;
    let bc = lattice_boundary(boundary, &file)?;
    let grid = if grid == 0 { default_grid_points(&model) } else { grid };
    let result = find_eigenvalues_with_jobs(&model, &bc, tol, grid, jobs)?;
    // Round-trip check before emission: the detector, re-evaluated at every
    // reported eigenvalue, must sit within the requested tolerance of a
    // phase crossing.
    if result.max_phase_residual > tol {
        return Err(Error::Completeness(format!(
            "re-evaluation at a reported eigenvalue leaves a phase residual of \
             {:.3e}, above the requested tolerance {tol:.3e}",
            result.max_phase_residual
        )));
    }
    to_json_pretty(&SolveOutput {
        eigenvalues: result.eigenvalues.iter().map(|e| e.energy).collect(),
        multiplicities: result.eigenvalues.iter().map(|e| e.multiplicity).collect(),
        total: result.total_multiplicity,
    })
}

fn cmd_index(path_file: &Path, psi: Option<&Path>, cz: bool, k: f64) -> Result<String> {
    let file = PathFile::load(path_file)?;
    let index = if cz {
        conley_zehnder_index(&file.to_symplectic_path()?, k)?
    } else {
        let psi_path = psi.ok_or_else(|| {
            Error::Invariant("pass --psi <frame file> or --cz to choose the reference".into())
        })?;
        let frame = FrameFile::load(psi_path)?.to_frame()?;
        intersection_index(&file.to_lagrangian_path()?, &frame)?
    };
    Ok(format!("{index}\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_ham_solve(
    model_path: &Path,
    boundary: &BoundaryArgs,
    emin: f64,
    emax: f64,
    steps: usize,
    tol: f64,
    grid: usize,
    jobs: usize,
) -> Result<String> {
    if emin >= emax {
        return Err(Error::Invariant(format!(
            "empty energy window: emin = {emin} must lie below emax = {emax}"
        )));
    }
    let file = ModelFile::load(model_path)?;
    let sys = file.to_hamiltonian()?;
    let bc = continuum_boundary(boundary, &file)?;
    let eigenvalues = locate_eigenvalues_with_jobs(&sys, &bc, emin, emax, grid, tol, steps, jobs)?;
    let total = eigenvalues.iter().map(|e| e.multiplicity).sum();
    to_json_pretty(&SolveOutput {
        eigenvalues: eigenvalues.iter().map(|e| e.energy).collect(),
        multiplicities: eigenvalues.iter().map(|e| e.multiplicity).collect(),
        total,
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    let jobs = resolve_jobs(cli.jobs)?;
    match &cli.command {
        Command::Oracle { model, omega } => {
            print!("{}", cmd_oracle(model, *omega)?);
        }
        Command::Flow {
            model,
            boundary,
            grid,
            out,
            svg,
            emin,
            emax,
            steps,
        } => {
            let file = ModelFile::load(model)?;
            let table = flow_table(&file, boundary, *grid, (*emin, *emax), *steps, jobs)?;
            write_file(out, &table.to_csv())?;
            if let Some(svg_path) = svg {
                write_file(svg_path, &table.to_svg())?;
            }
        }
        Command::Solve {
            model,
            boundary,
            tol,
            grid,
        } => {
            print!("{}", cmd_solve(model, boundary, *tol, *grid, jobs)?);
        }
        Command::Index { path, psi, cz, k } => {
            print!("{}", cmd_index(path, psi.as_deref(), *cz, *k)?);
        }
        Command::HamSolve {
            model,
            boundary,
            emin,
            emax,
            steps,
            tol,
            grid,
        } => {
            print!(
                "{}",
                cmd_ham_solve(model, boundary, *emin, *emax, *steps, *tol, *grid, jobs)?
            );
        }
    }
    Ok(())
}

/// Parses the process arguments and runs the chosen subcommand.
///
/// Usage errors print through clap and exit with code 2; all other
/// failures return an [`Error`] whose [`Error::exit_code`] the binary
/// forwards to the shell.
pub fn run() -> Result<()> {
    dispatch(Cli::parse())
}
