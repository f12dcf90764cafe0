//! Result serialization: spectrum JSON, flow CSV, and flow SVG.
//!
//! All three emitters are byte-deterministic: the same input produces the
//! same output on every run and every thread count. CSV rows print phases
//! wrapped to `[-pi, pi)` with 17 significant digits, one row per grid
//! energy under the header `E,theta_1,...,theta_m`, LF line endings. The
//! SVG draws one polyline per phase branch (split where the wrapped phase
//! jumps across the `+-pi` seam), a horizontal axis at `theta = 0`, and a
//! circle at every interpolated crossing of a full turn — the energies
//! where the detection unitary regains the eigenvalue one.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::wrap_angle;
use crate::tracking::turn_count;

/// Spectrum of a dense reference diagonalization.
#[derive(Debug, Clone, Serialize)]
pub struct OracleOutput {
    /// Eigenvalues, ascending, repeated by multiplicity.
    pub eigenvalues: Vec<f64>,
    /// Always `"dense"`.
    pub source: &'static str,
}

/// Spectrum located by phase tracking.
#[derive(Debug, Clone, Serialize)]
pub struct SolveOutput {
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Multiplicity of each eigenvalue, aligned with `eigenvalues`.
    pub multiplicities: Vec<usize>,
    /// Sum of the multiplicities.
    pub total: usize,
}

/// Serializes any output struct as pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    Ok(text)
}

/// A sampled phase flow ready for emission: ascending energies and, per
/// grid point, the lifted phase of each branch.
#[derive(Debug, Clone)]
pub struct FlowTable {
    energies: Vec<f64>,
    lifted: Vec<Vec<f64>>,
}

impl FlowTable {
    pub fn new(energies: Vec<f64>, lifted: Vec<Vec<f64>>) -> Result<Self> {
        if energies.len() != lifted.len() || energies.len() < 2 {
            return Err(Error::Invariant(
                "flow table needs one phase row per energy and at least two energies".into(),
            ));
        }
        if energies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invariant(
                "flow table energies must be strictly increasing".into(),
            ));
        }
        let branches = lifted[0].len();
        if branches == 0 || lifted.iter().any(|row| row.len() != branches) {
            return Err(Error::Invariant(
                "flow table rows must share one nonzero branch count".into(),
            ));
        }
        Ok(Self { energies, lifted })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn branch_count(&self) -> usize {
        self.lifted[0].len()
    }

    /// Energies where some branch completes a full turn, found by linear
    /// interpolation of the lifted phases between adjacent grid points.
    pub fn crossings(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for j in 0..self.branch_count() {
            for i in 0..self.energies.len() - 1 {
                let (a, b) = (self.lifted[i][j], self.lifted[i + 1][j]);
                let (ta, tb) = (turn_count(a), turn_count(b));
                for t in ta.min(tb) + 1..=ta.max(tb) {
                    let target = t as f64 * std::f64::consts::TAU;
                    let frac = if (b - a).abs() > f64::EPSILON {
                        ((target - a) / (b - a)).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    out.push(self.energies[i] + frac * (self.energies[i + 1] - self.energies[i]));
                }
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out
    }

    /// Renders the CSV document.
    pub fn to_csv(&self) -> String {
        let m = self.branch_count();
        let mut text = String::from("E");
        for j in 1..=m {
            let _ = write!(text, ",theta_{j}");
        }
        text.push('\n');
        for (i, e) in self.energies.iter().enumerate() {
            let _ = write!(text, "{e:.16e}");
            for j in 0..m {
                let _ = write!(text, ",{:.16e}", wrap_angle(self.lifted[i][j]));
            }
            text.push('\n');
        }
        text
    }

    /// Renders the SVG document.
    pub fn to_svg(&self) -> String {
        const WIDTH: f64 = 900.0;
        const HEIGHT: f64 = 560.0;
        const MARGIN: f64 = 50.0;
        const COLORS: [&str; 6] = [
            "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
        ];
        let pi = std::f64::consts::PI;
        let (e_lo, e_hi) = (self.energies[0], *self.energies.last().unwrap());
        let x = |e: f64| MARGIN + (e - e_lo) / (e_hi - e_lo) * (WIDTH - 2.0 * MARGIN);
        let y = |theta: f64| MARGIN + (pi - theta) / (2.0 * pi) * (HEIGHT - 2.0 * MARGIN);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">"
        );
        let _ = writeln!(
            svg,
            "<rect x=\"0\" y=\"0\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" fill=\"white\"/>"
        );
        // Frame and the theta = 0 axis.
        let _ = writeln!(
            svg,
            "<rect x=\"{MARGIN:.2}\" y=\"{MARGIN:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>",
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN:.2}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" \
             stroke=\"#444444\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>",
            y(0.0),
            WIDTH - MARGIN
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#444444\">theta = 0</text>",
            WIDTH - MARGIN + 4.0,
            y(0.0) + 4.0
        );

        // One polyline per branch, split at the +-pi seam.
        for j in 0..self.branch_count() {
            let color = COLORS[j % COLORS.len()];
            let mut segment: Vec<(f64, f64)> = Vec::new();
            let flush = |segment: &mut Vec<(f64, f64)>, svg: &mut String| {
                if segment.len() >= 2 {
                    let points: Vec<String> = segment
                        .iter()
                        .map(|(px, py)| format!("{px:.2},{py:.2}"))
                        .collect();
                    let _ = writeln!(
                        svg,
                        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                         stroke-width=\"1.5\"/>",
                        points.join(" ")
                    );
                }
                segment.clear();
            };
            let mut prev_wrapped = f64::NAN;
            for (i, &e) in self.energies.iter().enumerate() {
                let w = wrap_angle(self.lifted[i][j]);
                if !segment.is_empty() && (w - prev_wrapped).abs() > pi {
                    flush(&mut segment, &mut svg);
                }
                segment.push((x(e), y(w)));
                prev_wrapped = w;
            }
            flush(&mut segment, &mut svg);
        }

        // Crossing markers on the axis.
        for e in self.crossings() {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"none\" \
                 stroke=\"#000000\" stroke-width=\"1.5\"/>",
                x(e),
                y(0.0)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
