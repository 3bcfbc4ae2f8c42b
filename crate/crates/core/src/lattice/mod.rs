//! Lattice Hamiltonian targeting on rectangular nearest-neighbour grids.
//!
//! Qubits are indexed row-major, `id = row * cols + col`. An edge's
//! modulated qubit is its higher-frequency endpoint, the one that is moved
//! down into resonance to run a parametric iSWAP.

mod parking;

pub use parking::{
    optimize_parking, ParkingOptions, ParkingOutcome, ParkingPlan, MAX_PARKING_QUBITS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freq::{fit_gaussian, FitError, GaussianFit};
use crate::stats::{median, population_sigma};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice must have at least one row and column, got {rows}x{cols}")]
    EmptyLattice { rows: usize, cols: usize },
    #[error("expected {expected} frequencies, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("missing frequency for nodes {nodes:?}")]
    MissingFrequencies { nodes: Vec<usize> },
    #[error("chip {0} has no qubits")]
    EmptyChip(usize),
    #[error("no chips given")]
    NoChips,
    #[error("detuning reports cover different edges")]
    EdgeMismatch,
    #[error("invalid window [{lo}, {hi}]")]
    InvalidWindow { lo: f64, hi: f64 },
    #[error("invalid parking options: {0}")]
    InvalidParking(String),
    #[error("exact parking search supports up to {max} qubits, lattice has {got}")]
    TooLarge { max: usize, got: usize },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

/// Closed detuning interval applied to `|detuning|`, in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() || lo < 0.0 {
            return Err(LatticeError::InvalidWindow { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, detuning: f64) -> bool {
        let d = detuning.abs();
        d >= self.lo && d <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitNode {
    pub design_f01max: f64,
    pub measured_f01max: Option<f64>,
}

/// Nearest-neighbour pair with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitLattice {
    rows: usize,
    cols: usize,
    nodes: Vec<QubitNode>,
}

impl QubitLattice {
    /// Lattice with the given row-major design frequencies.
    pub fn new(rows: usize, cols: usize, design: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LatticeError::EmptyLattice { rows, cols });
        }
        if design.len() != rows * cols {
            return Err(LatticeError::WrongLength {
                expected: rows * cols,
                got: design.len(),
            });
        }
        let missing: Vec<usize> = (0..design.len())
            .filter(|&i| !design[i].is_finite())
            .collect();
        if !missing.is_empty() {
            return Err(LatticeError::MissingFrequencies { nodes: missing });
        }
        Ok(Self {
            rows,
            cols,
            nodes: design
                .into_iter()
                .map(|f| QubitNode {
                    design_f01max: f,
                    measured_f01max: None,
                })
                .collect(),
        })
    }

    /// Lattice from a rectangular grid of design frequencies.
    pub fn from_grid(grid: &[Vec<f64>]) -> Result<Self> {
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|r| r.len() != cols) {
            return Err(LatticeError::WrongLength {
                expected: rows * cols,
                got: grid.iter().map(Vec::len).sum(),
            });
        }
        Self::new(rows, cols, grid.concat())
    }

    pub fn with_measured(mut self, measured: Vec<Option<f64>>) -> Result<Self> {
        if measured.len() != self.nodes.len() {
            return Err(LatticeError::WrongLength {
                expected: self.nodes.len(),
                got: measured.len(),
            });
        }
        for (node, m) in self.nodes.iter_mut().zip(measured) {
            node.measured_f01max = m.filter(|f| f.is_finite());
        }
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[QubitNode] {
        &self.nodes
    }

    pub fn id(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, id: usize) -> (usize, usize) {
        (id / self.cols, id % self.cols)
    }

    /// All 4-neighbour edges: horizontal ones row by row, then vertical ones.
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges =
            Vec::with_capacity(self.rows * (self.cols - 1) + self.cols * (self.rows - 1));
        for r in 0..self.rows {
            for c in 0..self.cols - 1 {
                edges.push(Edge {
                    a: self.id(r, c),
                    b: self.id(r, c + 1),
                });
            }
        }
        for r in 0..self.rows - 1 {
            for c in 0..self.cols {
                edges.push(Edge {
                    a: self.id(r, c),
                    b: self.id(r + 1, c),
                });
            }
        }
        edges
    }

    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let (r, c) = self.coords(id);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(self.id(r - 1, c));
        }
        if c > 0 {
            out.push(self.id(r, c - 1));
        }
        if c + 1 < self.cols {
            out.push(self.id(r, c + 1));
        }
        if r + 1 < self.rows {
            out.push(self.id(r + 1, c));
        }
        out
    }

    pub fn design_frequencies(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.design_f01max).collect()
    }

    /// Measured frequencies, or an error listing every node without one.
    pub fn measured_frequencies(&self) -> Result<Vec<f64>> {
        let missing: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].measured_f01max.is_none())
            .collect();
        if !missing.is_empty() {
            return Err(LatticeError::MissingFrequencies { nodes: missing });
        }
        Ok(self
            .nodes
            .iter()
            .filter_map(|n| n.measured_f01max)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDetuning {
    pub edge: Edge,
    /// `f(a) - f(b)`.
    pub signed: f64,
    /// `f(high) - f(low)`.
    pub abs: f64,
    pub modulated: usize,
    /// Equal endpoint frequencies; `modulated` falls back to the lower id.
    pub tie: bool,
    pub in_window: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningReport {
    pub edges: Vec<EdgeDetuning>,
    /// Number of edges each qubit modulates.
    pub modulated_counts: Vec<usize>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl DetuningReport {
    pub fn all_in_window(&self) -> bool {
        self.edges.iter().all(|e| e.in_window != Some(false))
    }

    pub fn violations(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .filter(|e| e.in_window == Some(false))
            .map(|e| e.edge)
            .collect()
    }
}

/// Per-edge detunings of `freqs` on `lattice`, optionally checked against a
/// window.
pub fn edge_detunings(
    lattice: &QubitLattice,
    freqs: &[f64],
    window: Option<Window>,
) -> Result<DetuningReport> {
    if freqs.len() != lattice.len() {
        return Err(LatticeError::WrongLength {
            expected: lattice.len(),
            got: freqs.len(),
        });
    }
    let missing: Vec<usize> = (0..freqs.len())
        .filter(|&i| !freqs[i].is_finite())
        .collect();
    if !missing.is_empty() {
        return Err(LatticeError::MissingFrequencies { nodes: missing });
    }
    let mut modulated_counts = vec![0; lattice.len()];
    let edges: Vec<EdgeDetuning> = lattice
        .edges()
        .into_iter()
        .map(|edge| {
            let signed = freqs[edge.a] - freqs[edge.b];
            let tie = signed == 0.0;
            let modulated = if signed >= 0.0 { edge.a } else { edge.b };
            modulated_counts[modulated] += 1;
            EdgeDetuning {
                edge,
                signed,
                abs: signed.abs(),
                modulated,
                tie,
                in_window: window.map(|w| w.contains(signed)),
            }
        })
        .collect();
    let abs: Vec<f64> = edges.iter().map(|e| e.abs).collect();
    Ok(DetuningReport {
        median: median(&abs).unwrap_or(0.0),
        min: abs.iter().copied().fold(f64::INFINITY, f64::min),
        max: abs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        edges,
        modulated_counts,
    })
}

/// At most this many gates may be driven by modulating one qubit.
pub const MAX_MODULATED_EDGES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationAssignment {
    pub counts: Vec<usize>,
    pub max_count: usize,
    /// Qubits modulating more than [`MAX_MODULATED_EDGES`] edges.
    pub overloaded: Vec<usize>,
    pub valid: bool,
}

pub fn modulation_assignment(report: &DetuningReport) -> ModulationAssignment {
    let counts = report.modulated_counts.clone();
    let overloaded: Vec<usize> = (0..counts.len())
        .filter(|&i| counts[i] > MAX_MODULATED_EDGES)
        .collect();
    ModulationAssignment {
        max_count: counts.iter().copied().max().unwrap_or(0),
        valid: overloaded.is_empty(),
        overloaded,
        counts,
    }
}

/// Removes each chip's mean deviation.
pub fn subtract_global_offset(chips: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if chips.is_empty() {
        return Err(LatticeError::NoChips);
    }
    chips
        .iter()
        .enumerate()
        .map(|(i, chip)| {
            if chip.is_empty() {
                return Err(LatticeError::EmptyChip(i));
            }
            let m = chip.iter().sum::<f64>() / chip.len() as f64;
            Ok(chip.iter().map(|x| x - m).collect())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub fit: GaussianFit,
    /// `sigma` as a percentage of the mean design frequency.
    pub percent_of_design: f64,
}

/// Gaussian fit to the pooled, per-chip-centred deviations.
pub fn spread_after_centering(chips: &[Vec<f64>], mean_design_mhz: f64) -> Result<SpreadReport> {
    let pooled: Vec<f64> = subtract_global_offset(chips)?.concat();
    let fit = fit_gaussian(&pooled)?;
    Ok(SpreadReport {
        fit,
        percent_of_design: 100.0 * fit.sigma / mean_design_mhz,
    })
}

/// Spread of a detuning whose endpoints carry independent frequency errors
/// of width `sigma_f`.
pub fn detuning_error_sigma(sigma_f: f64) -> Result<f64> {
    if !(sigma_f >= 0.0) {
        return Err(LatticeError::Negative {
            name: "sigma_f",
            value: sigma_f,
        });
    }
    Ok(std::f64::consts::SQRT_2 * sigma_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub mean: f64,
    pub sigma: f64,
}

/// Statistics of `measured.signed - design.signed` over matching edges.
pub fn detuning_deviation_stats(
    measured: &DetuningReport,
    design: &DetuningReport,
) -> Result<DeviationStats> {
    if measured.edges.len() != design.edges.len()
        || measured
            .edges
            .iter()
            .zip(&design.edges)
            .any(|(m, d)| m.edge != d.edge)
    {
        return Err(LatticeError::EdgeMismatch);
    }
    let diffs: Vec<f64> = measured
        .edges
        .iter()
        .zip(&design.edges)
        .map(|(m, d)| m.signed - d.signed)
        .collect();
    Ok(DeviationStats {
        mean: diffs.iter().sum::<f64>() / diffs.len().max(1) as f64,
        sigma: population_sigma(&diffs).unwrap_or(0.0),
    })
}
