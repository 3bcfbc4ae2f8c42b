//! Detuning-edge yield of tiled lattices.
//!
//! A 3x3 unit cell is tiled by pure translation, so besides its 12 internal
//! edges it must also satisfy the 6 stitching edges that appear between
//! copies: `f[r][2]` next to `f[r][0]` and `f[2][c]` next to `f[0][c]`.
//! Chip yield is the probability that every edge |detuning| stays inside the
//! yield window after independent Gaussian frequency errors.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeError, QubitLattice, Window};
use crate::seed::{derive_seed, rng_from_seed, trial_rng};
use crate::stats::{wilson_interval, Z_95};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum YieldError {
    #[error("no unit cell found for window [{lo}, {hi}] within {restarts} restart(s)")]
    SearchFailed { lo: f64, hi: f64, restarts: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unit cell violates {} constraint(s)", .0.len())]
    InvalidCell(Vec<CellViolation>),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

pub type Result<T> = std::result::Result<T, YieldError>;

/// Design window with 20 MHz buffers inside the yield window.
pub const DESIGN_WINDOW: Window = Window {
    lo: 40.0,
    hi: 110.0,
};
pub const YIELD_WINDOW: Window = Window {
    lo: 20.0,
    hi: 130.0,
};
pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DICE_PER_WAFER: u32 = 212;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Internal,
    Stitching,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellViolation {
    pub kind: ConstraintKind,
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub detuning: f64,
}

/// Lists every internal and stitching pair of a 3x3 cell whose |detuning|
/// falls outside `window`.
pub fn check_unit_cell(offsets: &[[f64; 3]; 3], window: Window) -> Vec<CellViolation> {
    let mut pairs = Vec::with_capacity(18);
    for r in 0..3 {
        for c in 0..2 {
            pairs.push((ConstraintKind::Internal, (r, c), (r, c + 1)));
        }
    }
    for r in 0..2 {
        for c in 0..3 {
            pairs.push((ConstraintKind::Internal, (r, c), (r + 1, c)));
        }
    }
    for i in 0..3 {
        pairs.push((ConstraintKind::Stitching, (i, 2), (i, 0)));
        pairs.push((ConstraintKind::Stitching, (2, i), (0, i)));
    }
    pairs
        .into_iter()
        .filter_map(|(kind, from, to)| {
            let detuning = offsets[from.0][from.1] - offsets[to.0][to.1];
            (!window.contains(detuning)).then_some(CellViolation {
                kind,
                from,
                to,
                detuning,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCellDesign {
    pub base_frequency_mhz: f64,
    pub offsets_mhz: [[f64; 3]; 3],
    pub design_window: Window,
}

impl UnitCellDesign {
    /// Cell checked against `design_window`.
    pub fn new(
        base_frequency_mhz: f64,
        offsets_mhz: [[f64; 3]; 3],
        design_window: Window,
    ) -> Result<Self> {
        let violations = check_unit_cell(&offsets_mhz, design_window);
        if !violations.is_empty() {
            return Err(YieldError::InvalidCell(violations));
        }
        Ok(Self {
            base_frequency_mhz,
            offsets_mhz,
            design_window,
        })
    }

    pub fn frequency(&self, row: usize, col: usize) -> f64 {
        self.base_frequency_mhz + self.offsets_mhz[row % 3][col % 3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCellSearch {
    pub window: Window,
    pub grid_step: f64,
    pub max_offset: f64,
    pub restarts: usize,
    /// Search nodes per restart before giving up on that ordering.
    pub node_budget: usize,
}

impl UnitCellSearch {
    pub fn new(window: Window) -> Self {
        Self {
            window,
            grid_step: 10.0,
            max_offset: 250.0,
            restarts: 64,
            node_budget: 200_000,
        }
    }
}

/// Random valid cell on the default grid (10 MHz steps over 0..=250 MHz).
pub fn generate_unit_cell(window: Window, seed: u64) -> Result<UnitCellDesign> {
    search_unit_cell(&UnitCellSearch::new(window), seed)
}

pub fn search_unit_cell(search: &UnitCellSearch, seed: u64) -> Result<UnitCellDesign> {
    if !(search.grid_step > 0.0) || !(search.max_offset >= 0.0) || search.restarts == 0 {
        return Err(YieldError::InvalidConfig(format!(
            "grid_step {} and max_offset {} must be positive, restarts >= 1",
            search.grid_step, search.max_offset
        )));
    }
    let levels = (search.max_offset / search.grid_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=levels).map(|i| i as f64 * search.grid_step).collect();
    let failed = || YieldError::SearchFailed {
        lo: search.window.lo,
        hi: search.window.hi,
        restarts: search.restarts,
    };
    for restart in 0..search.restarts {
        let mut rng = rng_from_seed(derive_seed(seed, &(restart as u64).to_le_bytes()));
        let orders: Vec<Vec<f64>> = (0..9)
            .map(|_| {
                let mut g = grid.clone();
                g.shuffle(&mut rng);
                g
            })
            .collect();
        let mut cell = [[0.0; 3]; 3];
        let mut nodes = 0usize;
        match place(0, &mut cell, &orders, search, &mut nodes) {
            Placement::Found => return UnitCellDesign::new(0.0, cell, search.window),
            // the ordering was exhausted, so no cell exists on this grid
            Placement::Exhausted => return Err(failed()),
            Placement::OutOfBudget => continue,
        }
    }
    Err(failed())
}

enum Placement {
    Found,
    Exhausted,
    OutOfBudget,
}

fn place(
    pos: usize,
    cell: &mut [[f64; 3]; 3],
    orders: &[Vec<f64>],
    search: &UnitCellSearch,
    nodes: &mut usize,
) -> Placement {
    if pos == 9 {
        return Placement::Found;
    }
    let (r, c) = (pos / 3, pos % 3);
    for &v in &orders[pos] {
        *nodes += 1;
        if *nodes > search.node_budget {
            return Placement::OutOfBudget;
        }
        let w = search.window;
        let ok = (c == 0 || w.contains(v - cell[r][c - 1]))
            && (r == 0 || w.contains(v - cell[r - 1][c]))
            && (c < 2 || w.contains(v - cell[r][0]))
            && (r < 2 || w.contains(v - cell[0][c]));
        if !ok {
            continue;
        }
        cell[r][c] = v;
        match place(pos + 1, cell, orders, search, nodes) {
            Placement::Exhausted => {}
            done => return done,
        }
    }
    Placement::Exhausted
}

/// (3m)x(3n) lattice of translated copies of `cell`.
pub fn tile(cell: &UnitCellDesign, m: usize, n: usize) -> Result<QubitLattice> {
    if m == 0 || n == 0 {
        return Err(YieldError::InvalidConfig(format!(
            "tiling must be at least 1x1, got {m}x{n}"
        )));
    }
    let (rows, cols) = (3 * m, 3 * n);
    let freqs = (0..rows * cols)
        .map(|i| cell.frequency(i / cols, i % cols))
        .collect();
    Ok(QubitLattice::new(rows, cols, freqs)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldConfig {
    pub sigma_f: f64,
    pub window: Window,
    pub trials: u64,
    pub seed: u64,
    pub dice: u32,
}

impl YieldConfig {
    pub fn new(sigma_f: f64, seed: u64) -> Self {
        Self {
            sigma_f,
            window: YIELD_WINDOW,
            trials: DEFAULT_TRIALS,
            seed,
            dice: DICE_PER_WAFER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f >= 0.0) || !self.sigma_f.is_finite() {
            return Err(YieldError::InvalidConfig(format!(
                "sigma_f must be >= 0, got {}",
                self.sigma_f
            )));
        }
        if self.trials == 0 {
            return Err(YieldError::InvalidConfig("trials must be >= 1".into()));
        }
        if !(self.window.lo < self.window.hi) {
            return Err(YieldError::InvalidConfig(format!(
                "window [{}, {}] must have lo < hi",
                self.window.lo, self.window.hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldResult {
    pub yield_estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub passes: u64,
    pub trials: u64,
    pub qubits: usize,
    pub chips_per_wafer: u64,
    pub qubits_per_wafer: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaferProjection {
    pub chips: u64,
    pub qubits: u64,
}

pub fn wafer_projection(yield_estimate: f64, qubits_per_chip: usize, dice: u32) -> WaferProjection {
    let chips = (yield_estimate.clamp(0.0, 1.0) * f64::from(dice)).round() as u64;
    WaferProjection {
        chips,
        qubits: chips * qubits_per_chip as u64,
    }
}

const CHUNK: u64 = 1024;

/// Monte Carlo chip yield. Trial `i` draws its perturbations from
/// `trial_rng(seed, i)`, so the pass count does not depend on scheduling.
pub fn mc_chip_yield(lattice: &QubitLattice, config: &YieldConfig) -> Result<YieldResult> {
    config.validate()?;
    let design = lattice.design_frequencies();
    let edges: Vec<(usize, usize)> = lattice.edges().iter().map(|e| (e.a, e.b)).collect();
    let chunks = config.trials.div_ceil(CHUNK);
    let passes: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut f = vec![0.0; design.len()];
            let end = ((chunk + 1) * CHUNK).min(config.trials);
            (chunk * CHUNK..end)
                .filter(|&trial| {
                    let mut rng = trial_rng(config.seed, trial);
                    for (fi, d) in f.iter_mut().zip(&design) {
                        let z: f64 = rng.sample(StandardNormal);
                        *fi = d + config.sigma_f * z;
                    }
                    edges
                        .iter()
                        .all(|&(a, b)| config.window.contains(f[a] - f[b]))
                })
                .count() as u64
        })
        .sum();
    let yield_estimate = passes as f64 / config.trials as f64;
    let (ci_lo, ci_hi) = wilson_interval(passes, config.trials, Z_95);
    let wafer = wafer_projection(yield_estimate, lattice.len(), config.dice);
    Ok(YieldResult {
        yield_estimate,
        ci_lo,
        ci_hi,
        passes,
        trials: config.trials,
        qubits: lattice.len(),
        chips_per_wafer: wafer.chips,
        qubits_per_wafer: wafer.qubits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldCurveRow {
    pub qubits: usize,
    pub sigma_mhz: f64,
    #[serde(rename = "yield")]
    pub yield_estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Yield over every (size, sigma) pair; `base.sigma_f` is ignored.
pub fn yield_curve(
    cell: &UnitCellDesign,
    sigmas: &[f64],
    sizes: &[(usize, usize)],
    base: &YieldConfig,
) -> Result<Vec<YieldCurveRow>> {
    let mut rows = Vec::with_capacity(sigmas.len() * sizes.len());
    for &(m, n) in sizes {
        let lattice = tile(cell, m, n)?;
        for &sigma in sigmas {
            let r = mc_chip_yield(
                &lattice,
                &YieldConfig {
                    sigma_f: sigma,
                    ..*base
                },
            )?;
            rows.push(YieldCurveRow {
                qubits: r.qubits,
                sigma_mhz: sigma,
                yield_estimate: r.yield_estimate,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::edge_detunings;

    const ADDITIVE: [[f64; 3]; 3] = [
        [0.0, 50.0, 100.0],
        [100.0, 150.0, 200.0],
        [50.0, 100.0, 150.0],
    ];

    fn additive() -> UnitCellDesign {
        UnitCellDesign::new(4600.0, ADDITIVE, DESIGN_WINDOW).unwrap()
    }

    #[test]
    fn additive_cell_is_valid() {
        assert!(check_unit_cell(&ADDITIVE, DESIGN_WINDOW).is_empty());
        let tight = Window::new(40.0, 40.0).unwrap();
        assert!(!check_unit_cell(&[[0.0, 40.0, 80.0]; 3], tight).is_empty());
    }

    #[test]
    fn checker_counts_stitching_separately() {
        // rows fine internally but the row wrap-around is 0
        let bad = [[0.0, 50.0, 0.0], [100.0, 150.0, 100.0], [50.0, 100.0, 50.0]];
        let v = check_unit_cell(&bad, DESIGN_WINDOW);
        assert!(v.iter().all(|x| x.kind == ConstraintKind::Stitching));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn over_constrained_window_fails() {
        let err = generate_unit_cell(Window::new(40.0, 40.0).unwrap(), 1).unwrap_err();
        assert!(matches!(err, YieldError::SearchFailed { .. }));
    }

    #[test]
    fn generated_cells_pass_checker() {
        for seed in 0..100 {
            let cell = generate_unit_cell(DESIGN_WINDOW, seed).unwrap();
            assert!(check_unit_cell(&cell.offsets_mhz, DESIGN_WINDOW).is_empty());
            for row in cell.offsets_mhz {
                for v in row {
                    assert!((0.0..=250.0).contains(&v) && v % 10.0 == 0.0);
                }
            }
        }
        assert_eq!(
            generate_unit_cell(DESIGN_WINDOW, 5).unwrap(),
            generate_unit_cell(DESIGN_WINDOW, 5).unwrap()
        );
    }

    #[test]
    fn tiling_sizes_and_stitching() {
        let cell = additive();
        let one = tile(&cell, 1, 1).unwrap();
        assert_eq!((one.len(), one.edges().len()), (9, 12));
        let two = tile(&cell, 1, 2).unwrap();
        assert_eq!((two.len(), two.edges().len()), (18, 27));
        for (m, n) in [(2, 3), (3, 2), (2, 6)] {
            let l = tile(&cell, m, n).unwrap();
            assert_eq!(
                l.edges().len(),
                (3 * m) * (3 * n - 1) + (3 * n) * (3 * m - 1)
            );
            let r = edge_detunings(&l, &l.design_frequencies(), Some(DESIGN_WINDOW)).unwrap();
            assert!(r.all_in_window());
            // stitching edges reproduce the cell's wrap-around detunings
            for e in &r.edges {
                let (ra, ca) = l.coords(e.edge.a);
                let (rb, cb) = l.coords(e.edge.b);
                let expected = cell.offsets_mhz[ra % 3][ca % 3] - cell.offsets_mhz[rb % 3][cb % 3];
                assert!((e.signed - expected).abs() < 1e-9);
            }
        }
        assert!(tile(&cell, 0, 1).is_err());
    }

    #[test]
    fn zero_sigma_yields_one() {
        let l = tile(&additive(), 1, 1).unwrap();
        let mut cfg = YieldConfig::new(0.0, 1);
        cfg.trials = 1000;
        let r = mc_chip_yield(&l, &cfg).unwrap();
        assert_eq!(r.yield_estimate, 1.0);
        assert!(r.ci_lo <= 1.0 && r.ci_hi == 1.0);
    }

    #[test]
    fn yield_matches_independent_edge_oracle() {
        // single edge: pass probability is a closed-form normal interval
        let l = QubitLattice::new(1, 2, vec![50.0, 0.0]).unwrap();
        let mut cfg = YieldConfig::new(18.4, 3);
        cfg.trials = 200_000;
        let r = mc_chip_yield(&l, &cfg).unwrap();
        let s = 18.4 * std::f64::consts::SQRT_2;
        let phi = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
        let p = (phi((130.0 - 50.0) / s) - phi((20.0 - 50.0) / s))
            + (phi((-20.0 - 50.0) / s) - phi((-130.0 - 50.0) / s));
        assert!(r.ci_lo <= p && p <= r.ci_hi, "{r:?} vs {p}");
    }

    // Abramowitz-Stegun 7.1.26, absolute error < 1.5e-7
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let y = 1.0
            - t * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))))
                * (-x * x).exp();
        y.copysign(x)
    }

    #[test]
    fn ci_shrinks_with_trials() {
        let l = tile(&additive(), 1, 1).unwrap();
        let mut small = YieldConfig::new(18.4, 9);
        small.trials = 1_000;
        let mut big = small;
        big.trials = 100_000;
        let a = mc_chip_yield(&l, &small).unwrap();
        let b = mc_chip_yield(&l, &big).unwrap();
        let ratio = (a.ci_hi - a.ci_lo) / (b.ci_hi - b.ci_lo);
        assert!((ratio - 10.0).abs() < 1.5, "{ratio}");
        assert!(a.ci_lo <= a.yield_estimate && a.yield_estimate <= a.ci_hi);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let l = tile(&additive(), 1, 2).unwrap();
        let mut cfg = YieldConfig::new(18.4, 42);
        cfg.trials = 20_000;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_chip_yield(&l, &cfg).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn wafer_projection_cases() {
        assert_eq!(
            wafer_projection(0.17, 9, 212),
            WaferProjection {
                chips: 36,
                qubits: 324
            }
        );
        assert_eq!(wafer_projection(0.86, 9, 212).chips, 182);
        assert_eq!(
            wafer_projection(0.0, 9, 212),
            WaferProjection {
                chips: 0,
                qubits: 0
            }
        );
    }

    #[test]
    fn invalid_configs() {
        let l = tile(&additive(), 1, 1).unwrap();
        let mut cfg = YieldConfig::new(1.0, 0);
        cfg.trials = 0;
        assert!(mc_chip_yield(&l, &cfg).is_err());
        let mut cfg = YieldConfig::new(-1.0, 0);
        cfg.trials = 10;
        assert!(mc_chip_yield(&l, &cfg).is_err());
    }

    #[test]
    fn curve_is_monotone_within_ci() {
        let mut base = YieldConfig::new(0.0, 17);
        base.trials = 20_000;
        let rows = yield_curve(
            &additive(),
            &[7.7, 12.0, 18.4],
            &[(1, 1), (1, 2), (2, 2)],
            &base,
        )
        .unwrap();
        let tol = |a: &YieldCurveRow, b: &YieldCurveRow| {
            3.0 * ((a.ci_hi - a.ci_lo) + (b.ci_hi - b.ci_lo)) / 2.0
        };
        for size in 0..3 {
            for s in 0..2 {
                let (a, b) = (&rows[size * 3 + s], &rows[size * 3 + s + 1]);
                assert!(
                    b.yield_estimate <= a.yield_estimate + tol(a, b),
                    "{a:?} {b:?}"
                );
            }
        }
        for s in 0..3 {
            for size in 0..2 {
                let (a, b) = (&rows[size * 3 + s], &rows[(size + 1) * 3 + s]);
                assert!(b.qubits > a.qubits);
                assert!(
                    b.yield_estimate <= a.yield_estimate + tol(a, b),
                    "{a:?} {b:?}"
                );
            }
        }
    }
}
