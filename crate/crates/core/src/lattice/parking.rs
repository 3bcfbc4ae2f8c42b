//! Minimal parking of qubits below f01max to fix detuning violations.
//!
//! Offsets are integer multiples of `step`. Plans are ranked
//! lexicographically by (parked qubits, largest |offset|, total |offset|) and
//! found by depth-first branch and bound with forward checking, which is exact.

use serde::{Deserialize, Serialize};

use super::{edge_detunings, Edge, LatticeError, QubitLattice, Result, Window};

/// Exact search is limited to lattices of this size.
pub const MAX_PARKING_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParkingOptions {
    pub window: Window,
    /// Largest allowed |offset| in MHz.
    pub max_park: f64,
    /// Offset granularity in MHz.
    pub step: f64,
    /// Also allow parking upward. Off by default since f01max is the top of
    /// the flux arc.
    pub symmetric: bool,
}

impl ParkingOptions {
    pub fn new(window: Window, max_park: f64, step: f64) -> Self {
        Self {
            window,
            max_park,
            step,
            symmetric: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.window.lo < self.window.hi) {
            return Err(LatticeError::InvalidParking(format!(
                "window [{}, {}] must have lo < hi",
                self.window.lo, self.window.hi
            )));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(LatticeError::InvalidParking(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.max_park >= 0.0) || !self.max_park.is_finite() {
            return Err(LatticeError::InvalidParking(format!(
                "max_park must be >= 0, got {}",
                self.max_park
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParkingPlan {
    /// Per-qubit frequency offset in MHz (negative means parked down).
    pub offsets: Vec<f64>,
    /// Frequencies after applying the offsets.
    pub parked_frequencies: Vec<f64>,
    pub parked: usize,
    pub max_offset: f64,
    pub sum_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParkingOutcome {
    Plan(ParkingPlan),
    /// No offsets within `max_park` satisfy the window. Lists the edges that
    /// violate it without parking.
    Infeasible {
        violating_edges: Vec<Edge>,
    },
}

type Cost = (usize, u64, u64);

struct Search<'a> {
    freqs: &'a [f64],
    neighbors: Vec<Vec<usize>>,
    window: Window,
    step: f64,
    best: Option<(Cost, Vec<i64>)>,
}

impl Search<'_> {
    fn freq(&self, node: usize, k: i64) -> f64 {
        self.freqs[node] + offset_of(k, self.step)
    }

    fn compatible(&self, a: usize, ka: i64, b: usize, kb: i64) -> bool {
        self.window.contains(self.freq(a, ka) - self.freq(b, kb))
    }

    fn lower_bound(&self, cost: Cost, domains: &[Vec<i64>], depth: usize) -> Cost {
        let (mut parked, mut max, mut sum) = cost;
        for d in &domains[depth..] {
            let m = d.iter().map(|k| k.unsigned_abs()).min().unwrap_or(0);
            if m > 0 {
                parked += 1;
                max = max.max(m);
                sum += m;
            }
        }
        (parked, max, sum)
    }

    fn dfs(&mut self, depth: usize, domains: &mut [Vec<i64>], assigned: &mut Vec<i64>, cost: Cost) {
        let n = self.freqs.len();
        if depth == n {
            if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                self.best = Some((cost, assigned.clone()));
            }
            return;
        }
        let candidates = domains[depth].clone();
        for k in candidates {
            let m = k.unsigned_abs();
            let next_cost = if m > 0 {
                (cost.0 + 1, cost.1.max(m), cost.2 + m)
            } else {
                cost
            };
            // forward check: prune later neighbours' domains against this value
            let mut pruned = domains.to_vec();
            let mut dead = false;
            for &u in &self.neighbors[depth] {
                if u <= depth {
                    continue;
                }
                pruned[u].retain(|&ku| self.compatible(depth, k, u, ku));
                if pruned[u].is_empty() {
                    dead = true;
                    break;
                }
            }
            if dead {
                continue;
            }
            let bound = self.lower_bound(next_cost, &pruned, depth + 1);
            if let Some((best, _)) = &self.best {
                if bound >= *best {
                    continue;
                }
            }
            assigned.push(k);
            self.dfs(depth + 1, &mut pruned, assigned, next_cost);
            assigned.pop();
        }
    }
}

fn offset_of(k: i64, step: f64) -> f64 {
    -(k as f64) * step
}

/// Finds the cheapest parking plan that puts every edge's |detuning| inside
/// `options.window`, using the lattice's measured frequencies.
pub fn optimize_parking(
    lattice: &QubitLattice,
    options: &ParkingOptions,
) -> Result<ParkingOutcome> {
    options.validate()?;
    let freqs = lattice.measured_frequencies()?;
    if lattice.len() > MAX_PARKING_QUBITS {
        return Err(LatticeError::TooLarge {
            max: MAX_PARKING_QUBITS,
            got: lattice.len(),
        });
    }
    let kmax = (options.max_park / options.step + 1e-9).floor() as i64;
    // k > 0 parks down by k steps; ordered by |k| so cheap values come first
    let mut values: Vec<i64> = if options.symmetric {
        (-kmax..=kmax).collect()
    } else {
        (0..=kmax).collect()
    };
    values.sort_by_key(|k| (k.unsigned_abs(), *k < 0));

    let n = lattice.len();
    let mut search = Search {
        freqs: &freqs,
        neighbors: (0..n).map(|i| lattice.neighbors(i)).collect(),
        window: options.window,
        step: options.step,
        best: None,
    };
    let mut domains = vec![values; n];
    if arc_consistent(&search, &mut domains) {
        let mut assigned = Vec::with_capacity(n);
        search.dfs(0, &mut domains, &mut assigned, (0, 0, 0));
    }

    match search.best {
        Some(((parked, max, sum), ks)) => {
            let offsets: Vec<f64> = ks.iter().map(|&k| offset_of(k, options.step)).collect();
            let parked_frequencies = freqs.iter().zip(&offsets).map(|(f, o)| f + o).collect();
            Ok(ParkingOutcome::Plan(ParkingPlan {
                offsets,
                parked_frequencies,
                parked,
                max_offset: max as f64 * options.step,
                sum_offset: sum as f64 * options.step,
            }))
        }
        None => {
            let report = edge_detunings(lattice, &freqs, Some(options.window))?;
            Ok(ParkingOutcome::Infeasible {
                violating_edges: report.violations(),
            })
        }
    }
}

/// AC-3 over the edge constraints. Returns false when a domain empties.
fn arc_consistent(search: &Search<'_>, domains: &mut [Vec<i64>]) -> bool {
    let n = domains.len();
    let mut queue: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| search.neighbors[i].iter().map(move |&j| (i, j)))
        .collect();
    while let Some((i, j)) = queue.pop() {
        let before = domains[i].len();
        let dj = domains[j].clone();
        domains[i].retain(|&ki| dj.iter().any(|&kj| search.compatible(i, ki, j, kj)));
        if domains[i].is_empty() {
            return false;
        }
        if domains[i].len() != before {
            for &m in &search.neighbors[i] {
                if m != j {
                    queue.push((m, i));
                }
            }
        }
    }
    true
}
