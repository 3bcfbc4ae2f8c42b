//! Resistance to frequency calibration and related fitting utilities.
//!
//! The maximum qubit frequency follows an empirical power law of the
//! room-temperature resistance, `f = beta * R^(-alpha)`. Fits are done as
//! straight lines in log-log space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{fit_line, mean, population_sigma};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("point {index} is not strictly positive: ({x}, {y})")]
    NonPositive { index: usize, x: f64, y: f64 },
    #[error("all abscissae coincide; the fit is degenerate")]
    Degenerate,
    #[error("segment {segment} has {got} points, need at least {needed}")]
    SparseSegment {
        segment: usize,
        got: usize,
        needed: usize,
    },
    #[error("no breakpoint placement leaves {needed} points in every segment")]
    NoFeasibleBreakpoints { needed: usize },
    #[error("invalid breakpoints: {0}")]
    InvalidBreakpoints(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("f_max {f_max} is below f_min {f_min}")]
    InvertedRange { f_max: f64, f_min: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(DomainError::NonPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(DomainError::Negative { name, value })
    }
}

/// `f[MHz] = beta * R[ohm]^(-alpha)`.
///
/// Serialises to the calibration JSON layout
/// `{beta, alpha, residual_sigma_mhz, r_min, r_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawModel {
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "residual_sigma_mhz")]
    pub residual_sigma: f64,
    pub r_min: f64,
    /// `null` in JSON when the domain is unbounded above.
    #[serde(with = "unbounded")]
    pub r_max: f64,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl PowerLawModel {
    /// Model without residual information or a fit domain.
    pub fn new(beta: f64, alpha: f64) -> Result<Self, DomainError> {
        let m = Self {
            beta,
            alpha,
            residual_sigma: 0.0,
            r_min: 0.0,
            r_max: f64::INFINITY,
        };
        m.validate()?;
        Ok(m)
    }

    /// Model with exponent `alpha` passing through `(r, f)`.
    pub fn anchored(alpha: f64, r: f64, f: f64) -> Result<Self, DomainError> {
        positive("resistance", r)?;
        positive("frequency", f)?;
        Self::new(f * r.powf(alpha), alpha)
    }

    /// Exact power law through two points with distinct resistances.
    pub fn through(p1: (f64, f64), p2: (f64, f64)) -> Result<Self, FitError> {
        for (index, &(r, f)) in [p1, p2].iter().enumerate() {
            if !(r > 0.0 && f > 0.0) {
                return Err(FitError::NonPositive { index, x: r, y: f });
            }
        }
        if p1.0 == p2.0 {
            return Err(FitError::Degenerate);
        }
        let alpha = -(p2.1.ln() - p1.1.ln()) / (p2.0.ln() - p1.0.ln());
        let beta = (p1.1.ln() + alpha * p1.0.ln()).exp();
        Ok(Self {
            beta,
            alpha,
            residual_sigma: 0.0,
            r_min: p1.0.min(p2.0),
            r_max: p1.0.max(p2.0),
        })
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        positive("beta", self.beta)?;
        positive("alpha", self.alpha)?;
        non_negative("residual sigma", self.residual_sigma)?;
        if !(self.r_min <= self.r_max) {
            return Err(DomainError::InvalidModel(format!(
                "fit domain [{}, {}] is empty",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }

    pub fn predict_f(&self, r: f64) -> Result<f64, DomainError> {
        Ok(self.beta * positive("resistance", r)?.powf(-self.alpha))
    }

    pub fn invert_r(&self, f: f64) -> Result<f64, DomainError> {
        Ok((self.beta / positive("frequency", f)?).powf(1.0 / self.alpha))
    }

    /// Frequency interval spanned by the fit domain (low, high).
    pub fn frequency_range(&self) -> (f64, f64) {
        let hi = if self.r_min > 0.0 {
            self.beta * self.r_min.powf(-self.alpha)
        } else {
            f64::INFINITY
        };
        let lo = if self.r_max.is_finite() {
            self.beta * self.r_max.powf(-self.alpha)
        } else {
            0.0
        };
        (lo, hi)
    }

    /// Whether `f` maps back inside the calibrated resistance domain.
    pub fn covers(&self, f: f64) -> bool {
        let (lo, hi) = self.frequency_range();
        f >= lo && f <= hi
    }
}

pub fn predict_f(model: &PowerLawModel, r: f64) -> Result<f64, DomainError> {
    model.predict_f(r)
}

pub fn invert_r(model: &PowerLawModel, f: f64) -> Result<f64, DomainError> {
    model.invert_r(f)
}

/// Least-squares power law on `(R, f)` pairs.
///
/// The line is fitted to `(ln R, ln f)`; `residual_sigma` is the population
/// standard deviation of the linear-frequency residuals against the curve.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawModel, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    for (index, &(r, f)) in points.iter().enumerate() {
        if !(r > 0.0 && f > 0.0 && r.is_finite() && f.is_finite()) {
            return Err(FitError::NonPositive { index, x: r, y: f });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let line = fit_line(&xs, &ys).ok_or(FitError::Degenerate)?;
    let alpha = -line.slope;
    let beta = line.intercept.exp();
    let residuals: Vec<f64> = points
        .iter()
        .map(|&(r, f)| f - beta * r.powf(-alpha))
        .collect();
    let (r_min, r_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    Ok(PowerLawModel {
        beta,
        alpha,
        residual_sigma: population_sigma(&residuals).unwrap_or(0.0),
        r_min,
        r_max,
    })
}

/// Samples of `model` at `resistances` with additive Gaussian frequency
/// noise of width `noise_mhz`.
pub fn synthetic_calibration(
    model: &PowerLawModel,
    resistances: &[f64],
    noise_mhz: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>, DomainError> {
    non_negative("noise", noise_mhz)?;
    let mut rng = crate::seed::rng_from_seed(seed);
    resistances
        .iter()
        .map(|&r| {
            let z: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
            Ok((r, model.predict_f(r)? + noise_mhz * z))
        })
        .collect()
}

/// Fractional pre-cooldown aging budget reserved by default.
pub const DEFAULT_AGING_BUDGET: f64 = 0.02;

/// Target resistance for a design frequency, leaving room for
/// `aging_budget` of further resistance increase before cooldown.
pub fn assign_target_r(
    model: &PowerLawModel,
    f_design: f64,
    aging_budget: f64,
) -> Result<f64, DomainError> {
    if !(aging_budget < 1.0) || !aging_budget.is_finite() {
        return Err(DomainError::InvalidModel(format!(
            "aging budget must be below 1, got {aging_budget}"
        )));
    }
    Ok(model.invert_r(f_design)? * (1.0 - aging_budget))
}

/// Frequency spread equivalent to a relative resistance spread:
/// `|df/dR| * sigma_R = alpha * f * sigma_R_rel`.
pub fn freq_equiv_sigma(
    model: &PowerLawModel,
    f_pred: f64,
    sigma_r_rel: f64,
) -> Result<f64, DomainError> {
    positive("frequency", f_pred)?;
    non_negative("relative resistance sigma", sigma_r_rel)?;
    Ok(model.alpha * f_pred * sigma_r_rel)
}

/// One regime of a segmented power law `y = amplitude * t^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSegment {
    pub exponent: f64,
    pub amplitude: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedPowerLaw {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<PowerSegment>,
    /// Largest `|ln left(b) - ln right(b)|` over the breakpoints.
    pub continuity_residual: f64,
    /// Total squared residual in `ln y`.
    pub sse: f64,
}

impl SegmentedPowerLaw {
    pub fn exponents(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.exponent).collect()
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|b| *b <= t);
        let s = &self.segments[k];
        s.amplitude * t.powf(s.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Breakpoints {
    Given(Vec<f64>),
    /// Exhaustive search over `candidates` log-spaced values per breakpoint.
    Auto {
        changepoints: usize,
        candidates: usize,
    },
}

impl Breakpoints {
    pub fn auto() -> Self {
        Self::Auto {
            changepoints: 2,
            candidates: 50,
        }
    }
}

pub const MIN_SEGMENT_POINTS: usize = 3;

/// Per-segment log-log fit of `(t, y)` data.
///
/// Segment `k` holds points with `breakpoints[k-1] <= t < breakpoints[k]`.
/// In auto mode the breakpoints minimising the total squared log residual
/// are picked from a log-spaced grid spanning the data.
pub fn fit_segmented_power_law(
    series: &[(f64, f64)],
    breakpoints: &Breakpoints,
) -> Result<SegmentedPowerLaw, FitError> {
    for (index, &(t, y)) in series.iter().enumerate() {
        if !(t > 0.0 && y > 0.0 && t.is_finite() && y.is_finite()) {
            return Err(FitError::NonPositive { index, x: t, y });
        }
    }
    let mut logs: Vec<(f64, f64)> = series.iter().map(|(t, y)| (t.ln(), y.ln())).collect();
    logs.sort_by(|a, b| a.0.total_cmp(&b.0));
    match breakpoints {
        Breakpoints::Given(bps) => {
            if bps.iter().any(|b| !(*b > 0.0)) || bps.windows(2).any(|w| w[1] <= w[0]) {
                return Err(FitError::InvalidBreakpoints(
                    "breakpoints must be positive and strictly increasing".into(),
                ));
            }
            let cuts: Vec<f64> = bps.iter().map(|b| b.ln()).collect();
            fit_with_cuts(&logs, &cuts, true).map(|(fit, _)| fit)
        }
        Breakpoints::Auto {
            changepoints,
            candidates,
        } => auto_fit(&logs, *changepoints, *candidates),
    }
}

/// Splits sorted log data at log-space `cuts` and fits each piece.
fn fit_with_cuts(
    logs: &[(f64, f64)],
    cuts: &[f64],
    strict: bool,
) -> Result<(SegmentedPowerLaw, f64), FitError> {
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0);
    for c in cuts {
        bounds.push(logs.partition_point(|p| p.0 < *c));
    }
    bounds.push(logs.len());
    let mut segments = Vec::with_capacity(cuts.len() + 1);
    let mut sse = 0.0;
    for (segment, w) in bounds.windows(2).enumerate() {
        let part = &logs[w[0]..w[1]];
        if part.len() < MIN_SEGMENT_POINTS {
            return Err(FitError::SparseSegment {
                segment,
                got: part.len(),
                needed: MIN_SEGMENT_POINTS,
            });
        }
        let xs: Vec<f64> = part.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = part.iter().map(|p| p.1).collect();
        let line = fit_line(&xs, &ys).ok_or(FitError::Degenerate)?;
        sse += line.sse;
        segments.push((line, part.len()));
    }
    if !strict {
        // auto mode only needs the objective
        return Ok((
            SegmentedPowerLaw {
                breakpoints: Vec::new(),
                segments: Vec::new(),
                continuity_residual: 0.0,
                sse,
            },
            sse,
        ));
    }
    let continuity_residual = cuts
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (l, _) = segments[k];
            let (r, _) = segments[k + 1];
            ((l.intercept + l.slope * c) - (r.intercept + r.slope * c)).abs()
        })
        .fold(0.0, f64::max);
    let fit = SegmentedPowerLaw {
        breakpoints: cuts.iter().map(|c| c.exp()).collect(),
        segments: segments
            .iter()
            .map(|(line, n)| PowerSegment {
                exponent: line.slope,
                amplitude: line.intercept.exp(),
                points: *n,
            })
            .collect(),
        continuity_residual,
        sse,
    };
    Ok((fit, sse))
}

fn auto_fit(
    logs: &[(f64, f64)],
    changepoints: usize,
    candidates: usize,
) -> Result<SegmentedPowerLaw, FitError> {
    let needed = MIN_SEGMENT_POINTS * (changepoints + 1);
    if logs.len() < needed {
        return Err(FitError::TooFewPoints {
            needed,
            got: logs.len(),
        });
    }
    if candidates < 2 {
        return Err(FitError::InvalidBreakpoints(
            "auto mode needs at least two candidates".into(),
        ));
    }
    let lo = logs[0].0;
    let hi = logs[logs.len() - 1].0;
    let grid: Vec<f64> = (0..candidates)
        .map(|i| lo + (hi - lo) * i as f64 / (candidates - 1) as f64)
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen = Vec::with_capacity(changepoints);
    search_cuts(logs, &grid, 0, changepoints, &mut chosen, &mut best);
    let (_, cuts) = best.ok_or(FitError::NoFeasibleBreakpoints {
        needed: MIN_SEGMENT_POINTS,
    })?;
    fit_with_cuts(logs, &cuts, true).map(|(fit, _)| fit)
}

fn search_cuts(
    logs: &[(f64, f64)],
    grid: &[f64],
    start: usize,
    remaining: usize,
    chosen: &mut Vec<f64>,
    best: &mut Option<(f64, Vec<f64>)>,
) {
    if remaining == 0 {
        if let Ok((_, sse)) = fit_with_cuts(logs, chosen, false) {
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                *best = Some((sse, chosen.clone()));
            }
        }
        return;
    }
    for i in start..grid.len() {
        chosen.push(grid[i]);
        search_cuts(logs, grid, i + 1, remaining - 1, chosen, best);
        chosen.pop();
    }
}

/// Maximum-likelihood normal fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
    pub sample_count: usize,
}

pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianFit, FitError> {
    if samples.len() < 2 {
        return Err(FitError::TooFewPoints {
            needed: 2,
            got: samples.len(),
        });
    }
    Ok(GaussianFit {
        mu: mean(samples).expect("non-empty"),
        sigma: population_sigma(samples).expect("non-empty"),
        sample_count: samples.len(),
    })
}

/// Root-sum-square of independent spreads.
pub fn compose_sigma(components: &[f64]) -> Result<f64, DomainError> {
    let mut acc = 0.0;
    for &c in components {
        non_negative("sigma component", c)?;
        acc += c * c;
    }
    Ok(acc.sqrt())
}

/// Independent contributions to the post-cooldown frequency spread, in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadBudget {
    /// Frequency equivalent of the resistance tuning precision.
    pub resistance_tuning: f64,
    /// Scatter of the resistance-frequency calibration.
    pub prediction_residual: f64,
    /// Uncertainty of the f01max measurement itself.
    pub measurement: f64,
    /// Everything else between trimming and cooldown (cleaning, packaging).
    pub pre_cooldown_extra: f64,
}

impl Default for SpreadBudget {
    fn default() -> Self {
        Self {
            resistance_tuning: 7.7,
            prediction_residual: 12.4,
            measurement: 4.0,
            pre_cooldown_extra: 10.5,
        }
    }
}

impl SpreadBudget {
    pub fn total(&self) -> Result<f64, DomainError> {
        compose_sigma(&[
            self.resistance_tuning,
            self.prediction_residual,
            self.measurement,
            self.pre_cooldown_extra,
        ])
    }
}

/// Frequency-normalised loss tangent `1 / (T1 * 2 pi f)` with `T1` in
/// microseconds and `f` in GHz.
pub fn loss_tangent(t1_us: f64, f_ghz: f64) -> Result<f64, DomainError> {
    let t1 = positive("T1", t1_us)? * 1e-6;
    let f = positive("frequency", f_ghz)? * 1e9;
    Ok(1.0 / (t1 * 2.0 * std::f64::consts::PI * f))
}

/// Flux tunability `f_max - f_min`.
pub fn tunability(f_max: f64, f_min: f64) -> Result<f64, DomainError> {
    if f_max < f_min {
        return Err(DomainError::InvertedRange { f_max, f_min });
    }
    Ok(f_max - f_min)
}
