//! Room-temperature resistance model of a single tunable-transmon qubit.
//!
//! The two junctions of the SQUID are lumped into one resistance. Pulsing
//! raises it by a random positive step; after the last pulse it keeps drifting
//! upward following a continuous piecewise power law in time (relaxation over
//! hours, aging over days).

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JunctionError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("time must be non-negative, got {0} hr")]
    NegativeTime(f64),
}

pub type Result<T> = std::result::Result<T, JunctionError>;

/// Per-qubit relaxation fraction distribution, truncated at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxFractionModel {
    pub mean: f64,
    pub sigma: f64,
}

impl Default for RelaxFractionModel {
    fn default() -> Self {
        Self {
            mean: 0.0289,
            sigma: 0.0030,
        }
    }
}

/// As-fabricated resistance spread.
///
/// `mean_offset_frac` is relative to `design_resistance`. The default
/// corresponds to fabricating 8.7% below a target that itself sits at 98% of
/// design: `0.98 * (1 - 0.087) - 1`. `sigma_frac` is the coefficient of
/// variation around the fabricated mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FabricationModel {
    pub design_resistance: f64,
    pub mean_offset_frac: f64,
    pub sigma_frac: f64,
    pub relax_fraction: RelaxFractionModel,
}

pub const DEFAULT_MEAN_OFFSET_FRAC: f64 = 0.98 * (1.0 - 0.087) - 1.0;
pub const DEFAULT_SIGMA_FRAC: f64 = 0.035;

impl FabricationModel {
    pub fn new(design_resistance: f64) -> Self {
        Self {
            design_resistance,
            mean_offset_frac: DEFAULT_MEAN_OFFSET_FRAC,
            sigma_frac: DEFAULT_SIGMA_FRAC,
            relax_fraction: RelaxFractionModel::default(),
        }
    }

    pub fn with_offset(mut self, mean_offset_frac: f64, sigma_frac: f64) -> Self {
        self.mean_offset_frac = mean_offset_frac;
        self.sigma_frac = sigma_frac;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.design_resistance > 0.0) || !self.design_resistance.is_finite() {
            return Err(JunctionError::InvalidModel(format!(
                "design resistance must be positive, got {}",
                self.design_resistance
            )));
        }
        if !(self.sigma_frac >= 0.0) {
            return Err(JunctionError::InvalidModel(format!(
                "sigma_frac must be >= 0, got {}",
                self.sigma_frac
            )));
        }
        if !(1.0 + self.mean_offset_frac > 0.0) {
            return Err(JunctionError::InvalidModel(format!(
                "mean offset {} leaves a non-positive mean resistance",
                self.mean_offset_frac
            )));
        }
        let rf = self.relax_fraction;
        if !(rf.sigma >= 0.0) || !(rf.mean >= 0.0) || !rf.mean.is_finite() {
            return Err(JunctionError::InvalidModel(format!(
                "relaxation fraction needs mean >= 0 and sigma >= 0, got {} / {}",
                rf.mean, rf.sigma
            )));
        }
        Ok(())
    }

    pub fn mean_resistance(&self) -> f64 {
        self.design_resistance * (1.0 + self.mean_offset_frac)
    }

    /// Draws one as-fabricated qubit.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<JunctionState> {
        self.validate()?;
        let resistance = truncated_normal(
            rng,
            self.mean_resistance(),
            self.mean_resistance() * self.sigma_frac,
            |x| x > 0.0,
        );
        let relax = truncated_normal(
            rng,
            self.relax_fraction.mean,
            self.relax_fraction.sigma,
            |x| x >= 0.0,
        );
        Ok(JunctionState::new(resistance, relax))
    }
}

/// Rejection-samples a normal until `accept` holds. A zero sigma returns the
/// mean unchanged.
fn truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sigma: f64,
    accept: impl Fn(f64) -> bool,
) -> f64 {
    if sigma == 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, sigma).expect("validated sigma");
    loop {
        let x = normal.sample(rng);
        if accept(x) {
            return x;
        }
    }
}

/// `sample_fabricated`: seeded convenience over [`FabricationModel::sample`].
pub fn sample_fabricated(fab: &FabricationModel, seed: u64) -> Result<JunctionState> {
    fab.sample(&mut crate::seed::rng_from_seed(seed))
}

/// Continuous piecewise power law `s(t)` describing relaxation after the last
/// pulse, normalised so that `s(probe_delay_hr) == 1`.
///
/// Regime `k` covers `[breakpoints[k-1], breakpoints[k])` and grows as
/// `t^exponents[k]`; amplitudes are chained so the curve is continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RelaxationProfileSpec", into = "RelaxationProfileSpec")]
pub struct RelaxationProfile {
    breakpoints_hr: Vec<f64>,
    exponents: Vec<f64>,
    probe_delay_hr: f64,
    /// ln of the (unnormalised) amplitude of each regime.
    log_amplitudes: Vec<f64>,
    /// ln s_unnormalised(probe_delay_hr).
    log_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RelaxationProfileSpec {
    breakpoints_hr: Vec<f64>,
    exponents: Vec<f64>,
    probe_delay_hr: f64,
}

impl TryFrom<RelaxationProfileSpec> for RelaxationProfile {
    type Error = JunctionError;
    fn try_from(spec: RelaxationProfileSpec) -> Result<Self> {
        Self::new(spec.breakpoints_hr, spec.exponents, spec.probe_delay_hr)
    }
}

impl From<RelaxationProfile> for RelaxationProfileSpec {
    fn from(p: RelaxationProfile) -> Self {
        Self {
            breakpoints_hr: p.breakpoints_hr,
            exponents: p.exponents,
            probe_delay_hr: p.probe_delay_hr,
        }
    }
}

impl Default for RelaxationProfile {
    /// Short, intermediate and long relaxation regimes split at 0.2 hr and
    /// 2 hr, followed by day-scale aging from 24 hr on.
    fn default() -> Self {
        Self::new(vec![0.2, 2.0, 24.0], vec![0.30, 0.24, 0.16, 0.11], 5.0)
            .expect("default profile is valid")
    }
}

impl RelaxationProfile {
    pub fn new(breakpoints_hr: Vec<f64>, exponents: Vec<f64>, probe_delay_hr: f64) -> Result<Self> {
        if exponents.len() != breakpoints_hr.len() + 1 {
            return Err(JunctionError::InvalidModel(format!(
                "{} breakpoints need {} exponents, got {}",
                breakpoints_hr.len(),
                breakpoints_hr.len() + 1,
                exponents.len()
            )));
        }
        if breakpoints_hr.iter().any(|b| !(*b > 0.0) || !b.is_finite())
            || breakpoints_hr.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(JunctionError::InvalidModel(
                "breakpoints must be positive and strictly increasing".into(),
            ));
        }
        if exponents.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(JunctionError::InvalidModel(
                "exponents must lie in (0, 1)".into(),
            ));
        }
        if !(probe_delay_hr > 0.0) || !probe_delay_hr.is_finite() {
            return Err(JunctionError::InvalidModel(
                "probe delay must be positive".into(),
            ));
        }
        let mut log_amplitudes = Vec::with_capacity(exponents.len());
        log_amplitudes.push(0.0);
        for (k, b) in breakpoints_hr.iter().enumerate() {
            let prev = log_amplitudes[k];
            log_amplitudes.push(prev + (exponents[k] - exponents[k + 1]) * b.ln());
        }
        let mut profile = Self {
            breakpoints_hr,
            exponents,
            probe_delay_hr,
            log_amplitudes,
            log_norm: 0.0,
        };
        profile.log_norm = profile.log_unnormalised(probe_delay_hr);
        Ok(profile)
    }

    /// Three regimes only (no day-scale aging regime), as used for short
    /// relaxation traces.
    pub fn three_regime() -> Self {
        Self::new(vec![0.2, 2.0], vec![0.30, 0.24, 0.16], 5.0).expect("valid")
    }

    pub fn breakpoints_hr(&self) -> &[f64] {
        &self.breakpoints_hr
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn probe_delay_hr(&self) -> f64 {
        self.probe_delay_hr
    }

    fn regime(&self, t: f64) -> usize {
        self.breakpoints_hr.partition_point(|b| *b <= t)
    }

    fn log_unnormalised(&self, t: f64) -> f64 {
        let k = self.regime(t);
        self.log_amplitudes[k] + self.exponents[k] * t.ln()
    }

    /// Normalised profile `s(t)`; `s(0) = 0`, `s(probe_delay) = 1`.
    pub fn shape(&self, t_hr: f64) -> Result<f64> {
        if !(t_hr >= 0.0) {
            return Err(JunctionError::NegativeTime(t_hr));
        }
        if t_hr == 0.0 {
            return Ok(0.0);
        }
        Ok((self.log_unnormalised(t_hr) - self.log_norm).exp())
    }

    /// Relaxation shift `rho * r_stop * s(t)` after the last pulse.
    pub fn delta(&self, rho: f64, r_stop: f64, t_hr: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(JunctionError::InvalidModel(format!(
                "rho must be >= 0, got {rho}"
            )));
        }
        if !(r_stop > 0.0) {
            return Err(JunctionError::InvalidModel(format!(
                "stop resistance must be positive, got {r_stop}"
            )));
        }
        Ok(rho * r_stop * self.shape(t_hr)?)
    }
}

/// `relaxation_delta` in free-function form.
pub fn relaxation_delta(
    profile: &RelaxationProfile,
    rho: f64,
    r_stop: f64,
    t_hr: f64,
) -> Result<f64> {
    profile.delta(rho, r_stop, t_hr)
}

/// Sampling of a synthetic relaxation measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub rho: f64,
    pub r_stop: f64,
    pub t_min_hr: f64,
    pub t_max_hr: f64,
    pub points: usize,
    /// Relative Gaussian noise on each shift.
    pub noise_frac: f64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            rho: 0.03,
            r_stop: 7711.0,
            t_min_hr: 0.01,
            t_max_hr: 15.0,
            points: 1000,
            noise_frac: 0.02,
        }
    }
}

/// `(t, shift)` pairs on a log-spaced time grid.
pub fn relaxation_trace(
    profile: &RelaxationProfile,
    spec: &TraceSpec,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if spec.points < 2 || !(spec.t_min_hr > 0.0) || !(spec.t_max_hr > spec.t_min_hr) {
        return Err(JunctionError::InvalidModel(format!(
            "trace needs >= 2 points over 0 < t_min < t_max, got {} over [{}, {}]",
            spec.points, spec.t_min_hr, spec.t_max_hr
        )));
    }
    if !(spec.noise_frac >= 0.0) {
        return Err(JunctionError::InvalidModel(format!(
            "noise must be >= 0, got {}",
            spec.noise_frac
        )));
    }
    let mut rng = crate::seed::rng_from_seed(seed);
    let jitter = Normal::new(0.0, spec.noise_frac)
        .map_err(|e| JunctionError::InvalidModel(e.to_string()))?;
    let ratio = spec.t_max_hr / spec.t_min_hr;
    (0..spec.points)
        .map(|i| {
            let t = spec.t_min_hr * ratio.powf(i as f64 / (spec.points - 1) as f64);
            let y = profile.delta(spec.rho, spec.r_stop, t)?;
            Ok((t, y * (1.0 + jitter.sample(&mut rng))))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDistribution {
    Exponential,
    Uniform,
    Constant,
}

/// Per-pulse resistance increment.
///
/// `Uniform` draws from `[lower, upper]`, defaulting to `(0, 2 * mean_step]`.
/// `Exponential` may be clipped to `[lower, upper]` by resampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepModel {
    pub distribution: StepDistribution,
    pub mean_step: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Default for StepModel {
    fn default() -> Self {
        Self::exponential(1.9)
    }
}

impl StepModel {
    pub fn exponential(mean_step: f64) -> Self {
        Self {
            distribution: StepDistribution::Exponential,
            mean_step,
            lower: None,
            upper: None,
        }
    }

    pub fn constant(step: f64) -> Self {
        Self {
            distribution: StepDistribution::Constant,
            mean_step: step,
            lower: None,
            upper: None,
        }
    }

    pub fn uniform(lower: f64, upper: f64) -> Self {
        Self {
            distribution: StepDistribution::Uniform,
            mean_step: 0.5 * (lower + upper),
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_step > 0.0) || !self.mean_step.is_finite() {
            return Err(JunctionError::InvalidModel(format!(
                "mean step must be positive, got {}",
                self.mean_step
            )));
        }
        let lo = self.lower.unwrap_or(0.0);
        let hi = self.upper.unwrap_or(f64::INFINITY);
        if lo < 0.0 || hi <= lo {
            return Err(JunctionError::InvalidModel(format!(
                "step bounds [{lo}, {hi}] are empty or negative"
            )));
        }
        Ok(())
    }

    /// Draws one strictly positive step.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.distribution {
            StepDistribution::Constant => self.mean_step,
            StepDistribution::Uniform => {
                let lo = self.lower.unwrap_or(0.0);
                let hi = self.upper.unwrap_or(2.0 * self.mean_step);
                loop {
                    let x = rng.random_range(lo..=hi);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
            StepDistribution::Exponential => {
                let exp = Exp::new(1.0 / self.mean_step).expect("validated mean step");
                let lo = self.lower.unwrap_or(0.0);
                let hi = self.upper.unwrap_or(f64::INFINITY);
                loop {
                    let x: f64 = exp.sample(rng);
                    if x > 0.0 && x >= lo && x <= hi {
                        return x;
                    }
                }
            }
        }
    }
}

/// Additive Gaussian read-out noise on resistance probes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub noise_sigma: f64,
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) {
            return Err(JunctionError::InvalidModel(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// One qubit's true resistance and its post-pulse trajectory parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionState {
    pub resistance: f64,
    pub relax_fraction: f64,
    pub resistance_at_last_pulse: f64,
    pub hours_since_last_pulse: f64,
    pub pulse_count: u64,
}

impl JunctionState {
    pub fn new(resistance: f64, relax_fraction: f64) -> Self {
        Self {
            resistance,
            relax_fraction,
            resistance_at_last_pulse: resistance,
            hours_since_last_pulse: 0.0,
            pulse_count: 0,
        }
    }

    /// Raises the resistance by one sampled step and restarts the relaxation
    /// clock. Relaxation accumulated since the previous pulse is kept.
    pub fn apply_pulse<R: Rng + ?Sized>(&self, step: &StepModel, rng: &mut R) -> Self {
        let r = self.resistance + step.sample(rng);
        Self {
            resistance: r,
            relax_fraction: self.relax_fraction,
            resistance_at_last_pulse: r,
            hours_since_last_pulse: 0.0,
            pulse_count: self.pulse_count + 1,
        }
    }

    /// Lets `dt_hr` hours pass. Junctions that were never pulsed do not drift.
    pub fn advance_time(&self, profile: &RelaxationProfile, dt_hr: f64) -> Result<Self> {
        if !(dt_hr >= 0.0) {
            return Err(JunctionError::NegativeTime(dt_hr));
        }
        let t = self.hours_since_last_pulse + dt_hr;
        let resistance = if self.pulse_count == 0 {
            self.resistance
        } else {
            self.resistance_at_last_pulse
                + profile.delta(self.relax_fraction, self.resistance_at_last_pulse, t)?
        };
        Ok(Self {
            resistance,
            hours_since_last_pulse: t,
            ..*self
        })
    }

    /// Probes the resistance without disturbing the junction.
    pub fn measure<R: Rng + ?Sized>(&self, meas: &MeasurementModel, rng: &mut R) -> f64 {
        if meas.noise_sigma == 0.0 {
            return self.resistance;
        }
        let noise = Normal::new(0.0, meas.noise_sigma).expect("validated noise");
        self.resistance + noise.sample(rng)
    }
}

pub fn apply_pulse(state: &JunctionState, step: &StepModel, seed: u64) -> JunctionState {
    state.apply_pulse(step, &mut crate::seed::rng_from_seed(seed))
}

pub fn advance_time(
    state: &JunctionState,
    profile: &RelaxationProfile,
    dt_hr: f64,
) -> Result<JunctionState> {
    state.advance_time(profile, dt_hr)
}

pub fn measure_resistance(state: &JunctionState, meas: &MeasurementModel, seed: u64) -> f64 {
    state.measure(meas, &mut crate::seed::rng_from_seed(seed))
}
