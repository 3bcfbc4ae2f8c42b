//! Closed-loop resistance trimming.
//!
//! Each qubit is pulsed until a probe reads at or above its stop threshold.
//! The threshold sits below the target by the relaxation reserve, which the
//! junction then consumes while it relaxes before the final probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::junction::{
    FabricationModel, JunctionError, JunctionState, MeasurementModel, RelaxationProfile, StepModel,
};
use crate::seed::{qubit_seed, rng_from_seed};
use crate::stats::{population_sigma, Summary};

/// Default relaxation reserve: mean post-pulse relaxation at the probe time.
pub const DEFAULT_RESERVE: f64 = 0.0289;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuningError {
    #[error("invalid target for {qubit_id}: {reason}")]
    InvalidTarget { qubit_id: String, reason: String },
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("{} exceeded {max_pulses} pulses (reached {:.3} ohm, threshold {:.3})",
        .record.qubit_id, .record.r_last_pulse, .record.threshold)]
    MaxPulsesExceeded {
        max_pulses: u64,
        record: Box<QubitTuneRecord>,
    },
    #[error("{qubits} qubits but {targets} targets")]
    LengthMismatch { qubits: usize, targets: usize },
    #[error("position {position}: qubit {qubit_id} paired with target {target_id}")]
    IdMismatch {
        position: usize,
        qubit_id: String,
        target_id: String,
    },
    #[error("no tuning records")]
    Empty,
    #[error(transparent)]
    Junction(#[from] JunctionError),
}

pub type Result<T> = std::result::Result<T, TuningError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningTarget {
    pub qubit_id: String,
    pub target_resistance: f64,
    pub relaxation_reserve: f64,
}

impl TuningTarget {
    pub fn new(qubit_id: impl Into<String>, target_resistance: f64) -> Self {
        Self {
            qubit_id: qubit_id.into(),
            target_resistance,
            relaxation_reserve: DEFAULT_RESERVE,
        }
    }

    pub fn with_reserve(mut self, reserve: f64) -> Self {
        self.relaxation_reserve = reserve;
        self
    }

    fn invalid(&self, reason: impl Into<String>) -> TuningError {
        TuningError::InvalidTarget {
            qubit_id: self.qubit_id.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_resistance > 0.0) || !self.target_resistance.is_finite() {
            return Err(self.invalid(format!(
                "target resistance must be positive, got {}",
                self.target_resistance
            )));
        }
        if !(self.relaxation_reserve > -1.0) || !self.relaxation_reserve.is_finite() {
            return Err(self.invalid(format!(
                "relaxation reserve must exceed -1, got {}",
                self.relaxation_reserve
            )));
        }
        Ok(())
    }

    /// Stop threshold `R_T / (1 + reserve)`.
    pub fn threshold(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.target_resistance / (1.0 + self.relaxation_reserve))
    }
}

pub fn compute_threshold(target: &TuningTarget) -> Result<f64> {
    target.threshold()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub step: StepModel,
    pub measurement: MeasurementModel,
    pub profile: RelaxationProfile,
    pub probe_delay_hr: f64,
    /// Per-qubit generators are derived from this seed and the qubit id.
    pub seed: u64,
    pub max_pulses: u64,
}

impl CampaignConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            step: StepModel::default(),
            measurement: MeasurementModel::default(),
            profile: RelaxationProfile::default(),
            probe_delay_hr: 5.0,
            seed,
            max_pulses: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.probe_delay_hr >= 0.0) {
            return Err(TuningError::InvalidConfig(format!(
                "probe delay must be >= 0, got {}",
                self.probe_delay_hr
            )));
        }
        if self.max_pulses == 0 {
            return Err(TuningError::InvalidConfig("max_pulses must be > 0".into()));
        }
        self.step.validate()?;
        self.measurement.validate()?;
        Ok(())
    }
}

/// Outcome of trimming one qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitTuneRecord {
    pub qubit_id: String,
    pub r_target: f64,
    pub r_untuned: f64,
    pub threshold: f64,
    /// First probe reading at or above the threshold (`R_a`).
    pub r_last_pulse: f64,
    pub r_tuned: f64,
    pub pulses: u64,
    /// The untuned resistance already met the threshold; nothing was done.
    pub already_above: bool,
}

impl QubitTuneRecord {
    pub fn overshoot(&self) -> f64 {
        self.r_last_pulse - self.threshold
    }

    /// Fractional relaxation `(r_tuned - R_a) / R_a`.
    pub fn relax_fraction(&self) -> f64 {
        (self.r_tuned - self.r_last_pulse) / self.r_last_pulse
    }

    pub fn tuning_distance(&self) -> f64 {
        (self.r_last_pulse - self.r_untuned) / self.r_untuned
    }

    pub fn precision(&self) -> f64 {
        (self.r_tuned - self.r_target) / self.r_target
    }
}

/// Pulses `state` until it reads at or above the target threshold, waits the
/// probe delay and probes again.
///
/// `rng` drives both the pulse steps and the measurement noise.
pub fn tune_qubit_with<R: rand::Rng + ?Sized>(
    state: &JunctionState,
    target: &TuningTarget,
    config: &CampaignConfig,
    rng: &mut R,
) -> Result<(QubitTuneRecord, JunctionState)> {
    config.validate()?;
    let threshold = target.threshold()?;
    let mut s = *state;
    let r_untuned = s.measure(&config.measurement, rng);
    let mut reading = r_untuned;
    let mut pulses = 0u64;
    while reading < threshold {
        if pulses == config.max_pulses {
            return Err(TuningError::MaxPulsesExceeded {
                max_pulses: config.max_pulses,
                record: Box::new(QubitTuneRecord {
                    qubit_id: target.qubit_id.clone(),
                    r_target: target.target_resistance,
                    r_untuned,
                    threshold,
                    r_last_pulse: reading,
                    r_tuned: reading,
                    pulses,
                    already_above: false,
                }),
            });
        }
        s = s.apply_pulse(&config.step, rng);
        pulses += 1;
        reading = s.measure(&config.measurement, rng);
    }
    let s = s.advance_time(&config.profile, config.probe_delay_hr)?;
    let r_tuned = s.measure(&config.measurement, rng);
    let record = QubitTuneRecord {
        qubit_id: target.qubit_id.clone(),
        r_target: target.target_resistance,
        r_untuned,
        threshold,
        r_last_pulse: reading,
        r_tuned,
        pulses,
        already_above: pulses == 0,
    };
    Ok((record, s))
}

/// Tunes one qubit with its generator keyed by `(config.seed, qubit id)`.
pub fn tune_qubit(
    state: &JunctionState,
    target: &TuningTarget,
    config: &CampaignConfig,
) -> Result<QubitTuneRecord> {
    let mut rng = rng_from_seed(qubit_seed(config.seed, "tune", &target.qubit_id));
    tune_qubit_with(state, target, config, &mut rng).map(|(record, _)| record)
}

/// A fabricated, not yet tuned qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricatedQubit {
    pub id: String,
    pub state: JunctionState,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CampaignResult {
    pub records: Vec<QubitTuneRecord>,
}

/// Aggregates over a campaign. Statistics cover pulsed qubits only;
/// fractions are relative, overshoot in ohm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub qubits: usize,
    pub already_above: usize,
    pub total_pulses: u64,
    pub max_tuning_distance: f64,
    pub precision: Summary,
    pub overshoot: Summary,
    pub relax_fraction: Summary,
}

impl CampaignResult {
    /// Records of qubits that were actually pulsed.
    pub fn tuned(&self) -> impl Iterator<Item = &QubitTuneRecord> {
        self.records.iter().filter(|r| !r.already_above)
    }

    /// Aggregates over the pulsed qubits; `None` if there are none.
    pub fn summary(&self) -> Option<CampaignSummary> {
        let collect =
            |f: fn(&QubitTuneRecord) -> f64| -> Vec<f64> { self.tuned().map(f).collect() };
        Some(CampaignSummary {
            qubits: self.records.len(),
            already_above: self.records.iter().filter(|r| r.already_above).count(),
            total_pulses: self.records.iter().map(|r| r.pulses).sum(),
            max_tuning_distance: self
                .tuned()
                .map(QubitTuneRecord::tuning_distance)
                .fold(f64::NEG_INFINITY, f64::max),
            precision: Summary::of(&collect(QubitTuneRecord::precision))?,
            overshoot: Summary::of(&collect(QubitTuneRecord::overshoot))?,
            relax_fraction: Summary::of(&collect(QubitTuneRecord::relax_fraction))?,
        })
    }
}

fn check_pairing(qubits: &[FabricatedQubit], targets: &[TuningTarget]) -> Result<()> {
    if qubits.len() != targets.len() {
        return Err(TuningError::LengthMismatch {
            qubits: qubits.len(),
            targets: targets.len(),
        });
    }
    for (position, (q, t)) in qubits.iter().zip(targets).enumerate() {
        if q.id != t.qubit_id {
            return Err(TuningError::IdMismatch {
                position,
                qubit_id: q.id.clone(),
                target_id: t.qubit_id.clone(),
            });
        }
    }
    Ok(())
}

/// Tunes qubits one after another, probing each `probe_delay_hr` after its
/// own last pulse.
pub fn run_campaign(
    qubits: &[FabricatedQubit],
    targets: &[TuningTarget],
    config: &CampaignConfig,
) -> Result<CampaignResult> {
    check_pairing(qubits, targets)?;
    let records = qubits
        .iter()
        .zip(targets)
        .map(|(q, t)| tune_qubit(&q.state, t, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult { records })
}

/// Parallel variant of [`run_campaign`]. Because generators are keyed by
/// qubit id, the records are identical to the sequential run.
pub fn run_campaign_parallel(
    qubits: &[FabricatedQubit],
    targets: &[TuningTarget],
    config: &CampaignConfig,
) -> Result<CampaignResult> {
    check_pairing(qubits, targets)?;
    let records = qubits
        .par_iter()
        .zip(targets)
        .map(|(q, t)| tune_qubit(&q.state, t, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult { records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReserveCalibration {
    pub mean: f64,
    pub sigma: f64,
}

/// Mean and population sigma of `(r_tuned - R_a) / R_a` over pulsed qubits.
pub fn calibrate_reserve(records: &[QubitTuneRecord]) -> Result<ReserveCalibration> {
    let fracs: Vec<f64> = records
        .iter()
        .filter(|r| !r.already_above)
        .map(QubitTuneRecord::relax_fraction)
        .collect();
    let s = Summary::of(&fracs).ok_or(TuningError::Empty)?;
    Ok(ReserveCalibration {
        mean: s.mean,
        sigma: s.sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionStats {
    pub mean_frac: f64,
    pub sigma_frac: f64,
    pub min: f64,
    pub max: f64,
}

/// Statistics of `(r_tuned - R_T) / R_T` against the given targets, over
/// pulsed qubits. Qubits flagged already-above never relax toward their
/// target and are left out.
pub fn precision_stats(
    result: &CampaignResult,
    targets: &[TuningTarget],
) -> Result<PrecisionStats> {
    if result.records.len() != targets.len() {
        return Err(TuningError::LengthMismatch {
            qubits: result.records.len(),
            targets: targets.len(),
        });
    }
    let mut fracs = Vec::with_capacity(targets.len());
    for (position, (r, t)) in result.records.iter().zip(targets).enumerate() {
        if r.qubit_id != t.qubit_id {
            return Err(TuningError::IdMismatch {
                position,
                qubit_id: r.qubit_id.clone(),
                target_id: t.qubit_id.clone(),
            });
        }
        t.validate()?;
        if r.already_above {
            continue;
        }
        fracs.push((r.r_tuned - t.target_resistance) / t.target_resistance);
    }
    let s = Summary::of(&fracs).ok_or(TuningError::Empty)?;
    Ok(PrecisionStats {
        mean_frac: s.mean,
        sigma_frac: s.sigma,
        min: s.min,
        max: s.max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootStats {
    pub mean: f64,
    pub sigma: f64,
}

/// Statistics of `R_a - threshold` in ohm over pulsed qubits.
pub fn overshoot_stats(result: &CampaignResult) -> Result<OvershootStats> {
    let xs: Vec<f64> = result.tuned().map(QubitTuneRecord::overshoot).collect();
    let mean = crate::stats::mean(&xs).ok_or(TuningError::Empty)?;
    let sigma = population_sigma(&xs).ok_or(TuningError::Empty)?;
    Ok(OvershootStats { mean, sigma })
}

/// Generated qubits and matching targets for simulation studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub qubits: Vec<FabricatedQubit>,
    pub targets: Vec<TuningTarget>,
}

impl Scenario {
    /// Qubits with design resistances spread evenly over
    /// `design_center * (1 +/- design_halfwidth)`, targets at
    /// `(1 - aging_budget)` of design and as-fabricated values drawn from
    /// [`FabricationModel::new`] defaults.
    pub fn targeted(
        n: usize,
        design_center: f64,
        design_halfwidth: f64,
        aging_budget: f64,
        reserve: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut qubits = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for i in 0..n {
            let id = format!("q{i:04}");
            let u = if n > 1 {
                i as f64 / (n - 1) as f64 * 2.0 - 1.0
            } else {
                0.0
            };
            let design = design_center * (1.0 + design_halfwidth * u);
            let fab = FabricationModel::new(design);
            let mut rng = rng_from_seed(qubit_seed(seed, "fab", &id));
            qubits.push(FabricatedQubit {
                id: id.clone(),
                state: fab.sample(&mut rng)?,
            });
            targets
                .push(TuningTarget::new(id, design * (1.0 - aging_budget)).with_reserve(reserve));
        }
        Ok(Self { qubits, targets })
    }

    /// Replica of a 221-qubit baseline run: targets at 98% of design with the
    /// default reserve.
    pub fn baseline(n: usize, seed: u64) -> Result<Self> {
        Self::targeted(n, 4587.8, 0.25, 0.02, DEFAULT_RESERVE, seed)
    }

    /// All qubits share one stop threshold.
    pub fn common_threshold(n: usize, threshold: f64, seed: u64) -> Result<Self> {
        let target = threshold * (1.0 + DEFAULT_RESERVE);
        Self::targeted(n, target / 0.98, 0.0, 0.02, DEFAULT_RESERVE, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn threshold_arithmetic() {
        let t = TuningTarget::new("q0", 4625.9);
        assert!(approx(compute_threshold(&t).unwrap(), 4496.0, 0.05));
        let t = TuningTarget::new("q0", 4625.9).with_reserve(0.0);
        assert_eq!(compute_threshold(&t).unwrap(), 4625.9);
        let t = TuningTarget::new("q0", 1000.0).with_reserve(0.25);
        assert_eq!(compute_threshold(&t).unwrap(), 800.0);
        let t = TuningTarget::new("q0", 1000.0).with_reserve(-1.0);
        assert!(matches!(
            compute_threshold(&t),
            Err(TuningError::InvalidTarget { .. })
        ));
        assert!(TuningTarget::new("q0", 0.0).threshold().is_err());
    }

    fn deterministic_config() -> CampaignConfig {
        CampaignConfig {
            step: StepModel::constant(2.0),
            ..CampaignConfig::new(0)
        }
    }

    #[test]
    fn single_constant_pulse_reaches_threshold() {
        let state = JunctionState::new(4494.0, 0.0);
        let target = TuningTarget::new("q0", 4496.0).with_reserve(0.0);
        let rec = tune_qubit(&state, &target, &deterministic_config()).unwrap();
        assert_eq!(rec.pulses, 1);
        assert_eq!(rec.r_last_pulse, 4496.0);
        assert_eq!(rec.r_tuned, 4496.0);
        assert!(!rec.already_above);
    }

    #[test]
    fn already_above_is_flagged_not_failed() {
        let state = JunctionState::new(4600.0, 0.03);
        let target = TuningTarget::new("q0", 4496.0).with_reserve(0.0);
        let rec = tune_qubit(&state, &target, &deterministic_config()).unwrap();
        assert_eq!(rec.pulses, 0);
        assert!(rec.already_above);
        assert_eq!(rec.r_tuned, 4600.0);
    }

    #[test]
    fn max_pulses_error_carries_partial_record() {
        let state = JunctionState::new(4000.0, 0.03);
        let target = TuningTarget::new("q7", 4496.0).with_reserve(0.0);
        let config = CampaignConfig {
            max_pulses: 10,
            ..deterministic_config()
        };
        match tune_qubit(&state, &target, &config) {
            Err(TuningError::MaxPulsesExceeded { max_pulses, record }) => {
                assert_eq!(max_pulses, 10);
                assert_eq!(record.pulses, 10);
                assert_eq!(record.r_last_pulse, 4020.0);
                assert_eq!(record.qubit_id, "q7");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stop_rule_holds_per_record() {
        let sc = Scenario::baseline(50, 3).unwrap();
        let config = CampaignConfig::new(3);
        let res = run_campaign(&sc.qubits, &sc.targets, &config).unwrap();
        for (rec, q) in res.records.iter().zip(&sc.qubits) {
            assert!(rec.r_last_pulse >= rec.threshold);
            if rec.already_above {
                assert_eq!(rec.pulses, 0);
                continue;
            }
            assert!(rec.r_tuned >= rec.r_last_pulse);
            // replay to find the reading preceding the final pulse
            let mut rng = rng_from_seed(qubit_seed(config.seed, "tune", &rec.qubit_id));
            let mut s = q.state;
            let _ = s.measure(&config.measurement, &mut rng);
            let mut before = s.resistance;
            for _ in 0..rec.pulses {
                before = s.resistance;
                s = s.apply_pulse(&config.step, &mut rng);
                let _ = s.measure(&config.measurement, &mut rng);
            }
            assert!(before < rec.threshold);
            assert_eq!(s.resistance, rec.r_last_pulse);
        }
    }

    #[test]
    fn campaign_pairing_errors() {
        let sc = Scenario::baseline(3, 1).unwrap();
        let config = CampaignConfig::new(1);
        assert!(matches!(
            run_campaign(&sc.qubits, &sc.targets[..2], &config),
            Err(TuningError::LengthMismatch { .. })
        ));
        let mut targets = sc.targets.clone();
        targets.swap(0, 1);
        assert!(matches!(
            run_campaign(&sc.qubits, &targets, &config),
            Err(TuningError::IdMismatch { position: 0, .. })
        ));
        assert_eq!(
            run_campaign(&[], &[], &config).unwrap(),
            CampaignResult::default()
        );
    }

    #[test]
    fn order_independence_and_parallel_equivalence() {
        let sc = Scenario::baseline(40, 9).unwrap();
        let config = CampaignConfig::new(9);
        let seq = run_campaign(&sc.qubits, &sc.targets, &config).unwrap();
        let par = run_campaign_parallel(&sc.qubits, &sc.targets, &config).unwrap();
        assert_eq!(seq, par);

        let mut q = sc.qubits.clone();
        let mut t = sc.targets.clone();
        q.reverse();
        t.reverse();
        let rev = run_campaign(&q, &t, &config).unwrap();
        let mut rev_records = rev.records.clone();
        rev_records.reverse();
        assert_eq!(rev_records, seq.records);
        let a = precision_stats(&seq, &sc.targets).unwrap();
        let b = precision_stats(&rev, &t).unwrap();
        assert!(approx(a.mean_frac, b.mean_frac, 1e-15));
        assert!(approx(a.sigma_frac, b.sigma_frac, 1e-15));
    }

    fn record(id: &str, r_a: f64, r_tuned: f64, r_target: f64) -> QubitTuneRecord {
        QubitTuneRecord {
            qubit_id: id.into(),
            r_target,
            r_untuned: r_a * 0.9,
            threshold: r_a,
            r_last_pulse: r_a,
            r_tuned,
            pulses: 1,
            already_above: false,
        }
    }

    #[test]
    fn reserve_calibration_by_hand() {
        let single = calibrate_reserve(&[record("a", 1000.0, 1000.0, 1000.0)]).unwrap();
        assert_eq!((single.mean, single.sigma), (0.0, 0.0));
        let two = calibrate_reserve(&[
            record("a", 1000.0, 1010.0, 1000.0),
            record("b", 1000.0, 1030.0, 1000.0),
        ])
        .unwrap();
        assert!(approx(two.mean, 0.02, 1e-12));
        assert!(approx(two.sigma, 0.01, 1e-12));
        assert_eq!(calibrate_reserve(&[]), Err(TuningError::Empty));
    }

    #[test]
    fn precision_by_hand() {
        let res = CampaignResult {
            records: vec![
                record("a", 990.0, 1000.0, 1000.0),
                record("b", 990.0, 1000.0, 1000.0),
            ],
        };
        let t = vec![
            TuningTarget::new("a", 1000.0),
            TuningTarget::new("b", 1000.0),
        ];
        let p = precision_stats(&res, &t).unwrap();
        assert_eq!(
            (p.mean_frac, p.sigma_frac, p.min, p.max),
            (0.0, 0.0, 0.0, 0.0)
        );

        let res = CampaignResult {
            records: vec![
                record("a", 990.0, 1010.0, 1000.0),
                record("b", 990.0, 990.0, 1000.0),
            ],
        };
        let p = precision_stats(&res, &t).unwrap();
        assert!(approx(p.mean_frac, 0.0, 1e-15));
        assert!(approx(p.sigma_frac, 0.01, 1e-15));
        assert_eq!(
            precision_stats(&CampaignResult::default(), &[]),
            Err(TuningError::Empty)
        );
    }

    #[test]
    fn constant_steps_bound_overshoot() {
        let sc = Scenario::common_threshold(100, 4496.0, 5).unwrap();
        let config = CampaignConfig {
            step: StepModel::constant(1.5),
            ..CampaignConfig::new(5)
        };
        let res = run_campaign(&sc.qubits, &sc.targets, &config).unwrap();
        let o = overshoot_stats(&res).unwrap();
        assert!(o.sigma <= 1.5);
        assert!(res.tuned().all(|r| r.overshoot() < 1.5 + 1e-9));
        assert_eq!(
            overshoot_stats(&CampaignResult::default()),
            Err(TuningError::Empty)
        );
    }

    #[test]
    fn exponential_overshoot_is_memoryless() {
        let sc = Scenario::common_threshold(4000, 4496.0, 21).unwrap();
        let res = run_campaign(&sc.qubits, &sc.targets, &CampaignConfig::new(21)).unwrap();
        let o = overshoot_stats(&res).unwrap();
        assert!(approx(o.mean, 1.9, 0.1), "mean {}", o.mean);
        assert!(
            approx(o.sigma, o.mean, 0.15),
            "sigma {} mean {}",
            o.sigma,
            o.mean
        );
    }

    #[test]
    fn reserve_identity_in_small_step_limit() {
        // rho fixed at the reserve, noiseless: error shrinks with the step size
        let target = TuningTarget::new("q0", 4600.0);
        let mut errs = Vec::new();
        for step in [2.0, 0.2, 0.02] {
            let config = CampaignConfig {
                step: StepModel::constant(step),
                ..CampaignConfig::new(0)
            };
            let state = JunctionState::new(4300.0, DEFAULT_RESERVE);
            let rec = tune_qubit(&state, &target, &config).unwrap();
            // r_tuned = (threshold + overshoot) * (1 + reserve), overshoot < step
            assert!(rec.precision() >= 0.0);
            assert!(rec.precision() < step / rec.threshold + 1e-12);
            errs.push(rec.precision());
        }
        assert!(errs[2] < 5e-6, "{errs:?}");
    }
}
