use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use abaa_core::freq::{
    self, assign_target_r, fit_power_law, fit_segmented_power_law, Breakpoints, PowerLawModel,
};
use abaa_core::io::{self, CalibrationPoint, RunManifest};
use abaa_core::junction::{relaxation_trace, RelaxationProfile, TraceSpec};
use abaa_core::lattice::{
    detuning_deviation_stats, edge_detunings, modulation_assignment, optimize_parking,
    DetuningReport, ParkingOptions, ParkingOutcome, Window,
};
use abaa_core::stats::Summary;
use abaa_core::tuning::{
    calibrate_reserve, overshoot_stats, precision_stats, run_campaign_parallel, CampaignConfig,
    CampaignResult, Scenario, TuningTarget,
};
use abaa_core::yield_mc::{
    generate_unit_cell, wafer_projection, yield_curve, UnitCellDesign, YieldConfig, YieldError,
};

use crate::{
    AnalyzeLatticeArgs, AssignTargetsArgs, CalibrateFreqArgs, FitRelaxationArgs, ParkArgs,
    ReportArgs, SimulateTuningArgs, YieldArgs,
};

pub struct Context {
    pub out: PathBuf,
    pub argv: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "{m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| CliError::Invalid(format!("{command} is stochastic and needs --seed")))
}

/// `lo,hi` in MHz. Yield and parking windows need `lo < hi`; a design window
/// may collapse to a point.
fn parse_window(s: &str) -> Result<Window> {
    parse_window_inner(s, false)
}

fn parse_window_inner(s: &str, allow_point: bool) -> Result<Window> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || CliError::Invalid(format!("window must be `lo,hi` in MHz, got `{s}`"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(lo < hi || (allow_point && lo == hi)) {
        return Err(bad());
    }
    Window::new(lo, hi).map_err(invalid)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("cannot parse {what} `{p}`")))
        })
        .collect()
}

fn parse_cells(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|p| {
            let bad = || CliError::Invalid(format!("cells must look like `MxN`, got `{p}`"));
            let (m, n) = p.trim().split_once(['x', 'X']).ok_or_else(bad)?;
            let m: usize = m.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if m == 0 || n == 0 {
                return Err(bad());
            }
            Ok((m, n))
        })
        .collect()
}

impl Context {
    fn prepare(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Invalid(format!("cannot create {}: {e}", self.out.display())))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn manifest<A: Serialize>(
        &self,
        command: &str,
        args: &A,
        seed: Option<u64>,
        inputs: &[&Path],
    ) -> Result<()> {
        let config = serde_json::to_value(args).map_err(invalid)?;
        let mut m = RunManifest::new(command, self.argv.clone(), config, seed);
        for p in inputs {
            m.add_input(p).map_err(invalid)?;
        }
        m.save(&self.path("manifest.json")).map_err(invalid)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        io::write_json(&self.path(name), value).map_err(invalid)
    }

    fn create(&self, name: &str) -> Result<std::io::BufWriter<fs::File>> {
        let p = self.path(name);
        fs::File::create(&p)
            .map(std::io::BufWriter::new)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))
    }
}

pub fn simulate_tuning(ctx: &Context, a: &SimulateTuningArgs) -> Result<()> {
    let seed = require_seed(a.seed, "simulate-tuning")?;
    if a.qubits == 0 {
        return Err(invalid("--qubits must be at least 1"));
    }
    let scenario = match a.threshold {
        Some(t) if t > 0.0 => Scenario::common_threshold(a.qubits, t, seed),
        Some(t) => {
            return Err(CliError::Invalid(format!(
                "--threshold must be positive, got {t}"
            )))
        }
        None => Scenario::targeted(a.qubits, 4587.8, 0.25, a.aging_budget, a.reserve, seed),
    }
    .map_err(invalid)?;
    let config = CampaignConfig {
        probe_delay_hr: a.probe_delay,
        ..CampaignConfig::new(seed)
    };
    let result =
        run_campaign_parallel(&scenario.qubits, &scenario.targets, &config).map_err(invalid)?;
    ctx.prepare()?;
    io::save_campaign(&ctx.path("campaign.csv"), &result).map_err(invalid)?;
    io::save_resistance_log(
        &ctx.path("resistance_log.csv"),
        &io::campaign_log_rows(&result, config.probe_delay_hr),
    )
    .map_err(invalid)?;

    let summary = result.summary().ok_or_else(|| invalid("empty campaign"))?;
    let tuned: Vec<_> = result.tuned().collect();
    let shifts: Vec<f64> = tuned.iter().map(|r| r.r_tuned - r.r_last_pulse).collect();
    let shift = Summary::of(&shifts);
    let precision = precision_stats(&result, &scenario.targets).ok();
    let overshoot = overshoot_stats(&result).ok();
    let reserve = calibrate_reserve(&result.records).ok();
    ctx.write_json(
        "summary.json",
        &json!({
            "summary": summary,
            "precision": precision,
            "overshoot_ohm": overshoot,
            "relaxation_shift_ohm": shift,
            "reserve_calibration": reserve,
        }),
    )?;
    ctx.manifest("simulate-tuning", a, Some(seed), &[])?;

    println!(
        "qubits {} tuned {} already above threshold {}",
        summary.qubits,
        tuned.len(),
        summary.already_above
    );
    if let Some(p) = precision {
        println!(
            "precision (R - R_T)/R_T: mean {:+.3}% sigma {:.3}% range [{:+.3}%, {:+.3}%]",
            100.0 * p.mean_frac,
            100.0 * p.sigma_frac,
            100.0 * p.min,
            100.0 * p.max
        );
    }
    if let Some(o) = overshoot {
        println!("overshoot: mean {:.2} ohm sigma {:.2} ohm", o.mean, o.sigma);
    }
    if let Some(s) = shift {
        println!(
            "relaxation shift after {:.1} hr: mean {:.1} ohm sigma {:.1} ohm",
            config.probe_delay_hr, s.mean, s.sigma
        );
    }
    println!(
        "max tuning distance {:.2}%",
        100.0 * summary.max_tuning_distance
    );
    Ok(())
}

pub fn calibrate_freq(ctx: &Context, a: &CalibrateFreqArgs) -> Result<()> {
    let (points, seed, inputs): (Vec<CalibrationPoint>, Option<u64>, Vec<&Path>) =
        match (&a.input, a.synthetic) {
            (Some(p), false) => (
                io::read_calibration_points(p).map_err(invalid)?,
                None,
                vec![p.as_path()],
            ),
            (None, true) => {
                let seed = require_seed(a.seed, "calibrate-freq --synthetic")?;
                (synthetic_calibration(seed)?, Some(seed), vec![])
            }
            _ => return Err(invalid("give exactly one of --input or --synthetic")),
        };
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.resistance_ohm, p.f01max_mhz))
        .collect();
    let model = fit_power_law(&pairs).map_err(invalid)?;
    ctx.prepare()?;
    if a.synthetic {
        io::write_calibration_points(ctx.create("calibration_points.csv")?, &points)
            .map_err(invalid)?;
    }
    io::save_calibration(&ctx.path("calibration.json"), &model).map_err(invalid)?;
    ctx.manifest("calibrate-freq", a, seed, &inputs)?;
    println!(
        "alpha {:.4} beta {:.6e} residual sigma {:.2} MHz over {} points, R in [{:.1}, {:.1}] ohm",
        model.alpha,
        model.beta,
        model.residual_sigma,
        points.len(),
        model.r_min,
        model.r_max
    );
    Ok(())
}

/// 60 qubits evenly spread over 6000..10000 ohm, exponent 0.51 through
/// (7711 ohm, 4556 MHz), 12.4 MHz Gaussian residuals.
fn synthetic_calibration(seed: u64) -> Result<Vec<CalibrationPoint>> {
    let model = PowerLawModel::anchored(0.51, 7711.0, 4556.0).map_err(invalid)?;
    let rs: Vec<f64> = (0..60)
        .map(|i| 6000.0 + 4000.0 * f64::from(i) / 59.0)
        .collect();
    let pts = freq::synthetic_calibration(&model, &rs, 12.4, seed).map_err(invalid)?;
    Ok(pts
        .into_iter()
        .enumerate()
        .map(|(i, (r, f))| CalibrationPoint {
            qubit_id: format!("c{i:02}"),
            resistance_ohm: r,
            f01max_mhz: f,
        })
        .collect())
}

pub fn assign_targets(ctx: &Context, a: &AssignTargetsArgs) -> Result<()> {
    let model = io::load_calibration(&a.calibration).map_err(invalid)?;
    let design = io::load_design(&a.design).map_err(invalid)?;
    let lattice = &design.lattice;
    ctx.prepare()?;
    let mut w = ctx.create("targets.csv")?;
    let werr = |e: std::io::Error| invalid(e);
    writeln!(
        w,
        "qubit_id,row,col,f_design_mhz,r_target_ohm,threshold_ohm,in_calibrated_range"
    )
    .map_err(werr)?;
    let mut outside = 0;
    for (i, node) in lattice.nodes().iter().enumerate() {
        let (r, c) = lattice.coords(i);
        let f = node.design_f01max;
        let r_target = assign_target_r(&model, f, a.aging_budget).map_err(invalid)?;
        let threshold = TuningTarget::new(format!("q{i}"), r_target)
            .with_reserve(a.reserve)
            .threshold()
            .map_err(invalid)?;
        let covered = model.covers(f);
        if !covered {
            outside += 1;
            eprintln!("warning: q{i} ({r}, {c}) at {f:.3} MHz is outside the calibrated range");
        }
        writeln!(
            w,
            "q{i},{r},{c},{f:.3},{r_target:.4},{threshold:.4},{covered}"
        )
        .map_err(werr)?;
    }
    w.flush().map_err(werr)?;
    ctx.manifest("assign-targets", a, None, &[&a.calibration, &a.design])?;
    println!(
        "{} targets written, {} outside the calibrated range",
        lattice.len(),
        outside
    );
    Ok(())
}

fn parse_breakpoints(s: &str) -> Result<Breakpoints> {
    if s.trim() == "auto" {
        return Ok(Breakpoints::auto());
    }
    Ok(Breakpoints::Given(parse_list(s, "breakpoint")?))
}

pub fn fit_relaxation(ctx: &Context, a: &FitRelaxationArgs) -> Result<()> {
    let breakpoints = parse_breakpoints(&a.breakpoints)?;
    let (series, seed, rows) = match (&a.input, a.synthetic) {
        (Some(p), false) => {
            let rows = io::read_resistance_log(p).map_err(invalid)?;
            (
                io::relaxation_series(&rows, a.qubit.as_deref()).map_err(invalid)?,
                None,
                None,
            )
        }
        (None, true) => {
            let seed = require_seed(a.seed, "fit-relaxation --synthetic")?;
            let spec = TraceSpec::default();
            let trace = relaxation_trace(&RelaxationProfile::three_regime(), &spec, seed)
                .map_err(invalid)?;
            let rows = io::relaxation_log_rows("synthetic", spec.r_stop, &trace);
            (trace, Some(seed), Some(rows))
        }
        _ => return Err(invalid("give exactly one of --input or --synthetic")),
    };
    let fit = fit_segmented_power_law(&series, &breakpoints).map_err(invalid)?;
    ctx.prepare()?;
    if let Some(rows) = rows {
        io::save_resistance_log(&ctx.path("relaxation_log.csv"), &rows).map_err(invalid)?;
    }
    ctx.write_json("relaxation_fit.json", &fit)?;
    let inputs: Vec<&Path> = a.input.iter().map(PathBuf::as_path).collect();
    ctx.manifest("fit-relaxation", a, seed, &inputs)?;
    let bps: Vec<String> = fit.breakpoints.iter().map(|b| format!("{b:.3}")).collect();
    let exps: Vec<String> = fit.exponents().iter().map(|e| format!("{e:.4}")).collect();
    println!("breakpoints (hr): {}", bps.join(" "));
    println!("exponents: {}", exps.join(" "));
    Ok(())
}

fn write_detunings(ctx: &Context, name: &str, report: &DetuningReport) -> Result<()> {
    let mut w = ctx.create(name)?;
    let werr = |e: std::io::Error| invalid(e);
    writeln!(w, "a,b,signed_mhz,abs_mhz,modulated,in_window").map_err(werr)?;
    for e in &report.edges {
        let in_window = e.in_window.map_or(String::new(), |b| b.to_string());
        writeln!(
            w,
            "{},{},{:.3},{:.3},{},{}",
            e.edge.a, e.edge.b, e.signed, e.abs, e.modulated, in_window
        )
        .map_err(werr)?;
    }
    w.flush().map_err(werr)
}

pub fn analyze_lattice(ctx: &Context, a: &AnalyzeLatticeArgs) -> Result<()> {
    let design = io::load_design(&a.design).map_err(invalid)?;
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => design.design_window,
    };
    let lattice = &design.lattice;
    let design_report =
        edge_detunings(lattice, &lattice.design_frequencies(), Some(window)).map_err(invalid)?;
    let design_mod = modulation_assignment(&design_report);
    ctx.prepare()?;
    write_detunings(ctx, "design_detunings.csv", &design_report)?;
    let mut analysis = json!({
        "window_mhz": [window.lo, window.hi],
        "design": {
            "median_mhz": design_report.median,
            "min_mhz": design_report.min,
            "max_mhz": design_report.max,
            "violations": design_report.violations(),
            "modulation": design_mod,
        },
    });
    println!(
        "design: {} edges, |detuning| median {:.1} MHz range [{:.1}, {:.1}] MHz, {} outside window, modulation {}",
        design_report.edges.len(),
        design_report.median,
        design_report.min,
        design_report.max,
        design_report.violations().len(),
        if design_mod.valid { "valid" } else { "overloaded" }
    );
    let has_measured = lattice.nodes().iter().any(|n| n.measured_f01max.is_some());
    if has_measured {
        let measured = lattice.measured_frequencies().map_err(|e| match e {
            abaa_core::lattice::LatticeError::MissingFrequencies { nodes } => {
                CliError::Invalid(format!(
                    "missing measured frequency for node {}",
                    io::describe_missing(lattice, &nodes)
                ))
            }
            other => invalid(other),
        })?;
        let report = edge_detunings(lattice, &measured, Some(window)).map_err(invalid)?;
        let deviation = detuning_deviation_stats(&report, &design_report).map_err(invalid)?;
        let modulation = modulation_assignment(&report);
        write_detunings(ctx, "measured_detunings.csv", &report)?;
        analysis["measured"] = json!({
            "median_mhz": report.median,
            "min_mhz": report.min,
            "max_mhz": report.max,
            "violations": report.violations(),
            "modulation": modulation,
            "deviation_from_design_mhz": deviation,
        });
        println!(
            "measured: |detuning| median {:.1} MHz range [{:.1}, {:.1}] MHz, {} outside window, deviation {:+.1} +/- {:.1} MHz",
            report.median,
            report.min,
            report.max,
            report.violations().len(),
            deviation.mean,
            deviation.sigma
        );
    }
    ctx.write_json("analysis.json", &analysis)?;
    ctx.manifest("analyze-lattice", a, None, &[&a.design])
}

pub fn park(ctx: &Context, a: &ParkArgs) -> Result<()> {
    let design = io::load_design(&a.design).map_err(invalid)?;
    let options = ParkingOptions {
        window: parse_window(&a.window)?,
        max_park: a.max_park,
        step: a.step,
        symmetric: a.symmetric,
    };
    let outcome = optimize_parking(&design.lattice, &options).map_err(|e| match e {
        abaa_core::lattice::LatticeError::MissingFrequencies { nodes } => {
            CliError::Invalid(format!(
                "missing measured frequency for node {}",
                io::describe_missing(&design.lattice, &nodes)
            ))
        }
        other => invalid(other),
    })?;
    ctx.prepare()?;
    ctx.write_json("parking.json", &outcome)?;
    ctx.manifest("park", a, None, &[&a.design])?;
    match outcome {
        ParkingOutcome::Plan(p) => {
            println!(
                "parked {} qubit(s), max offset {:.3} MHz, total {:.3} MHz",
                p.parked, p.max_offset, p.sum_offset
            );
            for (i, o) in p.offsets.iter().enumerate().filter(|(_, o)| **o != 0.0) {
                let (r, c) = design.lattice.coords(i);
                println!("  q{i} ({r}, {c}): {o:+.3} MHz");
            }
            Ok(())
        }
        ParkingOutcome::Infeasible { violating_edges } => {
            let edges: Vec<String> = violating_edges
                .iter()
                .map(|e| format!("{}-{}", e.a, e.b))
                .collect();
            Err(CliError::Infeasible(format!(
                "no parking within {} MHz fixes edges {}",
                a.max_park,
                edges.join(", ")
            )))
        }
    }
}

fn cell_from_design(path: &Path) -> Result<UnitCellDesign> {
    let design = io::load_design(path).map_err(invalid)?;
    let l = &design.lattice;
    if (l.rows(), l.cols()) != (3, 3) {
        return Err(CliError::Invalid(format!(
            "unit cell must be 3x3, got {}x{}",
            l.rows(),
            l.cols()
        )));
    }
    let f = l.design_frequencies();
    let mut offsets = [[0.0; 3]; 3];
    for (i, v) in f.iter().enumerate() {
        offsets[i / 3][i % 3] = v - design.base_frequency_mhz;
    }
    UnitCellDesign::new(design.base_frequency_mhz, offsets, design.design_window).map_err(|e| {
        match e {
            YieldError::InvalidCell(v) => CliError::Invalid(format!(
                "unit cell violates its design window on {} pair(s): {:?}",
                v.len(),
                v.iter()
                    .map(|x| (x.from, x.to, x.detuning))
                    .collect::<Vec<_>>()
            )),
            other => invalid(other),
        }
    })
}

pub fn yield_cmd(ctx: &Context, a: &YieldArgs) -> Result<()> {
    let seed = require_seed(a.seed, "yield")?;
    let sigmas: Vec<f64> = parse_list(&a.sigma, "sigma")?;
    if sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(invalid("--sigma values must be >= 0"));
    }
    let sizes = parse_cells(&a.cells)?;
    let window = parse_window(&a.window)?;
    if a.trials == 0 {
        return Err(invalid("--trials must be at least 1"));
    }
    let cell = match &a.design {
        Some(p) => cell_from_design(p)?,
        None => {
            let dw = parse_window_inner(&a.design_window, true)?;
            let mut cell = generate_unit_cell(dw, seed).map_err(|e| match e {
                YieldError::SearchFailed { .. } => CliError::Infeasible(e.to_string()),
                other => invalid(other),
            })?;
            cell.base_frequency_mhz = 4600.0;
            cell
        }
    };
    let config = YieldConfig {
        sigma_f: 0.0,
        window,
        trials: a.trials,
        seed,
        dice: a.dice,
    };
    let rows = yield_curve(&cell, &sigmas, &sizes, &config).map_err(invalid)?;
    ctx.prepare()?;
    io::write_yield_curve(ctx.create("yield.csv")?, &rows).map_err(invalid)?;
    io::write_yield_curve(std::io::stdout().lock(), &rows).map_err(invalid)?;
    let projections: Vec<_> = rows
        .iter()
        .map(|r| {
            let w = wafer_projection(r.yield_estimate, r.qubits, a.dice);
            json!({
                "qubits": r.qubits,
                "sigma_mhz": r.sigma_mhz,
                "yield": r.yield_estimate,
                "ci": [r.ci_lo, r.ci_hi],
                "chips_per_wafer": w.chips,
                "qubits_per_wafer": w.qubits,
            })
        })
        .collect();
    ctx.write_json(
        "yield.json",
        &json!({ "cell": cell, "trials": a.trials, "dice": a.dice, "rows": projections }),
    )?;
    let inputs: Vec<&Path> = a.design.iter().map(PathBuf::as_path).collect();
    ctx.manifest("yield", a, Some(seed), &inputs)
}

pub fn report(ctx: &Context, a: &ReportArgs) -> Result<()> {
    let result: CampaignResult = io::load_campaign(&a.campaign).map_err(invalid)?;
    let summary = result
        .summary()
        .ok_or_else(|| invalid("campaign has no records"))?;
    let targets: Vec<TuningTarget> = result
        .records
        .iter()
        .map(|r| TuningTarget::new(r.qubit_id.clone(), r.r_target))
        .collect();
    let precision = precision_stats(&result, &targets).ok();
    let overshoot = overshoot_stats(&result).ok();
    ctx.prepare()?;
    ctx.write_json(
        "report.json",
        &json!({ "summary": summary, "precision": precision, "overshoot_ohm": overshoot }),
    )?;
    ctx.manifest("report", a, None, &[&a.campaign])?;
    println!(
        "qubits {} (already above threshold {})",
        summary.qubits, summary.already_above
    );
    println!("pulses total {}", summary.total_pulses);
    if let Some(p) = precision {
        println!(
            "precision: mean {:+.3}% sigma {:.3}%",
            100.0 * p.mean_frac,
            100.0 * p.sigma_frac
        );
    }
    if let Some(o) = overshoot {
        println!("overshoot: mean {:.2} ohm sigma {:.2} ohm", o.mean, o.sigma);
    }
    Ok(())
}
