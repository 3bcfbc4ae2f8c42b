use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abaa"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn yield_single_cell_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "yield", "--sigma", "7.7", "--cells", "1x1", "--trials", "100000", "--seed", "7",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("yield.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("qubits,sigma_mhz,yield,ci_lo,ci_hi"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "9");
    let y: f64 = row[2].parse().unwrap();
    assert!((0.75..=0.95).contains(&y), "{y}");
    assert_eq!(stdout(&o), csv);
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "yield");
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn yield_is_reproducible_from_manifest_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "yield", "--sigma", "18.4", "--cells", "1x2", "--trials", "5000", "--seed", "11",
    ];
    assert!(run(a.path(), &args).status.success());
    assert!(run(b.path(), &args).status.success());
    assert_eq!(
        fs::read(a.path().join("yield.csv")).unwrap(),
        fs::read(b.path().join("yield.csv")).unwrap()
    );
}

#[test]
fn simulate_tuning_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate-tuning", "--seed", "7"]);
    assert!(o.status.success());
    let summary = json(&dir.path().join("summary.json"));
    let sigma = summary["precision"]["sigma_frac"].as_f64().unwrap();
    assert!((0.0025..=0.0045).contains(&sigma), "{sigma}");
    assert_eq!(summary["summary"]["qubits"], 221);
    assert!(stdout(&o).contains("precision"));

    let report_dir = dir.path().join("report");
    let campaign = dir.path().join("campaign.csv");
    let o = run(
        &report_dir,
        &["report", "--campaign", campaign.to_str().unwrap()],
    );
    assert!(o.status.success());
    let report = json(&report_dir.join("report.json"));
    assert_eq!(report["precision"], summary["precision"]);
    let manifest = json(&report_dir.join("manifest.json"));
    assert_eq!(manifest["input_digests"].as_object().unwrap().len(), 1);
}

#[test]
fn stochastic_commands_require_seed() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["simulate-tuning"],
        vec!["yield"],
        vec!["fit-relaxation", "--synthetic"],
        vec!["calibrate-freq", "--synthetic"],
    ] {
        let o = run(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    }
}

#[test]
fn fit_relaxation_bundled_trace() {
    let dir = tempfile::tempdir().unwrap();
    let input = data("relaxation_three_regime.csv");
    let o = run(
        dir.path(),
        &["fit-relaxation", "--input", input.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = json(&dir.path().join("relaxation_fit.json"));
    let exps: Vec<f64> = fit["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["exponent"].as_f64().unwrap())
        .collect();
    for (got, want) in exps.iter().zip([0.30, 0.24, 0.16]) {
        assert!((got - want).abs() <= 0.02, "{exps:?}");
    }
}

#[test]
fn synthetic_relaxation_regenerates_bundled_trace() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(
        dir.path(),
        &["fit-relaxation", "--synthetic", "--seed", "1"]
    )
    .status
    .success());
    assert_eq!(
        fs::read(dir.path().join("relaxation_log.csv")).unwrap(),
        fs::read(data("relaxation_three_regime.csv")).unwrap()
    );
}

#[test]
fn calibrate_then_assign_targets() {
    let dir = tempfile::tempdir().unwrap();
    let cal_dir = dir.path().join("cal");
    assert!(
        run(&cal_dir, &["calibrate-freq", "--synthetic", "--seed", "3"])
            .status
            .success()
    );
    let cal = json(&cal_dir.join("calibration.json"));
    assert!((cal["alpha"].as_f64().unwrap() - 0.51).abs() < 0.05);

    // refit from the emitted points file
    let refit_dir = dir.path().join("refit");
    let pts = cal_dir.join("calibration_points.csv");
    assert!(run(
        &refit_dir,
        &["calibrate-freq", "--input", pts.to_str().unwrap()]
    )
    .status
    .success());
    let refit = json(&refit_dir.join("calibration.json"));
    assert!((refit["alpha"].as_f64().unwrap() - cal["alpha"].as_f64().unwrap()).abs() < 1e-6);

    let t_dir = dir.path().join("targets");
    let cal_path = cal_dir.join("calibration.json");
    let design = data("unit_cell.json");
    let o = run(
        &t_dir,
        &[
            "assign-targets",
            "--calibration",
            cal_path.to_str().unwrap(),
            "--design",
            design.to_str().unwrap(),
        ],
    );
    assert!(o.status.success());
    let targets = fs::read_to_string(t_dir.join("targets.csv")).unwrap();
    assert_eq!(targets.lines().count(), 10);
    // higher frequency means lower resistance
    let r: Vec<f64> = targets
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(r[0] > r[1] && r[1] > r[2]);
}

#[test]
fn analyze_and_park_bundled_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let design = data("lattice_measured.json");
    let o = run(
        dir.path(),
        &["analyze-lattice", "--design", design.to_str().unwrap()],
    );
    assert!(o.status.success());
    let a = json(&dir.path().join("analysis.json"));
    assert_eq!(a["design"]["median_mhz"], 50.0);
    assert_eq!(a["design"]["modulation"]["valid"], false);
    assert_eq!(a["measured"]["violations"].as_array().unwrap().len(), 1);

    let o = run(dir.path(), &["park", "--design", design.to_str().unwrap()]);
    assert!(o.status.success());
    let p = json(&dir.path().join("parking.json"));
    assert_eq!(p["status"], "plan");
    assert_eq!(p["parked"], 1);
    assert_eq!(p["max_offset"], 13.0);

    let o = run(
        dir.path(),
        &[
            "park",
            "--design",
            design.to_str().unwrap(),
            "--max-park",
            "5",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(
        json(&dir.path().join("parking.json"))["status"],
        "infeasible"
    );
}

#[test]
fn invalid_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"rows": 1, "cols": 2, "base_frequency_mhz": 4600, "offsets_mhz": [[0, null]], "design_window_mhz": [40, 110]}"#,
    )
    .unwrap();
    let o = run(
        dir.path(),
        &["analyze-lattice", "--design", bad.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(0, 1)"));

    let unmeasured = data("unit_cell.json");
    let o = run(
        dir.path(),
        &["park", "--design", unmeasured.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));

    let log = dir.path().join("log.csv");
    fs::write(
        &log,
        "qubit_id,t_hr,resistance_ohm,phase\nq,0,5000,pulse\nq,1,abc,probe\n",
    )
    .unwrap();
    let o = run(
        dir.path(),
        &["fit-relaxation", "--input", log.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("line 3") && err.contains("resistance_ohm"),
        "{err}"
    );

    let o = run(dir.path(), &["yield", "--seed", "1", "--cells", "0x2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unit_cell_search_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "yield",
            "--seed",
            "1",
            "--design-window",
            "40,40",
            "--trials",
            "10",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
}
