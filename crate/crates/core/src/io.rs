//! File formats: resistance logs, lattice designs, calibrations, campaigns,
//! yield tables and run manifests.
//!
//! CSV files always carry a header row and use '.' as decimal separator.
//! Parse errors name the line (1-based, header is line 1) and the field.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::freq::PowerLawModel;
use crate::lattice::{LatticeError, QubitLattice, Window};
use crate::tuning::{CampaignResult, QubitTuneRecord};
use crate::yield_mc::YieldCurveRow;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}, field `{field}`: {message}")]
    Field {
        line: u64,
        field: &'static str,
        message: String,
    },
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("{context}: line {line}, column {column}: {message}")]
    Json {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("design: {0}")]
    Design(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

fn json_error(context: &str, e: serde_json::Error) -> IoError {
    IoError::Json {
        context: context.to_owned(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads a headed CSV, checking the header exactly and handing each record
/// with its line number to `row`.
fn read_csv<R: Read, T>(
    reader: R,
    header: &[&str],
    mut row: impl FnMut(u64, &csv::StringRecord) -> Result<T>,
) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let found = rdr.headers().map_err(|e| csv_error(&e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IoError::Header {
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        out.push(row(line, &record)?);
    }
    Ok(out)
}

fn csv_error(e: &csv::Error) -> IoError {
    IoError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

fn field<'r>(
    record: &'r csv::StringRecord,
    idx: usize,
    line: u64,
    name: &'static str,
) -> Result<&'r str> {
    match record.get(idx) {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(IoError::Field {
            line,
            field: name,
            message: "missing value".into(),
        }),
    }
}

fn parse_field<T: FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
    name: &'static str,
) -> Result<T>
where
    T::Err: fmt::Display,
{
    let raw = field(record, idx, line, name)?;
    raw.parse().map_err(|e: T::Err| IoError::Field {
        line,
        field: name,
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn parse_finite(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
    name: &'static str,
) -> Result<f64> {
    let v: f64 = parse_field(record, idx, line, name)?;
    if !v.is_finite() {
        return Err(IoError::Field {
            line,
            field: name,
            message: format!("must be finite, got {v}"),
        });
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Resistance log

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Untuned,
    Pulse,
    Probe,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Untuned => "untuned",
            Phase::Pulse => "pulse",
            Phase::Probe => "probe",
        }
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "untuned" => Ok(Phase::Untuned),
            "pulse" => Ok(Phase::Pulse),
            "probe" => Ok(Phase::Probe),
            other => Err(format!("expected untuned|pulse|probe, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceLogRow {
    pub qubit_id: String,
    pub t_hr: f64,
    pub resistance_ohm: f64,
    pub phase: Phase,
}

pub const RESISTANCE_LOG_HEADER: [&str; 4] = ["qubit_id", "t_hr", "resistance_ohm", "phase"];

/// Parses a resistance log. `t_hr` must be >= 0 and `resistance_ohm` > 0.
pub fn parse_resistance_log<R: Read>(reader: R) -> Result<Vec<ResistanceLogRow>> {
    read_csv(reader, &RESISTANCE_LOG_HEADER, |line, rec| {
        let qubit_id = field(rec, 0, line, "qubit_id")?.to_owned();
        let t_hr = parse_finite(rec, 1, line, "t_hr")?;
        if t_hr < 0.0 {
            return Err(IoError::Field {
                line,
                field: "t_hr",
                message: format!("must be >= 0, got {t_hr}"),
            });
        }
        let resistance_ohm = parse_finite(rec, 2, line, "resistance_ohm")?;
        if resistance_ohm <= 0.0 {
            return Err(IoError::Field {
                line,
                field: "resistance_ohm",
                message: format!("must be > 0, got {resistance_ohm}"),
            });
        }
        let phase = parse_field(rec, 3, line, "phase")?;
        Ok(ResistanceLogRow {
            qubit_id,
            t_hr,
            resistance_ohm,
            phase,
        })
    })
}

pub fn read_resistance_log(path: &Path) -> Result<Vec<ResistanceLogRow>> {
    parse_resistance_log(open(path)?)
}

/// Canonical form: `t_hr` with 6 decimals, `resistance_ohm` with 4.
pub fn write_resistance_log<W: Write>(mut w: W, rows: &[ResistanceLogRow]) -> Result<()> {
    writeln!(w, "{}", RESISTANCE_LOG_HEADER.join(","))?;
    for r in rows {
        let mut rec = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        rec.write_record([
            r.qubit_id.as_str(),
            &format!("{:.6}", r.t_hr),
            &format!("{:.4}", r.resistance_ohm),
            r.phase.as_str(),
        ])
        .map_err(|e| IoError::Write(e.into()))?;
        w.write_all(
            &rec.into_inner()
                .map_err(|e| IoError::Write(e.into_error()))?,
        )?;
    }
    Ok(())
}

pub fn save_resistance_log(path: &Path, rows: &[ResistanceLogRow]) -> Result<()> {
    write_resistance_log(std::io::BufWriter::new(create(path)?), rows)
}

/// Untuned, last-pulse and probe readings of every tuned record. Pulses take
/// no time, so the first two share `t = 0`.
pub fn campaign_log_rows(result: &CampaignResult, probe_delay_hr: f64) -> Vec<ResistanceLogRow> {
    let mut rows = Vec::with_capacity(3 * result.records.len());
    for r in &result.records {
        rows.push(ResistanceLogRow {
            qubit_id: r.qubit_id.clone(),
            t_hr: 0.0,
            resistance_ohm: r.r_untuned,
            phase: Phase::Untuned,
        });
        if r.already_above {
            continue;
        }
        rows.push(ResistanceLogRow {
            qubit_id: r.qubit_id.clone(),
            t_hr: 0.0,
            resistance_ohm: r.r_last_pulse,
            phase: Phase::Pulse,
        });
        rows.push(ResistanceLogRow {
            qubit_id: r.qubit_id.clone(),
            t_hr: probe_delay_hr,
            resistance_ohm: r.r_tuned,
            phase: Phase::Probe,
        });
    }
    rows
}

/// Log of one relaxation measurement: the last pulse at `t = 0` followed by
/// probes at the trace times.
pub fn relaxation_log_rows(
    qubit_id: &str,
    r_stop: f64,
    trace: &[(f64, f64)],
) -> Vec<ResistanceLogRow> {
    std::iter::once(ResistanceLogRow {
        qubit_id: qubit_id.to_owned(),
        t_hr: 0.0,
        resistance_ohm: r_stop,
        phase: Phase::Pulse,
    })
    .chain(trace.iter().map(|&(t, dr)| ResistanceLogRow {
        qubit_id: qubit_id.to_owned(),
        t_hr: t,
        resistance_ohm: r_stop + dr,
        phase: Phase::Probe,
    }))
    .collect()
}

/// `(t since last pulse, R - R_a)` for one qubit of a log: probes after that
/// qubit's final pulse row. `qubit_id = None` takes the first qubit.
pub fn relaxation_series(
    rows: &[ResistanceLogRow],
    qubit_id: Option<&str>,
) -> Result<Vec<(f64, f64)>> {
    let id = match qubit_id {
        Some(id) => id,
        None => rows
            .first()
            .map(|r| r.qubit_id.as_str())
            .ok_or_else(|| IoError::Design("resistance log is empty".into()))?,
    };
    let own: Vec<&ResistanceLogRow> = rows.iter().filter(|r| r.qubit_id == id).collect();
    let pulse = own
        .iter()
        .rev()
        .find(|r| r.phase == Phase::Pulse)
        .ok_or_else(|| IoError::Design(format!("qubit `{id}` has no pulse row")))?;
    Ok(own
        .iter()
        .filter(|r| r.phase == Phase::Probe && r.t_hr > pulse.t_hr)
        .map(|r| (r.t_hr - pulse.t_hr, r.resistance_ohm - pulse.resistance_ohm))
        .collect())
}

// ---------------------------------------------------------------------------
// Frequency calibration data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub qubit_id: String,
    pub resistance_ohm: f64,
    pub f01max_mhz: f64,
}

pub const CALIBRATION_POINTS_HEADER: [&str; 3] = ["qubit_id", "resistance_ohm", "f01max_mhz"];

pub fn parse_calibration_points<R: Read>(reader: R) -> Result<Vec<CalibrationPoint>> {
    read_csv(reader, &CALIBRATION_POINTS_HEADER, |line, rec| {
        Ok(CalibrationPoint {
            qubit_id: field(rec, 0, line, "qubit_id")?.to_owned(),
            resistance_ohm: parse_finite(rec, 1, line, "resistance_ohm")?,
            f01max_mhz: parse_finite(rec, 2, line, "f01max_mhz")?,
        })
    })
}

pub fn read_calibration_points(path: &Path) -> Result<Vec<CalibrationPoint>> {
    parse_calibration_points(open(path)?)
}

/// `resistance_ohm` with 4 decimals, `f01max_mhz` with 3.
pub fn write_calibration_points<W: Write>(mut w: W, points: &[CalibrationPoint]) -> Result<()> {
    writeln!(w, "{}", CALIBRATION_POINTS_HEADER.join(","))?;
    for p in points {
        writeln!(
            w,
            "{},{:.4},{:.3}",
            p.qubit_id, p.resistance_ohm, p.f01max_mhz
        )?;
    }
    Ok(())
}

pub fn load_calibration(path: &Path) -> Result<PowerLawModel> {
    let ctx = path.display().to_string();
    let model: PowerLawModel =
        serde_json::from_str(&read_string(path)?).map_err(|e| json_error(&ctx, e))?;
    model
        .validate()
        .map_err(|e| IoError::Design(format!("{ctx}: {e}")))?;
    Ok(model)
}

pub fn save_calibration(path: &Path, model: &PowerLawModel) -> Result<()> {
    write_json(path, model)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::from)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Lattice design

/// On-disk design layout. Offsets (and optional measured frequencies) are
/// row-major grids; `null` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub rows: usize,
    pub cols: usize,
    pub base_frequency_mhz: f64,
    pub offsets_mhz: Vec<Vec<Option<f64>>>,
    pub design_window_mhz: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_mhz: Option<Vec<Vec<Option<f64>>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub lattice: QubitLattice,
    pub base_frequency_mhz: f64,
    pub design_window: Window,
}

impl DesignFile {
    pub fn from_lattice(lattice: &QubitLattice, base_frequency_mhz: f64, window: Window) -> Self {
        let grid = |f: &dyn Fn(usize) -> Option<f64>| -> Vec<Vec<Option<f64>>> {
            (0..lattice.rows())
                .map(|r| (0..lattice.cols()).map(|c| f(lattice.id(r, c))).collect())
                .collect()
        };
        let nodes = lattice.nodes();
        let has_measured = nodes.iter().any(|n| n.measured_f01max.is_some());
        Self {
            rows: lattice.rows(),
            cols: lattice.cols(),
            base_frequency_mhz,
            offsets_mhz: grid(&|i| Some(nodes[i].design_f01max - base_frequency_mhz)),
            design_window_mhz: [window.lo, window.hi],
            measured_mhz: has_measured.then(|| grid(&|i| nodes[i].measured_f01max)),
        }
    }

    pub fn into_design(self) -> Result<Design> {
        let flat = |grid: &[Vec<Option<f64>>], what: &str| -> Result<Vec<Option<f64>>> {
            if grid.len() != self.rows {
                return Err(IoError::Design(format!(
                    "{what} has {} rows, expected {}",
                    grid.len(),
                    self.rows
                )));
            }
            let mut out = Vec::with_capacity(self.rows * self.cols);
            for (r, row) in grid.iter().enumerate() {
                if row.len() > self.cols {
                    return Err(IoError::Design(format!(
                        "{what} row {r} has {} entries, expected {}",
                        row.len(),
                        self.cols
                    )));
                }
                for c in 0..self.cols {
                    out.push(row.get(c).copied().flatten().filter(|v| v.is_finite()));
                }
            }
            Ok(out)
        };
        if self.rows == 0 || self.cols == 0 {
            return Err(IoError::Design(format!(
                "empty lattice {}x{}",
                self.rows, self.cols
            )));
        }
        let offsets = flat(&self.offsets_mhz, "offsets_mhz")?;
        let missing: Vec<String> = offsets
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| format!("({}, {})", i / self.cols, i % self.cols))
            .collect();
        if !missing.is_empty() {
            return Err(IoError::Design(format!(
                "missing design frequency for node {}",
                missing.join(", ")
            )));
        }
        let [lo, hi] = self.design_window_mhz;
        let design_window = Window::new(lo, hi)?;
        let freqs = offsets
            .iter()
            .map(|o| self.base_frequency_mhz + o.unwrap_or(0.0))
            .collect();
        let mut lattice = QubitLattice::new(self.rows, self.cols, freqs)?;
        if let Some(measured) = &self.measured_mhz {
            lattice = lattice.with_measured(flat(measured, "measured_mhz")?)?;
        }
        Ok(Design {
            lattice,
            base_frequency_mhz: self.base_frequency_mhz,
            design_window,
        })
    }
}

pub fn parse_design(text: &str, context: &str) -> Result<Design> {
    let file: DesignFile = serde_json::from_str(text).map_err(|e| json_error(context, e))?;
    file.into_design()
}

pub fn load_design(path: &Path) -> Result<Design> {
    parse_design(&read_string(path)?, &path.display().to_string())
}

/// Names nodes lacking a measured frequency as `(row, col)`.
pub fn describe_missing(lattice: &QubitLattice, nodes: &[usize]) -> String {
    nodes
        .iter()
        .map(|&i| {
            let (r, c) = lattice.coords(i);
            format!("({r}, {c})")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

// ---------------------------------------------------------------------------
// Campaign persistence

pub const CAMPAIGN_HEADER: [&str; 8] = [
    "qubit_id",
    "r_target",
    "r_untuned",
    "threshold",
    "r_last_pulse",
    "r_tuned",
    "pulses",
    "already_above",
];

/// Floats use the shortest representation that parses back to the same
/// value, so save then load is exact.
pub fn write_campaign<W: Write>(w: W, result: &CampaignResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CAMPAIGN_HEADER)
        .map_err(|e| IoError::Write(e.into()))?;
    for r in &result.records {
        wtr.write_record([
            r.qubit_id.clone(),
            r.r_target.to_string(),
            r.r_untuned.to_string(),
            r.threshold.to_string(),
            r.r_last_pulse.to_string(),
            r.r_tuned.to_string(),
            r.pulses.to_string(),
            r.already_above.to_string(),
        ])
        .map_err(|e| IoError::Write(e.into()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_campaign<R: Read>(reader: R) -> Result<CampaignResult> {
    let records = read_csv(reader, &CAMPAIGN_HEADER, |line, rec| {
        Ok(QubitTuneRecord {
            qubit_id: field(rec, 0, line, "qubit_id")?.to_owned(),
            r_target: parse_finite(rec, 1, line, "r_target")?,
            r_untuned: parse_finite(rec, 2, line, "r_untuned")?,
            threshold: parse_finite(rec, 3, line, "threshold")?,
            r_last_pulse: parse_finite(rec, 4, line, "r_last_pulse")?,
            r_tuned: parse_finite(rec, 5, line, "r_tuned")?,
            pulses: parse_field(rec, 6, line, "pulses")?,
            already_above: parse_field(rec, 7, line, "already_above")?,
        })
    })?;
    Ok(CampaignResult { records })
}

pub fn save_campaign(path: &Path, result: &CampaignResult) -> Result<()> {
    write_campaign(std::io::BufWriter::new(create(path)?), result)
}

pub fn load_campaign(path: &Path) -> Result<CampaignResult> {
    parse_campaign(open(path)?)
}

// ---------------------------------------------------------------------------
// Yield tables

pub const YIELD_CURVE_HEADER: [&str; 5] = ["qubits", "sigma_mhz", "yield", "ci_lo", "ci_hi"];

/// `sigma_mhz` with 3 decimals, probabilities with 6.
pub fn write_yield_curve<W: Write>(mut w: W, rows: &[YieldCurveRow]) -> Result<()> {
    writeln!(w, "{}", YIELD_CURVE_HEADER.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{:.3},{:.6},{:.6},{:.6}",
            r.qubits, r.sigma_mhz, r.yield_estimate, r.ci_lo, r.ci_hi
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Run manifests

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// Input path to lowercase hex SHA-256 of its contents.
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(
        command: &str,
        argv: Vec<String>,
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> Self {
        Self {
            command: command.to_owned(),
            argv,
            config,
            seed,
            input_digests: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.input_digests
            .insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_string(path)?)
            .map_err(|e| json_error(&path.display().to_string(), e))
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use crate::tuning::{precision_stats, run_campaign, CampaignConfig, Scenario};
    use rand::Rng;

    fn sample_log(n: usize) -> Vec<ResistanceLogRow> {
        let mut rng = rng_from_seed(5);
        (0..n)
            .map(|i| ResistanceLogRow {
                qubit_id: format!("q{:03}", i % 17),
                t_hr: (i as f64) * 0.013 + rng.random_range(0.0..0.01),
                resistance_ohm: rng.random_range(3000.0..9000.0),
                phase: [Phase::Untuned, Phase::Pulse, Phase::Probe][i % 3],
            })
            .collect()
    }

    #[test]
    fn log_round_trip_is_byte_identical() {
        let mut first = Vec::new();
        write_resistance_log(&mut first, &sample_log(1000)).unwrap();
        let parsed = parse_resistance_log(first.as_slice()).unwrap();
        assert_eq!(parsed.len(), 1000);
        let mut second = Vec::new();
        write_resistance_log(&mut second, &parsed).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn log_errors_name_line_and_field() {
        let text = "qubit_id,t_hr,resistance_ohm,phase\nq1,0.0,4000,untuned\nq1,1.0,-5,probe\n";
        match parse_resistance_log(text.as_bytes()).unwrap_err() {
            IoError::Field { line, field, .. } => assert_eq!((line, field), (3, "resistance_ohm")),
            e => panic!("{e}"),
        }
        let text = "qubit_id,t_hr,resistance_ohm,phase\nq1,x,4000,untuned\n";
        match parse_resistance_log(text.as_bytes()).unwrap_err() {
            IoError::Field { line, field, .. } => assert_eq!((line, field), (2, "t_hr")),
            e => panic!("{e}"),
        }
        let text = "qubit_id,t_hr,resistance_ohm,phase\nq1,1,4000,annealed\n";
        assert!(matches!(
            parse_resistance_log(text.as_bytes()).unwrap_err(),
            IoError::Field { field: "phase", .. }
        ));
        let text = "qubit,t_hr,resistance_ohm,phase\n";
        assert!(matches!(
            parse_resistance_log(text.as_bytes()).unwrap_err(),
            IoError::Header { .. }
        ));
        let text = "qubit_id,t_hr,resistance_ohm,phase\nq1,1,4000\n";
        assert!(matches!(
            parse_resistance_log(text.as_bytes()).unwrap_err(),
            IoError::Csv { line: 2, .. }
        ));
    }

    #[test]
    fn relaxation_series_from_log() {
        let rows = relaxation_log_rows("q7", 5000.0, &[(0.5, 10.0), (1.0, 12.5)]);
        assert_eq!(
            relaxation_series(&rows, None).unwrap(),
            vec![(0.5, 10.0), (1.0, 12.5)]
        );
        assert!(relaxation_series(&rows, Some("q8")).is_err());
    }

    const DESIGN: &str = r#"{
        "rows": 2, "cols": 2, "base_frequency_mhz": 4600.0,
        "offsets_mhz": [[0.0, 50.0], [50.0, 100.0]],
        "design_window_mhz": [40.0, 110.0],
        "measured_mhz": [[4610.0, 4640.0], [null, 4700.0]]
    }"#;

    #[test]
    fn design_parses_and_round_trips() {
        let d = parse_design(DESIGN, "test").unwrap();
        assert_eq!(
            d.lattice.design_frequencies(),
            vec![4600.0, 4650.0, 4650.0, 4700.0]
        );
        assert_eq!(d.lattice.nodes()[2].measured_f01max, None);
        let file = DesignFile::from_lattice(&d.lattice, d.base_frequency_mhz, d.design_window);
        assert_eq!(file.into_design().unwrap(), d);
    }

    #[test]
    fn design_missing_node_is_named() {
        let text = DESIGN.replace("[50.0, 100.0]", "[50.0, null]");
        let err = parse_design(&text, "test").unwrap_err().to_string();
        assert!(err.contains("(1, 1)"), "{err}");
        let text = DESIGN.replace("[50.0, 100.0]", "[50.0]");
        let err = parse_design(&text, "test").unwrap_err().to_string();
        assert!(err.contains("(1, 1)"), "{err}");
        let err = parse_design("{\"rows\": 2", "d.json").unwrap_err();
        assert!(matches!(err, IoError::Json { line: 1, .. }), "{err}");
    }

    #[test]
    fn campaign_round_trip_preserves_stats() {
        let sc = Scenario::baseline(40, 3).unwrap();
        let res = run_campaign(&sc.qubits, &sc.targets, &CampaignConfig::new(3)).unwrap();
        let mut buf = Vec::new();
        write_campaign(&mut buf, &res).unwrap();
        let back = parse_campaign(buf.as_slice()).unwrap();
        assert_eq!(back, res);
        assert_eq!(
            precision_stats(&back, &sc.targets).unwrap(),
            precision_stats(&res, &sc.targets).unwrap()
        );
    }

    #[test]
    fn calibration_and_manifest_files() {
        let dir = tempfile::tempdir().unwrap();
        let model = PowerLawModel::anchored(0.5, 7711.0, 4556.0).unwrap();
        let p = dir.path().join("cal.json");
        save_calibration(&p, &model).unwrap();
        assert_eq!(load_calibration(&p).unwrap(), model);
        let text = fs::read_to_string(&p).unwrap();
        for key in ["beta", "alpha", "residual_sigma_mhz", "r_min", "r_max"] {
            assert!(text.contains(key));
        }

        let mut m = RunManifest::new(
            "yield",
            vec!["abaa".into()],
            serde_json::json!({"trials": 10}),
            Some(7),
        );
        m.add_input(&p).unwrap();
        let digest = m.input_digests.values().next().unwrap();
        assert_eq!(digest.len(), 64);
        let mp = dir.path().join("manifest.json");
        m.save(&mp).unwrap();
        assert_eq!(RunManifest::load(&mp).unwrap(), m);
        // SHA-256 of the empty input
        let empty = dir.path().join("empty");
        fs::write(&empty, b"").unwrap();
        assert_eq!(
            file_digest(&empty).unwrap(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn calibration_points_round_trip() {
        let pts = vec![
            CalibrationPoint {
                qubit_id: "a".into(),
                resistance_ohm: 7711.25,
                f01max_mhz: 4556.125,
            },
            CalibrationPoint {
                qubit_id: "b".into(),
                resistance_ohm: 8000.0,
                f01max_mhz: 4470.5,
            },
        ];
        let mut buf = Vec::new();
        write_calibration_points(&mut buf, &pts).unwrap();
        assert_eq!(parse_calibration_points(buf.as_slice()).unwrap(), pts);
    }

    #[test]
    fn yield_table_format() {
        let mut buf = Vec::new();
        write_yield_curve(
            &mut buf,
            &[YieldCurveRow {
                qubits: 9,
                sigma_mhz: 7.7,
                yield_estimate: 0.86,
                ci_lo: 0.85,
                ci_hi: 0.87,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "qubits,sigma_mhz,yield,ci_lo,ci_hi\n9,7.700,0.860000,0.850000,0.870000\n"
        );
    }
}
