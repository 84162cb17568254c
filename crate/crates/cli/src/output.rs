//! CSV table and JSON summary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use cvqnd::protocols::{ProtocolConfig, RunResult, SweepPoint};
use serde::Serialize;

pub const HEADER: &str = "axis_value,input_logneg,output_logneg,success_weight,pre_norm_trace,cutoff";

const SIG_DIGITS: usize = 12;

/// C-style `%.12g`: 12 significant digits, trailing zeros dropped, exponent
/// form outside `1e-5 <= |v| < 1e12`.
pub fn format_g(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_g).unwrap_or_default()
}

/// One CSV line without the terminator. Failed points keep their axis
/// value and leave the rest blank.
pub fn csv_row(point: &SweepPoint) -> String {
    match &point.result {
        Ok(r) => format!(
            "{},{},{},{},{},{}",
            format_g(point.value),
            format_g(r.input_log_neg),
            opt(r.output_log_neg),
            format_g(r.success_weight),
            opt(r.pre_normalization_trace),
            r.cutoff_used
        ),
        Err(_) => format!("{},,,,,", format_g(point.value)),
    }
}

pub fn write_csv(points: &[SweepPoint], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for p in points {
        writeln!(w, "{}", csv_row(p))?;
    }
    w.flush()
}

#[derive(Debug)]
pub struct OutputError {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for OutputError {}

pub fn emit_csv(points: &[SweepPoint], path: &Path) -> Result<(), OutputError> {
    let wrap = |source| OutputError { path: path.to_owned(), source };
    let file = File::create(path).map_err(wrap)?;
    write_csv(points, BufWriter::new(file)).map_err(wrap)
}

/// `<csv stem>.json` beside the CSV.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

#[derive(Debug, Serialize)]
pub struct PointError {
    pub index: usize,
    pub axis_value: f64,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct DriftStats {
    /// Points run with the adaptive policy.
    pub points: usize,
    pub max: Option<f64>,
    pub max_at: Option<f64>,
    pub max_cutoff_used: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub protocol: &'static str,
    pub axis: Option<String>,
    pub points: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Successful points whose conditioning event had zero weight.
    pub zero_probability: usize,
    pub wall_time_s: f64,
    pub cutoff_drift: DriftStats,
    pub errors: Vec<PointError>,
    pub config: &'a ProtocolConfig,
}

impl<'a> Summary<'a> {
    pub fn new(
        config: &'a ProtocolConfig,
        axis: Option<String>,
        points: &[SweepPoint],
        wall_time: Duration,
    ) -> Self {
        let ok: Vec<(f64, &RunResult)> =
            points.iter().filter_map(|p| p.result.as_ref().ok().map(|r| (p.value, r))).collect();
        let errors: Vec<PointError> = points
            .iter()
            .enumerate()
            .filter_map(|(index, p)| {
                p.result.as_ref().err().map(|e| PointError {
                    index,
                    axis_value: p.value,
                    message: e.to_string(),
                })
            })
            .collect();
        let drifts: Vec<(f64, f64)> =
            ok.iter().filter_map(|(v, r)| r.cutoff_drift.map(|d| (*v, d))).collect();
        let worst = drifts.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1));
        Summary {
            protocol: config.name(),
            axis,
            points: points.len(),
            succeeded: ok.len(),
            failed: errors.len(),
            zero_probability: ok.iter().filter(|(_, r)| r.output_log_neg.is_none()).count(),
            wall_time_s: wall_time.as_secs_f64(),
            cutoff_drift: DriftStats {
                points: drifts.len(),
                max: worst.map(|w| w.1),
                max_at: worst.map(|w| w.0),
                max_cutoff_used: ok.iter().map(|(_, r)| r.cutoff_used).max(),
            },
            errors,
            config,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        let wrap = |source| OutputError { path: path.to_owned(), source };
        let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| wrap(e.into()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(wrap)
    }
}
