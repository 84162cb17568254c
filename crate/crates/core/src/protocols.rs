//! End-to-end pipelines and parameter sweeps.
//!
//! Every run starts from a two-mode squeezed vacuum shared by `A` and `B`
//! with local ancillas `a` and `b`. Protocol I couples each arm to a vacuum
//! ancilla and heralds on a click of both on/off detectors. Protocol II
//! couples each arm to a photon-subtracted squeezed ancilla and conditions on
//! homodyne outcomes instead.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::branch::{
    homodyne_branches, on_off_branches, pre_measurement_cov, prepare_subtracted_ancilla, HomodyneLoss,
    HomodyneSettings,
};
use crate::entanglement::{log_negativity, tmsv_log_negativity_baseline, EntanglementReport};
use crate::error::{check_finite, check_unit, Error, Result};
use crate::fock::{
    assemble_protocol1, assemble_protocol2, gaussian_density, homodyne_normalization, DensityMatrix,
    FockCutoff,
};
use crate::phase_space::{beamsplitter_map, qnd_map, tmsv_state, QndKind, SymplecticMap};

/// How the photon-number cutoff is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum CutoffPolicy {
    Fixed(FockCutoff),
    /// Raise the cutoff by `step` until consecutive log-negativities differ
    /// by less than `tol`, or `max` is reached.
    Adaptive {
        start: FockCutoff,
        step: usize,
        tol: f64,
        max: FockCutoff,
    },
}

impl CutoffPolicy {
    pub fn fixed(n_max: usize) -> Result<Self> {
        Ok(Self::Fixed(FockCutoff::new(n_max)?))
    }

    pub fn adaptive(start: usize) -> Result<Self> {
        Ok(Self::Adaptive { start: FockCutoff::new(start)?, step: 2, tol: 1e-4, max: FockCutoff::new(30)? })
    }
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self::Fixed(FockCutoff::DEFAULT)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Protocol1Config {
    pub r: f64,
    pub kappa: f64,
    pub kind: QndKind,
    pub eta: f64,
    pub cutoff: CutoffPolicy,
}

impl Default for Protocol1Config {
    fn default() -> Self {
        Self { r: 0.115, kappa: 0.1, kind: QndKind::XP, eta: 1.0, cutoff: CutoffPolicy::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeamsplitterConfig {
    pub r: f64,
    /// Amplitude transmittance.
    pub t: f64,
    pub eta: f64,
    pub cutoff: CutoffPolicy,
}

impl Default for BeamsplitterConfig {
    fn default() -> Self {
        Self { r: 0.115, t: 0.99, eta: 1.0, cutoff: CutoffPolicy::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Protocol2Config {
    pub r: f64,
    /// Ancilla squeezing before subtraction.
    pub s: f64,
    /// Amplitude transmittance of the subtraction beamsplitter.
    pub t: f64,
    pub kappa: f64,
    pub kind: QndKind,
    /// Subtraction detector efficiency.
    pub eta: f64,
    /// Homodyne efficiency.
    pub xi: f64,
    pub theta: f64,
    pub z: [f64; 2],
    pub loss: HomodyneLoss,
    pub cutoff: CutoffPolicy,
}

impl Default for Protocol2Config {
    fn default() -> Self {
        Self {
            r: 0.115,
            s: 0.2,
            t: 0.95,
            kappa: 0.5,
            kind: QndKind::XP,
            eta: 1.0,
            xi: 1.0,
            theta: 0.0,
            z: [0.0, 0.0],
            loss: HomodyneLoss::default(),
            cutoff: CutoffPolicy::default(),
        }
    }
}

/// The pure TMSV pushed through the Fock pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineConfig {
    pub r: f64,
    pub cutoff: CutoffPolicy,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { r: 0.115, cutoff: CutoffPolicy::Fixed(FockCutoff::new(25).expect("nonzero")) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    /// Closed-form log-negativity of the input TMSV.
    pub input_log_neg: f64,
    /// `None` when the conditioning event has zero probability.
    pub output_log_neg: Option<f64>,
    /// Click probability, or joint density with the homodyne outcome.
    pub success_weight: f64,
    /// Trace of the truncated state before renormalization.
    pub pre_normalization_trace: Option<f64>,
    pub cutoff_used: usize,
    /// `|ℰ(n) - ℰ(n - step)|` for the last adaptive step.
    pub cutoff_drift: Option<f64>,
}

impl RunResult {
    pub fn gain(&self) -> Option<f64> {
        self.output_log_neg.map(|e| e - self.input_log_neg)
    }
}

struct Evaluated {
    report: EntanglementReport,
    raw_trace: f64,
    drift: Option<f64>,
}

fn evaluate(policy: CutoffPolicy, build: impl Fn(FockCutoff) -> Result<DensityMatrix>) -> Result<Evaluated> {
    let at = |n: FockCutoff| -> Result<(EntanglementReport, f64)> {
        let rho = build(n)?;
        Ok((log_negativity(&rho)?, rho.raw_trace()))
    };
    match policy {
        CutoffPolicy::Fixed(n) => {
            let (report, raw_trace) = at(n)?;
            Ok(Evaluated { report, raw_trace, drift: None })
        }
        CutoffPolicy::Adaptive { start, step, tol, max } => {
            let step = step.max(1);
            let (mut report, mut raw_trace) = at(start)?;
            let mut drift = None;
            let mut n = start.n_max();
            while n + step <= max.n_max() {
                n += step;
                let (next, trace) = at(FockCutoff::new(n)?)?;
                let d = (next.log_negativity - report.log_negativity).abs();
                report = next;
                raw_trace = trace;
                drift = Some(d);
                if d < tol {
                    break;
                }
            }
            Ok(Evaluated { report, raw_trace, drift })
        }
    }
}

fn start_cutoff(policy: CutoffPolicy) -> usize {
    match policy {
        CutoffPolicy::Fixed(n) => n.n_max(),
        CutoffPolicy::Adaptive { start, .. } => start.n_max(),
    }
}

fn zero_probability(r: f64, policy: CutoffPolicy) -> RunResult {
    RunResult {
        input_log_neg: tmsv_log_negativity_baseline(r),
        output_log_neg: None,
        success_weight: 0.0,
        pre_normalization_trace: None,
        cutoff_used: start_cutoff(policy),
        cutoff_drift: None,
    }
}

/// Protocol I with an arbitrary two-mode interaction on `(A, a)` and `(B, b)`.
pub fn run_protocol1_with_map(
    r: f64,
    interaction: &SymplecticMap,
    eta: f64,
    cutoff: CutoffPolicy,
) -> Result<RunResult> {
    check_finite("r", r)?;
    let gamma = pre_measurement_cov(r, interaction, eta)?;
    let mixture = on_off_branches(&gamma)?;
    let success_weight = mixture.success_weight();
    if success_weight <= 0.0 {
        return Ok(zero_probability(r, cutoff));
    }
    let ev = evaluate(cutoff, |n| assemble_protocol1(&mixture, n))?;
    Ok(RunResult {
        input_log_neg: tmsv_log_negativity_baseline(r),
        output_log_neg: Some(ev.report.log_negativity),
        success_weight,
        pre_normalization_trace: Some(ev.raw_trace),
        cutoff_used: ev.report.cutoff_used,
        cutoff_drift: ev.drift,
    })
}

pub fn run_protocol1(cfg: &Protocol1Config) -> Result<RunResult> {
    check_finite("kappa", cfg.kappa)?;
    run_protocol1_with_map(cfg.r, &qnd_map(cfg.kind, cfg.kappa, (0, 1), 2)?, cfg.eta, cfg.cutoff)
}

pub fn run_protocol1_beamsplitter(cfg: &BeamsplitterConfig) -> Result<RunResult> {
    run_protocol1_with_map(cfg.r, &beamsplitter_map(cfg.t)?, cfg.eta, cfg.cutoff)
}

/// Protocol II with an arbitrary two-mode interaction.
pub fn run_protocol2_with_map(cfg: &Protocol2Config, interaction: &SymplecticMap) -> Result<RunResult> {
    check_finite("r", cfg.r)?;
    check_unit("xi", cfg.xi)?;
    check_finite("theta", cfg.theta)?;
    for z in cfg.z {
        check_finite("z", z)?;
    }
    let ancilla = prepare_subtracted_ancilla(cfg.s, cfg.t, cfg.eta)?;
    if ancilla.success_weight() <= 0.0 {
        return Ok(zero_probability(cfg.r, cfg.cutoff));
    }
    let settings = HomodyneSettings { theta: cfg.theta, xi: cfg.xi, outcome: cfg.z, loss: cfg.loss };
    let branches = homodyne_branches(cfg.r, &ancilla, interaction, &settings)?;
    let success_weight = match homodyne_normalization(&branches) {
        Ok(m) => 1.0 / m,
        Err(Error::ZeroSuccessProbability(_)) => return Ok(zero_probability(cfg.r, cfg.cutoff)),
        Err(e) => return Err(e),
    };
    let ev = evaluate(cfg.cutoff, |n| assemble_protocol2(&branches, n))?;
    Ok(RunResult {
        input_log_neg: tmsv_log_negativity_baseline(cfg.r),
        output_log_neg: Some(ev.report.log_negativity),
        success_weight,
        pre_normalization_trace: Some(ev.raw_trace),
        cutoff_used: ev.report.cutoff_used,
        cutoff_drift: ev.drift,
    })
}

pub fn run_protocol2(cfg: &Protocol2Config) -> Result<RunResult> {
    check_finite("kappa", cfg.kappa)?;
    run_protocol2_with_map(cfg, &qnd_map(cfg.kind, cfg.kappa, (0, 1), 2)?)
}

pub fn run_baseline(cfg: &BaselineConfig) -> Result<RunResult> {
    let state = tmsv_state(cfg.r)?;
    let ev = evaluate(cfg.cutoff, |n| gaussian_density(&state, n))?;
    Ok(RunResult {
        input_log_neg: tmsv_log_negativity_baseline(cfg.r),
        output_log_neg: Some(ev.report.log_negativity),
        success_weight: 1.0,
        pre_normalization_trace: Some(ev.raw_trace),
        cutoff_used: ev.report.cutoff_used,
        cutoff_drift: ev.drift,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum ProtocolConfig {
    One(Protocol1Config),
    OneBs(BeamsplitterConfig),
    Two(Protocol2Config),
    Baseline(BaselineConfig),
}

impl ProtocolConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::One(_) => "one",
            Self::OneBs(_) => "one_bs",
            Self::Two(_) => "two",
            Self::Baseline(_) => "baseline",
        }
    }

    pub fn run(&self) -> Result<RunResult> {
        match self {
            Self::One(c) => run_protocol1(c),
            Self::OneBs(c) => run_protocol1_beamsplitter(c),
            Self::Two(c) => run_protocol2(c),
            Self::Baseline(c) => run_baseline(c),
        }
    }

    fn cutoff_mut(&mut self) -> &mut CutoffPolicy {
        match self {
            Self::One(c) => &mut c.cutoff,
            Self::OneBs(c) => &mut c.cutoff,
            Self::Two(c) => &mut c.cutoff,
            Self::Baseline(c) => &mut c.cutoff,
        }
    }

    /// Copy with `axis` set to `value`.
    pub fn with(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut out = self.clone();
        let protocol = self.name();
        let bad = || Error::InvalidAxis { axis: axis.name(), protocol };
        match (axis, &mut out) {
            (SweepAxis::R, Self::One(c)) => c.r = value,
            (SweepAxis::R, Self::OneBs(c)) => c.r = value,
            (SweepAxis::R, Self::Two(c)) => c.r = value,
            (SweepAxis::R, Self::Baseline(c)) => c.r = value,
            (SweepAxis::Kappa, Self::One(c)) => c.kappa = value,
            (SweepAxis::Kappa, Self::Two(c)) => c.kappa = value,
            (SweepAxis::Eta, Self::One(c)) => c.eta = value,
            (SweepAxis::Eta, Self::OneBs(c)) => c.eta = value,
            (SweepAxis::Eta, Self::Two(c)) => c.eta = value,
            (SweepAxis::T, Self::OneBs(c)) => c.t = value,
            (SweepAxis::T, Self::Two(c)) => c.t = value,
            (SweepAxis::S, Self::Two(c)) => c.s = value,
            (SweepAxis::Xi, Self::Two(c)) => c.xi = value,
            (SweepAxis::Theta, Self::Two(c)) => c.theta = value,
            (SweepAxis::Z, Self::Two(c)) => c.z = [value, value],
            (SweepAxis::Cutoff, cfg) => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Domain { name: "cutoff", value, range: "positive integers" });
                }
                *cfg.cutoff_mut() = CutoffPolicy::fixed(value as usize)?;
            }
            _ => return Err(bad()),
        }
        Ok(out)
    }
}

/// A config field that can be swept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    R,
    Kappa,
    Eta,
    Xi,
    S,
    T,
    Theta,
    Z,
    Cutoff,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 9] = [
        SweepAxis::R,
        SweepAxis::Kappa,
        SweepAxis::Eta,
        SweepAxis::Xi,
        SweepAxis::S,
        SweepAxis::T,
        SweepAxis::Theta,
        SweepAxis::Z,
        SweepAxis::Cutoff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::R => "r",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Eta => "eta",
            SweepAxis::Xi => "xi",
            SweepAxis::S => "s",
            SweepAxis::T => "T",
            SweepAxis::Theta => "theta",
            SweepAxis::Z => "z",
            SweepAxis::Cutoff => "cutoff",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownAxis(pub String);

impl fmt::Display for UnknownAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown sweep axis `{}`", self.0)
    }
}

impl std::error::Error for UnknownAxis {}

impl FromStr for SweepAxis {
    type Err = UnknownAxis;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s || a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownAxis(s.to_owned()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub result: Result<RunResult>,
}

/// Runs `base` once per value of `axis`, on `jobs` threads (0 picks the
/// rayon default). Results come back in input order and a failing point
/// does not stop the others.
pub fn sweep(base: &ProtocolConfig, axis: SweepAxis, values: &[f64], jobs: usize) -> Vec<SweepPoint> {
    use rayon::prelude::*;
    let job = |&value: &f64| SweepPoint { value, result: base.with(axis, value).and_then(|cfg| cfg.run()) };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| values.par_iter().map(job).collect()),
        Err(_) => values.iter().map(job).collect(),
    }
}

/// `dB = 10 log₁₀ e^{2r}`.
pub fn squeezing_from_db(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}
