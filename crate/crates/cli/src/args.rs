//! Turning flags and a config file into a validated run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use cvqnd::branch::HomodyneLoss;
use cvqnd::phase_space::QndKind;
use cvqnd::protocols::{
    BaselineConfig, BeamsplitterConfig, CutoffPolicy, Protocol1Config, Protocol2Config, ProtocolConfig,
    SweepAxis,
};

/// A problem with the user's input. Always exits with status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    One,
    OneBs,
    Two,
    Baseline,
}

impl Protocol {
    pub fn parse(s: &str) -> Result<Self, UsageError> {
        match s {
            "one" | "protocol1" => Ok(Self::One),
            "one_bs" | "one-bs" | "protocol1-bs" => Ok(Self::OneBs),
            "two" | "protocol2" => Ok(Self::Two),
            "baseline" => Ok(Self::Baseline),
            other => {
                Err(usage(format!("protocol: unknown value `{other}` (expected one, one_bs, two, baseline)")))
            }
        }
    }

    /// Config-file section holding this protocol's settings.
    pub fn section(self) -> &'static str {
        match self {
            Self::One => "protocol1",
            Self::OneBs => "protocol1-bs",
            Self::Two => "protocol2",
            Self::Baseline => "baseline",
        }
    }

    fn accepts(self, key: &str) -> bool {
        let shared = ["r", "cutoff", "adaptive", "jobs", "out"];
        let own: &[&str] = match self {
            Self::One => &["kappa", "kind", "eta"],
            Self::OneBs => &["T", "eta"],
            Self::Two => &["kappa", "kind", "eta", "xi", "s", "T", "theta", "z", "homodyne-loss"],
            Self::Baseline => &[],
        };
        shared.contains(&key) || own.contains(&key)
    }
}

/// Physical and run parameters shared by every subcommand. Every field is
/// optional so config-file values can fill the gaps.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct Params {
    /// Two-mode squeezing of the input state
    #[arg(long)]
    pub r: Option<f64>,
    /// QND coupling strength
    #[arg(long)]
    pub kappa: Option<f64>,
    /// QND quadrature pair: xx, xp, px or pp
    #[arg(long)]
    pub kind: Option<String>,
    /// On/off detector efficiency
    #[arg(long)]
    pub eta: Option<f64>,
    /// Homodyne detector efficiency
    #[arg(long)]
    pub xi: Option<f64>,
    /// Ancilla squeezing before photon subtraction
    #[arg(long)]
    pub s: Option<f64>,
    /// Beamsplitter amplitude transmittance
    #[arg(long = "T", id = "T")]
    pub t: Option<f64>,
    /// Homodyne angle
    #[arg(long)]
    pub theta: Option<f64>,
    /// Homodyne outcome, `z` or `za,zb`
    #[arg(long)]
    pub z: Option<String>,
    /// Homodyne loss model: symmetric or cross-scaled
    #[arg(long = "homodyne-loss")]
    pub homodyne_loss: Option<String>,
    /// Photon-number cutoff per mode (start value with --adaptive)
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Raise the cutoff until the log-negativity settles
    #[arg(long)]
    pub adaptive: bool,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// key=value config file with per-protocol sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; a JSON summary is written next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sweep-only flags.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct SweepParams {
    /// one, one_bs, two or baseline
    #[arg(long)]
    pub protocol: Option<String>,
    /// Parameter to vary
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated list, or `start:stop:count` for evenly spaced values
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<String>,
}

/// Raw `key = value` pairs from a config file: the unsectioned preamble and
/// the named sections, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub global: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

const KNOWN_KEYS: [&str; 17] = [
    "r",
    "kappa",
    "kind",
    "eta",
    "xi",
    "s",
    "T",
    "theta",
    "z",
    "homodyne-loss",
    "cutoff",
    "adaptive",
    "jobs",
    "out",
    "protocol",
    "axis",
    "values",
];

const SECTIONS: [&str; 5] = ["protocol1", "protocol1-bs", "protocol2", "baseline", "sweep"];

impl ConfigFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, UsageError> {
        let mut out = ConfigFile::default();
        let mut current: Option<usize> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let at = || format!("{}:{}", origin.display(), no + 1);
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(usage(format!("{}: unknown section [{name}]", at())));
                }
                out.sections.push((name.to_owned(), Vec::new()));
                current = Some(out.sections.len() - 1);
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| usage(format!("{}: expected `key = value`", at())))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(usage(format!("{}: unknown key `{key}`", at())));
            }
            let entry = (key.to_owned(), value.to_owned());
            match current {
                Some(i) => out.sections[i].1.push(entry),
                None => out.global.push(entry),
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    fn section<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a (String, String)> {
        self.sections.iter().filter(move |(n, _)| n == name).flat_map(|(_, kv)| kv.iter())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value.parse().map_err(|_| usage(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, UsageError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(usage(format!("{key}: expected true or false, got `{value}`"))),
    }
}

impl Params {
    /// Fills unset fields from `key = value`. Flags set on the command line
    /// are never overwritten.
    fn absorb(&mut self, key: &str, value: &str, flags: &Params) -> Result<(), UsageError> {
        macro_rules! fill {
            ($field:ident, $v:expr) => {
                if flags.$field.is_none() {
                    self.$field = Some($v);
                }
            };
        }
        match key {
            "r" => fill!(r, parse_num(key, value)?),
            "kappa" => fill!(kappa, parse_num(key, value)?),
            "kind" => fill!(kind, value.to_owned()),
            "eta" => fill!(eta, parse_num(key, value)?),
            "xi" => fill!(xi, parse_num(key, value)?),
            "s" => fill!(s, parse_num(key, value)?),
            "T" => fill!(t, parse_num(key, value)?),
            "theta" => fill!(theta, parse_num(key, value)?),
            "z" => fill!(z, value.to_owned()),
            "homodyne-loss" => fill!(homodyne_loss, value.to_owned()),
            "cutoff" => fill!(cutoff, parse_num(key, value)?),
            "jobs" => fill!(jobs, parse_num(key, value)?),
            "out" => fill!(out, PathBuf::from(value)),
            "adaptive" => {
                if !flags.adaptive {
                    self.adaptive = parse_bool(key, value)?;
                }
            }
            _ => unreachable!("sweep keys are handled by the caller"),
        }
        Ok(())
    }

    /// Flag names that were given explicitly.
    fn given(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut note = |set: bool, name| {
            if set {
                out.push(name);
            }
        };
        note(self.r.is_some(), "r");
        note(self.kappa.is_some(), "kappa");
        note(self.kind.is_some(), "kind");
        note(self.eta.is_some(), "eta");
        note(self.xi.is_some(), "xi");
        note(self.s.is_some(), "s");
        note(self.t.is_some(), "T");
        note(self.theta.is_some(), "theta");
        note(self.z.is_some(), "z");
        note(self.homodyne_loss.is_some(), "homodyne-loss");
        out
    }
}

/// Everything needed to run: the base protocol, an optional sweep, and
/// where to write.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub config: ProtocolConfig,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

fn check_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<f64, UsageError> {
    if v.is_finite() && (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(usage(format!("{name} = {v} is outside [{lo}, {hi}]")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<f64, UsageError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{name} = {v} is not a finite number")))
    }
}

fn parse_kind(s: &str) -> Result<QndKind, UsageError> {
    s.parse().map_err(|_| usage(format!("kind: unknown value `{s}` (expected xx, xp, px, pp)")))
}

fn parse_outcome(s: &str) -> Result<[f64; 2], UsageError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let z = match parts.as_slice() {
        [z] => {
            let z = parse_num("z", z)?;
            [z, z]
        }
        [a, b] => [parse_num("z", a)?, parse_num("z", b)?],
        _ => return Err(usage(format!("z: expected `z` or `za,zb`, got `{s}`"))),
    };
    for v in z {
        check_finite("z", v)?;
    }
    Ok(z)
}

fn parse_loss(s: &str) -> Result<HomodyneLoss, UsageError> {
    match s {
        "symmetric" => Ok(HomodyneLoss::Symmetric),
        "cross-scaled" => Ok(HomodyneLoss::CrossScaled),
        other => {
            Err(usage(format!("homodyne-loss: unknown value `{other}` (expected symmetric or cross-scaled)")))
        }
    }
}

/// `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_values(s: &str) -> Result<Vec<f64>, UsageError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let [a, b, n] = s.split(':').collect::<Vec<_>>().as_slice() {
        let (a, b): (f64, f64) = (parse_num("values", a.trim())?, parse_num("values", b.trim())?);
        let n: usize = parse_num("values", n.trim())?;
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        });
    }
    s.split(',').map(|v| parse_num("values", v.trim())).collect()
}

fn cutoff_policy(p: &Params) -> Result<CutoffPolicy, UsageError> {
    let n = p.cutoff.unwrap_or(12);
    if n == 0 {
        return Err(usage("cutoff = 0 is outside [1, ∞)"));
    }
    let policy = if p.adaptive { CutoffPolicy::adaptive(n) } else { CutoffPolicy::fixed(n) };
    policy.map_err(|e| usage(e.to_string()))
}

fn build_config(protocol: Protocol, p: &Params) -> Result<ProtocolConfig, UsageError> {
    let cutoff = cutoff_policy(p)?;
    let kind = p.kind.as_deref().map(parse_kind).transpose()?;
    Ok(match protocol {
        Protocol::One => {
            let d = Protocol1Config::default();
            ProtocolConfig::One(Protocol1Config {
                r: check_finite("r", p.r.unwrap_or(d.r))?,
                kappa: check_finite("kappa", p.kappa.unwrap_or(d.kappa))?,
                kind: kind.unwrap_or(d.kind),
                eta: check_range("eta", p.eta.unwrap_or(d.eta), 0.0, 1.0)?,
                cutoff,
            })
        }
        Protocol::OneBs => {
            let d = BeamsplitterConfig::default();
            ProtocolConfig::OneBs(BeamsplitterConfig {
                r: check_finite("r", p.r.unwrap_or(d.r))?,
                t: check_range("T", p.t.unwrap_or(d.t), 0.0, 1.0)?,
                eta: check_range("eta", p.eta.unwrap_or(d.eta), 0.0, 1.0)?,
                cutoff,
            })
        }
        Protocol::Two => {
            let d = Protocol2Config::default();
            ProtocolConfig::Two(Protocol2Config {
                r: check_finite("r", p.r.unwrap_or(d.r))?,
                s: check_finite("s", p.s.unwrap_or(d.s))?,
                t: check_range("T", p.t.unwrap_or(d.t), 0.0, 1.0)?,
                kappa: check_finite("kappa", p.kappa.unwrap_or(d.kappa))?,
                kind: kind.unwrap_or(d.kind),
                eta: check_range("eta", p.eta.unwrap_or(d.eta), 0.0, 1.0)?,
                xi: check_range("xi", p.xi.unwrap_or(d.xi), 0.0, 1.0)?,
                theta: check_finite("theta", p.theta.unwrap_or(d.theta))?,
                z: p.z.as_deref().map(parse_outcome).transpose()?.unwrap_or(d.z),
                loss: p.homodyne_loss.as_deref().map(parse_loss).transpose()?.unwrap_or(d.loss),
                cutoff,
            })
        }
        Protocol::Baseline => {
            ProtocolConfig::Baseline(BaselineConfig { r: check_finite("r", p.r.unwrap_or(0.115))?, cutoff })
        }
    })
}

/// Flags override the protocol section, which overrides the preamble.
/// `sweep` selects the protocol from flags or the `[sweep]` section.
pub fn resolve(
    protocol: Option<Protocol>,
    flags: &Params,
    sweep: Option<&SweepParams>,
) -> Result<RunSpec, UsageError> {
    let file = match &flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut sweep_flags = sweep.cloned().unwrap_or_default();
    if sweep.is_some() {
        for (k, v) in file.global.iter().chain(file.section("sweep")) {
            let slot = match k.as_str() {
                "protocol" => &mut sweep_flags.protocol,
                "axis" => &mut sweep_flags.axis,
                "values" => &mut sweep_flags.values,
                _ => continue,
            };
            if slot.is_none() {
                *slot = Some(v.clone());
            }
        }
    }
    let protocol = match protocol {
        Some(p) => p,
        None => Protocol::parse(
            sweep_flags.protocol.as_deref().ok_or_else(|| usage("sweep: --protocol is required"))?,
        )?,
    };

    for name in flags.given() {
        if !protocol.accepts(name) {
            return Err(usage(format!("--{name} does not apply to {}", protocol.section())));
        }
    }
    let mut merged = flags.clone();
    let sweep_keys = ["protocol", "axis", "values"];
    // section first so it beats the preamble
    for (k, v) in file.section(protocol.section()) {
        if sweep_keys.contains(&k.as_str()) || !protocol.accepts(k) {
            return Err(usage(format!("[{}] key `{k}` does not apply here", protocol.section())));
        }
        let snapshot = merged.clone();
        merged.absorb(k, v, &snapshot)?;
    }
    let sweep_section: Vec<_> = if sweep.is_some() { file.section("sweep").collect() } else { Vec::new() };
    for (k, v) in sweep_section.into_iter().chain(file.global.iter()) {
        if sweep_keys.contains(&k.as_str()) || !protocol.accepts(k) {
            continue;
        }
        let snapshot = merged.clone();
        merged.absorb(k, v, &snapshot)?;
    }

    let config = build_config(protocol, &merged)?;
    let sweep = match sweep {
        None => None,
        Some(_) => {
            let axis_name = sweep_flags.axis.as_deref().ok_or_else(|| usage("sweep: --axis is required"))?;
            let axis: SweepAxis =
                axis_name.parse().map_err(|e: cvqnd::protocols::UnknownAxis| usage(e.to_string()))?;
            if axis != SweepAxis::Cutoff && !protocol.accepts(axis.name()) {
                return Err(usage(format!("axis `{axis}` does not apply to {}", protocol.section())));
            }
            let values = parse_values(
                sweep_flags.values.as_deref().ok_or_else(|| usage("sweep: --values is required"))?,
            )?;
            Some((axis, values))
        }
    };
    Ok(RunSpec { config, sweep, out: merged.out, jobs: merged.jobs.unwrap_or(0) })
}
