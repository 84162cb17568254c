//! `cvqnd`: run the QND concentration protocols from the command line.

mod args;
mod output;

use std::io::{self, BufWriter};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use cvqnd::protocols::{sweep, ProtocolConfig, SweepPoint};

use args::{resolve, Params, Protocol, RunSpec, SweepParams, UsageError};
use output::{emit_csv, summary_path, write_csv, Summary};

#[derive(Parser, Debug)]
#[command(name = "cvqnd", version, about = "Entanglement concentration with QND interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// On/off heralding after QND coupling to vacuum ancillas
    Protocol1(Params),
    /// On/off heralding after beamsplitter tapping
    #[command(name = "protocol1-bs")]
    Protocol1Bs(Params),
    /// Homodyne conditioning with photon-subtracted squeezed ancillas
    Protocol2(Params),
    /// Input two-mode squeezed vacuum only
    Baseline(Params),
    /// Vary one parameter of a protocol
    Sweep {
        #[command(flatten)]
        sweep: SweepParams,
        #[command(flatten)]
        params: Params,
    },
}

impl Command {
    fn spec(&self) -> Result<RunSpec, UsageError> {
        match self {
            Command::Protocol1(p) => resolve(Some(Protocol::One), p, None),
            Command::Protocol1Bs(p) => resolve(Some(Protocol::OneBs), p, None),
            Command::Protocol2(p) => resolve(Some(Protocol::Two), p, None),
            Command::Baseline(p) => resolve(Some(Protocol::Baseline), p, None),
            Command::Sweep { sweep, params } => resolve(None, params, Some(sweep)),
        }
    }
}

fn squeezing(config: &ProtocolConfig) -> f64 {
    match config {
        ProtocolConfig::One(c) => c.r,
        ProtocolConfig::OneBs(c) => c.r,
        ProtocolConfig::Two(c) => c.r,
        ProtocolConfig::Baseline(c) => c.r,
    }
}

fn execute(spec: &RunSpec) -> ExitCode {
    let start = Instant::now();
    let (points, axis) = match &spec.sweep {
        Some((axis, values)) => (sweep(&spec.config, *axis, values, spec.jobs), Some(axis.to_string())),
        None => {
            let point = SweepPoint { value: squeezing(&spec.config), result: spec.config.run() };
            (vec![point], None)
        }
    };
    let summary = Summary::new(&spec.config, axis, &points, start.elapsed());
    for e in &summary.errors {
        eprintln!("point {} ({}): {}", e.index, e.axis_value, e.message);
    }

    let written = match &spec.out {
        Some(path) => emit_csv(&points, path).and_then(|()| summary.write(&summary_path(path))),
        None => write_csv(&points, BufWriter::new(io::stdout().lock()))
            .map_err(|source| output::OutputError { path: "<stdout>".into(), source }),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    if summary.failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} of {} points failed", summary.failed, summary.points);
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command.spec() {
        Ok(spec) => execute(&spec),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
