use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use olx::report::{self, Check, Command, Flags, Format};
use olx::scenario::parse_scenario;
use olx::{Error, Execution};

/// Orlicz-Lorentz norms, composition-operator orbits and finite-horizon
/// Li-Yorke criteria over scenario files.
#[derive(Parser)]
#[command(name = "olx", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Norm of a named set's indicator or of a named vector.
    Norm(Common),
    /// Orbit norm trace `||C^n g||` for n = 0..=horizon (CSV by default).
    Orbit(Common),
    /// Finite-horizon criterion verdicts.
    Criteria {
        #[command(flatten)]
        common: Common,
        /// T23c, T23d, T23e, T23f, T21, T22, L1 or all.
        #[arg(long, default_value = "all")]
        check: Check,
        /// Number of randomized trials for L1.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Consistency matrix of the criteria against orbit searches.
    Crosscheck(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    vector: Option<String>,
    #[arg(long)]
    family: Option<String>,
    /// Orbit length / criteria horizon (scenario default, else 10000).
    #[arg(long)]
    horizon: Option<usize>,
    /// Divergence threshold T (default 1e6).
    #[arg(long)]
    threshold: Option<f64>,
    /// Low threshold for orbit witnesses (default 1e-6).
    #[arg(long)]
    eps_low: Option<f64>,
    /// Separation bound for the liminf part of T23f (default 1e-9).
    #[arg(long)]
    delta: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

fn run(cli: Cli) -> Result<(), Error> {
    let started = Instant::now();
    let (cmd, common, check, trials) = match cli.command {
        Sub::Norm(c) => (Command::Norm, c, None, None),
        Sub::Orbit(c) => (Command::Orbit, c, None, None),
        Sub::Criteria { common, check, trials } => (Command::Criteria, common, Some(check), trials),
        Sub::Crosscheck(c) => (Command::Crosscheck, c, None, None),
    };
    let scenario = parse_scenario(&common.scenario)?;
    let flags = Flags {
        set: common.set,
        vector: common.vector,
        family: common.family,
        horizon: common.horizon,
        threshold: common.threshold,
        eps_low: common.eps_low,
        delta: common.delta,
        check,
        trials,
        seed: report::env_seed()?,
        exec: if common.sequential { Execution::Sequential } else { Execution::default() },
    };
    let format = common
        .format
        .unwrap_or(if cmd == Command::Orbit { Format::Csv } else { Format::Json });
    let rep = report::run_command(cmd, &scenario, &flags)?;
    let text = rep.render(format)?;
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    for line in &rep.summary {
        eprintln!("{line}");
    }
    eprintln!(
        "{} {} on {} ({}) in {:.3} s",
        report::TOOL,
        serde_json::to_value(cmd).unwrap().as_str().unwrap(),
        rep.scenario,
        &rep.digest[..12],
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
