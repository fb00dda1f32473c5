use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod output;

use commands::{Failure, Report};
use output::Output;

/// Two collective spins with an Ising coupling and one-body losses: figure
/// data, Monte Carlo runs and oracle checks. All outputs are CSV/JSON.
#[derive(Parser, Debug)]
#[command(name = "spinloss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON file with the command's parameters; missing keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for the trajectory sampler (recorded by every command).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Linear entropy S_lin(t) for lossless and lossy parameter pairs.
    Entropy,
    /// E^2_EPR(t) at fixed quadrature angles for several N.
    EprScan,
    /// Husimi Q grids: no loss, one-loss block, two single loss times.
    Husimi,
    /// Quantum-jump Monte Carlo against the closed forms.
    Trajectories,
    /// Optimal E^2_EPR versus N for condensates in harmonic traps.
    BecSweep,
    /// Closed forms against the brute-force oracles.
    OracleCheck {
        /// Flip the sign of chi_ab on the analytic side (mutation test).
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// All spin moments and E^2_EPR on a time grid.
    Correlators,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Entropy => "entropy",
            Command::EprScan => "epr-scan",
            Command::Husimi => "husimi",
            Command::Trajectories => "trajectories",
            Command::BecSweep => "bec-sweep",
            Command::OracleCheck { .. } => "oracle-check",
            Command::Correlators => "correlators",
        }
    }
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Compute(e.into()))?;
    }
    let mut out = Output::create(&cli.out)?;
    let path = cli.config.as_deref();
    let report = match cli.command {
        Command::Entropy => commands::entropy(path, &mut out),
        Command::EprScan => commands::epr_scan(path, &mut out),
        Command::Husimi => commands::husimi(path, &mut out),
        Command::Trajectories => commands::trajectories(path, cli.seed, &mut out),
        Command::BecSweep => commands::bec_sweep(path, &mut out),
        Command::OracleCheck { inject_sign_flip } => commands::oracle_check(path, inject_sign_flip, &mut out),
        Command::Correlators => commands::correlators(path, &mut out),
    }?;
    let outputs = out.written().to_vec();
    let manifest = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_file": cli.config,
        "config": report.config,
        "seed": cli.seed,
        "threads": rayon::current_num_threads(),
        "outputs": outputs,
    });
    out.json("manifest.json", &manifest)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(r) if r.passed => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(3),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
