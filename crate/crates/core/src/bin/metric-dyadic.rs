use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use metric_dyadic::pipeline::{run, Command, RunConfig};

const INPUTS: &str = "\
Config is JSON; every field but `input` has a default. Inputs:
  {\"kind\": \"torus_grid\", \"g\": 8}                       2^g grid points on the unit torus
  {\"kind\": \"random_doubling\", \"n\": 256, \"dim\": 2, \"seed\": 1}  uniform points in [0,1]^dim
  {\"kind\": \"file\", \"path\": \"pts.csv\", \"topology\": \"general\"}  CSV id,x1,..,xd or JSON {\"dist\": [[..]]}
Without --config the input is torus_grid with g = 8.

Exit status: 0 when every invariant holds, 2 on an invariant failure
(see diagnostics.json), 1 on usage or input errors.";

#[derive(Clone, Copy, ValueEnum)]
enum Sub {
    BuildNets,
    BuildCubes,
    Adjacent,
    Decompose,
    Haar,
    ShiftExperiment,
    VerifyAll,
}

#[derive(Parser)]
#[command(version, about = "Dyadic cubes, adjacent systems and Haar shifts on finite metric spaces", after_help = INPUTS)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    // clap would exit with 2, which is reserved for invariant failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::torus(8),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cmd = match cli.command {
        Sub::BuildNets => Command::BuildNets,
        Sub::BuildCubes => Command::BuildCubes,
        Sub::Adjacent => Command::Adjacent,
        Sub::Decompose => Command::Decompose,
        Sub::Haar => Command::Haar,
        Sub::ShiftExperiment => Command::ShiftExperiment,
        Sub::VerifyAll => Command::VerifyAll,
    };
    let outcome = run(cmd, &cfg)?;
    for f in &outcome.failures {
        eprintln!("invariant failed: {f}");
    }
    println!("{}: {} ({} artifacts in {})", cmd.name(), if outcome.passed { "ok" } else { "FAILED" }, outcome.artifacts.len(), cfg.out.display());
    Ok(outcome.passed)
}
