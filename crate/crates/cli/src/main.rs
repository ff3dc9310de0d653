use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modred_core::harness::{Experiment, ExperimentSpec, Stage};
use modred_core::triad::ModelCase;

#[derive(Parser, Debug)]
#[command(name = "modred", about = "Stochastic mode reduction experiments on triad-coupled Burgers systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment spec (flat `key = value` text); defaults to the additive reference case.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,

    /// Master seed, overriding the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 1 gives bitwise reproducible runs on any machine.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Experiment directory, overriding the spec.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Draw the triad coupling coefficients.
    GenCouplings,
    /// Full-system ensemble and its autocorrelations.
    Truth,
    /// Fit the bath Ornstein-Uhlenbeck rates.
    FitOu,
    /// AMRS coefficients and reduced simulation.
    Amrs,
    /// Memory kernels and noise correlations of the full system.
    Kernels,
    /// Short-memory MZ simulation.
    Mz,
    /// Delta-MZ simulation.
    DeltaMz,
    /// Comparison reports against the truth.
    Compare,
    /// Every stage in order.
    All,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::GenCouplings => Stage::Couplings,
            Command::Truth => Stage::Truth,
            Command::FitOu => Stage::FitOu,
            Command::Amrs => Stage::Amrs,
            Command::Kernels => Stage::Kernels,
            Command::Mz => Stage::Mz,
            Command::DeltaMz => Stage::DeltaMz,
            Command::Compare | Command::All => Stage::Compare,
        }
    }
}

fn run(cli: &Cli) -> modred_core::Result<()> {
    let mut spec = match &cli.spec {
        Some(p) => ExperimentSpec::from_file(p)?,
        None => ExperimentSpec::reference(ModelCase::Additive),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.out_dir = out.clone();
    }
    let exp = Experiment::open(spec)?;
    let last = cli.command.stage();
    for stage in Stage::ALL.into_iter().filter(|&s| s <= last) {
        let cached = exp.is_done(stage);
        exp.run_until(stage)?;
        eprintln!("{stage}: {}", if cached { "cached" } else { "done" });
    }
    if last == Stage::Compare {
        let summary = std::fs::read_to_string(exp.stage_dir(Stage::Compare).join("summary.txt"))?;
        print!("{summary}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
