use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subord::config::{ExperimentConfig, Task};
use subord::experiment::{plan, run_experiment};
use subord::Error;

/// Symbol-class checks, spectral solves and Feller probes on the torus.
#[derive(Parser)]
#[command(name = "subord", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lambda-class estimates of a psi.
    CheckLambda(Common),
    /// Bernstein sign pattern of a family.
    CheckBernstein(Common),
    /// Symbol-class estimates of a constructed symbol.
    CheckSymbol(Common),
    /// Leading term and remainder of `symbol o right`.
    Compose(Common),
    /// Reference pair, sigma and optionally the generation budget.
    ReferenceFunctions(Common),
    /// Fit the Garding constants.
    Garding(Common),
    /// Resolvent solve `(p(x, D) + lambda) u = f`.
    Solve(Common),
    /// Semigroup stepping with diagnostics.
    Evolve(Common),
    /// Maximum principle, positivity, contraction and subordination checks.
    Feller(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    jobs: Option<usize>,
    /// Validate and print the plan without computing.
    #[arg(long)]
    dry_run: bool,
}

impl Command {
    fn split(self) -> (Task, Common) {
        match self {
            Command::CheckLambda(c) => (Task::CheckLambda, c),
            Command::CheckBernstein(c) => (Task::CheckBernstein, c),
            Command::CheckSymbol(c) => (Task::CheckSymbol, c),
            Command::Compose(c) => (Task::Compose, c),
            Command::ReferenceFunctions(c) => (Task::ReferenceFunctions, c),
            Command::Garding(c) => (Task::Garding, c),
            Command::Solve(c) => (Task::Solve, c),
            Command::Evolve(c) => (Task::Evolve, c),
            Command::Feller(c) => (Task::Feller, c),
        }
    }
}

/// Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 bad
/// configuration, 3 the task errored.
fn main() -> ExitCode {
    let (task, opts) = Cli::parse().command.split();
    let mut cfg = match ExperimentConfig::from_path(&opts.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", opts.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = opts.out {
        cfg.output.dir = dir;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = opts.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("--jobs: {e}");
            return ExitCode::from(2);
        }
    }
    if opts.dry_run {
        return match plan(&cfg, task) {
            Ok(p) => {
                print!("{p}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        };
    }
    match run_experiment(&cfg, task) {
        Ok(out) => {
            println!("{}", out.summary);
            for a in &out.artifacts {
                println!("wrote {}", a.display());
            }
            if out.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{} failed: {e}", task.name());
            ExitCode::from(3)
        }
    }
}
