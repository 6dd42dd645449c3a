use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tpml::error::{CliError, Result};
use tpml::{batch, cli};

#[derive(Parser)]
#[command(
    name = "tpml",
    version,
    about = "Tensor product multilevel approximation of scattered data"
)]
struct Args {
    /// Worker threads for batch evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sparse grid points at which samples are required.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model from samples on the sparse grid.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model file at the points of a CSV file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare all applicable representations at random points.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the configured cost bound of the naive evaluator.
        #[arg(long)]
        cost_guard: Option<f64>,
    },
    /// Run a convergence study on a built-in target.
    Convergence {
        #[arg(long)]
        target: String,
        #[arg(long, default_value = "1..4")]
        levels: String,
        #[arg(long, default_value_t = 2000)]
        eval_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| CliError::io(p, e))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(args: Args) -> Result<bool> {
    batch::set_threads(args.threads)?;
    match args.command {
        Command::Grid { config, out } => {
            let n = cli::grid(&config, output(out.as_ref())?)?;
            eprintln!("{n} sparse grid points");
        }
        Command::Fit { config, samples, out } => cli::fit(&config, &samples, &out, std::io::stderr().lock())?,
        Command::Eval { model, points, out } => {
            cli::eval(&model, &points, output(out.as_ref())?)?;
        }
        Command::Validate {
            config,
            samples,
            reps,
            seed,
            cost_guard,
        } => {
            return cli::validate(&config, &samples, reps, seed, cost_guard, std::io::stdout().lock());
        }
        Command::Convergence {
            target,
            levels,
            eval_n,
            seed,
            out,
        } => {
            cli::convergence(&target, &levels, eval_n, seed, out.as_deref(), std::io::stderr().lock())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(5),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
