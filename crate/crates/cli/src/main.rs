//! Command-line runner for solver experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vfpgi::bench::{self, ExperimentConfig, OutputFormat};

#[derive(Parser)]
#[command(name = "vfpgi", version, about = "Run value function / policy gradient benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every point of an experiment file and print the result table.
    Solve {
        config: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Seed for the simulated accuracy checks.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the per-state loops (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the built-in models.
    ListModels,
    /// List the solvers and the models each applies to.
    ListAlgorithms,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

const CONFIG_ERROR: u8 = 1;
const NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListModels => {
            for (key, desc) in bench::list_models() {
                println!("{key:<18} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::ListAlgorithms => {
            for (key, desc, models) in bench::list_algorithms() {
                println!("{key:<12} {desc} [{}]", models.join(", "));
            }
            ExitCode::SUCCESS
        }
        Command::Solve {
            config,
            out,
            format,
            seed,
            threads,
        } => solve(config, out, format, seed, threads),
    }
}

fn solve(
    config: PathBuf,
    out: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> ExitCode {
    let fail = |msg: String| {
        eprintln!("error: {msg}");
        ExitCode::from(CONFIG_ERROR)
    };
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", config.display())),
    };
    let mut cfg = match ExperimentConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => return fail(format!("{}: {e}", config.display())),
    };
    if let Some(s) = seed {
        cfg.simulation.seed = s;
    }
    match format {
        Some(Format::Csv) => cfg.output.format = OutputFormat::Csv,
        Some(Format::Md) => cfg.output.format = OutputFormat::Md,
        None => {}
    }
    let out = out.or_else(|| cfg.output.path.as_ref().map(PathBuf::from));

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return fail(format!("thread pool: {e}")),
    };
    let outcomes = match pool.install(|| bench::run_experiment(&cfg)) {
        Ok(o) => o,
        Err(e) => return fail(e.to_string()),
    };

    let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();
    let table = match cfg.output.format {
        OutputFormat::Csv => match bench::to_csv(&rows) {
            Ok(t) => t,
            Err(e) => return fail(e.to_string()),
        },
        OutputFormat::Md => bench::to_markdown(&rows),
    };
    match &out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &table) {
                return fail(format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{table}"),
    }

    let mut failed = false;
    for o in &outcomes {
        if let Some(e) = &o.error {
            eprintln!("{}: {e}", o.row.method);
        }
        if o.failed_requirement() {
            eprintln!(
                "required point did not converge: {} (lambda={:e}, alpha0={:e}, J={:?})",
                o.row.method, o.row.lambda, o.row.alpha0, o.row.j
            );
            failed = true;
        }
    }
    if failed {
        ExitCode::from(NOT_CONVERGED)
    } else {
        ExitCode::SUCCESS
    }
}
