use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mipslab_core::dgp::World;
use mipslab_core::imputation::{impute_fitted, impute_oracle, impute_propensity, ResponseWeighting};
use mipslab_core::runner::{
    appendix_report, appendix_rows, format_plim, format_summary, format_table, plim_reports, run_experiment, summarize,
    write_plim_csv, write_results_csv, write_summary_csv, write_timing_csv, ExperimentConfig,
};
use mipslab_core::Error;

#[derive(Parser)]
#[command(name = "mipslab", version, about = "Multiple imputation with propensity scores: simulations and exact limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed (overrides the configuration file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output CSV path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a JSON configuration.
    Simulate { config: PathBuf },
    /// Exact probability limits of each combination method.
    Plim { preset: String },
    /// Exact checks of covariate-only and two-stage imputation.
    CheckAppendix { preset: String },
    /// Generate one dataset and write its imputed stack.
    ImputeDemo {
        preset: String,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, value_enum, default_value_t = DemoImputer::Oracle)]
        imputer: DemoImputer,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoImputer {
    Oracle,
    Fitted,
    Propensity,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn sink(out: Option<&Path>) -> mipslab_core::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// `results.csv` -> `results_summary.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn run(cli: Cli) -> mipslab_core::Result<()> {
    match cli.command {
        Command::Simulate { config } => {
            let mut cfg = ExperimentConfig::load(&config).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read {}: {io}", config.display())),
                other => other,
            })?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if cli.workers.is_some() {
                cfg.workers = cli.workers;
            }
            if cli.out.is_some() {
                cfg.output = cli.out;
            }
            let world = cfg.validate()?;
            let rows = run_experiment(&cfg)?;
            let summary = summarize(&rows, world.true_ate()?)?;
            match &cfg.output {
                Some(path) => {
                    write_results_csv(&rows, File::create(path)?)?;
                    write_summary_csv(&summary, File::create(sibling(path, "summary"))?)?;
                    write_timing_csv(&rows, File::create(sibling(path, "timing"))?)?;
                    print!("{}", format_summary(&summary));
                }
                None => {
                    write_results_csv(&rows, io::stdout().lock())?;
                    eprint!("{}", format_summary(&summary));
                }
            }
        }
        Command::Plim { preset } => {
            let reports = plim_reports(&World::preset(&preset)?)?;
            print!("{}", format_plim(&reports));
            if let Some(path) = &cli.out {
                write_plim_csv(&reports, File::create(path)?)?;
            }
        }
        Command::CheckAppendix { preset } => {
            let report = appendix_report(&World::preset(&preset)?)?;
            let rows = appendix_rows(&report);
            let body: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![k.to_string(), format!("{v:.3e}")]).collect();
            print!("{}", format_table(&["quantity", "value"], &body));
            if let Some(path) = &cli.out {
                let mut out = csv::Writer::from_writer(File::create(path)?);
                out.write_record(["quantity", "value"])?;
                for (k, v) in rows {
                    out.write_record([k.to_string(), v.to_string()])?;
                }
                out.flush()?;
            }
        }
        Command::ImputeDemo { preset, n, m, imputer } => {
            let world = World::preset(&preset)?;
            let seed = cli.seed.unwrap_or(1);
            let ds = world.generate(n, seed)?;
            let stack = match imputer {
                DemoImputer::Oracle => impute_oracle(&ds, &world, m, seed)?,
                DemoImputer::Fitted => impute_fitted(&ds, ds.kind, m, seed)?,
                DemoImputer::Propensity => impute_propensity(&ds, m, seed, ResponseWeighting::Weighted)?.0,
            };
            stack.write_csv(sink(cli.out.as_deref())?)?;
        }
    }
    Ok(())
}
