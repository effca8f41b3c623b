use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ma_lab::report::{load_reports, SuiteReport};
use ma_lab::spec::{parse_overrides, RadialOracleConfig};
use ma_lab::{run_experiment, run_oracle, run_suite, ExperimentSpec, LabError, SuiteConfig};

#[derive(Parser)]
#[command(name = "ma-lab", version, about = "Run exterior Monge-Ampère experiments and inspect their reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Directory for reports and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel experiments in a suite.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for all certificate sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Threshold overrides, e.g. `grid_band=0.2,radial_band=0.03`.
    #[arg(long = "tol-overrides", global = true)]
    tol_overrides: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON spec.
    Run { config: PathBuf },
    /// Run a suite of experiments.
    Suite { config: PathBuf },
    /// Build a radial profile and print its constants.
    Oracle { config: PathBuf },
    /// Summarize the reports in a directory.
    Report { dir: PathBuf },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                LabError::Config(_) | LabError::Json(_) | LabError::Io(_) => EXIT_CONFIG,
                _ => EXIT_FAIL,
            })
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, LabError> {
    let c = &cli.common;
    match &cli.command {
        Command::Run { config } => {
            let spec = configure(ExperimentSpec::load(config).map_err(as_config)?, c)?;
            spec.validate()?;
            let out = c.out.clone().or_else(|| spec.output.clone());
            let report = run_experiment(&spec, out.as_ref().map(|o| o.join(spec.display_name())).as_deref());
            if let Some(dir) = &out {
                report.write(dir)?;
            }
            print!("{}", report.summary());
            Ok(if report.passed { 0 } else { EXIT_FAIL })
        }
        Command::Suite { config } => {
            let mut suite = SuiteConfig::load(config).map_err(as_config)?;
            for spec in &mut suite.experiments {
                *spec = configure(spec.clone(), c)?;
                spec.validate()?;
            }
            let workers = c.workers.or(suite.workers).unwrap_or_else(default_workers);
            let report = run_suite(&suite, workers, c.out.as_deref())?;
            print_suite(&report);
            Ok(report.exit_code() as u8)
        }
        Command::Oracle { config } => {
            let text = std::fs::read_to_string(config)?;
            let cfg: RadialOracleConfig = serde_json::from_str(&text)?;
            let report = run_oracle(&cfg, c.out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
        Command::Report { dir } => report_dir(dir),
    }
}

fn as_config(e: LabError) -> LabError {
    match e {
        LabError::Json(j) => LabError::Config(j.to_string()),
        other => other,
    }
}

fn configure(mut spec: ExperimentSpec, c: &Common) -> Result<ExperimentSpec, LabError> {
    if let Some(seed) = c.seed {
        spec.seed = seed;
    }
    if let Some(text) = &c.tol_overrides {
        spec.thresholds.apply(&parse_overrides(text)?)?;
    }
    Ok(spec)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn print_suite(report: &SuiteReport) {
    for r in &report.reports {
        print!("{}", r.summary());
    }
    println!("{} passed, {} failed", report.passed, report.failed);
}

fn report_dir(dir: &Path) -> Result<u8, LabError> {
    if !dir.is_dir() {
        return Err(LabError::Config(format!("{} is not a directory", dir.display())));
    }
    let reports = load_reports(dir)?;
    let mut inconsistent = 0;
    for r in &reports {
        if r.rederive() != r.passed {
            inconsistent += 1;
            println!("{}: stored verdict disagrees with its criteria", r.name);
        }
    }
    let suite = SuiteReport::from_reports(reports);
    print_suite(&suite);
    Ok(if suite.all_passed() && inconsistent == 0 { 0 } else { EXIT_FAIL })
}
