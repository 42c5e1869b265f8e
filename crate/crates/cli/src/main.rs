//! `mfnet`: runs ManifoldNet experiments from JSON configs and writes tidy
//! metrics CSVs.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
//! failure. On failure a single line
//! `mfnet: error kind=<validation|numerical> field=<name> reason="<text>"`
//! goes to stderr.

mod config;
mod runners;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manifoldnet::metrics::write_csv;
use manifoldnet::Error;

use config::{ExperimentConfig, FieldError};

#[derive(Parser)]
#[command(name = "mfnet", version, about = "Weighted Fréchet mean network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `seed` field of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV; overrides the `output` field of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Validation(FieldError),
    Numerical(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (kind, field, reason, code) = match self {
            Failure::Validation(e) => ("validation", e.field.as_str(), e.reason.as_str(), 2),
            Failure::Numerical(r) => ("numerical", "-", r.as_str(), 3),
        };
        eprintln!("mfnet: error kind={kind} field={field} reason={:?}", reason.replace('\n', " "));
        ExitCode::from(code)
    }
}

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        Failure::Validation(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            e if e.is_numerical() => Failure::Numerical(e.to_string()),
            Error::InvalidParameter { name, reason } => Failure::Validation(FieldError {
                field: name.to_string(),
                reason,
            }),
            other => Failure::Validation(FieldError {
                field: "input".into(),
                reason: other.to_string(),
            }),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("MFNET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Validation(FieldError {
            field: "MFNET_THREADS".into(),
            reason: format!("{raw:?} is not a positive integer"),
        })
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Numerical(e.to_string()))
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, Failure> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_resolved(cfg: &ExperimentConfig) {
    println!("{}", serde_json::to_string_pretty(cfg).expect("config serializes"));
}

fn execute(command: Command) -> Result<(), Failure> {
    configure_threads()?;
    match command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            print_resolved(&cfg);
            println!("config ok");
        }
        Command::Run { config, seed, out } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.or_else(|| cfg.output.clone()).ok_or_else(|| FieldError {
                field: "output".into(),
                reason: "pass --out or set `output` in the config".into(),
            })?;
            cfg.output = Some(out.clone());
            print_resolved(&cfg);
            let records = runners::run(&cfg, cfg.seed)?;
            let file = File::create(&out).map_err(|e| FieldError {
                field: "output".into(),
                reason: format!("cannot create {}: {e}", out.display()),
            })?;
            write_csv(BufWriter::new(file), &records)?;
            println!("wrote {} rows to {}", records.iter().map(|r| r.values.len()).sum::<usize>(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
