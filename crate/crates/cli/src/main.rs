//! `fedelastic`: command-line front end of the simulator.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fedelastic_core::harness::config::{LoadedConfig, Overrides, OUT_DIR_ENV};
use fedelastic_core::harness::{self, presets};
use fedelastic_core::protocol::Variant;
use fedelastic_core::Error;

#[derive(Parser)]
#[command(
    name = "fedelastic",
    version,
    about = "Deterministic federated learning simulator with elastic-net local updates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV/JSON outputs.
    Run {
        /// Config file, or the name of a bundled preset.
        #[arg(long)]
        config: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run two experiments and report nnz/bits ratios (first over second).
    Compare {
        #[arg(long, num_args = 2, value_names = ["FIRST", "SECOND"], required = true)]
        configs: Vec<String>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Convex-mode convergence diagnostics averaged over several seeds.
    Diagnose {
        #[arg(long)]
        config: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// List bundled presets, or print one.
    Presets {
        /// Print this preset's config text.
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for client solves (outputs do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Output directory (overrides the config and the environment).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            variant: self.variant,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            epsilon: self.epsilon,
            seed: self.seed,
            threads: self.threads,
            rounds: self.rounds,
            out: self.out.clone(),
        }
    }
}

fn load(spec: &str, overrides: &OverrideArgs) -> Result<LoadedConfig, Error> {
    Ok(presets::resolve(spec)?.with_overrides(&overrides.to_overrides()))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Output(e.to_string()))?;
    write_stdout(&format!("{text}\n"))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn write_stdout(text: &str) -> Result<(), Error> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Output(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, overrides } => {
            let outcome = harness::run(&load(&config, &overrides)?)?;
            print_json(&json!({ "dir": outcome.dir, "summary": outcome.summary }))
        }
        Command::Compare { configs, overrides } => {
            let out = overrides
                .out
                .clone()
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs/compare"));
            let without_out = OverrideArgs { out: None, ..overrides };
            let first = load(&configs[0], &without_out)?;
            let second = load(&configs[1], &without_out)?;
            print_json(&harness::compare(first, second, &out)?)
        }
        Command::Diagnose { config, overrides } => print_json(&harness::diagnose(&load(&config, &overrides)?)?),
        Command::Presets { show: Some(name) } => {
            let preset = presets::find(&name).ok_or_else(|| Error::Config(format!("no preset named '{name}'")))?;
            write_stdout(preset.text)
        }
        Command::Presets { show: None } => {
            let listing: String = presets::PRESETS
                .iter()
                .map(|p| format!("{:<16} {}\n", p.name, p.description()))
                .collect();
            write_stdout(&listing)
        }
    }
}

fn report_error(kind: &str, message: String, details: Option<&[String]>) {
    let mut value = json!({ "kind": kind, "message": message });
    if let Some(list) = details {
        value["errors"] = json!(list);
    }
    eprintln!("{value}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.render().to_string().trim().to_string(), None);
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let details = match &e {
                Error::Validation(list) => Some(list.as_slice()),
                _ => None,
            };
            report_error(e.kind(), e.to_string(), details);
            ExitCode::from(if e.kind() == "config" { 2 } else { 1 })
        }
    }
}
