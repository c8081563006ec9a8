use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::LevelFilter;

use mdgan::experiment::{self, ExperimentConfig, ExperimentOutcome, ReportFormat, RunStatus};

/// MDGAN anomaly-detection experiments.
#[derive(Debug, Parser)]
#[command(name = "mdgan", version, about)]
struct Cli {
    /// error, warn, info, debug or trace
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config (or replay a manifest.json).
    Run {
        config: PathBuf,
        /// Output directory; overrides `run.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides `run.jobs` (0 = one per core).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-render the aggregate report of a finished experiment.
    Report {
        manifest: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in synthetic preset: quick, blob, moons or ring.
    Synth {
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Print the preset's config as TOML and exit.
        #[arg(long)]
        print_config: bool,
    },
}

fn run(
    mut config: ExperimentConfig,
    out: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<ExitCode> {
    if let Some(j) = jobs {
        config.run.jobs = j;
    }
    let outcome = experiment::run_experiment(&config, out.as_deref())?;
    Ok(summarize(&outcome))
}

fn summarize(outcome: &ExperimentOutcome) -> ExitCode {
    let m = &outcome.manifest;
    let aborted: Vec<_> = m.aborted().collect();
    if let Some(report) = &outcome.report {
        println!("{}", report.to_markdown());
    }
    println!(
        "{} of {} runs completed; outputs in {}",
        m.runs.len() - aborted.len(),
        m.runs.len(),
        outcome
            .manifest_path
            .parent()
            .unwrap_or(Path::new("."))
            .display()
    );
    if aborted.is_empty() {
        return ExitCode::SUCCESS;
    }
    eprintln!("{} run(s) aborted:", aborted.len());
    for r in aborted {
        if let RunStatus::Aborted { reason } = &r.status {
            eprintln!("  {} seed {}: {reason}", r.config, r.seed);
        }
    }
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .init();
    let result = match cli.command {
        Command::Run { config, out, jobs } => ExperimentConfig::load(&config)
            .with_context(|| format!("loading {}", config.display()))
            .and_then(|c| run(c, out, jobs)),
        Command::Report {
            manifest,
            format,
            out,
        } => (|| {
            let text = experiment::report_from_manifest(&manifest, format)?;
            match out {
                Some(path) => {
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
                }
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        })(),
        Command::Synth {
            preset,
            out,
            jobs,
            print_config,
        } => experiment::preset(&preset)
            .map_err(Into::into)
            .and_then(|c| {
                if print_config {
                    print!("{}", c.to_toml_string()?);
                    return Ok(ExitCode::SUCCESS);
                }
                run(c, out, jobs)
            }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            // library errors already embed their cause; skip repeated links
            let mut message = String::new();
            for cause in e.chain().map(ToString::to_string) {
                if !message.contains(&cause) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&cause);
                }
            }
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
