use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use semigrad_cli::{exit, exit_code, list_scenarios, parse_manifest, run_checks, run_experiment, run_suite, write_checks, write_records};
use semigrad_cli::{CliError, ExperimentConfig, Format, ReportRecord};

#[derive(Parser)]
#[command(name = "semigrad", version, about = "Monte Carlo estimators for derivatives of diffusion semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Budget {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<u64>,
    /// Number of time steps.
    #[arg(long)]
    steps: Option<u64>,
}

impl Budget {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(paths) = self.paths {
            cfg.n_paths = paths;
        }
        if let Some(steps) = self.steps {
            cfg.n_steps = steps;
        }
    }
}

#[derive(Args, Clone)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// Config file (key=value text or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra settings as key=value, applied after the config file.
        settings: Vec<String>,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        output: Output,
    },
    /// Run every experiment of a manifest.
    Suite {
        /// Manifest file (key=value text with [run] sections, or JSON).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        output: Output,
    },
    /// Run the diagnostic checks for a scenario.
    Check {
        scenario: String,
        /// Extra settings as key=value (f, x0, v0, t, delta).
        settings: Vec<String>,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        output: Output,
    },
    /// List the built-in scenarios.
    List,
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("SEMIGRAD_THREADS") {
        let n: usize = value.trim().parse().with_context(|| format!("SEMIGRAD_THREADS={value:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn single_run(config: Option<&Path>, settings: &[String], budget: &Budget) -> Result<(ExperimentConfig, ReportRecord), Box<(ExperimentConfig, CliError)>> {
    let base = match config.map(read) {
        Some(Ok(text)) => ExperimentConfig::parse(&text),
        Some(Err(e)) => Err(CliError::Io(format!("{e:#}"))),
        None => Ok(ExperimentConfig::default()),
    };
    let mut cfg = match base.and_then(|c| c.with_overrides(settings)) {
        Ok(c) => c,
        Err(e) => return Err(Box::new((ExperimentConfig::default(), e))),
    };
    budget.apply(&mut cfg);
    match run_experiment(&cfg) {
        Ok(r) => Ok((cfg, r)),
        Err(e) => Err(Box::new((cfg, e))),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR)
        }
    }
}

fn real_main() -> anyhow::Result<u8> {
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::List => {
            print!("{}", list_scenarios());
            Ok(exit::PASS)
        }
        Command::Run {
            config,
            settings,
            budget,
            output,
        } => {
            let (cfg, record) = match single_run(config.as_deref(), &settings, &budget) {
                Ok(pair) => pair,
                Err(failure) => {
                    let (cfg, e) = *failure;
                    eprintln!("error: {e}");
                    let record = ReportRecord::failed(&cfg, &e);
                    (cfg, record)
                }
            };
            let records = [record];
            let out = output.out.or(cfg.out);
            emit(out.as_deref(), |w| write_records(&records, output.format, w))?;
            Ok(exit_code(&records))
        }
        Command::Suite { config, budget, output } => {
            let mut configs = parse_manifest(&read(&config)?)?;
            for cfg in &mut configs {
                budget.apply(cfg);
            }
            let records = run_suite(&configs);
            for r in records.iter().filter(|r| r.is_error()) {
                eprintln!("error: {} / {}: {}", r.scenario, r.estimator, r.error.as_deref().unwrap_or_default());
            }
            emit(output.out.as_deref(), |w| write_records(&records, output.format, w))?;
            Ok(exit_code(&records))
        }
        Command::Check {
            scenario,
            settings,
            budget,
            output,
        } => {
            let mut cfg = ExperimentConfig {
                scenario,
                ..Default::default()
            }
            .with_overrides(&settings)?;
            budget.apply(&mut cfg);
            let reports = run_checks(&cfg)?;
            emit(output.out.as_deref(), |w| write_checks(&reports, output.format, w))?;
            Ok(if reports.iter().all(|r| r.pass) { exit::PASS } else { exit::TOLERANCE })
        }
    }
}
