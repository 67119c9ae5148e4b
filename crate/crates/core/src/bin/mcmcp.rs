use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use deep_mcmcp::analysis::{analyze_samples, AnalysisReport, AnalyzeOptions};
use deep_mcmcp::chain::DEFAULT_STRIDE;
use deep_mcmcp::ci::run_ci_experiment;
use deep_mcmcp::classify::{evaluate_accuracy, read_dataset, DecisionRule, MaxDensity, NearestMean};
use deep_mcmcp::gateway::{Gateway, ImageCache};
use deep_mcmcp::samples::{read_samples, write_samples, SampleRecord};
use deep_mcmcp::service::{self, export_samples, read_log, replay_log, Clock, EventLog, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "mcmcp", version, about = "Markov chain Monte Carlo with people over latent spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API for human respondents.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Event log; resumed when it exists.
        #[arg(long)]
        log: PathBuf,
        /// Image cache directory (in memory when omitted).
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Run complete sessions with the simulated respondent.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sessions: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the event log here (must not exist).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write thinned samples here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit thinned chain samples from an event log.
    Export {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_STRIDE)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit densities and discriminant projections to samples.
    Analyze {
        #[arg(long, conflicts_with = "samples", required_unless_present = "samples")]
        log: Option<PathBuf>,
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Directory for analysis.json and projection.jsonl.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long, default_value_t = 50)]
        modes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a labeled embedding file against an analysis.
    Classify {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Rule::NearestMean)]
        rule: Rule,
        /// Also write the accuracy table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the classification-image baseline with the simulated respondent.
    CiRun {
        #[arg(long)]
        config: PathBuf,
        /// Trials per category.
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    NearestMean,
    Density,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn write_records(out: Option<&Path>, records: &[SampleRecord]) -> Result<()> {
    match out {
        Some(path) => write_samples(BufWriter::new(File::create(path)?), records)?,
        None => write_samples(std::io::stdout().lock(), records)?,
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Serve { config, log, images, addr } => {
            let config = load_config(&config, None)?;
            let cache = match images {
                Some(dir) => ImageCache::on_disk(dir)?,
                None => ImageCache::in_memory(),
            };
            let gateway = Gateway::new(config.space.clone(), config.decoder.clone(), cache)?;
            let experiment = if log.exists() {
                let resumed = Experiment::resume(EventLog::open(&log)?, Some(gateway))?;
                if resumed.config() != &config {
                    bail!("{} was written for a different configuration", log.display());
                }
                resumed
            } else {
                Experiment::create(config, EventLog::create(&log)?, Some(gateway), Clock::System)?
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                log::info!("listening on {}", listener.local_addr()?);
                service::http::serve(experiment, listener, Duration::from_secs(10)).await
            })?;
        }
        Command::Simulate { config, sessions, seed, log, out } => {
            let config = load_config(&config, seed)?;
            let event_log = match &log {
                Some(path) => EventLog::create(path).with_context(|| format!("creating {}", path.display()))?,
                None => EventLog::in_memory(),
            };
            let mut experiment = Experiment::create(config, event_log, None, Clock::Logical(0))?;
            let summary = service::simulate(&mut experiment, sessions)?;
            if let Some(out) = out {
                write_records(Some(&out), &experiment.export(None, DEFAULT_STRIDE)?)?;
            }
            print_json(&summary)?;
        }
        Command::Export { log, burn_in, stride, out } => {
            let state = replay_log(&read_log(&log)?)?;
            let engine = state.engine.context("the event log defines no experiment")?;
            write_records(out.as_deref(), &export_samples(&engine, burn_in, stride)?)?;
        }
        Command::Analyze { log, samples, out, components, modes, seed } => {
            let records = match (log, samples) {
                (Some(log), _) => match replay_log(&read_log(&log)?)?.engine {
                    Some(engine) => export_samples(&engine, None, DEFAULT_STRIDE)?,
                    None => Vec::new(),
                },
                (None, Some(path)) => read_samples(BufReader::new(File::open(path)?))?,
                (None, None) => unreachable!("clap requires one input"),
            };
            let options = AnalyzeOptions {
                n_components: components,
                n_modes: modes,
                seed,
                ..AnalyzeOptions::default()
            };
            let report = analyze_samples(&records, &options)?;
            std::fs::create_dir_all(&out)?;
            serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("analysis.json"))?), &report)?;
            let mut projection = BufWriter::new(File::create(out.join("projection.jsonl"))?);
            for p in &report.projected {
                serde_json::to_writer(&mut projection, p)?;
                projection.write_all(b"\n")?;
            }
            projection.flush()?;
            eprintln!(
                "{} categories, {} samples, {} projected points written to {}",
                report.means.len(),
                records.len(),
                report.projected.len(),
                out.display()
            );
        }
        Command::Classify { analysis, dataset, rule, out } => {
            let report: AnalysisReport = serde_json::from_reader(BufReader::new(File::open(analysis)?))?;
            let data = read_dataset(BufReader::new(File::open(dataset)?))?;
            let rule: Box<dyn DecisionRule> = match rule {
                Rule::NearestMean => Box::new(NearestMean(report.means)),
                Rule::Density if report.models.is_empty() => bail!("the analysis holds no density models"),
                Rule::Density => Box::new(MaxDensity(report.models)),
            };
            let table = evaluate_accuracy(&data, rule.as_ref())?;
            println!("{table}");
            if let Some(out) = out {
                serde_json::to_writer_pretty(File::create(out)?, &table)?;
            }
        }
        Command::CiRun { config, trials, seed, out } => {
            let config = load_config(&config, seed)?;
            let experiment = Experiment::create(config, EventLog::in_memory(), None, Clock::Logical(0))?;
            let oracle = service::oracle_for(&experiment)?;
            let config = experiment.config();
            let targets: Vec<_> = oracle.targets().cloned().collect();
            let ci = run_ci_experiment(&config.space, &targets, trials, &config.respondent, config.master_seed)?;
            write_records(Some(&out), &SampleRecord::from_ci_trials(&ci))?;
            eprintln!("{} trials written to {}", ci.len(), out.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse().command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
