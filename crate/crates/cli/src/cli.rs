//! Command-line front end.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rbcast_core::simulator::QueueConfig;

use crate::analyze::{self, parse_point, parse_ratio, Query};
use crate::config::{ChannelSpec, Cse1Choice, EngineChoice, ExperimentConfig};
use crate::experiment::{self, Manifest, SeedSource, CSV_SCHEMA};
use crate::presets::preset;
use crate::selftest;
use crate::simulate::{self, ArrivalChoice, InitChoice, QueueRequest, SimulateRequest};

pub const SEED_ENV: &str = "RB_SEED";

#[derive(Debug, Parser)]
#[command(name = "rbcast", version = env!("CARGO_PKG_VERSION"), about = "Throughput bounds and simulation for rateless broadcast over Markov erasure channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rate function, asymptotic throughput, K0 and finite bounds for one channel
    Analyze(AnalyzeArgs),
    /// Monte Carlo completion time and throughput for one (n, k)
    Simulate(SimulateArgs),
    /// Sweep a schedule of (n, k) points and write CSV plus a JSON manifest
    Experiment(ExperimentArgs),
    /// Run the built-in oracle and property checks
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Channel: mem:G, ge:P01,P10 or hist:L:P0,...,P(2^L-1)
    #[arg(long)]
    pub channel: ChannelSpec,
    /// Rate function at BETA (repeatable)
    #[arg(long = "rate-fn", value_name = "BETA")]
    pub rate_fn: Vec<f64>,
    /// Asymptotic throughput R(c); accepts `inf` (repeatable)
    #[arg(long, value_name = "C")]
    pub asymptotic: Vec<String>,
    /// Memory penalty K0 (two-state channels)
    #[arg(long)]
    pub k0: bool,
    /// Finite lower bound and CSE bounds at N,K (repeatable)
    #[arg(long, value_name = "N,K")]
    pub bound: Vec<String>,
    #[arg(long, value_enum, default_value_t)]
    pub cse1_numerator: Cse1Choice,
    /// Print JSON instead of a table
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub channel: ChannelSpec,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub k: u64,
    /// i.i.d. trials for the completion-time estimate
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Renewal blocks for the throughput estimate
    #[arg(long, default_value_t = 10_000)]
    pub blocks: u64,
    /// Overrides RB_SEED
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub init: InitChoice,
    #[arg(long, value_enum, default_value_t)]
    pub engine: EngineChoice,
    /// Write each trial's completion time, one per line
    #[arg(long, value_name = "PATH")]
    pub dump_trials: Option<PathBuf>,
    /// CSV destination (stdout by default)
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Also run the queue simulation at this arrival rate (packets/slot)
    #[arg(long, value_name = "LAMBDA")]
    pub queue_lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub arrival: ArrivalChoice,
    #[arg(long, default_value_t = 200_000)]
    pub queue_slots: u64,
    /// Stable verdict needs a queue trend below this (packets/slot)
    #[arg(long, default_value_t = QueueConfig::default().stable_slope)]
    pub stable_slope: f64,
    /// Unstable verdict once the trend reaches this
    #[arg(long, default_value_t = QueueConfig::default().unstable_slope)]
    pub unstable_slope: f64,
    /// Stable verdict needs a mean queue of at most this many blocks
    #[arg(long, default_value_t = QueueConfig::default().max_mean_queue_per_k)]
    pub max_mean_queue_per_k: f64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// JSON experiment config
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides RB_SEED and the config seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores); output does not depend on it
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub blocks: Option<u64>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineChoice>,
    #[arg(long)]
    pub no_simulate: bool,
    #[arg(long)]
    pub no_bounds: bool,
    #[arg(long)]
    pub no_cse: bool,
    #[arg(long, value_enum)]
    pub cse1_numerator: Option<Cse1Choice>,
    /// CSV destination (config value, else stdout)
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Manifest destination (config value, else none)
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Print the resolved config as JSON and exit
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Invalid invocation that clap cannot detect; maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// `--seed`, then `RB_SEED`, then the config value.
pub fn resolve_seed(flag: Option<u64>, env: Option<String>, config: u64) -> Result<(u64, SeedSource)> {
    if let Some(seed) = flag {
        return Ok((seed, SeedSource::Flag));
    }
    match env {
        Some(text) => {
            let seed =
                text.trim().parse().map_err(|_| usage(format!("{SEED_ENV}=`{text}` is not an unsigned integer")))?;
            Ok((seed, SeedSource::Env))
        }
        None => Ok((config, SeedSource::Config)),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok().filter(|s| !s.trim().is_empty())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => run_analyze(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Experiment(args) => run_experiment(args),
        Command::Selftest(args) => run_selftest(args),
    }
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let query = Query {
        rate_fn: args.rate_fn,
        asymptotic: args
            .asymptotic
            .iter()
            .map(|s| parse_ratio(s).map_err(|e| usage(format!("{e:#}"))))
            .collect::<Result<_>>()?,
        k0: args.k0,
        bound: args.bound.iter().map(|s| parse_point(s).map_err(|e| usage(format!("{e:#}")))).collect::<Result<_>>()?,
        bound_options: rbcast_core::bounds::BoundOptions { cse1_numerator: args.cse1_numerator.into() },
    };
    let report = analyze::analyze(&args.channel, &query)?;
    let mut out = std::io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
    } else {
        out.write_all(analyze::render_table(&report).as_bytes())?;
    }
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let (seed, _) = resolve_seed(args.seed, env_seed(), 0)?;
    let queue = args.queue_lambda.map(|lambda| QueueRequest {
        lambda,
        arrival: args.arrival,
        slots: args.queue_slots,
        config: QueueConfig {
            stable_slope: args.stable_slope,
            unstable_slope: args.unstable_slope,
            max_mean_queue_per_k: args.max_mean_queue_per_k,
            ..QueueConfig::default()
        },
    });
    let req = SimulateRequest {
        channel: args.channel,
        n: args.n,
        k: args.k,
        trials: args.trials,
        blocks: args.blocks,
        seed,
        init: args.init,
        engine: args.engine,
        dump_trials: args.dump_trials,
        queue,
    };
    let result = simulate::simulate(&req)?;
    match &args.output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            simulate::write_csv(file, &req, &result)
        }
        None => simulate::write_csv(std::io::stdout().lock(), &req, &result),
    }
}

/// Config after presets, file loading and flag overrides.
pub fn resolve_experiment(args: &ExperimentArgs) -> Result<(ExperimentConfig, SeedSource)> {
    let mut config = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name).map_err(|e| usage(e.to_string()))?,
        (None, Some(path)) => ExperimentConfig::load(path)?,
        _ => return Err(usage("give exactly one of --preset or --config")),
    };
    let (seed, source) = resolve_seed(args.seed, env_seed(), config.seed)?;
    config.seed = seed;
    if let Some(blocks) = args.blocks {
        config.blocks = blocks;
    }
    if let Some(engine) = args.engine {
        config.engine = engine;
    }
    if let Some(numerator) = args.cse1_numerator {
        config.toggles.cse1_numerator = numerator;
    }
    config.toggles.simulate &= !args.no_simulate;
    config.toggles.bounds &= !args.no_bounds;
    config.toggles.cse &= !args.no_cse;
    if args.csv.is_some() {
        config.outputs.csv = args.csv.clone();
    }
    if args.manifest.is_some() {
        config.outputs.manifest = args.manifest.clone();
    }
    config.validate().map_err(|e| usage(format!("{e:#}")))?;
    Ok((config, source))
}

fn run_experiment(args: ExperimentArgs) -> Result<()> {
    let (config, seed_source) = resolve_experiment(&args)?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    let output = experiment::run(&config, args.jobs)?;
    match &config.outputs.csv {
        Some(path) => experiment::write_csv_file(path, &output.rows)?,
        None => experiment::write_csv(std::io::stdout().lock(), &output.rows)?,
    }
    if let Some(path) = &config.outputs.manifest {
        let manifest = Manifest {
            version: experiment::version(),
            csv_schema: CSV_SCHEMA.into(),
            seed: config.seed,
            seed_source,
            jobs: args.jobs,
            wall_time_ms: output.wall_time_ms,
            points: config.schedule.resolve()?,
            config: config.clone(),
        };
        experiment::write_manifest(path, &manifest)?;
    }
    Ok(())
}

fn run_selftest(args: SelftestArgs) -> Result<()> {
    let (seed, _) = resolve_seed(args.seed, env_seed(), 1)?;
    let results = selftest::run_all(seed);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    anyhow::ensure!(failed == 0, "{failed} of {} checks failed", results.len());
    println!("all {} checks passed", results.len());
    Ok(())
}
