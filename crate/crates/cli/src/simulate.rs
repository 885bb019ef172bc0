//! Single-setting Monte Carlo runs.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use rbcast_core::simulator::{
    estimate_throughput_with, sample_completion_times, simulate_queue, Arrival, CompletionStats, InitPolicy,
    QueueConfig, QueueStats, QueueVerdict, SimOptions, MIN_TRIALS,
};

use crate::config::{ChannelSpec, EngineChoice};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum InitChoice {
    #[default]
    Stationary,
    AllOnes,
    BurnIn,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum ArrivalChoice {
    #[default]
    BernoulliBatch,
    Poisson,
}

#[derive(Clone, Debug)]
pub struct QueueRequest {
    pub lambda: f64,
    pub arrival: ArrivalChoice,
    pub slots: u64,
    pub config: QueueConfig,
}

#[derive(Clone, Debug)]
pub struct SimulateRequest {
    pub channel: ChannelSpec,
    pub n: u64,
    pub k: u64,
    pub trials: u64,
    pub blocks: u64,
    pub seed: u64,
    pub init: InitChoice,
    pub engine: EngineChoice,
    pub dump_trials: Option<PathBuf>,
    pub queue: Option<QueueRequest>,
}

pub struct SimulateResult {
    pub completion: CompletionStats,
    pub eta_hat: f64,
    pub se_eta: f64,
    pub queue: Option<QueueStats>,
}

pub fn simulate(req: &SimulateRequest) -> Result<SimulateResult> {
    ensure!(req.trials >= MIN_TRIALS, "trials must be at least {MIN_TRIALS}, got {}", req.trials);
    let model = req.channel.model()?;
    let init = match req.init {
        InitChoice::Stationary => InitPolicy::Stationary,
        InitChoice::AllOnes => InitPolicy::AllOnes,
        InitChoice::BurnIn => InitPolicy::default_burn_in(&model),
    };
    let opts = SimOptions { engine: req.engine.into(), ..SimOptions::default() };
    let samples = sample_completion_times(&model, req.n, req.k, &init, req.trials, req.seed, &opts)?;
    if let Some(path) = &req.dump_trials {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        for t in &samples {
            writeln!(out, "{t}")?;
        }
        out.flush().with_context(|| format!("writing {}", path.display()))?;
    }
    let eta = estimate_throughput_with(&model, req.n, req.k, req.blocks, req.seed, &opts)?;
    let queue = match &req.queue {
        Some(q) => {
            let arrival = match q.arrival {
                ArrivalChoice::BernoulliBatch => Arrival::BernoulliBatch,
                ArrivalChoice::Poisson => Arrival::Poisson,
            };
            let config = QueueConfig { engine: req.engine.into(), ..q.config };
            Some(simulate_queue(&model, req.n, req.k, q.lambda, arrival, q.slots, req.seed, &config)?)
        }
        None => None,
    };
    Ok(SimulateResult {
        completion: CompletionStats::from_samples(&samples),
        eta_hat: eta.eta_hat,
        se_eta: eta.std_error,
        queue,
    })
}

pub fn write_csv<W: Write>(out: W, req: &SimulateRequest, result: &SimulateResult) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["n", "k", "channel", "seed", "trials", "mean_T", "se_T", "eta_hat", "se_eta"];
    let mut record = vec![
        req.n.to_string(),
        req.k.to_string(),
        req.channel.to_string(),
        req.seed.to_string(),
        result.completion.trials.to_string(),
        result.completion.mean.to_string(),
        result.completion.std_error.to_string(),
        result.eta_hat.to_string(),
        result.se_eta.to_string(),
    ];
    if let Some(q) = &result.queue {
        header.extend(["lambda", "mean_queue", "queue_slope", "verdict"]);
        let verdict = match q.verdict {
            QueueVerdict::Stable => "stable",
            QueueVerdict::Unstable => "unstable",
            QueueVerdict::Inconclusive => "inconclusive",
        };
        record.extend([
            q.lambda.to_string(),
            q.mean_queue.to_string(),
            q.queue_trend_slope.to_string(),
            verdict.into(),
        ]);
    }
    writer.write_record(header)?;
    writer.write_record(record)?;
    writer.flush()?;
    Ok(())
}
