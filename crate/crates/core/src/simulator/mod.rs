//! Monte Carlo estimation of block completion times and throughput.
//!
//! Two engines implement [`BlockEngine`]:
//!
//! * [`direct::DirectEngine`] steps every receiver's channel slot by slot,
//!   each receiver drawing from its own stream keyed by
//!   `(seed, trial, receiver)`;
//! * [`aggregate::AggregateEngine`] tracks only how many receivers sit in
//!   each channel history and samples the block length and the end-of-block
//!   histories from exact conditional laws, so its cost does not grow
//!   with `n`.
//!
//! i.i.d. trial estimators always use the direct engine. The renewal
//! estimator and the queue simulator choose per [`Engine`].

pub mod aggregate;
pub mod direct;
pub mod queue;
pub mod rng;

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::channel::{ChannelModel, ChannelState, GilbertElliott};
use crate::error::{Error, Result};

pub use aggregate::{AggregateEngine, CompletionTables};
pub use direct::{block_time, DirectEngine, Receiver};
pub use queue::{simulate_queue, Arrival, QueueConfig, QueueStats, QueueVerdict};
pub use rng::{derive_seed, RandomStream};

/// Minimum trial count for i.i.d. completion-time estimates.
pub const MIN_TRIALS: u64 = 100;
/// Minimum renewal trace length.
pub const MIN_BLOCKS: u64 = 100;
/// Minimum sample count for first-success-time distributions.
pub const MIN_FIRST_SUCCESS_TRIALS: u64 = 10_000;
/// Receivers up to which [`Engine::Auto`] keeps the per-receiver engine.
pub const AUTO_DIRECT_MAX_RECEIVERS: u64 = 32;

/// How receivers' channel histories are set before a block.
#[derive(Clone, Debug, PartialEq)]
pub enum InitPolicy {
    /// Exact draw from the stationary distribution of the history chain.
    Stationary,
    /// Start from the all-zeros history and run the channel for `slots`.
    BurnIn { slots: u64 },
    /// Every receiver just saw `l` successes.
    AllOnes,
    /// One history per receiver (also how renewal chaining hands over the
    /// previous block's end states).
    Explicit(Vec<ChannelState>),
}

impl InitPolicy {
    /// Burn-in with the default length `max(1000, 100·2^l)`.
    pub fn default_burn_in(model: &ChannelModel) -> Self {
        InitPolicy::BurnIn { slots: (100 * model.num_states() as u64).max(1000) }
    }
}

/// Simulation engine selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    /// Per-receiver for small `n` or long channel memory, aggregated otherwise.
    #[default]
    Auto,
    PerReceiver,
    Aggregated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub engine: Engine,
    /// Share streams across settings: trial `t`, receiver `i` draws the same
    /// numbers whatever `n` and `k` are. Off by default so that estimates for
    /// different settings are independent.
    pub common_random_numbers: bool,
}

/// A simulator that runs whole blocks back to back on persistent channels.
pub trait BlockEngine {
    /// Transmit one block of `k` packets; returns its length in slots. All
    /// channels advance by exactly that many slots.
    fn run_block(&mut self, k: u64) -> u64;
    /// Advance every channel by `slots` slots without transmitting.
    fn idle(&mut self, slots: u64);
    /// Number of receivers in each channel history.
    fn state_counts(&self) -> Vec<u64>;
}

/// Boxed engine for `(model, n)` according to `engine`.
pub fn make_engine<'m>(
    model: &'m ChannelModel,
    n: u64,
    init: &InitPolicy,
    seed: u64,
    trial: u64,
    engine: Engine,
) -> Result<alloc::boxed::Box<dyn BlockEngine + 'm>> {
    if n == 0 {
        return Err(Error::InvalidCount { name: "n", value: n });
    }
    let aggregated = match engine {
        Engine::PerReceiver => false,
        Engine::Aggregated => true,
        Engine::Auto => n > AUTO_DIRECT_MAX_RECEIVERS && model.order() <= aggregate::MAX_AGGREGATE_ORDER,
    };
    Ok(if aggregated {
        alloc::boxed::Box::new(AggregateEngine::new(model, n, init, seed, trial)?)
    } else {
        alloc::boxed::Box::new(DirectEngine::new(model, n, init, seed, trial)?)
    })
}

fn setting_seed(seed: u64, n: u64, k: u64, tag: u64, opts: &SimOptions) -> u64 {
    if opts.common_random_numbers {
        seed
    } else {
        derive_seed(seed, &[tag, n, k])
    }
}

const TAG_COMPLETION: u64 = 1;
const TAG_RENEWAL: u64 = 2;
const TAG_FIRST_SUCCESS: u64 = 3;
const TAG_QUEUE: u64 = 4;

/// Summary of i.i.d. block completion times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionStats {
    pub mean: f64,
    /// Sample standard deviation over `√trials`.
    pub std_error: f64,
    pub trials: u64,
    pub min: u64,
    pub max: u64,
}

impl CompletionStats {
    /// Exact integer accumulation, so the result does not depend on sample
    /// order.
    pub fn from_samples(samples: &[u64]) -> Self {
        let trials = samples.len() as u64;
        let sum: u128 = samples.iter().map(|&t| t as u128).sum();
        let sum_sq: u128 = samples.iter().map(|&t| (t as u128) * (t as u128)).sum();
        let mean = sum as f64 / trials as f64;
        let std_error = if trials > 1 {
            let n = trials as u128;
            let numerator = n * sum_sq - sum * sum;
            let variance = numerator as f64 / (n * (n - 1)) as f64;
            sqrt(variance / trials as f64)
        } else {
            0.0
        };
        CompletionStats {
            mean,
            std_error,
            trials,
            min: samples.iter().copied().min().unwrap_or(0),
            max: samples.iter().copied().max().unwrap_or(0),
        }
    }
}

/// `trials` i.i.d. samples of `T(n, k)`, each trial re-initialized per
/// `init`.
pub fn sample_completion_times(
    model: &ChannelModel,
    n: u64,
    k: u64,
    init: &InitPolicy,
    trials: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<u64>> {
    check_counts(n, k)?;
    let base = setting_seed(seed, n, k, TAG_COMPLETION, opts);
    (0..trials)
        .map(|trial| {
            let mut receivers = direct::init_receivers(model, n, init, base, trial)?;
            Ok(block_time(model, k, &mut receivers))
        })
        .collect()
}

/// Monte Carlo `E[T(n, k) | init]`.
pub fn estimate_expected_completion(
    model: &ChannelModel,
    n: u64,
    k: u64,
    init: &InitPolicy,
    trials: u64,
    seed: u64,
) -> Result<CompletionStats> {
    estimate_expected_completion_with(model, n, k, init, trials, seed, &SimOptions::default())
}

pub fn estimate_expected_completion_with(
    model: &ChannelModel,
    n: u64,
    k: u64,
    init: &InitPolicy,
    trials: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<CompletionStats> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidCount { name: "trials", value: trials });
    }
    let samples = sample_completion_times(model, n, k, init, trials, seed, opts)?;
    Ok(CompletionStats::from_samples(&samples))
}

fn check_counts(n: u64, k: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidCount { name: "n", value: n });
    }
    if k == 0 {
        return Err(Error::InvalidCount { name: "k", value: k });
    }
    Ok(())
}

/// Renewal-trace throughput estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThroughputEstimate {
    /// `k · blocks / total_slots`.
    pub eta_hat: f64,
    pub blocks_completed: u64,
    pub total_slots: u64,
    /// Batch-means standard error over `⌊√blocks⌋` batches.
    pub std_error: f64,
}

impl ThroughputEstimate {
    /// Mean block length of the trace.
    pub fn mean_block_time(&self) -> f64 {
        self.total_slots as f64 / self.blocks_completed as f64
    }

    pub fn from_block_times(k: u64, times: &[u64]) -> Self {
        let blocks = times.len() as u64;
        let total_slots: u64 = times.iter().sum();
        let eta_hat = (k * blocks) as f64 / total_slots as f64;
        let batches = (sqrt(blocks as f64) as usize).max(1);
        let size = times.len() / batches;
        let std_error = if batches > 1 && size > 0 {
            let etas: Vec<f64> = times
                .chunks_exact(size)
                .take(batches)
                .map(|c| (k * size as u64) as f64 / c.iter().sum::<u64>() as f64)
                .collect();
            let mean = etas.iter().sum::<f64>() / batches as f64;
            let var = etas.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (batches - 1) as f64;
            sqrt(var / batches as f64)
        } else {
            0.0
        };
        ThroughputEstimate { eta_hat, blocks_completed: blocks, total_slots, std_error }
    }
}

/// Throughput `η(n, k)` from one long renewal trace: channels never reset,
/// each block starts from the histories the previous one left behind.
/// Channels start from the stationary distribution.
pub fn estimate_throughput(model: &ChannelModel, n: u64, k: u64, blocks: u64, seed: u64) -> Result<ThroughputEstimate> {
    estimate_throughput_with(model, n, k, blocks, seed, &SimOptions::default())
}

pub fn estimate_throughput_with(
    model: &ChannelModel,
    n: u64,
    k: u64,
    blocks: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<ThroughputEstimate> {
    Ok(ThroughputEstimate::from_block_times(k, &renewal_block_times(model, n, k, blocks, seed, opts)?))
}

/// Block lengths of a renewal trace.
pub fn renewal_block_times(
    model: &ChannelModel,
    n: u64,
    k: u64,
    blocks: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<u64>> {
    check_counts(n, k)?;
    if blocks < MIN_BLOCKS {
        return Err(Error::InvalidCount { name: "blocks", value: blocks });
    }
    let base = setting_seed(seed, n, k, TAG_RENEWAL, opts);
    let mut engine = make_engine(model, n, &InitPolicy::Stationary, base, 0, opts.engine)?;
    Ok((0..blocks).map(|_| engine.run_block(k)).collect())
}

/// Empirical distribution of a sum of first-success times.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstSuccessSample {
    /// `counts[t]` = number of samples equal to `t`.
    counts: Vec<u64>,
    trials: u64,
}

impl FirstSuccessSample {
    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Empirical `P[X > t]`.
    pub fn survival(&self, t: u64) -> f64 {
        let above: u64 = self.counts.iter().skip(t as usize + 1).sum();
        above as f64 / self.trials as f64
    }

    /// Empirical `P[X = t]`.
    pub fn mass(&self, t: u64) -> f64 {
        self.counts.get(t as usize).copied().unwrap_or(0) as f64 / self.trials as f64
    }

    /// Binomial standard error of [`survival`](Self::survival).
    pub fn survival_std_error(&self, t: u64) -> f64 {
        let p = self.survival(t);
        sqrt(p * (1.0 - p) / self.trials as f64)
    }

    pub fn mean(&self) -> f64 {
        let total: u64 = self.counts.iter().enumerate().map(|(t, &c)| t as u64 * c).sum();
        total as f64 / self.trials as f64
    }
}

/// Samples of `T^(b)`: slots until the first success of a Gilbert-Elliott
/// channel whose previous slot had outcome `b`.
pub fn first_success_times(ge: &GilbertElliott, start: bool, trials: u64, seed: u64) -> Result<FirstSuccessSample> {
    first_success_sums(ge, start, 1, trials, seed)
}

/// Samples of `Σ_{d=1}^{terms} T^(b)_d` with independent terms.
pub fn first_success_sums(
    ge: &GilbertElliott,
    start: bool,
    terms: u64,
    trials: u64,
    seed: u64,
) -> Result<FirstSuccessSample> {
    if trials < MIN_FIRST_SUCCESS_TRIALS {
        return Err(Error::InvalidCount { name: "trials", value: trials });
    }
    if terms == 0 {
        return Err(Error::InvalidCount { name: "terms", value: terms });
    }
    let model = ge.model()?;
    let state = ChannelState::from_index(start as u32);
    let base = derive_seed(seed, &[TAG_FIRST_SUCCESS, start as u64, terms]);
    let mut counts = vec![];
    for trial in 0..trials {
        let total: u64 = (0..terms)
            .map(|d| Receiver::new(state, RandomStream::new(base, trial, d)).slots_to_collect(&model, 1))
            .sum();
        if counts.len() <= total as usize {
            counts.resize(total as usize + 1, 0);
        }
        counts[total as usize] += 1;
    }
    Ok(FirstSuccessSample { counts, trials })
}

pub(crate) fn queue_seed(seed: u64, n: u64, k: u64) -> u64 {
    derive_seed(seed, &[TAG_QUEUE, n, k])
}
