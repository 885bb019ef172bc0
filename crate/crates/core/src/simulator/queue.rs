//! Discrete-time queue fed by i.i.d. per-slot arrivals and drained in
//! blocks of `k` packets.
//!
//! While the server is idle and at least `k` packets wait, `k` of them leave
//! the queue and are broadcast as one block lasting `T(n, k)` slots. Channels
//! run through idle slots too.

use alloc::vec::Vec;

use rand_distr::{Distribution, Poisson};

use super::aggregate::binomial;
use super::rng::RandomStream;
use super::{make_engine, queue_seed, Engine, InitPolicy};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};

pub const MIN_QUEUE_SLOTS: u64 = 100_000;

/// Per-slot arrival law with mean `λ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Arrival {
    /// `Binomial(⌈λ⌉, λ/⌈λ⌉)` packets per slot; Bernoulli(λ) when `λ ≤ 1`.
    #[default]
    BernoulliBatch,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueueVerdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// Verdict thresholds and engine choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueueConfig {
    /// Stable needs a trend below this (packets/slot)...
    pub stable_slope: f64,
    /// ...and a mean queue of at most `max_mean_queue_per_k · k`.
    pub max_mean_queue_per_k: f64,
    /// Unstable once the trend reaches this, or when the queue is over the
    /// mean bound and still growing.
    pub unstable_slope: f64,
    pub engine: Engine,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig { stable_slope: 1e-4, max_mean_queue_per_k: 50.0, unstable_slope: 1e-3, engine: Engine::Auto }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueueStats {
    pub lambda: f64,
    /// Mean waiting packets over the second half of the horizon.
    pub mean_queue: f64,
    /// Least-squares slope of queue length against slot over the second half.
    pub queue_trend_slope: f64,
    pub blocks_served: u64,
    pub verdict: QueueVerdict,
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_queue(
    model: &ChannelModel,
    n: u64,
    k: u64,
    lambda: f64,
    arrival: Arrival,
    slots: u64,
    seed: u64,
    config: &QueueConfig,
) -> Result<QueueStats> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::OutOfDomain { name: "lambda", value: lambda });
    }
    if slots < MIN_QUEUE_SLOTS {
        return Err(Error::InvalidCount { name: "slots", value: slots });
    }
    if k == 0 {
        return Err(Error::InvalidCount { name: "k", value: k });
    }
    let base = queue_seed(seed, n, k);
    let mut engine = make_engine(model, n, &InitPolicy::Stationary, base, 0, config.engine)?;
    // trial 1 keeps arrivals apart from every engine stream
    let mut arrivals = Arrivals::new(arrival, lambda, RandomStream::new(base, 1, 0))?;

    let mut queue = 0u64;
    let mut lengths = Vec::with_capacity(slots as usize);
    let mut blocks_served = 0u64;
    while (lengths.len() as u64) < slots {
        if queue >= k {
            queue -= k;
            let duration = engine.run_block(k);
            blocks_served += 1;
            for _ in 0..duration.min(slots - lengths.len() as u64) {
                queue += arrivals.draw();
                lengths.push(queue);
            }
        } else {
            engine.idle(1);
            queue += arrivals.draw();
            lengths.push(queue);
        }
    }

    let tail = &lengths[lengths.len() / 2..];
    let (mean_queue, slope) = trend(tail);
    let bounded = mean_queue <= config.max_mean_queue_per_k * k as f64;
    let verdict = if slope < config.stable_slope && bounded {
        QueueVerdict::Stable
    } else if slope >= config.unstable_slope || (!bounded && slope > 0.0) {
        QueueVerdict::Unstable
    } else {
        QueueVerdict::Inconclusive
    };
    Ok(QueueStats { lambda, mean_queue, queue_trend_slope: slope, blocks_served, verdict })
}

/// Mean and OLS slope of `ys` against `0, 1, 2, ...`.
fn trend(ys: &[u64]) -> (f64, f64) {
    let m = ys.len() as f64;
    let x_mean = (m - 1.0) / 2.0;
    let y_mean = ys.iter().map(|&y| y as f64).sum::<f64>() / m;
    let sxy: f64 = ys.iter().enumerate().map(|(x, &y)| (x as f64 - x_mean) * (y as f64 - y_mean)).sum();
    // Σ (x − x̄)² for x = 0..m−1
    let sxx = m * (m * m - 1.0) / 12.0;
    (y_mean, if sxx > 0.0 { sxy / sxx } else { 0.0 })
}

struct Arrivals {
    law: ArrivalLaw,
    stream: RandomStream,
}

enum ArrivalLaw {
    Batch { size: u64, p: f64 },
    Poisson(Poisson<f64>),
}

impl Arrivals {
    fn new(arrival: Arrival, lambda: f64, stream: RandomStream) -> Result<Self> {
        let law = match arrival {
            Arrival::BernoulliBatch => {
                let size = libm::ceil(lambda) as u64;
                ArrivalLaw::Batch { size, p: lambda / size as f64 }
            }
            Arrival::Poisson => ArrivalLaw::Poisson(
                Poisson::new(lambda).map_err(|_| Error::OutOfDomain { name: "lambda", value: lambda })?,
            ),
        };
        Ok(Arrivals { law, stream })
    }

    fn draw(&mut self) -> u64 {
        match &self.law {
            ArrivalLaw::Batch { size: 1, p } => (self.stream.uniform() < *p) as u64,
            ArrivalLaw::Batch { size, p } => binomial(&mut self.stream, *size, *p),
            ArrivalLaw::Poisson(d) => d.sample(&mut self.stream) as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_of_a_line() {
        let ys: Vec<u64> = (0..1000).map(|x| 3 * x + 7).collect();
        let (mean, slope) = trend(&ys);
        assert!((slope - 3.0).abs() < 1e-9);
        assert!((mean - (7.0 + 3.0 * 999.0 / 2.0)).abs() < 1e-9);
        assert_eq!(trend(&[5; 10]).1, 0.0);
    }

    #[test]
    fn arrival_means() {
        for (arrival, lambda) in
            [(Arrival::BernoulliBatch, 0.3), (Arrival::BernoulliBatch, 2.5), (Arrival::Poisson, 0.7)]
        {
            let mut a = Arrivals::new(arrival, lambda, RandomStream::new(1, 2, 3)).unwrap();
            let total: u64 = (0..200_000).map(|_| a.draw()).sum();
            let mean = total as f64 / 200_000.0;
            // variance ≤ λ, so 5 SE is below 5·√(λ/2e5)
            assert!((mean - lambda).abs() < 5.0 * libm::sqrt(lambda / 200_000.0), "{arrival:?} {mean}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = ChannelModel::memoryless(0.5).unwrap();
        let cfg = QueueConfig::default();
        assert!(simulate_queue(&m, 2, 5, 0.0, Arrival::Poisson, 100_000, 0, &cfg).is_err());
        assert!(simulate_queue(&m, 2, 5, 0.1, Arrival::Poisson, 99_999, 0, &cfg).is_err());
    }
}
