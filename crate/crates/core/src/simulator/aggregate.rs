//! Count-aggregated engine.
//!
//! Receivers are exchangeable given their channel history, so the system
//! state is the number of receivers in each history. Per block:
//!
//! 1. `T` is drawn by inversion from `P[T ≤ t] = Π_s G_s(t)^{c_s}`, where
//!    `G_s` is the completion CDF of one receiver starting in history `s`;
//! 2. end-of-block histories are drawn conditioned on `max_i T_i = t`.
//!    Given `T_i ≤ t`, receiver `i` finished exactly at `t` with
//!    probability `q_s`; the per-group hit counts are independent binomials
//!    conditioned on at least one hit overall, which is sampled group by
//!    group with a zero-truncated binomial for the first group that hits.
//!    Receivers that hit end in a history whose newest bit is 1; the others
//!    follow the law of the history at `t` given completion before `t`.
//!
//! Both steps are exact, so the engine reproduces the per-receiver
//! simulation in distribution at a cost independent of `n`.

use alloc::vec;
use alloc::vec::Vec;

use libm::{expm1, log, log1p};
use rand_distr::{Binomial, Distribution};

use super::rng::RandomStream;
use super::{BlockEngine, InitPolicy};
use crate::channel::{ChannelModel, ChannelState};
use crate::error::{Error, Result};

/// Largest channel order the aggregated engine accepts.
pub const MAX_AGGREGATE_ORDER: u32 = 4;

/// Completion-time tables of one receiver, per starting history, grown on
/// demand.
#[derive(Clone, Debug)]
pub struct CompletionTables<'m> {
    model: &'m ChannelModel,
    k: u64,
    dim: usize,
    succ0: Vec<usize>,
    succ1: Vec<usize>,
    /// `[s][j·dim + h]`: not finished, `j` successes, history `h`.
    live: Vec<Vec<f64>>,
    /// `[s][x]`: finished by the current horizon, history `x` now.
    done: Vec<Vec<f64>>,
    /// `[s][t]`: `P[T_i > t]`.
    survival: Vec<Vec<f64>>,
    /// `[s][t]`: `log P[T_i ≤ t]`.
    log_cdf: Vec<Vec<f64>>,
    /// `[s][t·dim + x]`: `P[T_i = t, history at t = x]`.
    hit: Vec<Vec<f64>>,
    /// `[s][t·dim + x]`: `P[T_i < t, history at t = x]`.
    early: Vec<Vec<f64>>,
    horizon: usize,
}

impl<'m> CompletionTables<'m> {
    pub fn new(model: &'m ChannelModel, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCount { name: "k", value: k });
        }
        if model.order() > MAX_AGGREGATE_ORDER {
            return Err(Error::UnsupportedOrder(model.order()));
        }
        let dim = model.num_states();
        let state = |h: usize| ChannelState::from_index(h as u32);
        let succ0 = (0..dim).map(|h| model.successor(state(h), false).index() as usize).collect();
        let succ1 = (0..dim).map(|h| model.successor(state(h), true).index() as usize).collect();
        let mut live = vec![vec![0.0; k as usize * dim]; dim];
        for (s, l) in live.iter_mut().enumerate() {
            l[s] = 1.0;
        }
        Ok(CompletionTables {
            model,
            k,
            dim,
            succ0,
            succ1,
            live,
            done: vec![vec![0.0; dim]; dim],
            survival: vec![vec![1.0]; dim],
            log_cdf: vec![vec![f64::NEG_INFINITY]; dim],
            hit: vec![vec![0.0; dim]; dim],
            early: vec![vec![0.0; dim]; dim],
            horizon: 0,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// `P[T_i > t | start in s]`.
    pub fn survival(&mut self, start: ChannelState, t: usize) -> f64 {
        self.extend_to(t);
        self.survival[start.index() as usize][t]
    }

    /// `P[T_i = t | start in s]`.
    pub fn point_mass(&mut self, start: ChannelState, t: usize) -> f64 {
        self.extend_to(t);
        let s = start.index() as usize;
        self.hit[s][t * self.dim..(t + 1) * self.dim].iter().sum()
    }

    pub fn extend_to(&mut self, t: usize) {
        while self.horizon < t {
            self.step();
        }
    }

    fn step(&mut self) {
        let (dim, k) = (self.dim, self.k as usize);
        let p1 = self.model.success_probabilities();
        let mut next_live = vec![0.0; k * dim];
        let mut new_hit = vec![0.0; dim];
        let mut new_early = vec![0.0; dim];
        for s in 0..dim {
            next_live.iter_mut().for_each(|v| *v = 0.0);
            new_hit.iter_mut().for_each(|v| *v = 0.0);
            new_early.iter_mut().for_each(|v| *v = 0.0);
            let live = &self.live[s];
            for j in 0..k {
                for h in 0..dim {
                    let mass = live[j * dim + h];
                    if mass == 0.0 {
                        continue;
                    }
                    let p = p1[h];
                    if j + 1 == k {
                        new_hit[self.succ1[h]] += mass * p;
                    } else {
                        next_live[(j + 1) * dim + self.succ1[h]] += mass * p;
                    }
                    next_live[j * dim + self.succ0[h]] += mass * (1.0 - p);
                }
            }
            let done = &mut self.done[s];
            for (h, &mass) in done.iter().enumerate() {
                new_early[self.succ1[h]] += mass * p1[h];
                new_early[self.succ0[h]] += mass * (1.0 - p1[h]);
            }
            let mut finished = 0.0;
            for x in 0..dim {
                done[x] = new_early[x] + new_hit[x];
                finished += done[x];
            }
            let survival: f64 = next_live.iter().sum();
            self.survival[s].push(survival);
            // the live mass is accurate in the upper tail, the finished mass in the lower one
            let log_cdf = if survival < 0.5 {
                log1p(-survival)
            } else if finished > 0.0 {
                log(finished)
            } else {
                f64::NEG_INFINITY
            };
            self.log_cdf[s].push(log_cdf);
            self.hit[s].extend_from_slice(&new_hit);
            self.early[s].extend_from_slice(&new_early);
            core::mem::swap(&mut self.live[s], &mut next_live);
        }
        self.horizon += 1;
    }
}

/// [`BlockEngine`] that tracks only how many receivers sit in each history.
#[derive(Clone, Debug)]
pub struct AggregateEngine<'m> {
    model: &'m ChannelModel,
    counts: Vec<u64>,
    tables: Option<CompletionTables<'m>>,
    stream: RandomStream,
}

impl<'m> AggregateEngine<'m> {
    pub fn new(model: &'m ChannelModel, n: u64, init: &InitPolicy, seed: u64, trial: u64) -> Result<Self> {
        if model.order() > MAX_AGGREGATE_ORDER {
            return Err(Error::UnsupportedOrder(model.order()));
        }
        let dim = model.num_states();
        // receiver index space is 0..n for the direct engine; u64::MAX is free
        let stream = RandomStream::new(seed, trial, u64::MAX);
        let mut engine = AggregateEngine { model, counts: vec![0; dim], tables: None, stream };
        match init {
            InitPolicy::Stationary => {
                let pi = model.stationary_distribution().unwrap_or(&[1.0]).to_vec();
                engine.counts = multinomial(&mut engine.stream, n, &pi);
            }
            InitPolicy::AllOnes => engine.counts[ChannelState::all_ones(model.order()).index() as usize] = n,
            InitPolicy::BurnIn { slots } => {
                engine.counts[0] = n;
                engine.idle(*slots);
            }
            InitPolicy::Explicit(states) => {
                if states.len() as u64 != n {
                    return Err(Error::InitMismatch { expected: n as usize, found: states.len() });
                }
                for s in states {
                    let slot = engine
                        .counts
                        .get_mut(s.index() as usize)
                        .ok_or(Error::InitMismatch { expected: dim, found: s.index() as usize })?;
                    *slot += 1;
                }
            }
        }
        Ok(engine)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn tables_for(&mut self, k: u64) -> &mut CompletionTables<'m> {
        if self.tables.as_ref().map(CompletionTables::k) != Some(k) {
            self.tables = Some(CompletionTables::new(self.model, k).expect("order checked at construction"));
        }
        self.tables.as_mut().expect("just initialized")
    }

    fn sample_completion(&mut self, k: u64) -> usize {
        let log_u = log(self.stream.uniform_open());
        let counts = self.counts.clone();
        let tables = self.tables_for(k);
        let mut t = k as usize;
        loop {
            tables.extend_to(t);
            let log_f: f64 =
                counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(s, &c)| c as f64 * tables.log_cdf[s][t]).sum();
            if log_f >= log_u {
                return t;
            }
            t += 1;
        }
    }

    fn resample_states(&mut self, k: u64, t: usize) {
        let counts = self.counts.clone();
        let dim = counts.len();
        // (hit law, early law, q, log P[no hit in group]) per group
        let mut groups = Vec::with_capacity(dim);
        {
            let tables = self.tables_for(k);
            for (s, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let hit = tables.hit[s][t * dim..(t + 1) * dim].to_vec();
                let early = tables.early[s][t * dim..(t + 1) * dim].to_vec();
                let (b, a): (f64, f64) = (hit.iter().sum(), early.iter().sum());
                let q = if a + b > 0.0 { (b / (a + b)).min(1.0) } else { 0.0 };
                let log_none = if q >= 1.0 { f64::NEG_INFINITY } else { c as f64 * log1p(-q) };
                groups.push((c, hit, early, q, log_none));
            }
        }
        let mut suffix = vec![0.0; groups.len() + 1];
        for g in (0..groups.len()).rev() {
            suffix[g] = suffix[g + 1] + groups[g].4;
        }

        let mut next = vec![0u64; dim];
        let mut seen_hit = false;
        for (g, (c, hit, early, q, log_none)) in groups.iter().enumerate() {
            let hits = if seen_hit {
                binomial(&mut self.stream, *c, *q)
            } else {
                // P[group hits | some group from here on hits]
                let num = -expm1(*log_none);
                let den = -expm1(suffix[g]);
                let last = g + 1 == groups.len();
                if last || (den > 0.0 && self.stream.uniform() < num / den) {
                    seen_hit = true;
                    zero_truncated_binomial(&mut self.stream, *c, *q)
                } else {
                    0
                }
            };
            for (x, m) in multinomial(&mut self.stream, hits, hit).into_iter().enumerate() {
                next[x] += m;
            }
            for (x, m) in multinomial(&mut self.stream, c - hits, early).into_iter().enumerate() {
                next[x] += m;
            }
        }
        self.counts = next;
    }
}

impl BlockEngine for AggregateEngine<'_> {
    fn run_block(&mut self, k: u64) -> u64 {
        let t = self.sample_completion(k);
        if self.counts.len() > 1 {
            self.resample_states(k, t);
        }
        t as u64
    }

    fn idle(&mut self, slots: u64) {
        if self.counts.len() == 1 {
            return;
        }
        let p1 = self.model.success_probabilities();
        for _ in 0..slots {
            let mut next = vec![0u64; self.counts.len()];
            for (s, &c) in self.counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let ones = binomial(&mut self.stream, c, p1[s]);
                let from = ChannelState::from_index(s as u32);
                next[self.model.successor(from, true).index() as usize] += ones;
                next[self.model.successor(from, false).index() as usize] += c - ones;
            }
            self.counts = next;
        }
    }

    fn state_counts(&self) -> Vec<u64> {
        self.counts.clone()
    }
}

pub(crate) fn binomial(stream: &mut RandomStream, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(stream)
}

/// Binomial(n, p) conditioned on being at least one: the index of the first
/// success by inversion of a truncated geometric law, then a plain binomial
/// for the remaining trials.
fn zero_truncated_binomial(stream: &mut RandomStream, n: u64, p: f64) -> u64 {
    if n == 0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p <= 0.0 {
        // unreachable for sampled completion times; keep the constraint
        return 1;
    }
    let log_stay = log1p(-p);
    let all_fail = -expm1(n as f64 * log_stay);
    let u = stream.uniform_open();
    let first = libm::ceil(log1p(-u * all_fail) / log_stay).clamp(1.0, n as f64) as u64;
    1 + binomial(stream, n - first, p)
}

/// Multinomial split of `n` over unnormalized `weights` by sequential
/// conditional binomials.
fn multinomial(stream: &mut RandomStream, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; weights.len()];
    let mut suffix = vec![0.0; weights.len() + 1];
    for i in (0..weights.len()).rev() {
        suffix[i] = suffix[i + 1] + weights[i];
    }
    let mut left = n;
    for (i, &w) in weights.iter().enumerate() {
        if left == 0 {
            break;
        }
        if suffix[i + 1] <= 0.0 || suffix[i] <= 0.0 {
            out[i] = left;
            break;
        }
        let draw = binomial(stream, left, w / suffix[i]);
        out[i] = draw;
        left -= draw;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_expected_completion_memoryless;

    #[test]
    fn survival_matches_negative_binomial_tail() {
        let model = ChannelModel::memoryless(0.5).unwrap();
        let mut tables = CompletionTables::new(&model, 1).unwrap();
        for t in 0..20 {
            let expect = libm::pow(0.5, t as f64);
            assert!((tables.survival(ChannelState::default(), t) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_from_tables_matches_oracle() {
        let model = ChannelModel::memoryless(0.3).unwrap();
        let mut tables = CompletionTables::new(&model, 7).unwrap();
        let mut mean = 0.0;
        for t in 0..2000 {
            let s = tables.survival(ChannelState::default(), t);
            mean += 1.0 - (1.0 - s) * (1.0 - s) * (1.0 - s);
        }
        let exact = exact_expected_completion_memoryless(0.3, 3, 7, 1e-14).unwrap();
        assert!((mean - exact).abs() < 1e-9, "{mean} vs {exact}");
    }

    #[test]
    fn gilbert_elliott_first_success_tails() {
        // from history 0, P[T > t] = (1 - p01)^t for k = 1
        let model = ChannelModel::gilbert_elliott(0.2, 0.4).unwrap();
        let mut tables = CompletionTables::new(&model, 1).unwrap();
        for t in 0..30 {
            let s = tables.survival(ChannelState::from_index(0), t);
            assert!((s - libm::pow(0.8, t as f64)).abs() < 1e-14);
        }
        assert!((tables.point_mass(ChannelState::from_index(1), 1) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn tables_conserve_probability() {
        let model = ChannelModel::from_success_probabilities(2, vec![0.1, 0.6, 0.3, 0.8]).unwrap();
        let mut tables = CompletionTables::new(&model, 4).unwrap();
        tables.extend_to(60);
        let dim = 4;
        for s in 0..dim {
            for t in 1..=60 {
                let done: f64 = (0..dim).map(|x| tables.hit[s][t * dim + x] + tables.early[s][t * dim + x]).sum();
                assert!((done + tables.survival[s][t] - 1.0).abs() < 1e-13);
                // completion happens on a success, so the newest bit is 1
                for x in (0..dim).step_by(2) {
                    assert_eq!(tables.hit[s][t * dim + x], 0.0);
                }
            }
        }
    }

    #[test]
    fn counts_are_conserved() {
        let model = ChannelModel::gilbert_elliott(0.3, 0.2).unwrap();
        let mut engine = AggregateEngine::new(&model, 1000, &InitPolicy::Stationary, 3, 0).unwrap();
        for _ in 0..50 {
            let t = engine.run_block(10);
            assert!(t >= 10);
            assert_eq!(engine.counts().iter().sum::<u64>(), 1000);
            assert!(engine.counts()[1] >= 1, "a receiver finishing at T ends in state 1");
        }
        engine.idle(5);
        assert_eq!(engine.counts().iter().sum::<u64>(), 1000);
    }

    #[test]
    fn multinomial_sums() {
        let mut s = RandomStream::new(1, 1, 1);
        for n in [0u64, 1, 10, 1_000_000] {
            let m = multinomial(&mut s, n, &[0.2, 0.0, 0.5, 0.3]);
            assert_eq!(m.iter().sum::<u64>(), n);
            assert_eq!(m[1], 0);
        }
        for _ in 0..1000 {
            let z = zero_truncated_binomial(&mut s, 50, 0.001);
            assert!((1..=50).contains(&z));
        }
        assert_eq!(zero_truncated_binomial(&mut s, 5, 1.0), 5);
    }
}
