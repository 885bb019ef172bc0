//! Per-receiver engine: every receiver's channel is stepped slot by slot
//! with its own random stream.

use alloc::vec::Vec;

use super::rng::RandomStream;
use super::{BlockEngine, InitPolicy};
use crate::channel::{ChannelModel, ChannelState};
use crate::error::{Error, Result};

/// One receiver: its current channel history and private stream.
#[derive(Clone, Debug)]
pub struct Receiver {
    state: ChannelState,
    stream: RandomStream,
}

impl Receiver {
    pub fn new(state: ChannelState, stream: RandomStream) -> Self {
        Receiver { state, stream }
    }

    pub fn state(&self) -> ChannelState {
        self.state
    }

    #[inline]
    pub fn step(&mut self, model: &ChannelModel) -> bool {
        let (bit, next) = model.next_slot(self.state, self.stream.uniform());
        self.state = next;
        bit
    }

    /// Slots until `k` successes have been collected.
    pub fn slots_to_collect(&mut self, model: &ChannelModel, k: u64) -> u64 {
        let mut slots = 0;
        let mut hits = 0;
        while hits < k {
            hits += self.step(model) as u64;
            slots += 1;
        }
        slots
    }

    pub fn advance(&mut self, model: &ChannelModel, slots: u64) {
        for _ in 0..slots {
            self.step(model);
        }
    }
}

/// Receivers for one trial (or one renewal trace), streams keyed by
/// `(seed, trial, receiver index)`, initialized per `init`.
pub fn init_receivers(model: &ChannelModel, n: u64, init: &InitPolicy, seed: u64, trial: u64) -> Result<Vec<Receiver>> {
    if let InitPolicy::Explicit(states) = init {
        if states.len() as u64 != n {
            return Err(Error::InitMismatch { expected: n as usize, found: states.len() });
        }
        if let Some(bad) = states.iter().find(|s| s.index() as usize >= model.num_states()) {
            return Err(Error::InitMismatch { expected: model.num_states(), found: bad.index() as usize });
        }
    }
    let receivers = (0..n)
        .map(|i| {
            let mut stream = RandomStream::new(seed, trial, i);
            let state = match init {
                InitPolicy::Stationary => model.stationary_state(stream.uniform()),
                InitPolicy::AllOnes => ChannelState::all_ones(model.order()),
                InitPolicy::Explicit(states) => states[i as usize],
                InitPolicy::BurnIn { .. } => ChannelState::default(),
            };
            let mut rx = Receiver::new(state, stream);
            if let InitPolicy::BurnIn { slots } = init {
                rx.advance(model, *slots);
            }
            rx
        })
        .collect();
    Ok(receivers)
}

/// `T = max_i T_i(k)`. Receivers that finish early keep their channels
/// running until `T`, so on return every receiver holds its end-of-block
/// history.
pub fn block_time(model: &ChannelModel, k: u64, receivers: &mut [Receiver]) -> u64 {
    let mut finish = Vec::with_capacity(receivers.len());
    finish.extend(receivers.iter_mut().map(|rx| rx.slots_to_collect(model, k)));
    let slots = finish.iter().copied().max().unwrap_or(0);
    for (rx, t) in receivers.iter_mut().zip(finish) {
        rx.advance(model, slots - t);
    }
    slots
}

/// [`BlockEngine`] over explicit receivers.
#[derive(Clone, Debug)]
pub struct DirectEngine<'m> {
    model: &'m ChannelModel,
    receivers: Vec<Receiver>,
}

impl<'m> DirectEngine<'m> {
    pub fn new(model: &'m ChannelModel, n: u64, init: &InitPolicy, seed: u64, trial: u64) -> Result<Self> {
        Ok(DirectEngine { model, receivers: init_receivers(model, n, init, seed, trial)? })
    }

    pub fn receivers(&self) -> &[Receiver] {
        &self.receivers
    }

    pub fn states(&self) -> Vec<ChannelState> {
        self.receivers.iter().map(Receiver::state).collect()
    }
}

impl BlockEngine for DirectEngine<'_> {
    fn run_block(&mut self, k: u64) -> u64 {
        block_time(self.model, k, &mut self.receivers)
    }

    fn idle(&mut self, slots: u64) {
        for rx in &mut self.receivers {
            rx.advance(self.model, slots);
        }
    }

    fn state_counts(&self) -> Vec<u64> {
        let mut counts = alloc::vec![0u64; self.model.num_states()];
        for rx in &self.receivers {
            counts[rx.state.index() as usize] += 1;
        }
        counts
    }
}
