//! Order-`l` Markov-modulated binary erasure channels.
//!
//! The channel state is the history of the last `l` slot outcomes, encoded
//! as an `l`-bit integer with the newest slot in the least significant bit.
//! From history `s` the next state is `((s << 1) | bit) & mask`, so every
//! row of the transition matrix has exactly two admissible entries and the
//! model only needs `P[next bit = 1 | s]` per state.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Largest supported channel memory.
pub const MAX_ORDER: u32 = 16;

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-13;
const STATIONARY_MAX_ITER: u64 = 1_000_000;

/// History of the last `l` slot outcomes of one receiver, newest slot in
/// bit 0. Always `0` for memoryless channels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelState(u32);

impl ChannelState {
    pub const fn from_index(index: u32) -> Self {
        ChannelState(index)
    }

    /// State from an outcome history listed oldest first.
    pub fn from_history(history: &[bool]) -> Result<Self> {
        if history.len() > MAX_ORDER as usize {
            return Err(Error::InvalidOrder(history.len() as u32));
        }
        Ok(ChannelState(history.iter().fold(0, |acc, &b| (acc << 1) | b as u32)))
    }

    /// All-ones history of length `order`.
    pub fn all_ones(order: u32) -> Self {
        ChannelState(mask(order))
    }

    pub const fn index(self) -> u32 {
        self.0
    }

    /// Outcome of the most recent slot (`f` in the rate-function literature).
    pub const fn newest(self) -> bool {
        self.0 & 1 == 1
    }

    /// History of length `order`, oldest first.
    pub fn history(self, order: u32) -> Vec<bool> {
        (0..order).rev().map(|i| (self.0 >> i) & 1 == 1).collect()
    }
}

#[inline]
const fn mask(order: u32) -> u32 {
    if order == 0 {
        0
    } else {
        u32::MAX >> (32 - order)
    }
}

/// Two-state Gilbert-Elliott parameters: `p01 = P[1 | 0]`, `p10 = P[0 | 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GilbertElliott {
    p01: f64,
    p10: f64,
}

impl GilbertElliott {
    pub fn new(p01: f64, p10: f64) -> Result<Self> {
        check_unit_half_open("p01", p01)?;
        check_unit_half_open("p10", p10)?;
        Ok(GilbertElliott { p01, p10 })
    }

    /// Memoryless channel written as a Gilbert-Elliott channel with identical
    /// rows.
    pub fn memoryless_equivalent(gamma: f64) -> Result<Self> {
        check_open_unit("gamma", gamma)?;
        GilbertElliott::new(gamma, 1.0 - gamma)
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p10(&self) -> f64 {
        self.p10
    }

    pub fn gamma(&self) -> f64 {
        self.p01 / (self.p01 + self.p10)
    }

    /// True when both rows of the transition matrix coincide.
    pub fn is_memoryless(&self) -> bool {
        (self.p01 + self.p10 - 1.0).abs() <= 1e-12
    }

    pub fn model(&self) -> Result<ChannelModel> {
        ChannelModel::gilbert_elliott(self.p01, self.p10)
    }
}

impl TryFrom<&ChannelModel> for GilbertElliott {
    type Error = Error;

    fn try_from(model: &ChannelModel) -> Result<Self> {
        match model.order() {
            0 => GilbertElliott::memoryless_equivalent(model.gamma()),
            1 => GilbertElliott::new(model.success_given(ChannelState(0)), 1.0 - model.success_given(ChannelState(1))),
            l => Err(Error::UnsupportedOrder(l)),
        }
    }
}

fn check_open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

fn check_unit_half_open(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name, value })
    }
}

/// A validated, immutable erasure channel model.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel {
    order: u32,
    /// `P[next slot succeeds | history s]`, one entry per state.
    success: Vec<f64>,
    stationary: Vec<f64>,
    gamma: f64,
}

impl ChannelModel {
    /// Memoryless channel: every slot succeeds independently with
    /// probability `gamma`.
    pub fn memoryless(gamma: f64) -> Result<Self> {
        check_open_unit("gamma", gamma)?;
        Ok(ChannelModel { order: 0, success: vec![gamma], stationary: vec![1.0], gamma })
    }

    /// Order-1 channel with transition matrix `[[1-p01, p01], [p10, 1-p10]]`.
    pub fn gilbert_elliott(p01: f64, p10: f64) -> Result<Self> {
        check_unit_half_open("p01", p01)?;
        check_unit_half_open("p10", p10)?;
        ChannelModel::from_success_probabilities(1, vec![p01, 1.0 - p10])
    }

    /// Order-`l` channel from its full `2^l × 2^l` transition matrix.
    ///
    /// Entry `(s, u)` may be nonzero only when `u` is `s` shifted by one slot.
    pub fn from_transition<R: AsRef<[f64]>>(order: u32, rows: &[R]) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        let dim = 1usize << order;
        if rows.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: rows.len() });
        }
        let m = mask(order);
        let mut success = Vec::with_capacity(dim);
        for (s, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            let mut sum = 0.0;
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidProbability { name: "transition entry", value: p });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotStochastic { row: s, sum });
            }
            let to0 = ((s as u32) << 1) & m;
            let to1 = to0 | 1;
            for (u, &p) in row.iter().enumerate() {
                if p != 0.0 && u as u32 != to0 && u as u32 != to1 {
                    return Err(Error::IllegalTransition { from: s, to: u });
                }
            }
            let (p0, p1) = (row[to0 as usize], row[to1 as usize]);
            success.push(p1 / (p0 + p1));
        }
        ChannelModel::from_success_probabilities(order, success)
    }

    /// Order-`l` channel from `P[next bit = 1 | s]` for every history `s`.
    pub fn from_success_probabilities(order: u32, success: Vec<f64>) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        if order == 0 {
            return match success.as_slice() {
                [gamma] => ChannelModel::memoryless(*gamma),
                _ => Err(Error::DimensionMismatch { expected: 1, found: success.len() }),
            };
        }
        let dim = 1usize << order;
        if success.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: success.len() });
        }
        if let Some(&p) = success.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability { name: "success probability", value: p });
        }
        check_ergodic(order, &success)?;
        let stationary = if order == 1 {
            let (p01, p10) = (success[0], 1.0 - success[1]);
            vec![p10 / (p01 + p10), p01 / (p01 + p10)]
        } else {
            stationary_by_power_iteration(order, &success)?
        };
        let gamma = stationary.iter().enumerate().filter(|(s, _)| s & 1 == 1).map(|(_, p)| p).sum();
        Ok(ChannelModel { order, success, stationary, gamma })
    }

    /// Memory depth `l` in slots.
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Number of channel states, `2^l` (one for memoryless channels).
    pub fn num_states(&self) -> usize {
        self.success.len()
    }

    /// Stationary per-slot success probability.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn success_given(&self, state: ChannelState) -> f64 {
        self.success[state.0 as usize]
    }

    pub fn success_probabilities(&self) -> &[f64] {
        &self.success
    }

    /// History after appending one outcome to `state`.
    #[inline]
    pub fn successor(&self, state: ChannelState, bit: bool) -> ChannelState {
        ChannelState(((state.0 << 1) | bit as u32) & mask(self.order))
    }

    /// Transition probability `π(s, u)`; `1` for the single memoryless state.
    pub fn transition(&self, from: ChannelState, to: ChannelState) -> f64 {
        if self.order == 0 {
            return 1.0;
        }
        let p1 = self.success[from.0 as usize];
        if to == self.successor(from, true) {
            p1
        } else if to == self.successor(from, false) {
            1.0 - p1
        } else {
            0.0
        }
    }

    /// Dense transition matrix, or `None` for memoryless channels.
    pub fn transition_matrix(&self) -> Option<Vec<Vec<f64>>> {
        if self.order == 0 {
            return None;
        }
        let dim = self.num_states();
        Some(
            (0..dim as u32)
                .map(|s| (0..dim as u32).map(|u| self.transition(ChannelState(s), ChannelState(u))).collect())
                .collect(),
        )
    }

    /// Stationary distribution over histories, or `None` for memoryless
    /// channels.
    pub fn stationary_distribution(&self) -> Option<&[f64]> {
        (self.order > 0).then_some(self.stationary.as_slice())
    }

    /// Advance one slot: the outcome is a success iff `draw < P[1 | history]`.
    #[inline]
    pub fn next_slot(&self, state: ChannelState, draw: f64) -> (bool, ChannelState) {
        let bit = draw < self.success[state.0 as usize];
        (bit, self.successor(state, bit))
    }

    /// Draw a history from the stationary distribution by inversion.
    pub fn stationary_state(&self, draw: f64) -> ChannelState {
        let mut acc = 0.0;
        for (s, &p) in self.stationary.iter().enumerate() {
            acc += p;
            if draw < acc {
                return ChannelState(s as u32);
            }
        }
        ChannelState(self.stationary.len() as u32 - 1)
    }
}

/// Rejects reducible or periodic chains. Edges exist where the shift
/// probability is positive.
fn check_ergodic(order: u32, success: &[f64]) -> Result<()> {
    let dim = success.len();
    let m = mask(order);
    let edges = |s: usize| {
        let to0 = ((s as u32) << 1) & m;
        let p1 = success[s];
        [(p1 < 1.0).then_some(to0 as usize), (p1 > 0.0).then_some((to0 | 1) as usize)]
    };

    // forward BFS levels from state 0
    let mut level = vec![u32::MAX; dim];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        for u in edges(s).into_iter().flatten() {
            if level[u] == u32::MAX {
                level[u] = level[s] + 1;
                queue.push_back(u);
            }
        }
    }
    if level.contains(&u32::MAX) {
        return Err(Error::Reducible);
    }

    // backward reachability: predecessors of u are (u >> 1) with either top bit
    let top = if order == 0 { 0 } else { 1usize << (order - 1) };
    let mut seen = vec![false; dim];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let base = u >> 1;
        for s in [base, base | top] {
            if !seen[s] && edges(s).into_iter().flatten().any(|v| v == u) {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    if seen.contains(&false) {
        return Err(Error::Reducible);
    }

    let mut period = 0u64;
    for s in 0..dim {
        for u in edges(s).into_iter().flatten() {
            let diff = (level[s] as i64 + 1 - level[u] as i64).unsigned_abs();
            period = gcd(period, diff);
        }
    }
    if period == 1 {
        Ok(())
    } else {
        Err(Error::Periodic(period))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn stationary_by_power_iteration(order: u32, success: &[f64]) -> Result<Vec<f64>> {
    let dim = success.len();
    let m = mask(order);
    let mut x = vec![1.0 / dim as f64; dim];
    let mut next = vec![0.0; dim];
    for _ in 0..STATIONARY_MAX_ITER {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (s, (&mass, &p1)) in x.iter().zip(success).enumerate() {
            let to0 = (((s as u32) << 1) & m) as usize;
            next[to0] += mass * (1.0 - p1);
            next[to0 | 1] += mass * p1;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        let diff: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        core::mem::swap(&mut x, &mut next);
        if diff < STATIONARY_TOL {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence { what: "stationary distribution", iterations: STATIONARY_MAX_ITER })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn memoryless_constructor() {
        let m = ChannelModel::memoryless(0.5).unwrap();
        assert_eq!(m.order(), 0);
        assert_eq!(m.gamma(), 0.5);
        assert!(m.transition_matrix().is_none());
        assert_eq!(ChannelModel::memoryless(0.25).unwrap().gamma(), 0.25);
        assert!(ChannelModel::memoryless(1.0).is_err());
        assert!(ChannelModel::memoryless(0.0).is_err());
        assert!(ChannelModel::memoryless(f64::NAN).is_err());
    }

    #[test]
    fn gilbert_elliott_constructor() {
        let m = ChannelModel::gilbert_elliott(0.4, 0.4).unwrap();
        assert!(close(m.gamma(), 0.5, 1e-15));
        let m = ChannelModel::gilbert_elliott(0.1, 0.3).unwrap();
        assert!(close(m.gamma(), 0.25, 1e-15));

        let g = 0.3;
        let m = ChannelModel::gilbert_elliott(g, 1.0 - g).unwrap();
        let pi = m.transition_matrix().unwrap();
        assert!(close(pi[0][0], pi[1][0], 1e-15) && close(pi[0][1], pi[1][1], 1e-15));
        assert!(close(pi[0][1], g, 1e-15));

        assert_eq!(ChannelModel::gilbert_elliott(1.0, 1.0), Err(Error::Periodic(2)));
        assert!(ChannelModel::gilbert_elliott(0.0, 0.5).is_err());
        assert!(ChannelModel::gilbert_elliott(0.5, 1.5).is_err());
        // 0 -> 1 surely, but 1 has a self loop: aperiodic
        assert!(ChannelModel::gilbert_elliott(1.0, 0.5).is_ok());
    }

    #[test]
    fn from_transition_validates() {
        let m = ChannelModel::from_transition(1, &[[0.6, 0.4], [0.4, 0.6]]).unwrap();
        assert!(close(m.gamma(), 0.5, 1e-15));
        assert_eq!(ChannelModel::from_transition(1, &[[1.0, 0.0], [0.0, 1.0]]), Err(Error::Reducible));
        assert!(matches!(
            ChannelModel::from_transition(1, &[[0.6, 0.5], [0.4, 0.6]]),
            Err(Error::NotStochastic { row: 0, .. })
        ));
        assert!(matches!(
            ChannelModel::from_transition(1, &[[0.6, 0.4, 0.0], [0.4, 0.6, 0.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        // state 00 may only move to 00 or 01
        let bad = [[0.5, 0.0, 0.5, 0.0], [0.0, 0.0, 0.5, 0.5], [0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]];
        assert_eq!(ChannelModel::from_transition(2, &bad), Err(Error::IllegalTransition { from: 0, to: 2 }));
        assert!(ChannelModel::from_transition(0, &[[1.0]]).is_err());
    }

    #[test]
    fn order_two_symmetric_is_half() {
        let rows = [[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5], [0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]];
        let m = ChannelModel::from_transition(2, &rows).unwrap();
        assert!(close(m.gamma(), 0.5, 1e-12));
        for &p in m.stationary_distribution().unwrap() {
            assert!(close(p, 0.25, 1e-12));
        }
    }

    #[test]
    fn stationary_two_state() {
        let cases = [((0.4, 0.4), [0.5, 0.5]), ((0.1, 0.3), [0.75, 0.25]), ((0.5, 0.5), [0.5, 0.5])];
        for ((p01, p10), expect) in cases {
            let m = ChannelModel::gilbert_elliott(p01, p10).unwrap();
            let pi = m.stationary_distribution().unwrap();
            assert!(close(pi[0], expect[0], 1e-12) && close(pi[1], expect[1], 1e-12));
        }
    }

    #[test]
    fn next_slot_threshold_rule() {
        let m = ChannelModel::memoryless(0.5).unwrap();
        assert_eq!(m.next_slot(ChannelState::default(), 0.49), (true, ChannelState::default()));
        let ge = ChannelModel::gilbert_elliott(0.4, 0.4).unwrap();
        let one = ChannelState::from_history(&[true]).unwrap();
        let zero = ChannelState::from_history(&[false]).unwrap();
        assert_eq!(ge.next_slot(one, 0.7), (false, zero));
        assert_eq!(ge.next_slot(zero, 0.39), (true, one));
        assert_eq!(ge.next_slot(zero, 0.4), (false, zero));
    }

    #[test]
    fn history_round_trip_and_shift() {
        let s = ChannelState::from_history(&[true, false, true]).unwrap();
        assert_eq!(s.index(), 0b101);
        assert_eq!(s.history(3), [true, false, true]);
        let rows = [[0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5], [0.5, 0.5, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]];
        let m = ChannelModel::from_transition(2, &rows).unwrap();
        let s = ChannelState::from_history(&[false, true]).unwrap();
        assert_eq!(m.successor(s, false).history(2), [true, false]);
        assert_eq!(ChannelState::all_ones(3).index(), 7);
    }

    #[test]
    fn gilbert_elliott_conversion() {
        let ge = GilbertElliott::new(0.1, 0.3).unwrap();
        let back = GilbertElliott::try_from(&ge.model().unwrap()).unwrap();
        assert!(close(back.p01(), 0.1, 1e-15) && close(back.p10(), 0.3, 1e-15));
        let mem = GilbertElliott::try_from(&ChannelModel::memoryless(0.3).unwrap()).unwrap();
        assert!(mem.is_memoryless());
        assert!(close(mem.gamma(), 0.3, 1e-15));
    }

    #[test]
    fn periodic_order_two_rejected() {
        // deterministic 4-cycle 00 -> 01 -> 11 -> 10 -> 00
        let mut p = vec![1.0, 1.0, 0.0, 0.0];
        assert_eq!(ChannelModel::from_success_probabilities(2, p.clone()), Err(Error::Periodic(4)));
        // self loop on 11
        p[3] = 0.5;
        let m = ChannelModel::from_success_probabilities(2, p);
        assert!(m.is_ok(), "{m:?}");
    }
}
