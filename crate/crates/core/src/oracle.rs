//! Exact expected block completion time on memoryless channels.
//!
//! With i.i.d. receivers, `P[T(n, k) > t] = 1 − F(t)^n` where
//! `F(t) = P[Binomial(t, γ) ≥ k]`, so `E[T] = Σ_{t ≥ 0} (1 − F(t)^n)`. The
//! binomial lower tail is accumulated from log-pmf terms, which keeps the
//! sum stable for large `t`. Nothing here touches the simulator.

use alloc::vec::Vec;

use libm::{exp, expm1, log, log1p};

use crate::error::{Error, Result};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
const MAX_TERMS: u64 = 100_000_000;

/// `E[T(n, k)]` for a memoryless channel with success probability `gamma`.
///
/// Stops once a summand beyond `t = k` falls below `tail_tol`.
pub fn exact_expected_completion_memoryless(gamma: f64, n: u64, k: u64, tail_tol: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidProbability { name: "gamma", value: gamma });
    }
    if n == 0 || k == 0 {
        return Err(Error::InvalidCount { name: if n == 0 { "n" } else { "k" }, value: 0 });
    }
    if tail_tol.is_nan() || tail_tol <= 0.0 {
        return Err(Error::OutOfDomain { name: "tail_tol", value: tail_tol });
    }
    // every t < k contributes exactly 1
    let mut total = k as f64;
    let mut t = k;
    loop {
        if t - k > MAX_TERMS {
            return Err(Error::NonConvergence { what: "exact completion series", iterations: MAX_TERMS });
        }
        let below = binomial_lower_tail(t, k, gamma);
        // 1 − (1 − below)^n
        let term = -expm1(n as f64 * log1p(-below));
        total += term;
        if term < tail_tol {
            return Ok(total);
        }
        t += 1;
    }
}

/// `P[Binomial(t, p) < k]` from the log-pmf recurrence
/// `log pmf(j+1) = log pmf(j) + log((t−j)/(j+1)) + log(p/(1−p))`.
fn binomial_lower_tail(t: u64, k: u64, p: f64) -> f64 {
    let odds = log(p) - log1p(-p);
    let mut log_pmf = t as f64 * log1p(-p);
    let top = k.min(t + 1);
    let mut max = log_pmf;
    let mut terms = Vec::with_capacity(top as usize);
    for j in 0..top {
        if j > 0 {
            log_pmf += log((t - j + 1) as f64 / j as f64) + odds;
        }
        max = max.max(log_pmf);
        terms.push(log_pmf);
    }
    let sum: f64 = terms.iter().map(|&lp| exp(lp - max)).sum();
    (exp(max) * sum).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_and_negative_binomial_means() {
        for gamma in [0.25, 0.5, 0.75] {
            let v = exact_expected_completion_memoryless(gamma, 1, 1, 1e-14).unwrap();
            assert!((v - 1.0 / gamma).abs() < 1e-10);
            for k in [2, 5, 20] {
                let v = exact_expected_completion_memoryless(gamma, 1, k, 1e-14).unwrap();
                assert!((v - k as f64 / gamma).abs() < 1e-9, "gamma={gamma} k={k}: {v}");
            }
        }
    }

    #[test]
    fn two_receivers_one_packet() {
        let v = exact_expected_completion_memoryless(0.5, 2, 1, DEFAULT_TAIL_TOL).unwrap();
        assert!((v - 8.0 / 3.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn outcome_tree_brute_force() {
        // enumerate all outcome sequences of both receivers up to depth 12
        // and compare truncated expectations of min(T, depth)
        let (gamma, k, depth) = (0.5f64, 2u32, 12u32);
        let completion = |seq: u32| -> u32 {
            let mut hits = 0;
            for slot in 0..depth {
                hits += (seq >> slot) & 1;
                if hits == k {
                    return slot + 1;
                }
            }
            depth
        };
        let p_seq = |seq: u32| {
            let ones = seq.count_ones() as i32;
            libm::pow(gamma, ones as f64) * libm::pow(1.0 - gamma, (depth as i32 - ones) as f64)
        };
        let mut truncated = 0.0;
        for a in 0..(1u32 << depth) {
            for b in 0..(1u32 << depth) {
                truncated += p_seq(a) * p_seq(b) * completion(a).max(completion(b)) as f64;
            }
        }
        // Σ_{t < depth} P[T > t] = E[min(T, depth)]
        let mut series = 0.0;
        for t in 0..depth as u64 {
            let below = if t < k as u64 { 1.0 } else { binomial_lower_tail(t, k as u64, gamma) };
            series += 1.0 - (1.0 - below) * (1.0 - below);
        }
        assert!((truncated - series).abs() < 1e-12, "{truncated} vs {series}");
    }

    #[test]
    fn lower_tail_matches_direct_sum() {
        // small t: compare against factorial-free pascal triangle
        let p = 0.3;
        let mut row = alloc::vec![1.0f64];
        for t in 1..=40u64 {
            let mut next = alloc::vec![0.0; row.len() + 1];
            for (j, &v) in row.iter().enumerate() {
                next[j] += v * (1.0 - p);
                next[j + 1] += v * p;
            }
            row = next;
            for k in [1u64, 3, 10] {
                let direct: f64 = row.iter().take(k as usize).sum();
                assert!((binomial_lower_tail(t, k, p) - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(exact_expected_completion_memoryless(1.0, 1, 1, 1e-12).is_err());
        assert!(exact_expected_completion_memoryless(0.5, 0, 1, 1e-12).is_err());
        assert!(exact_expected_completion_memoryless(0.5, 1, 0, 1e-12).is_err());
        assert!(exact_expected_completion_memoryless(0.5, 1, 1, 0.0).is_err());
    }
}
