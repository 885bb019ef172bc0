//! Finite-`(n, k)` throughput lower bounds for Gilbert-Elliott channels and
//! the two earlier CSE bounds they are compared against.

use libm::{log, pow, sqrt};

use crate::asymptotic::{asymptotic_throughput, BlockRatio};
use crate::channel::GilbertElliott;
use crate::error::{Error, Result};

/// Numerator of CSE bound 1. The published statement uses the erasure
/// probability `1 − γ`; `Gamma` swaps in the success probability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Cse1Numerator {
    #[default]
    OneMinusGamma,
    Gamma,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundOptions {
    pub cse1_numerator: Cse1Numerator,
}

/// All analytical bounds for one `(n, k)` point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub n: u64,
    pub k: u64,
    pub k_zero: u64,
    pub gamma: f64,
    /// `(k + K₀) / ln n`; infinite for `n = 1`.
    pub ratio: f64,
    /// `k/(k + K₀) · R((k + K₀)/ln n)`.
    pub our_bound: f64,
    /// `R((k + K₀)/ln n)`.
    pub asymptotic_ref: f64,
    pub cse1: Option<f64>,
    pub cse2: Option<f64>,
    /// Single receiver: no straggler effect, the bound is reported as `γ`.
    pub degenerate: bool,
}

/// Memory penalty `K₀ = min{m ≥ 0 : Σ_{d=0}^{m} (1 − p10)^d p10 + p01 ≥ 1}`.
///
/// The geometric sum is `1 − (1 − p10)^{m+1}`, so the condition reads
/// `(1 − p10)^{m+1} ≤ p01`.
pub fn k_zero(p01: f64, p10: f64) -> Result<u64> {
    let ge = GilbertElliott::new(p01, p10)?;
    Ok(k_zero_of(&ge))
}

fn k_zero_of(ge: &GilbertElliott) -> u64 {
    // absorbs rounding in parameters like 0.35 + 0.65
    const SLACK: f64 = 1e-12;
    let stay = 1.0 - ge.p10();
    let mut m = 0u64;
    while pow(stay, (m + 1) as f64) > ge.p01() + SLACK {
        m += 1;
    }
    m
}

/// Lower bound on `η(n, k)` with the default CSE 1 numerator.
pub fn finite_lower_bound(ge: &GilbertElliott, n: u64, k: u64) -> Result<BoundReport> {
    finite_lower_bound_with(ge, n, k, &BoundOptions::default())
}

pub fn finite_lower_bound_with(ge: &GilbertElliott, n: u64, k: u64, opts: &BoundOptions) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::InvalidCount { name: "n", value: n });
    }
    if k == 0 {
        return Err(Error::InvalidCount { name: "k", value: k });
    }
    let gamma = ge.gamma();
    let k_zero = k_zero_of(ge);
    let cse1 = if ge.is_memoryless() { cse_bound_1_with(gamma, n, k, opts.cse1_numerator) } else { None };
    let cse2 = cse_bound_2(ge, n, k);
    if n == 1 {
        return Ok(BoundReport {
            n,
            k,
            k_zero,
            gamma,
            ratio: f64::INFINITY,
            our_bound: gamma,
            asymptotic_ref: gamma,
            cse1,
            cse2,
            degenerate: true,
        });
    }
    let ratio = (k + k_zero) as f64 / log(n as f64);
    let asymptotic_ref = asymptotic_throughput(&ge.model()?, BlockRatio::Finite(ratio))?.beta;
    let our_bound = k as f64 / (k + k_zero) as f64 * asymptotic_ref;
    Ok(BoundReport { n, k, k_zero, gamma, ratio, our_bound, asymptotic_ref, cse1, cse2, degenerate: false })
}

/// CSE bound 1 (memoryless channels, valid for `k > 16`), printed numerator.
pub fn cse_bound_1(gamma: f64, n: u64, k: u64) -> Option<f64> {
    cse_bound_1_with(gamma, n, k, Cse1Numerator::OneMinusGamma)
}

pub fn cse_bound_1_with(gamma: f64, n: u64, k: u64, numerator: Cse1Numerator) -> Option<f64> {
    if k <= 16 || n == 0 {
        return None;
    }
    let top = match numerator {
        Cse1Numerator::OneMinusGamma => 1.0 - gamma,
        Cse1Numerator::Gamma => gamma,
    };
    let k = k as f64;
    Some(top * k / (k + (log(n as f64) + 0.78) * sqrt(k) + 2.61))
}

/// CSE bound 2 (Gilbert-Elliott channels with `1 − p10 − p01 ≥ 0` and
/// `k ≥ 21 ln n − 4`).
pub fn cse_bound_2(ge: &GilbertElliott, n: u64, k: u64) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let ln_n = log(n as f64);
    let k = k as f64;
    if 1.0 - ge.p10() - ge.p01() < 0.0 || k < 21.0 * ln_n - 4.0 {
        return None;
    }
    Some(ge.p01() * k / (k + 2.0 * sqrt((0.78 * k + 3.37) * ln_n) + 2.61))
}
