//! Asymptotic throughput when the block size scales as `k ≈ c·ln n`.
//!
//! The limit throughput is `R(c) = sup{β ∈ [0, γ) : c ≥ β / Λ(β)}`. Since
//! `β ↦ β/Λ(β)` increases on `(0, γ)` from `0` to `+∞`, `R(c)` is the
//! unique root of `c·Λ(β) = β` there, found by bisection.

use libm::{fabs, log};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::spectral::{rate_function, rate_function_memoryless};

/// Limit of `k / ln n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockRatio {
    Finite(f64),
    /// `k` grows faster than `ln n`.
    Unbounded,
}

impl BlockRatio {
    /// `k / ln n` for a concrete system; unbounded for a single receiver.
    pub fn of(n: u64, k: u64) -> Self {
        if n <= 1 {
            BlockRatio::Unbounded
        } else {
            BlockRatio::Finite(k as f64 / log(n as f64))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            BlockRatio::Finite(c) => c,
            BlockRatio::Unbounded => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticResult {
    pub ratio: BlockRatio,
    /// `R(c)`.
    pub beta: f64,
    /// `|c − β/Λ(β)|` at the returned `β`; zero in the closed regimes.
    pub residual: f64,
    /// False when `β` is a supremum that is not attained (`c = ∞`).
    pub attained: bool,
    pub iterations: u32,
}

/// Bisection settings for [`asymptotic_throughput_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bisection {
    /// Initial bracket; `None` uses `[1e-9, γ − 1e-9]`.
    pub bracket: Option<(f64, f64)>,
    pub tolerance: f64,
    pub max_iter: u32,
}

impl Default for Bisection {
    fn default() -> Self {
        Bisection { bracket: None, tolerance: 1e-12, max_iter: 200 }
    }
}

/// `β / Λ(β, Π)` for `β ∈ (0, γ)`.
pub fn beta_over_lambda(model: &ChannelModel, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < model.gamma()) {
        return Err(Error::OutOfDomain { name: "beta", value: beta });
    }
    Ok(beta / rate_function(model, beta)?.value)
}

/// `R(c)` with default solver settings.
pub fn asymptotic_throughput(model: &ChannelModel, ratio: BlockRatio) -> Result<AsymptoticResult> {
    asymptotic_throughput_with(model, ratio, &Bisection::default())
}

pub fn asymptotic_throughput_with(
    model: &ChannelModel,
    ratio: BlockRatio,
    opts: &Bisection,
) -> Result<AsymptoticResult> {
    let gamma = model.gamma();
    let c = match ratio {
        BlockRatio::Unbounded => {
            return Ok(AsymptoticResult { ratio, beta: gamma, residual: 0.0, attained: false, iterations: 0 })
        }
        BlockRatio::Finite(c) if c.is_nan() || c < 0.0 => return Err(Error::OutOfDomain { name: "c", value: c }),
        BlockRatio::Finite(c) if c == f64::INFINITY => {
            return asymptotic_throughput_with(model, BlockRatio::Unbounded, opts)
        }
        BlockRatio::Finite(0.0) => {
            return Ok(AsymptoticResult { ratio, beta: 0.0, residual: 0.0, attained: true, iterations: 0 })
        }
        BlockRatio::Finite(c) => c,
    };

    // g(β) = cΛ(β) − β: positive as β → 0+, negative at β = γ
    let g = |beta: f64| -> Result<f64> { Ok(c * rate_function(model, beta)?.value - beta) };
    let (mut lo, mut hi) = opts.bracket.unwrap_or((1e-9, gamma - 1e-9));
    if !(0.0 <= lo && lo < hi && hi <= gamma) {
        return Err(Error::OutOfDomain { name: "bracket", value: lo });
    }
    if lo > 0.0 && g(lo)? <= 0.0 {
        (lo, hi) = (0.0, lo);
    } else if hi < gamma && g(hi)? >= 0.0 {
        (lo, hi) = (hi, gamma);
    }

    let mut iterations = 0;
    while hi - lo > opts.tolerance && iterations < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if g(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let beta = 0.5 * (lo + hi);
    let residual = fabs(c - beta / rate_function(model, beta)?.value);
    Ok(AsymptoticResult { ratio, beta, residual, attained: true, iterations })
}

/// `R(c)` of a memoryless channel from the closed-form rate function,
/// solving `log(β/γ) + ((1 − β)/β)·log((1 − β)/(1 − γ)) = 1/c`.
///
/// Returns `γ` for `c = ∞`, `0` for `c ≤ 0`, NaN for `γ ∉ (0, 1)`.
pub fn memoryless_asymptotic(gamma: f64, c: f64) -> f64 {
    if !(gamma > 0.0 && gamma < 1.0) || c.is_nan() {
        return f64::NAN;
    }
    if c == f64::INFINITY {
        return gamma;
    }
    if c <= 0.0 {
        return 0.0;
    }
    // Λ(β)/β is decreasing on (0, γ)
    let excess = |beta: f64| rate_function_memoryless(gamma, beta) / beta - 1.0 / c;
    let (mut lo, mut hi) = (0.0f64, gamma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
