//! Tilted transition matrices, their Perron roots and the large-deviations
//! rate function of the per-slot success process.
//!
//! For a channel with transition matrix `Π` the tilted matrix is
//! `Π_θ(s, u) = π(s, u)·e^{θ·f(u)}` where `f(u)` is the newest outcome in
//! history `u`. The rate function is the Legendre-type transform
//!
//! ```text
//! Λ(β) = sup_θ { θβ − log ρ(Π_θ) }
//! ```
//!
//! with `ρ` the Perron-Frobenius root. For memoryless channels the "matrix"
//! is the scalar `1 − γ + γe^θ`, the moment generating function of one
//! Bernoulli(γ) slot, and `Λ` reduces to a binary KL divergence.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, expm1, fabs, log, log1p, sqrt};

use crate::channel::{ChannelModel, ChannelState};
use crate::error::{Error, Result};

/// `exp` overflow guard on the tilt.
pub const MAX_TILT: f64 = 700.0;

const PERRON_REL_TOL: f64 = 1e-13;
const PERRON_MAX_ITER: u64 = 1_000_000;

const DERIV_STEP: f64 = 1e-6;
const GOLDEN_WIDTH: f64 = 1e-12;
const GOLDEN_MAX_ITER: u32 = 500;

/// `Π_θ` for one model and tilt. Entries are computed on demand.
#[derive(Clone, Copy, Debug)]
pub struct TiltedMatrix<'a> {
    model: &'a ChannelModel,
    theta: f64,
}

impl<'a> TiltedMatrix<'a> {
    pub fn new(model: &'a ChannelModel, theta: f64) -> Result<Self> {
        if theta.is_nan() || fabs(theta) > MAX_TILT {
            return Err(Error::TiltOutOfRange(theta));
        }
        Ok(TiltedMatrix { model, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.model.num_states()
    }

    pub fn entry(&self, from: ChannelState, to: ChannelState) -> f64 {
        if self.model.order() == 0 {
            let g = self.model.gamma();
            return 1.0 - g + g * exp(self.theta);
        }
        let p = self.model.transition(from, to);
        if to.newest() {
            p * exp(self.theta)
        } else {
            p
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let dim = self.dim() as u32;
        (0..dim)
            .map(|s| (0..dim).map(|u| self.entry(ChannelState::from_index(s), ChannelState::from_index(u))).collect())
            .collect()
    }

    /// Perron-Frobenius root `ρ(Π_θ)`.
    pub fn perron_root(&self) -> Result<f64> {
        self.log_perron_root().map(exp)
    }

    /// `log ρ(Π_θ)`, evaluated without overflow for any admissible tilt.
    ///
    /// Closed forms for `l ≤ 1`, power iteration otherwise.
    pub fn log_perron_root(&self) -> Result<f64> {
        match self.model.order() {
            0 => Ok(log_bernoulli_mgf(self.model.gamma(), self.theta)),
            1 => Ok(self.log_perron_root_two_state()),
            _ => self.log_perron_root_iterative(),
        }
    }

    fn log_perron_root_two_state(&self) -> f64 {
        let p = self.model.success_probabilities();
        let (scale, w0, w1) = self.scaled_weights();
        // [[a, b], [c, d]] = e^{-scale} Π_θ
        let a = (1.0 - p[0]) * w0;
        let b = p[0] * w1;
        let c = (1.0 - p[1]) * w0;
        let d = p[1] * w1;
        let disc = (a - d) * (a - d) + 4.0 * b * c;
        scale + log(0.5 * (a + d + sqrt(disc)))
    }

    /// `e^{θ f(u)}` for `f(u) ∈ {0, 1}` divided by `e^{max(θ, 0)}`.
    fn scaled_weights(&self) -> (f64, f64, f64) {
        if self.theta > 0.0 {
            (self.theta, exp(-self.theta), 1.0)
        } else {
            (0.0, 1.0, exp(self.theta))
        }
    }

    /// Power iteration on the scaled matrix with Collatz-Wielandt bounds as
    /// the stopping rule. Works for every order, so it doubles as the
    /// cross-check of the closed forms.
    pub fn log_perron_root_iterative(&self) -> Result<f64> {
        if self.model.order() == 0 {
            return Ok(log_bernoulli_mgf(self.model.gamma(), self.theta));
        }
        let p = self.model.success_probabilities();
        let dim = p.len();
        let (scale, w0, w1) = self.scaled_weights();
        let mut x = vec![1.0 / dim as f64; dim];
        let mut y = vec![0.0; dim];
        for _ in 0..PERRON_MAX_ITER {
            for (s, ys) in y.iter_mut().enumerate() {
                let to0 = self.model.successor(ChannelState::from_index(s as u32), false).index() as usize;
                *ys = (1.0 - p[s]) * w0 * x[to0] + p[s] * w1 * x[to0 | 1];
            }
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for (&ys, &xs) in y.iter().zip(&x) {
                if xs > 0.0 {
                    let r = ys / xs;
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
            let total: f64 = y.iter().sum();
            x.iter_mut().zip(&y).for_each(|(xs, &ys)| *xs = ys / total);
            if hi - lo <= PERRON_REL_TOL * hi {
                return Ok(scale + log(0.5 * (lo + hi)));
            }
        }
        Err(Error::NonConvergence { what: "Perron root power iteration", iterations: PERRON_MAX_ITER })
    }
}

/// Tilts `model` by `theta`.
pub fn tilted(model: &ChannelModel, theta: f64) -> Result<TiltedMatrix<'_>> {
    TiltedMatrix::new(model, theta)
}

/// `log(1 − γ + γe^θ)`.
fn log_bernoulli_mgf(gamma: f64, theta: f64) -> f64 {
    if theta > 0.0 {
        theta + log(gamma + (1.0 - gamma) * exp(-theta))
    } else {
        log1p(gamma * expm1(theta))
    }
}

/// One evaluation of the rate function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFunctionEval {
    pub beta: f64,
    /// Maximizing tilt; infinite when the supremum is only approached.
    pub theta_star: f64,
    pub value: f64,
    pub iterations: u32,
    /// Set when `β` sits at (or numerically beyond) the edge of `[0, 1]`
    /// and `value` is the continuous extension `Λ(0)` or `Λ(1)`.
    pub capped: bool,
}

/// `Λ(β, Π) = sup_θ { θβ − log ρ(Π_θ) }` by golden-section search on the
/// concave objective.
pub fn rate_function(model: &ChannelModel, beta: f64) -> Result<RateFunctionEval> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::OutOfDomain { name: "beta", value: beta });
    }
    if beta == 0.0 || beta == 1.0 {
        return Ok(boundary_eval(model, beta));
    }
    let objective = |theta: f64| -> Result<f64> { Ok(theta * beta - tilted(model, theta)?.log_perron_root()?) };
    let slope = |theta: f64| -> Result<f64> {
        Ok((objective(theta + DERIV_STEP)? - objective(theta - DERIV_STEP)?) / (2.0 * DERIV_STEP))
    };

    let limit = MAX_TILT - DERIV_STEP;
    let mut lo = -1.0f64;
    while slope(lo)? <= 0.0 {
        if lo <= -limit {
            return Ok(boundary_eval(model, 0.0).with_beta(beta));
        }
        lo = (2.0 * lo).max(-limit);
    }
    let mut hi = 1.0f64;
    while slope(hi)? >= 0.0 {
        if hi >= limit {
            return Ok(boundary_eval(model, 1.0).with_beta(beta));
        }
        hi = (2.0 * hi).min(limit);
    }

    let (theta_star, mut value, iterations) = golden_section_max(&objective, lo, hi)?;
    // φ(0) = −log ρ(Π) = 0, so the supremum is never negative
    let theta_star = if value < 0.0 {
        value = 0.0;
        0.0
    } else {
        theta_star
    };
    Ok(RateFunctionEval { beta, theta_star, value, iterations, capped: false })
}

impl RateFunctionEval {
    fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

/// `Λ(0) = −log P[1 | 0…0]ᶜ` and `Λ(1) = −log P[1 | 1…1]`: only the
/// all-zeros (all-ones) self loop survives the limit `θ → ∓∞`.
fn boundary_eval(model: &ChannelModel, beta: f64) -> RateFunctionEval {
    let p = model.success_probabilities();
    let (value, theta_star) =
        if beta == 0.0 { (-log1p(-p[0]), f64::NEG_INFINITY) } else { (-log(p[p.len() - 1]), f64::INFINITY) };
    RateFunctionEval { beta, theta_star, value, iterations: 0, capped: true }
}

/// Golden-section maximization; returns `(argmax, max, iterations)`.
fn golden_section_max<F>(f: &F, mut a: f64, mut b: f64) -> Result<(f64, f64, u32)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = 0.5 * (sqrt(5.0) - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut iterations = 0;
    while b - a > GOLDEN_WIDTH && iterations < GOLDEN_MAX_ITER {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        iterations += 1;
        // interval can no longer shrink in floating point
        if c >= d {
            break;
        }
    }
    Ok(if fc >= fd { (c, fc, iterations) } else { (d, fd, iterations) })
}

/// Closed-form rate function of a memoryless channel:
/// `β log(β/γ) + (1 − β) log((1 − β)/(1 − γ))`.
///
/// Extends continuously to `β ∈ {0, 1}`; returns NaN outside `[0, 1]` or
/// for `γ ∉ (0, 1)`.
pub fn rate_function_memoryless(gamma: f64, beta: f64) -> f64 {
    if !(gamma > 0.0 && gamma < 1.0 && (0.0..=1.0).contains(&beta)) {
        return f64::NAN;
    }
    xlogy_ratio(beta, gamma) + xlogy_ratio(1.0 - beta, 1.0 - gamma)
}

/// `x log(x / y)` with `0 log 0 = 0`.
fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * log(x / y)
    }
}
