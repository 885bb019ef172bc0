//! Quick oracle and property checks runnable from an installed binary.

use std::time::Instant;

use anyhow::{ensure, Result};
use rbcast_core::oracle::exact_expected_completion_memoryless;
use rbcast_core::simulator::{estimate_expected_completion, estimate_throughput, InitPolicy, RandomStream};
use rbcast_core::spectral::tilted;
use rbcast_core::{
    asymptotic_throughput, finite_lower_bound, k_zero, memoryless_asymptotic, rate_function, rate_function_memoryless,
    BlockRatio, ChannelModel, GilbertElliott,
};

pub struct CheckResult {
    pub name: &'static str,
    pub outcome: Result<String>,
    pub millis: u128,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn line(&self) -> String {
        match &self.outcome {
            Ok(detail) => format!("PASS  {:<28} {detail} [{} ms]", self.name, self.millis),
            Err(e) => format!("FAIL  {:<28} {e:#} [{} ms]", self.name, self.millis),
        }
    }
}

type Check = (&'static str, fn(u64) -> Result<String>);

const CHECKS: [Check; 7] = [
    ("exact oracle", oracle),
    ("perron root at zero tilt", perron_at_zero),
    ("memoryless rate function", memoryless_rate_function),
    ("asymptotic solver", solver),
    ("memory penalty", memory_penalty),
    ("monte carlo vs oracle", monte_carlo),
    ("throughput above bound", throughput_bound),
];

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let start = Instant::now();
            let outcome = check(seed);
            CheckResult { name, outcome, millis: start.elapsed().as_millis() }
        })
        .collect()
}

fn oracle(_: u64) -> Result<String> {
    let v = exact_expected_completion_memoryless(0.5, 2, 1, 1e-12)?;
    ensure!((v - 8.0 / 3.0).abs() < 1e-9, "E[T(2,1)] = {v}, expected 8/3");
    let w = exact_expected_completion_memoryless(0.25, 1, 7, 1e-14)?;
    ensure!((w - 28.0).abs() < 1e-8, "E[T(1,7)] = {w}, expected 28");
    Ok("E[T(2,1)] = 8/3".into())
}

fn perron_at_zero(seed: u64) -> Result<String> {
    let mut stream = RandomStream::new(seed, 0, 0);
    let mut worst = 0.0f64;
    for i in 0..60 {
        let order = 1 + i % 3;
        let p: Vec<f64> = (0..1 << order).map(|_| 0.05 + 0.9 * stream.uniform()).collect();
        let model = ChannelModel::from_success_probabilities(order, p)?;
        worst = worst.max((tilted(&model, 0.0)?.perron_root()? - 1.0).abs());
    }
    ensure!(worst < 1e-10, "max |rho - 1| = {worst:e}");
    Ok(format!("max |rho - 1| = {worst:.1e}"))
}

fn memoryless_rate_function(_: u64) -> Result<String> {
    let model = ChannelModel::memoryless(0.5)?;
    let mut worst = 0.0f64;
    for i in 1..20 {
        let beta = i as f64 / 20.0;
        worst = worst.max((rate_function(&model, beta)?.value - rate_function_memoryless(0.5, beta)).abs());
    }
    ensure!(worst < 1e-8, "max error {worst:e}");
    Ok(format!("max error {worst:.1e}"))
}

fn solver(_: u64) -> Result<String> {
    let model = ChannelModel::gilbert_elliott(0.4, 0.4)?;
    let c = 5.0 / std::f64::consts::LN_2;
    let r = asymptotic_throughput(&model, BlockRatio::Finite(c))?;
    let residual = (c * rate_function(&model, r.beta)?.value - r.beta).abs();
    ensure!(residual < 1e-8, "residual {residual:e}");
    let mem = ChannelModel::memoryless(0.5)?;
    let a = asymptotic_throughput(&mem, BlockRatio::Finite(c))?.beta;
    ensure!((a - memoryless_asymptotic(0.5, c)).abs() < 1e-9, "memoryless paths disagree");
    Ok(format!("R(5/ln 2) = {:.6} on ge:0.4,0.4", r.beta))
}

fn memory_penalty(_: u64) -> Result<String> {
    ensure!(k_zero(0.4, 0.4)? == 1, "K0(0.4, 0.4) != 1");
    ensure!(k_zero(0.3, 0.7)? == 0, "K0(0.3, 0.7) != 0");
    Ok("K0(0.4, 0.4) = 1".into())
}

fn monte_carlo(seed: u64) -> Result<String> {
    let model = ChannelModel::memoryless(0.5)?;
    let exact = exact_expected_completion_memoryless(0.5, 5, 10, 1e-12)?;
    let s = estimate_expected_completion(&model, 5, 10, &InitPolicy::Stationary, 20_000, seed)?;
    let z = (s.mean - exact) / s.std_error;
    ensure!(z.abs() <= 3.0, "mean {} vs exact {exact} ({z:.2} SE)", s.mean);
    Ok(format!("n=5 k=10: {z:+.2} SE"))
}

fn throughput_bound(seed: u64) -> Result<String> {
    let ge = GilbertElliott::new(0.4, 0.4)?;
    let bound = finite_lower_bound(&ge, 2, 5)?.our_bound;
    let eta = estimate_throughput(&ge.model()?, 2, 5, 20_000, seed)?;
    ensure!(eta.eta_hat > bound, "eta_hat {} <= bound {bound}", eta.eta_hat);
    Ok(format!("eta_hat {:.4} > bound {bound:.4}", eta.eta_hat))
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for r in super::run_all(1) {
            assert!(r.passed(), "{}", r.line());
        }
    }
}
