//! One-shot analytical queries on a channel.

use anyhow::{bail, Context, Result};
use rbcast_core::bounds::{finite_lower_bound_with, k_zero, BoundOptions};
use rbcast_core::{asymptotic_throughput, rate_function, BlockRatio};
use serde::Serialize;

use crate::config::ChannelSpec;

#[derive(Clone, Debug, Default)]
pub struct Query {
    pub rate_fn: Vec<f64>,
    pub asymptotic: Vec<BlockRatio>,
    pub k0: bool,
    pub bound: Vec<(u64, u64)>,
    pub bound_options: BoundOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFnValue {
    pub beta: f64,
    pub value: f64,
    pub theta_star: f64,
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticValue {
    /// `null` for an unbounded ratio.
    pub c: Option<f64>,
    pub beta: f64,
    pub attained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub n: u64,
    pub k: u64,
    pub k0: u64,
    pub ratio: f64,
    pub our_bound: f64,
    pub asymptotic_ref: f64,
    pub cse1: Option<f64>,
    pub cse2: Option<f64>,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub channel: String,
    pub order: u32,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rate_fn: Vec<RateFnValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub asymptotic: Vec<AsymptoticValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k0: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bound: Vec<BoundValue>,
}

/// Parses `inf`/`infinity` or a non-negative number.
pub fn parse_ratio(text: &str) -> Result<BlockRatio> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(BlockRatio::Unbounded),
        other => {
            let c: f64 = other.parse().with_context(|| format!("bad ratio `{text}`"))?;
            if c.is_nan() || c < 0.0 {
                bail!("ratio must be non-negative, got {text}");
            }
            Ok(BlockRatio::Finite(c))
        }
    }
}

/// Parses `N,K`.
pub fn parse_point(text: &str) -> Result<(u64, u64)> {
    let (n, k) = text.split_once(',').with_context(|| format!("expected N,K, got `{text}`"))?;
    Ok((n.trim().parse().context("bad N")?, k.trim().parse().context("bad K")?))
}

pub fn analyze(spec: &ChannelSpec, query: &Query) -> Result<Report> {
    let model = spec.model()?;
    let ge = spec.gilbert_elliott()?;
    let two_state = || {
        ge.with_context(|| {
            format!("{spec} has memory longer than one slot; K0 and the finite bound need a two-state channel")
        })
    };

    let rate_fn = query
        .rate_fn
        .iter()
        .map(|&beta| {
            let r = rate_function(&model, beta)?;
            Ok(RateFnValue { beta, value: r.value, theta_star: r.theta_star, capped: r.capped })
        })
        .collect::<Result<_>>()?;
    let asymptotic = query
        .asymptotic
        .iter()
        .map(|&ratio| {
            let r = asymptotic_throughput(&model, ratio)?;
            let c = match ratio {
                BlockRatio::Finite(c) if c.is_finite() => Some(c),
                _ => None,
            };
            Ok(AsymptoticValue { c, beta: r.beta, attained: r.attained })
        })
        .collect::<Result<_>>()?;
    let k0 = if query.k0 {
        let ge = two_state()?;
        Some(k_zero(ge.p01(), ge.p10())?)
    } else {
        None
    };
    let bound = query
        .bound
        .iter()
        .map(|&(n, k)| {
            let r = finite_lower_bound_with(&two_state()?, n, k, &query.bound_options)?;
            Ok(BoundValue {
                n,
                k,
                k0: r.k_zero,
                ratio: r.ratio,
                our_bound: r.our_bound,
                asymptotic_ref: r.asymptotic_ref,
                cse1: r.cse1,
                cse2: r.cse2,
                degenerate: r.degenerate,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Report { channel: spec.to_string(), order: model.order(), gamma: model.gamma(), rate_fn, asymptotic, k0, bound })
}

/// Aligned plain-text table.
pub fn render_table(report: &Report) -> String {
    let mut rows: Vec<[String; 3]> = vec![
        ["channel".into(), String::new(), report.channel.clone()],
        ["gamma".into(), String::new(), report.gamma.to_string()],
    ];
    for r in &report.rate_fn {
        let note = if r.capped { " (boundary)" } else { "" };
        rows.push(["rate_fn".into(), format!("beta={}", r.beta), format!("{}{note}", r.value)]);
    }
    for a in &report.asymptotic {
        let input = a.c.map_or("c=inf".to_string(), |c| format!("c={c}"));
        let note = if a.attained { "" } else { " (supremum)" };
        rows.push(["asymptotic".into(), input, format!("{}{note}", a.beta)]);
    }
    if let Some(k0) = report.k0 {
        rows.push(["k0".into(), String::new(), k0.to_string()]);
    }
    let absent = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
    for b in &report.bound {
        let input = format!("n={},k={}", b.n, b.k);
        rows.push(["bound".into(), input.clone(), b.our_bound.to_string()]);
        rows.push(["cse1".into(), input.clone(), absent(b.cse1)]);
        rows.push(["cse2".into(), input, absent(b.cse2)]);
    }
    let w0 = rows.iter().map(|r| r[0].len()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r[1].len()).max().unwrap_or(0);
    rows.iter().map(|[a, b, c]| format!("{a:<w0$}  {b:<w1$}  {c}\n")).collect()
}
