//! Experiment configuration: JSON schema, channel shorthands and schedules.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};
use rbcast_core::bounds::BoundOptions;
use rbcast_core::simulator::{Engine, MIN_BLOCKS};
use rbcast_core::{ChannelModel, Cse1Numerator, GilbertElliott};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BLOCKS: u64 = 20_000;

/// Channel description as it appears in configs and on the command line.
///
/// Shorthands: `mem:G`, `ge:P01,P10`, `hist:L:P0,P1,...` (success
/// probability after each of the `2^L` histories, newest bit lowest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Memoryless {
        gamma: f64,
    },
    GilbertElliott {
        p01: f64,
        p10: f64,
    },
    /// Dense `2^order × 2^order` transition matrix over histories.
    Matrix {
        order: u32,
        rows: Vec<Vec<f64>>,
    },
    History {
        order: u32,
        success: Vec<f64>,
    },
}

impl ChannelSpec {
    pub fn model(&self) -> Result<ChannelModel> {
        let model = match self {
            ChannelSpec::Memoryless { gamma } => ChannelModel::memoryless(*gamma),
            ChannelSpec::GilbertElliott { p01, p10 } => ChannelModel::gilbert_elliott(*p01, *p10),
            ChannelSpec::Matrix { order, rows } => ChannelModel::from_transition(*order, rows),
            ChannelSpec::History { order, success } => {
                ChannelModel::from_success_probabilities(*order, success.clone())
            }
        };
        model.map_err(|e| anyhow!("invalid channel {self}: {e}"))
    }

    /// Two-state view used by the finite bounds; `None` for longer memory.
    pub fn gilbert_elliott(&self) -> Result<Option<GilbertElliott>> {
        let model = self.model()?;
        Ok(GilbertElliott::try_from(&model).ok())
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSpec::Memoryless { gamma } => write!(f, "mem:{gamma}"),
            ChannelSpec::GilbertElliott { p01, p10 } => write!(f, "ge:{p01},{p10}"),
            ChannelSpec::Matrix { order, .. } => write!(f, "matrix:{order}"),
            ChannelSpec::History { order, success } => {
                let list: Vec<String> = success.iter().map(f64::to_string).collect();
                write!(f, "hist:{order}:{}", list.join(","))
            }
        }
    }
}

impl FromStr for ChannelSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| anyhow!("channel `{s}`: expected KIND:PARAMS"))?;
        let numbers = |text: &str| -> Result<Vec<f64>> {
            text.split(',')
                .map(|x| x.trim().parse::<f64>().with_context(|| format!("channel `{s}`: bad number `{x}`")))
                .collect()
        };
        let spec = match kind {
            "mem" | "memoryless" => match numbers(rest)?[..] {
                [gamma] => ChannelSpec::Memoryless { gamma },
                _ => bail!("channel `{s}`: expected mem:GAMMA"),
            },
            "ge" | "gilbert_elliott" => match numbers(rest)?[..] {
                [p01, p10] => ChannelSpec::GilbertElliott { p01, p10 },
                _ => bail!("channel `{s}`: expected ge:P01,P10"),
            },
            "hist" | "history" => {
                let (order, list) =
                    rest.split_once(':').ok_or_else(|| anyhow!("channel `{s}`: expected hist:ORDER:P0,P1,..."))?;
                let order = order.parse().with_context(|| format!("channel `{s}`: bad order"))?;
                ChannelSpec::History { order, success: numbers(list)? }
            }
            _ => bail!("channel `{s}`: unknown kind `{kind}` (use mem, ge or hist)"),
        };
        spec.model()?;
        Ok(spec)
    }
}

/// Schedule of `(n, k)` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    /// Explicit `[[n, k], ...]`.
    Points(Vec<(u64, u64)>),
    /// `n = max(2, round(e^{k/c}))` for each `k`.
    Ratio { ratio_c: f64, k_list: Vec<u64> },
}

impl Schedule {
    pub fn resolve(&self) -> Result<Vec<(u64, u64)>> {
        let points: Vec<(u64, u64)> = match self {
            Schedule::Points(points) => points.clone(),
            Schedule::Ratio { ratio_c, k_list } => {
                ensure!(*ratio_c > 0.0 && ratio_c.is_finite(), "schedule ratio_c must be positive, got {ratio_c}");
                k_list
                    .iter()
                    .map(|&k| {
                        let n = (k as f64 / ratio_c).exp().round();
                        ensure!(n < 2f64.powi(63), "schedule: n = e^({k}/{ratio_c}) overflows");
                        Ok(((n as u64).max(2), k))
                    })
                    .collect::<Result<_>>()?
            }
        };
        ensure!(!points.is_empty(), "schedule is empty");
        for &(n, k) in &points {
            ensure!(n >= 1 && k >= 1, "schedule point (n={n}, k={k}): n and k must be at least 1");
        }
        Ok(points)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Cse1Choice {
    #[default]
    OneMinusGamma,
    Gamma,
}

impl From<Cse1Choice> for Cse1Numerator {
    fn from(c: Cse1Choice) -> Self {
        match c {
            Cse1Choice::OneMinusGamma => Cse1Numerator::OneMinusGamma,
            Cse1Choice::Gamma => Cse1Numerator::Gamma,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub bounds: bool,
    pub simulate: bool,
    pub cse: bool,
    pub cse1_numerator: Cse1Choice,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles { bounds: true, simulate: true, cse: true, cse1_numerator: Cse1Choice::default() }
    }
}

impl Toggles {
    pub fn bound_options(&self) -> BoundOptions {
        BoundOptions { cse1_numerator: self.cse1_numerator.into() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    #[default]
    Auto,
    PerReceiver,
    Aggregated,
}

impl From<EngineChoice> for Engine {
    fn from(e: EngineChoice) -> Self {
        match e {
            EngineChoice::Auto => Engine::Auto,
            EngineChoice::PerReceiver => Engine::PerReceiver,
            EngineChoice::Aggregated => Engine::Aggregated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub channel: ChannelSpec,
    pub schedule: Schedule,
    /// Renewal blocks per schedule point.
    #[serde(default = "default_blocks")]
    pub blocks: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineChoice,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub toggles: Toggles,
}

fn default_blocks() -> u64 {
    DEFAULT_BLOCKS
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).context("parsing experiment config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.model()?;
        self.schedule.resolve()?;
        if self.toggles.simulate {
            ensure!(self.blocks >= MIN_BLOCKS, "blocks must be at least {MIN_BLOCKS}, got {}", self.blocks);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthands() {
        assert_eq!("mem:0.5".parse::<ChannelSpec>().unwrap(), ChannelSpec::Memoryless { gamma: 0.5 });
        assert_eq!("ge:0.4,0.4".parse::<ChannelSpec>().unwrap(), ChannelSpec::GilbertElliott { p01: 0.4, p10: 0.4 });
        let h: ChannelSpec = "hist:2:0.1,0.5,0.5,0.9".parse().unwrap();
        assert_eq!(h.to_string(), "hist:2:0.1,0.5,0.5,0.9");
        assert!("mem:1.5".parse::<ChannelSpec>().is_err());
        assert!("ge:0.4".parse::<ChannelSpec>().is_err());
        assert!("foo:1".parse::<ChannelSpec>().is_err());
        assert!("hist:2:0.5".parse::<ChannelSpec>().is_err());
    }

    #[test]
    fn json_channel_kinds() {
        let m: ChannelSpec =
            serde_json::from_str(r#"{"kind":"matrix","order":1,"rows":[[0.6,0.4],[0.4,0.6]]}"#).unwrap();
        assert!((m.model().unwrap().gamma() - 0.5).abs() < 1e-12);
        let g: ChannelSpec = serde_json::from_str(r#"{"kind":"gilbert_elliott","p01":0.4,"p10":0.4}"#).unwrap();
        assert_eq!(g.gilbert_elliott().unwrap(), Some(GilbertElliott::new(0.4, 0.4).unwrap()));
        let h = ChannelSpec::History { order: 2, success: vec![0.1, 0.5, 0.5, 0.9] };
        assert_eq!(h.gilbert_elliott().unwrap(), None);
    }

    #[test]
    fn ratio_schedule_rounds_and_clamps() {
        let s = Schedule::Ratio { ratio_c: 15.0 / std::f64::consts::LN_2, k_list: vec![5, 15, 30, 300] };
        assert_eq!(s.resolve().unwrap(), [(2, 5), (2, 15), (4, 30), (1 << 20, 300)]);
        let parsed: Schedule = serde_json::from_str(r#"{"ratio_c": 10.0, "k_list": [10]}"#).unwrap();
        assert_eq!(parsed.resolve().unwrap(), [(3, 10)]);
        let pairs: Schedule = serde_json::from_str("[[1, 2], [3, 4]]").unwrap();
        assert_eq!(pairs.resolve().unwrap(), [(1, 2), (3, 4)]);
        assert!(Schedule::Points(vec![]).resolve().is_err());
        assert!(Schedule::Points(vec![(0, 3)]).resolve().is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let c =
            ExperimentConfig::from_json(r#"{"channel":{"kind":"memoryless","gamma":0.5},"schedule":[[2,5]]}"#).unwrap();
        assert_eq!(c.blocks, DEFAULT_BLOCKS);
        assert_eq!(c.toggles, Toggles::default());
        assert!(ExperimentConfig::from_json(r#"{"channel":{"kind":"memoryless","gamma":0.5},"schedule":[]}"#).is_err());
        let few = r#"{"channel":{"kind":"memoryless","gamma":0.5},"schedule":[[2,5]],"blocks":10}"#;
        assert!(ExperimentConfig::from_json(few).is_err());
        let typo = r#"{"channel":{"kind":"memoryless","gamma":0.5},"schedule":[[2,5]],"blokcs":1000}"#;
        assert!(ExperimentConfig::from_json(typo).is_err());
    }
}
