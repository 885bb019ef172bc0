//! Built-in experiment presets.

use std::f64::consts::LN_2;

use anyhow::{bail, Result};

use crate::config::{ChannelSpec, ExperimentConfig, Outputs, Schedule, Toggles, DEFAULT_BLOCKS};

pub const PRESET_NAMES: [&str; 5] = ["example1", "example2", "example3a", "example3b", "example3c"];

fn range(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).step_by(5).collect()
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let half = ChannelSpec::Memoryless { gamma: 0.5 };
    let (channel, schedule) = match name {
        "example1" => (half, Schedule::Ratio { ratio_c: 15.0 / LN_2, k_list: range(5, 300) }),
        "example2" => (
            ChannelSpec::GilbertElliott { p01: 0.4, p10: 0.4 },
            Schedule::Ratio { ratio_c: 5.0 / LN_2, k_list: range(5, 100) },
        ),
        "example3a" => (half, Schedule::Points(range(5, 300).into_iter().map(|n| (n, n)).collect())),
        "example3b" => (half, Schedule::Points(range(5, 300).into_iter().map(|k| (10, k)).collect())),
        "example3c" => (half, Schedule::Points(range(5, 100).into_iter().map(|n| (n, 80)).collect())),
        _ => bail!("unknown preset `{name}` (known: {})", PRESET_NAMES.join(", ")),
    };
    Ok(ExperimentConfig {
        name: Some(name.to_string()),
        channel,
        schedule,
        blocks: DEFAULT_BLOCKS,
        seed: 0,
        engine: Default::default(),
        outputs: Outputs::default(),
        toggles: Toggles::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let p = preset("example1").unwrap();
        let points = p.schedule.resolve().unwrap();
        assert_eq!(points.first(), Some(&(2, 5)));
        assert_eq!(points.last(), Some(&(1 << 20, 300)));
        assert_eq!(points.len(), 60);
        match p.schedule {
            Schedule::Ratio { ratio_c, .. } => assert!((ratio_c - 21.64).abs() < 0.01),
            _ => unreachable!(),
        }
        let p = preset("example2").unwrap();
        assert_eq!(p.channel, ChannelSpec::GilbertElliott { p01: 0.4, p10: 0.4 });
        assert_eq!(p.schedule.resolve().unwrap().last(), Some(&(1 << 20, 100)));
        let c = preset("example3c").unwrap().schedule.resolve().unwrap();
        assert!(c.iter().all(|&(_, k)| k == 80));
        assert_eq!((c[0].0, c[c.len() - 1].0), (5, 100));
        let a = preset("example3a").unwrap().schedule.resolve().unwrap();
        assert!(a.iter().all(|&(n, k)| n == k) && a.len() == 60);
        let b = preset("example3b").unwrap().schedule.resolve().unwrap();
        assert!(b.iter().all(|&(n, _)| n == 10) && b.last() == Some(&(10, 300)));
        assert!(preset("example4").is_err());
    }

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
    }
}
