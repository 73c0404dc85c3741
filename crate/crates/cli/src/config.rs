use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use ppgen::analysis::{CheckKind, ComboFilter};
use ppgen::domain::EstimatorKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// Contents of a `--config` file. Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scale: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
    pub combos: Option<Vec<String>>,
    pub estimators: Option<Vec<String>>,
    pub degrees: Option<Vec<usize>>,
    pub checks: Option<Vec<String>>,
    pub max_failure_rate: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields of `other` replace those of `self` where present.
    pub fn overlay(self, other: RunConfig) -> RunConfig {
        RunConfig {
            scale: other.scale.or(self.scale),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
            workers: other.workers.or(self.workers),
            combos: other.combos.or(self.combos),
            estimators: other.estimators.or(self.estimators),
            degrees: other.degrees.or(self.degrees),
            checks: other.checks.or(self.checks),
            max_failure_rate: other.max_failure_rate.or(self.max_failure_rate),
        }
    }
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scale: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub workers: usize,
    pub combos: Vec<ComboFilter>,
    pub estimators: Option<Vec<EstimatorKind>>,
    pub degrees: Option<Vec<usize>>,
    pub checks: Option<Vec<CheckKind>>,
    pub max_failure_rate: f64,
}

pub const DEFAULT_MAX_FAILURE_RATE: f64 = 0.01;

impl Settings {
    /// `env_seed` is consulted only when neither flags nor file set a seed.
    pub fn resolve(cfg: RunConfig, env_seed: Option<&str>) -> Result<Self> {
        let scale = cfg.scale.unwrap_or(1.0);
        if !(scale > 0.0 && scale <= 1.0) {
            bail!("--scale must lie in (0, 1], got {scale}");
        }
        let seed = match (cfg.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(e)) => e.trim().parse().with_context(|| format!("PPGEN_SEED={e} is not an integer"))?,
            (None, None) => 0,
        };
        let max_failure_rate = cfg.max_failure_rate.unwrap_or(DEFAULT_MAX_FAILURE_RATE);
        if !(0.0..=1.0).contains(&max_failure_rate) {
            bail!("--max-failure-rate must lie in [0, 1]");
        }
        let workers = cfg
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1);
        let combos = cfg
            .combos
            .unwrap_or_default()
            .iter()
            .map(|s| s.parse::<ComboFilter>())
            .collect::<Result<Vec<_>, _>>()?;
        let estimators = cfg
            .estimators
            .map(|v| v.iter().map(|s| s.parse::<EstimatorKind>()).collect::<Result<Vec<_>, _>>())
            .transpose()?;
        let checks = cfg
            .checks
            .map(|v| v.iter().map(|s| s.parse::<CheckKind>()).collect::<Result<Vec<_>, _>>())
            .transpose()?;
        if let Some(d) = &cfg.degrees {
            if d.is_empty() {
                bail!("--degrees needs at least one value");
            }
        }
        Ok(Settings {
            scale,
            seed,
            out: cfg.out.unwrap_or_else(|| PathBuf::from(".")),
            format: cfg.format.unwrap_or(Format::Csv),
            workers,
            combos,
            estimators,
            degrees: cfg.degrees,
            checks,
            max_failure_rate,
        })
    }

    /// `ceil(full * scale)`, never below one.
    pub fn scaled(&self, full: usize) -> usize {
        ((full as f64 * self.scale).ceil() as usize).max(1)
    }
}

/// Splits `a,b,c` and drops blanks.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_env_is_last_resort() {
        let file = RunConfig { scale: Some(0.5), seed: Some(3), workers: Some(2), ..RunConfig::default() };
        let flags = RunConfig { scale: Some(0.1), ..RunConfig::default() };
        let s = Settings::resolve(file.clone().overlay(flags), Some("99")).unwrap();
        assert_eq!((s.scale, s.seed, s.workers), (0.1, 3, 2));
        let s = Settings::resolve(RunConfig::default(), Some("99")).unwrap();
        assert_eq!(s.seed, 99);
        assert_eq!(Settings::resolve(RunConfig::default(), None).unwrap().seed, 0);
        assert!(Settings::resolve(RunConfig::default(), Some("x")).is_err());
    }

    #[test]
    fn scale_rounds_up_and_is_bounded() {
        let s = Settings::resolve(RunConfig { scale: Some(0.05), ..RunConfig::default() }, None).unwrap();
        assert_eq!(s.scaled(100), 5);
        assert_eq!(s.scaled(1), 1);
        let s = Settings::resolve(RunConfig { scale: Some(0.001), ..RunConfig::default() }, None).unwrap();
        assert_eq!(s.scaled(100), 1);
        for bad in [0.0, -1.0, 1.5] {
            assert!(Settings::resolve(RunConfig { scale: Some(bad), ..RunConfig::default() }, None).is_err());
        }
    }

    #[test]
    fn lists_are_parsed() {
        let cfg = RunConfig {
            estimators: Some(vec!["om".into(), "dr_abc".into()]),
            combos: Some(vec!["n1=200,conf=weak".into()]),
            checks: Some(vec!["prop1".into()]),
            ..RunConfig::default()
        };
        let s = Settings::resolve(cfg, None).unwrap();
        assert_eq!(s.estimators.unwrap(), vec![EstimatorKind::Om, EstimatorKind::DrAbc]);
        assert_eq!(s.combos.len(), 1);
        assert_eq!(s.checks.unwrap(), vec![CheckKind::Prop1]);
        assert_eq!(split_list(" 1, 3 ,,5"), vec!["1", "3", "5"]);
        let bad = RunConfig { estimators: Some(vec!["xyz".into()]), ..RunConfig::default() };
        assert!(Settings::resolve(bad, None).is_err());
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"scale": 0.5, "sede": 1}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"format": "both", "degrees": [1, 3]}"#).unwrap();
        assert_eq!(c.format, Some(Format::Both));
    }
}
