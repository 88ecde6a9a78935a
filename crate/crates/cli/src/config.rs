//! Run configuration: a versioned JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use oilsignal_core::{ModelKind, ModelSettings, StrategyKind};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_ENV: &str = "OILSIGNAL_OUT";
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// CSV file path or http(s) URL.
    pub source: Option<String>,
    /// A model name, a comma-separated list, or `all`.
    pub model: String,
    pub split: f64,
    pub strategies: Vec<StrategyKind>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub models: ModelSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            source: None,
            model: "all".into(),
            split: 0.8,
            strategies: StrategyKind::ALL.to_vec(),
            seed: 0,
            out: None,
            k: 5,
            models: ModelSettings::default(),
        }
    }
}

/// Flag values; `None` leaves the config file value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub source: Option<String>,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub split: Option<f64>,
    pub k: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!("config schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version);
        }
        Ok(cfg)
    }

    /// Config file (if any) with flags applied on top, then validated.
    pub fn resolve(path: Option<&Path>, flags: Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = flags.source {
            cfg.source = Some(v);
        }
        if let Some(v) = flags.model {
            cfg.model = v;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.out {
            cfg.out = Some(v);
        }
        if let Some(v) = flags.split {
            cfg.split = v;
        }
        if let Some(v) = flags.k {
            cfg.k = v;
        }
        if cfg.out.is_none() {
            cfg.out = Some(std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_OUT.into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            bail!("split {} must lie strictly between 0 and 1", self.split);
        }
        if self.k < 2 {
            bail!("k = {} folds; need at least 2", self.k);
        }
        if self.strategies.is_empty() {
            bail!("at least one strategy kind is required");
        }
        self.selected_models()?;
        Ok(())
    }

    /// Selected models in canonical order, without duplicates.
    pub fn selected_models(&self) -> Result<Vec<ModelKind>> {
        let mut picked = Vec::new();
        for name in self.model.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if name == "all" {
                picked.extend(ModelKind::ALL);
            } else {
                picked.push(name.parse::<ModelKind>().map_err(|e| anyhow::anyhow!("{e}"))?);
            }
        }
        if picked.is_empty() {
            bail!("no model selected");
        }
        picked.sort();
        picked.dedup();
        Ok(picked)
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new(DEFAULT_OUT))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"schema_version": 1, "model": "rf", "seed": 3, "split": 0.7, "out": "a"}"#).unwrap();
        let cfg = RunConfig::resolve(Some(&path), Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.split, 0.7);
        assert_eq!(cfg.selected_models().unwrap(), vec![ModelKind::Rf]);
        assert_eq!(cfg.out_dir(), Path::new("a"));
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"schema_version": 2}"#).unwrap();
        assert!(RunConfig::resolve(Some(&path), Overrides::default()).is_err());
        std::fs::write(&path, r#"{"schema_version": 1, "colour": "red"}"#).unwrap();
        assert!(RunConfig::resolve(Some(&path), Overrides::default()).is_err());
        let bad_model = Overrides { model: Some("garch".into()), ..Default::default() };
        assert!(RunConfig::resolve(None, bad_model).is_err());
        let bad_split = Overrides { split: Some(1.0), ..Default::default() };
        assert!(RunConfig::resolve(None, bad_split).is_err());
    }

    #[test]
    fn model_lists() {
        let cfg = RunConfig { model: "knn, rf,knn".into(), ..RunConfig::default() };
        assert_eq!(cfg.selected_models().unwrap(), vec![ModelKind::Rf, ModelKind::Knn]);
        let all = RunConfig::default().selected_models().unwrap();
        assert_eq!(all, ModelKind::ALL.to_vec());
    }
}
