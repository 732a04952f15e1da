//! Pipeline configuration: a flat TOML file overridden by command-line flags.

use std::path::{Path, PathBuf};

use interaction_primitives::clustering::Method;
use interaction_primitives::evaluation::{MethodParams, SweepParam};
use interaction_primitives::segmentation::default_epsilons;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Every tunable of the pipeline. Paths and the worker count are kept out of
/// [`PipelineConfig::hash`] since they do not affect results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub workers: Option<usize>,

    pub seed: u64,
    pub grid_len: usize,
    pub normalize: bool,
    pub method: String,
    pub k: usize,
    pub beta: usize,
    pub max_iter: usize,
    pub anchor: usize,
    pub restarts: usize,
    pub use_medoid: bool,
    pub epsilons: Vec<f64>,
    pub r: f64,
    pub sweep_axis1: String,
    pub sweep_values1: Vec<usize>,
    pub sweep_axis2: String,
    pub sweep_values2: Vec<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            workers: None,
            seed: 0,
            grid_len: 101,
            normalize: false,
            method: "mds".into(),
            k: 3,
            beta: 3,
            max_iter: 300,
            anchor: 0,
            restarts: 10,
            use_medoid: true,
            epsilons: default_epsilons(),
            r: 2.0,
            sweep_axis1: "k".into(),
            sweep_values1: vec![2, 3, 4, 5, 6],
            sweep_axis2: "beta".into(),
            sweep_values2: vec![2, 3, 4],
        }
    }
}

/// The result-affecting part of the configuration.
#[derive(Serialize)]
struct Canonical<'a> {
    seed: u64,
    grid_len: usize,
    normalize: bool,
    method: &'a str,
    k: usize,
    beta: usize,
    max_iter: usize,
    anchor: usize,
    restarts: usize,
    use_medoid: bool,
    epsilons: &'a [f64],
    r: f64,
    sweep_axis1: &'a str,
    sweep_values1: &'a [usize],
    sweep_axis2: &'a str,
    sweep_values2: &'a [usize],
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.grid_len < 2 {
            return bad(format!("grid_len must be at least 2, got {}", self.grid_len));
        }
        self.method()?;
        for (name, v) in [("k", self.k), ("beta", self.beta), ("max_iter", self.max_iter), ("restarts", self.restarts)] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("epsilons must be a nonempty list of positive numbers".into());
        }
        if !(self.r.is_finite() && self.r >= 1.0) {
            return bad(format!("r must be at least 1, got {}", self.r));
        }
        let (a1, a2) = self.sweep_axes()?;
        if a1 == a2 {
            return bad("sweep axes must differ".into());
        }
        if self.sweep_values1.is_empty() || self.sweep_values2.is_empty() {
            return bad("sweep value lists must be nonempty".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    pub fn method(&self) -> Result<Method, CliError> {
        self.method.parse().map_err(|_| {
            CliError::Config(format!(
                "unknown method `{}` (expected mds, geo1, geo2 or spline-coef)",
                self.method
            ))
        })
    }

    pub fn sweep_axes(&self) -> Result<(SweepParam, SweepParam), CliError> {
        let parse = |s: &str| s.parse::<SweepParam>().map_err(|e| CliError::Config(e.to_string()));
        Ok((parse(&self.sweep_axis1)?, parse(&self.sweep_axis2)?))
    }

    pub fn method_params(&self) -> Result<MethodParams, CliError> {
        Ok(MethodParams {
            method: self.method()?,
            k: self.k,
            beta: self.beta,
            max_iter: self.max_iter,
            anchor: self.anchor,
            restarts: self.restarts,
            seed: self.seed,
        })
    }

    fn canonical(&self) -> Canonical<'_> {
        Canonical {
            seed: self.seed,
            grid_len: self.grid_len,
            normalize: self.normalize,
            method: &self.method,
            k: self.k,
            beta: self.beta,
            max_iter: self.max_iter,
            anchor: self.anchor,
            restarts: self.restarts,
            use_medoid: self.use_medoid,
            epsilons: &self.epsilons,
            r: self.r,
            sweep_axis1: &self.sweep_axis1,
            sweep_values1: &self.sweep_values1,
            sweep_axis2: &self.sweep_axis2,
            sweep_values2: &self.sweep_values2,
        }
    }

    /// Result-affecting settings as a JSON value.
    pub fn settings(&self) -> serde_json::Value {
        serde_json::to_value(self.canonical()).expect("configuration serializes")
    }

    /// SHA-256 of the canonical JSON of the result-affecting settings.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.canonical()).expect("configuration serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("k = 4\nbogus = 1\n").is_err());
        let cfg: PipelineConfig = toml::from_str("k = 4\nmethod = \"geo2\"\n").unwrap();
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.beta, 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = PipelineConfig {
            method: "nope".into(),
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.method = "spline-coef".into();
        cfg.r = 0.5;
        assert!(cfg.validate().is_err());
        cfg.r = 1.0;
        cfg.sweep_axis2 = "k".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_paths_and_workers() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            output_dir: "elsewhere".into(),
            workers: Some(3),
            ..PipelineConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = PipelineConfig {
            seed: 1,
            ..PipelineConfig::default()
        };
        assert_ne!(a.hash(), c.hash());
    }
}
