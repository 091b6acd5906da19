//! Experiment configuration: TOML on disk, validated before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use fracblow_core::nonlinearity::NamedCustom;
use fracblow_core::{BallDomain, BoundaryMeasure, FracOrder, GradedGrid, Nonlinearity};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// The absorption term as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    Power { p: f64 },
    Zero,
    Custom { name: NamedCustom },
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Nonlinearity, ConfigError> {
        match self {
            Self::Power { p } => Nonlinearity::power(*p).map_err(|e| ConfigError::Invalid(e.to_string())),
            Self::Zero => Ok(Nonlinearity::Zero),
            Self::Custom { name } => Ok(name.build()),
        }
    }

    /// Exponent used by the regime classifier.
    pub fn exponent(&self) -> f64 {
        match self {
            Self::Power { p } => *p,
            Self::Zero => 0.0,
            Self::Custom { name } => name.build().growth(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub rho_min: f64,
    pub ratio: f64,
    pub n_theta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rho_min: GradedGrid::DEFAULT_RHO_MIN,
            ratio: GradedGrid::DEFAULT_RATIO,
            n_theta: GradedGrid::DEFAULT_THETA,
        }
    }
}

/// Values of `k` for family runs: `start·factor^j` for `j < count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { start: 1.0, factor: 2.0, count: 11 }
    }
}

impl Schedule {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.start * self.factor.powi(j as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub solve: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { solve: 1e-6, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("fracblow-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub dim: usize,
    pub seed: u64,
    pub nonlinearity: NonlinearitySpec,
    pub measure: BoundaryMeasure,
    pub k: f64,
    pub schedule: Schedule,
    pub grid: GridConfig,
    pub tolerance: Tolerances,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            dim: 2,
            seed: fracblow_core::verify::DEFAULT_SEED,
            nonlinearity: NonlinearitySpec::Power { p: 2.5 },
            measure: BoundaryMeasure::Hausdorff,
            k: 1.0,
            schedule: Schedule::default(),
            grid: GridConfig::default(),
            tolerance: Tolerances::default(),
            output: OutputConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("every config field has a TOML representation")
    }

    /// SHA-256 of the canonical TOML form, hex encoded. The output
    /// directory is left out so that moving artifacts keeps their identity.
    pub fn hash(&self) -> String {
        let canonical = Self { output: OutputConfig::default(), ..self.clone() };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn order(&self) -> Result<FracOrder, ConfigError> {
        FracOrder::new(self.alpha).map_err(|e| invalid(e.to_string()))
    }

    pub fn domain(&self) -> Result<BallDomain, ConfigError> {
        BallDomain::new(self.dim).map_err(|e| invalid(e.to_string()))
    }

    pub fn build_grid(&self) -> Result<GradedGrid, ConfigError> {
        let g = &self.grid;
        GradedGrid::new(g.rho_min, g.ratio, g.n_theta).map_err(|e| invalid(format!("grid: {e}")))
    }

    /// Checks every precondition that does not require numerical work.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.order()?;
        let dom = self.domain()?;
        self.build_grid()?;
        self.measure.validate(&dom).map_err(|e| invalid(format!("measure: {e}")))?;
        let g = self.nonlinearity.build()?;
        g.validate().map_err(|e| invalid(format!("nonlinearity: {e}")))?;
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(invalid(format!("k = {} must be positive", self.k)));
        }
        let s = &self.schedule;
        if !(s.start > 0.0 && s.start.is_finite() && s.factor > 1.0 && s.factor.is_finite() && s.count >= 2) {
            return Err(invalid("schedule needs start > 0, factor > 1 and at least two members"));
        }
        let t = &self.tolerance;
        if !(t.solve > 0.0 && t.max_iterations > 0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn measures_and_custom_terms_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.measure = BoundaryMeasure::Sum {
            parts: vec![(1.0, BoundaryMeasure::Hausdorff), (0.5, BoundaryMeasure::dirac(&[0.0, 1.0]))],
        };
        cfg.nonlinearity = NonlinearitySpec::Custom { name: NamedCustom::SquareOverLog };
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_files_take_defaults() {
        let cfg = ExperimentConfig::from_toml("alpha = 0.3\n[nonlinearity]\nkind = \"zero\"\n").unwrap();
        assert_eq!(cfg.alpha, 0.3);
        assert_eq!(cfg.nonlinearity, NonlinearitySpec::Zero);
        assert_eq!(cfg.grid, GridConfig::default());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg = ExperimentConfig { alpha: 1.2, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
        let cfg = ExperimentConfig { k: -1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { measure: BoundaryMeasure::dirac(&[0.5, 0.0]), ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml("alpha = 0.5\nunknown = 1\n").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { k: 2.0, ..Default::default() };
        assert_ne!(a.hash(), b.hash());
        let moved = ExperimentConfig { output: OutputConfig { dir: "elsewhere".into() }, ..Default::default() };
        assert_eq!(a.hash(), moved.hash());
    }
}
