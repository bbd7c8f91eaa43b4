use std::fmt;
use std::path::{Path, PathBuf};

use rpflow_core::density::Density;
use rpflow_core::ensemble::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Localization,
    FlowEvents,
    Subordination,
    Concentration,
    Regularity,
    ScalingSweep,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Localization => "localization",
            Experiment::FlowEvents => "flow-events",
            Experiment::Subordination => "subordination",
            Experiment::Concentration => "concentration",
            Experiment::Regularity => "regularity",
            Experiment::ScalingSweep => "scaling-sweep",
        };
        f.write_str(s)
    }
}

fn default_path_steps() -> usize {
    8
}
fn default_tracked_sites() -> usize {
    16
}
fn default_subsample() -> usize {
    512
}
fn default_trajectory_dump() -> usize {
    8
}
fn default_points() -> usize {
    8
}
fn default_epsilon() -> f64 {
    0.25
}
fn default_bulk_fraction() -> f64 {
    0.8
}
fn default_mu_grid() -> Vec<f64> {
    vec![0.2, 0.3, 0.4, 0.5, 0.6]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Flat experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    /// Matrix sizes for `scaling-sweep`, and optionally for `concentration`,
    /// `regularity` and `flow-events`; `n` is used when empty.
    #[serde(default)]
    pub sizes: Vec<usize>,
    pub delta: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub theta: f64,
    pub gamma: f64,
    pub ell: f64,
    pub beta: f64,
    pub window: [f64; 2],
    pub density: String,
    pub ensemble: usize,
    pub master_seed: u64,
    /// Cap on the lattice cardinality `|D̃|`; the lattice is implicit, so no
    /// cap applies when absent.
    #[serde(default)]
    pub grid_budget: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Time steps `M` of the sampled path.
    #[serde(default = "default_path_steps")]
    pub path_steps: usize,
    /// Sites whose resolvents are followed (indices `0..tracked_sites`).
    #[serde(default = "default_tracked_sites")]
    pub tracked_sites: usize,
    /// Grid points followed per flow-events realization.
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    /// Trajectories per realization written to `trajectories.csv`.
    #[serde(default = "default_trajectory_dump")]
    pub trajectory_dump: usize,
    /// Spectral parameters per subordination realization.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_bulk_fraction")]
    pub bulk_fraction: f64,
    /// Lower cutoff of `D(J, ζ)`; `N^{-1/2}` when absent.
    #[serde(default)]
    pub zeta: Option<f64>,
    #[serde(default = "default_mu_grid")]
    pub mu_grid: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, Vec<String>> {
        let cfg: Self = toml::from_str(text).map_err(|e| vec![e.to_string()])?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(ConfigError::Invalid)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn density(&self) -> Result<Density, String> {
        self.density.parse::<Density>().map_err(|e| e.to_string())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.window[0], self.window[1])
    }

    /// `sizes`, or `[n]` when none are given.
    pub fn size_list(&self) -> Vec<usize> {
        if self.sizes.is_empty() {
            vec![self.n]
        } else {
            self.sizes.clone()
        }
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let unit = |name: &str, x: f64, errs: &mut Vec<String>| {
            if !(x > 0.0 && x < 1.0) {
                errs.push(format!("{name} = {x} must lie in (0, 1)"));
            }
        };
        unit("delta", self.delta, &mut errs);
        unit("alpha", self.alpha, &mut errs);
        unit("kappa", self.kappa, &mut errs);
        unit("theta", self.theta, &mut errs);
        unit("gamma", self.gamma, &mut errs);
        unit("ell", self.ell, &mut errs);
        unit("beta", self.beta, &mut errs);
        if !(self.kappa > self.delta && self.delta > self.theta) {
            errs.push(format!(
                "exponent ordering violated: the localization theorem requires kappa > delta > theta (κ > δ > θ), got kappa = {}, delta = {}, theta = {}",
                self.kappa, self.delta, self.theta
            ));
        }
        if self.ensemble < 1 {
            errs.push("ensemble must be at least 1".into());
        }
        if !(self.window[0] < self.window[1]) {
            errs.push(format!("window [{}, {}] is empty", self.window[0], self.window[1]));
        }
        if let Err(e) = self.density() {
            errs.push(e);
        }
        if self.grid_budget == Some(0) {
            errs.push("grid_budget must be positive".into());
        }
        if self.path_steps < 1 {
            errs.push("path_steps must be at least 1".into());
        }
        if !(self.bulk_fraction > 0.0 && self.bulk_fraction <= 1.0) {
            errs.push(format!("bulk_fraction = {} must lie in (0, 1]", self.bulk_fraction));
        }
        if !(self.epsilon > 0.0) {
            errs.push(format!("epsilon = {} must be positive", self.epsilon));
        }
        for &n in std::iter::once(&self.n).chain(&self.sizes) {
            if let Err(e) = ModelParams::<f64>::new(n, self.delta.clamp(1e-9, 1.0 - 1e-9), self.alpha.clamp(1e-9, 1.0 - 1e-9)) {
                errs.push(format!("N = {n}: {e}"));
            }
            if matches!(self.experiment, Experiment::FlowEvents | Experiment::Subordination) && self.tracked_sites > n {
                errs.push(format!("tracked_sites = {} exceeds N = {n}", self.tracked_sites));
            }
        }
        match self.experiment {
            Experiment::ScalingSweep => {
                let mut d = self.sizes.clone();
                d.sort_unstable();
                d.dedup();
                if d.len() < 3 {
                    errs.push(format!("scaling-sweep needs at least 3 distinct sizes, got {}", d.len()));
                }
            }
            Experiment::Concentration => {
                if self.ensemble < 100 {
                    errs.push(format!("concentration needs ensemble >= 100, got {}", self.ensemble));
                }
                if let Some(z) = self.zeta {
                    if !(z > 0.0 && z < 1.0) {
                        errs.push(format!("zeta = {z} must lie in (0, 1)"));
                    }
                }
                if self.mu_grid.is_empty() || self.mu_grid.iter().any(|m| !(*m > 0.0)) {
                    errs.push("mu_grid must be non-empty and positive".into());
                }
            }
            Experiment::Subordination if self.points < 1 => errs.push("points must be at least 1".into()),
            Experiment::FlowEvents if self.subsample < 1 => errs.push("subsample must be at least 1".into()),
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Invalid(Vec<String>),
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn base() -> String {
        r#"
experiment = "localization"
n = 250
delta = 0.5
alpha = 0.3
kappa = 0.7
theta = 0.35
gamma = 0.05
ell = 0.25
beta = 0.5
window = [-0.25, 0.25]
density = "uniform"
ensemble = 2
master_seed = 1
"#
        .to_string()
    }

    #[test]
    fn parses_defaults() {
        let c = ExperimentConfig::from_toml(&base()).unwrap();
        assert_eq!(c.path_steps, 8);
        assert_eq!(c.size_list(), vec![250]);
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn ordering_and_all_errors_reported() {
        let text = base().replace("theta = 0.35", "theta = 0.6").replace("ensemble = 2", "ensemble = 0");
        let errs = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(errs.len(), 2, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("κ > δ > θ")));
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(ExperimentConfig::from_toml(&(base() + "bogus = 1\n")).is_err());
    }

    #[test]
    fn sweep_needs_sizes() {
        let text = base().replace("\"localization\"", "\"scaling-sweep\"") + "sizes = [100, 200]\n";
        let errs = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(errs[0].contains("3 distinct"));
    }
}
