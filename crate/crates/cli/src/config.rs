use std::path::{Path, PathBuf};

use frog_core::engine::{ActivationPolicy, SimConfig, StopCriteria};
use frog_core::{InitLaw, JumpLaw};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_dim() -> usize {
    1
}

fn default_replicas() -> usize {
    30
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a subcommand needs. Written verbatim (after flag overrides) to
/// `config.toml` in the output directory, so a run can be repeated from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<JumpLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<InitLaw>,
    #[serde(default)]
    pub policy: ActivationPolicy,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub couple: CoupleParams,
    #[serde(default)]
    pub verify_bound: VerifyParams,
    #[serde(default)]
    pub construct: ConstructParams,
    #[serde(default)]
    pub growth: GrowthParams,
    #[serde(default)]
    pub explosion: ExplosionParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            seed: 0,
            pi: None,
            mu: None,
            policy: ActivationPolicy::Null,
            stop: StopCriteria::default(),
            replicas: default_replicas(),
            out: default_out(),
            couple: CoupleParams::default(),
            verify_bound: VerifyParams::default(),
            construct: ConstructParams::default(),
            growth: GrowthParams::default(),
            explosion: ExplosionParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoupleParams {
    /// The more restrictive policy.
    pub policy_a: ActivationPolicy,
    pub policy_b: ActivationPolicy,
    /// Defaults to `stop.t_max`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Compare the run with its one-dimensional projection instead.
    pub projection: bool,
}

impl Default for CoupleParams {
    fn default() -> Self {
        Self {
            policy_a: ActivationPolicy::DelayedGrid { times: (1..=20).map(|k| k as f64 * 0.5).collect() },
            policy_b: ActivationPolicy::Null,
            horizon: None,
            projection: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    pub laws: Vec<JumpLaw>,
    pub radii: Vec<f64>,
    pub thresholds: Vec<u64>,
    pub samples: u64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            laws: standard_laws(),
            radii: vec![0.5, 1.0, 2.0],
            thresholds: vec![1, 2, 3],
            samples: 100_000,
        }
    }
}

/// The four waiting laws of the standard displacement-bound grid.
pub fn standard_laws() -> Vec<JumpLaw> {
    vec![
        JumpLaw::exponential(1.0),
        JumpLaw::uniform(1.0),
        JumpLaw::point_mass(0.4),
        JumpLaw::projected(JumpLaw::exponential(1.0), 2),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulePreset {
    /// `a_n = n²`, `Δ_n = 1`, counts capped.
    Desk,
    /// `a_n = n²`, `Δ_n = 1/n²`, closed-form `b_n` (capped for simulation).
    Summable,
    /// Built from `targets` and `times`.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructParams {
    pub preset: SchedulePreset,
    pub n_max: usize,
    pub m_max: usize,
    pub cap: u64,
    pub targets: Vec<f64>,
    pub times: Vec<f64>,
    /// Trials per index for the step-inequality verdicts; 0 skips them.
    pub step_samples: u64,
}

impl Default for ConstructParams {
    fn default() -> Self {
        Self {
            preset: SchedulePreset::Desk,
            n_max: 5,
            m_max: 3,
            cap: frog_core::construction::DESK_CAP,
            targets: Vec::new(),
            times: Vec::new(),
            step_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthParams {
    pub times: Vec<f64>,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self { times: vec![1.0, 2.0, 4.0, 8.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplosionParams {
    pub thresholds: Vec<u64>,
}

impl Default for ExplosionParams {
    fn default() -> Self {
        Self { thresholds: vec![100, 200, 1000, 2000, 10_000, 20_000] }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub t_max: Option<f64>,
    pub max_active: Option<u64>,
    pub replicas: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.dim {
            self.dim = v;
        }
        if let Some(v) = o.t_max {
            self.stop.t_max = Some(v);
        }
        if let Some(v) = o.max_active {
            self.stop.max_active = Some(v);
        }
        if let Some(v) = o.replicas {
            self.replicas = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
    }

    /// The simulation part, for subcommands that need both laws.
    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let pi = self.pi.clone().ok_or_else(|| CliError::Usage("missing required field `pi`".into()))?;
        let mu = self.mu.clone().ok_or_else(|| CliError::Usage("missing required field `mu`".into()))?;
        let cfg = SimConfig { dim: self.dim, pi, mu, seed: self.seed, policy: self.policy.clone(), stop: self.stop.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.dim == 0 {
            return Err(frog_core::FrogError::invalid("dim", "must be at least 1").into());
        }
        if self.replicas == 0 {
            return Err(frog_core::FrogError::invalid("replicas", "must be at least 1").into());
        }
        if let Some(pi) = &self.pi {
            pi.validate()?;
        }
        if let Some(mu) = &self.mu {
            mu.validate()?;
        }
        self.policy.validate(self.dim)?;
        self.stop.validate()?;
        Ok(())
    }
}

/// Reads `path` (if given), applies `overrides` and validates.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dim = 2
seed = 7
pi = { kind = "exponential", rate = 1.0 }
mu = { kind = "deterministic", k = 1 }
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.dim, 2);
        assert_eq!(cfg.stop, StopCriteria::default());
        assert_eq!(cfg.replicas, 30);
        assert!(cfg.sim_config().is_ok());
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.mu = Some(InitLaw::atom_list(vec![(0, 0.25), (3, 0.75)]));
        cfg.policy = ActivationPolicy::Composite {
            policies: vec![ActivationPolicy::DelayedGrid { times: vec![1.0, 2.0] }, ActivationPolicy::Null],
        };
        cfg.couple.horizon = Some(4.0);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let err = ExperimentConfig::from_toml("colour = 3").unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let cfg = ExperimentConfig::from_toml(&MINIMAL.replace("rate = 1.0", "rate = -1.0")).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("rate"), "{err}");
        let err = ExperimentConfig::from_toml("").unwrap().sim_config().unwrap_err().to_string();
        assert!(err.contains("`pi`"), "{err}");
    }

    #[test]
    fn flags_win() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.apply(&Overrides { seed: Some(9), t_max: Some(3.0), ..Default::default() });
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.stop.t_max, Some(3.0));
    }
}
