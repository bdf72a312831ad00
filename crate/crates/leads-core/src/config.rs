//! Run configuration: training hyperparameters, objective mode, and the
//! TOML-backed run config with CLI override support.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training knobs. Defaults are the values used throughout; tests and small
/// experiments override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Number of skills trained jointly.
    pub n_skill: usize,
    /// Skill embedding dimension.
    pub z_dim: usize,
    /// Entropy bonus weight on the actor objective.
    pub lambda_h: f64,
    /// Discount of the successor measure.
    pub gamma: f64,
    /// Monte-Carlo vs temporal-difference mix in the classifier refresh.
    pub lambda_clearning: f64,
    /// Actor learning rate.
    pub alpha_policy: f64,
    /// Classifier learning rate.
    pub alpha_clearning: f64,
    /// Episodes collected per epoch, spread round-robin over skills.
    pub n_episode: usize,
    /// On-policy classifier steps per epoch.
    pub n_sgd_clearning: usize,
    /// Actor gradient steps per epoch (each followed by one refresh step).
    pub n_sgd_actor: usize,
    /// Capacity of the measure-snapshot archive.
    pub n_archive: usize,
    /// Batch size of classifier fitting and refresh.
    pub batch_clearning: usize,
    /// Batch size of the actor objective.
    pub batch_loss: usize,
    /// Per-skill candidate subsample size for target selection.
    pub subsample: usize,
    /// Action draws per measure evaluation in target selection.
    pub action_samples: usize,
    /// Refresh steps between target-classifier copies.
    pub target_refresh: usize,
    /// Cap on the bootstrap importance weight in the refresh.
    pub weight_clip: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_skill: 6,
            z_dim: 20,
            lambda_h: 0.05,
            gamma: 0.95,
            lambda_clearning: 0.5,
            alpha_policy: 5e-4,
            alpha_clearning: 5e-4,
            n_episode: 16,
            n_sgd_clearning: 256,
            n_sgd_actor: 16,
            n_archive: 1,
            batch_clearning: 1024,
            batch_loss: 1024,
            subsample: 512,
            action_samples: 8,
            target_refresh: 64,
            weight_clip: 20.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_skill", self.n_skill),
            ("z_dim", self.z_dim),
            ("n_episode", self.n_episode),
            ("n_archive", self.n_archive),
            ("batch_clearning", self.batch_clearning),
            ("batch_loss", self.batch_loss),
            ("subsample", self.subsample),
            ("action_samples", self.action_samples),
            ("target_refresh", self.target_refresh),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.n_episode < self.n_skill {
            return Err(Error::InvalidConfig(format!(
                "n_episode {} cannot cover n_skill {}",
                self.n_episode, self.n_skill
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda_clearning) {
            return Err(Error::InvalidConfig(format!(
                "lambda_clearning must lie in [0, 1], got {}",
                self.lambda_clearning
            )));
        }
        for (name, v) in [
            ("lambda_h", self.lambda_h),
            ("alpha_policy", self.alpha_policy),
            ("alpha_clearning", self.alpha_clearning),
            ("weight_clip", self.weight_clip),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.alpha_policy == 0.0 || self.alpha_clearning == 0.0 || self.weight_clip == 0.0 {
            return Err(Error::InvalidConfig(
                "learning rates and weight_clip must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Apply a `--hp.<name> <value>` style override.
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(name: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Parse {
                what: format!("hyperparameter {name}"),
                detail: format!("cannot parse {value:?}"),
            })
        }
        match name {
            "n_skill" => self.n_skill = parse(name, value)?,
            "z_dim" => self.z_dim = parse(name, value)?,
            "lambda_h" => self.lambda_h = parse(name, value)?,
            "gamma" => self.gamma = parse(name, value)?,
            "lambda_clearning" => self.lambda_clearning = parse(name, value)?,
            "alpha_policy" => self.alpha_policy = parse(name, value)?,
            "alpha_clearning" => self.alpha_clearning = parse(name, value)?,
            "n_episode" => self.n_episode = parse(name, value)?,
            "n_sgd_clearning" => self.n_sgd_clearning = parse(name, value)?,
            "n_sgd_actor" => self.n_sgd_actor = parse(name, value)?,
            "n_archive" => self.n_archive = parse(name, value)?,
            "batch_clearning" => self.batch_clearning = parse(name, value)?,
            "batch_loss" => self.batch_loss = parse(name, value)?,
            "subsample" => self.subsample = parse(name, value)?,
            "action_samples" => self.action_samples = parse(name, value)?,
            "target_refresh" => self.target_refresh = parse(name, value)?,
            "weight_clip" => self.weight_clip = parse(name, value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown hyperparameter {other:?}"
                )))
            }
        }
        Ok(())
    }
}

/// Which actor objective a run ascends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// Dirac targets from uncertainty selection, contrastive denominator.
    Leads,
    /// Numerator-only objective on uniformly drawn buffer states.
    DiaynAblation,
}

impl FromStr for ObjectiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leads" => Ok(ObjectiveMode::Leads),
            "diayn-ablation" => Ok(ObjectiveMode::DiaynAblation),
            other => Err(Error::InvalidConfig(format!(
                "unknown objective {other:?} (expected leads or diayn-ablation)"
            ))),
        }
    }
}

impl std::fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectiveMode::Leads => "leads",
            ObjectiveMode::DiaynAblation => "diayn-ablation",
        })
    }
}

/// A full run description. Serialized into every run directory so results
/// are reproducible from the snapshot alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: String,
    pub seed: u64,
    pub epochs: usize,
    pub objective: ObjectiveMode,
    /// Output root; `None` falls back to `LEADS_LAB_OUT` or `./runs`.
    pub out: Option<PathBuf>,
    /// Coverage grid resolution per axis.
    pub grid_resolution: usize,
    pub hp: HyperParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: "easy".into(),
            seed: 0,
            epochs: 40,
            objective: ObjectiveMode::Leads,
            out: None,
            grid_resolution: 32,
            hp: HyperParams::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.grid_resolution == 0 {
            return Err(Error::InvalidConfig(
                "grid_resolution must be positive".into(),
            ));
        }
        self.hp.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            what: "run config".into(),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("envv = \"easy\"\n");
        assert!(matches!(err, Err(Error::Parse { .. })));
        let err = RunConfig::from_toml("[hp]\nn_skills = 4\n");
        assert!(matches!(err, Err(Error::Parse { .. })));
    }

    #[test]
    fn overrides_parse_and_apply() {
        let mut hp = HyperParams::default();
        hp.set("gamma", "0.9").unwrap();
        hp.set("n_skill", "4").unwrap();
        assert_eq!(hp.gamma, 0.9);
        assert_eq!(hp.n_skill, 4);
        assert!(hp.set("gamma", "fast").is_err());
        assert!(hp.set("momentum", "0.9").is_err());
    }

    #[test]
    fn invalid_values_are_caught() {
        let mut hp = HyperParams::default();
        hp.gamma = 1.0;
        assert!(hp.validate().is_err());
        let mut hp = HyperParams::default();
        hp.n_episode = 3;
        assert!(hp.validate().is_err(), "episodes must cover every skill");
        let mut hp = HyperParams::default();
        hp.alpha_policy = 0.0;
        assert!(hp.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn objective_names_roundtrip() {
        for mode in [ObjectiveMode::Leads, ObjectiveMode::DiaynAblation] {
            assert_eq!(mode.to_string().parse::<ObjectiveMode>().unwrap(), mode);
        }
        assert!("dyain".parse::<ObjectiveMode>().is_err());
    }
}
