// SPDX-License-Identifier: Apache-2.0

//! Run configuration: defaults, a flat TOML file, then `UNIEDIT_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dse::{make_alpha_schedule, AlphaSchedule, DseConfig, ScheduleKind};
use crate::error::{Error, Result};
use crate::semantic_space::ConceptVocabulary;
use crate::uev::LoopConfig;
use crate::velocity_model::GuidanceConfig;
use crate::verifier::VerifierConfig;

pub const ENV_PREFIX: &str = "UNIEDIT_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Vocabulary file; the built-in world (seed 0) when unset.
    pub world: Option<PathBuf>,
    pub steps: usize,
    pub schedule: ScheduleKind,
    /// Explicit gains, required when `schedule = "custom"`.
    pub alpha: Option<Vec<f64>>,
    pub scale_src: f64,
    pub scale_tar: f64,
    pub sigma: f64,
    pub patience_window: usize,
    pub min_improvement: f64,
    pub max_rounds: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            world: None,
            steps: 30,
            schedule: ScheduleKind::Decayed,
            alpha: None,
            scale_src: 2.0,
            scale_tar: 5.5,
            sigma: 9.0,
            patience_window: 8,
            min_improvement: 1e-3,
            max_rounds: 3,
            seed: 0,
            out: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overlay {
    world: Option<PathBuf>,
    steps: Option<usize>,
    schedule: Option<ScheduleKind>,
    alpha: Option<Vec<f64>>,
    scale_src: Option<f64>,
    scale_tar: Option<f64>,
    sigma: Option<f64>,
    patience_window: Option<usize>,
    min_improvement: Option<f64>,
    max_rounds: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_toml(text)?;
        Ok(c)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let o: Overlay =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        self.apply(o);
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_toml(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Applies `UNIEDIT_<KEY>` variables (key upper-cased) from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            let v = v.as_ref();
            let value: toml::Value = match key.as_str() {
                "world" | "out" | "schedule" => toml::Value::String(v.to_string()),
                _ => {
                    let doc = format!("x = {v}");
                    let table: toml::Table = toml::from_str(&doc).map_err(|_| {
                        Error::InvalidConfig(format!(
                            "{ENV_PREFIX}{}: cannot parse {v:?}",
                            key.to_uppercase()
                        ))
                    })?;
                    table["x"].clone()
                }
            };
            let mut table = toml::Table::new();
            table.insert(key.clone(), value);
            let o: Overlay = table.try_into().map_err(|e: toml::de::Error| {
                Error::InvalidConfig(format!(
                    "{ENV_PREFIX}{}: {}",
                    key.to_uppercase(),
                    e.message()
                ))
            })?;
            self.apply(o);
        }
        Ok(())
    }

    fn apply(&mut self, o: Overlay) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f { self.$f = v; })* };
        }
        set!(
            steps,
            schedule,
            scale_src,
            scale_tar,
            sigma,
            patience_window,
            min_improvement,
            max_rounds,
            seed,
            out
        );
        if o.world.is_some() {
            self.world = o.world;
        }
        if o.alpha.is_some() {
            self.alpha = o.alpha;
        }
    }

    pub fn schedule(&self) -> Result<AlphaSchedule> {
        match (self.schedule, &self.alpha) {
            (ScheduleKind::Custom, Some(g)) => {
                let s = AlphaSchedule::custom(g.clone())?;
                if s.len() != self.steps {
                    return Err(Error::InvalidConfig(format!(
                        "alpha has {} gains for steps = {}",
                        s.len(),
                        self.steps
                    )));
                }
                Ok(s)
            }
            (ScheduleKind::Custom, None) => Err(Error::InvalidConfig(
                "schedule = \"custom\" needs an alpha list".into(),
            )),
            (kind, _) => make_alpha_schedule(kind, self.steps),
        }
    }

    pub fn loop_config(&self) -> Result<LoopConfig> {
        let dse = DseConfig {
            steps: self.steps,
            schedule: self.schedule()?,
            guidance: GuidanceConfig {
                scale_src: self.scale_src,
                scale_tar: self.scale_tar,
            },
            seed: self.seed,
            ..DseConfig::default()
        };
        let cfg = LoopConfig {
            max_rounds: self.max_rounds,
            dse,
            verifier: VerifierConfig {
                threshold_sigma: self.sigma,
                patience_window: self.patience_window,
                min_improvement: self.min_improvement,
                ..VerifierConfig::default()
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn vocabulary(&self) -> Result<ConceptVocabulary> {
        match &self.world {
            Some(p) => ConceptVocabulary::load(p),
            None => Ok(ConceptVocabulary::default_world(0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        let l = c.loop_config().unwrap();
        assert_eq!(l, LoopConfig::default());
    }

    #[test]
    fn toml_overlay() {
        let c = RunConfig::from_toml("steps = 12\nschedule = \"uniform\"\nsigma = 8.5\n").unwrap();
        assert_eq!(c.steps, 12);
        assert_eq!(c.schedule, ScheduleKind::Uniform);
        assert_eq!(c.loop_config().unwrap().dse.schedule.gains.len(), 12);
        assert!(RunConfig::from_toml("stpes = 3").is_err());
    }

    #[test]
    fn env_overlay() {
        let mut c = RunConfig::default();
        c.apply_env([
            ("UNIEDIT_SEED", "42"),
            ("UNIEDIT_SCHEDULE", "uniform"),
            ("UNIEDIT_OUT", "x/y"),
            ("HOME", "/root"),
        ])
        .unwrap();
        assert_eq!((c.seed, c.schedule), (42, ScheduleKind::Uniform));
        assert_eq!(c.out, PathBuf::from("x/y"));
        assert!(c.apply_env([("UNIEDIT_STEPS", "many")]).is_err());
    }

    #[test]
    fn custom_schedule() {
        let c = RunConfig::from_toml("steps = 2\nschedule = \"custom\"\nalpha = [0.5, 0.25]\n")
            .unwrap();
        assert_eq!(c.schedule().unwrap().gains, vec![0.5, 0.25]);
        let c = RunConfig::from_toml("steps = 3\nschedule = \"custom\"\nalpha = [0.5]\n").unwrap();
        assert!(c.schedule().is_err());
    }
}
