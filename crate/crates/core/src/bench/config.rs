//! Experiment configuration: flat JSON keys, named profiles, and overrides.
//!
//! Resolution order is profile defaults, then the config file, then
//! command-line overrides. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelPolicy;
use crate::models::{LvConfig, MODEL_NAMES};
use crate::schedule::ThresholdSchedule;
use crate::smc::{SmcConfig, StoppingRule, DEFAULT_MAX_PROPOSALS};

pub const OUT_DIR_ENV: &str = "STRATA_ABC_OUT";
pub const DEFAULT_OUT_DIR: &str = "results";
pub const REQUIRED_KEYS: [&str; 3] = ["model", "thresholds", "particles"];

/// A threshold as written in a config: a number, or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdValue {
    Number(f64),
    Text(TextThreshold),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextThreshold {
    #[serde(alias = "infinity", alias = "Infinity", alias = "∞")]
    Inf,
}

impl ThresholdValue {
    pub fn value(self) -> f64 {
        match self {
            ThresholdValue::Number(v) => v,
            ThresholdValue::Text(TextThreshold::Inf) => f64::INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            ThresholdValue::Text(TextThreshold::Inf)
        } else {
            ThresholdValue::Number(v)
        }
    }
}

/// Parses `inf,100,50` style threshold lists.
pub fn parse_threshold_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            let tok = tok
                .trim()
                .trim_start_matches('[')
                .trim_end_matches(']')
                .trim();
            match tok.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
                _ => tok
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("thresholds: cannot parse `{tok}`"))),
            }
        })
        .collect()
}

/// Every key a config file or the command line may set. All optional here;
/// [`RawConfig::resolve`] checks the required ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<ThresholdValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopping: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_kl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_min_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_proposals: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lv_horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lv_grid_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lv_event_cap: Option<u64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_json(&text)
    }

    /// Keys set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RawConfig) -> Self {
        overlay!(
            self,
            top,
            profile,
            model,
            thresholds,
            particles,
            methods,
            reps,
            seed,
            out,
            stopping,
            stop_kl,
            stop_min_count,
            max_proposals,
            lv_horizon,
            lv_grid_step,
            lv_event_cap
        );
        self
    }

    /// Applies the named profile underneath `self`, then validates.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let merged = match &self.profile {
            Some(name) => profile(name)?.overlay(self),
            None => self.clone(),
        };
        merged.validate()
    }

    fn validate(&self) -> Result<ExperimentConfig> {
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .zip([
                self.model.is_none(),
                self.thresholds.is_none(),
                self.particles.is_none(),
            ])
            .filter(|(_, m)| *m)
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "missing required key(s): {} (required: {})",
                missing.join(", "),
                REQUIRED_KEYS.join(", ")
            )));
        }
        let model = self.model.clone().unwrap_or_default();
        if !MODEL_NAMES.contains(&model.as_str()) {
            return Err(Error::Config(format!(
                "model: unknown model `{model}` (expected one of {})",
                MODEL_NAMES.join(", ")
            )));
        }
        let raw: Vec<f64> = self
            .thresholds
            .iter()
            .flatten()
            .map(|t| t.value())
            .collect();
        let schedule =
            ThresholdSchedule::new(raw).map_err(|e| Error::Config(format!("thresholds: {e}")))?;

        let methods = match &self.methods {
            None => KernelPolicy::ALL.to_vec(),
            Some(names) => {
                let mut out = Vec::new();
                for n in names {
                    let p = KernelPolicy::parse(n).ok_or_else(|| {
                        Error::Config(format!(
                            "methods: unknown method `{n}` (expected global, local, stratified-simple or stratified)"
                        ))
                    })?;
                    if out.contains(&p) {
                        return Err(Error::Config(format!("methods: `{n}` listed twice")));
                    }
                    out.push(p);
                }
                if out.is_empty() {
                    return Err(Error::Config(
                        "methods: at least one method is required".into(),
                    ));
                }
                out
            }
        };

        let reps = self.reps.unwrap_or(1);
        if reps == 0 {
            return Err(Error::Config("reps: must be at least 1".into()));
        }
        let stopping = StoppingRule {
            enabled: self
                .stopping
                .unwrap_or(self.stop_kl.is_some() || self.stop_min_count.is_some()),
            kl_threshold: self.stop_kl.unwrap_or(StoppingRule::default().kl_threshold),
            min_count: self
                .stop_min_count
                .unwrap_or(StoppingRule::default().min_count),
        };
        let defaults = LvConfig::default();
        let lv = LvConfig {
            horizon: self.lv_horizon.unwrap_or(defaults.horizon),
            grid_step: self.lv_grid_step.unwrap_or(defaults.grid_step),
            event_cap: self.lv_event_cap.unwrap_or(defaults.event_cap),
        };
        lv.validate()?;

        let smc = SmcConfig {
            schedule,
            particles: self.particles.unwrap_or_default(),
            policy: methods[0],
            seed: self.seed.unwrap_or(0),
            stopping,
            max_proposals: self.max_proposals.unwrap_or(DEFAULT_MAX_PROPOSALS),
        };
        smc.validate()?;

        let out = self.out.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
        });

        Ok(ExperimentConfig {
            model,
            smc,
            methods,
            reps,
            out,
            lv,
        })
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: String,
    /// Shared settings; `smc.policy` is replaced per method.
    pub smc: SmcConfig,
    pub methods: Vec<KernelPolicy>,
    pub reps: usize,
    pub out: PathBuf,
    pub lv: LvConfig,
}

impl ExperimentConfig {
    /// Flat echo of every resolved key, suitable for feeding back in.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            profile: None,
            model: Some(self.model.clone()),
            thresholds: Some(
                self.smc
                    .schedule
                    .as_slice()
                    .iter()
                    .map(|&v| ThresholdValue::from_f64(v))
                    .collect(),
            ),
            particles: Some(self.smc.particles),
            methods: Some(
                self.methods
                    .iter()
                    .map(|m| m.as_str().to_string())
                    .collect(),
            ),
            reps: Some(self.reps),
            seed: Some(self.smc.seed),
            out: Some(self.out.clone()),
            stopping: Some(self.smc.stopping.enabled),
            stop_kl: Some(self.smc.stopping.kl_threshold),
            stop_min_count: Some(self.smc.stopping.min_count),
            max_proposals: Some(self.smc.max_proposals),
            lv_horizon: Some(self.lv.horizon),
            lv_grid_step: Some(self.lv.grid_step),
            lv_event_cap: Some(self.lv.event_cap),
        }
    }

    pub fn smc_for(&self, policy: KernelPolicy, seed: u64) -> SmcConfig {
        SmcConfig {
            policy,
            seed,
            ..self.smc.clone()
        }
    }
}

pub const PROFILE_NAMES: [&str; 8] = [
    "toy-example1",
    "toy-kl",
    "banana-desk",
    "banana-paper",
    "lv-desk",
    "lv-paper",
    "gk-desk",
    "gk-paper",
];

fn thresholds(v: &[f64]) -> Option<Vec<ThresholdValue>> {
    Some(v.iter().map(|&x| ThresholdValue::from_f64(x)).collect())
}

const INF: f64 = f64::INFINITY;
const BANANA_EPS: [f64; 8] = [INF, 100.0, 50.0, 20.0, 10.0, 5.0, 2.0, 1.0];
const LV_EPS: [f64; 8] = [INF, 200.0, 100.0, 90.0, 80.0, 70.0, 60.0, 50.0];
const GK_EPS: [f64; 8] = [INF, 100.0, 70.0, 50.0, 30.0, 27.0, 23.0, 20.0];

/// Named preset configurations.
pub fn profile(name: &str) -> Result<RawConfig> {
    let (model, eps, particles, reps): (&str, &[f64], usize, usize) = match name {
        "toy-example1" => ("gaussian_toy", &[INF, 4.0, 3.0, 2.0, 1.0], 2000, 1),
        "toy-kl" => (
            "gaussian_toy",
            &[INF, 4.0, 3.0, 2.0, 1.0, 0.8, 0.6, 0.4, 0.2],
            20_000,
            5,
        ),
        "banana-desk" => ("banana", &BANANA_EPS, 500, 10),
        "banana-paper" => ("banana", &BANANA_EPS, 2000, 50),
        "lv-desk" => ("lotka_volterra", &LV_EPS, 500, 10),
        "lv-paper" => ("lotka_volterra", &LV_EPS, 2000, 50),
        "gk-desk" => ("gk", &GK_EPS, 500, 10),
        "gk-paper" => ("gk", &GK_EPS, 5000, 50),
        other => {
            return Err(Error::Config(format!(
                "profile: unknown profile `{other}` (expected one of {})",
                PROFILE_NAMES.join(", ")
            )))
        }
    };
    Ok(RawConfig {
        model: Some(model.into()),
        thresholds: thresholds(eps),
        particles: Some(particles),
        reps: Some(reps),
        ..RawConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banana_setup_parses() {
        let raw = RawConfig::from_json(
            r#"{"model": "banana", "thresholds": ["inf", 100, 50, 20, 10, 5, 2, 1], "particles": 2000}"#,
        )
        .unwrap();
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.model, "banana");
        assert_eq!(cfg.smc.particles, 2000);
        assert_eq!(cfg.smc.schedule.len(), 8);
        assert_eq!(cfg.smc.schedule.eps(1), f64::INFINITY);
        assert_eq!(cfg.methods, KernelPolicy::ALL.to_vec());
        assert!(!cfg.smc.stopping.enabled);
    }

    #[test]
    fn bad_thresholds_are_rejected() {
        let raw = RawConfig::from_json(
            r#"{"model": "banana", "thresholds": ["inf", 50, 100], "particles": 10}"#,
        )
        .unwrap();
        let err = raw.resolve().unwrap_err().to_string();
        assert!(err.contains("thresholds"), "{err}");
    }

    #[test]
    fn missing_model_lists_required_keys() {
        let raw = RawConfig::from_json(r#"{"thresholds": [5, 1], "particles": 10}"#).unwrap();
        let err = raw.resolve().unwrap_err().to_string();
        assert!(
            err.contains("model") && err.contains("thresholds, particles"),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RawConfig::from_json(r#"{"model": "banana", "particle": 10}"#).unwrap_err();
        assert!(err.to_string().contains("particle"), "{err}");
    }

    #[test]
    fn overrides_win_over_file_and_profile() {
        let file = RawConfig::from_json(r#"{"profile": "banana-desk", "particles": 300}"#).unwrap();
        let flags = RawConfig {
            reps: Some(2),
            ..RawConfig::default()
        };
        let cfg = file.overlay(&flags).resolve().unwrap();
        assert_eq!(cfg.smc.particles, 300);
        assert_eq!(cfg.reps, 2);
        assert_eq!(cfg.smc.schedule.as_slice(), &BANANA_EPS);
    }

    #[test]
    fn stop_threshold_enables_stopping() {
        let raw = RawConfig {
            stop_kl: Some(0.1),
            ..profile("toy-example1").unwrap()
        };
        let cfg = raw.resolve().unwrap();
        assert!(cfg.smc.stopping.enabled);
        assert_eq!(cfg.smc.stopping.kl_threshold, 0.1);
        let raw = RawConfig {
            stopping: Some(false),
            ..raw
        };
        assert!(!raw.resolve().unwrap().smc.stopping.enabled);
    }

    #[test]
    fn method_validation() {
        let base = profile("toy-example1").unwrap();
        let dup = RawConfig {
            methods: Some(vec!["local".into(), "local".into()]),
            ..base.clone()
        };
        assert!(dup.resolve().is_err());
        let bad = RawConfig {
            methods: Some(vec!["adaptive".into()]),
            ..base.clone()
        };
        assert!(bad.resolve().is_err());
        let empty = RawConfig {
            methods: Some(vec![]),
            ..base
        };
        assert!(empty.resolve().is_err());
    }

    #[test]
    fn echo_resolves_to_the_same_config() {
        for name in PROFILE_NAMES {
            let cfg = profile(name).unwrap().resolve().unwrap();
            let text = serde_json::to_string(&cfg.to_raw()).unwrap();
            let again = RawConfig::from_json(&text).unwrap().resolve().unwrap();
            assert_eq!(cfg, again, "{name}");
        }
    }

    #[test]
    fn threshold_lists() {
        assert_eq!(
            parse_threshold_list("inf,100,50").unwrap(),
            vec![f64::INFINITY, 100.0, 50.0]
        );
        assert!(parse_threshold_list("inf,abc").is_err());
    }
}
