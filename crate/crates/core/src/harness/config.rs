//! Experiment configuration: a small JSON schema with strict validation.
//!
//! ```json
//! {
//!   "problem":  {"family": "quartic_saddle", "dim": 5,
//!                "noise_model": "none", "noise_scale": 0.0},
//!   "privacy":  {"eps": 2.0, "delta": 1e-6},
//!   "data":     {"n": 200000},
//!   "failure_prob": 0.05,
//!   "seeds":    {"master_seed": 7, "num_runs": 10},
//!   "overrides": {"alpha": 0.25},
//!   "output":   {"dir": "out"},
//!   "flags":    {"emit_trace": false, "sigma_preset": "sensitivity",
//!                "drift_rule": "estimator_norm"}
//! }
//! ```
//!
//! `eps` accepts a number or the string "inf". Counting fields (`n`,
//! `master_seed`, `num_runs`) also accept integral floats such as `2e5`.
//! Unknown keys anywhere are rejected — a typo must fail loudly, not
//! silently fall back to a default.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::calibrate::{CalibrationInputs, CalibrationOptions, SigmaPreset};
use crate::error::{Error, Result};
use crate::objective::{make_problem, Family, NoiseModel, ProblemSpec};
use crate::spider::DriftRule;

/// Deserializer for u64 fields that tolerates integral floats (`2e5`).
mod lenient_u64 {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(*v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = u64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a nonnegative integer (integral floats accepted)")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<u64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<u64, E> {
                u64::try_from(v).map_err(|_| E::custom(format!("negative count {v}")))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<u64, E> {
                if v.fract() == 0.0 && (0.0..=9.007_199_254_740_992e15).contains(&v) {
                    Ok(v as u64)
                } else {
                    Err(E::custom(format!("not an exact nonnegative integer: {v}")))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub family: Family,
    pub dim: usize,
    #[serde(default = "default_noise_model")]
    pub noise_model: NoiseModel,
    #[serde(default)]
    pub noise_scale: f64,
}

fn default_noise_model() -> NoiseModel {
    NoiseModel::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    #[serde(with = "crate::eps")]
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(with = "lenient_u64")]
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    #[serde(default, with = "lenient_u64")]
    pub master_seed: u64,
    #[serde(default = "default_num_runs", with = "lenient_u64")]
    pub num_runs: u64,
}

fn default_num_runs() -> u64 {
    1
}

impl Default for SeedsSection {
    fn default() -> Self {
        SeedsSection {
            master_seed: 0,
            num_runs: 1,
        }
    }
}

/// Optional replacements for calibration constants; `None` keeps the
/// derived value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for records/traces/CSV. Falls back to the CLI flag, then
    /// the `DP_SPIDER_OUT` environment variable, then `out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagsSection {
    /// Also persist the full per-step trace of every run.
    #[serde(default)]
    pub emit_trace: bool,
    #[serde(default)]
    pub sigma_preset: SigmaPreset,
    #[serde(default)]
    pub drift_rule: DriftRule,
}

impl Default for FlagsSection {
    fn default() -> Self {
        FlagsSection {
            emit_trace: false,
            sigma_preset: SigmaPreset::default(),
            drift_rule: DriftRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub privacy: PrivacySection,
    pub data: DataSection,
    #[serde(default = "default_failure_prob")]
    pub failure_prob: f64,
    #[serde(default)]
    pub seeds: SeedsSection,
    #[serde(default)]
    pub overrides: OverridesSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub flags: FlagsSection,
}

fn default_failure_prob() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.dim < 1 {
            return Err(Error::InvalidConfig("problem.dim must be at least 1".into()));
        }
        if !(p.noise_scale >= 0.0 && p.noise_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "problem.noise_scale must be finite and nonnegative, got {}",
                p.noise_scale
            )));
        }
        if !(self.privacy.eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "privacy.eps must be positive (finite or \"inf\"), got {}",
                self.privacy.eps
            )));
        }
        if !(self.privacy.delta > 0.0 && self.privacy.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "privacy.delta must lie in (0, 1), got {}",
                self.privacy.delta
            )));
        }
        if self.data.n < 1 {
            return Err(Error::InvalidConfig("data.n must be at least 1".into()));
        }
        if !(self.failure_prob > 0.0 && self.failure_prob < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "failure_prob must lie in (0, 1), got {}",
                self.failure_prob
            )));
        }
        if self.seeds.num_runs < 1 {
            return Err(Error::InvalidConfig("seeds.num_runs must be at least 1".into()));
        }
        let o = &self.overrides;
        for (name, v) in [
            ("c_gamma", o.c_gamma),
            ("c_t", o.c_t),
            ("sensitivity_factor", o.sensitivity_factor),
            ("alpha", o.alpha),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "overrides.{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        for (name, v) in [("zeta", o.zeta), ("sigma", o.sigma)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "overrides.{name} must be finite and nonnegative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_problem(&self) -> Result<ProblemSpec> {
        make_problem(
            self.problem.family,
            self.problem.dim,
            self.problem.noise_model,
            self.problem.noise_scale,
        )
    }

    pub fn to_inputs(&self, spec: &ProblemSpec) -> CalibrationInputs {
        CalibrationInputs::for_problem(
            spec,
            self.data.n,
            self.privacy.eps,
            self.privacy.delta,
            self.failure_prob,
        )
    }

    pub fn to_options(&self) -> CalibrationOptions {
        let defaults = CalibrationOptions::default();
        CalibrationOptions {
            c_gamma: self.overrides.c_gamma.unwrap_or(defaults.c_gamma),
            c_t: self.overrides.c_t.unwrap_or(defaults.c_t),
            sensitivity_factor: self
                .overrides
                .sensitivity_factor
                .unwrap_or(defaults.sensitivity_factor),
            sigma_preset: self.flags.sigma_preset,
            alpha_override: self.overrides.alpha,
            zeta_override: self.overrides.zeta,
            sigma_override: self.overrides.sigma,
        }
    }
}
