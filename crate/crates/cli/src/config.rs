//! Flat `key=value` configuration with section prefixes.

use std::collections::BTreeMap;
use std::str::FromStr;

use btgd_core::experiments::{ObjectiveSpec, ParamSource, PouSpec, RuleSpec};
use btgd_core::smoothrate::DampingMode;
use btgd_core::{BacktrackParams, Params, RunConfig};

use crate::CliError;

const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("objective.name", "double_well"),
    ("rule.name", "backtracking"),
    ("rule.delta0", "1"),
    ("rule.alpha", "0.5"),
    ("rule.beta", "0.5"),
    ("rule.max_halvings", "60"),
    ("rule.gamma", "0.9"),
    ("rule.random_params", "false"),
    ("run.max_iters", "10000"),
    ("run.grad_tol", "1e-8"),
    ("run.divergence_radius", "1e8"),
    ("run.record_every", "1"),
    ("run.eig_tol", "1e-6"),
    ("sweep.n_runs", "100"),
    ("sweep.cluster_radius", "1e-3"),
    ("pou.spacing", "0.25"),
    ("pou.mode", "practical"),
    ("pou.mj_samples", "1000"),
    ("pou.lipschitz_samples", "1000"),
    ("pou.samples", "10000"),
    ("pou.pairs", "10000"),
    ("pou.smoothness_points", "100"),
    ("verify.suites", "gradient,armijo,delta_hat,descent_lemma"),
    ("verify.samples", "1000"),
];

/// Keys without defaults that may still be set.
const OPTIONAL: &[&str] = &[
    "run.x0",
    "sweep.lower",
    "sweep.upper",
    "pou.lower",
    "pou.upper",
    "classify.x",
];

/// Effective configuration: defaults, then the file, then flags and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    key.starts_with("objective.") || DEFAULTS.iter().any(|(k, _)| *k == key) || OPTIONAL.contains(&key)
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl Config {
    /// Parses `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line)
                .map_err(|e| CliError::config(format!("line {}: {}", i + 1, e.message)))?;
        }
        Ok(())
    }

    /// Applies a single `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !known(key) || key == "objective." {
            return Err(CliError::config(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get_str(&self, key: &str) -> Result<&str, CliError> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.get_str(key)?;
        raw.parse()
            .map_err(|_| CliError::config(format!("cannot parse `{key}={raw}`")))
    }

    pub fn get_vec(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let raw = self.get_str(key)?;
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::config(format!("cannot parse `{key}={raw}` as a list of numbers")))
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")
    }

    pub fn objective(&self) -> Result<ObjectiveSpec, CliError> {
        let mut params = Params::new();
        for (k, v) in &self.values {
            if let Some(name) = k.strip_prefix("objective.") {
                if name == "name" {
                    continue;
                }
                let x: f64 = v
                    .parse()
                    .map_err(|_| CliError::config(format!("cannot parse `{k}={v}`")))?;
                params.insert(name.to_string(), x);
            }
        }
        Ok(ObjectiveSpec {
            name: self.get_str("objective.name")?.to_string(),
            params,
        })
    }

    pub fn backtrack(&self) -> Result<BacktrackParams, CliError> {
        let p = BacktrackParams {
            delta0: self.get("rule.delta0")?,
            alpha: self.get("rule.alpha")?,
            beta: self.get("rule.beta")?,
            max_halvings: self.get("rule.max_halvings")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn param_source(&self) -> Result<ParamSource, CliError> {
        if self.get::<bool>("rule.random_params")? {
            Ok(ParamSource::Random {
                max_halvings: self.get("rule.max_halvings")?,
            })
        } else {
            Ok(ParamSource::Fixed(self.backtrack()?))
        }
    }

    pub fn pou(&self) -> Result<PouSpec, CliError> {
        Ok(PouSpec {
            lower: self.get_vec("pou.lower")?,
            upper: self.get_vec("pou.upper")?,
            spacing: self.get("pou.spacing")?,
            mode: DampingMode::parse(self.get_str("pou.mode")?)?,
            mj_samples: self.get("pou.mj_samples")?,
            lipschitz_samples: self.get("pou.lipschitz_samples")?,
        })
    }

    pub fn rule(&self) -> Result<RuleSpec, CliError> {
        let name = self.get_str("rule.name")?.to_string();
        let pou = if name == "continuous" { Some(self.pou()?) } else { None };
        Ok(RuleSpec {
            name,
            gamma: self.get("rule.gamma")?,
            pou,
        })
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let rc = RunConfig {
            max_iters: self.get("run.max_iters")?,
            grad_tol: self.get("run.grad_tol")?,
            divergence_radius: self.get("run.divergence_radius")?,
            record_every: self.get("run.record_every")?,
        };
        rc.validate()?;
        Ok(rc)
    }
}
