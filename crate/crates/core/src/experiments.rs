//! Random-restart sweeps: many seeded runs of one rule, terminal
//! classification and basin summaries.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{classify_critical_point, CriticalPointKind, DEFAULT_EIG_TOL};
use crate::error::{Error, Result};
use crate::io::{check_schema, to_json};
use crate::objective::{corpus_get, Objective, Params, Point};
use crate::sampling::{rng_for, uniform_in_box};
use crate::smoothrate::{
    build_covering, build_smooth_rate, BoxBounds, CoveringOptions, DampingMode, SmoothRateOptions,
};
use crate::steppers::{run, BacktrackParams, Rule, RunConfig, StopReason, RULE_SELECTORS};

pub const SWEEP_SCHEMA: &str = "sweep/1";

pub const CSV_HEADER: &str = "objective,rule,n_runs,saddle_hits,diverged,nonconverged,basins,seed";

const INIT_STREAM: u64 = 0;
const PARAM_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

impl ObjectiveSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: Params::new(),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Objective>> {
        corpus_get(&self.name, &self.params)
    }
}

/// Box, grid and sampling settings for the continuous rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PouSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub spacing: f64,
    pub mode: DampingMode,
    pub mj_samples: usize,
    pub lipschitz_samples: usize,
}

impl PouSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, spacing: f64) -> Self {
        Self {
            lower,
            upper,
            spacing,
            mode: DampingMode::Practical,
            mj_samples: 1000,
            lipschitz_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub name: String,
    /// Momentum coefficient for `momentum_bt` and `nag_bt`.
    pub gamma: f64,
    pub pou: Option<PouSpec>,
}

impl RuleSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            gamma: 0.9,
            pou: None,
        }
    }

    pub fn build(&self, obj: &dyn Objective, p: &BacktrackParams, seed: u64) -> Result<Rule> {
        match self.name.as_str() {
            "standard" => Ok(Rule::Standard),
            "backtracking" => Ok(Rule::Backtracking),
            "two_way" => Ok(Rule::TwoWay),
            "gd_new" => Ok(Rule::GdNew),
            "momentum_bt" => Ok(Rule::MomentumBt { gamma: self.gamma }),
            "nag_bt" => Ok(Rule::NagBt { gamma: self.gamma }),
            "continuous" => {
                let pou = self
                    .pou
                    .as_ref()
                    .ok_or_else(|| Error::Config("continuous rule needs pou settings".into()))?;
                let bounds = BoxBounds::new(pou.lower.clone(), pou.upper.clone())?;
                let cov = build_covering(
                    obj,
                    &bounds,
                    pou.spacing,
                    &CoveringOptions {
                        alpha: p.alpha,
                        lipschitz_samples: pou.lipschitz_samples,
                        seed,
                        ..CoveringOptions::default()
                    },
                )?;
                let sr = build_smooth_rate(
                    obj,
                    &cov,
                    &SmoothRateOptions {
                        delta0: p.delta0,
                        alpha: p.alpha,
                        mj_samples: pou.mj_samples,
                        mode: pou.mode,
                        seed,
                        ..SmoothRateOptions::default()
                    },
                )?;
                Ok(Rule::Continuous(Arc::new(sr)))
            }
            other => Err(Error::Config(format!(
                "unknown rule `{other}` (expected one of {})",
                RULE_SELECTORS.join(", ")
            ))),
        }
    }
}

/// Where the backtracking parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Fixed(BacktrackParams),
    /// One triple per sweep: `δ0` log-uniform on `[1e−2, 1]`, `α` and `β`
    /// uniform on `(0.1, 0.9)`.
    Random { max_halvings: u32 },
}

impl ParamSource {
    fn resolve(&self, seed: u64) -> BacktrackParams {
        match *self {
            ParamSource::Fixed(p) => p,
            ParamSource::Random { max_halvings } => {
                let mut rng = rng_for(seed, PARAM_STREAM);
                let delta0 = 10f64.powf(rng.random_range(-2.0..=0.0));
                let alpha = rng.random_range(0.1..0.9);
                let beta = rng.random_range(0.1..0.9);
                BacktrackParams {
                    delta0,
                    alpha,
                    beta,
                    max_halvings,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub objective: ObjectiveSpec,
    pub rule: RuleSpec,
    pub params: ParamSource,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_runs: usize,
    pub seed: u64,
    pub run: RunConfig,
    /// Merge radius for the basin table.
    pub cluster_radius: f64,
}

impl SweepConfig {
    pub fn new(objective: ObjectiveSpec, rule: RuleSpec, lower: Vec<f64>, upper: Vec<f64>, n_runs: usize, seed: u64) -> Self {
        Self {
            objective,
            rule,
            params: ParamSource::Fixed(BacktrackParams::default()),
            lower,
            upper,
            n_runs,
            seed,
            run: RunConfig::default(),
            cluster_radius: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if !(self.cluster_radius > 0.0) {
            return Err(Error::Config("cluster_radius must be positive".into()));
        }
        BoxBounds::new(self.lower.clone(), self.upper.clone())?;
        self.run.validate()
    }
}

/// How a single run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub x0: Vec<f64>,
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub stop_reason: Option<StopReason>,
    pub terminal_class: Option<CriticalPointKind>,
    /// Outcome key used in [`SweepReport::counts`].
    pub outcome: String,
    pub detail: Option<String>,
}

impl RunSummary {
    pub fn converged(&self) -> bool {
        self.stop_reason == Some(StopReason::GradientTolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basin {
    pub representative: Vec<f64>,
    pub count: usize,
    pub mean_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub config: SweepConfig,
    pub seed: u64,
    /// Parameters actually used (drawn ones when the source is random).
    pub params_used: BacktrackParams,
    pub n_runs: usize,
    /// Outcome counts; converged runs are keyed by terminal class.
    pub counts: BTreeMap<String, usize>,
    pub saddle_hits: usize,
    pub converged: usize,
    pub diverged: usize,
    pub nonconverged: usize,
    pub mean_iterations: f64,
    pub basins: Vec<Basin>,
    pub runs: Vec<RunSummary>,
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        check_schema(&doc, SWEEP_SCHEMA)?;
        Ok(serde_json::from_value(doc)?)
    }

    /// Header line plus one data row.
    pub fn to_csv(&self) -> String {
        format!(
            "{CSV_HEADER}\n{},{},{},{},{},{},{},{}\n",
            self.config.objective.name,
            self.config.rule.name,
            self.n_runs,
            self.saddle_hits,
            self.diverged,
            self.nonconverged,
            self.basins.len(),
            self.seed
        )
    }
}

fn run_one(
    obj: &dyn Objective,
    rule: &Rule,
    p: &BacktrackParams,
    rc: &RunConfig,
    index: usize,
    x0: Point,
) -> Result<RunSummary> {
    let trace = match run(obj, &x0, rule, p, rc) {
        Ok(t) => t,
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => {
            return Ok(RunSummary {
                index,
                x: x0.as_slice().to_vec(),
                f: obj.value(&x0),
                x0: x0.as_slice().to_vec(),
                iterations: 0,
                stop_reason: None,
                terminal_class: None,
                outcome: "Error".into(),
                detail: Some(e.to_string()),
            })
        }
    };
    let last = trace.last();
    let x = Point::from_row_slice(&last.x);
    let (terminal_class, outcome, detail) = match trace.stop_reason {
        StopReason::GradientTolerance => {
            match classify_critical_point(obj, &x, rc.grad_tol, DEFAULT_EIG_TOL) {
                Ok(c) => (Some(c.kind), c.kind.as_str().to_string(), trace.detail.clone()),
                Err(e) => (None, "Unclassified".to_string(), Some(e.to_string())),
            }
        }
        other => (None, other.as_str().to_string(), trace.detail.clone()),
    };
    Ok(RunSummary {
        index,
        x0: x0.as_slice().to_vec(),
        x: last.x.clone(),
        f: last.f,
        iterations: trace.iterations,
        stop_reason: Some(trace.stop_reason),
        terminal_class,
        outcome,
        detail,
    })
}

/// Runs the sweep. Initial points are drawn serially from the seeded
/// generator and runs execute on the current rayon pool; the report does not
/// depend on the degree of parallelism.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let obj = cfg.objective.build()?;
    if cfg.lower.len() != obj.dim() {
        return Err(Error::Config(format!(
            "init box has dimension {}, objective `{}` has {}",
            cfg.lower.len(),
            cfg.objective.name,
            obj.dim()
        )));
    }
    let p = cfg.params.resolve(cfg.seed);
    p.validate()?;
    let rule = cfg.rule.build(obj.as_ref(), &p, cfg.seed)?;

    let mut rng = rng_for(cfg.seed, INIT_STREAM);
    let inits: Vec<Point> = (0..cfg.n_runs)
        .map(|_| uniform_in_box(&mut rng, &cfg.lower, &cfg.upper))
        .collect();
    let runs: Vec<RunSummary> = inits
        .into_par_iter()
        .enumerate()
        .map(|(i, x0)| run_one(obj.as_ref(), &rule, &p, &cfg.run, i, x0))
        .collect::<Result<_>>()?;

    let mut counts = BTreeMap::new();
    for r in &runs {
        *counts.entry(r.outcome.clone()).or_insert(0) += 1;
    }
    let saddle_hits = runs
        .iter()
        .filter(|r| {
            r.converged()
                && matches!(
                    r.terminal_class,
                    Some(CriticalPointKind::Saddle | CriticalPointKind::GeneralisedSaddle)
                )
        })
        .count();
    let converged = runs.iter().filter(|r| r.converged()).count();
    let diverged = runs
        .iter()
        .filter(|r| r.stop_reason == Some(StopReason::Diverged))
        .count();
    let mean_iterations = runs.iter().map(|r| r.iterations as f64).sum::<f64>() / runs.len() as f64;
    let basins = cluster(&runs, cfg.cluster_radius);

    Ok(SweepReport {
        schema: SWEEP_SCHEMA.to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        params_used: p,
        n_runs: cfg.n_runs,
        counts,
        saddle_hits,
        converged,
        diverged,
        nonconverged: cfg.n_runs - converged - diverged,
        mean_iterations,
        basins,
        runs,
    })
}

fn cluster(runs: &[RunSummary], radius: f64) -> Vec<Basin> {
    let mut basins: Vec<(Vec<f64>, usize, f64)> = Vec::new();
    for r in runs.iter().filter(|r| r.converged()) {
        let found = basins.iter_mut().find(|(rep, _, _)| {
            rep.iter().zip(&r.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius
        });
        match found {
            Some(b) => {
                b.1 += 1;
                b.2 += r.f;
            }
            None => basins.push((r.x.clone(), 1, r.f)),
        }
    }
    let mut out: Vec<Basin> = basins
        .into_iter()
        .map(|(representative, count, sum_f)| Basin {
            representative,
            count,
            mean_f: sum_f / count as f64,
        })
        .collect();
    out.sort_by(|a, b| a.representative.partial_cmp(&b.representative).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Greedy clustering of converged terminal points: each point joins the first
/// representative within `cluster_radius`, otherwise starts a new basin.
/// Sorted by representative.
pub fn basin_statistics(report: &SweepReport, cluster_radius: f64) -> Result<Vec<Basin>> {
    if !(cluster_radius > 0.0) {
        return Err(Error::Config(format!("cluster_radius must be positive, got {cluster_radius}")));
    }
    Ok(cluster(&report.runs, cluster_radius))
}
