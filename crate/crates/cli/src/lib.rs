//! Command-line front end: single runs, sweeps, smooth step-size
//! construction, verification suites and critical-point classification.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use btgd_core::analysis::classify_critical_point;
use btgd_core::experiments::{sweep, SweepConfig};
use btgd_core::io::to_json;
use btgd_core::smoothrate::{
    build_covering, build_smooth_rate, verify_smooth_rate, BoxBounds, CheckOptions, CoveringOptions,
    SmoothRateOptions,
};
use btgd_core::steppers::Rule;
use btgd_core::tracefile::{TraceFile, TraceFooter, TraceHeader, TRACE_SCHEMA};
use btgd_core::verify::run_suite;
use btgd_core::{run, Error, Point, StopReason};

pub mod config;

pub use config::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COLLAPSE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn with_code(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_)
            | Error::UnknownObjective(_)
            | Error::InvalidParams { .. }
            | Error::NonSmoothBox(_)
            | Error::CoveringGap { .. }
            | Error::NotC2 { .. }
            | Error::Schema { .. }
            | Error::Json(_) => EXIT_CONFIG,
            Error::StepCollapse { .. } => EXIT_COLLAPSE,
            Error::InvariantViolation(_) => EXIT_INVARIANT,
            _ => EXIT_FAILURE,
        };
        Self::with_code(code, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "btgd", version, about = "Backtracking gradient descent experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one descent rule from `run.x0` and write a JSON-lines trace.
    Run(CommonArgs),
    /// Random-restart sweep; writes a JSON report and a CSV summary row.
    Sweep(CommonArgs),
    /// Build and check the smooth step-size function on `pou.lower..pou.upper`.
    Pou(CommonArgs),
    /// Run the named verification suites (`verify.suites`).
    Verify(CommonArgs),
    /// Classify the point `classify.x`.
    Classify(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub parallel: usize,
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub objective: Option<String>,
    /// Dotted-key overrides such as `rule.alpha=0.3`.
    pub overrides: Vec<String>,
}

impl CommonArgs {
    pub fn effective_config(&self) -> Result<Config, CliError> {
        let mut cfg = Config::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        if let Some(seed) = self.seed {
            cfg.set("seed", &seed.to_string())?;
        }
        if let Some(rule) = &self.rule {
            cfg.set("rule.name", rule)?;
        }
        if let Some(obj) = &self.objective {
            cfg.set("objective.name", obj)?;
        }
        for o in &self.overrides {
            cfg.set_pair(o)?;
        }
        Ok(cfg)
    }
}

/// Output of a command: text for `--out` (or stdout), extra files, summary
/// lines for stdout and the exit code.
#[derive(Debug, Default)]
pub struct Outcome {
    pub primary: String,
    pub extra: Vec<(String, String)>,
    pub summary: Vec<String>,
    pub code: i32,
}

fn echo(cfg: &Config) -> serde_json::Value {
    serde_json::to_value(cfg.values()).unwrap_or(serde_json::Value::Null)
}

fn build_rule(cfg: &Config, obj: &dyn btgd_core::Objective, p: &btgd_core::BacktrackParams) -> Result<Rule, CliError> {
    Ok(cfg.rule()?.build(obj, p, cfg.seed()?)?)
}

pub fn cmd_run(cfg: &Config) -> Result<Outcome, CliError> {
    let spec = cfg.objective()?;
    let obj = spec.build()?;
    let p = cfg.backtrack()?;
    let rc = cfg.run_config()?;
    let x0 = Point::from_vec(cfg.get_vec("run.x0")?);
    let eig_tol: f64 = cfg.get("run.eig_tol")?;
    let rule = build_rule(cfg, obj.as_ref(), &p)?;
    let trace = run(obj.as_ref(), &x0, &rule, &p, &rc)?;
    let terminal_class = classify_critical_point(obj.as_ref(), &trace.final_point(), rc.grad_tol, eig_tol)
        .ok()
        .map(|c| c.kind.as_str().to_string());
    let mode = matches!(rule, Rule::Continuous(_))
        .then(|| cfg.get_str("pou.mode").map(str::to_string))
        .transpose()?;
    let file = TraceFile {
        header: TraceHeader {
            schema: TRACE_SCHEMA.to_string(),
            objective: spec.name.clone(),
            rule: trace.rule.clone(),
            params: serde_json::to_value(p).map_err(Error::from)?,
            seed: cfg.seed()?,
            mode,
            config: cfg.values().clone(),
        },
        records: trace.records.clone(),
        footer: TraceFooter {
            stop_reason: trace.stop_reason,
            terminal_class: terminal_class.clone(),
            detail: trace.detail.clone(),
        },
    };
    let code = if trace.stop_reason == StopReason::StepCollapse {
        EXIT_COLLAPSE
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        primary: file.to_jsonl()?,
        extra: vec![],
        summary: vec![format!(
            "{} after {} iterations, f={:.6e}, class={}",
            trace.stop_reason.as_str(),
            trace.iterations,
            trace.last().f,
            terminal_class.as_deref().unwrap_or("undefined")
        )],
        code,
    })
}

pub fn sweep_config(cfg: &Config) -> Result<SweepConfig, CliError> {
    Ok(SweepConfig {
        objective: cfg.objective()?,
        rule: cfg.rule()?,
        params: cfg.param_source()?,
        lower: cfg.get_vec("sweep.lower")?,
        upper: cfg.get_vec("sweep.upper")?,
        n_runs: cfg.get("sweep.n_runs")?,
        seed: cfg.seed()?,
        run: cfg.run_config()?,
        cluster_radius: cfg.get("sweep.cluster_radius")?,
    })
}

pub fn cmd_sweep(cfg: &Config) -> Result<Outcome, CliError> {
    let report = sweep(&sweep_config(cfg)?)?;
    let mut doc = serde_json::to_value(&report).map_err(Error::from)?;
    doc["effective_config"] = echo(cfg);
    let csv = report.to_csv();
    Ok(Outcome {
        primary: to_json(&doc)? + "\n",
        extra: vec![("csv".into(), csv.clone())],
        summary: csv.lines().skip(1).map(str::to_string).collect(),
        code: EXIT_OK,
    })
}

pub fn cmd_pou(cfg: &Config) -> Result<Outcome, CliError> {
    let obj = cfg.objective()?.build()?;
    let p = cfg.backtrack()?;
    let pou = cfg.pou()?;
    let seed = cfg.seed()?;
    let bounds = BoxBounds::new(pou.lower.clone(), pou.upper.clone())?;
    let cov = build_covering(
        obj.as_ref(),
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
        obj.as_ref(),
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
    let checks = verify_smooth_rate(
        obj.as_ref(),
        &sr,
        &CheckOptions {
            samples: cfg.get("pou.samples")?,
            pairs: cfg.get("pou.pairs")?,
            smoothness_points: cfg.get("pou.smoothness_points")?,
            seed,
            ..CheckOptions::default()
        },
    )?;
    let passed = checks.iter().all(|c| c.passed);
    let mut doc: serde_json::Value = serde_json::from_str(&sr.to_json()?).map_err(Error::from)?;
    doc["objective"] = serde_json::Value::String(obj.name().to_string());
    doc["checks"] = serde_json::to_value(&checks).map_err(Error::from)?;
    doc["passed"] = serde_json::Value::Bool(passed);
    doc["effective_config"] = echo(cfg);
    let mut summary = vec![format!(
        "mode={} balls={} overlap={}",
        sr.mode.as_str(),
        sr.covering.len(),
        sr.overlap
    )];
    summary.extend(checks.iter().map(|c| c.summary_line()));
    Ok(Outcome {
        primary: to_json(&doc)? + "\n",
        extra: vec![],
        summary,
        code: if passed { EXIT_OK } else { EXIT_INVARIANT },
    })
}

pub fn cmd_verify(cfg: &Config) -> Result<Outcome, CliError> {
    let samples: usize = cfg.get("verify.samples")?;
    let seed = cfg.seed()?;
    let names: Vec<String> = cfg
        .get_str("verify.suites")?
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(CliError::config("verify.suites is empty"));
    }
    for n in &names {
        if !btgd_core::verify::SUITES.contains(&n.as_str()) {
            return Err(CliError::config(format!("unknown suite `{n}`")));
        }
    }
    let mut reports = Vec::new();
    for n in &names {
        reports.extend(run_suite(n, samples, seed)?);
    }
    let passed = reports.iter().all(|r| r.passed);
    let doc = serde_json::json!({
        "schema": "verify/1",
        "passed": passed,
        "suites": reports,
        "effective_config": echo(cfg),
    });
    Ok(Outcome {
        primary: to_json(&doc)? + "\n",
        extra: vec![],
        summary: reports.iter().map(|r| r.summary_line()).collect(),
        code: if passed { EXIT_OK } else { EXIT_INVARIANT },
    })
}

pub fn cmd_classify(cfg: &Config) -> Result<Outcome, CliError> {
    let obj = cfg.objective()?.build()?;
    let x = Point::from_vec(cfg.get_vec("classify.x")?);
    if x.len() != obj.dim() {
        return Err(CliError::config(format!(
            "classify.x has dimension {}, objective has {}",
            x.len(),
            obj.dim()
        )));
    }
    let class = classify_critical_point(obj.as_ref(), &x, cfg.get("run.grad_tol")?, cfg.get("run.eig_tol")?)?;
    let doc = serde_json::json!({
        "schema": "classify/1",
        "objective": obj.name(),
        "x": x.as_slice(),
        "class": class,
        "effective_config": echo(cfg),
    });
    Ok(Outcome {
        primary: to_json(&doc)? + "\n",
        extra: vec![],
        summary: vec![class.kind.as_str().to_string()],
        code: EXIT_OK,
    })
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn write_outputs(args: &CommonArgs, out: &Outcome) -> Result<(), CliError> {
    let io_err = |p: &Path, e: std::io::Error| CliError::with_code(EXIT_FAILURE, format!("cannot write {}: {e}", p.display()));
    match &args.out {
        Some(path) => {
            fs::write(path, &out.primary).map_err(|e| io_err(path, e))?;
            for (ext, text) in &out.extra {
                let p = sibling(path, ext);
                fs::write(&p, text).map_err(|e| io_err(&p, e))?;
            }
            let mut stdout = std::io::stdout().lock();
            for line in &out.summary {
                let _ = writeln!(stdout, "{line}");
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.primary.as_bytes());
            let mut stderr = std::io::stderr().lock();
            for line in &out.summary {
                let _ = writeln!(stderr, "{line}");
            }
        }
    }
    Ok(())
}

fn execute(command: &Command) -> Result<i32, CliError> {
    let (args, f): (&CommonArgs, fn(&Config) -> Result<Outcome, CliError>) = match command {
        Command::Run(a) => (a, cmd_run),
        Command::Sweep(a) => (a, cmd_sweep),
        Command::Pou(a) => (a, cmd_pou),
        Command::Verify(a) => (a, cmd_verify),
        Command::Classify(a) => (a, cmd_classify),
    };
    let cfg = args.effective_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallel)
        .build()
        .map_err(|e| CliError::with_code(EXIT_FAILURE, e.to_string()))?;
    let outcome = pool.install(|| f(&cfg))?;
    write_outputs(args, &outcome)?;
    Ok(outcome.code)
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
