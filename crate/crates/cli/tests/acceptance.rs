//! Acceptance gate. Each criterion prints one PASS/FAIL line with its
//! elapsed time; the process exits non-zero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use btgd_core::analysis::{descent_lemma_check, verify_armijo_trace, CriticalPointKind};
use btgd_core::experiments::{sweep, ObjectiveSpec, ParamSource, RuleSpec, SweepConfig, SweepReport};
use btgd_core::sampling::{rng_for, uniform_in_box};
use btgd_core::smoothrate::{
    build_covering, build_smooth_rate, verify_smooth_rate, BoxBounds, CheckOptions, CoveringOptions, DampingMode,
    SmoothRateOptions,
};
use btgd_core::verify::{armijo_suite, corpus_instances, delta_hat_suite, gradient_suite};
use btgd_core::{corpus_get, run, BacktrackParams, Params, Point, Rule, RunConfig, StopReason};

const SEED: u64 = 20_260_101;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn armijo_maximality() -> Outcome {
    let r = armijo_suite(10_000, SEED).map_err(|e| e.to_string())?;
    check(
        r.passed && r.samples == 10_000,
        format!("{} cases, all maximal", r.samples),
        r.summary_line(),
    )
}

fn delta_hat_oracle() -> Outcome {
    let r = delta_hat_suite(100_000, SEED).map_err(|e| e.to_string())?;
    check(
        r.passed && r.samples == 100_000,
        format!("{} inputs, exact match", r.samples),
        r.summary_line(),
    )
}

fn monotone_descent() -> Outcome {
    let objs = corpus_instances(SEED).map_err(|e| e.to_string())?;
    let rules = [
        Rule::Backtracking,
        Rule::TwoWay,
        Rule::GdNew,
        Rule::MomentumBt { gamma: 0.9 },
        Rule::NagBt { gamma: 0.5 },
    ];
    let rc = RunConfig {
        max_iters: 2000,
        ..RunConfig::default()
    };
    let mut rng = rng_for(SEED, 3);
    let mut steps = 0usize;
    for i in 0..1000 {
        let obj = objs[i % objs.len()].as_ref();
        let rule = &rules[(i / objs.len()) % rules.len()];
        let p = BacktrackParams {
            delta0: rng.random_range(0.1..=1.0),
            alpha: rng.random_range(0.1..=0.9),
            beta: rng.random_range(0.3..=0.7),
            max_halvings: 60,
        };
        let k = obj.dim();
        let x0 = loop {
            let x = uniform_in_box(&mut rng, &vec![-2.0; k], &vec![2.0; k]);
            if obj.nonsmooth_distance(&x) > 0.0 {
                break x;
            }
        };
        let trace = run(obj, &x0, rule, &p, &rc).map_err(|e| format!("{} {}: {e}", obj.name(), rule.selector()))?;
        let coeff = trace.descent_coefficient.expect("backtracking family");
        let bad = verify_armijo_trace(&trace, coeff);
        if !bad.is_empty() {
            return Err(format!(
                "{} {} from {:?}: violations at {:?}",
                obj.name(),
                rule.selector(),
                x0.as_slice(),
                bad
            ));
        }
        steps += trace.records.len().saturating_sub(1);
    }
    Ok(format!("1000 traces, {steps} steps, no violations"))
}

fn double_well_sweep(rule: &str, random_params: bool) -> Result<SweepReport, String> {
    let mut cfg = SweepConfig::new(
        ObjectiveSpec::new("double_well"),
        RuleSpec::new(rule),
        vec![-2.0, -2.0],
        vec![2.0, 2.0],
        1000,
        42,
    );
    if random_params {
        cfg.params = ParamSource::Random { max_halvings: 60 };
    }
    sweep(&cfg).map_err(|e| e.to_string())
}

fn saddle_avoidance() -> Outcome {
    let mut parts = Vec::new();
    for (rule, random) in [("backtracking", false), ("gd_new", false), ("gd_new", true)] {
        let t = Instant::now();
        let r = double_well_sweep(rule, random)?;
        let rule = if random { format!("{rule} (random params)") } else { rule.to_string() };
        let elapsed = t.elapsed();
        let far = r
            .runs
            .iter()
            .filter(|s| s.converged())
            .filter(|s| ((s.x[0].abs() - 1.0).powi(2) + s.x[1].powi(2)).sqrt() > 1e-4)
            .count();
        if r.saddle_hits != 0 || far != 0 || r.converged == 0 || elapsed > Duration::from_secs(60) {
            return Err(format!(
                "{rule}: saddle_hits={} far_terminals={far} converged={} in {elapsed:.2?}",
                r.saddle_hits, r.converged
            ));
        }
        parts.push(format!("{rule}: 0/{} saddle hits, {} converged", r.n_runs, r.converged));
    }
    Ok(parts.join("; "))
}

fn example1_proposition() -> Outcome {
    let cfg = SweepConfig::new(
        ObjectiveSpec::new("example1"),
        RuleSpec::new("gd_new"),
        vec![0.5, 0.5],
        vec![2.0, 2.0],
        500,
        42,
    );
    let r = sweep(&cfg).map_err(|e| e.to_string())?;
    let bad = r
        .runs
        .iter()
        .filter(|s| s.converged() && s.terminal_class != Some(CriticalPointKind::LocalMinimumLike))
        .count();
    check(
        bad == 0 && r.converged > 0,
        format!("{} of 500 converged, all LocalMinimumLike, {} basin(s)", r.converged, r.basins.len()),
        format!("{bad} converged runs not LocalMinimumLike; counts {:?}", r.counts),
    )
}

fn smooth_rate_construction() -> Outcome {
    let cases = [("quadratic_form", -1.0, 1.0, 0.5), ("example1", 0.5, 2.0, 0.25)];
    let mut lines = Vec::new();
    for (name, lo, hi, spacing) in cases {
        let obj = corpus_get(name, &Params::new()).map_err(|e| e.to_string())?;
        let b = BoxBounds::new(vec![lo, lo], vec![hi, hi]).map_err(|e| e.to_string())?;
        let cov = build_covering(obj.as_ref(), &b, spacing, &CoveringOptions::default()).map_err(|e| e.to_string())?;
        for mode in [DampingMode::Faithful, DampingMode::Practical] {
            let opts = SmoothRateOptions {
                mode,
                seed: SEED,
                ..SmoothRateOptions::default()
            };
            let sr = build_smooth_rate(obj.as_ref(), &cov, &opts).map_err(|e| e.to_string())?;
            let checks = verify_smooth_rate(
                obj.as_ref(),
                &sr,
                &CheckOptions {
                    seed: SEED,
                    ..CheckOptions::default()
                },
            )
            .map_err(|e| e.to_string())?;
            for c in &checks {
                if !c.passed {
                    return Err(format!("{name} {}: {}", mode.as_str(), c.summary_line()));
                }
            }
            let inj = checks.iter().find(|c| c.name == "injectivity").unwrap();
            lines.push(format!("{name}/{}: min ratio {:.3}", mode.as_str(), inj.worst));
        }
    }
    Ok(lines.join("; "))
}

fn descent_lemma() -> Outcome {
    let mut rng = rng_for(SEED, 7);
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for &l in &[0.01, 0.5, 1.0, 3.0, 10.0, 250.0] {
        for dim in 1..=4 {
            let mut params = Params::new();
            params.insert("dim".into(), dim as f64);
            params.insert("m_0_0".into(), l);
            for j in 1..dim {
                params.insert(format!("m_{j}_{j}"), l * rng.random_range(-1.0..1.0));
            }
            let obj = corpus_get("quadratic_form", &params).map_err(|e| e.to_string())?;
            let deltas: Vec<f64> = (1..=20).map(|m| m as f64 / (20.0 * l)).collect();
            let c = rng.random_range(0.1..2.0);
            let mut top = Point::zeros(dim);
            top[0] = c;
            for e in descent_lemma_check(obj.as_ref(), &top, l, &deltas).map_err(|e| e.to_string())? {
                // Closed form along the top eigenvector.
                let want = 0.5 * l * c * c * ((1.0 - e.delta * l).powi(2) - 1.0);
                let rel_eq = (e.lhs - e.bound).abs() / e.bound.abs();
                let rel_cf = (e.lhs - want).abs() / want.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(rel_eq);
                if !e.holds || rel_eq > 1e-10 || rel_cf > 1e-10 {
                    return Err(format!("L={l} dim={dim} δ={}: lhs {} bound {} closed form {want}", e.delta, e.lhs, e.bound));
                }
                cases += 1;
            }
            let x = uniform_in_box(&mut rng, &vec![-2.0; dim], &vec![2.0; dim]);
            for e in descent_lemma_check(obj.as_ref(), &x, l, &deltas).map_err(|e| e.to_string())? {
                if !e.holds {
                    return Err(format!("L={l} dim={dim} δ={} at {:?}", e.delta, x.as_slice()));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases, worst equality deviation {worst:.2e}"))
}

fn standard_gd_contrast() -> Outcome {
    let obj = corpus_get("power_abs", &Params::new()).map_err(|e| e.to_string())?;
    let p = BacktrackParams::default();
    let rc = RunConfig {
        max_iters: 10_000,
        ..RunConfig::default()
    };
    let x0 = Point::from_vec(vec![1.0]);
    let closest = |rule: &Rule| -> Result<(f64, StopReason), String> {
        let t = run(obj.as_ref(), &x0, rule, &p, &rc).map_err(|e| e.to_string())?;
        let m = t.records.iter().map(|r| r.x[0].abs()).fold(f64::INFINITY, f64::min);
        Ok((m, t.stop_reason))
    };
    let (std_min, _) = closest(&Rule::Standard)?;
    let (bt_min, bt_stop) = closest(&Rule::Backtracking)?;
    check(
        std_min >= 1e-3 && bt_min < 1e-3 && bt_stop == StopReason::GradientTolerance,
        format!("standard min |x| = {std_min:.3e}; backtracking min |x| = {bt_min:.3e} ({})", bt_stop.as_str()),
        format!("standard min |x| = {std_min:.3e}, backtracking min |x| = {bt_min:.3e}"),
    )
}

fn derivative_consistency() -> Outcome {
    let (g, h) = gradient_suite(1000, SEED).map_err(|e| e.to_string())?;
    check(
        g.passed && h.passed,
        format!(
            "gradient worst {:.2e} over {}, Hessian worst {:.2e} over {}",
            g.worst, g.samples, h.worst, h.samples
        ),
        format!("{} | {}", g.summary_line(), h.summary_line()),
    )
}

fn sweep_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("sweep{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_btgd"))
            .args(["sweep", "--seed", "42", "--parallel", threads, "--out"])
            .arg(&out)
            .args(["sweep.lower=-2,-2", "sweep.upper=2,2", "sweep.n_runs=1000", "rule.name=two_way"])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("btgd sweep exited with {}", status.status));
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    check(
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!("{} bytes identical across runs (1 and 4 threads)", outputs[0].len()),
        "sweep reports differ".into(),
    )
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("armijo maximality", 30, armijo_maximality),
        ("delta-hat oracle equivalence", 30, delta_hat_oracle),
        ("monotone Armijo descent", 120, monotone_descent),
        ("saddle avoidance on double_well", 120, saddle_avoidance),
        ("example1 terminals are local minima", 120, example1_proposition),
        ("smooth step-size construction", 180, smooth_rate_construction),
        ("descent lemma equality", 5, descent_lemma),
        ("standard GD contrast on |x|^1.5", 5, standard_gd_contrast),
        ("gradient/Hessian consistency", 60, derivative_consistency),
        ("sweep determinism", 60, sweep_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = f();
        let elapsed = t.elapsed();
        let over = elapsed > Duration::from_secs(*limit);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; exceeded {limit}s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} [{:>2}] {name} ({elapsed:.2?}): {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
