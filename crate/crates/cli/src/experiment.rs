//! Seeded experiment execution: runs a config's repetitions, writes per-run
//! trace and checkpoint CSVs, and a summary.
//!
//! The summary CSV contains only deterministic quantities (so identical
//! configs produce byte-identical summaries); wall-clock timings go to a
//! separate `timing.csv`.

use crate::config::{ExperimentConfig, Method, ResolvedTarget};
use annr_core::baselines::{uniform_samples, DeferPartition};
use annr_core::engine::{nnr_predict, Engine};
use annr_core::spatial::Dataset;
use annr_core::testbed::protocol::ExternalProcess;
use annr_core::testbed::{mae, make_test_set, TestSet};
use annr_core::trace::{RunTrace, TraceRow};
use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

/// One repetition's outcome.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub trace: RunTrace,
    /// `(total evaluations, mae)` at each configured checkpoint, plus the end
    /// of the run.
    pub checkpoints: Vec<(usize, f64)>,
    pub mae: Option<f64>,
    pub evals: usize,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub method: Method,
    pub target_label: String,
    pub runs: Vec<RunOutcome>,
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub runtime_ms_mean: f64,
    pub test_set_hash: Option<String>,
}

/// The evaluation channel handed to method drivers.
enum Target {
    Builtin(annr_core::testbed::TargetFunction),
    External(ExternalProcess),
}

impl Target {
    fn eval_fn(&mut self) -> impl FnMut(&[f64]) -> Result<f64, String> + '_ {
        move |x: &[f64]| match self {
            Target::Builtin(t) => Ok(t.eval(x)),
            Target::External(p) => p.eval(x).map_err(|e| e.to_string()),
        }
    }
}

fn open_target(resolved: &ResolvedTarget) -> Result<Target> {
    match resolved {
        ResolvedTarget::Builtin(t) => Ok(Target::Builtin(t.clone())),
        ResolvedTarget::External {
            cmd,
            dim,
            timeout_s,
            ..
        } => {
            let mut command = Command::new(&cmd[0]);
            command.args(&cmd[1..]);
            let proc = ExternalProcess::spawn(command, *dim, Duration::from_secs_f64(*timeout_s))
                .map_err(|e| anyhow!("external evaluator: {e}"))?;
            Ok(Target::External(proc))
        }
    }
}

/// Stable identifier of the evaluation protocol: geometry only (mode, size,
/// seed, box, points), not truth values, so target variants sharing one
/// test-point layout stay comparable.
pub fn test_set_hash(config: &ExperimentConfig, points: &[Vec<f64>]) -> String {
    let mut h = Sha256::new();
    if let Some(spec) = &config.test_set {
        h.update(spec.mode.as_bytes());
        h.update(spec.size.to_le_bytes());
        h.update(spec.seed.to_le_bytes());
    }
    for p in points {
        for v in p {
            h.update(v.to_le_bytes());
        }
    }
    let digest = h.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn build_test_set(
    config: &ExperimentConfig,
    resolved: &ResolvedTarget,
    target: &mut Target,
) -> Result<Option<TestSet>> {
    let Some(spec) = &config.test_set else {
        return Ok(None);
    };
    let mode = spec.mode()?;
    match resolved {
        ResolvedTarget::Builtin(t) => Ok(Some(
            make_test_set(t, spec.size, mode, spec.seed).map_err(|e| anyhow!("{e}"))?,
        )),
        ResolvedTarget::External { bbox, .. } => {
            // Ground truth must come through the channel; these evaluations
            // are bookkeeping, not part of any run's budget.
            if mode != annr_core::testbed::TestSetMode::Uniform {
                bail!("external targets support only uniform test sets");
            }
            let points = uniform_samples(bbox, spec.size, spec.seed);
            let mut f = target.eval_fn();
            let mut values = Vec::with_capacity(points.len());
            for p in &points {
                values.push(f(p).map_err(|e| anyhow!("test-set evaluation failed: {e}"))?);
            }
            Ok(Some(TestSet {
                points,
                values,
                mode,
                seed: spec.seed,
            }))
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let out_dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let resolved = config.resolve_target()?;
    let test_set = {
        // Ground truth travels over its own channel, isolated from runs.
        let mut target = open_target(&resolved)?;
        build_test_set(config, &resolved, &mut target)?
    };
    if let Some(ts) = &test_set {
        write_atomic(&out_dir.join("test_set.csv"), |w| ts.write_csv(w))?;
    }

    let mut runs = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let seed = config.base_seed + rep as u64;
        // A fresh evaluator per repetition keeps failed runs isolated.
        let outcome = match open_target(&resolved)
            .and_then(|mut target| run_once(config, &resolved, &mut target, test_set.as_ref(), seed))
        {
            Ok(o) => o,
            Err(e) => RunOutcome {
                seed,
                trace: RunTrace::new(resolved.dim()),
                checkpoints: Vec::new(),
                mae: None,
                evals: 0,
                runtime_ms: 0.0,
                error: Some(e.to_string()),
            },
        };
        write_atomic(&out_dir.join(format!("run_{rep}_trace.csv")), |w| {
            outcome.trace.write_csv(w)
        })?;
        if !outcome.checkpoints.is_empty() {
            write_atomic(&out_dir.join(format!("run_{rep}_checkpoints.csv")), |w| {
                writeln!(w, "n,mae")?;
                for (n, m) in &outcome.checkpoints {
                    writeln!(w, "{n},{m}")?;
                }
                Ok(())
            })?;
        }
        if let Some(err) = &outcome.error {
            log::warn!("run {rep} (seed {seed}) failed: {err}");
        }
        runs.push(outcome);
    }

    let result = summarize(config, &resolved, runs, test_set.as_ref());
    write_summary(config, &out_dir, &result)?;
    Ok(result)
}

fn summarize(
    config: &ExperimentConfig,
    resolved: &ResolvedTarget,
    runs: Vec<RunOutcome>,
    test_set: Option<&TestSet>,
) -> ExperimentResult {
    let maes: Vec<f64> = runs
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| r.mae)
        .collect();
    let (mae_mean, mae_std) = if maes.is_empty() {
        (None, None)
    } else {
        let mean = maes.iter().sum::<f64>() / maes.len() as f64;
        let var = maes.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / maes.len() as f64;
        (Some(mean), Some(var.sqrt()))
    };
    let ok_runs = runs.iter().filter(|r| r.error.is_none()).count().max(1);
    let runtime_ms_mean = runs
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.runtime_ms)
        .sum::<f64>()
        / ok_runs as f64;
    ExperimentResult {
        method: config.method,
        target_label: resolved.label(&config.target),
        mae_mean,
        mae_std,
        runtime_ms_mean,
        test_set_hash: test_set.map(|ts| test_set_hash(config, &ts.points)),
        runs,
    }
}

fn write_summary(
    config: &ExperimentConfig,
    out_dir: &Path,
    result: &ExperimentResult,
) -> Result<()> {
    let failed = result.runs.iter().filter(|r| r.error.is_some()).count();
    write_atomic(&out_dir.join("summary.csv"), |w| {
        writeln!(
            w,
            "method,target,queries,repetitions,failed,mae_mean,mae_std,test_set_hash"
        )?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            result.method,
            result.target_label,
            config.queries.total,
            config.repetitions,
            failed,
            result.mae_mean.map_or(String::from(""), |v| v.to_string()),
            result.mae_std.map_or(String::from(""), |v| v.to_string()),
            result.test_set_hash.as_deref().unwrap_or(""),
        )
    })?;
    write_atomic(&out_dir.join("runs.csv"), |w| {
        writeln!(w, "rep,seed,evals,mae,status")?;
        for (rep, r) in result.runs.iter().enumerate() {
            writeln!(
                w,
                "{rep},{},{},{},{}",
                r.seed,
                r.evals,
                r.mae.map_or(String::from(""), |v| v.to_string()),
                r.error.as_deref().unwrap_or("ok"),
            )?;
        }
        Ok(())
    })?;
    // Wall-clock numbers live apart so the summary stays reproducible.
    write_atomic(&out_dir.join("timing.csv"), |w| {
        writeln!(w, "runtime_ms_mean,per_query_ms")?;
        let per_query = result.runtime_ms_mean / config.queries.total.max(1) as f64;
        writeln!(w, "{},{}", result.runtime_ms_mean, per_query)
    })?;
    Ok(())
}

fn run_once(
    config: &ExperimentConfig,
    resolved: &ResolvedTarget,
    target: &mut Target,
    test_set: Option<&TestSet>,
    seed: u64,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut checkpoints = Vec::new();
    let (trace, evals, mae_final, error) = match config.method {
        Method::Annr => run_annr(config, resolved, target, test_set, seed, &mut checkpoints)?,
        Method::Defer => run_defer(config, resolved, target, test_set, &mut checkpoints)?,
        Method::Nannr => run_nannr(config, resolved, target, test_set, seed, &mut checkpoints)?,
    };
    Ok(RunOutcome {
        seed,
        trace,
        checkpoints,
        mae: mae_final,
        evals,
        runtime_ms: started.elapsed().as_secs_f64() * 1e3,
        error,
    })
}

/// `(trace so far, evaluations spent, final MAE, mid-run failure)`; traces
/// survive evaluation failures so partial results stay inspectable.
type DriverOutput = (RunTrace, usize, Option<f64>, Option<String>);

fn run_annr(
    config: &ExperimentConfig,
    resolved: &ResolvedTarget,
    target: &mut Target,
    test_set: Option<&TestSet>,
    seed: u64,
    checkpoints: &mut Vec<(usize, f64)>,
) -> Result<DriverOutput> {
    let engine_config = config.engine_config(resolved, seed)?;
    let predicate = match resolved {
        ResolvedTarget::Builtin(t) if t.has_predicate() => {
            let t = t.clone();
            Some(Box::new(move |x: &[f64]| t.domain_ok(x)) as Box<dyn Fn(&[f64]) -> bool>)
        }
        _ => None,
    };
    let f = target.eval_fn();
    let mut engine = Engine::with_domain(engine_config, f, predicate)
        .map_err(|e| anyhow!("engine init: {e}"))?;
    let init = engine.init_evals();
    let mut error = None;
    while !engine.halted() {
        if let Err(e) = engine.step() {
            error = Some(format!("engine step: {e}"));
            break;
        }
        let total = init + engine.steps_taken();
        if config.checkpoints.contains(&total) {
            if let Some(ts) = test_set {
                checkpoints.push((total, mae(|x| engine.predict(x), ts)));
            }
        }
    }
    let total = init + engine.steps_taken();
    let mae_final = test_set.map(|ts| mae(|x| engine.predict(x), ts));
    if let (Some(m), false) = (mae_final, config.checkpoints.contains(&total)) {
        checkpoints.push((total, m));
    }
    Ok((engine.into_trace(), total, mae_final, error))
}

fn run_defer(
    config: &ExperimentConfig,
    resolved: &ResolvedTarget,
    target: &mut Target,
    test_set: Option<&TestSet>,
    checkpoints: &mut Vec<(usize, f64)>,
) -> Result<DriverOutput> {
    let mut f = target.eval_fn();
    let mut partition =
        DeferPartition::init(resolved.bbox(), &mut f).map_err(|e| anyhow!("{e}"))?;
    let mut trace = RunTrace::new(resolved.dim());
    let mut error = None;
    while partition.evals() + 2 <= config.queries.total {
        let step_start = Instant::now();
        let (queried, score) = match partition.step(&mut f) {
            Ok(r) => r,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let ms = step_start.elapsed().as_secs_f64() * 1e3;
        for (q, value) in queried {
            trace.push(TraceRow {
                t: trace.len(),
                point: q,
                value,
                score,
                clamped: false,
                pool_size: partition.cells().len(),
                ms,
            });
        }
        if config.checkpoints.contains(&partition.evals()) {
            if let Some(ts) = test_set {
                let m = mae(|x| partition.predict(x).unwrap_or(f64::NAN), ts);
                checkpoints.push((partition.evals(), m));
            }
        }
    }
    let mae_final = test_set.map(|ts| mae(|x| partition.predict(x).unwrap_or(f64::NAN), ts));
    if let (Some(m), false) = (mae_final, config.checkpoints.contains(&partition.evals())) {
        checkpoints.push((partition.evals(), m));
    }
    Ok((trace, partition.evals(), mae_final, error))
}

fn run_nannr(
    config: &ExperimentConfig,
    resolved: &ResolvedTarget,
    target: &mut Target,
    test_set: Option<&TestSet>,
    seed: u64,
    checkpoints: &mut Vec<(usize, f64)>,
) -> Result<DriverOutput> {
    let mut f = target.eval_fn();
    let points = uniform_samples(resolved.bbox(), config.queries.total, seed);
    let mut trace = RunTrace::new(resolved.dim());
    let mut data: Option<Dataset> = None;
    let mut error = None;
    for (i, p) in points.into_iter().enumerate() {
        let step_start = Instant::now();
        let value = match f(&p) {
            Ok(v) => v,
            Err(e) => {
                error = Some(format!("evaluation failed: {e}"));
                break;
            }
        };
        match &mut data {
            None => data = Some(Dataset::build(vec![p.clone()], vec![value])?),
            Some(d) => {
                d.insert(p.clone(), value)?;
            }
        }
        trace.push(TraceRow {
            t: i,
            point: p,
            value,
            score: 0.0,
            clamped: false,
            pool_size: 0,
            ms: step_start.elapsed().as_secs_f64() * 1e3,
        });
        if config.checkpoints.contains(&(i + 1)) {
            if let (Some(ts), Some(d)) = (test_set, &data) {
                checkpoints.push((i + 1, mae(|x| nnr_predict(d, x), ts)));
            }
        }
    }
    let Some(data) = data else {
        return Ok((trace, 0, None, error));
    };
    let mae_final = test_set.map(|ts| mae(|x| nnr_predict(&data, x), ts));
    if let (Some(m), false) = (mae_final, config.checkpoints.contains(&data.len())) {
        checkpoints.push((data.len(), m));
    }
    Ok((trace, data.len(), mae_final, error))
}

/// Write-then-rename so partial files never appear under the final name.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let tmp = path.with_extension("tmp");
    {
        let mut file =
            std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        write(&mut file).with_context(|| format!("writing {}", tmp.display()))?;
        file.flush()?;
    }
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}
