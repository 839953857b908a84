//! Side-by-side method comparison over a shared test set.
//!
//! Runs every config, refuses mismatched test-set hashes, and emits both a
//! long-form CSV and an aligned text pivot (methods as rows, target variants
//! as columns) for sweep-style studies.

use crate::config::ExperimentConfig;
use crate::experiment::{run_experiment, write_atomic, ExperimentResult};
use anyhow::{bail, Context, Result};
use std::path::Path;

#[derive(Debug)]
pub struct ComparisonRow {
    pub method: String,
    pub target: String,
    pub mae_mean: Option<f64>,
    pub mae_std: Option<f64>,
    pub runtime_ms: f64,
    pub test_set_hash: Option<String>,
}

pub fn compare(configs: &[ExperimentConfig], out_dir: &Path) -> Result<Vec<ComparisonRow>> {
    if configs.is_empty() {
        bail!("need at least one config");
    }
    // All configs must share a test-set layout; the geometry hash is the
    // arbiter. Target parameters may vary (that is the point of sweeps).
    let mut rows = Vec::with_capacity(configs.len());
    let mut shared_hash: Option<String> = None;
    for config in configs {
        let result: ExperimentResult = run_experiment(config)
            .with_context(|| format!("running config for {}", config.output_dir))?;
        if let Some(h) = &result.test_set_hash {
            match &shared_hash {
                None => shared_hash = Some(h.clone()),
                Some(prev) if prev != h => bail!(
                    "test-set hash mismatch: {prev} vs {h} ({}); comparisons need one shared \
                     test-set spec",
                    result.target_label
                ),
                _ => {}
            }
        }
        rows.push(ComparisonRow {
            method: result.method.to_string(),
            target: result.target_label.clone(),
            mae_mean: result.mae_mean,
            mae_std: result.mae_std,
            runtime_ms: result.runtime_ms_mean,
            test_set_hash: result.test_set_hash.clone(),
        });
    }

    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("comparison.csv"), |w| {
        writeln!(w, "method,target,mae_mean,mae_std,runtime_ms,test_set_hash")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.method,
                r.target,
                r.mae_mean.map_or(String::new(), |v| v.to_string()),
                r.mae_std.map_or(String::new(), |v| v.to_string()),
                r.runtime_ms,
                r.test_set_hash.as_deref().unwrap_or(""),
            )?;
        }
        Ok(())
    })?;
    Ok(rows)
}

/// Aligned text table: methods down, target variants across.
pub fn render_table(rows: &[ComparisonRow]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut targets: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        if !targets.contains(&r.target.as_str()) {
            targets.push(&r.target);
        }
    }
    let cell = |m: &str, t: &str| -> String {
        rows.iter()
            .find(|r| r.method == m && r.target == t)
            .map(|r| match (r.mae_mean, r.mae_std) {
                (Some(mean), Some(std)) if std > 0.0 => format!("{mean:.5} ± {std:.5}"),
                (Some(mean), _) => format!("{mean:.5}"),
                _ => "-".to_string(),
            })
            .unwrap_or_else(|| "-".to_string())
    };
    let mut widths: Vec<usize> = targets.iter().map(|t| t.len()).collect();
    for (j, t) in targets.iter().enumerate() {
        for m in &methods {
            widths[j] = widths[j].max(cell(m, t).len());
        }
    }
    let method_w = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);

    let mut out = String::new();
    out.push_str(&format!("{:<method_w$}", "method"));
    for (j, t) in targets.iter().enumerate() {
        out.push_str(&format!("  {:>w$}", t, w = widths[j]));
    }
    out.push('\n');
    for m in &methods {
        out.push_str(&format!("{m:<method_w$}"));
        for (j, t) in targets.iter().enumerate() {
            out.push_str(&format!("  {:>w$}", cell(m, t), w = widths[j]));
        }
        out.push('\n');
    }
    out
}
