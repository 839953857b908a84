//! Plot-data exports: query scatter and norm histograms from a trace CSV,
//! MAE-vs-N curves aggregated from an experiment directory's checkpoint
//! files.

use crate::experiment::write_atomic;
use annr_core::testbed::norm_histogram;
use annr_core::trace::RunTrace;
use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

pub fn export_scatter(trace_path: &Path, out: &Path) -> Result<()> {
    let trace = read_trace(trace_path)?;
    if trace.dim != 2 {
        bail!(
            "scatter export needs a 2-D trace, got dimension {}",
            trace.dim
        );
    }
    if trace.is_empty() {
        bail!("trace is empty");
    }
    write_atomic(out, |w| {
        writeln!(w, "x_0,x_1,t")?;
        for r in &trace.rows {
            writeln!(w, "{},{},{}", r.point[0], r.point[1], r.t)?;
        }
        Ok(())
    })
}

pub fn export_hist(trace_path: &Path, bins: usize, out: &Path) -> Result<()> {
    let trace = read_trace(trace_path)?;
    if trace.is_empty() {
        bail!("trace is empty");
    }
    let points: Vec<Vec<f64>> = trace.rows.iter().map(|r| r.point.clone()).collect();
    let hist = norm_histogram(&points, bins);
    write_atomic(out, |w| {
        writeln!(w, "bin_lo,bin_hi,count,freq")?;
        for i in 0..hist.counts.len() {
            writeln!(
                w,
                "{},{},{},{}",
                hist.edges[i],
                hist.edges[i + 1],
                hist.counts[i],
                hist.freq[i]
            )?;
        }
        Ok(())
    })
}

/// Aggregates `run_*_checkpoints.csv` under an experiment directory into one
/// `n, mae_mean, mae_std, runs` curve.
pub fn export_curve(experiment_dir: &Path, out: &Path) -> Result<()> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut files = 0;
    for entry in std::fs::read_dir(experiment_dir)
        .with_context(|| format!("reading {}", experiment_dir.display()))?
    {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if !(name.starts_with("run_") && name.ends_with("_checkpoints.csv")) {
            continue;
        }
        files += 1;
        let text = std::fs::read_to_string(&path)?;
        for line in text.lines().skip(1) {
            let Some((n, m)) = line.split_once(',') else {
                continue;
            };
            let n: usize = n.parse().context("bad checkpoint count")?;
            let m: f64 = m.parse().context("bad checkpoint mae")?;
            by_n.entry(n).or_default().push(m);
        }
    }
    if files == 0 {
        bail!(
            "no run_*_checkpoints.csv under {} (configure `checkpoints` in the experiment)",
            experiment_dir.display()
        );
    }
    write_atomic(out, |w| {
        writeln!(w, "n,mae_mean,mae_std,runs")?;
        for (n, maes) in &by_n {
            let mean = maes.iter().sum::<f64>() / maes.len() as f64;
            let var = maes.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / maes.len() as f64;
            writeln!(w, "{n},{mean},{},{}", var.sqrt(), maes.len())?;
        }
        Ok(())
    })
}

fn read_trace(path: &Path) -> Result<RunTrace> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    RunTrace::read_csv(std::io::BufReader::new(file))
        .with_context(|| format!("parsing trace {}", path.display()))
}
