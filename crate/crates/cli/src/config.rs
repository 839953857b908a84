//! Experiment configuration: a TOML file with one section per concern, plus
//! `key=value` command-line overrides on dotted paths.
//!
//! ```toml
//! method = "annr"              # annr | defer | nannr
//! output_dir = "results/spiral-annr"
//! repetitions = 10
//! base_seed = 0
//! checkpoints = [100, 200, 400]
//!
//! [target]
//! name = "spiral"              # builtin name, or "external"
//! a = 0.08                     # target parameters, inline
//!
//! [queries]
//! total = 400                  # evaluation budget per run, all methods
//!
//! [engine]                     # annr only
//! lambda = "auto"              # or a number
//! epsilon = 1e-6
//! walk_steps = 100
//! alpha0_deg = 89.0            # or "off"
//! n_init = 30
//! include_corners = true
//!
//! [test_set]
//! mode = "grid"                # grid | uniform
//! size = 10000
//! seed = 7
//! ```
//!
//! External targets replace the builtin parameters with `cmd = [..]`,
//! `dim`, `box_lo`/`box_hi` and an optional `timeout_s`.

use annr_core::engine::{EngineConfig, Lambda};
use annr_core::geometry::BoundingBox;
use annr_core::testbed::{builtin, TargetFunction, TestSetMode};
use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Annr,
    Defer,
    Nannr,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Annr => "annr",
            Method::Defer => "defer",
            Method::Nannr => "nannr",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub output_dir: String,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Evaluation counts at which to checkpoint the MAE.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    pub target: TargetSpec,
    pub queries: QueriesSpec,
    #[serde(default)]
    pub engine: EngineSpec,
    pub test_set: Option<TestSetSpec>,
}

fn default_repetitions() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
pub struct QueriesSpec {
    /// Total function evaluations per run, initialization included.
    pub total: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    /// External evaluator command line; required iff `name == "external"`.
    pub cmd: Option<Vec<String>>,
    pub dim: Option<usize>,
    pub box_lo: Option<Vec<f64>>,
    pub box_hi: Option<Vec<f64>>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Builtin target parameters (everything else in the section).
    #[serde(flatten)]
    pub params: BTreeMap<String, toml::Value>,
}

fn default_timeout() -> f64 {
    30.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    #[serde(default = "default_lambda")]
    pub lambda: toml::Value,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_walk_steps")]
    pub walk_steps: usize,
    #[serde(default = "default_alpha0")]
    pub alpha0_deg: toml::Value,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    #[serde(default = "default_corners")]
    pub include_corners: bool,
}

impl Default for EngineSpec {
    fn default() -> Self {
        Self {
            lambda: default_lambda(),
            epsilon: default_epsilon(),
            walk_steps: default_walk_steps(),
            alpha0_deg: default_alpha0(),
            n_init: default_n_init(),
            include_corners: default_corners(),
        }
    }
}

fn default_lambda() -> toml::Value {
    toml::Value::String("auto".into())
}
fn default_epsilon() -> f64 {
    1e-9
}
fn default_walk_steps() -> usize {
    100
}
fn default_alpha0() -> toml::Value {
    toml::Value::Float(89.0)
}
fn default_n_init() -> usize {
    10
}
fn default_corners() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSetSpec {
    pub mode: String,
    pub size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl TestSetSpec {
    pub fn mode(&self) -> Result<TestSetMode> {
        match self.mode.as_str() {
            "grid" => Ok(TestSetMode::Grid),
            "uniform" => Ok(TestSetMode::Uniform),
            other => bail!("unknown test set mode '{other}' (grid | uniform)"),
        }
    }
}

/// How the target is evaluated: a builtin closed form, or a subprocess.
pub enum ResolvedTarget {
    Builtin(TargetFunction),
    External {
        cmd: Vec<String>,
        dim: usize,
        bbox: BoundingBox,
        timeout_s: f64,
    },
}

impl ResolvedTarget {
    pub fn dim(&self) -> usize {
        match self {
            ResolvedTarget::Builtin(t) => t.dim,
            ResolvedTarget::External { dim, .. } => *dim,
        }
    }

    pub fn bbox(&self) -> &BoundingBox {
        match self {
            ResolvedTarget::Builtin(t) => &t.bbox,
            ResolvedTarget::External { bbox, .. } => bbox,
        }
    }

    /// Compact label for tables, e.g. `ellipse(angle_deg=30)`.
    pub fn label(&self, spec: &TargetSpec) -> String {
        match self {
            ResolvedTarget::Builtin(t) => {
                if spec.params.is_empty() {
                    t.name.clone()
                } else {
                    let params: Vec<String> = spec
                        .params
                        .iter()
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect();
                    format!("{}({})", t.name, params.join(","))
                }
            }
            ResolvedTarget::External { cmd, .. } => format!("external({})", cmd.join(" ")),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut value: toml::Value = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let config: ExperimentConfig = value
            .try_into()
            .with_context(|| format!("invalid config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            bail!("repetitions must be at least 1");
        }
        if self.queries.total < 1 {
            bail!("queries.total must be at least 1");
        }
        let target = self.resolve_target()?;
        if let Some(ts) = &self.test_set {
            ts.mode()?;
            if ts.size < 1 {
                bail!("test_set.size must be at least 1");
            }
        }
        if self.method == Method::Annr {
            self.lambda()?;
            self.alpha0_deg()?;
            self.annr_budget(&target)?;
        }
        Ok(())
    }

    pub fn resolve_target(&self) -> Result<ResolvedTarget> {
        let spec = &self.target;
        if spec.name == "external" {
            let cmd = spec
                .cmd
                .clone()
                .ok_or_else(|| anyhow!("external target requires cmd"))?;
            if cmd.is_empty() {
                bail!("external target cmd must not be empty");
            }
            let dim = spec
                .dim
                .ok_or_else(|| anyhow!("external target requires dim"))?;
            let (lo, hi) = match (&spec.box_lo, &spec.box_hi) {
                (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
                _ => bail!("external target requires box_lo and box_hi"),
            };
            let bbox = BoundingBox::new(lo, hi).map_err(|e| anyhow!("invalid box: {e}"))?;
            if bbox.dim() != dim {
                bail!("box dimension {} does not match dim {dim}", bbox.dim());
            }
            return Ok(ResolvedTarget::External {
                cmd,
                dim,
                bbox,
                timeout_s: spec.timeout_s,
            });
        }

        let mut params: BTreeMap<String, f64> = BTreeMap::new();
        for (k, v) in &spec.params {
            let num = v
                .as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| anyhow!("target parameter '{k}' must be numeric"))?;
            params.insert(k.clone(), num);
        }
        let mut target = builtin(&spec.name, &params).map_err(|e| anyhow!("{e}"))?;
        match (&spec.box_lo, &spec.box_hi) {
            (Some(lo), Some(hi)) => {
                target.bbox = BoundingBox::new(lo.clone(), hi.clone())
                    .map_err(|e| anyhow!("invalid box: {e}"))?;
                if target.bbox.dim() != target.dim {
                    bail!("box override dimension mismatch");
                }
            }
            (None, None) => {}
            _ => bail!("box_lo and box_hi must be given together"),
        }
        Ok(ResolvedTarget::Builtin(target))
    }

    pub fn lambda(&self) -> Result<Lambda> {
        match &self.engine.lambda {
            toml::Value::String(s) if s == "auto" => Ok(Lambda::Auto),
            toml::Value::Float(v) => Ok(Lambda::Fixed(*v)),
            toml::Value::Integer(v) => Ok(Lambda::Fixed(*v as f64)),
            other => bail!("engine.lambda must be a number or \"auto\", got {other}"),
        }
    }

    pub fn alpha0_deg(&self) -> Result<Option<f64>> {
        match &self.engine.alpha0_deg {
            toml::Value::String(s) if s == "off" => Ok(None),
            toml::Value::Float(v) => Ok(Some(*v)),
            toml::Value::Integer(v) => Ok(Some(*v as f64)),
            other => bail!("engine.alpha0_deg must be a number or \"off\", got {other}"),
        }
    }

    /// Initialization evaluations an ANNR run will spend, accounting for
    /// domain-filtered corners; the step budget is what remains of the total.
    pub fn annr_budget(&self, target: &ResolvedTarget) -> Result<(usize, usize)> {
        let corners = if self.engine.include_corners {
            match target {
                ResolvedTarget::Builtin(t) if t.has_predicate() => {
                    t.bbox.corners().iter().filter(|c| t.domain_ok(c)).count()
                }
                _ => 1usize << target.dim(),
            }
        } else {
            0
        };
        let init = self.engine.n_init + corners;
        if init + 1 > self.queries.total {
            bail!(
                "queries.total = {} cannot cover {init} initialization evaluations plus one step",
                self.queries.total
            );
        }
        Ok((init, self.queries.total - init))
    }

    pub fn engine_config(&self, target: &ResolvedTarget, seed: u64) -> Result<EngineConfig> {
        let (_, budget) = self.annr_budget(target)?;
        Ok(EngineConfig {
            dim: target.dim(),
            bbox: target.bbox().clone(),
            lambda: self.lambda()?,
            epsilon: self.engine.epsilon,
            budget,
            walk_steps: self.engine.walk_steps,
            alpha0_deg: self.alpha0_deg()?,
            n_init: self.engine.n_init,
            include_corners: self.engine.include_corners,
            seed,
        })
    }
}

/// Applies `path.to.key=value`; the value is parsed as a TOML literal, with
/// a bare-string fallback.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override '{spec}' is not key=value"))?;
    let parsed: toml::Value = match format!("x = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("x").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("override path '{path}' crosses a non-table"))?
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| anyhow!("override path '{path}' crosses a non-table"))?
        .insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
