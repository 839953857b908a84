//! Ground-truth target functions, test sets and evaluation metrics.
//!
//! Built-in targets cover the study functions: a normalized Gaussian bump, an
//! Archimedean spiral band indicator, a rotatable ellipse indicator, the unit
//! ball indicator in arbitrary dimension, and a distance function restricted
//! to a lens-shaped domain. Expensive external functions are reached through
//! the line protocol in [`protocol`].

pub mod protocol;

use crate::geometry::{dist, BoundingBox, Point};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone)]
enum Kind {
    /// `(2 pi sigma^2)^(-m/2) exp(-|x|^2 / (2 sigma^2))`, integrating to 1
    /// over all of R^m.
    Gaussian { sigma2: f64 },
    /// Indicator of the band `|r - a theta| < w`, `theta in [0, theta_max]`,
    /// in polar coordinates.
    Spiral { a: f64, w: f64, theta_max: f64 },
    /// Indicator of `x^2 + 4 y^2 <= 1` with the domain rotated by `angle`.
    Ellipse { angle: f64 },
    /// Indicator of the unit ball.
    Ball,
    /// `|x|` restricted to the intersection of two discs of radius 5
    /// centered at (-3, -3) and (4, 4).
    Lens,
}

/// A deterministic ground-truth function on a box, with an optional domain
/// predicate for targets defined on a strict subset of the box.
#[derive(Debug, Clone)]
pub struct TargetFunction {
    pub name: String,
    pub dim: usize,
    pub bbox: BoundingBox,
    kind: Kind,
}

const LENS_CENTERS: [[f64; 2]; 2] = [[-3.0, -3.0], [4.0, 4.0]];
const LENS_RADIUS: f64 = 5.0;

impl TargetFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Gaussian { sigma2 } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                let norm = (TAU * sigma2).powf(-(self.dim as f64) / 2.0);
                norm * (-n2 / (2.0 * sigma2)).exp()
            }
            Kind::Spiral { a, w, theta_max } => {
                let r = x[0].hypot(x[1]);
                let mut phi = x[1].atan2(x[0]);
                if phi < 0.0 {
                    phi += TAU;
                }
                let mut theta = phi;
                while theta <= *theta_max {
                    if (r - a * theta).abs() < *w {
                        return 1.0;
                    }
                    theta += TAU;
                }
                0.0
            }
            Kind::Ellipse { angle } => {
                // Evaluating the rotated target is evaluating the base
                // indicator at the back-rotated input.
                let (s, c) = angle.sin_cos();
                let u = c * x[0] + s * x[1];
                let v = -s * x[0] + c * x[1];
                f64::from(u * u + 4.0 * v * v <= 1.0)
            }
            Kind::Ball => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                f64::from(n2 <= 1.0)
            }
            Kind::Lens => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Whether `x` lies in the target's domain. Total targets accept the
    /// whole box.
    pub fn domain_ok(&self, x: &[f64]) -> bool {
        match &self.kind {
            Kind::Lens => LENS_CENTERS.iter().all(|c| dist(x, c) <= LENS_RADIUS),
            _ => true,
        }
    }

    pub fn has_predicate(&self) -> bool {
        matches!(self.kind, Kind::Lens)
    }
}

/// Constructs a built-in target by name. Recognized names and parameters:
///
/// - `gaussian` — `sigma2` (default 0.1), `dim` (default 2); box `[-1,1]^m`
/// - `spiral` — `a` (0.08), `w` (0.06), `theta_max` (6 pi); box `[-1,1]^2`
/// - `ellipse` — `angle_deg` (0); box `[-1,1]^2`
/// - `ball` — `dim` (6); box `[-2,2]^m`
/// - `lens` — no parameters; box `[0,1]^2`
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<TargetFunction, TestbedError> {
    let cfg = |msg: String| TestbedError::Config(msg);
    let mut allowed: Vec<&str> = Vec::new();
    let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);

    let (kind, dim, bbox) = match name {
        "gaussian" => {
            allowed.extend(["sigma2", "dim"]);
            let sigma2 = get("sigma2", 0.1);
            if sigma2 <= 0.0 {
                return Err(cfg(format!("sigma2 {sigma2} must be positive")));
            }
            let dim = get("dim", 2.0) as usize;
            (
                Kind::Gaussian { sigma2 },
                dim,
                BoundingBox::cube(dim, -1.0, 1.0),
            )
        }
        "spiral" => {
            allowed.extend(["a", "w", "theta_max"]);
            let a = get("a", 0.08);
            let w = get("w", 0.06);
            let theta_max = get("theta_max", 6.0 * PI);
            if a <= 0.0 || w <= 0.0 || theta_max <= 0.0 {
                return Err(cfg("spiral parameters must be positive".into()));
            }
            (
                Kind::Spiral { a, w, theta_max },
                2,
                BoundingBox::cube(2, -1.0, 1.0),
            )
        }
        "ellipse" => {
            allowed.push("angle_deg");
            let angle = get("angle_deg", 0.0).to_radians();
            (Kind::Ellipse { angle }, 2, BoundingBox::cube(2, -1.0, 1.0))
        }
        "ball" => {
            allowed.push("dim");
            let dim = get("dim", 6.0) as usize;
            (Kind::Ball, dim, BoundingBox::cube(dim, -2.0, 2.0))
        }
        "lens" => (Kind::Lens, 2, BoundingBox::cube(2, 0.0, 1.0)),
        other => return Err(cfg(format!("unknown target function '{other}'"))),
    };
    if let Some(unknown) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(cfg(format!(
            "unknown parameter '{unknown}' for target '{name}'"
        )));
    }
    if dim < 1 {
        return Err(cfg("dimension must be at least 1".into()));
    }
    let bbox = bbox.map_err(|e| cfg(e.to_string()))?;
    Ok(TargetFunction {
        name: name.to_string(),
        dim,
        bbox,
        kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestSetMode {
    /// Endpoint-inclusive lattice; two-dimensional targets only.
    Grid,
    Uniform,
}

/// Held-out evaluation points with attached ground truth.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub mode: TestSetMode,
    pub seed: u64,
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the `x0,..,x{m-1},f` CSV with shortest round-trip floats.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.points.first().map_or(0, |p| p.len());
        for i in 0..dim {
            write!(w, "x{i},")?;
        }
        writeln!(w, "f")?;
        for (p, v) in self.points.iter().zip(&self.values) {
            for x in p {
                write!(w, "{x},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::BufRead>(r: R) -> std::io::Result<TestSet> {
        let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty test set file"))??;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 2 || cols[cols.len() - 1] != "f" || cols[0] != "x0" {
            return Err(bad("unrecognized test set header"));
        }
        let dim = cols.len() - 1;
        let mut points = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(bad("wrong field count in test set row"));
            }
            let point: Result<Point, _> = fields[..dim]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad float in test set")))
                .collect();
            points.push(point?);
            values.push(fields[dim].parse().map_err(|_| bad("bad value in test set"))?);
        }
        Ok(TestSet {
            points,
            values,
            mode: TestSetMode::Uniform,
            seed: 0,
        })
    }
}

/// Builds a test set over the target's box (restricted to its domain when a
/// predicate is present). Grid mode lays out the `ceil(sqrt(size))^2`
/// endpoint-inclusive lattice and requires `dim == 2`; uniform mode draws
/// `size` i.i.d. points.
pub fn make_test_set(
    target: &TargetFunction,
    size: usize,
    mode: TestSetMode,
    seed: u64,
) -> Result<TestSet, TestbedError> {
    if size < 1 {
        return Err(TestbedError::Config(
            "test set size must be at least 1".into(),
        ));
    }
    let bbox = &target.bbox;
    let mut points: Vec<Point> = Vec::new();
    match mode {
        TestSetMode::Grid => {
            if target.dim != 2 {
                return Err(TestbedError::Config(format!(
                    "grid test sets require dimension 2, target has {}",
                    target.dim
                )));
            }
            let side = (size as f64).sqrt().ceil() as usize;
            let coord = |axis: usize, i: usize| -> f64 {
                let (lo, hi) = (bbox.lo()[axis], bbox.hi()[axis]);
                if side == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (side - 1) as f64
                }
            };
            for i0 in 0..side {
                for i1 in 0..side {
                    let p = vec![coord(0, i0), coord(1, i1)];
                    if target.domain_ok(&p) {
                        points.push(p);
                    }
                }
            }
        }
        TestSetMode::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut attempts = 0usize;
            while points.len() < size {
                let p = bbox.sample_uniform(&mut rng);
                attempts += 1;
                if target.domain_ok(&p) {
                    points.push(p);
                } else if attempts > size.saturating_mul(100_000) {
                    return Err(TestbedError::Config(
                        "domain predicate rejects essentially all samples".into(),
                    ));
                }
            }
        }
    }
    if points.is_empty() {
        return Err(TestbedError::Config(
            "no test points inside the target domain".into(),
        ));
    }
    let values = points.iter().map(|p| target.eval(p)).collect();
    Ok(TestSet {
        points,
        values,
        mode,
        seed,
    })
}

/// Mean absolute error of a predictor over a test set.
pub fn mae<F: FnMut(&[f64]) -> f64>(mut predict: F, test: &TestSet) -> f64 {
    assert!(!test.is_empty(), "mae over an empty test set");
    let sum: f64 = test
        .points
        .iter()
        .zip(&test.values)
        .map(|(p, v)| (predict(p) - v).abs())
        .sum();
    sum / test.len() as f64
}

/// Histogram of point norms over uniform bins spanning `[0, max norm]`.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// `bins + 1` edges; first 0, last the maximum norm.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Counts normalized to sum to 1 (all zero for empty input).
    pub freq: Vec<f64>,
}

pub fn norm_histogram(points: &[Point], bins: usize) -> Histogram {
    assert!(bins >= 1);
    let norms: Vec<f64> = points
        .iter()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max = norms.iter().copied().fold(0.0f64, f64::max);
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for n in &norms {
        let mut b = (n / width) as usize;
        if b >= bins {
            b = bins - 1; // the maximum itself falls in the last bin
        }
        counts[b] += 1;
    }
    let total = norms.len();
    let freq = counts
        .iter()
        .map(|&c| {
            if total > 0 {
                c as f64 / total as f64
            } else {
                0.0
            }
        })
        .collect();
    Histogram {
        edges,
        counts,
        freq,
    }
}
