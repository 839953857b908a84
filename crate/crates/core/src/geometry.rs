//! Pure numeric kernels: simplex volumes, liftings, circumcenters, score
//! clipping and boundary clamping.
//!
//! All functions are pure; nothing here holds state, so everything is safe to
//! call concurrently.

use crate::linalg;
use thiserror::Error;

/// A point of the ambient space, one `f64` per coordinate.
pub type Point = Vec<f64>;

/// Magnitude below which a negative Cayley–Menger under-root value is treated
/// as rounding noise and clamped to zero. Larger negatives are reported as
/// numerical failures.
pub const CM_UNDERROOT_CLAMP: f64 = 1e-18;

/// A circumcenter is rejected when its equidistance residual exceeds this
/// fraction of the circumradius.
pub const CIRCUM_RESIDUAL_REL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate simplex: {0}")]
    DegenerateSimplex(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

// Basic vector helpers shared across the crate.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + t * d`, componentwise.
pub fn add_scaled(a: &[f64], t: f64, d: &[f64]) -> Point {
    a.iter().zip(d).map(|(x, y)| x + t * y).collect()
}

/// Arithmetic mean of a set of points.
pub fn barycenter(vertices: &[Point]) -> Point {
    let m = vertices[0].len();
    let mut c = vec![0.0; m];
    for v in vertices {
        for (ci, vi) in c.iter_mut().zip(v) {
            *ci += vi;
        }
    }
    let n = vertices.len() as f64;
    c.iter_mut().for_each(|ci| *ci /= n);
    c
}

/// Axis-aligned bounding region `A = prod [lo_i, hi_i]` constraining all
/// queries. Nonempty interior required (`lo_i < hi_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(GeometryError::InvalidInput("empty bounds".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(GeometryError::InvalidInput(format!(
                    "invalid bound pair [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The hypercube `[lo, hi]^m`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(xi, (l, h))| *l <= *xi && *xi <= *h)
    }

    /// All `2^m` corner points, in bitmask order (bit i set = hi on axis i).
    pub fn corners(&self) -> Vec<Point> {
        let m = self.dim();
        assert!(
            m <= 30,
            "corner enumeration is exponential in the dimension"
        );
        (0u32..1 << m)
            .map(|mask| {
                (0..m)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.hi[i]
                        } else {
                            self.lo[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn sample_uniform<R: rand::Rng>(&self, rng: &mut R) -> Point {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l + rng.gen::<f64>() * (h - l))
            .collect()
    }

    /// Pulls coordinates that drifted outside back onto the boundary.
    pub fn clamp_point(&self, x: &mut [f64]) {
        for (xi, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *xi = xi.clamp(*l, *h);
        }
    }
}

/// `k`-dimensional volume of a simplex given by `k + 1` vertices in any
/// ambient dimension `m >= k`, via the Cayley–Menger determinant
///
/// ```text
/// Vol^2 = (-1)^(k+1) / (2^k (k!)^2) * det M
/// ```
///
/// where `M` is the matrix of squared pairwise distances padded by a
/// `(0, 1, .., 1)` top row and left column. Degenerate (affinely dependent)
/// vertex sets yield zero. A slightly negative under-root value (|.| below
/// [`CM_UNDERROOT_CLAMP`]) clamps to zero; anything more negative reports a
/// numerical failure.
pub fn simplex_volume(vertices: &[Point]) -> Result<f64, GeometryError> {
    if vertices.len() < 2 {
        return Err(GeometryError::InvalidInput(
            "need at least two vertices".into(),
        ));
    }
    let m = vertices[0].len();
    for v in vertices {
        if v.len() != m {
            return Err(GeometryError::DimensionMismatch {
                expected: m,
                got: v.len(),
            });
        }
    }
    let k = vertices.len() - 1;
    if k > m {
        return Err(GeometryError::InvalidInput(format!(
            "{} vertices span at most dimension {m}",
            vertices.len()
        )));
    }

    let n = k + 2;
    let mut mat = vec![vec![0.0; n]; n];
    for v in mat[0].iter_mut().skip(1) {
        *v = 1.0;
    }
    for row in mat.iter_mut().skip(1) {
        row[0] = 1.0;
    }
    for i in 0..=k {
        for j in 0..=k {
            mat[i + 1][j + 1] = dist2(&vertices[i], &vertices[j]);
        }
    }
    let det = linalg::lu_det(mat);

    let mut denom = 1.0;
    for i in 1..=k {
        denom *= i as f64;
    }
    denom = denom * denom * (2f64).powi(k as i32);
    let sign = if (k + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut under = sign * det / denom;

    if !under.is_finite() {
        return Err(GeometryError::Numerical(
            "non-finite Cayley-Menger determinant".into(),
        ));
    }
    if under < 0.0 {
        if under > -CM_UNDERROOT_CLAMP {
            under = 0.0;
        } else {
            return Err(GeometryError::Numerical(format!(
                "Cayley-Menger under-root value {under:e} below clamp threshold"
            )));
        }
    }
    Ok(under.sqrt())
}

/// Volume of the simplex lifted onto the graph of `lambda * f`: each vertex
/// `v_i` becomes `(v_i, lambda * f_i)` in one dimension up. Equals the base
/// volume when `lambda = 0` or all values coincide.
pub fn lifted_volume(
    vertices: &[Point],
    f_values: &[f64],
    lambda: f64,
) -> Result<f64, GeometryError> {
    if f_values.len() != vertices.len() {
        return Err(GeometryError::InvalidInput(format!(
            "{} vertices but {} function values",
            vertices.len(),
            f_values.len()
        )));
    }
    if lambda < 0.0 {
        return Err(GeometryError::InvalidInput("negative lambda".into()));
    }
    let lifted: Vec<Point> = vertices
        .iter()
        .zip(f_values)
        .map(|(v, &f)| {
            let mut p = v.clone();
            p.push(lambda * f);
            p
        })
        .collect();
    simplex_volume(&lifted)
}

/// Circumcenter and circumradius of a full-dimensional simplex (`m + 1`
/// vertices in dimension `m`).
///
/// The center solves `2 (v_i - v_0) . c = |v_i|^2 - |v_0|^2`, i = 1..m,
/// computed in coordinates relative to `v_0` for conditioning. Candidates
/// whose equidistance residual exceeds [`CIRCUM_RESIDUAL_REL`] times the
/// radius are rejected as degenerate; callers must discard them.
pub fn circumcenter(vertices: &[Point]) -> Result<(Point, f64), GeometryError> {
    let m = vertices[0].len();
    if vertices.len() != m + 1 {
        return Err(GeometryError::DimensionMismatch {
            expected: m + 1,
            got: vertices.len(),
        });
    }
    let v0 = &vertices[0];
    let a: Vec<Vec<f64>> = (1..=m)
        .map(|i| {
            vertices[i]
                .iter()
                .zip(v0)
                .map(|(x, y)| 2.0 * (x - y))
                .collect()
        })
        .collect();
    let b: Vec<f64> = (1..=m).map(|i| dist2(&vertices[i], v0)).collect();
    let y = linalg::solve(a, b)
        .ok_or_else(|| GeometryError::DegenerateSimplex("singular circumcenter system".into()))?;

    let center: Point = v0.iter().zip(&y).map(|(x, d)| x + d).collect();
    let radius = dist(&center, v0);
    if !radius.is_finite() {
        return Err(GeometryError::Numerical("non-finite circumradius".into()));
    }

    let residual = vertices
        .iter()
        .map(|v| (dist(&center, v) - radius).abs())
        .fold(0.0f64, f64::max);
    if residual > CIRCUM_RESIDUAL_REL * radius {
        return Err(GeometryError::DegenerateSimplex(format!(
            "equidistance residual {residual:e} exceeds {CIRCUM_RESIDUAL_REL:e} * radius {radius:e}"
        )));
    }
    Ok((center, radius))
}

/// Clipped simplex score `min(lifted, base / cos(alpha0))`.
///
/// Capping the score is equivalent to capping the dihedral angle between the
/// simplex and its lifting at `alpha0` (radians, in `(0, pi/2)`), which tames
/// score singularities on functions with unbounded variation.
pub fn clipped_score(base_vol: f64, lifted_vol: f64, alpha0: f64) -> f64 {
    lifted_vol.min(base_vol / alpha0.cos())
}

/// Replaces an out-of-box circumcenter by the intersection of the segment
/// `[barycenter, circumcenter]` with the box boundary (parametric slab
/// clipping: the largest `t` in `[0, 1]` keeping the point inside). A
/// circumcenter already inside the box is returned unchanged.
pub fn clamp_to_boundary(
    barycenter: &[f64],
    circumcenter: &[f64],
    bbox: &BoundingBox,
) -> Result<Point, GeometryError> {
    if !bbox.contains(barycenter) {
        return Err(GeometryError::InvalidInput(
            "barycenter outside the bounding box".into(),
        ));
    }
    if bbox.contains(circumcenter) {
        return Ok(circumcenter.to_vec());
    }
    let mut t = 1.0f64;
    for i in 0..bbox.dim() {
        let d = circumcenter[i] - barycenter[i];
        if d > 0.0 {
            t = t.min((bbox.hi()[i] - barycenter[i]) / d);
        } else if d < 0.0 {
            t = t.min((bbox.lo()[i] - barycenter[i]) / d);
        }
    }
    t = t.clamp(0.0, 1.0);
    let mut p: Point = barycenter
        .iter()
        .zip(circumcenter)
        .map(|(b, c)| b + t * (c - b))
        .collect();
    bbox.clamp_point(&mut p);
    Ok(p)
}
