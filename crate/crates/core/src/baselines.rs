//! Comparison methods: a rectangular-trisection refiner (a simplified
//! stand-in for axis-aligned partition approximators) and the non-active
//! uniform sampler.
//!
//! The refiner keeps a partition of the box into cells with evaluated
//! centers. Each step pops the cell with the largest mass-like score
//! `(|value| + eta) * volume`, trisects it along its longest edge so the
//! parent center (and its evaluation) survives as the middle child's center,
//! and evaluates the two new centers. The exploration floor `eta` keeps
//! zero-valued regions splittable.

use crate::geometry::{BoundingBox, Point};
use crate::spatial::Dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Exploration floor coefficient: `eta = ETA_COEFF * (max |value| + 1)`.
const ETA_COEFF: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("evaluation failed at {point:?}: {reason}")]
    Eval { point: Point, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// An axis-aligned cell of the partition; `center` is always the midpoint of
/// `[lo, hi]` and `value` the evaluation there.
#[derive(Debug, Clone)]
pub struct BoxCell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub center: Point,
    pub value: f64,
    pub id: u64,
}

impl BoxCell {
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(xi, (l, h))| *l <= *xi && *xi <= *h)
    }
}

/// The evolving partition of the bounding box.
pub struct DeferPartition {
    cells: Vec<BoxCell>,
    next_id: u64,
    evals: usize,
}

impl DeferPartition {
    /// One root cell covering the whole box; evaluates `f` at its center.
    pub fn init<F>(bbox: &BoundingBox, f: &mut F) -> Result<Self, BaselineError>
    where
        F: FnMut(&[f64]) -> Result<f64, String>,
    {
        let center: Point = bbox
            .lo()
            .iter()
            .zip(bbox.hi())
            .map(|(l, h)| 0.5 * (l + h))
            .collect();
        let value = f(&center).map_err(|reason| BaselineError::Eval {
            point: center.clone(),
            reason,
        })?;
        Ok(Self {
            cells: vec![BoxCell {
                lo: bbox.lo().to_vec(),
                hi: bbox.hi().to_vec(),
                center,
                value,
                id: 0,
            }],
            next_id: 1,
            evals: 1,
        })
    }

    pub fn cells(&self) -> &[BoxCell] {
        &self.cells
    }

    /// Function evaluations spent so far (1 + 2 per step).
    pub fn evals(&self) -> usize {
        self.evals
    }

    fn eta(&self) -> f64 {
        let max_abs = self
            .cells
            .iter()
            .map(|c| c.value.abs())
            .fold(0.0f64, f64::max);
        ETA_COEFF * (max_abs + 1.0)
    }

    fn score(&self, cell: &BoxCell, eta: f64) -> f64 {
        (cell.value.abs() + eta) * cell.volume()
    }

    /// Pops the highest-scoring cell and trisects it along its longest edge.
    /// Returns the two freshly queried `(point, value)` pairs and the popped
    /// score.
    pub fn step<F>(&mut self, f: &mut F) -> Result<([(Point, f64); 2], f64), BaselineError>
    where
        F: FnMut(&[f64]) -> Result<f64, String>,
    {
        let eta = self.eta();
        // Scores go stale as eta moves, so rank on the fly; ties split the
        // oldest cell first.
        let (best, _) = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (i, self.score(c, eta)))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, s)| {
                if s > acc.1
                    || (s == acc.1
                        && acc.0 != usize::MAX
                        && self.cells[i].id < self.cells[acc.0].id)
                {
                    (i, s)
                } else {
                    acc
                }
            });
        let parent = self.cells.swap_remove(best);
        let popped_score = self.score(&parent, eta);

        // Longest edge, lowest axis on ties.
        let mut axis = 0;
        let mut width = parent.hi[0] - parent.lo[0];
        for a in 1..parent.lo.len() {
            let w = parent.hi[a] - parent.lo[a];
            if w > width {
                width = w;
                axis = a;
            }
        }
        let s1 = parent.lo[axis] + width / 3.0;
        let s2 = parent.lo[axis] + 2.0 * width / 3.0;

        let make = |lo_a: f64, hi_a: f64| -> (Vec<f64>, Vec<f64>, Point) {
            let mut lo = parent.lo.clone();
            let mut hi = parent.hi.clone();
            lo[axis] = lo_a;
            hi[axis] = hi_a;
            let mut center = parent.center.clone();
            center[axis] = 0.5 * (lo_a + hi_a);
            (lo, hi, center)
        };

        let (lo1, hi1, c1) = make(parent.lo[axis], s1);
        let (lo3, hi3, c3) = make(s2, parent.hi[axis]);
        let mut eval = |p: &Point| -> Result<f64, BaselineError> {
            let v = f(p).map_err(|reason| BaselineError::Eval {
                point: p.clone(),
                reason,
            })?;
            self.evals += 1;
            Ok(v)
        };
        let v1 = eval(&c1)?;
        let v3 = eval(&c3)?;

        // Middle child inherits the parent's center and value verbatim.
        let mut mid_lo = parent.lo.clone();
        let mut mid_hi = parent.hi.clone();
        mid_lo[axis] = s1;
        mid_hi[axis] = s2;

        let queried = [(c1.clone(), v1), (c3.clone(), v3)];
        for (lo, hi, center, value) in [
            (lo1, hi1, c1, v1),
            (mid_lo, mid_hi, parent.center.clone(), parent.value),
            (lo3, hi3, c3, v3),
        ] {
            self.cells.push(BoxCell {
                lo,
                hi,
                center,
                value,
                id: self.next_id,
            });
            self.next_id += 1;
        }
        Ok((queried, popped_score))
    }

    /// Piecewise-constant prediction: the value of the cell containing `x`,
    /// boundary ties resolved toward the lowest cell id.
    pub fn predict(&self, x: &[f64]) -> Result<f64, BaselineError> {
        self.cells
            .iter()
            .filter(|c| c.contains(x))
            .min_by_key(|c| c.id)
            .map(|c| c.value)
            .ok_or_else(|| BaselineError::InvalidInput(format!("{x:?} outside the partition")))
    }
}

/// Uniform i.i.d. samples from the box, for the non-active ablation.
pub fn uniform_samples(bbox: &BoundingBox, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| bbox.sample_uniform(&mut rng)).collect()
}

/// The non-active baseline: `n` uniform queries, nearest-neighbor readout.
pub fn nannr_run<F>(
    bbox: &BoundingBox,
    n: usize,
    seed: u64,
    f: &mut F,
) -> Result<Dataset, BaselineError>
where
    F: FnMut(&[f64]) -> Result<f64, String>,
{
    if n == 0 {
        return Err(BaselineError::InvalidInput(
            "need at least one sample".into(),
        ));
    }
    let points = uniform_samples(bbox, n, seed);
    let mut values = Vec::with_capacity(n);
    for p in &points {
        values.push(f(p).map_err(|reason| BaselineError::Eval {
            point: p.clone(),
            reason,
        })?);
    }
    Dataset::build(points, values).map_err(|e| BaselineError::InvalidInput(e.to_string()))
}
