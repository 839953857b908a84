//! Stochastic discovery of Delaunay simplices by random walks on the
//! boundary of Voronoi cells.
//!
//! A walk starts at a datapoint and casts a ray inside its Voronoi cell; the
//! first bisector hit pins the walk to a face and adds that face's generator
//! to the active set. After `m` constrained steps the walk sits on a Voronoi
//! vertex, which is the circumcenter of a Delaunay simplex spanned by the
//! `m + 1` accumulated generators. The walk then moves along the 1-skeleton
//! (drop one generator, slide along the resulting edge to the next vertex),
//! emitting one simplex per vertex visited. The full triangulation is never
//! constructed.
//!
//! Ray-bisector intersections are exact: for a ray `x + t d` inside the cell
//! of `p0`, the crossing with the bisector of `(p0, q)` is at
//! `t_q = (|q - x|^2 - |p0 - x|^2) / (2 d . (q - p0))`. The first crossing is
//! found without scanning all points: an initial finite candidate comes from
//! the max-dot-product traversal of the spatial index, then nearest-neighbor
//! queries at the tentative hit point either certify it or yield a strictly
//! earlier crossing. Each round costs one logarithmic index query and the
//! tentative `t` strictly decreases, so the loop terminates.

use crate::geometry::{self, Point};
use crate::spatial::{Dataset, SpatialError};
use rand::Rng;
use std::collections::HashSet;
use thiserror::Error;

/// Ray directions must be unit length within this tolerance.
pub const UNIT_DIR_TOL: f64 = 1e-9;

/// The circumcenter recomputed from a candidate's vertices must match the
/// walk position within this fraction of the circumradius.
pub const WALK_CONSISTENCY_REL: f64 = 1e-6;

/// Slack for the empty-circumsphere validation check.
pub const VALIDATE_REL: f64 = 1e-9;

/// Fresh directions tried before a walk gives up on an unbounded face.
pub const DIRECTION_RETRIES: usize = 8;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("walk escaped to infinity and ran out of retries")]
    Escaped,
    #[error("degenerate candidate: {0}")]
    Degenerate(String),
    #[error("need at least {needed} points for a full simplex, have {have}")]
    TooFewPoints { needed: usize, have: usize },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// A Delaunay simplex discovered by a walk, together with the geometry the
/// engine needs to score and query it. `score` is filled in by the engine.
#[derive(Debug, Clone)]
pub struct SimplexCandidate {
    /// Sorted, distinct dataset indices of the `m + 1` vertices.
    pub vertex_indices: Vec<usize>,
    pub circumcenter: Point,
    pub circumradius: f64,
    pub base_volume: f64,
    /// Clipped lifted volume; zero until the engine scores the candidate.
    pub score: f64,
    /// Engine step at which the candidate was discovered.
    pub birth_step: u64,
}

impl SimplexCandidate {
    pub fn vertices(&self, data: &Dataset) -> Vec<Point> {
        self.vertex_indices
            .iter()
            .map(|&i| data.point(i).to_vec())
            .collect()
    }

    pub fn barycenter(&self, data: &Dataset) -> Point {
        geometry::barycenter(&self.vertices(data))
    }
}

/// A point on a Voronoi face together with the generators whose cells meet
/// there and an orthonormal basis of the face's direction space.
pub struct WalkState {
    pub position: Point,
    /// `generators[0]` is the base generator used for ray formulas.
    pub generators: Vec<usize>,
    pub tangent_basis: Vec<Vec<f64>>,
}

impl WalkState {
    fn at_datapoint(data: &Dataset, start: usize) -> Self {
        let m = data.dim();
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            basis.push(e);
        }
        Self {
            position: data.point(start).to_vec(),
            generators: vec![start],
            tangent_basis: basis,
        }
    }

    /// Position equidistant from all generators (relative tolerance
    /// [`WALK_CONSISTENCY_REL`]) and no non-generator point closer.
    pub fn is_consistent(&self, data: &Dataset) -> bool {
        let d0 = geometry::dist(&self.position, data.point(self.generators[0]));
        for &g in &self.generators[1..] {
            if (geometry::dist(&self.position, data.point(g)) - d0).abs()
                > WALK_CONSISTENCY_REL * d0.max(1e-300)
            {
                return false;
            }
        }
        match data.nearest(&self.position, &self.generators) {
            Err(_) => true,
            Ok((_, d)) => d >= d0 * (1.0 - WALK_CONSISTENCY_REL),
        }
    }
}

/// First bisector crossing of the ray `position + t * direction` cast inside
/// (the closure of) `generator`'s Voronoi cell.
///
/// Returns the smallest `t > 0` and the dataset index attaining it, over all
/// candidates `q` not in `exclude` with `direction . (q - p0) > 0`, or `None`
/// when the ray escapes to infinity. `exclude` must contain the other active
/// generators so their tied distances cannot shadow the search.
pub fn ray_boundary_hit(
    data: &Dataset,
    position: &[f64],
    direction: &[f64],
    generator: usize,
    exclude: &[usize],
) -> Result<Option<(f64, usize)>, WalkError> {
    if (geometry::norm(direction) - 1.0).abs() > UNIT_DIR_TOL {
        return Err(WalkError::InvalidInput(format!(
            "direction norm {} not unit",
            geometry::norm(direction)
        )));
    }
    let p0 = data.point(generator);
    let mut excl: Vec<usize> = Vec::with_capacity(exclude.len() + 2);
    excl.extend_from_slice(exclude);
    if !excl.contains(&generator) {
        excl.push(generator);
    }

    // Escape test: a crossing exists iff some candidate lies strictly ahead
    // of p0 along the ray direction.
    let dot_p0 = geometry::dot(direction, p0);
    let Some((q0, dmax)) = data.max_dot(direction, &excl) else {
        return Ok(None);
    };
    if dmax <= dot_p0 {
        return Ok(None);
    }

    let t_of = |q: usize| -> f64 {
        let qp = data.point(q);
        let num = geometry::dist2(qp, position) - geometry::dist2(p0, position);
        let den = 2.0 * (geometry::dot(direction, qp) - dot_p0);
        num / den
    };

    // Certify-or-refine: at the tentative hit point, any point strictly
    // inside the sphere through p0 crosses the ray earlier.
    let mut t = t_of(q0);
    let mut hit = q0;
    excl.push(hit);
    for _ in 0..data.len() + 2 {
        *excl.last_mut().unwrap() = hit;
        let h = geometry::add_scaled(position, t, direction);
        let r = geometry::dist(&h, p0);
        match data.nearest(&h, &excl) {
            Err(SpatialError::AllExcluded) => break,
            Err(e) => return Err(e.into()),
            Ok((j, dj)) => {
                if dj >= r {
                    break;
                }
                let tj = t_of(j);
                if tj >= t {
                    break;
                }
                t = tj;
                hit = j;
            }
        }
    }
    Ok(Some((t, hit)))
}

fn sample_tangent_direction<R: Rng>(rng: &mut R, basis: &[Vec<f64>], dim: usize) -> Point {
    loop {
        let mut dir = vec![0.0; dim];
        for b in basis {
            let g = gaussian(rng);
            for (d, bi) in dir.iter_mut().zip(b) {
                *d += g * bi;
            }
        }
        let n = geometry::norm(&dir);
        if n > 1e-12 {
            dir.iter_mut().for_each(|d| *d /= n);
            return dir;
        }
    }
}

/// Standard normal via Box-Muller; two uniform draws per sample.
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Removes the component along `w` from an orthonormal basis, returning an
/// orthonormal basis of the orthogonal complement (one dimension lower).
fn shrink_basis(basis: &[Vec<f64>], w: &[f64]) -> Option<Vec<Vec<f64>>> {
    let target = basis.len().checked_sub(1)?;
    // Project w onto the current tangent space and normalize.
    let mut u = vec![0.0; w.len()];
    for b in basis {
        let c = geometry::dot(b, w);
        for (ui, bi) in u.iter_mut().zip(b) {
            *ui += c * bi;
        }
    }
    let un = geometry::norm(&u);
    if un <= 1e-12 * geometry::norm(w).max(1.0) {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= un);

    let mut out: Vec<Vec<f64>> = Vec::with_capacity(target);
    for b in basis {
        if out.len() == target {
            break;
        }
        let mut v: Vec<f64> = b
            .iter()
            .zip(&u)
            .map(|(bi, ui)| bi - geometry::dot(b, &u) * ui)
            .collect();
        for o in &out {
            let c = geometry::dot(&v, o);
            for (vi, oi) in v.iter_mut().zip(o) {
                *vi -= c * oi;
            }
        }
        let n = geometry::norm(&v);
        if n > 1e-9 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
    }
    (out.len() == target).then_some(out)
}

fn candidate_from_state(
    data: &Dataset,
    generators: &[usize],
    walk_position: &[f64],
    birth_step: u64,
) -> Result<SimplexCandidate, WalkError> {
    let mut idx = generators.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.len() != data.dim() + 1 {
        return Err(WalkError::Degenerate(format!(
            "{} distinct generators, expected {}",
            idx.len(),
            data.dim() + 1
        )));
    }
    let verts: Vec<Point> = idx.iter().map(|&i| data.point(i).to_vec()).collect();
    let (center, radius) =
        geometry::circumcenter(&verts).map_err(|e| WalkError::Degenerate(e.to_string()))?;
    let drift = geometry::dist(&center, walk_position);
    if drift > WALK_CONSISTENCY_REL * radius {
        return Err(WalkError::Degenerate(format!(
            "circumcenter drift {drift:e} exceeds {WALK_CONSISTENCY_REL:e} * radius {radius:e}"
        )));
    }
    let base_volume =
        geometry::simplex_volume(&verts).map_err(|e| WalkError::Degenerate(e.to_string()))?;
    Ok(SimplexCandidate {
        vertex_indices: idx,
        circumcenter: center,
        circumradius: radius,
        base_volume,
        score: 0.0,
        birth_step,
    })
}

/// Descends from a datapoint to a Voronoi vertex in `m` constrained ray
/// steps, returning the dual Delaunay simplex.
///
/// Each step samples a direction uniformly on the unit sphere of the current
/// tangent subspace (trying both signs, keeping one with a finite hit),
/// moves to the first bisector crossing, and constrains the walk to the
/// face just entered. Unbounded faces are retried with fresh directions up
/// to [`DIRECTION_RETRIES`] times.
pub fn descend_to_vertex<R: Rng>(
    data: &Dataset,
    start: usize,
    rng: &mut R,
    birth_step: u64,
) -> Result<SimplexCandidate, WalkError> {
    let m = data.dim();
    if data.len() < m + 1 {
        return Err(WalkError::TooFewPoints {
            needed: m + 1,
            have: data.len(),
        });
    }
    let mut state = WalkState::at_datapoint(data, start);
    for _ in 0..m {
        let mut found = None;
        for _ in 0..DIRECTION_RETRIES {
            let dir = sample_tangent_direction(rng, &state.tangent_basis, m);
            let base = state.generators[0];
            if let Some((t, hit)) =
                ray_boundary_hit(data, &state.position, &dir, base, &state.generators[1..])?
            {
                found = Some((t, dir, hit));
                break;
            }
            let neg: Vec<f64> = dir.iter().map(|x| -x).collect();
            if let Some((t, hit)) =
                ray_boundary_hit(data, &state.position, &neg, base, &state.generators[1..])?
            {
                found = Some((t, neg, hit));
                break;
            }
        }
        let Some((t, dir, hit)) = found else {
            return Err(WalkError::Escaped);
        };
        state.position = geometry::add_scaled(&state.position, t.max(0.0), &dir);
        let w = geometry::sub(data.point(hit), data.point(state.generators[0]));
        state.tangent_basis = shrink_basis(&state.tangent_basis, &w)
            .ok_or_else(|| WalkError::Degenerate("tangent basis collapse".into()))?;
        state.generators.push(hit);
        debug_assert!(state.is_consistent(data), "walk left the Voronoi face");
    }
    candidate_from_state(data, &state.generators, &state.position, birth_step)
}

/// Direction of the Voronoi edge shared by the cells of `generators`
/// (`m` of them), oriented away from the cell of `dropped`.
fn edge_direction(data: &Dataset, generators: &[usize], dropped: usize) -> Option<Point> {
    let m = data.dim();
    let g0 = data.point(generators[0]);
    // Orthonormalize the m - 1 difference vectors.
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for &g in &generators[1..] {
        let mut v = geometry::sub(data.point(g), g0);
        for o in &ortho {
            let c = geometry::dot(&v, o);
            for (vi, oi) in v.iter_mut().zip(o) {
                *vi -= c * oi;
            }
        }
        let n = geometry::norm(&v);
        if n <= 1e-12 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= n);
        ortho.push(v);
    }
    // The edge spans the 1-dimensional complement: pick the coordinate axis
    // with the largest residual for stability.
    let mut best: Option<Point> = None;
    let mut best_norm = 0.0;
    for axis in 0..m {
        let mut v = vec![0.0; m];
        v[axis] = 1.0;
        for o in &ortho {
            let c = geometry::dot(&v, o);
            for (vi, oi) in v.iter_mut().zip(o) {
                *vi -= c * oi;
            }
        }
        let n = geometry::norm(&v);
        if n > best_norm {
            best_norm = n;
            best = Some(v);
        }
    }
    let mut u = best?;
    if best_norm <= 1e-9 {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= best_norm);
    // Orient away from the dropped generator's cell: its distance must grow.
    let side = geometry::dot(&u, &geometry::sub(g0, data.point(dropped)));
    if side.abs() <= 1e-12 {
        return None;
    }
    if side < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    Some(u)
}

/// Random walk on the 1-skeleton of the Voronoi tessellation.
///
/// Starting from the vertex reached by [`descend_to_vertex`] at `start`,
/// performs `steps` moves: drop one generator at random, slide along the
/// resulting edge away from the current vertex to the next vertex, emit the
/// simplex found there. Candidates are deduplicated by vertex set. Edges
/// escaping to infinity cause a different generator to be dropped; if every
/// choice escapes, the walk restarts from a fresh random datapoint.
pub fn skeleton_walk<R: Rng>(
    data: &Dataset,
    start: usize,
    steps: usize,
    rng: &mut R,
    birth_step: u64,
) -> Result<Vec<SimplexCandidate>, WalkError> {
    if steps == 0 {
        return Err(WalkError::InvalidInput("steps must be at least 1".into()));
    }
    let m = data.dim();
    let mut out = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();

    let first = descend_to_vertex(data, start, rng, birth_step)?;
    let mut gens = first.vertex_indices.clone();
    let mut pos = first.circumcenter.clone();
    seen.insert(first.vertex_indices.clone());
    out.push(first);

    for _ in 1..steps {
        let mut order: Vec<usize> = (0..=m).collect();
        shuffle(&mut order, rng);
        let mut moved = false;
        for &di in &order {
            let dropped = gens[di];
            let mut rem = gens.clone();
            rem.remove(di);
            let Some(dir) = edge_direction(data, &rem, dropped) else {
                continue;
            };
            let mut excl = rem[1..].to_vec();
            excl.push(dropped);
            match ray_boundary_hit(data, &pos, &dir, rem[0], &excl)? {
                None => continue,
                Some((t, hit)) => {
                    let ray_pos = geometry::add_scaled(&pos, t.max(0.0), &dir);
                    let mut new_gens = rem;
                    new_gens.push(hit);
                    match candidate_from_state(data, &new_gens, &ray_pos, birth_step) {
                        Ok(cand) => {
                            pos = cand.circumcenter.clone();
                            gens = cand.vertex_indices.clone();
                            if seen.insert(cand.vertex_indices.clone()) {
                                out.push(cand);
                            }
                        }
                        Err(_) => {
                            // Keep walking from the ray position; only the
                            // emission is rejected.
                            pos = ray_pos;
                            new_gens.sort_unstable();
                            gens = new_gens;
                        }
                    }
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            // Every edge from this vertex escapes; restart elsewhere.
            let fresh = rng.gen_range(0..data.len());
            match descend_to_vertex(data, fresh, rng, birth_step) {
                Ok(cand) => {
                    pos = cand.circumcenter.clone();
                    gens = cand.vertex_indices.clone();
                    if seen.insert(cand.vertex_indices.clone()) {
                        out.push(cand);
                    }
                }
                Err(WalkError::Escaped) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

fn shuffle<R: Rng>(xs: &mut [usize], rng: &mut R) {
    for i in (1..xs.len()).rev() {
        let j = rng.gen_range(0..=i);
        xs.swap(i, j);
    }
}

/// Greedy walk toward `target` driven by nearest queries at waypoints along
/// the segment from `start`; the final waypoint is the target itself, so the
/// result is the exact nearest datapoint to `target`.
pub fn visibility_walk(data: &Dataset, start: usize, target: &[f64]) -> usize {
    let mut current = start;
    let from = data.point(start).to_vec();
    for frac in [0.25, 0.5, 0.75, 1.0] {
        let waypoint: Point = from
            .iter()
            .zip(target)
            .map(|(a, b)| a + frac * (b - a))
            .collect();
        if let Ok((j, _)) = data.nearest(&waypoint, &[]) {
            if geometry::dist2(data.point(j), target) < geometry::dist2(data.point(current), target)
            {
                current = j;
            }
        }
    }
    current
}

/// Lazy revalidation: true iff no non-vertex point lies inside the
/// candidate's circumsphere (within [`VALIDATE_REL`] relative slack).
pub fn validate_candidate(data: &Dataset, cand: &SimplexCandidate) -> bool {
    match data.nearest(&cand.circumcenter, &cand.vertex_indices) {
        Err(_) => true,
        Ok((_, d)) => d >= cand.circumradius * (1.0 - VALIDATE_REL),
    }
}
