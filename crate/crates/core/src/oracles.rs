//! Independent reference implementations backing the test suites.
//!
//! Everything here deliberately avoids the solver paths used by the library:
//! determinants are cofactor expansions, circumcenters come from Cramer's
//! rule, nearest neighbors from linear scans, and the Delaunay set from
//! exhaustive subset enumeration. Not part of the public API.
#![doc(hidden)]

use crate::geometry::Point;

/// Determinant by recursive cofactor expansion. Exponential, fine for the
/// tiny matrices used in cross-checks (at most 8 x 8).
pub fn det_cofactor(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut det = 0.0;
    let mut sign = 1.0;
    for col in 0..n {
        let minor: Vec<Vec<f64>> = (1..n)
            .map(|r| (0..n).filter(|&c| c != col).map(|c| m[r][c]).collect())
            .collect();
        det += sign * m[0][col] * det_cofactor(&minor);
        sign = -sign;
    }
    det
}

/// Simplex volume via the Gram matrix of edge vectors:
/// `sqrt(det(E^T E)) / k!`.
pub fn gram_volume(vertices: &[Point]) -> f64 {
    let k = vertices.len() - 1;
    let edges: Vec<Vec<f64>> = vertices[1..]
        .iter()
        .map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect())
        .collect();
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| edges[i].iter().zip(&edges[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let det = det_cofactor(&gram).max(0.0);
    let mut fact = 1.0;
    for i in 1..=k {
        fact *= i as f64;
    }
    det.sqrt() / fact
}

/// Triangle area from the shoelace formula (2-D only).
pub fn shoelace_area(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

/// Tetrahedron volume from the scalar triple product (3-D only).
pub fn triple_product_volume(v: &[Point]) -> f64 {
    let e = |i: usize| -> [f64; 3] { [v[i][0] - v[0][0], v[i][1] - v[0][1], v[i][2] - v[0][2]] };
    let (a, b, c) = (e(1), e(2), e(3));
    let cross = [
        b[1] * c[2] - b[2] * c[1],
        b[2] * c[0] - b[0] * c[2],
        b[0] * c[1] - b[1] * c[0],
    ];
    ((a[0] * cross[0] + a[1] * cross[1] + a[2] * cross[2]) / 6.0).abs()
}

/// Exhaustive nearest neighbor with the same tie rule as the index.
pub fn linear_nearest(points: &[Point], query: &[f64], exclude: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if exclude.contains(&i) {
            continue;
        }
        let d: f64 = query
            .iter()
            .zip(p)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, d)| (i, d.sqrt()))
}

/// Circumcenter by Cramer's rule on the relative system
/// `2 (v_i - v_0) . y = |v_i - v_0|^2`. Returns `None` when the
/// denominator determinant is (near) zero.
pub fn cramer_circumcenter(vertices: &[Point]) -> Option<(Point, f64)> {
    let m = vertices[0].len();
    let a: Vec<Vec<f64>> = (1..=m)
        .map(|i| {
            vertices[i]
                .iter()
                .zip(&vertices[0])
                .map(|(x, y)| 2.0 * (x - y))
                .collect()
        })
        .collect();
    let b: Vec<f64> = (1..=m)
        .map(|i| {
            vertices[i]
                .iter()
                .zip(&vertices[0])
                .map(|(x, y)| (x - y) * (x - y))
                .sum()
        })
        .collect();
    let da = det_cofactor(&a);
    if da.abs() < 1e-300 {
        return None;
    }
    let mut y = vec![0.0; m];
    for col in 0..m {
        let mut ac = a.clone();
        for (row, acr) in ac.iter_mut().enumerate() {
            acr[col] = b[row];
        }
        y[col] = det_cofactor(&ac) / da;
    }
    let center: Point = vertices[0].iter().zip(&y).map(|(v, d)| v + d).collect();
    let radius = center
        .iter()
        .zip(&vertices[0])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if !radius.is_finite() {
        return None;
    }
    Some((center, radius))
}

/// Exhaustive Delaunay set: every `(m + 1)`-subset whose circumsphere
/// contains no other point deeper than `rel_tol * radius`. Intended for
/// `m <= 3` and small `n`.
pub fn exact_delaunay(points: &[Point], rel_tol: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let m = points[0].len();
    let mut out = Vec::new();
    let mut subset = vec![0usize; m + 1];
    enumerate_subsets(n, m + 1, 0, 0, &mut subset, &mut |idx: &[usize]| {
        let verts: Vec<Point> = idx.iter().map(|&i| points[i].clone()).collect();
        let Some((center, radius)) = cramer_circumcenter(&verts) else {
            return;
        };
        // Reject badly conditioned circumcenters the same way the library
        // path would: the equidistance residual must be small.
        let residual = verts
            .iter()
            .map(|v| {
                (center
                    .iter()
                    .zip(v)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    - radius)
                    .abs()
            })
            .fold(0.0f64, f64::max);
        if residual > 1e-6 * radius {
            return;
        }
        let empty = (0..n).filter(|i| !idx.contains(i)).all(|i| {
            let d = center
                .iter()
                .zip(&points[i])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d >= radius * (1.0 - rel_tol)
        });
        if empty {
            out.push(idx.to_vec());
        }
    });
    out
}

fn enumerate_subsets(
    n: usize,
    k: usize,
    start: usize,
    depth: usize,
    buf: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(buf);
        return;
    }
    for i in start..n {
        buf[depth] = i;
        enumerate_subsets(n, k, i + 1, depth + 1, buf, visit);
    }
}

/// Brute-force first bisector crossing: minimizes
/// `t_q = (|q - x|^2 - |p0 - x|^2) / (2 d . (q - p0))` over candidates with
/// a positive denominator.
pub fn brute_force_ray_hit(
    points: &[Point],
    position: &[f64],
    direction: &[f64],
    generator: usize,
    exclude: &[usize],
) -> Option<(f64, usize)> {
    let p0 = &points[generator];
    let d2 =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let dp = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut best: Option<(f64, usize)> = None;
    for (q, qp) in points.iter().enumerate() {
        if q == generator || exclude.contains(&q) {
            continue;
        }
        let den = 2.0 * (dp(direction, qp) - dp(direction, p0));
        if den <= 0.0 {
            continue;
        }
        let t = (d2(qp, position) - d2(p0, position)) / den;
        if best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, q));
        }
    }
    best
}

/// A Haar-random rotation matrix (rows orthonormal) via Gram-Schmidt on a
/// Gaussian matrix.
pub fn random_rotation<R: rand::Rng>(rng: &mut R, m: usize) -> Vec<Vec<f64>> {
    loop {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        'outer: for _ in 0..m {
            let mut v: Vec<f64> = (0..m).map(|_| gaussian(rng)).collect();
            for r in &rows {
                let c: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= c * ri;
                }
            }
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n < 1e-9 {
                break 'outer;
            }
            v.iter_mut().for_each(|x| *x /= n);
            rows.push(v);
        }
        if rows.len() == m {
            return rows;
        }
    }
}

pub fn apply_rotation(rot: &[Vec<f64>], x: &[f64]) -> Point {
    rot.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn gaussian<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
