//! Geometry kernels against independent oracles: Gram-determinant volumes,
//! shoelace and triple-product formulas, and rigid-motion invariance.

use annr_core::geometry::{
    circumcenter, clamp_to_boundary, clipped_score, lifted_volume, simplex_volume, BoundingBox,
    Point,
};
use annr_core::oracles;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_simplex(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<Point> {
    (0..=dim)
        .map(|_| (0..dim).map(|_| (rng.gen::<f64>() - 0.5) * scale).collect())
        .collect()
}

#[test]
fn volume_matches_gram_oracle_across_dims() {
    // Tolerance scales like the invariants below: both routes lose relative
    // precision on thin simplices, so compare against max(1, vol).
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for dim in [1usize, 2, 3, 6] {
        for _ in 0..1000 {
            let simplex = random_simplex(&mut rng, dim, 2.0);
            let vol = simplex_volume(&simplex).unwrap();
            let oracle = oracles::gram_volume(&simplex);
            let tol = 1e-10 * oracle.max(1.0);
            assert!(
                (vol - oracle).abs() <= tol,
                "dim {dim}: {vol} vs oracle {oracle}"
            );
        }
    }
}

#[test]
fn regular_tetrahedron_matches_oracle() {
    let h = (3.0f64).sqrt() / 2.0;
    let tet = vec![
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.5, h, 0.0],
        vec![0.5, h / 3.0, (2.0f64 / 3.0).sqrt()],
    ];
    let vol = simplex_volume(&tet).unwrap();
    let oracle = oracles::gram_volume(&tet);
    assert!((vol - oracle).abs() < 1e-12);
    assert!((vol - 0.1178511).abs() < 1e-7);
}

#[test]
fn volume_agrees_with_shoelace_in_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let s = random_simplex(&mut rng, 2, 3.0);
        let vol = simplex_volume(&s).unwrap();
        let oracle = oracles::shoelace_area(&s[0], &s[1], &s[2]);
        assert!((vol - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }
}

#[test]
fn volume_agrees_with_triple_product_in_3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let s = random_simplex(&mut rng, 3, 3.0);
        let vol = simplex_volume(&s).unwrap();
        let oracle = oracles::triple_product_volume(&s);
        assert!((vol - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }
}

#[test]
fn volume_invariant_under_rigid_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for dim in [2usize, 3, 6] {
        for _ in 0..200 {
            let s = random_simplex(&mut rng, dim, 2.0);
            let rot = oracles::random_rotation(&mut rng, dim);
            let shift: Vec<f64> = (0..dim).map(|_| (rng.gen::<f64>() - 0.5) * 10.0).collect();
            let moved: Vec<Point> = s
                .iter()
                .map(|v| {
                    let mut p = oracles::apply_rotation(&rot, v);
                    for (pi, si) in p.iter_mut().zip(&shift) {
                        *pi += si;
                    }
                    p
                })
                .collect();
            let v0 = simplex_volume(&s).unwrap();
            let v1 = simplex_volume(&moved).unwrap();
            assert!((v1 - v0).abs() <= 1e-9 * v0.max(1.0));
        }
    }
}

#[test]
fn circumcenter_equivariant_under_rigid_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for dim in [2usize, 3] {
        let mut done = 0;
        while done < 200 {
            let s = random_simplex(&mut rng, dim, 2.0);
            let Ok((c, r)) = circumcenter(&s) else {
                continue;
            };
            done += 1;
            let rot = oracles::random_rotation(&mut rng, dim);
            let shift: Vec<f64> = (0..dim).map(|_| (rng.gen::<f64>() - 0.5) * 4.0).collect();
            let moved: Vec<Point> = s
                .iter()
                .map(|v| {
                    let mut p = oracles::apply_rotation(&rot, v);
                    for (pi, si) in p.iter_mut().zip(&shift) {
                        *pi += si;
                    }
                    p
                })
                .collect();
            let Ok((c2, r2)) = circumcenter(&moved) else {
                continue;
            };
            let mut expected = oracles::apply_rotation(&rot, &c);
            for (ei, si) in expected.iter_mut().zip(&shift) {
                *ei += si;
            }
            let scale = r.max(1.0);
            for (a, b) in c2.iter().zip(&expected) {
                assert!((a - b).abs() <= 1e-8 * scale, "{c2:?} vs {expected:?}");
            }
            assert!((r2 - r).abs() <= 1e-8 * scale);
        }
    }
}

#[test]
fn lifted_volume_monotone_in_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let dim = 1 + (rng.gen::<u32>() % 4) as usize;
        let s = random_simplex(&mut rng, dim, 2.0);
        let values: Vec<f64> = (0..=dim).map(|_| (rng.gen::<f64>() - 0.5) * 4.0).collect();
        let l1 = rng.gen::<f64>() * 3.0;
        let l2 = l1 + rng.gen::<f64>() * 3.0;
        let v1 = lifted_volume(&s, &values, l1).unwrap();
        let v2 = lifted_volume(&s, &values, l2).unwrap();
        assert!(
            v1 <= v2 * (1.0 + 1e-12),
            "lambda {l1} gave {v1} > lambda {l2} gave {v2}"
        );
    }
}

#[test]
fn lifted_volume_dominates_base() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let dim = 1 + (rng.gen::<u32>() % 4) as usize;
        let s = random_simplex(&mut rng, dim, 2.0);
        let base = simplex_volume(&s).unwrap();
        let values: Vec<f64> = (0..=dim).map(|_| (rng.gen::<f64>() - 0.5) * 4.0).collect();
        let lambda = rng.gen::<f64>() * 5.0;
        let lifted = lifted_volume(&s, &values, lambda).unwrap();
        assert!(lifted >= base - 1e-12 * base.max(1.0));

        // Equality holds exactly when the lifting is flat.
        let constant = vec![values[0]; dim + 1];
        let flat = lifted_volume(&s, &constant, lambda).unwrap();
        assert!((flat - base).abs() <= 1e-12 * base.max(1.0));
        let zero = lifted_volume(&s, &values, 0.0).unwrap();
        assert!((zero - base).abs() <= 1e-12 * base.max(1.0));
    }
}

proptest! {
    #[test]
    fn clipped_score_never_exceeds_either_bound(
        base in 0.0f64..10.0,
        extra in 0.0f64..100.0,
        alpha_deg in 1.0f64..89.9,
    ) {
        let lifted = base + extra;
        let s = clipped_score(base, lifted, alpha_deg.to_radians());
        prop_assert!(s <= lifted + 1e-15);
        prop_assert!(s <= base / alpha_deg.to_radians().cos() + 1e-12);
        prop_assert!(s + 1e-15 >= base.min(lifted));
    }

    #[test]
    fn clamped_point_stays_in_box(
        bx in 0.2f64..0.8, by in 0.2f64..0.8,
        cx in -5.0f64..5.0, cy in -5.0f64..5.0,
    ) {
        let bbox = BoundingBox::cube(2, 0.0, 1.0).unwrap();
        let p = clamp_to_boundary(&[bx, by], &[cx, cy], &bbox).unwrap();
        for (i, (lo, hi)) in bbox.lo().iter().zip(bbox.hi()).enumerate() {
            prop_assert!(p[i] >= lo - 1e-12 && p[i] <= hi + 1e-12);
        }
        // The clamped point lies on the segment.
        let t = if (cx - bx).abs() > 1e-12 { (p[0] - bx) / (cx - bx) } else { 0.0 };
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&t));
    }
}
