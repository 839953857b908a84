//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured margins (visible under `--nocapture`) and enforcing the
//! stated runtime budget.
//!
//! Run with: `cargo test -p annr-cli --test acceptance -- --nocapture`

use annr_core::baselines::{nannr_run, uniform_samples, DeferPartition};
use annr_core::engine::{nnr_predict, Engine, EngineConfig, Lambda};
use annr_core::geometry::{circumcenter, simplex_volume, BoundingBox};
use annr_core::oracles;
use annr_core::spatial::Dataset;
use annr_core::testbed::protocol::ExternalProcess;
use annr_core::testbed::{builtin, mae, make_test_set, TestSetMode};
use annr_core::trace::RunTrace;
use annr_core::walk::{skeleton_walk, validate_candidate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::{Duration, Instant};

fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn std_dev(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn gaussian_f(sigma2: f64) -> impl FnMut(&[f64]) -> Result<f64, String> + Clone {
    move |x: &[f64]| {
        let n2: f64 = x.iter().map(|v| v * v).sum();
        Ok((std::f64::consts::TAU * sigma2).powi(-1) * (-n2 / (2.0 * sigma2)).exp())
    }
}

fn assert_within(elapsed: Duration, limit_s: u64, criterion: &str) {
    assert!(
        elapsed <= Duration::from_secs(limit_s),
        "{criterion} exceeded its {limit_s} s budget: {elapsed:?}"
    );
}

/// Criterion 1: volume vs the Gram oracle and circumcenter residuals on
/// 1,000 random simplices per dimension. Budget 5 s.
#[test]
fn criterion_1_geometry_kernels() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_vol = 0.0f64;
    let mut worst_resid = 0.0f64;
    for dim in [1usize, 2, 3, 6] {
        for _ in 0..1000 {
            let s: Vec<Vec<f64>> = (0..=dim)
                .map(|_| (0..dim).map(|_| (rng.gen::<f64>() - 0.5) * 2.0).collect())
                .collect();
            let vol = simplex_volume(&s).unwrap();
            let oracle = oracles::gram_volume(&s);
            let err = (vol - oracle).abs() / oracle.max(1.0);
            worst_vol = worst_vol.max(err);
            assert!(err <= 1e-10, "dim {dim}: volume {vol} vs oracle {oracle}");

            if let Ok((c, r)) = circumcenter(&s) {
                let resid = s
                    .iter()
                    .map(|v| (annr_core::geometry::dist(&c, v) - r).abs())
                    .fold(0.0f64, f64::max)
                    / r;
                worst_resid = worst_resid.max(resid);
                assert!(resid < 1e-8, "dim {dim}: residual {resid}");
            }
        }
    }
    let elapsed = started.elapsed();
    assert_within(elapsed, 5, "criterion 1");
    println!(
        "criterion 1: PASS — worst volume error {worst_vol:.2e} (<= 1e-10), \
         worst circumcenter residual {worst_resid:.2e} (< 1e-8), {elapsed:?}"
    );
}

/// Criterion 2: walk soundness (100%) and recall against the exact Delaunay
/// oracle; m = 2 with n in {10, 25, 50} needs mean recall >= 95% at
/// L = 2000 over 10 seeds, m = 3 with n = 20 needs >= 90%. Budget 60 s.
#[test]
fn criterion_2_walk_soundness_and_recall() {
    let started = Instant::now();
    let mut summary = Vec::new();
    for (dim, n, min_recall) in [
        (2usize, 10usize, 0.95),
        (2, 25, 0.95),
        (2, 50, 0.95),
        (3, 20, 0.90),
    ] {
        let mut recalls = Vec::new();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * dim as u64 + n as u64 + seed);
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let data = Dataset::build(points.clone(), vec![0.0; n]).unwrap();
            let exact: BTreeSet<Vec<usize>> =
                oracles::exact_delaunay(&points, 1e-9).into_iter().collect();
            let start = rng.gen_range(0..n);
            let cands = skeleton_walk(&data, start, 2000, &mut rng, 0).unwrap();
            let mut found = BTreeSet::new();
            for c in &cands {
                if validate_candidate(&data, c) {
                    assert!(
                        exact.contains(&c.vertex_indices),
                        "unsound candidate {:?} (dim {dim}, n {n}, seed {seed})",
                        c.vertex_indices
                    );
                    found.insert(c.vertex_indices.clone());
                }
            }
            recalls.push(found.len() as f64 / exact.len() as f64);
        }
        let mean = recalls.iter().sum::<f64>() / recalls.len() as f64;
        assert!(
            mean >= min_recall,
            "dim {dim}, n {n}: mean recall {mean:.4} below {min_recall}"
        );
        summary.push(format!("m={dim} n={n}: recall {mean:.3}"));
    }
    let elapsed = started.elapsed();
    assert_within(elapsed, 60, "criterion 2");
    println!(
        "criterion 2: PASS — soundness 100%, {} , {elapsed:?}",
        summary.join(", ")
    );
}

/// Criterion 3: the run on the Gaussian halts below epsilon = 1e-3 before
/// 50,000 queries. Budget 5 min.
#[test]
fn criterion_3_halting() {
    let started = Instant::now();
    let cfg = EngineConfig {
        dim: 2,
        bbox: BoundingBox::cube(2, -1.0, 1.0).unwrap(),
        lambda: Lambda::Auto,
        epsilon: 1e-3,
        budget: 50_000,
        walk_steps: 100,
        alpha0_deg: Some(89.0),
        n_init: 20,
        include_corners: true,
        seed: 0,
    };
    let mut engine = Engine::new(cfg, gaussian_f(0.1)).unwrap();
    engine.run().unwrap();
    let steps = engine.trace().len();
    let final_score = engine.trace().rows.last().unwrap().score;
    assert!(steps < 50_000, "did not halt before the cap");
    assert!(
        final_score < 1e-3,
        "s_t sequence never went below epsilon: {final_score}"
    );
    let elapsed = started.elapsed();
    assert_within(elapsed, 300, "criterion 3");
    println!(
        "criterion 3: PASS — halted after {steps} queries with s_t {final_score:.3e} < 1e-3, \
         {elapsed:?}"
    );
}

/// Criterion 4: with a fixed seed and N = 500, the fraction of queries
/// within two sigma of the Gaussian mode is non-decreasing across
/// lambda in {0.1, 1, 10}, and at least 1.5x between the extremes.
#[test]
fn criterion_4_lambda_trade_off() {
    let started = Instant::now();
    let sigma2 = 0.1f64;
    let two_sigma = 2.0 * sigma2.sqrt();
    let mut fracs = Vec::new();
    for lambda in [0.1, 1.0, 10.0] {
        let cfg = EngineConfig {
            dim: 2,
            bbox: BoundingBox::cube(2, -1.0, 1.0).unwrap(),
            lambda: Lambda::Fixed(lambda),
            epsilon: 1e-12,
            budget: 500,
            walk_steps: 100,
            alpha0_deg: Some(89.0),
            n_init: 20,
            include_corners: true,
            seed: 0,
        };
        let mut engine = Engine::new(cfg, gaussian_f(sigma2)).unwrap();
        engine.run().unwrap();
        let frac = engine
            .trace()
            .rows
            .iter()
            .filter(|r| r.point.iter().map(|v| v * v).sum::<f64>().sqrt() <= two_sigma)
            .count() as f64
            / engine.trace().len() as f64;
        fracs.push(frac);
    }
    assert!(
        fracs[0] <= fracs[1] && fracs[1] <= fracs[2],
        "fractions not non-decreasing: {fracs:?}"
    );
    assert!(
        fracs[2] >= 1.5 * fracs[0],
        "lambda=10 fraction {} not 1.5x the lambda=0.1 fraction {}",
        fracs[2],
        fracs[0]
    );
    let elapsed = started.elapsed();
    println!(
        "criterion 4: PASS — fractions within 2 sigma: {:.3} <= {:.3} <= {:.3} \
         (ratio {:.2} >= 1.5), {elapsed:?}",
        fracs[0],
        fracs[1],
        fracs[2],
        fracs[2] / fracs[0]
    );
}

fn run_annr_mae(
    target: &annr_core::testbed::TargetFunction,
    total: usize,
    n_init: usize,
    walk_steps: usize,
    lambda: Lambda,
    seed: u64,
    test: &annr_core::testbed::TestSet,
) -> f64 {
    let corners = 1usize << target.dim;
    let cfg = EngineConfig {
        dim: target.dim,
        bbox: target.bbox.clone(),
        lambda,
        epsilon: 1e-12,
        budget: total - n_init - corners,
        walk_steps,
        alpha0_deg: Some(89.0),
        n_init,
        include_corners: true,
        seed,
    };
    let t = target.clone();
    let mut engine = Engine::new(cfg, move |x: &[f64]| Ok(t.eval(x))).unwrap();
    engine.run().unwrap();
    mae(|x| engine.predict(x), test)
}

fn run_defer_mae(
    target: &annr_core::testbed::TargetFunction,
    total: usize,
    test: &annr_core::testbed::TestSet,
) -> f64 {
    let t = target.clone();
    let mut f = move |x: &[f64]| -> Result<f64, String> { Ok(t.eval(x)) };
    let mut part = DeferPartition::init(&target.bbox, &mut f).unwrap();
    while part.evals() + 2 <= total {
        part.step(&mut f).unwrap();
    }
    mae(|x| part.predict(x).unwrap(), test)
}

fn run_nannr_mae(
    target: &annr_core::testbed::TargetFunction,
    total: usize,
    seed: u64,
    test: &annr_core::testbed::TestSet,
) -> f64 {
    let t = target.clone();
    let mut f = move |x: &[f64]| -> Result<f64, String> { Ok(t.eval(x)) };
    let data = nannr_run(&target.bbox, total, seed, &mut f).unwrap();
    mae(|x| nnr_predict(&data, x), test)
}

/// Criterion 5: on the default spiral at N = 400, the active regressor's
/// 10-seed mean MAE beats both baselines (ordinal check). Budget 10 min.
#[test]
fn criterion_5_spiral_comparison() {
    let started = Instant::now();
    let spiral = builtin("spiral", &BTreeMap::new()).unwrap();
    let test = make_test_set(&spiral, 10_000, TestSetMode::Grid, 7).unwrap();
    let annr_mean = (0..10u64)
        .map(|seed| run_annr_mae(&spiral, 400, 30, 100, Lambda::Auto, seed, &test))
        .sum::<f64>()
        / 10.0;
    let defer_mae = run_defer_mae(&spiral, 400, &test);
    let nannr_mean = (0..10u64)
        .map(|seed| run_nannr_mae(&spiral, 400, seed, &test))
        .sum::<f64>()
        / 10.0;
    assert!(
        annr_mean < defer_mae,
        "annr {annr_mean:.4} not below the trisection baseline {defer_mae:.4}"
    );
    assert!(
        annr_mean < nannr_mean,
        "annr {annr_mean:.4} not below uniform sampling {nannr_mean:.4}"
    );
    let elapsed = started.elapsed();
    assert_within(elapsed, 600, "criterion 5");
    println!(
        "criterion 5: PASS — spiral N=400 MAE: annr {annr_mean:.4} < defer {defer_mae:.4}, \
         annr < nannr {nannr_mean:.4}, {elapsed:?}"
    );
}

/// Criterion 6: MAE stability across ellipse rotations 0..40 degrees at
/// N = 300: the active regressor's across-angle std (of 10-seed means) is
/// below the rectangular baseline's. Budget 10 min.
#[test]
fn criterion_6_rotation_stability() {
    let started = Instant::now();
    let mut annr_by_angle = Vec::new();
    let mut defer_by_angle = Vec::new();
    for angle in [0.0f64, 10.0, 20.0, 30.0, 40.0] {
        let ellipse = builtin("ellipse", &params(&[("angle_deg", angle)])).unwrap();
        let test = make_test_set(&ellipse, 10_000, TestSetMode::Grid, 7).unwrap();
        let annr_mean = (0..10u64)
            .map(|seed| run_annr_mae(&ellipse, 300, 30, 100, Lambda::Auto, seed, &test))
            .sum::<f64>()
            / 10.0;
        annr_by_angle.push(annr_mean);
        defer_by_angle.push(run_defer_mae(&ellipse, 300, &test));
    }
    let annr_std = std_dev(&annr_by_angle);
    let defer_std = std_dev(&defer_by_angle);
    assert!(
        annr_std < defer_std,
        "annr std {annr_std:.5} not below baseline std {defer_std:.5}"
    );
    let elapsed = started.elapsed();
    assert_within(elapsed, 600, "criterion 6");
    println!(
        "criterion 6: PASS — MAE std across angles: annr {annr_std:.5} < defer {defer_std:.5}, \
         {elapsed:?}"
    );
}

/// Criterion 7: 6-D unit-ball indicator at N = 10^4: queries concentrate in
/// the shell |p| in [0.7, 1.3] at least 3x more than uniform sampling, and
/// the final MAE on a 10^5-point uniform test set is lower. Budget 30 min.
#[test]
fn criterion_7_six_dim_ball() {
    let started = Instant::now();
    let ball = builtin("ball", &BTreeMap::new()).unwrap();
    let test = make_test_set(&ball, 100_000, TestSetMode::Uniform, 999).unwrap();
    let total = 10_000usize;
    let in_shell = |p: &[f64]| {
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        (0.7..=1.3).contains(&r)
    };

    let n_init = 50;
    let cfg = EngineConfig {
        dim: 6,
        bbox: ball.bbox.clone(),
        // Lambda from the scale heuristic with the indicator's known range:
        // Vol([-2,2]^6) / (1 - 0) = 4096.
        lambda: Lambda::Fixed(4096.0),
        epsilon: 1e-12,
        budget: total - n_init - 64,
        walk_steps: 30,
        alpha0_deg: Some(89.0),
        n_init,
        include_corners: true,
        seed: 0,
    };
    let t = ball.clone();
    let mut engine = Engine::new(cfg, move |x: &[f64]| Ok(t.eval(x))).unwrap();
    engine.run().unwrap();
    let annr_frac = engine
        .trace()
        .rows
        .iter()
        .filter(|r| in_shell(&r.point))
        .count() as f64
        / engine.trace().len() as f64;
    let annr_mae = mae(|x| engine.predict(x), &test);

    let samples = uniform_samples(&ball.bbox, total, 0);
    let nannr_frac = samples.iter().filter(|p| in_shell(p)).count() as f64 / total as f64;
    let nannr_mae = run_nannr_mae(&ball, total, 0, &test);

    assert!(
        annr_frac >= 3.0 * nannr_frac,
        "shell fraction {annr_frac:.4} below 3x uniform {nannr_frac:.4}"
    );
    assert!(
        annr_mae < nannr_mae,
        "annr mae {annr_mae:.6} not below nannr {nannr_mae:.6}"
    );
    let elapsed = started.elapsed();
    assert_within(elapsed, 1800, "criterion 7");
    println!(
        "criterion 7: PASS — shell fractions {annr_frac:.4} vs {nannr_frac:.4} \
         (ratio {:.1} >= 3), mae {annr_mae:.6} < {nannr_mae:.6}, {elapsed:?}",
        annr_frac / nannr_frac.max(1e-12)
    );
}

/// Criterion 8: the empty-circumsphere assertion is live in this build: it
/// fires once per interior query and a violation panics. Criteria 3-7 all
/// run engine steps under it; this test certifies the instrumentation.
#[test]
#[allow(clippy::assertions_on_constants)]
fn criterion_8_empty_circumsphere_assertion() {
    assert!(
        cfg!(debug_assertions),
        "acceptance must run with debug assertions enabled"
    );
    let cfg = EngineConfig {
        dim: 2,
        bbox: BoundingBox::cube(2, -1.0, 1.0).unwrap(),
        lambda: Lambda::Auto,
        epsilon: 1e-12,
        budget: 300,
        walk_steps: 100,
        alpha0_deg: Some(89.0),
        n_init: 20,
        include_corners: true,
        seed: 3,
    };
    let mut engine = Engine::new(cfg, gaussian_f(0.1)).unwrap();
    engine.run().unwrap();
    let interior = engine.trace().rows.iter().filter(|r| !r.clamped).count() as u64;
    let checks = engine.circumsphere_checks();
    assert_eq!(
        checks, interior,
        "assertion fired {checks} times for {interior} interior queries"
    );
    assert!(checks > 0, "no interior queries were checked");
    println!(
        "criterion 8: PASS — {checks} interior queries all satisfied the \
         (1 - 1e-6) * circumradius bound (assertions live in criteria 3-7 too)"
    );
}

/// Criterion 9: a 100-query run against a stub evaluator process equals the
/// same run evaluated in-process. Budget 1 min.
#[test]
fn criterion_9_external_protocol_round_trip() {
    let started = Instant::now();
    let make_cfg = || EngineConfig {
        dim: 2,
        bbox: BoundingBox::cube(2, -1.0, 1.0).unwrap(),
        lambda: Lambda::Auto,
        epsilon: 1e-12,
        budget: 100 - 14,
        walk_steps: 60,
        alpha0_deg: Some(89.0),
        n_init: 10,
        include_corners: true,
        seed: 0,
    };

    let gaussian = builtin("gaussian", &BTreeMap::new()).unwrap();
    let t = gaussian.clone();
    let mut in_process = Engine::new(make_cfg(), move |x: &[f64]| Ok(t.eval(x))).unwrap();
    in_process.run().unwrap();

    let mut cmd = Command::new(env!("CARGO_BIN_EXE_annr-eval-stub"));
    cmd.args(["--target", "gaussian"]);
    let mut proc = ExternalProcess::spawn(cmd, 2, Duration::from_secs(30)).unwrap();
    let mut external = Engine::new(make_cfg(), move |x: &[f64]| {
        proc.eval(x).map_err(|e| e.to_string())
    })
    .unwrap();
    external.run().unwrap();

    let a: &RunTrace = in_process.trace();
    let b: &RunTrace = external.trace();
    assert_eq!(a.len() + in_process.init_evals(), 100);
    assert!(
        a.same_queries(b),
        "external trace diverged from the in-process trace"
    );
    let elapsed = started.elapsed();
    assert_within(elapsed, 60, "criterion 9");
    println!(
        "criterion 9: PASS — 100-query external run matches in-process run \
         ({} active queries), {elapsed:?}",
        a.len()
    );
}

/// Criterion 10: the published black-box studies (gravitational-wave
/// likelihood, generative-model latent density) need external simulators and
/// the original rectangular-partition implementation; they are explicitly
/// out of scope at desk scale. The protocol round-trip of criterion 9 is the
/// supported integration route for such evaluators.
#[test]
fn criterion_10_desk_scale_exclusions() {
    // The substitute path must exist and work: handshake + one evaluation
    // through a spawned process.
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_annr-eval-stub"));
    cmd.args(["--fn", "sqnorm"]);
    let mut proc = ExternalProcess::spawn(cmd, 6, Duration::from_secs(10)).unwrap();
    let v = proc.eval(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
    assert_eq!(v, 6.0);
    println!(
        "criterion 10: PASS — documented exclusion: externally hosted likelihood/density \
         studies are out of scope; the evaluator protocol (criterion 9) is their entry point"
    );
}
