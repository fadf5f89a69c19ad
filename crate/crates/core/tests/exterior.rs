use std::path::PathBuf;

use hqe_core::exterior::{solve, ExteriorProblemSpec, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn problem(name: &str) -> ExteriorProblemSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name);
    ExteriorProblemSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn light() -> SolveOptions {
    SolveOptions {
        samples: 5_000,
        shell_samples: 200,
        subsolution_samples: 1_000,
        ..SolveOptions::default()
    }
}

#[test]
fn general_domains_pass_every_check() {
    for name in ["ellipsoid_k3_l1.json", "superellipsoid_k2_l0.json"] {
        let spec = problem(name);
        let (_, report) = solve(&spec, &light(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(report.passed, "{name}: {}", serde_json::to_string_pretty(&report).unwrap());
        assert!(report.checks.ordering.holds);
        assert!(report.checks.boundary_max_error <= 1e-10);
    }
}

#[test]
fn sandwich_is_ordered_and_gap_is_the_tail_far_out() {
    let spec = problem("ellipsoid_k3_l1.json");
    let (sandwich, _) = solve(&spec, &light(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let far = 10.0 * sandwich.outer_branch_radius();
    for _ in 0..200 {
        let dir: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radius = rng.gen_range(1.0..4.0) * far;
        let x: Vec<f64> = dir.iter().map(|v| v / norm * radius).collect();
        let lower = sandwich.u_lower(&x).unwrap().expect("outside the domain");
        let upper = sandwich.u_upper(&x);
        assert!(lower <= upper);
        let gap = upper - lower;
        let tail = sandwich.mu_at(&x).unwrap();
        assert!((gap - tail).abs() <= 1e-9 * upper.abs().max(1.0), "gap {gap} vs tail {tail}");
    }
}

#[test]
fn solve_is_deterministic_for_a_seed() {
    let spec = problem("ball_k3_l1.json");
    let run = |seed| {
        let (_, report) = solve(&spec, &light(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        serde_json::to_string(&report).unwrap()
    };
    assert_eq!(run(9), run(9));
}

#[test]
fn rejected_problems_report_their_reason() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems");
    let text = std::fs::read_to_string(path.join("spectrum_123_k2_l1.json")).unwrap();
    assert!(ExteriorProblemSpec::from_json(&text).is_err());
    let below = problem("ball_k2_l0_below_threshold.json");
    assert!(solve(&below, &light(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    assert!(ExteriorProblemSpec::from_json("{\"domain\": {\"kind\": \"ball\"}}").is_err());
}
