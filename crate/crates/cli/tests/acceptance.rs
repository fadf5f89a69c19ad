//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use hqe_cli::generate::{admissible_spectrum, pairs, rotated_matrix};
use hqe_cli::verify::run_battery;
use hqe_core::admissibility::{c_star, XiProfile};
use hqe_core::numeric::fit::{log_log_fit, log_space};
use hqe_core::profile::{closed_form_hessian, solve_implicit, solve_implicit_excess, solve_ode, ProfileSpec};
use hqe_core::subsolution::{mu, Subsolution};
use hqe_core::symfunc::SymVec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["hqe"];
    full.extend_from_slice(args);
    let code = hqe_cli::run(full, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

/// `(label, value)` pairs from the `xi --exact` table.
fn xi_table(text: &str) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    let mut section = "";
    for line in text.lines() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        match cols.first() {
            Some(&"j") | Some(&"k") => section = cols[0],
            _ if cols.len() == 3 && section == "j" => {
                rows.push((format!("xi_lower_{}", cols[0]), cols[1].to_string()));
                rows.push((format!("xi_upper_{}", cols[0]), cols[2].to_string()));
            }
            _ if cols.len() == 3 && section == "k" => rows.push((format!("m_{}{}", cols[0], cols[1]), cols[2].to_string())),
            _ => {}
        }
    }
    rows
}

fn worked_example() -> Verdict {
    let start = Instant::now();
    let expected: [(&str, &[(&str, &str)]); 2] = [
        (
            "1,2,3",
            &[
                ("xi_upper_2", "9/11"),
                ("xi_lower_2", "5/11"),
                ("xi_upper_1", "1/2"),
                ("xi_lower_1", "1/6"),
                ("m_32", "11/6"),
                ("m_31", "12/5"),
                ("m_30", "3"),
                ("m_21", "66/43"),
                ("m_20", "22/9"),
                ("m_10", "2"),
            ],
        ),
        (
            "11,12,13",
            &[
                ("xi_upper_2", "299/431"),
                ("xi_lower_2", "275/431"),
                ("xi_upper_1", "13/36"),
                ("xi_lower_1", "11/36"),
                ("m_32", "431/156"),
                ("m_31", "72/25"),
                ("m_30", "3"),
                ("m_21", "15516/6023"),
                ("m_20", "862/299"),
                ("m_10", "36/13"),
            ],
        ),
    ];
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (a, values) in expected {
        let (code, out, err) = run_cli(&["xi", "--a", a, "--exact"]);
        if code != 0 {
            return verdict(false, format!("xi --a {a} exited {code}: {err}"));
        }
        let table = xi_table(&out);
        for (label, want) in values {
            checked += 1;
            let got = table.iter().find(|(l, _)| l == label).map(|(_, v)| v.as_str());
            if got != Some(*want) {
                mismatches.push(format!("a=({a}) {label}: got {got:?}, want {want}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(1);
    verdict(
        mismatches.is_empty() && fast,
        format!("{checked} exact values, {} mismatches {mismatches:?}, {elapsed:.2?} (< 1 s)", mismatches.len()),
    )
}

fn identity_suite() -> Verdict {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for key in ["identities", "newton", "cone-nesting", "ellipticity"] {
        match run_battery(key, None, Some(10_000), 2, false) {
            Ok(o) => {
                ok &= o.passed;
                details.push(format!("{key}: {}{}", if o.passed { "ok" } else { "FAILED " }, o.witness.unwrap_or_default()));
            }
            Err(e) => {
                ok = false;
                details.push(format!("{key}: error {}", e.message));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        ok && elapsed < Duration::from_secs(30),
        format!("10^4 exact vectors each, n in 3..=8: {}; {elapsed:.2?} (< 30 s)", details.join(", ")),
    )
}

fn rank_one() -> Verdict {
    let start = Instant::now();
    let o = match run_battery("rank-one", None, Some(1000), 3, false) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.message),
    };
    let elapsed = start.elapsed();
    verdict(
        o.passed && elapsed < Duration::from_secs(10),
        format!("1000 instances, n <= 6: {}; {elapsed:.2?} (< 10 s)", o.witness.unwrap_or(o.detail)),
    )
}

/// 50 admissible specs cycling through n = 3, 4, 5; every other one has `k − l = 1`.
fn random_specs(count: usize, seed: u64) -> Vec<(usize, usize, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = 3 + i % 3;
            let all = pairs(n);
            let adjacent: Vec<_> = all.iter().copied().filter(|(k, l)| k - l == 1).collect();
            let (k, l) = if i % 2 == 0 {
                adjacent[rng.gen_range(0..adjacent.len())]
            } else {
                all[rng.gen_range(0..all.len())]
            };
            let a = admissible_spectrum(n, k, l, &mut rng);
            (k, l, a, rng.gen_range(1.0..6.0))
        })
        .collect()
}

fn dual_method() -> Verdict {
    let start = Instant::now();
    let specs = random_specs(50, 4);
    let results: Vec<Result<(f64, f64, usize, usize), String>> = specs
        .par_iter()
        .map(|(k, l, a, beta)| {
            let xi = XiProfile::new(*k, *l, &SymVec::from_slice(a).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let spec = ProfileSpec::from_xi(&xi, *beta).map_err(|e| e.to_string())?;
            let mut worst: f64 = 0.0;
            let mut worst_closed: f64 = 0.0;
            for r in log_space(1.0, 1e3, 40) {
                let implicit = solve_implicit(&spec, r).map_err(|e| e.to_string())?;
                let ode = solve_ode(&spec, r).map_err(|e| e.to_string())?;
                worst = worst.max((implicit - ode).abs());
                if let Some(c) = closed_form_hessian(&spec, r) {
                    worst_closed = worst_closed.max((implicit - c).abs());
                }
            }
            Ok((worst, worst_closed, (k - l == 1) as usize, (*l == 0) as usize))
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let (mut adjacent, mut hessian) = (0, 0);
    for r in results {
        match r {
            Ok((w, c, adj, h)) => {
                worst = worst.max(w);
                worst_closed = worst_closed.max(c);
                adjacent += adj;
                hessian += h;
            }
            Err(e) => return verdict(false, e),
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-8 && worst_closed <= 1e-12 && adjacent > 0 && hessian > 0 && elapsed < Duration::from_secs(60),
        format!(
            "50 specs ({adjacent} with k-l=1, {hessian} with l=0): max |implicit-ode| {worst:.3e} (<= 1e-8), max |implicit-closed| {worst_closed:.3e} (<= 1e-12); {elapsed:.2?} (< 60 s)"
        ),
    )
}

fn exponents() -> Verdict {
    let start = Instant::now();
    let mut cases: Vec<(usize, usize, Vec<f64>, f64)> = Vec::new();
    for (k, l) in [(2, 0), (3, 0), (3, 1)] {
        let c = c_star(3, k, l);
        cases.push((k, l, vec![c; 3], 2.0));
    }
    cases.extend(random_specs(9, 5).into_iter().map(|(k, l, a, _)| (k, l, a, 2.0)));
    let mut worst_psi: f64 = 0.0;
    let mut worst_mu: f64 = 0.0;
    for (k, l, a, beta) in &cases {
        let xi = match XiProfile::new(*k, *l, &SymVec::from_slice(a).expect("spectrum")) {
            Ok(x) => x,
            Err(e) => return verdict(false, e.to_string()),
        };
        let spec = ProfileSpec::from_xi(&xi, *beta).expect("spec");
        let radii = log_space(1e2, 1e4, 9);
        let excess: Vec<f64> = radii.iter().map(|&r| solve_implicit_excess(&spec, r).expect("excess")).collect();
        let mus: Vec<f64> = radii.iter().map(|&r| mu(r, *beta, &spec).expect("mu")).collect();
        let psi_slope = log_log_fit(&radii, &excess).expect("fit").slope;
        let mu_slope = log_log_fit(&radii, &mus).expect("fit").slope;
        worst_psi = worst_psi.max(((psi_slope + spec.m) / spec.m).abs());
        worst_mu = worst_mu.max(((mu_slope + spec.m - 2.0) / (spec.m - 2.0)).abs());
    }
    verdict(
        worst_psi <= 0.005 && worst_mu <= 0.01,
        format!(
            "{} specs, r in [1e2, 1e4]: worst relative slope error psi-1 {worst_psi:.3e} (<= 0.5%), mu {worst_mu:.3e} (<= 1%); {:.2?}",
            cases.len(),
            start.elapsed()
        ),
    )
}

fn subsolution_suite() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut jobs = Vec::new();
    for n in 3..=5 {
        for (k, l) in pairs(n) {
            for _ in 0..20 {
                let a = admissible_spectrum(n, k, l, &mut rng);
                let matrix = rotated_matrix(&a, &mut rng);
                let alpha = rng.gen_range(-1.0..1.0);
                let beta = rng.gen_range(1.5..4.0);
                let gamma = rng.gen_range(1.0..2.0);
                jobs.push((n, k, l, matrix, alpha, beta, gamma, rng.gen::<u64>()));
            }
        }
    }
    let results: Vec<Result<(usize, usize, f64), String>> = jobs
        .par_iter()
        .map(|(_, k, l, matrix, alpha, beta, gamma, seed)| {
            let sub = Subsolution::new(matrix, *k, *l, *alpha, *beta, *gamma).map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let samples = sub.exterior_samples(1e3, 10_000, &mut rng);
            let report = sub.verify(&samples).map_err(|e| e.to_string())?;
            let min_sigma = report.worst_sigma.iter().copied().fold(f64::INFINITY, f64::min);
            Ok((report.violation_count + report.bound_failures, report.sample_count, min_sigma))
        })
        .collect();
    let mut violations = 0;
    let mut samples = 0;
    let mut min_sigma = f64::INFINITY;
    for r in results {
        match r {
            Ok((v, s, m)) => {
                violations += v;
                samples += s;
                min_sigma = min_sigma.min(m);
            }
            Err(e) => return verdict(false, e),
        }
    }
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && min_sigma > 0.0 && elapsed < Duration::from_secs(300),
        format!(
            "{} matrices over n = 3..5 and all (k, l), {samples} samples: {violations} violations, min sigma_j {min_sigma:.3e}; {elapsed:.2?} (< 5 min)",
            jobs.len()
        ),
    )
}

fn end_to_end() -> Verdict {
    let mut ok = true;
    let mut details = Vec::new();
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    for name in ["ball_k2_l0", "ball_k3_l0", "ball_k3_l1"] {
        let start = Instant::now();
        let problem = problems_dir().join(format!("{name}.json"));
        let out_dir = tmp.join(format!("acceptance_{name}"));
        let (code, out, err) = run_cli(&[
            "solve",
            "--problem",
            problem.to_str().expect("path"),
            "--out",
            out_dir.to_str().expect("path"),
        ]);
        let elapsed = start.elapsed();
        if code != 0 {
            ok = false;
            details.push(format!("{name}: exit {code} {err}"));
            continue;
        }
        let report: serde_json::Value = match serde_json::from_str(&out) {
            Ok(v) => v,
            Err(e) => {
                ok = false;
                details.push(format!("{name}: bad report {e}"));
                continue;
            }
        };
        let checks = &report["checks"];
        let boundary = checks["boundary_max_error"].as_f64().unwrap_or(f64::INFINITY);
        let ordering = checks["ordering"]["holds"].as_bool().unwrap_or(false);
        let identity = checks["identity_max_error"].as_f64().unwrap_or(f64::INFINITY);
        let slope_error = report["decay"]["slope_relative_error"].as_f64().unwrap_or(f64::INFINITY);
        let pass = boundary <= 1e-10
            && ordering
            && identity <= 1e-10
            && slope_error <= 0.01
            && elapsed < Duration::from_secs(300);
        ok &= pass;
        details.push(format!(
            "{name}: exit 0, boundary {boundary:.1e}, ordering {ordering}, identity {identity:.1e}, slope error {slope_error:.1e}, {elapsed:.1?}"
        ));
    }
    verdict(ok, details.join("; "))
}

fn hypothesis_gates() -> Verdict {
    let below = problems_dir().join("ball_k2_l0_below_threshold.json");
    let (code_c, _, err_c) = run_cli(&["solve", "--problem", below.to_str().expect("path")]);
    let gate_c = code_c == 3 && err_c.contains("c_tilde");
    let rejected = problems_dir().join("spectrum_123_k2_l1.json");
    let (code_m, _, err_m) = run_cli(&["solve", "--problem", rejected.to_str().expect("path")]);
    let gate_m = code_m == 2 && err_m.contains("requires m_{k,l} > 2");
    verdict(
        gate_c && gate_m,
        format!(
            "c < c_tilde -> exit {code_c} ({}); a = (1,2,3) for (2,1) -> exit {code_m} ({})",
            err_c.trim(),
            err_m.trim()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("worked example", worked_example),
        ("identity suite", identity_suite),
        ("rank-one equivalence", rank_one),
        ("psi dual-method agreement", dual_method),
        ("asymptotic exponents", exponents),
        ("subsolution verification", subsolution_suite),
        ("end-to-end sandwich", end_to_end),
        ("hypothesis gates", hypothesis_gates),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.passed {
            failures += 1;
        }
        println!("criterion {} [{name}]: {} - {}", i + 1, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
