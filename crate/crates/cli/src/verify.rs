//! Randomized invariant batteries behind `hqe verify`.
//!
//! Each battery compares a library quantity with an independent oracle or
//! checks an inequality it must satisfy. With the fault flag set the checked
//! quantity is corrupted before the comparison, so every battery must fail.

use std::io::Write;

use hqe_core::admissibility::{prop_wtakl_check, xi_at, xi_bounds, XiProfile};
use hqe_core::boundary::{touching_quadratic, BoundaryData, ConvexDomain, MeshOptions, Monomial, Polynomial};
use hqe_core::exterior::{self, annulus_samples, comparison_check, CSpec, ExteriorProblemSpec};
use hqe_core::numeric::fit::log_space;
use hqe_core::profile::{closed_form_hessian, solve_implicit_excess, solve_ode, asymptotic_constant, ProfileSpec};
use hqe_core::scalar::{format_rational, ratio, BigRational};
use hqe_core::spectra::{eigh, SymMatrix};
use hqe_core::subsolution::{Subsolution, QUOTIENT_SLACK};
use hqe_core::symfunc::{in_gamma_k, quotient_ellipticity_gaps, sigma, sigma_rank_one, SymVec, SymmetricTable};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::format::float;
use crate::generate::{
    admissible_spectrum, normal_vector, pairs, positive_rational_vector, rational_in_cone, rational_vector,
    rotated_matrix, rotation,
};
use crate::{CmdResult, Failure, VerifyArgs, EXIT_OK, EXIT_VIOLATION};

/// Result of one battery.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub key: &'static str,
    pub description: &'static str,
    pub trials: usize,
    pub passed: bool,
    pub detail: String,
    pub witness: Option<String>,
}

struct Setup {
    key: &'static str,
    description: &'static str,
    n: Option<usize>,
    trials: usize,
    fault: bool,
    rng: ChaCha8Rng,
}

impl Setup {
    fn dim(&mut self, lo: usize, hi: usize) -> usize {
        self.n.unwrap_or_else(|| self.rng.gen_range(lo..=hi))
    }
}

type Battery = fn(&mut Setup) -> Result<Outcome, Failure>;

/// `(key, default trials, description, battery)`.
const BATTERIES: &[(&str, usize, &str, Battery)] = &[
    ("identities", 300, "σ_k = σ_{k;i} + p_i σ_{k−1;i} and Σ p_i σ_{k−1;i} = k σ_k, exact", identities),
    ("newton", 300, "σ_{j−1} σ_{j+1} <= σ_j², exact", newton),
    ("cone-nesting", 300, "Γ_{k+1} ⊂ Γ_k, exact", cone_nesting),
    ("ellipticity", 200, "σ_{k−1;i} σ_l − σ_k σ_{l−1;i} > 0 on Γ_k, exact", ellipticity),
    ("rank-one", 1000, "σ_k(diag(p) + s qqᵀ) against eigenvalues, 1e−10", rank_one),
    ("xi-bounds", 300, "ξ_k <= Ξ_k(a, x) <= ξ̄_k with equality on axes, exact", xi_range),
    ("exponent", 300, "k − l <= m_{k,l} <= n, k − l >= 2 ⇒ m > 2, m_{n,0} = n", exponent),
    ("profile", 20, "implicit vs ODE ψ (1e−8), bounds, l = 0 closed form (1e−12)", profile),
    ("subsolution", 8, "σ_j(D²Φ) > 0 for j <= k and σ_k >= σ_l at samples", subsolution),
    ("touching", 6, "Q_ξ(ξ) = φ(ξ) and Q_ξ <= φ on an independent boundary mesh", touching),
    ("comparison", 2, "u̲ <= ū on the boundary mesh and at exterior samples", comparison),
];

pub fn battery_keys() -> Vec<&'static str> {
    BATTERIES.iter().map(|b| b.0).collect()
}

/// Runs one battery with its own random stream, so results do not depend on
/// which other batteries run.
pub fn run_battery(key: &str, n: Option<usize>, trials: Option<usize>, seed: u64, fault: bool) -> Result<Outcome, Failure> {
    let (index, entry) = BATTERIES
        .iter()
        .enumerate()
        .find(|(_, b)| b.0 == key)
        .ok_or_else(|| Failure::invalid(format!("unknown battery {key:?}; known: {}", battery_keys().join(", "))))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut setup = Setup {
        key: entry.0,
        description: entry.2,
        n,
        trials: trials.unwrap_or(entry.1),
        fault,
        rng,
    };
    (entry.3)(&mut setup)
}

pub fn run(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    if let Some(n) = args.n {
        if n < 3 {
            return Err(Failure::invalid("--n must be at least 3"));
        }
    }
    let keys: Vec<&str> = match &args.battery {
        Some(k) => vec![k.as_str()],
        None => battery_keys(),
    };
    if let Some(unknown) = keys.iter().find(|k| !battery_keys().contains(k)) {
        return Err(Failure::invalid(format!(
            "unknown battery {unknown:?}; known: {}",
            battery_keys().join(", ")
        )));
    }
    writeln!(out, "{:<14} {:<6} {:>7}  detail", "battery", "result", "trials")?;
    let mut all = true;
    for key in keys {
        let o = run_battery(key, args.n, args.trials, args.seed, args.inject_fault)?;
        all &= o.passed;
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{:<14} {:<6} {:>7}  {}: {}", o.key, verdict, o.trials, o.description, o.detail)?;
        if let Some(w) = &o.witness {
            writeln!(out, "  witness: {w}")?;
        }
    }
    Ok(if all { EXIT_OK } else { EXIT_VIOLATION })
}

fn show_q(v: &SymVec<BigRational>) -> String {
    format!("({})", v.entries().iter().map(format_rational).collect::<Vec<_>>().join(", "))
}

fn show_f(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| float(*x)).collect::<Vec<_>>().join(", "))
}

fn outcome(s: &Setup, detail: String, witness: Option<String>) -> Outcome {
    Outcome {
        key: s.key,
        description: s.description,
        trials: s.trials,
        passed: witness.is_none(),
        detail,
        witness,
    }
}

/// A nonnegative quantity pushed below zero when the fault flag is set.
fn corrupt_q(v: BigRational, fault: bool) -> BigRational {
    if fault {
        let shift = if v < ratio(0, 1) { -v.clone() } else { v.clone() } + ratio(1, 1);
        v - shift
    } else {
        v
    }
}

fn corrupt_f(v: f64, fault: bool) -> f64 {
    if fault {
        v - (v.abs() + 1.0)
    } else {
        v
    }
}

fn identities(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut max_n = 0;
    for _ in 0..s.trials {
        let n = s.dim(3, 8);
        max_n = max_n.max(n);
        let p = rational_vector(n, &mut s.rng);
        let table = SymmetricTable::new(&p);
        let offset = if s.fault { ratio(1, 1000) } else { ratio(0, 1) };
        let deleted: Vec<SymmetricTable<BigRational>> = (0..n)
            .map(|i| {
                let mut rest = p.entries().to_vec();
                rest.remove(i);
                SymVec::new(rest).map(|v| SymmetricTable::new(&v))
            })
            .collect::<Result<_, _>>()
            .map_err(Failure::io)?;
        let omitted = |d: isize, i: usize| deleted[i].sigma(d);
        for k in 0..=n as isize {
            let mut weighted = ratio(0, 1);
            for i in 0..n {
                let omit_lower = omitted(k - 1, i);
                let split = table.sigma(k) - omitted(k, i) - &p.entries()[i] * &omit_lower + &offset;
                if !split.is_zero() {
                    return Ok(outcome(s,
                        "σ_k ≠ σ_{k;i} + p_i σ_{k−1;i}".into(),
                        Some(format!("p = {}, k = {k}, i = {}", show_q(&p), i + 1)),
                    ));
                }
                weighted = weighted + &p.entries()[i] * &omit_lower;
            }
            if k >= 1 && !(weighted - ratio(k as i64, 1) * table.sigma(k) + &offset).is_zero() {
                return Ok(outcome(s,
                    "Σ p_i σ_{k−1;i} ≠ k σ_k".into(),
                    Some(format!("p = {}, k = {k}", show_q(&p))),
                ));
            }
        }
    }
    Ok(outcome(s, format!("exact, n <= {max_n}"), None))
}

fn newton(s: &mut Setup) -> Result<Outcome, Failure> {
    for _ in 0..s.trials {
        let n = s.dim(3, 8);
        let p = rational_vector(n, &mut s.rng);
        let table = SymmetricTable::new(&p);
        for j in 1..n as isize {
            let gap = table.sigma(j) * table.sigma(j) - table.sigma(j - 1) * table.sigma(j + 1);
            if corrupt_q(gap, s.fault) < ratio(0, 1) {
                return Ok(outcome(s,
                    "σ_{j−1} σ_{j+1} > σ_j²".into(),
                    Some(format!("λ = {}, j = {j}", show_q(&p))),
                ));
            }
        }
    }
    Ok(outcome(s, "exact".into(), None))
}

fn cone_nesting(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut members = 0usize;
    for _ in 0..s.trials {
        let n = s.dim(3, 8);
        let k = s.rng.gen_range(1..n);
        let p = rational_in_cone(k + 1, n, &mut s.rng);
        members += 1;
        let table = SymmetricTable::new(&p);
        for j in 1..=k {
            if corrupt_q(table.sigma(j as isize), s.fault) <= ratio(0, 1) || !in_gamma_k(j, &p) {
                return Ok(outcome(s,
                    "a point of Γ_{k+1} outside Γ_j".into(),
                    Some(format!("λ = {}, k + 1 = {}, j = {j}", show_q(&p), k + 1)),
                ));
            }
        }
    }
    Ok(outcome(s, format!("{members} cone members checked"), None))
}

fn ellipticity(s: &mut Setup) -> Result<Outcome, Failure> {
    for _ in 0..s.trials {
        let n = s.dim(3, 8);
        let k = s.rng.gen_range(1..=n);
        let lam = rational_in_cone(k, n, &mut s.rng);
        for l in 0..k {
            let gaps = quotient_ellipticity_gaps(k, l, &lam).map_err(Failure::io)?;
            for (i, gap) in gaps.into_iter().enumerate() {
                if corrupt_q(gap, s.fault) <= ratio(0, 1) {
                    return Ok(outcome(s,
                        "nonpositive ellipticity gap on Γ_k".into(),
                        Some(format!("λ = {}, k = {k}, l = {l}, i = {}", show_q(&lam), i + 1)),
                    ));
                }
            }
        }
    }
    Ok(outcome(s, "exact, strict".into(), None))
}

fn rank_one(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut worst: f64 = 0.0;
    for _ in 0..s.trials {
        let n = s.dim(2, 6);
        let p = normal_vector(n, &mut s.rng);
        let q = normal_vector(n, &mut s.rng);
        let scale: f64 = s.rng.gen_range(-2.0..2.0);
        let mut m = SymMatrix::diagonal(&p);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, m.get(i, j) + scale * q[i] * q[j]);
            }
        }
        let eig = eigh(&m).map_err(Failure::io)?;
        let pv = SymVec::from_slice(&p).map_err(Failure::io)?;
        let qv = SymVec::from_slice(&q).map_err(Failure::io)?;
        let abs = eig.values.abs();
        for k in 1..=n as isize {
            let mut v = sigma_rank_one(k, &pv, &qv, &scale).map_err(Failure::io)?;
            if s.fault {
                v = v * (1.0 + 1e-3) + 1e-3;
            }
            let oracle = sigma(k, &eig.values);
            let err = (v - oracle).abs() / sigma(k, &abs).max(1.0);
            worst = worst.max(err);
            if !(err <= 1e-10) {
                return Ok(outcome(s,
                    format!("relative error {}", float(err)),
                    Some(format!("p = {}, q = {}, s = {}, k = {k}", show_f(&p), show_f(&q), float(scale))),
                ));
            }
        }
    }
    Ok(outcome(s, format!("max relative error {}", float(worst)), None))
}

fn xi_range(s: &mut Setup) -> Result<Outcome, Failure> {
    for _ in 0..s.trials {
        let n = s.dim(3, 8);
        let a = positive_rational_vector(n, &mut s.rng);
        let mut x = rational_vector(n, &mut s.rng).into_entries();
        if x.iter().all(|v| v.is_zero()) {
            x[0] = ratio(1, 1);
        }
        let (imin, imax) = {
            let e = a.entries();
            let mut lo = 0;
            let mut hi = 0;
            for i in 0..n {
                if e[i] < e[lo] {
                    lo = i;
                }
                if e[i] > e[hi] {
                    hi = i;
                }
            }
            (lo, hi)
        };
        let axis = |i: usize| (0..n).map(|j| ratio((i == j) as i64, 1)).collect::<Vec<_>>();
        for k in 1..=n {
            let (lower, upper) = xi_bounds(k, &a).map_err(Failure::io)?;
            let mut value = xi_at(k, &a, &x).map_err(Failure::io)?;
            if s.fault {
                value = value + ratio(2, 1);
            }
            let at_min = xi_at(k, &a, &axis(imin)).map_err(Failure::io)?;
            let at_max = xi_at(k, &a, &axis(imax)).map_err(Failure::io)?;
            let average = ratio(k as i64, n as i64);
            let ok = lower <= value
                && value <= upper
                && at_min == lower
                && at_max == upper
                && lower <= average
                && average <= upper;
            if !ok {
                return Ok(outcome(s,
                    "Ξ_k outside [ξ_k, ξ̄_k] or bounds not attained on axes".into(),
                    Some(format!(
                        "a = {}, x = {}, k = {k}",
                        show_q(&a),
                        show_q(&SymVec::new(x.clone()).map_err(Failure::io)?)
                    )),
                ));
            }
        }
    }
    Ok(outcome(s, "exact".into(), None))
}

fn exponent(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut above_two = 0usize;
    for _ in 0..s.trials {
        let n = s.dim(3, 8);
        let all = pairs(n);
        let (k, l) = all[s.rng.gen_range(0..all.len())];
        let raw: Vec<f64> = (0..n).map(|_| s.rng.gen_range(0.05f64..20.0)).collect();
        let v = SymVec::from_slice(&raw).map_err(Failure::io)?;
        let factor = hqe_core::admissibility::normalizing_factor(k, l, &v).map_err(Failure::io)?;
        let a = SymVec::from_slice(&raw.iter().map(|x| x * factor).collect::<Vec<_>>()).map_err(Failure::io)?;
        let profile = XiProfile::new(k, l, &a).map_err(Failure::io)?;
        let mut m = profile.m;
        if s.fault {
            m = -m;
        }
        let gap = (k - l) as f64;
        let tol = 1e-12 * n as f64;
        // m >= k − l with equality only for (n, 0); m ξ̄_k > k − l unless l = 0
        let lower_ok = if k == n && l == 0 { (m - gap).abs() <= tol * gap } else { m > gap };
        let weighted = m * profile.xi_upper_k;
        let weighted_ok = if l == 0 { (weighted - gap).abs() <= tol * gap } else { weighted > gap };
        let upper_ok = m <= n as f64 * (1.0 + tol);
        let structural = prop_wtakl_check(k, l, &a);
        let ok = lower_ok && weighted_ok && upper_ok && structural.is_ok();
        if structural == Ok(true) {
            above_two += 1;
        }
        if !ok {
            return Ok(outcome(s,
                format!("m_{{{k},{l}}} = {} out of range ({:?})", float(m), structural),
                Some(format!("a = {}", show_f(a.entries()))),
            ));
        }
    }
    Ok(outcome(s, format!("{above_two} spectra with m > 2"), None))
}

fn profile(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut worst: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    for _ in 0..s.trials {
        let n = s.dim(3, 6);
        let all = pairs(n);
        let (k, l) = all[s.rng.gen_range(0..all.len())];
        let a = admissible_spectrum(n, k, l, &mut s.rng);
        let beta = s.rng.gen_range(1.0..5.0);
        let xi = XiProfile::new(k, l, &SymVec::from_slice(&a).map_err(Failure::io)?).map_err(Failure::io)?;
        let spec = ProfileSpec::from_xi(&xi, beta).map_err(Failure::io)?;
        let limit = asymptotic_constant(&spec);
        let mut previous = f64::INFINITY;
        for r in log_space(1.0, 1e3, 13) {
            let mut excess = solve_implicit_excess(&spec, r).map_err(Failure::io)?;
            if s.fault {
                excess += 1e-6;
            }
            let psi = 1.0 + excess;
            let ode = solve_ode(&spec, r).map_err(Failure::io)?;
            let diff = (psi - ode).abs();
            worst = worst.max(diff);
            let scaled = excess * r.powf(spec.m);
            let bounds = scaled >= (beta - 1.0) * (1.0 - 1e-9) && scaled <= limit * (1.0 + 1e-9);
            let closed = closed_form_hessian(&spec, r).map(|c| (psi - c).abs());
            worst_closed = worst_closed.max(closed.unwrap_or(0.0));
            let ok = diff <= 1e-8 && bounds && psi <= previous && closed.map_or(true, |c| c <= 1e-12);
            previous = psi;
            if !ok {
                return Ok(outcome(s,
                    format!("|Δ| = {}, bounds {bounds}", float(diff)),
                    Some(format!("k = {k}, l = {l}, a = {}, β = {}, r = {}", show_f(&a), float(beta), float(r))),
                ));
            }
        }
    }
    Ok(outcome(s,
        format!("max |Δ| {}, max closed-form |Δ| {}", float(worst), float(worst_closed)),
        None,
    ))
}

fn subsolution(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut checked = 0usize;
    for _ in 0..s.trials {
        let n = s.dim(3, 5);
        let all = pairs(n);
        let (k, l) = all[s.rng.gen_range(0..all.len())];
        let a = admissible_spectrum(n, k, l, &mut s.rng);
        let matrix = rotated_matrix(&a, &mut s.rng);
        let beta = s.rng.gen_range(1.5..4.0);
        let gamma = s.rng.gen_range(1.0..2.0);
        let alpha = s.rng.gen_range(-1.0..1.0);
        let sub = Subsolution::new(&matrix, k, l, alpha, beta, gamma).map_err(Failure::io)?;
        let samples = sub.exterior_samples(1e3, 1000, &mut s.rng);
        checked += samples.len();
        let report = sub.verify(&samples).map_err(Failure::io)?;
        // the report's σ_k >= σ_l check is relative to σ_k; the ratio form is scale free
        let margin = corrupt_f(report.worst_ratio_minus_one, s.fault);
        if !report.passed() || margin < -2.0 * QUOTIENT_SLACK {
            let witness = report
                .violations
                .first()
                .map(|v| format!("{} at x = {} ({})", v.kind, show_f(&v.point), float(v.value)))
                .unwrap_or_else(|| format!("worst σ_k/σ_l − 1 = {}", float(margin)));
            return Ok(outcome(s,
                format!("k = {k}, l = {l}, a = {}", show_f(&a)),
                Some(witness),
            ));
        }
    }
    Ok(outcome(s, format!("{checked} samples"), None))
}

fn random_quadratic<R: Rng + ?Sized>(n: usize, size: f64, rng: &mut R) -> Polynomial {
    let mut terms = vec![Monomial {
        coef: rng.gen_range(-size..size),
        powers: vec![0; n],
    }];
    for i in 0..n {
        let mut powers = vec![0; n];
        powers[i] = 1;
        terms.push(Monomial {
            coef: rng.gen_range(-size..size),
            powers: powers.clone(),
        });
        for j in i..n {
            let mut p = vec![0; n];
            p[i] += 1;
            p[j] += 1;
            terms.push(Monomial {
                coef: rng.gen_range(-size..size),
                powers: p,
            });
        }
    }
    Polynomial { terms }
}

fn touching(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut worst_margin = f64::INFINITY;
    let opts = MeshOptions {
        boundary_points: 200,
        ..MeshOptions::default()
    };
    for _ in 0..s.trials {
        let n = s.dim(2, 4);
        let axes: Vec<f64> = (0..n).map(|_| s.rng.gen_range(0.6..2.0)).collect();
        let center: Vec<f64> = (0..n).map(|_| s.rng.gen_range(-0.3..0.3)).collect();
        let rot = rotation(n, &mut s.rng);
        let domain = ConvexDomain::ellipsoid(center, axes, Some(rot)).map_err(Failure::io)?;
        let phi = random_quadratic(n, 0.5, &mut s.rng);
        let data = BoundaryData::new(phi.clone(), n).map_err(Failure::io)?;
        let spectrum: Vec<f64> = (0..n).map(|_| s.rng.gen_range(0.5..2.0)).collect();
        let matrix = rotated_matrix(&spectrum, &mut s.rng);
        let coarse = domain.boundary_mesh(opts.boundary_points);
        // an independent check mesh of a different size
        let check = domain.boundary_mesh(3 * opts.boundary_points + 7);
        let scale = check.iter().map(|b| phi.eval(&b.point).abs()).fold(1.0, f64::max);
        for xi in coarse.iter().step_by(coarse.len() / 5 + 1) {
            let q = touching_quadratic(&domain, &data, &matrix, xi, &opts).map_err(Failure::io)?;
            let shift = if s.fault { 1e-3 } else { 0.0 };
            let at_xi = (q.eval(&xi.point) + shift - phi.eval(&xi.point)).abs();
            let below = check
                .iter()
                .map(|b| phi.eval(&b.point) - q.eval(&b.point) - shift)
                .fold(f64::INFINITY, f64::min);
            worst_margin = worst_margin.min(below);
            if at_xi > 1e-10 * scale || below < -1e-10 * scale {
                return Ok(outcome(s,
                    format!("|Q(ξ) − φ(ξ)| = {}, min (φ − Q) = {}", float(at_xi), float(below)),
                    Some(format!("ξ = {}, A eigenvalues {}", show_f(&xi.point), show_f(&spectrum))),
                ));
            }
        }
    }
    Ok(outcome(s, format!("min (φ − Q) on check mesh {}", float(worst_margin)), None))
}

fn comparison(s: &mut Setup) -> Result<Outcome, Failure> {
    let mut checked = 0usize;
    for _ in 0..s.trials {
        let n = s.dim(3, 3);
        let all = pairs(n);
        let (k, l) = all[s.rng.gen_range(0..all.len())];
        let a = admissible_spectrum(n, k, l, &mut s.rng);
        let matrix = rotated_matrix(&a, &mut s.rng);
        let center: Vec<f64> = (0..n).map(|_| s.rng.gen_range(-0.2..0.2)).collect();
        let domain = ConvexDomain::ball(center, s.rng.gen_range(1.0..2.0)).map_err(Failure::io)?;
        let phi = random_quadratic(n, 0.3, &mut s.rng);
        let b: Vec<f64> = (0..n).map(|_| s.rng.gen_range(-0.5..0.5)).collect();
        let mesh = MeshOptions {
            boundary_points: 200,
            shell_points: 500,
            ..MeshOptions::default()
        };
        let offset = s.rng.gen_range(0.0..1.0);
        let spec = ExteriorProblemSpec::new(domain, phi, matrix, b, CSpec::AboveThreshold { above_threshold: offset }, k, l, mesh)
            .map_err(Failure::io)?;
        let sandwich = exterior::build_sandwich(&spec).map_err(Failure::io)?;
        let boundary: Vec<Vec<f64>> = sandwich
            .envelope
            .mesh
            .iter()
            .map(|p| sandwich.reduced.from_reduced(&p.point))
            .collect();
        let interior = annulus_samples(&sandwich, 1e3, 2000, &mut s.rng);
        checked += boundary.len() + interior.len();
        let fault = s.fault;
        let lower = |x: &[f64]| {
            let v = sandwich.u_lower(x).ok().flatten()?;
            // the corrupted lower function sits just above ū
            Some(if fault { v.max(sandwich.u_upper(x)) + 1e-3 } else { v })
        };
        let upper = |x: &[f64]| Some(sandwich.u_upper(x));
        let witness = match comparison_check(lower, upper, &boundary, &interior) {
            Ok(o) if o.holds => None,
            Ok(o) => Some(format!(
                "u̲ − ū = {} at x = {}",
                float(o.worst_gap),
                o.witness.as_deref().map_or("?".into(), show_f)
            )),
            Err(e) => Some(e.to_string()),
        };
        if let Some(w) = witness {
            return Ok(outcome(s,
                format!("k = {k}, l = {l}, a = {}", show_f(&a)),
                Some(w),
            ));
        }
    }
    Ok(outcome(s, format!("{checked} points"), None))
}
