//! `xi`, `psi`, `mu`, `subsolution`, `boundary` and `solve`.

use std::fs;
use std::io::Write;
use std::path::Path;

use hqe_core::admissibility::{normalizing_factor, xi_bounds, XiProfile};
use hqe_core::boundary::{constants, envelope, BoundaryError, EnvelopeConstants};
use hqe_core::exterior::{self, ExteriorError, ExteriorProblemSpec, ProblemFile, SolveOptions};
use hqe_core::numeric::fit::log_space;
use hqe_core::profile::{
    asymptotic_constant, closed_form_hessian, solve_implicit_excess, solve_ode, ProfileError, ProfileSpec,
};
use hqe_core::scalar::{format_rational, parse_rational, BigRational, Scalar};
use hqe_core::spectra::SymMatrix;
use hqe_core::subsolution::{mu_detailed, mu_lower_bound, Subsolution, SubsolutionError};
use hqe_core::symfunc::{in_gamma_plus, SymVec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::format::{dat, flag, float, json, write_csv};
use crate::generate::rotated_matrix;
use crate::{
    CmdResult, Failure, ProblemArgs, ProfileArgs, SolveArgs, SubsolutionArgs, XiArgs, EXIT_C_TOO_SMALL,
    EXIT_FAILURE, EXIT_INVALID, EXIT_OK, EXIT_VIOLATION,
};

fn table<T: Scalar>(a: &SymVec<T>, pair: Option<(usize, usize)>, show: impl Fn(&T) -> String) -> Result<String, Failure> {
    let n = a.len();
    let mut lower = Vec::with_capacity(n + 1);
    let mut upper = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let (lo, hi) = xi_bounds(j, a).map_err(|e| Failure::invalid(e.to_string()))?;
        lower.push(lo);
        upper.push(hi);
    }
    let mut s = format!("a = ({})\n", a.entries().iter().map(&show).collect::<Vec<_>>().join(", "));
    s.push_str("j  xi_lower_j  xi_upper_j\n");
    for j in 0..=n {
        s.push_str(&format!("{j}  {}  {}\n", show(&lower[j]), show(&upper[j])));
    }
    let pairs: Vec<(usize, usize)> = match pair {
        Some(p) => vec![p],
        None => (1..=n).flat_map(|k| (0..k).map(move |l| (k, l))).collect(),
    };
    s.push_str("k  l  m_kl\n");
    for (k, l) in pairs {
        if l >= k || k > n {
            return Err(Failure::invalid(format!("need 0 <= l < k <= {n}, got k={k}, l={l}")));
        }
        let m = T::from_usize(k - l) / (upper[k].clone() - lower[l].clone());
        s.push_str(&format!("{k}  {l}  {}\n", show(&m)));
    }
    Ok(s)
}

pub fn xi(args: &XiArgs, out: &mut dyn Write) -> CmdResult {
    let pair = args.k.zip(args.l);
    let text = if args.exact {
        let entries: Vec<BigRational> = args
            .a
            .iter()
            .map(|s| parse_rational(s).ok_or_else(|| Failure::invalid(format!("not a rational number: {s:?}"))))
            .collect::<Result<_, _>>()?;
        let a = SymVec::new(entries).map_err(|e| Failure::invalid(e.to_string()))?;
        if !in_gamma_plus(&a) {
            return Err(Failure::invalid("a must have positive entries"));
        }
        table(&a, pair, format_rational)?
    } else {
        let entries: Vec<f64> = args
            .a
            .iter()
            .map(|s| s.trim().parse().map_err(|_| Failure::invalid(format!("not a number: {s:?}"))))
            .collect::<Result<_, _>>()?;
        let a = SymVec::new(entries).map_err(|e| Failure::invalid(e.to_string()))?;
        if !in_gamma_plus(&a) {
            return Err(Failure::invalid("a must have positive entries"));
        }
        table(&a, pair, |v| float(*v))?
    };
    out.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

fn profile_error(e: ProfileError) -> Failure {
    match e {
        ProfileError::Root(_) | ProfileError::StepFailure(_) => Failure {
            code: EXIT_FAILURE,
            message: e.to_string(),
        },
        _ => Failure::invalid(e.to_string()),
    }
}

fn profile_spec(args: &ProfileArgs) -> Result<ProfileSpec, Failure> {
    match (&args.a, args.xi_upper, args.xi_lower) {
        (Some(a), _, _) => {
            let v = SymVec::from_slice(a).map_err(|e| Failure::invalid(e.to_string()))?;
            let xi = XiProfile::new(args.k, args.l, &v).map_err(|e| Failure::invalid(e.to_string()))?;
            if args.require_admissible {
                xi.require_superquadratic().map_err(|e| Failure::invalid(e.to_string()))?;
            }
            ProfileSpec::from_xi(&xi, args.beta).map_err(profile_error)
        }
        (None, Some(upper), Some(lower)) => {
            let spec = ProfileSpec::new(args.k, args.l, upper, lower, args.beta).map_err(profile_error)?;
            if args.require_admissible && !(spec.m > 2.0) {
                return Err(Failure::invalid(
                    hqe_core::admissibility::AdmissibilityError::ExponentTooSmall { m: spec.m }.to_string(),
                ));
            }
            Ok(spec)
        }
        _ => Err(Failure::invalid("give either --a or both --xi-upper and --xi-lower")),
    }
}

fn grid(args: &ProfileArgs) -> Result<Vec<f64>, Failure> {
    if !(args.r_min >= 1.0 && args.r_max >= args.r_min && args.points >= 1) {
        return Err(Failure::invalid("need 1 <= r_min <= r_max and points >= 1"));
    }
    if args.points == 1 {
        return Ok(vec![args.r_min]);
    }
    Ok(log_space(args.r_min, args.r_max, args.points))
}

/// Relative slack on the bounds `β − 1 <= (ψ − 1) r^m <= B(β)/(k − l)`.
const BOUND_SLACK: f64 = 1e-9;

pub fn psi(args: &ProfileArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let spec = profile_spec(args)?;
    let radii = grid(args)?;
    let limit = asymptotic_constant(&spec);
    let low = spec.beta - 1.0;
    let mut rows = Vec::with_capacity(radii.len());
    let mut violations = 0;
    for &r in &radii {
        let excess = solve_implicit_excess(&spec, r).map_err(profile_error)?;
        let implicit = 1.0 + excess;
        let ode = solve_ode(&spec, r).map_err(profile_error)?;
        let scaled = excess * r.powf(spec.m);
        let ok = scaled >= low * (1.0 - BOUND_SLACK) && scaled <= limit * (1.0 + BOUND_SLACK);
        if !ok {
            violations += 1;
        }
        let closed = closed_form_hessian(&spec, r);
        rows.push(vec![
            float(r),
            float(implicit),
            float(ode),
            float((implicit - ode).abs()),
            float(scaled),
            float(limit),
            closed.map_or(String::new(), float),
            closed.map_or(String::new(), |c| float((implicit - c).abs())),
            flag(ok).to_string(),
        ]);
    }
    write_csv(
        args.out.as_deref(),
        out,
        &[
            "r",
            "psi_implicit",
            "psi_ode",
            "abs_diff",
            "scaled_excess",
            "asymptotic_constant",
            "psi_closed_form",
            "closed_form_abs_diff",
            "within_bounds",
        ],
        &rows,
    )?;
    if violations > 0 {
        writeln!(err, "{violations} grid points violate beta - 1 <= (psi - 1) r^m <= B/(k - l)")?;
        return Ok(EXIT_VIOLATION);
    }
    if !(spec.m > 2.0) {
        writeln!(err, "note: m_kl = {} <= 2; mu and the exterior construction need m_kl > 2", float(spec.m))?;
    }
    Ok(EXIT_OK)
}

fn subsolution_error(e: SubsolutionError) -> Failure {
    match e {
        SubsolutionError::Admissibility(_)
        | SubsolutionError::DimensionMismatch { .. }
        | SubsolutionError::GammaBelowOne(_)
        | SubsolutionError::InsideExcludedRegion { .. } => Failure::invalid(e.to_string()),
        SubsolutionError::Profile(p) => profile_error(p),
        other => Failure {
            code: EXIT_FAILURE,
            message: other.to_string(),
        },
    }
}

pub fn mu(args: &ProfileArgs, out: &mut dyn Write) -> CmdResult {
    let spec = profile_spec(args)?;
    if !(spec.m > 2.0) {
        return Err(Failure::invalid(
            hqe_core::admissibility::AdmissibilityError::ExponentTooSmall { m: spec.m }.to_string(),
        ));
    }
    let radii = grid(args)?;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in &radii {
        let t = mu_detailed(r, &spec).map_err(subsolution_error)?;
        rows.push(vec![
            float(r),
            float(t.value),
            float(t.quadrature),
            float(t.tail),
            float(t.cutoff),
            float(t.error_estimate),
            float(mu_lower_bound(r, &spec)),
            float(r.powf(spec.m - 2.0) * t.value),
        ]);
    }
    write_csv(
        args.out.as_deref(),
        out,
        &["R", "mu", "quadrature", "tail", "cutoff", "error_estimate", "lower_bound", "scaled_mu"],
        &rows,
    )?;
    Ok(EXIT_OK)
}

pub fn subsolution(args: &SubsolutionArgs, out: &mut dyn Write) -> CmdResult {
    let mut a = args.a.clone();
    if args.normalize {
        let v = SymVec::from_slice(&a).map_err(|e| Failure::invalid(e.to_string()))?;
        let s = normalizing_factor(args.k, args.l, &v).map_err(|e| Failure::invalid(e.to_string()))?;
        a.iter_mut().for_each(|x| *x *= s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let matrix = if args.rotate { rotated_matrix(&a, &mut rng) } else { SymMatrix::diagonal(&a) };
    let sub = Subsolution::new(&matrix, args.k, args.l, args.alpha, args.beta, args.gamma).map_err(subsolution_error)?;
    let samples = sub.exterior_samples(args.r_max, args.samples, &mut rng);
    let report = sub.verify(&samples).map_err(subsolution_error)?;
    let text = json(&report)?;
    match &args.out {
        Some(p) => fs::write(p, &text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_VIOLATION })
}

/// Maps library errors of the exterior pipeline to exit codes.
pub fn exterior_failure(e: ExteriorError) -> Failure {
    let code = match &e {
        ExteriorError::InvalidProblem(_) | ExteriorError::OriginOutside(_) | ExteriorError::Admissibility(_) => {
            EXIT_INVALID
        }
        ExteriorError::Boundary(BoundaryError::CTooSmall { .. }) => EXIT_C_TOO_SMALL,
        ExteriorError::Boundary(
            BoundaryError::InvalidDomain(_) | BoundaryError::DimensionMismatch { .. } | BoundaryError::NotPositiveDefinite(_),
        ) => EXIT_INVALID,
        ExteriorError::Subsolution(SubsolutionError::Admissibility(_)) => EXIT_INVALID,
        ExteriorError::HypothesisViolated { .. } => EXIT_VIOLATION,
        _ => EXIT_FAILURE,
    };
    let message = match &e {
        ExteriorError::Boundary(BoundaryError::CTooSmall { c, c_tilde }) => {
            format!("c = {} is below the threshold c_tilde = {}", float(*c), float(*c_tilde))
        }
        other => other.to_string(),
    };
    Failure { code, message }
}

pub fn load_problem(args: &ProblemArgs) -> Result<ExteriorProblemSpec, Failure> {
    let text = fs::read_to_string(&args.problem).map_err(|e| Failure::io(format!("{}: {e}", args.problem.display())))?;
    let mut file: ProblemFile = serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", args.problem.display())))?;
    if let Some(p) = args.boundary_points {
        file.mesh.boundary_points = p;
    }
    ExteriorProblemSpec::from_file(&file).map_err(exterior_failure)
}

#[derive(Debug, Serialize)]
struct BoundaryReport<'a> {
    scale: f64,
    /// `c̃` in the original coordinates.
    c_tilde: f64,
    m: f64,
    symmetrized: bool,
    /// In the reduced coordinates.
    constants: &'a EnvelopeConstants,
}

pub fn boundary(args: &ProblemArgs, out: &mut dyn Write) -> CmdResult {
    let spec = load_problem(args)?;
    let reduced = exterior::normalize(&spec).map_err(exterior_failure)?;
    let env = envelope(&reduced.domain, &reduced.data, &reduced.matrix, &spec.mesh)
        .map_err(|e| exterior_failure(e.into()))?;
    let consts = constants(&env, &reduced.xi).map_err(|e| exterior_failure(e.into()))?;
    let report = BoundaryReport {
        scale: reduced.scale,
        c_tilde: consts.c_tilde / (reduced.scale * reduced.scale),
        m: reduced.xi.m,
        symmetrized: spec.symmetrized,
        constants: &consts,
    };
    out.write_all(json(&report)?.as_bytes())?;
    Ok(EXIT_OK)
}

fn write_outputs(dir: &Path, report: &exterior::SolveReport, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), text)?;
    let header = ["r", "w", "scaled_w", "asymptotic"];
    let rows: Vec<Vec<String>> = report
        .decay
        .shells
        .iter()
        .map(|s| vec![float(s.r), float(s.w), float(s.scaled), flag(s.asymptotic).to_string()])
        .collect();
    let mut sink = Vec::new();
    write_csv(Some(&dir.join("decay.csv")), &mut sink, &header, &rows)?;
    fs::write(dir.join("decay.dat"), dat(&header, &rows))?;
    Ok(())
}

pub fn solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let spec = load_problem(&args.problem)?;
    let opts = SolveOptions {
        samples: args.samples,
        r_max: args.r_max,
        shell_samples: args.shell_samples,
        subsolution_samples: args.subsolution_samples,
        ..SolveOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (_, report) = exterior::solve(&spec, &opts, &mut rng).map_err(exterior_failure)?;
    let text = json(&report)?;
    if let Some(dir) = &args.out {
        write_outputs(dir, &report, &text)?;
    }
    out.write_all(text.as_bytes())?;
    if report.passed {
        Ok(EXIT_OK)
    } else {
        let c = &report.checks;
        writeln!(
            err,
            "verification failed: boundary error {}, ordering {}, envelope ordering {}, identity error {}, subsolution {}, frame difference {}, tail decay slope error {}",
            float(c.boundary_max_error),
            flag(c.ordering.holds),
            flag(c.envelope_ordering.holds),
            float(c.identity_max_error),
            flag(c.subsolution.passed()),
            float(c.frame_difference),
            float(report.decay.tail_slope_relative_error)
        )?;
        Ok(EXIT_VIOLATION)
    }
}
