//! The exterior problem `σ_k(λ(D²u))/σ_l(λ(D²u)) = 1` in `ℝⁿ ∖ D̄`,
//! `u = φ` on `∂D`, `u ≈ ½xᵀAx + bᵀx + c` at infinity: reduction to a
//! diagonal `A`, the sandwich `u̲ <= ū` built from `Q` and `Φ_{β(c)}`, its
//! checks, and the decay of `u̲ − (½xᵀAx + bᵀx + c)`.
//!
//! Coordinates: the problem is posed in `x`. The construction runs in
//! `y = s V x`, where `A = Vᵀ N V` with `N` diagonal and `s >= 1` is chosen so
//! that `E_1 ⊂⊂ D`. Functions map back by `u(x) = v(y)/s² + bᵀx`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissibility::{classify, normalizing_factor, AdmissibilityError, XiProfile};
use crate::boundary::{
    beta_of_c, constants, envelope, BoundaryData, BoundaryError, ConvexDomain, Envelope, EnvelopeConstants,
    MeshOptions, Polynomial,
};
use crate::numeric::fit::{log_log_fit, LineFit};
use crate::numeric::sampling::{onto_shell, random_direction, sphere_directions};
use crate::spectra::{EigenDecomposition, Matrix, SpectraError, SymMatrix};
use crate::subsolution::{Subsolution, SubsolutionError, VerificationReport};
use crate::symfunc::SymVec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("the origin must lie inside D (gauge {0})")]
    OriginOutside(f64),
    #[error("ordering fails on the boundary at {point:?}: sub − super = {gap}")]
    HypothesisViolated { point: Vec<f64>, gap: f64 },
    #[error(transparent)]
    Admissibility(#[from] AdmissibilityError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Subsolution(#[from] SubsolutionError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        #[serde(default)]
        rotation: Option<Vec<Vec<f64>>>,
    },
    Superellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        exponent: f64,
        #[serde(default)]
        rotation: Option<Vec<Vec<f64>>>,
    },
}

impl DomainSpec {
    pub fn build(&self) -> Result<ConvexDomain, ExteriorError> {
        let rot = |r: &Option<Vec<Vec<f64>>>| -> Result<Option<Matrix>, ExteriorError> {
            r.as_ref().map(|rows| Matrix::from_rows(rows)).transpose().map_err(Into::into)
        };
        Ok(match self {
            DomainSpec::Ball { center, radius } => ConvexDomain::ball(center.clone(), *radius)?,
            DomainSpec::Ellipsoid {
                center,
                semi_axes,
                rotation,
            } => ConvexDomain::ellipsoid(center.clone(), semi_axes.clone(), rot(rotation)?)?,
            DomainSpec::Superellipsoid {
                center,
                semi_axes,
                exponent,
                rotation,
            } => ConvexDomain::superellipsoid(center.clone(), semi_axes.clone(), *exponent, rot(rotation)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Diagonal { diagonal: Vec<f64> },
}

/// `c` given outright, or as an offset above the computed threshold `c̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CSpec {
    Value(f64),
    AboveThreshold { above_threshold: f64 },
}

/// JSON problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub domain: DomainSpec,
    #[serde(default)]
    pub phi: Polynomial,
    #[serde(rename = "A")]
    pub matrix: MatrixSpec,
    /// Multiply `A` by `(σ_k/σ_l)^{−1/(k−l)}` so that `σ_k(λ(A)) = σ_l(λ(A))`.
    #[serde(default)]
    pub normalize_a: bool,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    pub c: CSpec,
    pub k: usize,
    pub l: usize,
    #[serde(default)]
    pub mesh: MeshOptions,
}

/// A validated exterior problem with `A ∈ Ã_{k,l}`.
#[derive(Debug, Clone)]
pub struct ExteriorProblemSpec {
    pub domain: ConvexDomain,
    pub phi: Polynomial,
    pub matrix: SymMatrix,
    pub b: Vec<f64>,
    pub c: CSpec,
    pub k: usize,
    pub l: usize,
    pub mesh: MeshOptions,
    /// Eigenframe and `Ξ` data of `A`.
    pub frame: EigenDecomposition,
    pub xi: XiProfile<f64>,
    /// Set when the given matrix was not exactly symmetric.
    pub symmetrized: bool,
}

impl ExteriorProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, ExteriorError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| ExteriorError::InvalidProblem(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &ProblemFile) -> Result<Self, ExteriorError> {
        let domain = file.domain.build()?;
        let n = domain.n();
        let (mut matrix, symmetrized) = match &file.matrix {
            MatrixSpec::Rows(rows) => {
                let dense = Matrix::from_rows(rows)?;
                let exact = SymMatrix::from_rows(rows).is_ok();
                (SymMatrix::symmetrize(&dense), !exact)
            }
            MatrixSpec::Diagonal { diagonal } => (SymMatrix::diagonal(diagonal), false),
        };
        if matrix.n() != n {
            return Err(ExteriorError::InvalidProblem(format!(
                "A is {0}×{0} but the domain lives in dimension {n}",
                matrix.n()
            )));
        }
        if file.normalize_a {
            let frame = crate::spectra::eigh(&matrix)?;
            matrix = matrix.scaled(normalizing_factor(file.k, file.l, &frame.values)?);
        }
        let b = file.b.clone().unwrap_or_else(|| vec![0.0; n]);
        if b.len() != n {
            return Err(ExteriorError::InvalidProblem(format!("b has length {}, expected {n}", b.len())));
        }
        file.phi.check_dimension(n)?;
        Self::new(domain, file.phi.clone(), matrix, b, file.c, file.k, file.l, file.mesh).map(|mut s| {
            s.symmetrized = symmetrized;
            s
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        domain: ConvexDomain,
        phi: Polynomial,
        matrix: SymMatrix,
        b: Vec<f64>,
        c: CSpec,
        k: usize,
        l: usize,
        mesh: MeshOptions,
    ) -> Result<Self, ExteriorError> {
        let class = classify(&matrix, k, l)?;
        class.require_atilde()?;
        let xi = class.xi_profile()?;
        Ok(Self {
            domain,
            phi,
            matrix,
            b,
            c,
            k,
            l,
            mesh,
            frame: class.frame,
            xi,
            symmetrized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.domain.n()
    }
}

/// The problem in the coordinates `y = s V x`.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    /// `A = Vᵀ N V`; `to_frame` gives `V x`.
    pub frame: EigenDecomposition,
    pub scale: f64,
    pub diagonal: Vec<f64>,
    pub matrix: SymMatrix,
    pub domain: ConvexDomain,
    pub data: BoundaryData,
    pub b: Vec<f64>,
    pub xi: XiProfile<f64>,
}

impl ReducedProblem {
    pub fn n(&self) -> usize {
        self.diagonal.len()
    }

    pub fn to_reduced(&self, x: &[f64]) -> Vec<f64> {
        self.frame.to_frame(x).iter().map(|v| v * self.scale).collect()
    }

    pub fn from_reduced(&self, y: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = y.iter().map(|v| v / self.scale).collect();
        self.frame.from_frame(&v)
    }

    /// `v(y) ↦ u(x) = v(y)/s² + bᵀx`.
    pub fn pull_back(&self, x: &[f64], value: f64) -> f64 {
        value / (self.scale * self.scale) + dot(&self.b, x)
    }

    pub fn r_n(&self, y: &[f64]) -> f64 {
        self.diagonal.iter().zip(y).map(|(a, v)| a * v * v).sum::<f64>().sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rotates into the eigenframe of `A` and subtracts `bᵀx` from the data (no rescaling).
pub fn reduce_to_diagonal(spec: &ExteriorProblemSpec) -> Result<ReducedProblem, ExteriorError> {
    rescaled(spec, 1.0)
}

fn rescaled(spec: &ExteriorProblemSpec, scale: f64) -> Result<ReducedProblem, ExteriorError> {
    let v = &spec.frame.vectors;
    let diagonal = spec.frame.values.entries().to_vec();
    let data = BoundaryData::new(spec.phi.clone(), spec.n())?.transformed(v, scale, &spec.b)?;
    Ok(ReducedProblem {
        frame: spec.frame.clone(),
        scale,
        matrix: SymMatrix::diagonal(&diagonal),
        diagonal,
        domain: spec.domain.transformed(v, scale)?,
        data,
        b: spec.b.clone(),
        xi: spec.xi.clone(),
    })
}

/// Smallest `min r_N(∂D̃)` accepted after rescaling.
pub const INNER_CLEARANCE: f64 = 1.1;

/// [`reduce_to_diagonal`] followed by the dilation `y ↦ s y` with the
/// smallest `s >= 1` making `min r_N(∂D̃) >= 1.1` on the refined mesh.
pub fn normalize(spec: &ExteriorProblemSpec) -> Result<ReducedProblem, ExteriorError> {
    let base = reduce_to_diagonal(spec)?;
    let origin = vec![0.0; spec.n()];
    let g = base.domain.gauge(&origin);
    if !(g < 1.0) {
        return Err(ExteriorError::OriginOutside(g));
    }
    let mesh = base
        .domain
        .boundary_mesh(spec.mesh.boundary_points * spec.mesh.refine_factor);
    let r_min = mesh.iter().map(|b| base.r_n(&b.point)).fold(f64::INFINITY, f64::min);
    let scale = (INNER_CLEARANCE / r_min).max(1.0);
    if scale == 1.0 {
        return Ok(base);
    }
    rescaled(spec, scale)
}

/// `u̲` and `ū` with everything needed to evaluate them.
#[derive(Debug, Clone)]
pub struct Sandwich {
    pub reduced: ReducedProblem,
    pub envelope: Envelope,
    pub constants: EnvelopeConstants,
    /// `c` in the original coordinates, and in the reduced ones (`s² c`).
    pub c: f64,
    pub c_reduced: f64,
    /// `c̃` in the original coordinates.
    pub c_tilde: f64,
    pub beta_c: f64,
    pub m: f64,
    /// `Φ_{β(c)}` with `α = η`, `γ = r̄`, evaluable down to `r_N = 1`.
    pub phi: Subsolution,
    /// `Φ_{β(c)} − max Q` on the `∂E_r̂` mesh.
    pub shell_margin: f64,
}

impl Sandwich {
    pub fn n(&self) -> usize {
        self.reduced.n()
    }

    /// Reduced lower function `v̲(y)`; `None` inside `D̃`.
    pub fn lower_reduced(&self, y: &[f64]) -> Result<Option<f64>, ExteriorError> {
        if self.reduced.domain.contains(y) {
            return Ok(None);
        }
        let r = self.reduced.r_n(y);
        let phi = self.phi.phi_radial(r)?;
        if r < self.constants.r_hat {
            Ok(Some(phi.max(self.envelope.q(y))))
        } else {
            Ok(Some(phi))
        }
    }

    /// `u̲(x)`; `None` for `x ∈ D`.
    pub fn u_lower(&self, x: &[f64]) -> Result<Option<f64>, ExteriorError> {
        let y = self.reduced.to_reduced(x);
        Ok(self.lower_reduced(&y)?.map(|v| self.reduced.pull_back(x, v)))
    }

    /// `ū(x) = ½xᵀAx + bᵀx + c` (the reduced `½yᵀNy + s²c` pulled back).
    pub fn u_upper(&self, x: &[f64]) -> f64 {
        let y = self.reduced.to_reduced(x);
        let r = self.reduced.r_n(&y);
        self.reduced.pull_back(x, 0.5 * r * r + self.c_reduced)
    }

    /// `μ_{r_A(x)}(β(c))` in original units, i.e. `μ_{s r_A}/s²`.
    pub fn mu_at(&self, x: &[f64]) -> Result<f64, ExteriorError> {
        let y = self.reduced.to_reduced(x);
        let s2 = self.reduced.scale * self.reduced.scale;
        Ok(self.phi.mu_at(self.reduced.r_n(&y))? / s2)
    }

    /// `r_A(x)` in the original coordinates.
    pub fn r_a(&self, x: &[f64]) -> f64 {
        self.reduced.r_n(&self.reduced.to_reduced(x)) / self.reduced.scale
    }

    /// `r_A` of `∂E_r̂` in the original coordinates.
    pub fn outer_branch_radius(&self) -> f64 {
        self.constants.r_hat / self.reduced.scale
    }

    /// `φ` at the boundary mesh points, in original coordinates, with `u̲` there.
    pub fn boundary_values(&self, spec: &ExteriorProblemSpec) -> Result<Vec<(Vec<f64>, f64, f64)>, ExteriorError> {
        self.envelope
            .mesh
            .par_iter()
            .map(|b| {
                let x = self.reduced.from_reduced(&b.point);
                let phi = spec.phi.eval(&x);
                // exactly on ∂D̃, so evaluate the branch formula directly
                let r = self.reduced.r_n(&b.point);
                let v = self.phi.phi_radial(r)?.max(self.envelope.q(&b.point));
                Ok((x.clone(), phi, self.reduced.pull_back(&x, v)))
            })
            .collect()
    }
}

/// Runs the envelope, `β̂`, `c̃`, `β(c)` and assembles the sandwich.
pub fn build_sandwich(spec: &ExteriorProblemSpec) -> Result<Sandwich, ExteriorError> {
    let reduced = normalize(spec)?;
    let env = envelope(&reduced.domain, &reduced.data, &reduced.matrix, &spec.mesh)?;
    let consts = constants(&env, &reduced.xi)?;
    let s2 = reduced.scale * reduced.scale;
    let c_tilde = consts.c_tilde / s2;
    let c = match spec.c {
        CSpec::Value(c) => c,
        CSpec::AboveThreshold { above_threshold } => c_tilde + above_threshold,
    };
    let c_reduced = c * s2;
    if c < c_tilde {
        return Err(BoundaryError::CTooSmall { c, c_tilde }.into());
    }
    // c >= c̃ in original units; guard against s² rounding below c̃ in reduced ones
    let beta_c = beta_of_c(c_reduced.max(consts.c_tilde), &consts)
        .map_err(|e| match e {
            BoundaryError::CTooSmall { .. } => BoundaryError::CTooSmall { c, c_tilde },
            other => other,
        })?;
    let phi = Subsolution::from_parts(
        reduced.matrix.clone(),
        EigenDecomposition {
            values: SymVec::from_slice(&reduced.diagonal).map_err(SubsolutionError::from)?,
            vectors: Matrix::identity(reduced.n()),
        },
        reduced.xi.clone(),
        consts.eta,
        beta_c,
        consts.r_bar,
    )?
    .extended_inward(1.0)?;
    let phi_shell = phi.phi_radial(consts.r_hat)?;
    let shell_margin = phi_shell - consts.q_max_on_shell;
    if !(shell_margin > 0.0) {
        return Err(ExteriorError::InvalidProblem(format!(
            "Φ_β(c) does not exceed Q on ∂E_r̂ (margin {shell_margin})"
        )));
    }
    Ok(Sandwich {
        m: reduced.xi.m,
        reduced,
        envelope: env,
        constants: consts,
        c,
        c_reduced,
        c_tilde,
        beta_c,
        phi,
        shell_margin,
    })
}

/// Outcome of a sampled comparison `v_sub <= v_super`.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonOutcome {
    pub holds: bool,
    pub checked: usize,
    /// Largest `v_sub − v_super` seen (negative when the ordering is strict).
    pub worst_gap: f64,
    pub witness: Option<Vec<f64>>,
}

/// Relative slack of the sampled comparisons.
pub const COMPARISON_SLACK: f64 = 1e-12;

fn ordering_gap<F, G>(v_sub: &F, v_super: &G, x: &[f64]) -> Option<(f64, f64)>
where
    F: Fn(&[f64]) -> Option<f64>,
    G: Fn(&[f64]) -> Option<f64>,
{
    let a = v_sub(x)?;
    let b = v_super(x)?;
    Some((a - b, COMPARISON_SLACK * a.abs().max(b.abs()).max(1.0)))
}

/// Falsification harness for `v_sub <= v_super`: requires the ordering on
/// `boundary` samples, then reports the worst interior sample. Functions
/// return `None` where they are undefined; such points are skipped.
pub fn comparison_check<F, G>(
    v_sub: F,
    v_super: G,
    boundary: &[Vec<f64>],
    interior: &[Vec<f64>],
) -> Result<ComparisonOutcome, ExteriorError>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
    G: Fn(&[f64]) -> Option<f64> + Sync,
{
    for x in boundary {
        if let Some((gap, slack)) = ordering_gap(&v_sub, &v_super, x) {
            if gap > slack {
                return Err(ExteriorError::HypothesisViolated { point: x.clone(), gap });
            }
        }
    }
    let worst = interior
        .par_iter()
        .enumerate()
        .filter_map(|(i, x)| ordering_gap(&v_sub, &v_super, x).map(|(g, s)| (g, s, i)))
        .reduce_with(|a, b| if b.0 - b.1 > a.0 - a.1 || (b.0 - b.1 == a.0 - a.1 && b.2 < a.2) { b } else { a });
    let checked = interior.len();
    Ok(match worst {
        None => ComparisonOutcome {
            holds: true,
            checked,
            worst_gap: f64::NEG_INFINITY,
            witness: None,
        },
        Some((gap, slack, i)) => ComparisonOutcome {
            holds: gap <= slack,
            checked,
            worst_gap: gap,
            witness: (gap > slack).then(|| interior[i].clone()),
        },
    })
}

/// Points outside `D` with `r_A` log-uniform in `(r_A(∂D) lower bound, r_max]`.
pub fn annulus_samples<R: Rng + ?Sized>(
    sandwich: &Sandwich,
    r_max: f64,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let red = &sandwich.reduced;
    let s = red.scale;
    let lo = (sandwich.envelope.geometry.r_min / s).ln();
    let hi = r_max.ln();
    let n = red.n();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = random_direction(n, rng);
        let t: f64 = rng.gen_range(0.0..1.0);
        let r = (hi - t * (hi - lo)).exp() * s;
        let y = onto_shell(&red.diagonal, &u, r);
        if red.domain.contains(&y) {
            continue;
        }
        out.push(red.from_reduced(&y));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ShellRow {
    pub r: f64,
    /// `max |u̲ − (½xᵀAx + bᵀx + c)|` over the shell samples.
    pub w: f64,
    /// `r^{m−2} w(r)`.
    pub scaled: f64,
    /// Whether the second-order term of `ψ − 1` at this shell is below [`ASYMPTOTIC_THRESHOLD`].
    pub asymptotic: bool,
}

/// Largest relative size of the second-order term of `ψ − 1` for a shell to
/// enter the tail fit.
pub const ASYMPTOTIC_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub shells: Vec<ShellRow>,
    pub samples_per_shell: usize,
    /// Fit over all shells.
    pub fit: Option<LineFit>,
    pub expected_slope: f64,
    pub slope_relative_error: f64,
    /// Fit over the asymptotic shells (at least the last three).
    pub tail_fit: Option<LineFit>,
    pub tail_slope_relative_error: f64,
    /// `sup r^{m−2} w(r)` over the sampled shells; an estimate of the limsup.
    pub limsup_estimate: f64,
}

/// Shell radii `10^{1.5}, 10², …, 10⁴` in `r_A`.
pub fn default_shell_radii() -> Vec<f64> {
    (3..=8).map(|j| 10f64.powf(j as f64 * 0.5)).collect()
}

/// Decay of `u̲ − (½xᵀAx + bᵀx + c)` over shells `r_A = r` beyond `∂E_r̂`.
///
/// With `in_reduced_frame` the deviation is measured as `|v̲ − ½yᵀNy − s²c|/s²`
/// in the reduced coordinates instead of the original ones.
pub fn decay_report(
    sandwich: &Sandwich,
    radii: &[f64],
    samples_per_shell: usize,
    in_reduced_frame: bool,
) -> Result<DecayReport, ExteriorError> {
    let red = &sandwich.reduced;
    let s = red.scale;
    let dirs = sphere_directions(red.n(), samples_per_shell);
    let mut shells = Vec::new();
    for &r in radii {
        if r * s <= sandwich.constants.r_hat {
            continue;
        }
        let w = dirs
            .par_iter()
            .map(|u| -> Result<f64, ExteriorError> {
                let y = onto_shell(&red.diagonal, u, r * s);
                let dev = if in_reduced_frame {
                    let v = sandwich.lower_reduced(&y)?.unwrap_or(f64::NAN);
                    let rn = red.r_n(&y);
                    (v - (0.5 * rn * rn + sandwich.c_reduced)).abs() / (s * s)
                } else {
                    let x = red.from_reduced(&y);
                    let v = sandwich.u_lower(&x)?.unwrap_or(f64::NAN);
                    let quad = 0.5 * red.frame.values.entries().iter().zip(red.frame.to_frame(&x)).map(|(a, z)| a * z * z).sum::<f64>();
                    (v - (quad + dot(&red.b, &x) + sandwich.c)).abs()
                };
                Ok(dev)
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        let excess = sandwich.phi.profile.excess(r * s).map_err(SubsolutionError::from)?;
        shells.push(ShellRow {
            r,
            w,
            scaled: r.powf(sandwich.m - 2.0) * w,
            asymptotic: sandwich.phi.spec().second_order_coefficient() * excess <= ASYMPTOTIC_THRESHOLD,
        });
    }
    let fit_of = |rows: &[ShellRow]| {
        let xs: Vec<f64> = rows.iter().map(|s| s.r).collect();
        let ws: Vec<f64> = rows.iter().map(|s| s.w).collect();
        log_log_fit(&xs, &ws)
    };
    let fit = fit_of(&shells);
    let first_tail = shells
        .iter()
        .position(|s| s.asymptotic)
        .unwrap_or(shells.len())
        .min(shells.len().saturating_sub(3));
    let tail_fit = fit_of(&shells[first_tail..]);
    let expected = -(sandwich.m - 2.0);
    let rel = |f: Option<LineFit>| f.map_or(f64::INFINITY, |f| ((f.slope - expected) / expected).abs());
    Ok(DecayReport {
        slope_relative_error: rel(fit),
        tail_slope_relative_error: rel(tail_fit),
        tail_fit,
        limsup_estimate: shells.iter().map(|s| s.scaled).fold(0.0, f64::max),
        fit,
        expected_slope: expected,
        samples_per_shell,
        shells,
    })
}

/// Checks for `Φ_{α,β,γ,A}` on `ℝⁿ ∖ E_γ` with `φ ≡ α` on `∂E_γ`.
#[derive(Debug, Clone, Serialize)]
pub struct ExactSolutionReport {
    pub verification: VerificationReport,
    /// Whether all eigenvalues of `A` coincide, so that `Φ` solves the equation exactly.
    pub radially_balanced: bool,
    /// `max |σ_k/σ_l − 1|` over the samples.
    pub max_quotient_residual: f64,
    /// `max |Φ − α|` on `∂E_γ`.
    pub boundary_error: f64,
    /// At `r_A = 10⁴`: `Φ − ½xᵀAx − (μ_γ + α − ½γ²)`, and the same with `μ_r` added back.
    pub offset_deviation: f64,
    pub offset_residual: f64,
}

pub fn verify_exact_ellipsoid_solution(
    matrix: &SymMatrix,
    k: usize,
    l: usize,
    gamma: f64,
    alpha: f64,
    beta: f64,
    samples: &[Vec<f64>],
) -> Result<ExactSolutionReport, ExteriorError> {
    let sub = Subsolution::new(matrix, k, l, alpha, beta, gamma)?;
    let verification = sub.verify(samples)?;
    let a = &sub.a;
    let balanced = a.iter().all(|v| (v - a[0]).abs() <= 1e-14 * a[0]);
    let max_quotient_residual = samples
        .par_iter()
        .map(|x| -> Result<f64, SubsolutionError> {
            let sig = sub.hessian_sigmas(x)?;
            let sl = if l == 0 { 1.0 } else { sig[l - 1] };
            Ok((sig[k - 1] / sl - 1.0).abs())
        })
        .try_reduce(|| 0.0, |p, q| Ok(p.max(q)))?;
    let n = sub.n();
    let dirs = sphere_directions(n, 64);
    let mut boundary_error: f64 = 0.0;
    for u in &dirs {
        let x = sub.frame.from_frame(&onto_shell(a, u, gamma));
        boundary_error = boundary_error.max((sub.phi_eval(&x)? - alpha).abs());
    }
    let far = 1e4;
    let x = sub.frame.from_frame(&onto_shell(a, &dirs[dirs.len() - 1], far));
    let phi = sub.phi_eval(&x)?;
    let quad = 0.5 * matrix.quadratic_form(&x);
    let offset_deviation = phi - quad - sub.offset();
    let offset_residual = offset_deviation + sub.mu_at(sub.r_a(&x))?;
    Ok(ExactSolutionReport {
        verification,
        radially_balanced: balanced,
        max_quotient_residual,
        boundary_error,
        offset_deviation,
        offset_residual,
    })
}

/// Numbers checked by a full solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveChecks {
    /// `max |u̲ − φ|` over the boundary mesh.
    pub boundary_max_error: f64,
    pub boundary_points: usize,
    /// `u̲ <= ū` over the annulus samples.
    pub ordering: ComparisonOutcome,
    /// `Q <= ū` on `E_r̂ ∖ D`.
    pub envelope_ordering: ComparisonOutcome,
    /// `max |(ū − u̲) − μ_{r_A}(β(c))|` over samples beyond `∂E_r̂`, with the
    /// unavoidable rounding of `ū` itself (`4ε|ū|`) subtracted.
    pub identity_max_error: f64,
    pub identity_raw_max_error: f64,
    pub identity_points: usize,
    /// `Φ_{β(c)} − max Q` on `∂E_r̂`.
    pub shell_margin: f64,
    pub subsolution: VerificationReport,
    /// Largest `|w(r)|` difference between the original and the diagonalized
    /// frame, and the allowance `1e−10` plus the rounding floor of `ū` there.
    pub frame_difference: f64,
    pub frame_allowance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub m: f64,
    pub eigenvalues: Vec<f64>,
    pub symmetrized: bool,
    pub scale: f64,
    pub c: f64,
    pub c_tilde: f64,
    pub beta_c: f64,
    /// Constants in the reduced (rotated, rescaled) coordinates.
    pub constants: EnvelopeConstants,
    pub checks: SolveChecks,
    pub decay: DecayReport,
    pub tolerances: Tolerances,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    pub boundary: f64,
    pub identity: f64,
    pub decay_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            boundary: 1e-10,
            identity: 1e-10,
            decay_slope: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub samples: usize,
    pub r_max: f64,
    pub shell_samples: usize,
    pub subsolution_samples: usize,
    pub tolerances: Tolerances,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            r_max: 1e3,
            shell_samples: 2000,
            subsolution_samples: 10_000,
            tolerances: Tolerances::default(),
        }
    }
}

/// Builds the sandwich and runs every check on it.
pub fn solve<R: Rng + ?Sized>(
    spec: &ExteriorProblemSpec,
    opts: &SolveOptions,
    rng: &mut R,
) -> Result<(Sandwich, SolveReport), ExteriorError> {
    let sandwich = build_sandwich(spec)?;
    let boundary = sandwich.boundary_values(spec)?;
    let boundary_max_error = boundary.iter().map(|(_, p, u)| (p - u).abs()).fold(0.0, f64::max);
    let boundary_points: Vec<Vec<f64>> = boundary.iter().map(|b| b.0.clone()).collect();

    let samples = annulus_samples(&sandwich, opts.r_max, opts.samples, rng);
    let lower = |x: &[f64]| sandwich.u_lower(x).ok().flatten();
    let upper = |x: &[f64]| Some(sandwich.u_upper(x));
    let ordering = comparison_check(lower, upper, &boundary_points, &samples)?;

    let r_hat = sandwich.outer_branch_radius();
    let inner: Vec<Vec<f64>> = samples.iter().filter(|x| sandwich.r_a(x) < r_hat).cloned().collect();
    let q_of = |x: &[f64]| {
        let y = sandwich.reduced.to_reduced(x);
        Some(sandwich.reduced.pull_back(x, sandwich.envelope.q(&y)))
    };
    let envelope_ordering = comparison_check(q_of, upper, &boundary_points, &inner)?;

    let outer: Vec<&Vec<f64>> = samples.iter().filter(|x| sandwich.r_a(x) >= r_hat).collect();
    let errors: Vec<(f64, f64)> = outer
        .par_iter()
        .map(|x| -> Result<(f64, f64), ExteriorError> {
            let up = sandwich.u_upper(x);
            let lo = sandwich.u_lower(x)?.unwrap_or(f64::NAN);
            let raw = ((up - lo) - sandwich.mu_at(x)?).abs();
            Ok((raw, (raw - 4.0 * f64::EPSILON * up.abs()).max(0.0)))
        })
        .collect::<Result<_, _>>()?;
    let identity_raw_max_error = errors.iter().map(|e| e.0).fold(0.0, f64::max);
    let identity_max_error = errors.iter().map(|e| e.1).fold(0.0, f64::max);

    let sub_samples = sandwich
        .phi
        .exterior_samples(opts.r_max * sandwich.reduced.scale, opts.subsolution_samples, rng);
    let subsolution = sandwich.phi.verify(&sub_samples)?;

    let decay = decay_report(&sandwich, &default_shell_radii(), opts.shell_samples, false)?;
    let reduced_decay = decay_report(&sandwich, &default_shell_radii(), opts.shell_samples, true)?;
    let lambda_min = spec.frame.values.entries()[0];
    let b_norm = spec.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (frame_difference, frame_allowance) = decay
        .shells
        .iter()
        .zip(&reduced_decay.shells)
        .map(|(a, b)| {
            let size = 0.5 * a.r * a.r + b_norm * a.r / lambda_min.sqrt() + sandwich.c.abs();
            ((a.w - b.w).abs(), opts.tolerances.identity + 16.0 * f64::EPSILON * size)
        })
        .fold((0.0, f64::INFINITY), |(d, t), (di, ti)| {
            if di - ti > d - t {
                (di, ti)
            } else {
                (d, t)
            }
        });
    let frame_allowance = if frame_allowance.is_finite() { frame_allowance } else { opts.tolerances.identity };
    let tol = opts.tolerances;
    let passed = boundary_max_error <= tol.boundary
        && ordering.holds
        && envelope_ordering.holds
        && identity_max_error <= tol.identity
        && sandwich.shell_margin > 0.0
        && subsolution.passed()
        && frame_difference <= frame_allowance
        && decay.tail_slope_relative_error <= tol.decay_slope;
    let report = SolveReport {
        n: spec.n(),
        k: spec.k,
        l: spec.l,
        m: sandwich.m,
        eigenvalues: spec.frame.values.entries().to_vec(),
        symmetrized: spec.symmetrized,
        scale: sandwich.reduced.scale,
        c: sandwich.c,
        c_tilde: sandwich.c_tilde,
        beta_c: sandwich.beta_c,
        constants: sandwich.constants.clone(),
        checks: SolveChecks {
            boundary_max_error,
            boundary_points: boundary.len(),
            ordering,
            envelope_ordering,
            identity_max_error,
            identity_raw_max_error,
            identity_points: outer.len(),
            shell_margin: sandwich.shell_margin,
            subsolution,
            frame_difference,
            frame_allowance,
        },
        decay,
        tolerances: tol,
        passed,
    };
    Ok((sandwich, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ball_problem(k: usize, l: usize, c: CSpec) -> ExteriorProblemSpec {
        let text = format!(
            r#"{{"domain": {{"kind": "ball", "center": [0.1, 0.0, -0.2], "radius": 1.5}},
                "A": {{"diagonal": [1.0, 1.0, 1.0]}}, "normalize_a": true,
                "c": {}, "k": {k}, "l": {l},
                "mesh": {{"boundary_points": 200, "shell_points": 500}}}}"#,
            serde_json::to_string(&c).unwrap()
        );
        ExteriorProblemSpec::from_json(&text).unwrap()
    }

    fn small_opts() -> SolveOptions {
        SolveOptions {
            samples: 2000,
            shell_samples: 200,
            subsolution_samples: 500,
            ..SolveOptions::default()
        }
    }

    #[test]
    fn parses_problem_file_variants() {
        let text = r#"{"domain": {"kind": "superellipsoid", "center": [0, 0], "semi_axes": [1, 2], "exponent": 1.5},
            "phi": {"terms": [{"coef": 0.5, "powers": [2, 0]}]},
            "A": [[2.0, 0.0], [0.0, 0.5]], "c": 1.0, "k": 2, "l": 0}"#;
        let file: ProblemFile = serde_json::from_str(text).unwrap();
        assert_eq!(file.c, CSpec::Value(1.0));
        assert!(matches!(file.matrix, MatrixSpec::Rows(_)));
        assert!(!file.normalize_a);
        let bad = r#"{"domain": {"kind": "ball", "center": [0, 0], "radius": 1}, "A": [[1]], "c": 0, "k": 1, "l": 0}"#;
        assert!(matches!(ExteriorProblemSpec::from_json(bad), Err(ExteriorError::InvalidProblem(_))));
    }

    #[test]
    fn nonsymmetric_matrix_is_symmetrized() {
        let text = r#"{"domain": {"kind": "ball", "center": [0, 0, 0], "radius": 1},
            "A": [[1.0, 0.2, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], "normalize_a": true,
            "c": 0, "k": 3, "l": 0}"#;
        let spec = ExteriorProblemSpec::from_json(text).unwrap();
        assert!(spec.symmetrized);
        assert_eq!(spec.matrix.get(0, 1), spec.matrix.get(1, 0));
    }

    #[test]
    fn origin_outside_domain_is_rejected() {
        let text = r#"{"domain": {"kind": "ball", "center": [5, 0, 0], "radius": 1},
            "A": {"diagonal": [1, 1, 1]}, "c": 0, "k": 3, "l": 0}"#;
        let spec = ExteriorProblemSpec::from_json(text).unwrap();
        assert!(matches!(normalize(&spec), Err(ExteriorError::OriginOutside(_))));
    }

    #[test]
    fn reduction_round_trips_and_clears_unit_ellipsoid() {
        let spec = ball_problem(3, 1, CSpec::AboveThreshold { above_threshold: 1.0 });
        let red = normalize(&spec).unwrap();
        assert!(red.scale >= 1.0);
        let x = [0.3, -1.2, 2.0];
        let back = red.from_reduced(&red.to_reduced(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        for b in red.domain.boundary_mesh(500) {
            assert!(red.r_n(&b.point) >= INNER_CLEARANCE * (1.0 - 1e-9));
        }
    }

    #[test]
    fn c_below_threshold_is_rejected() {
        let spec = ball_problem(3, 0, CSpec::AboveThreshold { above_threshold: -0.5 });
        match build_sandwich(&spec) {
            Err(ExteriorError::Boundary(BoundaryError::CTooSmall { c, c_tilde })) => assert!(c < c_tilde),
            other => panic!("expected CTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn ball_sandwich_passes_checks() {
        let spec = ball_problem(3, 1, CSpec::AboveThreshold { above_threshold: 0.25 });
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (sandwich, report) = solve(&spec, &small_opts(), &mut rng).unwrap();
        assert!(report.checks.boundary_max_error <= 1e-10, "{}", report.checks.boundary_max_error);
        assert!(report.checks.ordering.holds);
        assert!(report.checks.identity_max_error <= 1e-10, "{}", report.checks.identity_max_error);
        assert!(report.decay.slope_relative_error <= 0.01, "{:?}", report.decay);
        assert!(report.passed);
        assert!(sandwich.beta_c >= sandwich.constants.beta_hat);
    }

    #[test]
    fn decay_in_both_frames_agrees() {
        let spec = ball_problem(3, 0, CSpec::AboveThreshold { above_threshold: 0.1 });
        let sandwich = build_sandwich(&spec).unwrap();
        let a = decay_report(&sandwich, &default_shell_radii(), 100, false).unwrap();
        let b = decay_report(&sandwich, &default_shell_radii(), 100, true).unwrap();
        for (x, y) in a.shells.iter().zip(&b.shells) {
            assert!((x.w - y.w).abs() <= 1e-6 * x.w.max(1e-12), "{} {}", x.w, y.w);
        }
    }

    #[test]
    fn comparison_reports_violations() {
        let boundary = vec![vec![1.0, 0.0]];
        let interior = vec![vec![2.0, 0.0], vec![3.0, 0.0]];
        let ok = comparison_check(|x| Some(x[0]), |x| Some(x[0] + 1.0), &boundary, &interior).unwrap();
        assert!(ok.holds);
        let bad = comparison_check(|x| Some(x[0] * x[0]), |x| Some(x[0] + 1.0), &boundary, &interior).unwrap();
        assert!(!bad.holds);
        assert_eq!(bad.witness, Some(vec![3.0, 0.0]));
        let hyp = comparison_check(|x| Some(x[0] + 2.0), |x| Some(x[0]), &boundary, &interior);
        assert!(matches!(hyp, Err(ExteriorError::HypothesisViolated { .. })));
    }

    #[test]
    fn balanced_ellipsoid_solution_is_exact() {
        let c = crate::admissibility::c_star(3, 3, 1);
        let matrix = SymMatrix::diagonal(&[c, c, c]);
        let sub = Subsolution::new(&matrix, 3, 1, 0.0, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = sub.exterior_samples(1e3, 300, &mut rng);
        let rep = verify_exact_ellipsoid_solution(&matrix, 3, 1, 1.0, 0.0, 2.0, &samples).unwrap();
        assert!(rep.radially_balanced);
        assert!(rep.max_quotient_residual <= 1e-10, "{}", rep.max_quotient_residual);
        assert!(rep.boundary_error <= 1e-12);
        assert!(rep.offset_residual.abs() <= 1e-8, "{}", rep.offset_residual);
    }
}
