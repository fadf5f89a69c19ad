//! The tail integral `μ_R(β) = ∫_R^∞ τ(ψ(τ,β) − 1) dτ` and the generalized
//! radially symmetric function
//!
//! ```text
//! Φ(x) = α + ∫_γ^{r_A(x)} τ ψ(τ, β) dτ,   r_A(x) = √(xᵀAx),
//! ```
//!
//! with its exact Hessian and a sampled check that it is a subsolution of
//! `σ_k(λ(D²u)) / σ_l(λ(D²u)) = 1` outside `E_γ`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::admissibility::{classify, xi_bounds, AdmissibilityError, XiProfile};
use crate::numeric::quadrature;
use crate::numeric::sampling::shell_samples;
use crate::profile::{asymptotic_constant, solve_implicit_excess, Profile, ProfileError, ProfileSpec};
use crate::spectra::{conjugate_by, EigenDecomposition, SpectraError, SymMatrix};
use crate::symfunc::{sigma, sigma_rank_one, SymFuncError, SymVec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubsolutionError {
    #[error("point with r_A = {r} lies inside the excluded ellipsoid of radius {gamma}")]
    InsideExcludedRegion { r: f64, gamma: f64 },
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("γ must be >= 1, got {0}")]
    GammaBelowOne(f64),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Admissibility(#[from] AdmissibilityError),
    #[error(transparent)]
    SymFunc(#[from] SymFuncError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Target relative accuracy of [`mu`]; stricter than `1e-10 max(1, μ)`.
pub const MU_REL_TOL: f64 = 1e-12;

/// Pieces of one evaluation of `μ_R(β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub value: f64,
    /// Quadrature over `[R, cutoff]`.
    pub quadrature: f64,
    /// Analytic remainder `(B(β)/(k−l)) cutoff^{2−m}/(m−2)`.
    pub tail: f64,
    pub cutoff: f64,
    pub error_estimate: f64,
}

fn check_superquadratic(spec: &ProfileSpec) -> Result<(), SubsolutionError> {
    if spec.m <= 2.0 {
        return Err(AdmissibilityError::ExponentTooSmall { m: spec.m }.into());
    }
    Ok(())
}

/// Integrates `τ(ψ − 1)` over `[ln lo, ln hi]` in the variable `s = ln τ`.
fn log_panel_integral(
    spec: &ProfileSpec,
    lo: f64,
    hi: f64,
    panels: Option<usize>,
) -> Result<(f64, f64), ProfileError> {
    let mut failure = None;
    let integrand = |s: f64| {
        let tau = s.exp();
        match solve_implicit_excess(spec, tau) {
            Ok(t) => tau * tau * t,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let (a, b) = (lo.ln(), hi.ln());
    let out = match panels {
        Some(p) => {
            let mut f = integrand;
            (quadrature::composite(&mut f, a, b, p), 0.0)
        }
        None => {
            let initial = ((b - a) / std::f64::consts::LN_2).ceil().max(1.0) as usize;
            let q = quadrature::integrate(integrand, a, b, initial, 1e-14, 0.0);
            (q.value, q.error_estimate)
        }
    };
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `μ_R(β)` with its quadrature/tail split, for the `β` carried by `spec`.
///
/// The cutoff grows by factors of 4 until the first neglected term of the
/// tail, `tail · c · (ψ(cutoff) − 1)`, is below `MU_REL_TOL` of the lower bound
/// `(β − 1) R^{2−m}/(m − 2)`.
pub fn mu_detailed(r: f64, spec: &ProfileSpec) -> Result<TailEstimate, SubsolutionError> {
    check_superquadratic(spec)?;
    if !(r >= 1.0 && r.is_finite()) {
        return Err(ProfileError::RadiusBelowOne(r).into());
    }
    if spec.beta == 1.0 {
        return Ok(TailEstimate {
            value: 0.0,
            quadrature: 0.0,
            tail: 0.0,
            cutoff: r,
            error_estimate: 0.0,
        });
    }
    let m = spec.m;
    let lead = asymptotic_constant(spec);
    let coefficient = spec.second_order_coefficient().max(0.5);
    let floor = (spec.beta - 1.0) * r.powf(2.0 - m) / (m - 2.0);
    let tail_at = |cut: f64| lead * cut.powf(2.0 - m) / (m - 2.0);
    let mut cutoff = 4.0 * r;
    let mut neglected;
    loop {
        let t = solve_implicit_excess(spec, cutoff)?;
        neglected = tail_at(cutoff) * coefficient * t;
        if neglected <= MU_REL_TOL * floor || cutoff > 1e150 {
            break;
        }
        cutoff *= 4.0;
    }
    let (quad, quad_err) = log_panel_integral(spec, r, cutoff, None)?;
    let tail = tail_at(cutoff);
    Ok(TailEstimate {
        value: quad + tail,
        quadrature: quad,
        tail,
        cutoff,
        error_estimate: quad_err + neglected,
    })
}

/// `μ_R(β) = ∫_R^∞ τ(ψ(τ,β) − 1) dτ`; requires `m > 2`.
pub fn mu(r: f64, beta: f64, spec: &ProfileSpec) -> Result<f64, SubsolutionError> {
    Ok(mu_detailed(r, &spec.with_beta(beta)?)?.value)
}

/// `(β − 1) R^{2−m}/(m − 2)`, a lower bound for `μ_R(β)`.
pub fn mu_lower_bound(r: f64, spec: &ProfileSpec) -> f64 {
    (spec.beta - 1.0) * r.powf(2.0 - spec.m) / (spec.m - 2.0)
}

const TABLE_STEP: f64 = std::f64::consts::LN_2 / 4.0;
const TABLE_SPAN: f64 = 1e6;

/// `μ_R(β)` at geometrically spaced nodes `R_j = base · 2^{j/4}`; other
/// radii below the last node cost one 20-point panel.
#[derive(Debug, Clone)]
pub struct TailTable {
    spec: ProfileSpec,
    base: f64,
    values: Vec<f64>,
}

impl TailTable {
    pub fn build(spec: &ProfileSpec, base: f64, top: f64) -> Result<Self, SubsolutionError> {
        let count = ((top / base).ln() / TABLE_STEP).ceil().max(1.0) as usize;
        let node = |j: usize| base * (j as f64 * TABLE_STEP).exp();
        let mut values = vec![0.0; count + 1];
        values[count] = mu_detailed(node(count), spec)?.value;
        if spec.beta > 1.0 {
            for j in (0..count).rev() {
                let (panel, _) = log_panel_integral(spec, node(j), node(j + 1), Some(1))?;
                values[j] = values[j + 1] + panel;
            }
        }
        Ok(Self {
            spec: *spec,
            base,
            values,
        })
    }

    pub fn top(&self) -> f64 {
        self.node(self.values.len() - 1)
    }

    fn node(&self, j: usize) -> f64 {
        self.base * (j as f64 * TABLE_STEP).exp()
    }

    pub fn eval(&self, r: f64) -> Result<f64, SubsolutionError> {
        if self.spec.beta == 1.0 {
            return Ok(0.0);
        }
        if r < self.base || r >= self.top() {
            return Ok(mu_detailed(r, &self.spec)?.value);
        }
        let j = (((r / self.base).ln() / TABLE_STEP).floor() as usize).min(self.values.len() - 2);
        let upper = self.node(j + 1);
        if r == upper {
            return Ok(self.values[j + 1]);
        }
        let (panel, _) = log_panel_integral(&self.spec, r, upper, Some(1))?;
        Ok(self.values[j + 1] + panel)
    }
}

/// `E_ρ = {x : r_A(x) < ρ}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub matrix: SymMatrix,
    pub rho: f64,
}

impl Ellipsoid {
    pub fn r_a(&self, x: &[f64]) -> f64 {
        self.matrix.quadratic_form(x).max(0.0).sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.r_a(x) < self.rho
    }
}

/// `Φ_{α,β,γ,A}` for `A ∈ Ã_{k,l}`, evaluated in the eigenframe of `A`.
#[derive(Debug, Clone)]
pub struct Subsolution {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: usize,
    pub l: usize,
    pub matrix: SymMatrix,
    pub frame: EigenDecomposition,
    /// `λ(A)`, ascending; the eigenframe coordinates pair with these.
    pub a: Vec<f64>,
    pub xi: XiProfile<f64>,
    pub profile: Profile,
    pub mu_gamma: f64,
    /// Smallest `r_A` at which `Φ` may be evaluated; `γ` unless extended.
    pub inner: f64,
    table: TailTable,
    /// `ξ̄_j(a)` for `j = 1..=k`.
    xi_upper: Vec<f64>,
    sigma_a: Vec<f64>,
}

impl Subsolution {
    pub fn new(matrix: &SymMatrix, k: usize, l: usize, alpha: f64, beta: f64, gamma: f64) -> Result<Self, SubsolutionError> {
        let class = classify(matrix, k, l)?;
        class.require_atilde()?;
        let xi = class.xi_profile()?;
        Self::from_parts(matrix.clone(), class.frame, xi, alpha, beta, gamma)
    }

    /// Assembles from an already classified `A` (its eigenframe and `Ξ` data).
    pub fn from_parts(
        matrix: SymMatrix,
        frame: EigenDecomposition,
        xi: XiProfile<f64>,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Result<Self, SubsolutionError> {
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(SubsolutionError::GammaBelowOne(gamma));
        }
        xi.require_superquadratic()?;
        let spec = ProfileSpec::from_xi(&xi, beta)?;
        let table = TailTable::build(&spec, gamma, gamma * TABLE_SPAN)?;
        let mu_gamma = table.eval(gamma)?;
        let a = frame.values.entries().to_vec();
        let sa = SymVec::from_slice(&a)?;
        let xi_upper = (1..=xi.k)
            .map(|j| xi_bounds(j, &sa).map(|(_, hi)| hi))
            .collect::<Result<Vec<_>, _>>()?;
        let sigma_a = (0..=a.len()).map(|j| sigma(j as isize, &sa)).collect();
        Ok(Self {
            alpha,
            beta,
            gamma,
            k: xi.k,
            l: xi.l,
            matrix,
            frame,
            a,
            profile: Profile::new(spec),
            mu_gamma,
            inner: gamma,
            table,
            xi,
            xi_upper,
            sigma_a,
        })
    }

    /// The same `α, γ, A` with a different `β`.
    pub fn with_beta(&self, beta: f64) -> Result<Self, SubsolutionError> {
        let out = Self::from_parts(self.matrix.clone(), self.frame.clone(), self.xi.clone(), self.alpha, beta, self.gamma)?;
        if self.inner < self.gamma {
            return out.extended_inward(self.inner);
        }
        Ok(out)
    }

    /// Allows evaluation on `inner <= r_A < γ` as well, where
    /// `Φ = α − ∫_r^γ τψ dτ` (same μ-form); needs `inner >= 1`.
    pub fn extended_inward(mut self, inner: f64) -> Result<Self, SubsolutionError> {
        if !(inner >= 1.0 && inner <= self.gamma) {
            return Err(SubsolutionError::GammaBelowOne(inner));
        }
        self.table = TailTable::build(self.spec(), inner, self.gamma * TABLE_SPAN)?;
        self.mu_gamma = self.table.eval(self.gamma)?;
        self.inner = inner;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> f64 {
        self.xi.m
    }

    pub fn spec(&self) -> &ProfileSpec {
        self.profile.spec()
    }

    pub fn ellipsoid(&self) -> Ellipsoid {
        Ellipsoid {
            matrix: self.matrix.clone(),
            rho: self.gamma,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), SubsolutionError> {
        if x.len() != self.n() {
            return Err(SubsolutionError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `r_A(x)` via the eigenframe.
    pub fn r_a(&self, x: &[f64]) -> f64 {
        let y = self.frame.to_frame(x);
        self.a.iter().zip(&y).map(|(ai, yi)| ai * yi * yi).sum::<f64>().sqrt()
    }

    fn radius_outside(&self, x: &[f64]) -> Result<f64, SubsolutionError> {
        self.check_dim(x)?;
        let r = self.r_a(x);
        // rounding slack so points placed exactly on ∂E_γ are accepted
        if r < self.inner * (1.0 - 1e-13) {
            return Err(SubsolutionError::InsideExcludedRegion { r, gamma: self.inner });
        }
        Ok(r.max(self.inner))
    }

    /// `μ_R(β)` for this `β`.
    pub fn mu_at(&self, r: f64) -> Result<f64, SubsolutionError> {
        self.table.eval(r)
    }

    /// `μ_γ(β) + α − γ²/2`, the constant in `Φ = r²/2 + offset − μ_r`.
    pub fn offset(&self) -> f64 {
        self.mu_gamma + self.alpha - 0.5 * self.gamma * self.gamma
    }

    /// `Φ` as a function of `r = r_A(x) >= γ`.
    pub fn phi_radial(&self, r: f64) -> Result<f64, SubsolutionError> {
        if r < self.inner * (1.0 - 1e-13) {
            return Err(SubsolutionError::InsideExcludedRegion { r, gamma: self.inner });
        }
        let r = r.max(self.inner);
        let mu_r = self.table.eval(r)?;
        Ok(self.alpha + 0.5 * (r - self.gamma) * (r + self.gamma) + (self.mu_gamma - mu_r))
    }

    /// `Φ(x) = α + (r² − γ²)/2 + μ_γ − μ_r`.
    pub fn phi_eval(&self, x: &[f64]) -> Result<f64, SubsolutionError> {
        let r = self.radius_outside(x)?;
        self.phi_radial(r)
    }

    /// `α + ∫_γ^r τψ dτ` by direct quadrature; an independent route to `Φ`.
    pub fn phi_direct(&self, x: &[f64]) -> Result<f64, SubsolutionError> {
        let r = self.radius_outside(x)?;
        if r == self.gamma {
            return Ok(self.alpha);
        }
        let (lo, hi, sign) = if r >= self.gamma { (self.gamma, r, 1.0) } else { (r, self.gamma, -1.0) };
        let spec = *self.spec();
        let mut failure = None;
        let q = quadrature::integrate(
            |tau: f64| match solve_implicit_excess(&spec, tau) {
                Ok(t) => tau * (1.0 + t),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            4,
            1e-14,
            0.0,
        );
        if let Some(e) = failure {
            return Err(e.into());
        }
        Ok(self.alpha + sign * q.value)
    }

    /// `(ψ, ψ'/r, y)` at `x`, with `y` the eigenframe coordinates.
    fn radial_data(&self, x: &[f64]) -> Result<(f64, f64, Vec<f64>, f64), SubsolutionError> {
        let r = self.radius_outside(x)?;
        let y = self.frame.to_frame(x);
        let psi = self.profile.eval(r)?;
        let dpsi = self.profile.deriv(r)?;
        Ok((psi, dpsi / r, y, r))
    }

    /// `D²Φ = Qᵀ(ψ diag(a) + (ψ'/r)(a∘y)(a∘y)ᵀ)Q`, assembled in the
    /// eigenframe and returned in the original coordinates.
    pub fn phi_hessian(&self, x: &[f64]) -> Result<SymMatrix, SubsolutionError> {
        let h = self.hessian_in_frame(x)?;
        Ok(conjugate_by(&self.frame.vectors, &h)?)
    }

    /// `D²Φ` in eigenframe coordinates.
    pub fn hessian_in_frame(&self, x: &[f64]) -> Result<SymMatrix, SubsolutionError> {
        let (psi, s, y, _) = self.radial_data(x)?;
        let n = self.n();
        let q: Vec<f64> = self.a.iter().zip(&y).map(|(ai, yi)| ai * yi).collect();
        let mut h = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let diag = if i == j { psi * self.a[i] } else { 0.0 };
                h.set(i, j, diag + s * q[i] * q[j]);
            }
        }
        Ok(h)
    }

    /// `σ_j(λ(D²Φ(x)))` for `j = 1..=n` by the rank-one formula.
    pub fn hessian_sigmas(&self, x: &[f64]) -> Result<Vec<f64>, SubsolutionError> {
        let (psi, s, y, _) = self.radial_data(x)?;
        self.sigmas_from(psi, s, &y)
    }

    fn sigmas_from(&self, psi: f64, s: f64, y: &[f64]) -> Result<Vec<f64>, SubsolutionError> {
        let p = SymVec::from_slice(&self.a.iter().map(|ai| psi * ai).collect::<Vec<_>>())?;
        let q = SymVec::from_slice(&self.a.iter().zip(y).map(|(ai, yi)| ai * yi).collect::<Vec<_>>())?;
        (1..=self.n())
            .map(|j| Ok(sigma_rank_one(j as isize, &p, &q, &s)?))
            .collect()
    }

    /// Checks every sample; see [`VerificationReport`].
    pub fn verify(&self, samples: &[Vec<f64>]) -> Result<VerificationReport, SubsolutionError> {
        let tally = samples
            .par_iter()
            .map(|x| self.check_point(x))
            .try_fold(Tally::default, |mut acc, item| {
                acc.merge(item?);
                Ok::<_, SubsolutionError>(acc)
            })
            .try_reduce(Tally::default, |mut a, b| {
                a.merge(b);
                Ok(a)
            })?;
        Ok(tally.into_report(self, samples.len()))
    }

    fn check_point(&self, x: &[f64]) -> Result<Tally, SubsolutionError> {
        let (psi, s, y, r) = self.radial_data(x)?;
        let sig = self.sigmas_from(psi, s, &y)?;
        let (k, l) = (self.k, self.l);
        let mut tally = Tally {
            worst_sigma: vec![f64::INFINITY; k],
            worst_quotient_margin: f64::INFINITY,
            worst_ratio_minus_one: f64::INFINITY,
            ..Tally::default()
        };
        let point = || x.to_vec();
        for j in 1..=k {
            let v = sig[j - 1];
            tally.worst_sigma[j - 1] = v;
            if !(v > 0.0) {
                tally.violations.push(Violation {
                    point: point(),
                    r_a: r,
                    kind: format!("sigma_{j} <= 0"),
                    value: v,
                });
            }
            // σ_j(D²Φ) >= σ_j(a) ψ^{j-1} (ψ + ξ̄_j r ψ') > 0
            let bound = self.sigma_a[j] * psi.powi(j as i32 - 1) * (psi + self.xi_upper[j - 1] * r * r * s);
            let slack = 1e-12 * (v.abs() + bound.abs()).max(1e-300);
            if !(bound > 0.0 && v >= bound - slack) {
                tally.bound_failures += 1;
            }
        }
        let sk = sig[k - 1];
        let sl = if l == 0 { 1.0 } else { sig[l - 1] };
        let margin = sk - sl;
        tally.worst_quotient_margin = margin;
        tally.worst_ratio_minus_one = sk / sl - 1.0;
        tally.max_radius = r;
        if margin < -QUOTIENT_SLACK * sk.max(1.0) {
            tally.violations.push(Violation {
                point: point(),
                r_a: r,
                kind: "sigma_k/sigma_l < 1".into(),
                value: margin,
            });
        }
        Ok(tally)
    }

    /// Samples in the original coordinates with `r_A` log-uniform in
    /// `(γ, r_max]` plus the eigen-axes.
    pub fn exterior_samples<R: Rng + ?Sized>(&self, r_max: f64, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        shell_samples(&self.a, self.gamma * (1.0 + 1e-9), r_max, count, rng)
            .into_iter()
            .map(|y| self.frame.from_frame(&y))
            .collect()
    }
}

/// Absolute slack in `σ_k − σ_l >= −slack · max(σ_k, 1)`.
pub const QUOTIENT_SLACK: f64 = 1e-12;
const MAX_LISTED_VIOLATIONS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub point: Vec<f64>,
    pub r_a: f64,
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Default)]
struct Tally {
    worst_sigma: Vec<f64>,
    worst_quotient_margin: f64,
    worst_ratio_minus_one: f64,
    max_radius: f64,
    bound_failures: usize,
    violations: Vec<Violation>,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        if self.worst_sigma.is_empty() {
            *self = other;
            return;
        }
        if other.worst_sigma.is_empty() {
            return;
        }
        for (a, b) in self.worst_sigma.iter_mut().zip(&other.worst_sigma) {
            *a = a.min(*b);
        }
        self.worst_quotient_margin = self.worst_quotient_margin.min(other.worst_quotient_margin);
        self.worst_ratio_minus_one = self.worst_ratio_minus_one.min(other.worst_ratio_minus_one);
        self.max_radius = self.max_radius.max(other.max_radius);
        self.bound_failures += other.bound_failures;
        self.violations.extend(other.violations);
    }

    fn into_report(mut self, sub: &Subsolution, count: usize) -> VerificationReport {
        let violation_count = self.violations.len();
        // deterministic listing regardless of thread scheduling
        self.violations.sort_by(|a, b| a.r_a.total_cmp(&b.r_a).then(a.kind.cmp(&b.kind)));
        self.violations.truncate(MAX_LISTED_VIOLATIONS);
        VerificationReport {
            sample_count: count,
            parameters: ReportParameters {
                k: sub.k,
                l: sub.l,
                a: sub.a.clone(),
                alpha: sub.alpha,
                beta: sub.beta,
                gamma: sub.gamma,
                m: sub.m(),
            },
            worst_sigma: self.worst_sigma,
            worst_quotient_margin: self.worst_quotient_margin,
            worst_ratio_minus_one: self.worst_ratio_minus_one,
            max_radius: self.max_radius,
            bound_failures: self.bound_failures,
            violation_count,
            violations: self.violations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportParameters {
    pub k: usize,
    pub l: usize,
    pub a: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m: f64,
}

/// Result of checking `σ_j(λ(D²Φ)) > 0` (`j <= k`) and `σ_k >= σ_l` at samples.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub sample_count: usize,
    pub parameters: ReportParameters,
    /// Minimum of `σ_j(λ(D²Φ))` over the samples, `j = 1..=k`.
    pub worst_sigma: Vec<f64>,
    /// Minimum of `σ_k − σ_l`.
    pub worst_quotient_margin: f64,
    /// Minimum of `σ_k/σ_l − 1`.
    pub worst_ratio_minus_one: f64,
    pub max_radius: f64,
    /// Samples where `σ_j >= σ_j(a) ψ^{j−1}(ψ + ξ̄_j r ψ') > 0` failed for some `j`.
    pub bound_failures: usize,
    pub violation_count: usize,
    /// At most 100 entries, ordered by `r_A`.
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0 && self.bound_failures == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admissibility::c_star;

    fn ball_sub(k: usize, l: usize, beta: f64) -> Subsolution {
        let c = c_star(3, k, l);
        Subsolution::new(&SymMatrix::diagonal(&[c, c, c]), k, l, 0.5, beta, 1.5).unwrap()
    }

    #[test]
    fn mu_trivial_beta_and_lower_bound() {
        let spec = ProfileSpec::new(2, 0, 2.0 / 3.0, 0.0, 1.0).unwrap();
        assert_eq!(mu(3.0, 1.0, &spec).unwrap(), 0.0);
        let spec = spec.with_beta(2.0).unwrap();
        for r in [1.0, 2.0, 10.0] {
            let v = mu(r, 2.0, &spec).unwrap();
            assert!(v >= mu_lower_bound(r, &spec));
            assert!(v <= asymptotic_constant(&spec) * r.powf(2.0 - spec.m) / (spec.m - 2.0) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mu_rejects_subquadratic() {
        let spec = ProfileSpec::new(2, 1, 0.9, 0.1, 2.0).unwrap();
        assert!(spec.m < 2.0);
        assert!(matches!(
            mu(1.0, 2.0, &spec),
            Err(SubsolutionError::Admissibility(AdmissibilityError::ExponentTooSmall { .. }))
        ));
    }

    #[test]
    fn table_matches_direct_mu() {
        let spec = ProfileSpec::new(3, 1, 0.8, 0.3, 3.0).unwrap();
        let table = TailTable::build(&spec, 1.2, 1e4).unwrap();
        for r in [1.2, 1.3, 2.0, 7.77, 100.0, 5e3, 2e4] {
            let a = table.eval(r).unwrap();
            let b = mu(r, 3.0, &spec).unwrap();
            assert!((a - b).abs() <= 1e-11 * b, "r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn phi_boundary_value_and_flat_case() {
        let sub = ball_sub(2, 0, 2.0);
        let g = sub.gamma / sub.a[0].sqrt();
        assert!((sub.phi_eval(&[g, 0.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
        let flat = ball_sub(2, 0, 1.0);
        let x = [2.0, 1.0, -0.5];
        let r = flat.r_a(&x);
        let expect = 0.5 + 0.5 * (r * r - 1.5 * 1.5);
        assert!((flat.phi_eval(&x).unwrap() - expect).abs() < 1e-13);
        let h = flat.phi_hessian(&x).unwrap();
        assert!(h.max_abs_diff(&flat.matrix) < 1e-15);
    }

    #[test]
    fn excluded_region_error() {
        let sub = ball_sub(2, 0, 2.0);
        assert!(matches!(
            sub.phi_eval(&[0.1, 0.0, 0.0]),
            Err(SubsolutionError::InsideExcludedRegion { .. })
        ));
        assert!(matches!(sub.phi_eval(&[1.0, 0.0]), Err(SubsolutionError::DimensionMismatch { .. })));
    }

    #[test]
    fn phi_mu_form_matches_direct_quadrature() {
        let sub = ball_sub(3, 1, 2.5);
        for x in [[3.0, 0.0, 0.0], [1.0, 2.0, -2.0], [20.0, 5.0, 1.0]] {
            let a = sub.phi_eval(&x).unwrap();
            let b = sub.phi_direct(&x).unwrap();
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn inward_extension_agrees_with_direct_integral() {
        let sub = ball_sub(3, 1, 2.5).extended_inward(1.0).unwrap();
        let c = sub.a[0];
        let x = [1.2 / c.sqrt(), 0.0, 0.0];
        let a = sub.phi_eval(&x).unwrap();
        let b = sub.phi_direct(&x).unwrap();
        assert!(a < sub.alpha);
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        assert!(sub.phi_eval(&[0.5 / c.sqrt(), 0.0, 0.0]).is_err());
    }

    #[test]
    fn flat_profile_is_balanced() {
        let sub = ball_sub(3, 1, 1.0);
        let report = sub.verify(&[vec![2.0, 1.0, 0.5], vec![10.0, -3.0, 4.0]]).unwrap();
        assert!(report.passed());
        assert!(report.worst_ratio_minus_one.abs() < 1e-13);
    }
}
