//! The radial profile `ψ(r, β)`: solution of
//!
//! ```text
//! ψ^k + ξ̄_k r ψ^{k-1} ψ' − ψ^l − ξ_l r ψ^{l-1} ψ' = 0,   ψ(1) = β,
//! ```
//!
//! computed two independent ways. [`solve_implicit`] finds the root of the
//! integrated relation `ψ^{mξ̄_k}(1 − ψ^{-(k-l)}) = B(β) r^{-m}`;
//! [`solve_ode`] integrates `ψ' = g(ψ)/r` with an adaptive Runge–Kutta pair.
//!
//! Both work with the excess `t = ψ − 1` through `ln_1p`/`exp_m1`, so the
//! decaying tail keeps full relative precision far beyond `r = 10³`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::admissibility::XiProfile;
use crate::numeric::ode::{self, OdeError, OdeOptions};
use crate::numeric::quadrature;
use crate::numeric::roots::{find_root, BracketOptions, RootError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("need 0 <= l < k, got k={k}, l={l}")]
    InvalidPair { k: usize, l: usize },
    #[error("β must be a finite number >= 1, got {0}")]
    BetaBelowOne(f64),
    #[error("need 0 <= ξ_l < ξ̄_k <= 1, got ξ̄_k = {upper}, ξ_l = {lower}")]
    InvalidXi { upper: f64, lower: f64 },
    #[error("radius must be >= 1, got {0}")]
    RadiusBelowOne(f64),
    #[error("root bracketing failed: {0}")]
    Root(#[from] RootError),
    #[error("ODE integration failed: {0}")]
    StepFailure(#[from] OdeError),
}

/// Coefficients of the profile equation for one `(k, l, a, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSpec {
    pub k: usize,
    pub l: usize,
    pub xi_upper_k: f64,
    pub xi_lower_l: f64,
    pub m: f64,
    pub beta: f64,
}

impl ProfileSpec {
    pub fn new(k: usize, l: usize, xi_upper_k: f64, xi_lower_l: f64, beta: f64) -> Result<Self, ProfileError> {
        if l >= k {
            return Err(ProfileError::InvalidPair { k, l });
        }
        let xi_ok = xi_upper_k.is_finite()
            && xi_lower_l.is_finite()
            && xi_upper_k > 0.0
            && xi_upper_k <= 1.0
            && xi_lower_l >= 0.0
            && xi_lower_l < xi_upper_k;
        if !xi_ok {
            return Err(ProfileError::InvalidXi {
                upper: xi_upper_k,
                lower: xi_lower_l,
            });
        }
        let spec = Self {
            k,
            l,
            xi_upper_k,
            xi_lower_l,
            m: (k - l) as f64 / (xi_upper_k - xi_lower_l),
            beta: 1.0,
        };
        spec.with_beta(beta)
    }

    pub fn from_xi(xi: &XiProfile<f64>, beta: f64) -> Result<Self, ProfileError> {
        Self::new(xi.k, xi.l, xi.xi_upper_k, xi.xi_lower_l, beta)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self, ProfileError> {
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(ProfileError::BetaBelowOne(beta));
        }
        Ok(Self { beta, ..*self })
    }

    /// `k - l`.
    pub fn order_gap(&self) -> f64 {
        (self.k - self.l) as f64
    }

    /// `ξ_l / ξ̄_k`, in `[0, 1)`.
    pub fn xi_ratio(&self) -> f64 {
        self.xi_lower_l / self.xi_upper_k
    }

    /// `m ξ̄_k − (k − l)`; zero exactly when `l = 0`.
    pub fn excess_power(&self) -> f64 {
        (self.m * self.xi_upper_k - self.order_gap()).max(0.0)
    }

    /// `c` in `ψ − 1 = (B/(k−l)) r^{−m} (1 − c (ψ − 1) + …)`.
    pub fn second_order_coefficient(&self) -> f64 {
        self.excess_power() + 0.5 * (self.order_gap() - 1.0)
    }

    /// `B(β) = β^{mξ̄_k − k + l}(β^{k−l} − 1)`.
    pub fn b_of(&self, beta: f64) -> f64 {
        let lb = beta.ln();
        (self.excess_power() * lb).exp() * (self.order_gap() * lb).exp_m1()
    }

    pub fn b_beta(&self) -> f64 {
        self.b_of(self.beta)
    }

    /// `G(1 + t) = (1+t)^{mξ̄_k − k + l}((1+t)^{k−l} − 1)`, increasing in `t >= 0`.
    fn lhs_from_excess(&self, t: f64) -> f64 {
        let lt = t.ln_1p();
        (self.excess_power() * lt).exp() * (self.order_gap() * lt).exp_m1()
    }
}

/// `F(ψ) = ψ^{mξ̄_k−k+l}(ψ^{k−l} − 1) − B(β) r^{−m}`.
pub fn implicit_residual(spec: &ProfileSpec, r: f64, psi: f64) -> f64 {
    spec.lhs_from_excess(psi - 1.0) - spec.b_beta() * r.powf(-spec.m)
}

fn check_radius(r: f64) -> Result<(), ProfileError> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(ProfileError::RadiusBelowOne(r));
    }
    Ok(())
}

/// `ψ(r, β) − 1` from the integrated relation.
pub fn solve_implicit_excess(spec: &ProfileSpec, r: f64) -> Result<f64, ProfileError> {
    check_radius(r)?;
    let top = spec.beta - 1.0;
    if top == 0.0 {
        return Ok(0.0);
    }
    if r == 1.0 {
        return Ok(top);
    }
    let decay = (-spec.m * r.ln()).exp();
    let target = spec.b_beta() * decay;
    let f = |t: f64| spec.lhs_from_excess(t) - target;
    // (β − 1) r^{−m} <= ψ − 1 <= B(β) r^{−m}/(k − l)
    let lo = top * decay * (1.0 - 1e-12);
    let hi = (spec.b_beta() / spec.order_gap() * decay * (1.0 + 1e-12)).min(top);
    let opts = BracketOptions::default();
    let root = match find_root(f, lo, hi, &opts) {
        Ok(root) => root,
        Err(RootError::NotBracketed { .. }) => find_root(f, 0.0, top, &opts)?,
        Err(e) => return Err(e.into()),
    };
    Ok(root.x)
}

/// `ψ(r, β)` as the unique root in `[1, β]` of [`implicit_residual`].
pub fn solve_implicit(spec: &ProfileSpec, r: f64) -> Result<f64, ProfileError> {
    Ok(1.0 + solve_implicit_excess(spec, r)?)
}

/// `g` written in terms of the excess `t = ν − 1`.
fn slope_from_excess(spec: &ProfileSpec, t: f64) -> f64 {
    let e = (spec.order_gap() * t.ln_1p()).exp_m1();
    -((1.0 + t) / spec.xi_upper_k) * e / (e + 1.0 - spec.xi_ratio())
}

/// `g(ν) = −(ν/ξ̄_k)(ν^{k−l} − 1)/(ν^{k−l} − ξ_l/ξ̄_k)`, so that `ψ' = g(ψ)/r`.
pub fn slope_g(spec: &ProfileSpec, nu: f64) -> f64 {
    slope_from_excess(spec, nu - 1.0)
}

/// `g'(ν)`.
pub fn slope_g_prime(spec: &ProfileSpec, nu: f64) -> f64 {
    let d = spec.order_gap();
    let rho = spec.xi_ratio();
    let e = (d * (nu - 1.0).ln_1p()).exp_m1();
    let denom = e + 1.0 - rho;
    let h = e / denom;
    let h_prime = d * nu.powf(d - 1.0) * (1.0 - rho) / (denom * denom);
    -h / spec.xi_upper_k - nu / spec.xi_upper_k * h_prime
}

/// `dψ/dr = g(ψ)/r`; nonpositive, zero only at `ψ = 1`.
pub fn psi_derivative(spec: &ProfileSpec, r: f64, psi: f64) -> f64 {
    slope_g(spec, psi) / r
}

/// Relative step tolerance of the Runge–Kutta cross-check.
pub const ODE_RTOL: f64 = 1e-10;

/// `ψ(r, β) − 1` by integrating `dt/ds = g(1 + t)` in `s = ln r` from `t(0) = β − 1`.
pub fn solve_ode_excess(spec: &ProfileSpec, r: f64) -> Result<f64, ProfileError> {
    check_radius(r)?;
    let top = spec.beta - 1.0;
    if top == 0.0 || r == 1.0 {
        return Ok(top);
    }
    let opts = OdeOptions {
        rtol: ODE_RTOL,
        atol: 1e-300,
        ..OdeOptions::default()
    };
    let sol = ode::integrate(|_, t| slope_from_excess(spec, t.max(0.0)), 0.0, top, r.ln(), &opts)?;
    Ok(sol.y)
}

/// `ψ(r, β)` by adaptive Dormand–Prince integration of `ψ' = g(ψ)/r`.
pub fn solve_ode(spec: &ProfileSpec, r: f64) -> Result<f64, ProfileError> {
    Ok(1.0 + solve_ode_excess(spec, r)?)
}

/// `∂ψ/∂β (r) = exp ∫_1^r g'(ψ(τ, β))/τ dτ`, by Gauss–Legendre quadrature in `ln τ`.
pub fn beta_sensitivity(spec: &ProfileSpec, r: f64) -> Result<f64, ProfileError> {
    check_radius(r)?;
    if r == 1.0 {
        return Ok(1.0);
    }
    let mut failure = None;
    let integrand = |s: f64| match solve_implicit(spec, s.exp()) {
        Ok(psi) => slope_g_prime(spec, psi),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let result = quadrature::integrate(integrand, 0.0, r.ln(), 2, 1e-12, 1e-15);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result.value.exp())
}

/// `B(β)/(k − l)`, the limit of `(ψ(r, β) − 1) r^m` as `r → ∞`.
pub fn asymptotic_constant(spec: &ProfileSpec) -> f64 {
    spec.b_beta() / spec.order_gap()
}

/// For `l = 0` the profile has the closed form `(1 + (β^k − 1) r^{−k/ξ̄_k})^{1/k}`.
pub fn closed_form_hessian(spec: &ProfileSpec, r: f64) -> Option<f64> {
    if spec.l != 0 {
        return None;
    }
    let k = spec.k as f64;
    let lift = (k * spec.beta.ln()).exp_m1() * r.powf(-k / spec.xi_upper_k);
    Some((lift.ln_1p() / k).exp())
}

const CACHE_CAPACITY: usize = 1 << 16;

/// A profile with fixed parameters, memoizing `ψ` by the bit pattern of `r`.
#[derive(Debug)]
pub struct Profile {
    spec: ProfileSpec,
    b_beta: f64,
    cache: Mutex<HashMap<u64, f64>>,
}

impl Clone for Profile {
    fn clone(&self) -> Self {
        Self::new(self.spec)
    }
}

impl Profile {
    pub fn new(spec: ProfileSpec) -> Self {
        Self {
            spec,
            b_beta: spec.b_beta(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn beta(&self) -> f64 {
        self.spec.beta
    }

    pub fn m(&self) -> f64 {
        self.spec.m
    }

    pub fn b_beta(&self) -> f64 {
        self.b_beta
    }

    /// `ψ(r) − 1`.
    pub fn excess(&self, r: f64) -> Result<f64, ProfileError> {
        let key = r.to_bits();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = solve_implicit_excess(&self.spec, r)?;
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() < CACHE_CAPACITY {
            cache.insert(key, v);
        }
        Ok(v)
    }

    pub fn eval(&self, r: f64) -> Result<f64, ProfileError> {
        Ok(1.0 + self.excess(r)?)
    }

    pub fn deriv(&self, r: f64) -> Result<f64, ProfileError> {
        let t = self.excess(r)?;
        Ok(slope_from_excess(&self.spec, t) / r)
    }

    pub fn asymptotic_constant(&self) -> f64 {
        self.b_beta / self.spec.order_gap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hessian_spec(beta: f64) -> ProfileSpec {
        // k = 2, l = 0, a = c_*(1,1,1): ξ̄_2 = 2/3, m = 3
        ProfileSpec::new(2, 0, 2.0 / 3.0, 0.0, beta).unwrap()
    }

    #[test]
    fn initial_condition_and_trivial_beta() {
        let spec = hessian_spec(2.0);
        assert_eq!(solve_implicit(&spec, 1.0).unwrap(), 2.0);
        let flat = hessian_spec(1.0);
        for r in [1.0, 3.0, 1e6] {
            assert_eq!(solve_implicit(&flat, r).unwrap(), 1.0);
            assert_eq!(solve_ode(&flat, r).unwrap(), 1.0);
        }
    }

    #[test]
    fn hessian_closed_form_value() {
        let spec = hessian_spec(2.0);
        assert!((spec.m - 3.0).abs() < 1e-15);
        let psi = solve_implicit(&spec, 2.0).unwrap();
        assert!((psi - 1.375f64.sqrt()).abs() < 1e-14, "{psi}");
        assert!((psi - 1.1726039).abs() < 1e-7);
    }

    #[test]
    fn derivative_examples() {
        let spec = hessian_spec(2.0);
        assert_eq!(psi_derivative(&spec, 1.0, 1.0), 0.0);
        assert!((psi_derivative(&spec, 1.0, 2.0) + 9.0 / 4.0).abs() < 1e-14);
        for psi in [1.0 + 1e-9, 1.2, 1.7, 2.0] {
            assert!(psi_derivative(&spec, 3.0, psi) < 0.0);
        }
    }

    #[test]
    fn asymptotic_constant_example() {
        assert_eq!(asymptotic_constant(&hessian_spec(1.0)), 0.0);
        let spec = hessian_spec(2.0);
        assert!((spec.b_beta() - 3.0).abs() < 1e-14);
        assert!((asymptotic_constant(&spec) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn implicit_residual_small() {
        let spec = ProfileSpec::new(3, 1, 0.8, 0.2, 2.5).unwrap();
        for r in [1.0, 1.5, 2.0, 10.0, 1e3] {
            let psi = solve_implicit(&spec, r).unwrap();
            assert!(implicit_residual(&spec, r, psi).abs() <= 1e-13 * spec.b_beta());
        }
    }

    #[test]
    fn sensitivity_at_start_is_one() {
        let spec = ProfileSpec::new(3, 1, 0.8, 0.2, 2.5).unwrap();
        assert_eq!(beta_sensitivity(&spec, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(ProfileSpec::new(2, 2, 0.5, 0.1, 1.0), Err(ProfileError::InvalidPair { .. })));
        assert!(matches!(ProfileSpec::new(2, 1, 0.5, 0.6, 1.0), Err(ProfileError::InvalidXi { .. })));
        assert!(matches!(ProfileSpec::new(2, 1, 0.5, 0.1, 0.5), Err(ProfileError::BetaBelowOne(_))));
        let spec = hessian_spec(2.0);
        assert!(matches!(solve_implicit(&spec, 0.5), Err(ProfileError::RadiusBelowOne(_))));
    }

    #[test]
    fn memoized_profile_matches_direct() {
        let spec = ProfileSpec::new(3, 1, 0.8, 0.2, 2.5).unwrap();
        let profile = Profile::new(spec);
        for r in [1.0, 2.0, 2.0, 50.0] {
            assert_eq!(profile.eval(r).unwrap(), solve_implicit(&spec, r).unwrap());
        }
        let d = profile.deriv(2.0).unwrap();
        let direct = psi_derivative(&spec, 2.0, profile.eval(2.0).unwrap());
        assert!((d - direct).abs() <= 1e-14 * direct.abs());
    }
}
