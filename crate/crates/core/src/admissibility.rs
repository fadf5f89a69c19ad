//! Direction ratios `Ξ_k`, their extremes `ξ̄_k`/`ξ_k`, the decay exponent
//! `m_{k,l}`, and membership in the matrix classes `𝒜_{k,l}` / `Ã_{k,l}`.
//!
//! The extremes always come from the closed forms
//! `ξ̄_k = a_n σ_{k-1;n}(a)/σ_k(a)` and `ξ_k = a_1 σ_{k-1;1}(a)/σ_k(a)` on the
//! ascending spectrum; [`xi_at`] exists to check them against sampled directions.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::spectra::{eigh, EigenDecomposition, SpectraError, SymMatrix};
use crate::symfunc::{in_gamma_plus, SymFuncError, SymVec, SymmetricTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmissibilityError {
    #[error("spectrum is not in the positive cone Γ⁺")]
    NotPositiveCone,
    #[error("direction vector must be nonzero")]
    ZeroVector,
    #[error("need 0 <= l < k <= n, got k={k}, l={l}, n={n}")]
    InvalidPair { k: usize, l: usize, n: usize },
    #[error("degree {k} exceeds dimension {n}")]
    DegreeOutOfRange { k: usize, n: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("σ_k(a) = {sigma_k} differs from σ_l(a) = {sigma_l}, so the spectrum is not in 𝒜_{{k,l}}")]
    NotAdmissible { sigma_k: f64, sigma_l: f64 },
    #[error("m_{{k,l}} = {m} but the construction requires m_{{k,l}} > 2 (A must lie in Ã_{{k,l}}, not just 𝒜_{{k,l}})")]
    ExponentTooSmall { m: f64 },
    #[error("proposition check failed: {0}")]
    PropositionViolated(String),
    #[error(transparent)]
    SymFunc(#[from] SymFuncError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

fn check_pair(k: usize, l: usize, n: usize) -> Result<(), AdmissibilityError> {
    if l >= k || k > n {
        return Err(AdmissibilityError::InvalidPair { k, l, n });
    }
    Ok(())
}

fn positive_sorted<T: Scalar>(a: &SymVec<T>) -> Result<SymVec<T>, AdmissibilityError> {
    let sorted = a.sorted();
    if !in_gamma_plus(&sorted) || sorted.entries()[0] <= T::zero() {
        return Err(AdmissibilityError::NotPositiveCone);
    }
    Ok(sorted)
}

/// `Ξ_k(a, x) = Σ σ_{k-1;i}(a) a_i² x_i² / (σ_k(a) Σ a_i x_i²)`, with `Ξ_0 ≡ 0`.
///
/// `x` is paired with `a` entry by entry as given (no sorting).
pub fn xi_at<T: Scalar>(k: usize, a: &SymVec<T>, x: &[T]) -> Result<T, AdmissibilityError> {
    let n = a.len();
    if x.len() != n {
        return Err(AdmissibilityError::DimensionMismatch(n, x.len()));
    }
    if k > n {
        return Err(AdmissibilityError::DegreeOutOfRange { k, n });
    }
    if !in_gamma_plus(a) {
        return Err(AdmissibilityError::NotPositiveCone);
    }
    if x.iter().all(|v| v.is_zero()) {
        return Err(AdmissibilityError::ZeroVector);
    }
    if k == 0 {
        return Ok(T::zero());
    }
    let table = SymmetricTable::new(a);
    let mut numer = T::zero();
    let mut denom = T::zero();
    for (i, (ai, xi)) in a.entries().iter().zip(x).enumerate() {
        let ax2 = ai.clone() * xi.clone() * xi.clone();
        numer = numer + table.sigma_omit(k as isize - 1, i)? * ai.clone() * ax2.clone();
        denom = denom + ax2;
    }
    Ok(numer / (table.sigma(k as isize) * denom))
}

/// `(ξ_k(a), ξ̄_k(a))` from the closed forms on the sorted spectrum.
///
/// Conventions: `ξ_0 = ξ̄_0 = 0` and `ξ_n = ξ̄_n = 1`.
pub fn xi_bounds<T: Scalar>(k: usize, a: &SymVec<T>) -> Result<(T, T), AdmissibilityError> {
    let n = a.len();
    if k > n {
        return Err(AdmissibilityError::DegreeOutOfRange { k, n });
    }
    let sorted = positive_sorted(a)?;
    Ok(xi_bounds_sorted(k, &SymmetricTable::new(&sorted), sorted.entries()))
}

fn xi_bounds_sorted<T: Scalar>(k: usize, table: &SymmetricTable<T>, sorted: &[T]) -> (T, T) {
    let n = sorted.len();
    if k == 0 {
        return (T::zero(), T::zero());
    }
    if k == n {
        return (T::one(), T::one());
    }
    let k = k as isize;
    let sk = table.sigma(k);
    let lower = sorted[0].clone() * table.sigma_omit(k - 1, 0).expect("index in range") / sk.clone();
    let upper = sorted[n - 1].clone() * table.sigma_omit(k - 1, n - 1).expect("index in range") / sk;
    (lower, upper)
}

/// `m_{k,l}(a) = (k - l) / (ξ̄_k(a) - ξ_l(a))`.
pub fn m_exponent<T: Scalar>(k: usize, l: usize, a: &SymVec<T>) -> Result<T, AdmissibilityError> {
    Ok(XiProfile::new(k, l, a)?.m)
}

/// The quantities of one `(k, l)` pair for a fixed spectrum.
#[derive(Debug, Clone)]
pub struct XiProfile<T> {
    /// Sorted ascending, all entries positive.
    pub a: SymVec<T>,
    pub k: usize,
    pub l: usize,
    pub xi_upper_k: T,
    pub xi_lower_l: T,
    pub m: T,
}

impl<T: Scalar> XiProfile<T> {
    pub fn new(k: usize, l: usize, a: &SymVec<T>) -> Result<Self, AdmissibilityError> {
        check_pair(k, l, a.len())?;
        let sorted = positive_sorted(a)?;
        let table = SymmetricTable::new(&sorted);
        let (_, xi_upper_k) = xi_bounds_sorted(k, &table, sorted.entries());
        let (xi_lower_l, _) = xi_bounds_sorted(l, &table, sorted.entries());
        let m = T::from_usize(k - l) / (xi_upper_k.clone() - xi_lower_l.clone());
        Ok(Self {
            a: sorted,
            k,
            l,
            xi_upper_k,
            xi_lower_l,
            m,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }
}

impl XiProfile<f64> {
    /// Errors unless `m_{k,l} > 2`.
    pub fn require_superquadratic(&self) -> Result<(), AdmissibilityError> {
        if self.m > 2.0 {
            Ok(())
        } else {
            Err(AdmissibilityError::ExponentTooSmall { m: self.m })
        }
    }
}

/// `C(n, i)` as a float.
pub fn binomial(n: usize, i: usize) -> f64 {
    if i > n {
        return 0.0;
    }
    let i = i.min(n - i);
    (0..i).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `c_* = (C(n,l) / C(n,k))^{1/(k-l)}`, the multiple of the identity lying in `𝒜_{k,l}`.
pub fn c_star(n: usize, k: usize, l: usize) -> f64 {
    (binomial(n, l) / binomial(n, k)).powf(1.0 / (k - l) as f64)
}

/// `ϱ = (σ_k(a)/σ_l(a))^{-1/(k-l)}`, so that `ϱ a` satisfies `σ_k = σ_l`.
pub fn normalizing_factor(k: usize, l: usize, a: &SymVec<f64>) -> Result<f64, AdmissibilityError> {
    check_pair(k, l, a.len())?;
    positive_sorted(a)?;
    let table = SymmetricTable::new(a);
    let q = table.sigma(k as isize) / table.sigma(l as isize);
    Ok(q.powf(-1.0 / (k - l) as f64))
}

/// Membership tolerance for `σ_k = σ_l` in floating point.
pub const ADMISSIBLE_REL_TOL: f64 = 1e-10;

/// Classification flags of a spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumClass {
    pub in_gamma_plus: bool,
    pub in_a_kl: bool,
    pub in_atilde_kl: bool,
    pub m: Option<f64>,
}

/// `σ_k = σ_l` and `m > 2` tests for a spectrum; exact under rationals,
/// relative tolerance [`ADMISSIBLE_REL_TOL`] under floats.
pub fn classify_spectrum<T: Scalar>(k: usize, l: usize, a: &SymVec<T>) -> Result<SpectrumClass, AdmissibilityError> {
    check_pair(k, l, a.len())?;
    let Ok(profile) = XiProfile::new(k, l, a) else {
        return Ok(SpectrumClass {
            in_gamma_plus: false,
            in_a_kl: false,
            in_atilde_kl: false,
            m: None,
        });
    };
    let table = SymmetricTable::new(&profile.a);
    let sk = table.sigma(k as isize);
    let sl = table.sigma(l as isize);
    let scale = if sk > sl { sk.clone() } else { sl.clone() };
    let in_a_kl = sk.approx_eq_rel(&sl, ADMISSIBLE_REL_TOL, &scale);
    let m_gt_two = profile.m > T::from_i64(2);
    Ok(SpectrumClass {
        in_gamma_plus: true,
        in_a_kl,
        in_atilde_kl: in_a_kl && m_gt_two,
        m: Some(profile.m.to_f64()),
    })
}

/// A symmetric matrix together with its spectrum and class flags.
#[derive(Debug, Clone)]
pub struct AdmissibleMatrix {
    pub matrix: SymMatrix,
    /// `λ(A)` ascending.
    pub a: SymVec<f64>,
    pub frame: EigenDecomposition,
    pub k: usize,
    pub l: usize,
    pub in_a_kl: bool,
    pub in_atilde_kl: bool,
    /// Present when `λ(A) ∈ Γ⁺`.
    pub rho: Option<f64>,
    pub c_star: f64,
    pub m: Option<f64>,
}

impl AdmissibleMatrix {
    pub fn xi_profile(&self) -> Result<XiProfile<f64>, AdmissibilityError> {
        XiProfile::new(self.k, self.l, &self.a)
    }

    /// Errors with the reason when `A ∉ Ã_{k,l}`.
    pub fn require_atilde(&self) -> Result<(), AdmissibilityError> {
        let table = SymmetricTable::new(&self.a);
        if self.rho.is_none() {
            return Err(AdmissibilityError::NotPositiveCone);
        }
        if !self.in_a_kl {
            return Err(AdmissibilityError::NotAdmissible {
                sigma_k: table.sigma(self.k as isize),
                sigma_l: table.sigma(self.l as isize),
            });
        }
        if !self.in_atilde_kl {
            return Err(AdmissibilityError::ExponentTooSmall {
                m: self.m.unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }
}

/// Spectrum, flags, `ϱ` and `c_*` for `A` (already symmetric; use
/// [`SymMatrix::symmetrize`] for general square input).
pub fn classify(matrix: &SymMatrix, k: usize, l: usize) -> Result<AdmissibleMatrix, AdmissibilityError> {
    let n = matrix.n();
    check_pair(k, l, n)?;
    let frame = eigh(matrix)?;
    let a = frame.values.clone();
    let class = classify_spectrum(k, l, &a)?;
    let rho = if class.in_gamma_plus {
        Some(normalizing_factor(k, l, &a)?)
    } else {
        None
    };
    Ok(AdmissibleMatrix {
        matrix: matrix.clone(),
        a,
        frame,
        k,
        l,
        in_a_kl: class.in_a_kl,
        in_atilde_kl: class.in_atilde_kl,
        rho,
        c_star: c_star(n, k, l),
        m: class.m,
    })
}

/// Concrete check of the structural facts about `Ã_{k,l}` for an admissible spectrum.
///
/// Returns whether `m_{k,l}(a) > 2`. Along the way it confirms that
/// `k - l >= 2` forces `m > 2` and that `m_{n,0} = n`, erroring with
/// [`AdmissibilityError::PropositionViolated`] if either fails.
pub fn prop_wtakl_check<T: Scalar>(k: usize, l: usize, a: &SymVec<T>) -> Result<bool, AdmissibilityError> {
    let profile = XiProfile::new(k, l, a)?;
    let table = SymmetricTable::new(&profile.a);
    let sk = table.sigma(k as isize);
    let sl = table.sigma(l as isize);
    let scale = if sk > sl { sk.clone() } else { sl.clone() };
    if !sk.approx_eq_rel(&sl, ADMISSIBLE_REL_TOL, &scale) {
        return Err(AdmissibilityError::NotAdmissible {
            sigma_k: sk.to_f64(),
            sigma_l: sl.to_f64(),
        });
    }
    let n = profile.n();
    let m_gt_two = profile.m > T::from_i64(2);
    if k - l >= 2 && !m_gt_two {
        return Err(AdmissibilityError::PropositionViolated(format!(
            "k - l = {} but m = {}",
            k - l,
            profile.m
        )));
    }
    if k == n && l == 0 && !profile.m.approx_eq_rel(&T::from_usize(n), 1e-12, &T::from_usize(n)) {
        return Err(AdmissibilityError::PropositionViolated(format!(
            "m_{{n,0}} = {} instead of {n}",
            profile.m
        )));
    }
    Ok(m_gt_two)
}
