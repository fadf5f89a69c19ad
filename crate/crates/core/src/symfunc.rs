//! Elementary symmetric functions, the Γ_k cones and the ellipticity
//! structure of the quotient operator `σ_k / σ_l`.
//!
//! Every routine is generic over [`Scalar`], so the same code runs in `f64`
//! and in exact `BigRational` arithmetic. Degrees are signed so that the
//! conventions `σ_{-1} ≡ 0`, `σ_0 ≡ 1` and `σ_k ≡ 0` for `k > n` hold without
//! special-casing at call sites. Entry indices are zero-based.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymFuncError {
    #[error("vector must have at least one entry")]
    Empty,
    #[error("entry {0} is not finite")]
    NonFinite(usize),
    #[error("index {index} out of range for a vector of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("omitted indices must differ (both were {0})")]
    RepeatedIndex(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degree {degree} outside 1..={n}")]
    DegreeOutOfRange { degree: isize, n: usize },
    #[error("need 0 <= l < k <= n, got k={k}, l={l}, n={n}")]
    InvalidPair { k: isize, l: isize, n: usize },
    #[error("vector is not in the cone Γ_{k}")]
    NotInCone { k: usize },
}

/// An n-vector of eigenvalue-like reals.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec<T> {
    entries: Vec<T>,
}

impl<T: Scalar> SymVec<T> {
    pub fn new(entries: Vec<T>) -> Result<Self, SymFuncError> {
        if entries.is_empty() {
            return Err(SymFuncError::Empty);
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite_val()) {
            return Err(SymFuncError::NonFinite(i));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.entries.get(i)
    }

    /// Ascending copy; ties keep their original order.
    pub fn sorted(&self) -> Self {
        let mut entries = self.entries.clone();
        entries.sort_by(|a, b| a.partial_cmp(b).expect("finite entries are totally ordered"));
        Self { entries }
    }

    pub fn is_sorted(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] <= w[1])
    }

    /// Entrywise absolute values; used as the magnitude scale for sign tests.
    pub fn abs(&self) -> Self {
        Self {
            entries: self.entries.iter().map(Scalar::abs_val).collect(),
        }
    }

    pub fn scaled(&self, factor: &T) -> Self {
        Self {
            entries: self.entries.iter().map(|v| v.clone() * factor.clone()).collect(),
        }
    }

    fn check_index(&self, i: usize) -> Result<(), SymFuncError> {
        if i >= self.len() {
            return Err(SymFuncError::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }
}

impl SymVec<f64> {
    pub fn from_slice(values: &[f64]) -> Result<Self, SymFuncError> {
        Self::new(values.to_vec())
    }
}

/// Coefficients `e_0..=e_top` of `Π (1 + p_i t)` truncated at degree `top`,
/// skipping the entries listed in `skip`.
fn product_coefficients<T: Scalar>(entries: &[T], top: usize, skip: &[usize]) -> Vec<T> {
    let mut coeffs = vec![T::zero(); top + 1];
    coeffs[0] = T::one();
    let mut degree = 0usize;
    for (i, p) in entries.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        degree = (degree + 1).min(top);
        for j in (1..=degree).rev() {
            let term = p.clone() * coeffs[j - 1].clone();
            coeffs[j] = coeffs[j].clone() + term;
        }
    }
    coeffs
}

fn degree_in_range(k: isize, n: usize) -> Option<usize> {
    if k < 0 || k as usize > n {
        None
    } else {
        Some(k as usize)
    }
}

/// `σ_k(p)` with `σ_{-1} ≡ 0`, `σ_0 ≡ 1` and `σ_k ≡ 0` for `k > n`.
pub fn sigma<T: Scalar>(k: isize, p: &SymVec<T>) -> T {
    match degree_in_range(k, p.len()) {
        None => T::zero(),
        Some(k) => product_coefficients(p.entries(), k, &[]).pop().unwrap(),
    }
}

/// `σ_{k;i}(p)`: `σ_k` of `p` with entry `i` deleted.
pub fn sigma_omit<T: Scalar>(k: isize, i: usize, p: &SymVec<T>) -> Result<T, SymFuncError> {
    p.check_index(i)?;
    Ok(match degree_in_range(k, p.len() - 1) {
        None => T::zero(),
        Some(k) => product_coefficients(p.entries(), k, &[i]).pop().unwrap(),
    })
}

/// `σ_{k;i,j}(p)`: `σ_k` of `p` with entries `i` and `j` deleted.
pub fn sigma_omit2<T: Scalar>(
    k: isize,
    i: usize,
    j: usize,
    p: &SymVec<T>,
) -> Result<T, SymFuncError> {
    p.check_index(i)?;
    p.check_index(j)?;
    if i == j {
        return Err(SymFuncError::RepeatedIndex(i));
    }
    Ok(match degree_in_range(k, p.len() - 2) {
        None => T::zero(),
        Some(k) => product_coefficients(p.entries(), k, &[i, j]).pop().unwrap(),
    })
}

/// All elementary symmetric functions of one vector, with cheap
/// single-deletion queries.
///
/// Under exact arithmetic `σ_{·;i}` comes from one synthetic division of the
/// product polynomial by `(1 + p_i t)`. In floating point that forward
/// recurrence amplifies rounding by powers of `p_i`, so the deleted product is
/// re-expanded instead (still `O(n²)` for the whole row).
#[derive(Debug, Clone)]
pub struct SymmetricTable<T> {
    entries: Vec<T>,
    coeffs: Vec<T>,
}

impl<T: Scalar> SymmetricTable<T> {
    pub fn new(p: &SymVec<T>) -> Self {
        let n = p.len();
        Self {
            entries: p.entries().to_vec(),
            coeffs: product_coefficients(p.entries(), n, &[]),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn sigma(&self, k: isize) -> T {
        match degree_in_range(k, self.n()) {
            None => T::zero(),
            Some(k) => self.coeffs[k].clone(),
        }
    }

    /// `σ_{0;i} ..= σ_{n-1;i}`.
    pub fn omit_row(&self, i: usize) -> Result<Vec<T>, SymFuncError> {
        if i >= self.n() {
            return Err(SymFuncError::IndexOutOfRange {
                index: i,
                len: self.n(),
            });
        }
        let n = self.n();
        if T::is_exact() {
            let p = &self.entries[i];
            let mut row = Vec::with_capacity(n);
            row.push(T::one());
            for j in 1..n {
                let next = self.coeffs[j].clone() - p.clone() * row[j - 1].clone();
                row.push(next);
            }
            Ok(row)
        } else {
            Ok(product_coefficients(&self.entries, n - 1, &[i]))
        }
    }

    pub fn sigma_omit(&self, k: isize, i: usize) -> Result<T, SymFuncError> {
        let row = self.omit_row(i)?;
        Ok(match degree_in_range(k, self.n() - 1) {
            None => T::zero(),
            Some(k) => row[k].clone(),
        })
    }
}

/// `σ_k(λ(M))` for `M = diag(p) + s·q qᵀ`, without forming `M`:
/// `σ_k(p) + s Σ_i σ_{k-1;i}(p) q_i²`.
pub fn sigma_rank_one<T: Scalar>(
    k: isize,
    p: &SymVec<T>,
    q: &SymVec<T>,
    s: &T,
) -> Result<T, SymFuncError> {
    if p.len() != q.len() {
        return Err(SymFuncError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let n = p.len();
    if k < 1 || k as usize > n {
        return Err(SymFuncError::DegreeOutOfRange { degree: k, n });
    }
    let mut correction = T::zero();
    for (i, qi) in q.entries().iter().enumerate() {
        let omitted = sigma_omit(k - 1, i, p)?;
        correction = correction + omitted * qi.clone() * qi.clone();
    }
    Ok(sigma(k, p) + s.clone() * correction)
}

/// Membership in `Γ_k = {σ_1 > 0, …, σ_k > 0}`.
///
/// Floats treat `|σ_j| <= 1e-14 σ_j(|λ|)` as zero, so points on the cone
/// boundary are rejected. Exact inputs are decided exactly.
pub fn in_gamma_k<T: Scalar>(k: usize, lam: &SymVec<T>) -> bool {
    let k = k.min(lam.len());
    let values = product_coefficients(lam.entries(), k, &[]);
    let scales = product_coefficients(lam.abs().entries(), k, &[]);
    (1..=k).all(|j| values[j].is_positive_rel(&scales[j]))
}

/// Membership in the positive cone `Γ_n`.
pub fn in_gamma_plus<T: Scalar>(lam: &SymVec<T>) -> bool {
    in_gamma_k(lam.len(), lam)
}

/// Numerator of `∂_{λ_i}(σ_k/σ_l)`: `σ_{k-1;i} σ_l - σ_k σ_{l-1;i}`.
///
/// Nonnegative on `Γ_k`; dividing by `σ_l²` gives the full derivative.
pub fn quotient_ellipticity_gap<T: Scalar>(
    k: usize,
    l: usize,
    i: usize,
    lam: &SymVec<T>,
) -> Result<T, SymFuncError> {
    let n = lam.len();
    if l >= k || k > n {
        return Err(SymFuncError::InvalidPair {
            k: k as isize,
            l: l as isize,
            n,
        });
    }
    lam.check_index(i)?;
    Ok(quotient_ellipticity_gaps(k, l, lam)?.swap_remove(i))
}

/// [`quotient_ellipticity_gap`] for every index `i`, sharing one table.
pub fn quotient_ellipticity_gaps<T: Scalar>(k: usize, l: usize, lam: &SymVec<T>) -> Result<Vec<T>, SymFuncError> {
    let n = lam.len();
    if l >= k || k > n {
        return Err(SymFuncError::InvalidPair {
            k: k as isize,
            l: l as isize,
            n,
        });
    }
    if !in_gamma_k(k, lam) {
        return Err(SymFuncError::NotInCone { k });
    }
    let (k, l) = (k as isize, l as isize);
    let table = SymmetricTable::new(lam);
    (0..n)
        .map(|i| {
            let row = table.omit_row(i)?;
            let omit = |d: isize| degree_in_range(d, n - 1).map_or(T::zero(), |d| row[d].clone());
            Ok(omit(k - 1) * table.sigma(l) - table.sigma(k) * omit(l - 1))
        })
        .collect()
}

/// Newton's inequality `σ_{j-1} σ_{j+1} <= σ_j²`, which holds for every real vector.
pub fn newton_check<T: Scalar>(j: usize, lam: &SymVec<T>) -> bool {
    let j = j as isize;
    let table = SymmetricTable::new(lam);
    let abs_table = SymmetricTable::new(&lam.abs());
    let lhs = table.sigma(j - 1) * table.sigma(j + 1);
    let rhs = table.sigma(j) * table.sigma(j);
    let scale = abs_table.sigma(j - 1) * abs_table.sigma(j + 1) + abs_table.sigma(j) * abs_table.sigma(j);
    (rhs - lhs).is_nonnegative_rel(&scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    fn v(values: &[f64]) -> SymVec<f64> {
        SymVec::from_slice(values).unwrap()
    }

    fn q(values: &[i64]) -> SymVec<BigRational> {
        SymVec::new(values.iter().map(|&x| ratio(x, 1)).collect()).unwrap()
    }

    #[test]
    fn sigma_conventions() {
        assert_eq!(sigma(2, &v(&[1.0, 2.0, 3.0])), 11.0);
        assert_eq!(sigma(0, &v(&[5.0, 7.0])), 1.0);
        assert_eq!(sigma(3, &v(&[1.0, 2.0])), 0.0);
        assert_eq!(sigma(-1, &v(&[1.0, 2.0])), 0.0);
        assert_eq!(sigma(3, &q(&[1, 2, 3])), ratio(6, 1));
    }

    #[test]
    fn sigma_omit_examples() {
        let p = v(&[1.0, 2.0, 3.0]);
        assert_eq!(sigma_omit(1, 0, &p).unwrap(), 5.0);
        assert_eq!(sigma_omit(2, 2, &p).unwrap(), 2.0);
        assert_eq!(sigma_omit(2, 0, &p).unwrap(), 6.0);
        assert_eq!(sigma_omit(3, 0, &p).unwrap(), 0.0);
        assert_eq!(sigma_omit2(1, 0, 2, &p).unwrap(), 2.0);
        assert!(matches!(
            sigma_omit(1, 3, &p),
            Err(SymFuncError::IndexOutOfRange { index: 3, len: 3 })
        ));
        assert!(matches!(sigma_omit2(1, 1, 1, &p), Err(SymFuncError::RepeatedIndex(1))));
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let p = q(&[3, -1, 4, 1, -5, 9]);
        let table = SymmetricTable::new(&p);
        for i in 0..p.len() {
            for k in -1..=6 {
                assert_eq!(table.sigma_omit(k, i).unwrap(), sigma_omit(k, i, &p).unwrap());
            }
        }
        let pf = v(&[3.0, -1.0, 4.0, 1.0, -5.0, 9.0]);
        let tf = SymmetricTable::new(&pf);
        for i in 0..pf.len() {
            for k in -1..=6 {
                assert_eq!(tf.sigma_omit(k, i).unwrap(), sigma_omit(k, i, &pf).unwrap());
            }
        }
    }

    #[test]
    fn rank_one_examples() {
        let p = v(&[1.0, 1.0, 1.0]);
        let qv = v(&[1.0, 0.0, 0.0]);
        assert_eq!(sigma_rank_one(2, &p, &qv, &2.0).unwrap(), 7.0);
        let p = v(&[0.3, -2.0, 5.0, 1.5]);
        let qv = v(&[1.0, 2.0, -1.0, 0.5]);
        for k in 1..=4 {
            assert_eq!(sigma_rank_one(k, &p, &qv, &0.0).unwrap(), sigma(k, &p));
        }
        assert!(sigma_rank_one(0, &p, &qv, &1.0).is_err());
        assert!(sigma_rank_one(1, &p, &v(&[1.0]), &1.0).is_err());
    }

    #[test]
    fn cone_examples() {
        // (-1, 2, 2) sits on the boundary of Γ_2: σ_2 = 0.
        assert!(!in_gamma_k(2, &v(&[-1.0, 2.0, 2.0])));
        assert!(!in_gamma_k(2, &q(&[-1, 2, 2])));
        assert!(in_gamma_k(2, &v(&[-0.5, 2.0, 2.0])));
        assert!(in_gamma_k(3, &v(&[1.0, 1.0, 1.0])));
        assert!(in_gamma_plus(&v(&[1.0, 1.0, 1.0])));
        assert!(!in_gamma_k(1, &v(&[-5.0, 1.0, 1.0])));
    }

    #[test]
    fn ellipticity_gap_examples() {
        assert_eq!(quotient_ellipticity_gap(2, 0, 0, &v(&[1.0, 2.0, 3.0])).unwrap(), 5.0);
        for i in 0..3 {
            assert_eq!(
                quotient_ellipticity_gap(3, 1, i, &q(&[1, 1, 1])).unwrap(),
                ratio(2, 1)
            );
        }
        assert!(matches!(
            quotient_ellipticity_gap(2, 0, 0, &v(&[-1.0, 2.0, 2.0])),
            Err(SymFuncError::NotInCone { k: 2 })
        ));
        assert!(quotient_ellipticity_gap(2, 2, 0, &v(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn newton_examples() {
        assert!(newton_check(1, &v(&[1.0, 2.0, 3.0])));
        assert!(newton_check(2, &v(&[1.0, 1.0, 1.0])));
        assert!(newton_check(1, &q(&[-3, 1, 1, 7])));
    }

    #[test]
    fn symvec_validation() {
        assert_eq!(SymVec::<f64>::new(vec![]), Err(SymFuncError::Empty));
        assert_eq!(SymVec::new(vec![1.0, f64::NAN]), Err(SymFuncError::NonFinite(1)));
        let s = v(&[3.0, 1.0, 2.0]).sorted();
        assert_eq!(s.entries(), &[1.0, 2.0, 3.0]);
        assert!(s.is_sorted());
    }
}
