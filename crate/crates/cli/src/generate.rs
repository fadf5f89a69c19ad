//! Random instances for the verification batteries and the acceptance suite.

use hqe_core::admissibility::{m_exponent, normalizing_factor};
use hqe_core::scalar::{ratio, BigRational};
use hqe_core::spectra::{conjugate_by, eigh, Matrix, SymMatrix};
use hqe_core::symfunc::{in_gamma_k, SymVec};
use rand::Rng;
use rand_distr::StandardNormal;

/// Entries `p/q` with `p ∈ [−12, 12]`, `q ∈ [1, 6]`.
pub fn rational_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymVec<BigRational> {
    let v = (0..n).map(|_| ratio(rng.gen_range(-12..=12), rng.gen_range(1..=6))).collect();
    SymVec::new(v).expect("nonempty")
}

/// As [`rational_vector`] with every entry positive.
pub fn positive_rational_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymVec<BigRational> {
    let v = (0..n).map(|_| ratio(rng.gen_range(1..=12), rng.gen_range(1..=6))).collect();
    SymVec::new(v).expect("nonempty")
}

/// A rational vector in `Γ_k`, by rejection from shifted random vectors.
pub fn rational_in_cone<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> SymVec<BigRational> {
    loop {
        let shift = ratio(rng.gen_range(0..=8), 1);
        let v = rational_vector(n, rng);
        let v = SymVec::new(v.entries().iter().map(|x| x + &shift).collect()).expect("nonempty");
        if in_gamma_k(k, &v) {
            return v;
        }
    }
}

pub fn normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// A uniformly random rotation (rows orthonormal), from the eigenvectors of a
/// random symmetric matrix.
pub fn rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set(i, j, rng.sample(StandardNormal));
        }
    }
    eigh(&m).expect("symmetric").vectors
}

/// A sorted spectrum with `σ_k = σ_l` and `m_{k,l} > 2`.
///
/// Log-normal perturbations of the identity, rescaled; the spread shrinks on
/// rejection so that the search always ends (the identity has `m = n`).
pub fn admissible_spectrum<R: Rng + ?Sized>(n: usize, k: usize, l: usize, rng: &mut R) -> Vec<f64> {
    let mut spread = 0.6;
    loop {
        for _ in 0..20 {
            let raw: Vec<f64> = (0..n).map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).exp()).collect();
            let v = SymVec::from_slice(&raw).expect("nonempty");
            let s = normalizing_factor(k, l, &v).expect("positive");
            let mut a: Vec<f64> = raw.iter().map(|x| x * s).collect();
            a.sort_by(f64::total_cmp);
            let m = m_exponent(k, l, &SymVec::from_slice(&a).expect("nonempty")).expect("valid pair");
            if m > 2.0 {
                return a;
            }
        }
        spread *= 0.5;
    }
}

/// `Qᵀ diag(a) Q` for a random rotation `Q`.
pub fn rotated_matrix<R: Rng + ?Sized>(a: &[f64], rng: &mut R) -> SymMatrix {
    let q = rotation(a.len(), rng);
    conjugate_by(&q, &SymMatrix::diagonal(a)).expect("square")
}

/// All `(k, l)` with `0 <= l < k <= n` for which `Ã_{k,l}` is nonempty in
/// dimension `n` (`c_* I` has `m = n`, so every pair once `n >= 3`).
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    if n < 3 {
        return Vec::new();
    }
    (1..=n).flat_map(|k| (0..k).map(move |l| (k, l))).collect()
}
