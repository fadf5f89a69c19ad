use hqe_core::scalar::{ratio, BigRational};
use hqe_core::spectra::{eigh, SymMatrix};
use hqe_core::symfunc::{
    in_gamma_k, quotient_ellipticity_gap, quotient_ellipticity_gaps, sigma, sigma_omit, sigma_rank_one, SymVec,
    SymmetricTable,
};
use num_traits::{One, Zero};
use proptest::prelude::*;

/// `σ_k` as a sum over all `k`-subsets.
fn subset_sum(k: usize, p: &[BigRational]) -> BigRational {
    let n = p.len();
    let mut total = BigRational::zero();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let mut prod = BigRational::one();
            for (i, x) in p.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    prod = prod * x;
                }
            }
            total = total + prod;
        }
    }
    total
}

fn rationals(max_len: usize) -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec((-12i64..=12, 1i64..=6).prop_map(|(p, q)| ratio(p, q)), 1..=max_len)
}

fn reals(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

proptest! {
    #[test]
    fn sigma_matches_subset_enumeration(p in rationals(8)) {
        let v = SymVec::new(p.clone()).unwrap();
        let table = SymmetricTable::new(&v);
        for k in 0..=p.len() {
            let expected = subset_sum(k, &p);
            prop_assert_eq!(&sigma(k as isize, &v), &expected);
            prop_assert_eq!(&table.sigma(k as isize), &expected);
        }
        prop_assert!(sigma(-1, &v).is_zero());
        prop_assert!(sigma(p.len() as isize + 1, &v).is_zero());
    }

    #[test]
    fn deletion_identities_hold_exactly(p in rationals(8)) {
        let v = SymVec::new(p.clone()).unwrap();
        let n = p.len();
        let table = SymmetricTable::new(&v);
        for k in 0..=n as isize {
            let mut weighted = BigRational::zero();
            for i in 0..n {
                let mut rest = p.clone();
                rest.remove(i);
                let omit = subset_sum(k.max(0) as usize, &rest);
                let omit = if k < 0 || k as usize > rest.len() { BigRational::zero() } else { omit };
                prop_assert_eq!(&sigma_omit(k, i, &v).unwrap(), &omit);
                prop_assert_eq!(&table.sigma_omit(k, i).unwrap(), &omit);
                let lower = sigma_omit(k - 1, i, &v).unwrap();
                prop_assert_eq!(sigma(k, &v), omit + &p[i] * &lower);
                weighted = weighted + &p[i] * lower;
            }
            if k >= 1 {
                prop_assert_eq!(weighted, ratio(k as i64, 1) * sigma(k, &v));
            }
        }
    }

    #[test]
    fn newton_inequality_holds(p in rationals(8)) {
        let v = SymVec::new(p.clone()).unwrap();
        for j in 1..p.len() as isize {
            let s = sigma(j, &v);
            prop_assert!(s.clone() * s >= sigma(j - 1, &v) * sigma(j + 1, &v));
        }
    }

    #[test]
    fn cones_are_nested(p in rationals(7), shift in 0i64..=8) {
        let v = SymVec::new(p.iter().map(|x| x + ratio(shift, 1)).collect()).unwrap();
        let n = v.len();
        for k in 2..=n {
            if in_gamma_k(k, &v) {
                prop_assert!(in_gamma_k(k - 1, &v));
            }
        }
    }

    #[test]
    fn ellipticity_gap_is_positive_in_the_cone(p in rationals(6), shift in 0i64..=8, k_seed in 0usize..100) {
        let v = SymVec::new(p.iter().map(|x| x + ratio(shift, 1)).collect()).unwrap();
        let n = v.len();
        let k = 1 + k_seed % n;
        prop_assume!(in_gamma_k(k, &v));
        for l in 0..k {
            let all = quotient_ellipticity_gaps(k, l, &v).unwrap();
            for (i, gap) in all.iter().enumerate() {
                let mut rest = v.entries().to_vec();
                rest.remove(i);
                let omit = |d: isize| if d < 0 { BigRational::zero() } else { subset_sum(d as usize, &rest) };
                let expected = omit(k as isize - 1) * sigma(l as isize, &v) - sigma(k as isize, &v) * omit(l as isize - 1);
                prop_assert_eq!(gap, &expected);
                prop_assert_eq!(&quotient_ellipticity_gap(k, l, i, &v).unwrap(), gap);
                prop_assert!(*gap > BigRational::zero());
            }
        }
    }

    #[test]
    fn rank_one_formula_matches_eigenvalues(
        (p, q) in (2usize..=6).prop_flat_map(|n| (reals(n..=n), reals(n..=n))),
        s in -2.0f64..2.0,
    ) {
        let n = p.len();
        let mut m = SymMatrix::diagonal(&p);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, m.get(i, j) + s * q[i] * q[j]);
            }
        }
        let eig = eigh(&m).unwrap();
        let pv = SymVec::from_slice(&p).unwrap();
        let qv = SymVec::from_slice(&q).unwrap();
        for k in 1..=n as isize {
            let formula = sigma_rank_one(k, &pv, &qv, &s).unwrap();
            let oracle = sigma(k, &eig.values);
            let scale = sigma(k, &eig.values.abs()).max(1.0);
            prop_assert!((formula - oracle).abs() <= 1e-10 * scale, "k = {}: {} vs {}", k, formula, oracle);
        }
    }
}

#[test]
fn out_of_cone_gap_is_an_error() {
    let v = SymVec::new(vec![ratio(-1, 1), ratio(-2, 1), ratio(1, 1)]).unwrap();
    assert!(quotient_ellipticity_gaps(2, 1, &v).is_err());
    assert!(quotient_ellipticity_gaps(1, 1, &v).is_err());
}
