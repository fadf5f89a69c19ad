//! Direction sets on the unit sphere and sample clouds on ellipsoidal shells.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

/// Radical inverse of `index` in `base` (one Halton coordinate).
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// `count` deterministic, well-spread unit vectors in `ℝⁿ`.
///
/// Halton points mapped through Box–Muller pairs to Gaussian vectors, then
/// normalized. The first `2n` directions are the signed coordinate axes.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(n >= 1 && 2 * n.div_ceil(2) <= PRIMES.len(), "dimension out of range");
    let mut out = Vec::with_capacity(count);
    for axis in 0..n {
        for sign in [1.0, -1.0] {
            if out.len() == count {
                return out;
            }
            let mut e = vec![0.0; n];
            e[axis] = sign;
            out.push(e);
        }
    }
    let pairs = n.div_ceil(2);
    let mut index = 1u64;
    while out.len() < count {
        let mut g = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let u1 = radical_inverse(index, PRIMES[2 * p]).max(1e-300);
            let u2 = radical_inverse(index, PRIMES[2 * p + 1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            g.push(rad * (2.0 * PI * u2).cos());
            g.push(rad * (2.0 * PI * u2).sin());
        }
        g.truncate(n);
        index += 1;
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(g.into_iter().map(|v| v / norm).collect());
        }
    }
    out
}

/// Uniform random unit vector.
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Scales a direction `u` (in the frame where `A = diag(a)`) onto the shell `r_A = r`.
pub fn onto_shell(a: &[f64], u: &[f64], r: f64) -> Vec<f64> {
    let q: f64 = a.iter().zip(u).map(|(ai, ui)| ai * ui * ui).sum();
    let s = r / q.sqrt();
    u.iter().map(|v| v * s).collect()
}

/// Random points with `r_A` log-uniform in `(r_min, r_max]` and uniform direction,
/// in the frame where `A = diag(a)`. The signed coordinate axes are included
/// at geometrically spaced radii, since the extremes of `Ξ_j` sit there.
pub fn shell_samples<R: Rng + ?Sized>(
    a: &[f64],
    r_min: f64,
    r_max: f64,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let n = a.len();
    let (lo, hi) = (r_min.ln(), r_max.ln());
    let mut out = Vec::with_capacity(count);
    let axes = (2 * n).min(count);
    for i in 0..axes {
        let mut e = vec![0.0; n];
        e[i / 2] = if i % 2 == 0 { 1.0 } else { -1.0 };
        let t = (i as f64 + 1.0) / (axes as f64 + 1.0);
        out.push(onto_shell(a, &e, (lo + t * (hi - lo)).exp()));
    }
    while out.len() < count {
        let u = random_direction(n, rng);
        let t: f64 = rng.gen_range(0.0..1.0);
        // (r_min, r_max]
        let r = (hi - t * (hi - lo)).exp();
        out.push(onto_shell(a, &u, r));
    }
    out
}
