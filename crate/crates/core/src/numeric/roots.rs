//! Bracketed root finding: bisection until the bracket is narrow, then
//! safeguarded secant steps.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("f({lo}) = {f_lo} and f({hi}) = {f_hi} do not bracket a root")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("non-finite function value at {0}")]
    NonFinite(f64),
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct BracketOptions {
    /// Bracket width, relative to `max(|lo|, |hi|)`, below which secant steps take over.
    pub secant_switch: f64,
    /// Stop once the bracket is narrower than `xtol_rel * |x| + xtol_abs`.
    pub xtol_rel: f64,
    pub xtol_abs: f64,
    /// Stop once `|f(x)| <= ftol`.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self {
            secant_switch: 1e-3,
            xtol_rel: 4.0 * f64::EPSILON,
            xtol_abs: 0.0,
            ftol: 0.0,
            max_iter: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Finds a zero of `f` in `[lo, hi]`, which must bracket a sign change.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, opts: &BracketOptions) -> Result<Root, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite(a));
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite(b));
    }
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }

    for iter in 1..=opts.max_iter {
        let width = b - a;
        let scale = a.abs().max(b.abs());
        let narrow = width <= opts.secant_switch * scale.max(f64::MIN_POSITIVE);
        let mid = 0.5 * (a + b);
        let mut x = mid;
        if narrow {
            let secant = b - fb * (b - a) / (fb - fa);
            // keep the secant point well inside the bracket
            let guard = 0.01 * width;
            if secant.is_finite() && secant > a + guard && secant < b - guard {
                x = secant;
            } else if secant.is_finite() && secant > a && secant < b {
                x = secant.clamp(a + guard, b - guard);
            }
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(RootError::NonFinite(x));
        }
        if fx == 0.0 || fx.abs() <= opts.ftol {
            return Ok(Root { x, fx, iterations: iter });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        let tol = opts.xtol_rel * a.abs().max(b.abs()) + opts.xtol_abs;
        if b - a <= tol || b <= a || (a < x && x < b && (b - a) <= f64::EPSILON * scale) {
            let (x, fx) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
            return Ok(Root { x, fx, iterations: iter });
        }
        // bisection fallback when the secant only nibbles at one end
        if narrow && x != mid && (b - a) > 0.5 * width {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if !fm.is_finite() {
                return Err(RootError::NonFinite(m));
            }
            if fm == 0.0 {
                return Ok(Root { x: m, fx: fm, iterations: iter });
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
    }
    Err(RootError::MaxIterations(opts.max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_of_two() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, &BracketOptions::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-15);
        assert!(r.iterations < 80);
    }

    #[test]
    fn reversed_bracket_and_exact_endpoint() {
        let r = find_root(|x| x - 1.0, 3.0, 0.0, &BracketOptions::default()).unwrap();
        assert!((r.x - 1.0).abs() < 1e-15);
        let r = find_root(|x| x, 0.0, 1.0, &BracketOptions::default()).unwrap();
        assert_eq!(r.x, 0.0);
    }

    #[test]
    fn rejects_unbracketed() {
        let err = find_root(|x| x * x + 1.0, -1.0, 1.0, &BracketOptions::default()).unwrap_err();
        assert!(matches!(err, RootError::NotBracketed { .. }));
    }

    #[test]
    fn tiny_roots_to_relative_precision() {
        let target: f64 = 3.7e-14;
        let r = find_root(|x: f64| x.ln_1p() - target.ln_1p(), 0.0, 1.0, &BracketOptions::default())
            .unwrap();
        assert!(((r.x - target) / target).abs() < 1e-12);
    }

    #[test]
    fn steep_function() {
        let r = find_root(|x| (x - 0.3).powi(3) * 1e6, 0.0, 1.0, &BracketOptions::default()).unwrap();
        assert!((r.x - 0.3).abs() < 1e-5);
    }
}
