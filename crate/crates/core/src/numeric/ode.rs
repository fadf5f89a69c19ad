//! Dormand–Prince 5(4) integrator for scalar initial value problems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("non-finite derivative at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            initial_step: None,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSolution {
    pub y: f64,
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `(t0, y0)` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, y0: f64, t1: f64, opts: &OdeOptions) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, f64) -> f64,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(OdeSolution { y: y0, accepted: 0, rejected: 0 });
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, y);
    if !k1.is_finite() {
        return Err(OdeError::NonFinite(t));
    }
    let mut h = match opts.initial_step {
        Some(h) => h.abs().min(span.abs()),
        None => {
            let scale = opts.atol + opts.rtol * y.abs();
            let d0 = y.abs() / scale;
            let d1 = k1.abs() / scale;
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h0.min(span.abs())
        }
    };
    let mut accepted = 0;
    let mut rejected = 0;
    let h_min = 1e-14 * t0.abs().max(t1.abs()).max(1.0);

    while (t1 - t) * dir > 0.0 {
        if accepted + rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        if h < h_min {
            return Err(OdeError::StepFailure { t, h });
        }
        let last = (t + dir * h - t1) * dir >= 0.0;
        let step = if last { t1 - t } else { dir * h };

        let k2 = f(t + C2 * step, y + step * A21 * k1);
        let k3 = f(t + C3 * step, y + step * (A31 * k1 + A32 * k2));
        let k4 = f(t + C4 * step, y + step * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(t + C5 * step, y + step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(t + step, y + step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(t + step, y_new);
        if !(k2.is_finite() && k3.is_finite() && k4.is_finite() && k5.is_finite() && k6.is_finite() && k7.is_finite())
        {
            // treat like a rejected step
            rejected += 1;
            h *= 0.25;
            continue;
        }
        let err_est = step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = opts.atol + opts.rtol * y.abs().max(y_new.abs());
        let err = (err_est / scale).abs();

        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y_new;
            k1 = k7;
            accepted += 1;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step.abs() * factor;
        } else {
            rejected += 1;
            h = step.abs() * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok(OdeSolution { y, accepted, rejected })
}
