//! Double-exponential quadrature on `(0, ∞)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub est_err: f64,
    pub evals: usize,
    pub levels: usize,
}

/// `∫₀^∞ f(x) dx` by the exp-sinh rule `x = s·exp(π/2·sinh t)`.
///
/// The step is halved (reusing earlier nodes) until two successive levels
/// agree to `rel_tol`. `scale` should sit near the bulk of the integrand.
pub fn exp_sinh<F: FnMut(f64) -> f64>(mut f: F, scale: f64, rel_tol: f64, max_level: usize) -> Result<QuadResult> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain("quadrature scale", scale));
    }
    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
    let mut node = |t: f64| -> f64 {
        let e = HALF_PI * t.sinh();
        if e.abs() > 700.0 {
            return 0.0;
        }
        let x = scale * e.exp();
        let w = scale * HALF_PI * t.cosh() * e.exp();
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // One-sided sweep from t0 in steps of `step` until terms vanish.
    let mut sweep = |t0: f64, step: f64, evals: &mut usize| -> f64 {
        let mut sum = 0.0;
        let mut small = 0;
        let mut t = t0;
        while t.abs() < 7.0 {
            let v = node(t);
            *evals += 1;
            sum += v;
            if v.abs() <= 1e-18 * sum.abs().max(f64::MIN_POSITIVE) {
                small += 1;
                if small >= 4 {
                    break;
                }
            } else {
                small = 0;
            }
            t += step;
        }
        sum
    };

    let mut evals = 0;
    let mut h = 0.5;
    let mut total = sweep(0.0, h, &mut evals) + sweep(-h, -h, &mut evals);
    let mut estimate = h * total;
    for level in 1..=max_level {
        // New nodes are the odd multiples of the halved step.
        let h_new = h / 2.0;
        let added = sweep(h_new, h, &mut evals) + sweep(-h_new, -h, &mut evals);
        total += added;
        h = h_new;
        let next = h * total;
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= 3 && diff <= rel_tol * next.abs() {
            return Ok(QuadResult {
                value: next,
                est_err: diff,
                evals,
                levels: level,
            });
        }
        if level == max_level {
            return Err(Error::NonConvergence {
                what: "exp-sinh quadrature",
                terms: evals,
                est_err: diff,
            });
        }
    }
    unreachable!("loop returns at max_level")
}
