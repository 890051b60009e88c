//! Analytic reference solutions shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Dimensionless temperature `(T - T_wall) / (T_0 - T_wall)` in a slab of
/// length `l` with the wall at `x = 0` stepped at `t = 0` and `x = l`
/// insulated.
pub fn slab_step_response(x: f64, t: f64, l: f64, alpha: f64) -> f64 {
    let mut sum = 0.0;
    for m in 0..2000 {
        let k = (2 * m + 1) as f64 * PI / (2.0 * l);
        let term = 4.0 / ((2 * m + 1) as f64 * PI) * (k * x).sin() * (-k * k * alpha * t).exp();
        sum += term;
        if term.abs() < 1e-16 && m > 10 {
            break;
        }
    }
    sum
}

/// Root of `f` in `[lo, hi]` by bisection; `f(lo)` and `f(hi)` must differ
/// in sign.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "root not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Similarity constant of the one-phase Stefan problem with Stefan number
/// `st`: `zeta exp(zeta^2) erf(zeta) = st / sqrt(pi)`.
pub fn stefan_zeta(st: f64) -> f64 {
    bisect(|z| z * (z * z).exp() * statrs::function::erf::erf(z) - st / PI.sqrt(), 1e-9, 5.0)
}
