//! Gaussian tail function and its inverse.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::Error;

/// Gaussian tail probability `Q(x) = P(N(0,1) > x) = erfc(x/√2)/2`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `erfcx(x) = exp(x²)·erfc(x)` for `x ≥ 0`.
///
/// Stays finite where `erfc` underflows, which is what keeps the truncated
/// exponential averages usable for large thresholds.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0 || x.is_nan());
    if x < 26.0 {
        libm::erfc(x) * libm::exp(x * x)
    } else {
        // Asymptotic series; the ninth term is below 1e-13 relative at x = 26.
        let inv = 1.0 / (2.0 * x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 1..9 {
            term *= -((2 * n - 1) as f64) * inv;
            sum += term;
        }
        sum / (x * libm::sqrt(PI))
    }
}

/// `ln Q(x)` without underflow for large positive `x`.
pub fn ln_q(x: f64) -> f64 {
    if x <= 0.0 {
        libm::log(q_func(x))
    } else {
        let t = x * FRAC_1_SQRT_2;
        libm::log(0.5 * erfcx(t)) - t * t
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

const Q_INV_TOL: f64 = 1e-15;
/// Residual tolerance on `ln Q`, i.e. relative tolerance on `Q`.
const Q_INV_LOG_TOL: f64 = 2e-13;

/// Inverse of [`q_func`] on `(0, 1)`.
///
/// Newton iteration on `ln Q(x) − ln p` (well scaled deep in the tail),
/// safeguarded by a shrinking bracket; any step that leaves the bracket is
/// replaced by bisection.
pub fn q_inv(p: f64) -> Result<f64, Error> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain { what: "q_inv argument", value: p });
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return q_inv(1.0 - p).map(|x| -x);
    }

    // Abramowitz & Stegun 26.2.23 starting point, |error| < 4.5e-4.
    let t = libm::sqrt(-2.0 * libm::log(p));
    let mut x = t
        - (2.515517 + 0.802853 * t + 0.010328 * t * t)
            / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);

    let target = libm::log(p);
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    for _ in 0..200 {
        let f = ln_q(x) - target;
        if f.abs() <= Q_INV_LOG_TOL {
            break;
        }
        if f > 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        // d/dx ln Q(x) = −φ(x)/Q(x); evaluate the ratio in log space.
        let slope = -libm::exp(libm::log(std_normal_pdf(x)) - ln_q(x));
        let mut next = x - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= Q_INV_TOL * x.abs().max(1.0) || hi - lo <= Q_INV_TOL {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_at_zero_is_half() {
        assert_eq!(q_func(0.0), 0.5);
    }

    #[test]
    fn q_complement_identity() {
        let x = 1.7;
        assert!((q_func(-x) - (1.0 - q_func(x))).abs() < 1e-15);
    }

    #[test]
    fn q_at_three() {
        // 0.5·erfc(3/√2) to 16 digits.
        assert!((q_func(3.0) - 1.349_898_031_630_094_5e-3).abs() < 1e-9);
    }

    #[test]
    fn q_inv_at_half_is_zero() {
        assert_eq!(q_inv(0.5).unwrap(), 0.0);
    }

    #[test]
    fn q_inv_round_trip() {
        assert!((q_inv(q_func(2.34)).unwrap() - 2.34).abs() < 1e-9);
    }

    /// Plain bisection on `q_func`, independent of the Newton path.
    fn bisect_q(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q_func(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn q_inv_quartile_matches_bisection() {
        let oracle = bisect_q(0.25);
        assert!((oracle - 0.674_489_750_196_081_7).abs() < 1e-9);
        assert!((q_inv(0.25).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn q_inv_rejects_out_of_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(q_inv(p), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn q_inv_relative_accuracy_over_decades() {
        for k in 1..=300 {
            let p = libm::pow(10.0, -(k as f64));
            let x = q_inv(p).unwrap();
            let back = q_func(x);
            assert!(((back - p) / p).abs() < 1e-12, "p=1e-{k}: Q(q_inv(p))={back}");
        }
        for p in [0.3, 0.49, 0.51, 0.75, 0.9, 0.999] {
            let back = q_func(q_inv(p).unwrap());
            assert!(((back - p) / p).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn erfcx_branches_agree_at_switch() {
        let direct = libm::erfc(25.999) * libm::exp(25.999 * 25.999);
        let series = erfcx(26.0);
        assert!(((direct - series) / series).abs() < 1e-4);
        // Asymptotic value near the switch: 1/(x√π)·(1 − 1/(2x²) + 3/(4x⁴)).
        let u = 1.0 / (26.0 * 26.0);
        let approx = (1.0 - 0.5 * u + 0.75 * u * u) / (26.0 * libm::sqrt(PI));
        assert!(((series - approx) / series).abs() < 1e-6);
    }

    #[test]
    fn ln_q_tail_is_finite() {
        let v = ln_q(60.0);
        assert!(v.is_finite() && v < -1700.0);
        assert!((ln_q(2.0) - libm::log(q_func(2.0))).abs() < 1e-13);
    }
}
