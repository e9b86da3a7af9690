//! Numerical integration of the averages behind the closed forms.
//!
//! Exponentially distributed SNRs are mapped to the unit interval with
//! `γ = φ − γ̄·ln u`, so every average becomes a bounded integral on
//! `[0, 1]`, evaluated with adaptive 7/15-point Gauss–Kronrod.

use tbs_noma_core::analytic::ModeCoefficients;
use tbs_noma_core::special::q_func;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and its difference from the embedded Gauss rule.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to roughly `tol` absolute.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adapt(f, a, b, tol, 40)
}

const TOL: f64 = 1e-11;

/// `E[g(γ) | γ ≥ φ]` for `γ` exponential with mean `mean`.
pub fn exp_average(g: &dyn Fn(f64) -> f64, phi: f64, mean: f64, tol: f64) -> f64 {
    integrate(&|u: f64| if u <= 0.0 { 0.0 } else { g(phi - mean * u.ln()) }, 0.0, 1.0, tol)
}

fn weighted(coeffs: &ModeCoefficients, term: impl Fn(f64) -> f64) -> f64 {
    coeffs.alpha.iter().zip(&coeffs.beta).map(|(a, &b)| a * term(b)).sum()
}

/// Direct-link ABEP: `Σ α_i E[Q(√(β_i γ_s2))]`.
pub fn direct(coeffs: &ModeCoefficients, gamma_s2: f64) -> f64 {
    weighted(coeffs, |b| exp_average(&|g| q_func((b * g).sqrt()), 0.0, gamma_s2, TOL))
}

/// Near-user far-symbol ABEP given `γ_s1 ≥ φ`.
pub fn sic_conditional(coeffs: &ModeCoefficients, phi: f64, gamma_s1: f64) -> f64 {
    weighted(coeffs, |b| exp_average(&|g| q_func((b * g).sqrt()), phi, gamma_s1, TOL))
}

/// Two-branch ABEP: `Σ α_i E[Q(√(β_i γ_s2 + relay_beta·γ_r))]` as a
/// nested average over both exponentials.
pub fn diversity(coeffs: &ModeCoefficients, gamma_s2: f64, gamma_r: f64) -> f64 {
    let rb = coeffs.relay_beta;
    weighted(coeffs, |b| {
        let inner = |gd: f64| exp_average(&|gr| q_func((b * gd + rb * gr).sqrt()), 0.0, gamma_r, 0.1 * TOL);
        exp_average(&inner, 0.0, gamma_s2, TOL)
    })
}
