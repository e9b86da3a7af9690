//! Closed-form average bit error probabilities of the far user.
//!
//! Every constituent is a sum over the interference patterns `i = 1..N` of
//! the mode. The `*_terms` functions return the individual summands (each
//! carrying its `α_i` weight); the scalar functions return their sum.
//!
//! Conventions:
//! * `γ̄_s1 = σ²_s1·ρ`, `γ̄_s2 = σ²_s2·ρ`, `γ̄_r = σ²_r·ρ·(Pr/Ps)`, noise power 1.
//! * The relay branch enters through `relay_beta·γ_r`, the per-bit SNR
//!   scaling of the far constellation on its own (2 for BPSK, 1 for Gray QPSK).

use alloc::vec::Vec;

use crate::constellation::{Mode, PowerAllocation, Scheme};
use crate::error::Error;
use crate::special::erfcx;
use crate::units::db_to_linear;

/// Table of `(N, α_i, β_i)` for one mode at a given power split.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    pub mode: Mode,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Order `M` of the far-user constellation.
    pub far_order: usize,
    /// Per-bit SNR scaling of the relayed far symbol.
    pub relay_beta: f64,
}

impl ModeCoefficients {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn for_allocation(mode: Mode, pa: &PowerAllocation) -> Result<Self, Error> {
        table1_coeffs(mode, pa.a1(), pa.a2())
    }
}

/// One Table row entry: `β = scale·(√(a2·far_share) ± k·√(a1·near_share))²`.
struct TermShape {
    alpha: f64,
    scale: f64,
    far_share: f64,
    k: f64,
    near_share: f64,
    minus: bool,
    condition: &'static str,
}

const fn term(
    alpha: f64,
    scale: f64,
    far_share: f64,
    k: f64,
    near_share: f64,
    minus: bool,
    condition: &'static str,
) -> TermShape {
    TermShape { alpha, scale, far_share, k, near_share, minus, condition }
}

fn shapes(mode: Mode) -> &'static [TermShape] {
    const M1: [TermShape; 2] = [
        term(0.5, 2.0, 1.0, 1.0, 1.0, true, "sqrt(a1) < sqrt(a2)"),
        term(0.5, 2.0, 1.0, 1.0, 1.0, false, ""),
    ];
    const M2: [TermShape; 3] = [
        term(0.25, 2.0, 0.5, 1.0, 1.0, true, "sqrt(a1) < sqrt(a2/2)"),
        term(0.25, 2.0, 0.5, 1.0, 1.0, false, ""),
        term(0.5, 1.0, 1.0, 0.0, 0.0, false, ""),
    ];
    const M3: [TermShape; 2] = [
        term(0.5, 2.0, 1.0, 1.0, 0.5, true, "sqrt(a1/2) < sqrt(a2)"),
        term(0.5, 2.0, 1.0, 1.0, 0.5, false, ""),
    ];
    const M4: [TermShape; 2] = [
        term(0.5, 1.0, 1.0, 1.0, 1.0, true, "sqrt(a1) < sqrt(a2)"),
        term(0.5, 1.0, 1.0, 1.0, 1.0, false, ""),
    ];
    const M5: [TermShape; 4] = [
        term(0.25, 2.0, 1.0, 1.0, 0.1, true, "sqrt(a1/10) < sqrt(a2)"),
        term(0.25, 2.0, 1.0, 1.0, 0.1, false, ""),
        term(0.25, 2.0, 1.0, 3.0, 0.1, true, "3*sqrt(a1/10) < sqrt(a2)"),
        term(0.25, 2.0, 1.0, 3.0, 0.1, false, ""),
    ];
    const M6: [TermShape; 4] = [
        term(0.25, 1.0, 1.0, 1.0, 0.2, true, "sqrt(a1/5) < sqrt(a2)"),
        term(0.25, 1.0, 1.0, 1.0, 0.2, false, ""),
        term(0.25, 1.0, 1.0, 3.0, 0.2, true, "3*sqrt(a1/5) < sqrt(a2)"),
        term(0.25, 1.0, 1.0, 3.0, 0.2, false, ""),
    ];
    match mode.id() {
        1 => &M1,
        2 => &M2,
        3 => &M3,
        4 => &M4,
        5 => &M5,
        _ => &M6,
    }
}

/// BEP coefficients of the far user's symbols for `mode` at split `(a1, a2)`.
///
/// Fails with [`Error::InvalidPowerAllocation`] when a pattern's distance
/// `√a2' − k√a1'` is not positive, naming the 1-based term.
pub fn table1_coeffs(mode: Mode, a1: f64, a2: f64) -> Result<ModeCoefficients, Error> {
    if !(a1.is_finite() && a2.is_finite()) || a1 < 0.0 || a2 <= 0.0 {
        return Err(Error::Config("power fractions must be finite, a1 >= 0 and a2 > 0"));
    }
    if (a1 + a2 - 1.0).abs() > 1e-12 {
        return Err(Error::Config("power fractions must sum to 1"));
    }
    let mut alpha = Vec::with_capacity(4);
    let mut beta = Vec::with_capacity(4);
    for (i, t) in shapes(mode).iter().enumerate() {
        let far = libm::sqrt(a2 * t.far_share);
        let near = t.k * libm::sqrt(a1 * t.near_share);
        let dist = if t.minus { far - near } else { far + near };
        if dist <= 0.0 {
            return Err(Error::InvalidPowerAllocation {
                mode: mode.id(),
                term: i + 1,
                a1,
                condition: t.condition,
            });
        }
        alpha.push(t.alpha);
        beta.push(t.scale * dist * dist);
    }
    if a1 >= a2 {
        return Err(Error::Config("near-user fraction a1 must be below a2"));
    }
    let far = mode.far();
    Ok(ModeCoefficients {
        mode,
        alpha,
        beta,
        far_order: far.order(),
        relay_beta: 2.0 / far.bits_per_symbol() as f64,
    })
}

/// Power split, channel statistics and transmit SNR of one operating point.
/// All fields are linear; use [`NetworkConfig::from_db`] at the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub pa: PowerAllocation,
    /// `Ps/N0`.
    pub rho: f64,
    pub sigma2_s1: f64,
    pub sigma2_s2: f64,
    pub sigma2_r: f64,
    /// `Pr/Ps`.
    pub relay_power_ratio: f64,
}

impl NetworkConfig {
    pub fn new(
        pa: PowerAllocation,
        rho: f64,
        sigma2_s1: f64,
        sigma2_s2: f64,
        sigma2_r: f64,
        relay_power_ratio: f64,
    ) -> Result<Self, Error> {
        if pa.a1() <= 0.0 {
            return Err(Error::Config("a1 must be positive"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(rho) {
            return Err(Error::Config("transmit SNR must be positive"));
        }
        if !(positive(sigma2_s1) && positive(sigma2_s2) && positive(sigma2_r)) {
            return Err(Error::Config("average channel gains must be positive"));
        }
        if !positive(relay_power_ratio) {
            return Err(Error::Config("relay power ratio must be positive"));
        }
        Ok(NetworkConfig { pa, rho, sigma2_s1, sigma2_s2, sigma2_r, relay_power_ratio })
    }

    /// SNR and channel gains given in dB.
    pub fn from_db(
        a1: f64,
        rho_db: f64,
        sigma2_s1_db: f64,
        sigma2_s2_db: f64,
        sigma2_r_db: f64,
        relay_power_ratio: f64,
    ) -> Result<Self, Error> {
        Self::new(
            PowerAllocation::from_near_share(a1)?,
            db_to_linear(rho_db),
            db_to_linear(sigma2_s1_db),
            db_to_linear(sigma2_s2_db),
            db_to_linear(sigma2_r_db),
            relay_power_ratio,
        )
    }

    pub fn with_rho(self, rho: f64) -> Self {
        NetworkConfig { rho, ..self }
    }

    pub fn gamma_s1(&self) -> f64 {
        self.sigma2_s1 * self.rho
    }

    pub fn gamma_s2(&self) -> f64 {
        self.sigma2_s2 * self.rho
    }

    pub fn gamma_r(&self) -> f64 {
        self.sigma2_r * self.rho * self.relay_power_ratio
    }
}

/// Threshold on `γ_s1 = ρ|h_s1|²` equivalent to an SINR threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiThreshold {
    Finite(f64),
    /// `a2 ≤ a1·SINR_th`: the near user never relays.
    Infeasible,
}

pub fn phi_threshold(sinr_th: f64, pa: &PowerAllocation) -> PhiThreshold {
    let denom = pa.a2() - pa.a1() * sinr_th;
    if denom <= 0.0 {
        PhiThreshold::Infeasible
    } else {
        PhiThreshold::Finite(sinr_th / denom)
    }
}

/// `P(γ_s1 ≥ φ_th) = exp(−φ_th/γ̄_s1)`.
pub fn prob_relay_active(phi: PhiThreshold, gamma_s1: f64) -> f64 {
    match phi {
        PhiThreshold::Finite(p) => libm::exp(-p / gamma_s1),
        PhiThreshold::Infeasible => 0.0,
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// `(1/2)(1 − √(m/(2+m)))`, written without cancellation at large `m`.
fn rayleigh_avg_q(m: f64) -> f64 {
    let g = libm::sqrt(m / (2.0 + m));
    1.0 / ((2.0 + m) * (1.0 + g))
}

/// Per-pattern error probability of the near user's detection of the far
/// symbols, conditioned on the relay being active (truncated exponential
/// `γ_s1 ≥ φ_th`), summands weighted by `α_i`.
///
/// Equal to
/// `α_i[Q(√(β_iφ)) − e^{φ/γ̄}·√(1/(1+2/(β_iγ̄)))·Q(√(2φ(β_i/2 + 1/γ̄)))]`,
/// evaluated through `erfcx` so that large `φ/γ̄` does not overflow.
/// The closed form comes from an inequality chain and is used as the
/// working value; treat it as an upper bound on the conditional ABEP.
pub fn sic_terms(coeffs: &ModeCoefficients, phi: PhiThreshold, gamma_s1: f64) -> Result<Vec<f64>, Error> {
    let phi = match phi {
        PhiThreshold::Finite(p) if p >= 0.0 && p.is_finite() => p,
        PhiThreshold::Finite(p) => return Err(Error::Domain { what: "phi threshold", value: p }),
        PhiThreshold::Infeasible => return Err(Error::UndefinedConditional),
    };
    Ok(coeffs
        .alpha
        .iter()
        .zip(&coeffs.beta)
        .map(|(&a, &b)| {
            if phi == 0.0 {
                return a * rayleigh_avg_q(b * gamma_s1);
            }
            let ratio = libm::sqrt(b * gamma_s1 / (b * gamma_s1 + 2.0));
            let xa = libm::sqrt(0.5 * b * phi);
            let xb = libm::sqrt(phi * (0.5 * b + 1.0 / gamma_s1));
            let v = 0.5 * libm::exp(-0.5 * b * phi) * (erfcx(xa) - ratio * erfcx(xb));
            a * v.max(0.0)
        })
        .collect())
}

pub fn abep_sic_at_ue1(coeffs: &ModeCoefficients, phi: PhiThreshold, gamma_s1: f64) -> Result<f64, Error> {
    Ok(clamp_prob(sic_terms(coeffs, phi, gamma_s1)?.iter().sum()))
}

/// `α_i/2·(1 − √(β_iγ̄/(2+β_iγ̄)))`.
pub fn direct_terms(coeffs: &ModeCoefficients, gamma_s2: f64) -> Vec<f64> {
    coeffs
        .alpha
        .iter()
        .zip(&coeffs.beta)
        .map(|(&a, &b)| a * rayleigh_avg_q(b * gamma_s2))
        .collect()
}

pub fn abep_direct(coeffs: &ModeCoefficients, gamma_s2: f64) -> f64 {
    clamp_prob(direct_terms(coeffs, gamma_s2).iter().sum())
}

const SINGULAR_REL: f64 = 1e-9;
const SINGULAR_NUDGE: f64 = 1e-6;

/// `m·(1 − √(m/(2+m)))`, the building block of the two-branch average.
fn tail_mass(m: f64) -> f64 {
    let g = libm::sqrt(m / (2.0 + m));
    2.0 * m / ((2.0 + m) * (1.0 + g))
}

/// Average of `Q(√(m1·X + m2·Y))` over unit-mean exponentials `X`, `Y`:
/// `(1/2)·[m1(1−g(m1)) − m2(1−g(m2))]/(m1 − m2)`, with `g(m) = √(m/(2+m))`.
fn two_branch_avg_q(m1: f64, m2: f64) -> f64 {
    if m2 <= 0.0 {
        return rayleigh_avg_q(m1);
    }
    let mut m2 = m2;
    if (m1 - m2).abs() < SINGULAR_REL * m1.max(m2) {
        m2 *= 1.0 + SINGULAR_NUDGE;
    }
    0.5 * (tail_mass(m1) - tail_mass(m2)) / (m1 - m2)
}

/// Two-branch diversity summands: average of `α_i·Q(√(β_iγ_s2 + relay_beta·γ_r))`.
pub fn diversity_terms(coeffs: &ModeCoefficients, gamma_s2: f64, gamma_r: f64) -> Vec<f64> {
    let m2 = coeffs.relay_beta * gamma_r;
    coeffs
        .alpha
        .iter()
        .zip(&coeffs.beta)
        .map(|(&a, &b)| a * two_branch_avg_q(b * gamma_s2, m2))
        .collect()
}

pub fn abep_diversity(coeffs: &ModeCoefficients, gamma_s2: f64, gamma_r: f64) -> f64 {
    clamp_prob(diversity_terms(coeffs, gamma_s2, gamma_r).iter().sum())
}

/// Error-offset weights `c_{j,M}` for `j = 1..M−1`.
pub fn c_coefficients(m: usize) -> Vec<f64> {
    use core::f64::consts::PI;
    let mf = m as f64;
    let base = libm::sin(PI / mf);
    (1..m)
        .map(|j| {
            let jf = j as f64;
            if j <= m / 2 {
                libm::sin(PI * (2.0 * jf - 1.0) / mf) / base
            } else {
                -libm::sin(PI * (2.0 * jf + 1.0) / mf) / base
            }
        })
        .collect()
}

/// Error-propagation summands: UE2's error probability when the relay
/// forwarded a wrong symbol, `α_i·c·γ̄_r'/(β_iγ̄_s2/2 + c·γ̄_r')` averaged
/// uniformly over the `M−1` offsets, with `γ̄_r' = (relay_beta/2)·γ̄_r`.
pub fn propagation_terms(coeffs: &ModeCoefficients, gamma_s2: f64, gamma_r: f64) -> Vec<f64> {
    let cs = c_coefficients(coeffs.far_order);
    let gr = 0.5 * coeffs.relay_beta * gamma_r;
    coeffs
        .alpha
        .iter()
        .zip(&coeffs.beta)
        .map(|(&a, &b)| {
            let avg = cs.iter().map(|&c| c * gr / (0.5 * b * gamma_s2 + c * gr)).sum::<f64>()
                / cs.len() as f64;
            a * avg
        })
        .collect()
}

pub fn abep_propagation(coeffs: &ModeCoefficients, gamma_s2: f64, gamma_r: f64) -> f64 {
    clamp_prob(propagation_terms(coeffs, gamma_s2, gamma_r).iter().sum())
}

/// All constituents of the end-to-end ABEP at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct E2eBreakdown {
    pub phi: PhiThreshold,
    pub p_relay_active: f64,
    pub direct: Vec<f64>,
    pub diversity: Vec<f64>,
    pub propagation: Vec<f64>,
    /// Empty when the threshold is infeasible.
    pub sic: Vec<f64>,
}

impl E2eBreakdown {
    pub fn new(coeffs: &ModeCoefficients, config: &NetworkConfig, sinr_th: f64) -> Result<Self, Error> {
        if !(sinr_th >= 0.0) {
            return Err(Error::Domain { what: "SINR threshold", value: sinr_th });
        }
        let phi = phi_threshold(sinr_th, &config.pa);
        let sic = match phi {
            PhiThreshold::Infeasible => Vec::new(),
            finite => sic_terms(coeffs, finite, config.gamma_s1())?,
        };
        Ok(E2eBreakdown {
            phi,
            p_relay_active: prob_relay_active(phi, config.gamma_s1()),
            direct: direct_terms(coeffs, config.gamma_s2()),
            diversity: diversity_terms(coeffs, config.gamma_s2(), config.gamma_r()),
            propagation: propagation_terms(coeffs, config.gamma_s2(), config.gamma_r()),
            sic,
        })
    }

    /// Law of total probability per interference pattern: the relay's
    /// detection error and UE2's propagation error see the same `x1`, so
    /// pattern `i`'s SIC error pairs with pattern `i`'s propagation term.
    pub fn per_term(&self, alpha: &[f64]) -> f64 {
        let pth = self.p_relay_active;
        let direct: f64 = self.direct.iter().sum();
        if self.sic.is_empty() {
            return clamp_prob(direct);
        }
        let coop: f64 = (0..alpha.len())
            .map(|i| {
                let s = self.sic[i] / alpha[i];
                self.diversity[i] * (1.0 - s) + self.sic[i] * self.propagation[i] / alpha[i]
            })
            .sum();
        clamp_prob((1.0 - pth) * direct + pth * coop)
    }

    /// The constituents combined once at the aggregate level,
    /// `(1−P_th)P_dir + P_th[P_div(1−P_s1) + P_s1·P_prop]`.
    pub fn aggregate(&self) -> f64 {
        let pth = self.p_relay_active;
        let direct: f64 = self.direct.iter().sum();
        if self.sic.is_empty() {
            return clamp_prob(direct);
        }
        let sum = |v: &[f64]| clamp_prob(v.iter().sum());
        let (div, prop, s1) = (sum(&self.diversity), sum(&self.propagation), sum(&self.sic));
        clamp_prob((1.0 - pth) * direct + pth * (div * (1.0 - s1) + s1 * prop))
    }
}

/// End-to-end ABEP of the far user under an SINR relaying threshold.
pub fn abep_e2e(coeffs: &ModeCoefficients, config: &NetworkConfig, sinr_th: f64) -> Result<f64, Error> {
    Ok(E2eBreakdown::new(coeffs, config, sinr_th)?.per_term(&coeffs.alpha))
}

/// Aggregate-level combination, kept for comparison with [`abep_e2e`].
pub fn abep_e2e_aggregate(coeffs: &ModeCoefficients, config: &NetworkConfig, sinr_th: f64) -> Result<f64, Error> {
    Ok(E2eBreakdown::new(coeffs, config, sinr_th)?.aggregate())
}

/// Relay always forwards and never errs (genie-aided baseline).
pub fn abep_perfect_sic(coeffs: &ModeCoefficients, config: &NetworkConfig) -> f64 {
    abep_diversity(coeffs, config.gamma_s2(), config.gamma_r())
}

/// Far-user constellation of the mode, as used by the relay.
pub fn relay_scheme(coeffs: &ModeCoefficients) -> Scheme {
    coeffs.mode.far()
}
