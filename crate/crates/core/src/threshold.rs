//! Optimum relaying threshold: closed form and a brute-force minimiser.

use alloc::vec::Vec;

use crate::analytic::{abep_e2e, direct_terms, diversity_terms, propagation_terms, ModeCoefficients, NetworkConfig};
use crate::constellation::PowerAllocation;
use crate::error::Error;
use crate::special::q_inv;

/// Closed-form optimum and the per-pattern quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSolution {
    pub phi_opt: f64,
    pub sinr_th_opt: f64,
    /// `δ_i`; `None` where the denominator is not positive.
    pub per_term_delta: Vec<Option<f64>>,
    /// Patterns that contributed to `phi_opt`.
    pub active_terms: Vec<bool>,
}

/// `δ_i = (D_i − V_i)/(P_i − V_i)` from the α-weighted direct, diversity
/// and propagation summands.
pub fn delta_terms(coeffs: &ModeCoefficients, config: &NetworkConfig) -> Vec<Option<f64>> {
    let (gs2, gr) = (config.gamma_s2(), config.gamma_r());
    let d = direct_terms(coeffs, gs2);
    let v = diversity_terms(coeffs, gs2, gr);
    let p = propagation_terms(coeffs, gs2, gr);
    (0..coeffs.len())
        .map(|i| {
            let den = p[i] - v[i];
            let delta = (d[i] - v[i]) / den;
            (den > 0.0 && delta.is_finite()).then_some(delta)
        })
        .collect()
}

/// Which patterns enter the optimum: `δ_i < 0.5` and `δ_i/α_i ∈ (0, 1)`.
pub fn active_terms(coeffs: &ModeCoefficients, deltas: &[Option<f64>]) -> Vec<bool> {
    deltas
        .iter()
        .zip(&coeffs.alpha)
        .map(|(d, &a)| match *d {
            Some(d) => d < 0.5 && d / a > 0.0 && d / a < 1.0,
            None => false,
        })
        .collect()
}

/// `Σ_active (1/β_i)·Q⁻¹(δ_i/α_i)²`, zero when no pattern is active.
pub fn phi_opt(coeffs: &ModeCoefficients, deltas: &[Option<f64>]) -> f64 {
    let active = active_terms(coeffs, deltas);
    let mut phi = 0.0;
    for i in 0..coeffs.len() {
        if !active[i] {
            continue;
        }
        let delta = deltas[i].unwrap_or(0.5);
        if let Ok(x) = q_inv(delta / coeffs.alpha[i]) {
            phi += x * x / coeffs.beta[i];
        }
    }
    phi
}

/// Inverse of the SINR-to-`φ` mapping: `a2·φ/(1 + a1·φ)`.
pub fn sinr_th_opt(phi: f64, pa: &PowerAllocation) -> f64 {
    if phi.is_infinite() {
        return pa.a2() / pa.a1();
    }
    pa.a2() * phi / (1.0 + pa.a1() * phi)
}

pub fn solve_closed_form(coeffs: &ModeCoefficients, config: &NetworkConfig) -> ThresholdSolution {
    let per_term_delta = delta_terms(coeffs, config);
    let active_terms = active_terms(coeffs, &per_term_delta);
    let phi = phi_opt(coeffs, &per_term_delta);
    ThresholdSolution {
        phi_opt: phi,
        sinr_th_opt: sinr_th_opt(phi, &config.pa),
        per_term_delta,
        active_terms,
    }
}

/// Coarse search grid over SINR thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SearchGrid {
    pub const DEFAULT_STEPS: usize = 200;

    /// The whole feasible range `[0, a2/a1)`, stopping just short of the boundary.
    pub fn feasible(pa: &PowerAllocation, steps: usize) -> Self {
        SearchGrid { lo: 0.0, hi: pa.a2() / pa.a1() * (1.0 - 1e-6), steps }
    }

    pub fn validate(&self, pa: &PowerAllocation) -> Result<(), Error> {
        if !(self.lo >= 0.0 && self.lo < self.hi && self.hi < pa.a2() / pa.a1()) {
            return Err(Error::Config("threshold grid must satisfy 0 <= lo < hi < a2/a1"));
        }
        if self.steps < 3 {
            return Err(Error::Config("threshold grid needs at least 3 points"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.steps - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.steps {
            self.hi
        } else {
            self.lo + k as f64 * self.step()
        }
    }
}

const GOLDEN_TOL: f64 = 1e-6;

/// Golden-section minimisation of `f` on `[a, b]` down to `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid values of the end-to-end ABEP; exposed so callers can evaluate the
/// grid in parallel and feed [`refine_grid_minimum`].
pub fn grid_values(coeffs: &ModeCoefficients, config: &NetworkConfig, grid: &SearchGrid) -> Result<Vec<f64>, Error> {
    (0..grid.steps).map(|k| abep_e2e(coeffs, config, grid.point(k))).collect()
}

/// Lowest grid value (ties go to the smaller threshold), refined by golden
/// section on the two neighbouring cells.
pub fn refine_grid_minimum(
    coeffs: &ModeCoefficients,
    config: &NetworkConfig,
    grid: &SearchGrid,
    values: &[f64],
) -> Result<(f64, f64), Error> {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = k;
        }
    }
    let a = grid.point(best.saturating_sub(1));
    let b = grid.point((best + 1).min(grid.steps - 1));
    let mut failure = None;
    let (x, fx) = golden_section(
        |t| match abep_e2e(coeffs, config, t) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::INFINITY
            }
        },
        a,
        b,
        GOLDEN_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (gx, gv) = (grid.point(best), values[best]);
    Ok(if fx < gv || (fx == gv && x < gx) { (x, fx) } else { (gx, gv) })
}

/// Argmin of the analytic end-to-end ABEP over `grid`, refined to `1e-6`.
pub fn brute_force_threshold(
    coeffs: &ModeCoefficients,
    config: &NetworkConfig,
    grid: &SearchGrid,
) -> Result<(f64, f64), Error> {
    grid.validate(&config.pa)?;
    let values = grid_values(coeffs, config, grid)?;
    refine_grid_minimum(coeffs, config, grid, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::phi_threshold;
    use crate::analytic::PhiThreshold;
    use crate::constellation::Mode;

    fn setup(mode: u8, a1: f64, rho_db: f64, s1: f64, s2: f64, r: f64) -> (ModeCoefficients, NetworkConfig) {
        let cfg = NetworkConfig::from_db(a1, rho_db, s1, s2, r, 0.5).unwrap();
        (ModeCoefficients::for_allocation(Mode::new(mode).unwrap(), &cfg.pa).unwrap(), cfg)
    }

    #[test]
    fn phi_opt_zero_when_nothing_active() {
        let (c, _) = setup(1, 0.1, 10.0, 0.0, 0.0, 0.0);
        assert_eq!(phi_opt(&c, &[Some(0.6), Some(0.9)]), 0.0);
        assert_eq!(phi_opt(&c, &[None, None]), 0.0);
    }

    #[test]
    fn phi_opt_boundary_contributes_nothing() {
        let (c, _) = setup(1, 0.1, 10.0, 0.0, 0.0, 0.0);
        // δ/α = 0.5 exactly on the first term; second inactive.
        assert_eq!(phi_opt(&c, &[Some(0.25), Some(0.7)]), 0.0);
    }

    #[test]
    fn phi_opt_two_terms() {
        let (c, _) = setup(1, 0.1, 10.0, 0.0, 0.0, 0.0);
        // δ/α = {0.25, 0.1}, β = {0.8, 3.2}.
        let phi = phi_opt(&c, &[Some(0.125), Some(0.05)]);
        let expect = 0.674_489_750_196_081_7f64.powi(2) / 0.8 + 1.281_551_565_544_600_5f64.powi(2) / 3.2;
        assert!((phi - expect).abs() < 1e-9, "{phi} vs {expect}");
        assert!((phi - 1.0819).abs() < 1e-4);
    }

    #[test]
    fn sinr_mapping_round_trip() {
        let pa = PowerAllocation::from_near_share(0.2).unwrap();
        assert_eq!(sinr_th_opt(0.0, &pa), 0.0);
        let s = sinr_th_opt(5.0, &pa);
        match phi_threshold(s, &pa) {
            PhiThreshold::Finite(p) => assert!((p - 5.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!((sinr_th_opt(1e15, &pa) - 4.0).abs() < 1e-12);
        assert_eq!(sinr_th_opt(f64::INFINITY, &pa), 4.0);
    }

    #[test]
    fn strong_relay_activates_terms() {
        let (c, cfg) = setup(1, 0.1, 30.0, 0.0, 0.0, 40.0);
        let deltas = delta_terms(&c, &cfg);
        for (d, a) in deltas.iter().zip(&c.alpha) {
            let d = d.unwrap();
            assert!(d < 0.5 && d / a < 0.5);
        }
        assert!(active_terms(&c, &deltas).iter().all(|&x| x));
    }

    #[test]
    fn degenerate_snr_is_inactive_or_harmless() {
        let cfg = NetworkConfig::new(PowerAllocation::from_near_share(0.1).unwrap(), 1e-300, 1.0, 1.0, 1.0, 0.5).unwrap();
        let c = ModeCoefficients::for_allocation(Mode::new(1).unwrap(), &cfg.pa).unwrap();
        let sol = solve_closed_form(&c, &cfg);
        assert!(sol.phi_opt.is_finite() && sol.phi_opt >= 0.0);
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_section(|t| (t - 1.3) * (t - 1.3) + 2.0, 0.0, 4.0, 1e-9);
        assert!((x - 1.3).abs() < 1e-7 && (fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn brute_force_is_no_worse_than_reference_thresholds() {
        let (c, cfg) = setup(1, 0.2, 25.0, 10.0, 0.0, 10.0);
        let grid = SearchGrid::feasible(&cfg.pa, SearchGrid::DEFAULT_STEPS);
        let (_, best) = brute_force_threshold(&c, &cfg, &grid).unwrap();
        let cf = solve_closed_form(&c, &cfg).sinr_th_opt;
        for th in [0.0, 1.0, 2.0, cf] {
            assert!(best <= abep_e2e(&c, &cfg, th).unwrap(), "threshold {th}");
        }
    }

    #[test]
    fn grid_validation() {
        let pa = PowerAllocation::from_near_share(0.1).unwrap();
        assert!(SearchGrid { lo: 0.0, hi: 9.0, steps: 10 }.validate(&pa).is_err());
        assert!(SearchGrid { lo: 1.0, hi: 1.0, steps: 10 }.validate(&pa).is_err());
        assert!(SearchGrid { lo: 0.0, hi: 8.0, steps: 2 }.validate(&pa).is_err());
        let g = SearchGrid::feasible(&pa, 200);
        assert!(g.validate(&pa).is_ok());
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(199), g.hi);
    }

    #[test]
    fn closed_form_is_feasible() {
        for m in Mode::ALL {
            for rho in [0.0, 10.0, 20.0, 30.0, 40.0, 60.0] {
                let (c, cfg) = setup(m.id(), 0.1, rho, 0.0, 0.0, 10.0);
                let s = solve_closed_form(&c, &cfg).sinr_th_opt;
                assert!(s >= 0.0 && s < cfg.pa.a2() / cfg.pa.a1());
            }
        }
    }
}
