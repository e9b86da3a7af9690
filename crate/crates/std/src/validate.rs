//! End-to-end self check: closed forms against quadrature, simulation
//! against closed forms, the optimum threshold against a brute-force search,
//! and structural invariants.

use std::fmt;
use std::time::{Duration, Instant};

use tbs_noma_core::analytic::{
    abep_direct, abep_diversity, abep_e2e, abep_sic_at_ue1, direct_terms, phi_threshold, prob_relay_active, sic_terms,
    table1_coeffs, ModeCoefficients, NetworkConfig, PhiThreshold,
};
use tbs_noma_core::constellation::{Mode, PowerAllocation, Receiver, Scheme};
use tbs_noma_core::sim::{run_campaign, CampaignResult, RelayPolicy, SimContext, StopRule};
use tbs_noma_core::threshold::{sinr_th_opt, solve_closed_form, SearchGrid};

use crate::error::CliError;
use crate::experiment::threshold_row;
use crate::oracle;
use crate::parallel::RayonExecutor;

/// How much simulation effort the statistical checks spend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Quick,
    Full,
}

impl Profile {
    fn stop(self) -> StopRule {
        match self {
            Profile::Quick => StopRule { target_errors: 500, max_bits: 20_000_000 },
            Profile::Full => StopRule { target_errors: 2000, max_bits: 100_000_000 },
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            _ => Err(format!("profile must be 'quick' or 'full', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub profile: Profile,
    pub seed: u64,
    /// Scales every β fed to the closed forms under test; a negative control
    /// that must make the quadrature checks fail.
    pub corrupt_beta: Option<f64>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { profile: Profile::Quick, seed: 1, corrupt_beta: None }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seed: Option<u64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let seed = c.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
            writeln!(
                f,
                "{} {}{} ({:.2} s)\n      {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                seed,
                c.elapsed.as_secs_f64(),
                c.detail
            )?;
        }
        let ok = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{ok}/{} checks passed in {:.2} s", self.checks.len(), self.elapsed.as_secs_f64())
    }
}

pub const QUAD_DIRECT: &str = "direct-link ABEP closed form vs quadrature";
pub const QUAD_SIC: &str = "conditional SIC ABEP closed form vs quadrature";
pub const QUAD_DIVERSITY: &str = "two-branch ABEP closed form vs quadrature";
pub const THRESHOLD_ORACLE: &str = "closed-form optimum threshold vs brute-force minimiser";

const QUAD_TOL: f64 = 1e-6;

/// (mode, a1, γ̄_s1, γ̄_s2, γ̄_r, φ)
const QUAD_POINTS: [(u8, f64, f64, f64, f64, f64); 5] = [
    (1, 0.10, 1.0, 1.0, 0.5, 2.2),
    (2, 0.07, 31.6, 3.16, 15.8, 0.37),
    (3, 0.23, 100.0, 10.0, 50.0, 4.1),
    (5, 0.04, 7.9, 251.0, 3.2, 12.0),
    (6, 0.13, 562.0, 0.3, 1000.0, 0.05),
];

struct Runner {
    checks: Vec<Check>,
}

impl Runner {
    fn run(&mut self, name: &'static str, seed: Option<u64>, f: impl FnOnce() -> Result<(bool, String), CliError>) {
        let t = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { name, passed, detail, seed, elapsed: t.elapsed() });
    }
}

fn coeffs_under_test(mode: u8, a1: f64, corrupt: Option<f64>) -> Result<(ModeCoefficients, ModeCoefficients), CliError> {
    let truth = table1_coeffs(Mode::new(mode)?, a1, 1.0 - a1)?;
    let mut tested = truth.clone();
    if let Some(k) = corrupt {
        tested.beta.iter_mut().for_each(|b| *b *= k);
    }
    Ok((truth, tested))
}

fn quad_check(
    corrupt: Option<f64>,
    closed: impl Fn(&ModeCoefficients, (f64, f64, f64, f64)) -> Result<f64, CliError>,
    quad: impl Fn(&ModeCoefficients, (f64, f64, f64, f64)) -> f64,
) -> Result<(bool, String), CliError> {
    let mut worst = (0.0f64, 0u8, 0.0, 0.0);
    for (m, a1, gs1, gs2, gr, phi) in QUAD_POINTS {
        let (truth, tested) = coeffs_under_test(m, a1, corrupt)?;
        let p = (gs1, gs2, gr, phi);
        let (cf, q) = (closed(&tested, p)?, quad(&truth, p));
        if (cf - q).abs() >= worst.0 {
            worst = ((cf - q).abs(), m, cf, q);
        }
    }
    Ok((
        worst.0 <= QUAD_TOL,
        format!(
            "max |closed - quadrature| = {:.3e} (mode {}: {:.10e} vs {:.10e}), tolerance {QUAD_TOL:e}",
            worst.0, worst.1, worst.2, worst.3
        ),
    ))
}

fn within_3_sigma(observed: &CampaignResult, expected: f64) -> (bool, String) {
    let dev = (observed.ber - expected).abs();
    let ok = observed.errors_observed > 0 && dev <= 3.0 * observed.std_err;
    (
        ok,
        format!(
            "ber_mc = {:.5e} ± {:.2e} ({} errors / {} bits), analytic = {:.5e}, |dev| = {:.2} sigma",
            observed.ber,
            observed.std_err,
            observed.errors_observed,
            observed.bits_simulated,
            expected,
            dev / observed.std_err
        ),
    )
}

fn campaign(
    cfg: NetworkConfig,
    mode: u8,
    policy: RelayPolicy,
    stop: StopRule,
    seed: u64,
    exec: &RayonExecutor,
) -> Result<CampaignResult, CliError> {
    let ctx = SimContext::new(cfg, Mode::new(mode)?, policy, Receiver::default())?;
    Ok(run_campaign(&ctx, stop, seed, exec)?)
}

pub fn run(opts: &ValidateOptions, exec: &RayonExecutor) -> Report {
    let start = Instant::now();
    let mut r = Runner { checks: Vec::new() };
    let corrupt = opts.corrupt_beta;

    r.run(QUAD_DIRECT, None, || {
        quad_check(corrupt, |c, (_, gs2, _, _)| Ok(abep_direct(c, gs2)), |c, (_, gs2, _, _)| oracle::direct(c, gs2))
    });
    r.run(QUAD_SIC, None, || {
        quad_check(
            corrupt,
            |c, (gs1, _, _, phi)| Ok(abep_sic_at_ue1(c, PhiThreshold::Finite(phi), gs1)?),
            |c, (gs1, _, _, phi)| oracle::sic_conditional(c, phi, gs1),
        )
    });
    r.run(QUAD_DIVERSITY, None, || {
        quad_check(
            corrupt,
            |c, (_, gs2, gr, _)| Ok(abep_diversity(c, gs2, gr)),
            |c, (_, gs2, gr, _)| oracle::diversity(c, gs2, gr),
        )
    });

    r.run("conditional SIC ABEP at zero threshold equals direct form", None, || {
        let mut ok = true;
        for m in Mode::ALL {
            let c = table1_coeffs(m, 0.1, 0.9)?;
            for g in [0.1, 1.0, 10.0, 1e3, 1e6] {
                ok &= sic_terms(&c, PhiThreshold::Finite(0.0), g)? == direct_terms(&c, g);
            }
        }
        Ok((ok, "6 modes x 5 SNRs, exact equality".into()))
    });

    r.run("Gray labelling and unit average energy", None, || {
        let mut ok = true;
        for s in [Scheme::Bpsk, Scheme::Qpsk, Scheme::Qam16] {
            let pts = s.points();
            let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
            ok &= (energy - 1.0).abs() < 1e-12;
            for (i, p) in pts.iter().enumerate() {
                let dmin = pts.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| (q - p).norm()).fold(f64::INFINITY, f64::min);
                for (j, q) in pts.iter().enumerate() {
                    if j != i && ((q - p).norm() - dmin).abs() < 1e-12 {
                        ok &= (i ^ j).count_ones() == 1;
                    }
                }
            }
        }
        Ok((ok, "BPSK, QPSK, 16-QAM".into()))
    });

    r.run("threshold mapping round trip and feasibility", None, || {
        let mut worst = 0.0f64;
        let mut feasible = true;
        for a1 in [0.05, 0.1, 0.2, 0.3, 0.45] {
            let pa = PowerAllocation::from_near_share(a1)?;
            for phi in [0.0, 1e-3, 0.5, 5.0, 80.0, 1e4] {
                let s = sinr_th_opt(phi, &pa);
                feasible &= s < pa.a2() / pa.a1();
                if let PhiThreshold::Finite(p) = phi_threshold(s, &pa) {
                    worst = worst.max((p - phi).abs() / phi.max(1.0));
                } else {
                    feasible = false;
                }
            }
            for m in Mode::ALL {
                let Ok(c) = ModeCoefficients::for_allocation(m, &pa) else { continue };
                for rho in [0.0, 10.0, 20.0, 30.0, 40.0] {
                    let cfg = NetworkConfig::from_db(a1, rho, 0.0, 0.0, 0.0, 0.5)?;
                    feasible &= solve_closed_form(&c, &cfg).sinr_th_opt < pa.a2() / pa.a1();
                }
            }
        }
        Ok((worst <= 1e-12 && feasible, format!("max relative round-trip error {worst:.2e}, all feasible: {feasible}")))
    });

    let stop = opts.profile.stop();
    let unit_gains = |rho: f64| NetworkConfig::from_db(0.1, rho, 0.0, 0.0, 0.0, 0.5);

    let seed = opts.seed;
    r.run("relay-active fraction vs exponential tail", Some(seed), || {
        let cfg = unit_gains(10.0)?;
        let res = campaign(cfg, 1, RelayPolicy::FixedThreshold(2.0), stop, seed, exec)?;
        let expect = prob_relay_active(phi_threshold(2.0, &cfg.pa), cfg.gamma_s1());
        let dev = (res.relay_active_fraction - expect).abs();
        Ok((
            dev <= 3.0 * res.relay_active_std_err,
            format!(
                "fraction = {:.6} ± {:.2e} over {} slots, analytic = {:.6}",
                res.relay_active_fraction, res.relay_active_std_err, res.slots, expect
            ),
        ))
    });

    let seed = opts.seed + 1;
    r.run("never-relay BER vs direct-link ABEP", Some(seed), || {
        let cfg = unit_gains(10.0)?;
        let res = campaign(cfg, 4, RelayPolicy::NeverRelay, stop, seed, exec)?;
        let c = ModeCoefficients::for_allocation(Mode::new(4)?, &cfg.pa)?;
        Ok(within_3_sigma(&res, abep_direct(&c, cfg.gamma_s2())))
    });

    let seed = opts.seed + 2;
    r.run("perfect-SIC BER vs two-branch ABEP", Some(seed), || {
        let cfg = unit_gains(5.0)?;
        let res = campaign(cfg, 1, RelayPolicy::PerfectSic, stop, seed, exec)?;
        let c = ModeCoefficients::for_allocation(Mode::new(1)?, &cfg.pa)?;
        Ok(within_3_sigma(&res, abep_diversity(&c, cfg.gamma_s2(), cfg.gamma_r())))
    });

    let seed = opts.seed + 3;
    r.run("end-to-end BER vs analytic ABEP (mode 1, 20 dB)", Some(seed), || {
        let cfg = unit_gains(20.0)?;
        let res = campaign(cfg, 1, RelayPolicy::FixedThreshold(2.0), stop, seed, exec)?;
        let c = ModeCoefficients::for_allocation(Mode::new(1)?, &cfg.pa)?;
        Ok(within_3_sigma(&res, abep_e2e(&c, &cfg, 2.0)?))
    });

    r.run(THRESHOLD_ORACLE, None, || {
        let mut worst = (0.0f64, 0.0, 0.0, 0.0, 0.0);
        let mut ok = true;
        for rho in [10.0, 20.0, 30.0, 40.0] {
            let cfg = unit_gains(rho)?;
            let c = ModeCoefficients::for_allocation(Mode::new(1)?, &cfg.pa)?;
            let row = threshold_row(&c, &cfg, rho, SearchGrid::DEFAULT_STEPS, exec)?;
            let tol = row.grid_step.max(1e-3);
            let gap = (row.closed_form.sinr_th_opt - row.sinr_th_brute_force).abs();
            ok &= gap <= tol;
            if gap >= worst.0 {
                worst = (gap, rho, row.closed_form.sinr_th_opt, row.sinr_th_brute_force, tol);
            }
        }
        Ok((
            ok,
            format!(
                "max gap {:.4} at {} dB (closed form {:.4}, brute force {:.4}), tolerance {:.4}",
                worst.0, worst.1, worst.2, worst.3, worst.4
            ),
        ))
    });

    Report { checks: r.checks, elapsed: start.elapsed() }
}
