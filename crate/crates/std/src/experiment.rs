//! SNR sweeps, threshold sweeps and coefficient dumps.
//!
//! Every CSV begins with `#` comment lines holding the complete spec as a
//! config file, so any output can be regenerated from its own header.
//!
//! Curve columns: `snr_db, mode, policy, sinr_th_used, ber_analytic, ber_mc,
//! mc_std_err, bits, errors, relay_active_frac_mc, relay_active_frac_analytic`.
//! `sinr_th_used` is empty for `never`; `ber_mc` and `mc_std_err` are empty
//! when the campaign saw no errors.
//!
//! Threshold columns: `snr_db, sinr_th_closed_form, sinr_th_brute_force,
//! abep_at_closed_form, abep_at_brute_force, delta_1 .. delta_N`.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use tbs_noma_core::analytic::{
    abep_direct, abep_diversity, abep_e2e, phi_threshold, prob_relay_active, ModeCoefficients, NetworkConfig,
};
use tbs_noma_core::constellation::Mode;
use tbs_noma_core::sim::{run_campaign, BatchExecutor, CampaignResult, RelayPolicy, SimContext};
use tbs_noma_core::threshold::{refine_grid_minimum, solve_closed_form, SearchGrid, ThresholdSolution};

use crate::error::CliError;
use crate::parallel::RayonExecutor;
use crate::spec::ExperimentSpec;

/// Seed of one SNR point, so points of a sweep use unrelated streams.
pub fn point_seed(master: u64, mode: Mode, point: usize) -> u64 {
    let k = u64::from(mode.id()) * 1_000_003 + point as u64;
    master.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Analytic ABEP and relay-active probability for a policy.
pub fn analytic_point(coeffs: &ModeCoefficients, cfg: &NetworkConfig, policy: RelayPolicy) -> Result<(f64, f64), CliError> {
    let gs1 = cfg.gamma_s1();
    let with_threshold = |th: f64| -> Result<(f64, f64), CliError> {
        Ok((abep_e2e(coeffs, cfg, th)?, prob_relay_active(phi_threshold(th, &cfg.pa), gs1)))
    };
    match policy {
        RelayPolicy::FixedThreshold(th) => with_threshold(th),
        RelayPolicy::OptimumThreshold => with_threshold(solve_closed_form(coeffs, cfg).sinr_th_opt),
        RelayPolicy::AlwaysRelay => with_threshold(0.0),
        RelayPolicy::NeverRelay => Ok((abep_direct(coeffs, cfg.gamma_s2()), 0.0)),
        RelayPolicy::PerfectSic => Ok((abep_diversity(coeffs, cfg.gamma_s2(), cfg.gamma_r()), 1.0)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub snr_db: f64,
    pub mode: Mode,
    pub sinr_th_used: Option<f64>,
    pub ber_analytic: f64,
    pub relay_active_frac_analytic: f64,
    pub mc: CampaignResult,
}

pub fn curve_rows(spec: &ExperimentSpec, mode: Mode, exec: &dyn BatchExecutor) -> Result<Vec<CurveRow>, CliError> {
    let policy = spec.policy.to_relay_policy();
    spec.snr
        .points()
        .into_iter()
        .enumerate()
        .map(|(k, snr_db)| {
            let cfg = spec.network(snr_db)?;
            let coeffs = ModeCoefficients::for_allocation(mode, &cfg.pa)?;
            let (ber_analytic, frac) = analytic_point(&coeffs, &cfg, policy)?;
            let ctx = SimContext::new(cfg, mode, policy, spec.receiver)?;
            let mc = run_campaign(&ctx, spec.stop, point_seed(spec.seed, mode, k), exec)?;
            Ok(CurveRow {
                snr_db,
                mode,
                sinr_th_used: ctx.sinr_th_used(),
                ber_analytic,
                relay_active_frac_analytic: frac,
                mc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub snr_db: f64,
    pub closed_form: ThresholdSolution,
    pub abep_at_closed_form: f64,
    pub sinr_th_brute_force: f64,
    pub abep_at_brute_force: f64,
    pub grid_step: f64,
}

pub fn threshold_row(
    coeffs: &ModeCoefficients,
    cfg: &NetworkConfig,
    snr_db: f64,
    grid_steps: usize,
    exec: &RayonExecutor,
) -> Result<ThresholdRow, CliError> {
    let closed_form = solve_closed_form(coeffs, cfg);
    let grid = SearchGrid::feasible(&cfg.pa, grid_steps);
    grid.validate(&cfg.pa)?;
    let values = exec.install(|| {
        (0..grid.steps)
            .into_par_iter()
            .map(|k| abep_e2e(coeffs, cfg, grid.point(k)))
            .collect::<Result<Vec<f64>, _>>()
    })?;
    let (th, abep) = refine_grid_minimum(coeffs, cfg, &grid, &values)?;
    Ok(ThresholdRow {
        snr_db,
        abep_at_closed_form: abep_e2e(coeffs, cfg, closed_form.sinr_th_opt)?,
        closed_form,
        sinr_th_brute_force: th,
        abep_at_brute_force: abep,
        grid_step: grid.step(),
    })
}

pub fn threshold_rows(spec: &ExperimentSpec, mode: Mode, exec: &RayonExecutor) -> Result<Vec<ThresholdRow>, CliError> {
    spec.snr
        .points()
        .into_iter()
        .map(|snr_db| {
            let cfg = spec.network(snr_db)?;
            let coeffs = ModeCoefficients::for_allocation(mode, &cfg.pa)?;
            threshold_row(&coeffs, &cfg, snr_db, spec.grid_steps, exec)
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn header(kind: &str, spec: &ExperimentSpec, mode: Mode) -> String {
    let mut s = format!("# tbs-noma {kind}, mode {}\n# seed = {}\n", mode.id(), spec.seed);
    for line in spec.to_toml().lines() {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn csv_bytes(head: String, columns: &[String], rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(head.into_bytes());
    w.write_record(columns)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn curve_csv(spec: &ExperimentSpec, mode: Mode, rows: &[CurveRow]) -> Result<Vec<u8>, CliError> {
    let columns = [
        "snr_db",
        "mode",
        "policy",
        "sinr_th_used",
        "ber_analytic",
        "ber_mc",
        "mc_std_err",
        "bits",
        "errors",
        "relay_active_frac_mc",
        "relay_active_frac_analytic",
    ]
    .map(String::from);
    let body = rows
        .iter()
        .map(|r| {
            let resolved = !r.mc.unresolved;
            vec![
                r.snr_db.to_string(),
                r.mode.id().to_string(),
                spec.policy.to_string(),
                opt(r.sinr_th_used),
                r.ber_analytic.to_string(),
                opt(resolved.then_some(r.mc.ber)),
                opt(resolved.then_some(r.mc.std_err)),
                r.mc.bits_simulated.to_string(),
                r.mc.errors_observed.to_string(),
                r.mc.relay_active_fraction.to_string(),
                r.relay_active_frac_analytic.to_string(),
            ]
        })
        .collect();
    csv_bytes(header("curve", spec, mode), &columns, body)
}

pub fn threshold_csv(spec: &ExperimentSpec, mode: Mode, rows: &[ThresholdRow]) -> Result<Vec<u8>, CliError> {
    let n = rows.first().map_or(0, |r| r.closed_form.per_term_delta.len());
    let mut columns: Vec<String> = [
        "snr_db",
        "sinr_th_closed_form",
        "sinr_th_brute_force",
        "abep_at_closed_form",
        "abep_at_brute_force",
    ]
    .map(String::from)
    .to_vec();
    columns.extend((1..=n).map(|i| format!("delta_{i}")));
    let body = rows
        .iter()
        .map(|r| {
            let mut v = vec![
                r.snr_db.to_string(),
                r.closed_form.sinr_th_opt.to_string(),
                r.sinr_th_brute_force.to_string(),
                r.abep_at_closed_form.to_string(),
                r.abep_at_brute_force.to_string(),
            ];
            v.extend(r.closed_form.per_term_delta.iter().map(|d| opt(*d)));
            v
        })
        .collect();
    let mut head = header("threshold", spec, mode);
    if let Some(r) = rows.first() {
        let _ = writeln!(head, "# grid_step = {}", r.grid_step);
    }
    csv_bytes(head, &columns, body)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Twelve decimals with trailing zeros dropped: `0.8` rather than `0.7999999999999998`.
fn round12(x: f64) -> String {
    let s = format!("{x:.12}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Human-readable `N`, `α`, `β` for one mode and split.
pub fn coefficient_table(mode: Mode, a1: f64) -> Result<String, CliError> {
    let c = tbs_noma_core::analytic::table1_coeffs(mode, a1, 1.0 - a1)?;
    let mut s = format!(
        "mode {} ({}/{}), a1 = {a1}, a2 = {}\nN = {}\n",
        mode.id(),
        mode.near().name(),
        mode.far().name(),
        1.0 - a1,
        c.len()
    );
    let _ = writeln!(s, "{:>3}  {:>8}  {:>22}", "i", "alpha", "beta");
    for i in 0..c.len() {
        let _ = writeln!(s, "{:>3}  {:>8}  {:>22}", i + 1, c.alpha[i], round12(c.beta[i]));
    }
    Ok(s)
}
