//! Monte Carlo simulation of the two-phase protocol over Rayleigh block fading.
//!
//! Each slot draws, in this order: the near and far symbol indices, `h_s1`,
//! `h_s2`, `h_r`, then the noise at UE1, at UE2 in phase 1 and at UE2 in
//! phase 2. Every draw happens whether or not it is used, so a slot's
//! outcome depends only on `(master_seed, slot_index)`.
//!
//! Slots are grouped in fixed-size batches. Batches may run anywhere, but
//! they are reduced in index order and the campaign stops after the first
//! batch that meets the stopping rule; later batches are discarded. The
//! result is therefore independent of how many workers ran them.

use alloc::vec::Vec;
use core::ops::Range;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::analytic::{ModeCoefficients, NetworkConfig};
use crate::constellation::{detect_combined, sic_detect_far, CompositeAlphabet, Mode, Observation, Receiver};
use crate::error::Error;
use crate::threshold::solve_closed_form;

/// When UE1 forwards the far user's symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelayPolicy {
    FixedThreshold(f64),
    /// Closed-form optimum for the operating point.
    OptimumThreshold,
    AlwaysRelay,
    NeverRelay,
    /// Always forwards the true far symbol.
    PerfectSic,
}

/// Per-slot protocol state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub relay_active: bool,
    pub sic_correct: bool,
    pub ue2_bit_errors: u32,
    pub bits: u32,
}

/// `CN(0, σ²)`: real and imaginary parts each `N(0, σ²/2)`.
pub fn sample_channel<R: RngCore + ?Sized>(sigma2: f64, rng: &mut R) -> Complex64 {
    let s = libm::sqrt(0.5 * sigma2);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Per-slot random streams: one ChaCha8 key per master seed, one stream per slot.
#[derive(Debug, Clone)]
pub struct SlotRng {
    base: ChaCha8Rng,
}

impl SlotRng {
    pub fn new(master_seed: u64) -> Self {
        SlotRng { base: ChaCha8Rng::seed_from_u64(master_seed) }
    }

    pub fn stream(&self, slot_index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(slot_index);
        rng.set_word_pos(0);
        rng
    }
}

/// Relay gate resolved from a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Gate {
    Sinr(f64),
    Never,
}

/// Everything a slot needs, precomputed once per operating point.
#[derive(Debug, Clone)]
pub struct SimContext {
    config: NetworkConfig,
    mode: Mode,
    policy: RelayPolicy,
    receiver: Receiver,
    alphabet: CompositeAlphabet,
    gate: Gate,
    genie: bool,
    sinr_th_used: Option<f64>,
    amp_s: f64,
    amp_r: f64,
}

impl SimContext {
    pub fn new(config: NetworkConfig, mode: Mode, policy: RelayPolicy, receiver: Receiver) -> Result<Self, Error> {
        let coeffs = ModeCoefficients::for_allocation(mode, &config.pa)?;
        let (gate, genie) = match policy {
            RelayPolicy::FixedThreshold(th) if th >= 0.0 && !th.is_nan() => (Gate::Sinr(th), false),
            RelayPolicy::FixedThreshold(th) => return Err(Error::Domain { what: "SINR threshold", value: th }),
            RelayPolicy::OptimumThreshold => (Gate::Sinr(solve_closed_form(&coeffs, &config).sinr_th_opt), false),
            RelayPolicy::AlwaysRelay => (Gate::Sinr(0.0), false),
            RelayPolicy::NeverRelay => (Gate::Never, false),
            RelayPolicy::PerfectSic => (Gate::Sinr(0.0), true),
        };
        Ok(SimContext {
            config,
            mode,
            policy,
            receiver,
            alphabet: CompositeAlphabet::new(mode, &config.pa),
            gate,
            genie,
            sinr_th_used: match gate {
                Gate::Sinr(th) => Some(th),
                Gate::Never => None,
            },
            amp_s: libm::sqrt(config.rho),
            amp_r: libm::sqrt(config.rho * config.relay_power_ratio),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn policy(&self) -> RelayPolicy {
        self.policy
    }

    /// SINR threshold the gate applies; `None` for [`RelayPolicy::NeverRelay`].
    pub fn sinr_th_used(&self) -> Option<f64> {
        self.sinr_th_used
    }

    pub fn bits_per_slot(&self) -> u32 {
        self.mode.far().bits_per_symbol() as u32
    }

    /// SINR of the far symbol at UE1, `ρa2|h|²/(ρa1|h|² + 1)`.
    fn ue1_sinr(&self, h_s1: Complex64) -> f64 {
        let g = self.config.rho * h_s1.norm_sqr();
        self.config.pa.a2() * g / (self.config.pa.a1() * g + 1.0)
    }
}

fn noise<R: RngCore + ?Sized>(rng: &mut R) -> Complex64 {
    sample_channel(1.0, rng)
}

pub fn run_slot<R: RngCore + ?Sized>(ctx: &SimContext, rng: &mut R) -> TrialOutcome {
    let m1 = ctx.mode.near().order() as u32;
    let m2 = ctx.mode.far().order() as u32;
    let i1 = (rng.next_u32() % m1) as usize;
    let i2 = (rng.next_u32() % m2) as usize;
    let cfg = &ctx.config;
    let h_s1 = sample_channel(cfg.sigma2_s1, rng);
    let h_s2 = sample_channel(cfg.sigma2_s2, rng);
    let h_r = sample_channel(cfg.sigma2_r, rng);
    let (n1, n2, nr) = (noise(rng), noise(rng), noise(rng));

    let x = ctx.alphabet.point(i1, i2);
    let at_ue1 = Observation { y: h_s1 * x * ctx.amp_s + n1, h: h_s1, amplitude: ctx.amp_s };
    let at_ue2 = Observation { y: h_s2 * x * ctx.amp_s + n2, h: h_s2, amplitude: ctx.amp_s };

    let x2_hat = sic_detect_far(&at_ue1, &ctx.alphabet).index;
    let sic_correct = x2_hat == i2;
    let relay_active = match ctx.gate {
        Gate::Sinr(th) => ctx.ue1_sinr(h_s1) >= th,
        Gate::Never => false,
    };

    let far = ctx.mode.far();
    let decision = if relay_active {
        let forwarded = far.point(if ctx.genie { i2 } else { x2_hat });
        let relayed = Observation { y: h_r * forwarded * ctx.amp_r + nr, h: h_r, amplitude: ctx.amp_r };
        detect_combined(&at_ue2, Some(&relayed), &ctx.alphabet, ctx.receiver)
    } else {
        detect_combined(&at_ue2, None, &ctx.alphabet, ctx.receiver)
    };
    let errors = (decision.index ^ i2).count_ones();
    TrialOutcome {
        relay_active,
        sic_correct,
        ue2_bit_errors: errors,
        bits: far.bits_per_symbol() as u32,
    }
}

/// Stopping rule of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub target_errors: u64,
    pub max_bits: u64,
}

impl StopRule {
    pub const MIN_TARGET_ERRORS: u64 = 100;

    pub fn validate(&self) -> Result<(), Error> {
        if self.target_errors < Self::MIN_TARGET_ERRORS {
            return Err(Error::Config("target_errors must be at least 100"));
        }
        if self.max_bits == 0 {
            return Err(Error::Config("max_bits must be positive"));
        }
        Ok(())
    }
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { target_errors: 2000, max_bits: 100_000_000 }
    }
}

/// Slots per batch, the unit of work and of the stopping decision.
pub const BATCH_SLOTS: u64 = 2048;

/// Additive counts over a set of slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchCounts {
    pub slots: u64,
    pub bits: u64,
    pub errors: u64,
    pub relay_active: u64,
    pub sic_correct: u64,
}

impl BatchCounts {
    pub fn add(&mut self, o: &BatchCounts) {
        self.slots += o.slots;
        self.bits += o.bits;
        self.errors += o.errors;
        self.relay_active += o.relay_active;
        self.sic_correct += o.sic_correct;
    }
}

/// One batch of a campaign: which slots it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub index: u64,
    pub start: u64,
    pub end: u64,
}

impl BatchSpec {
    pub fn slots(&self) -> Range<u64> {
        self.start..self.end
    }
}

/// Batch layout of a campaign that runs to `max_slots` at most.
pub fn batch_spec(index: u64, max_slots: u64) -> Option<BatchSpec> {
    let start = index.checked_mul(BATCH_SLOTS)?;
    if start >= max_slots {
        return None;
    }
    Some(BatchSpec { index, start, end: (start + BATCH_SLOTS).min(max_slots) })
}

pub fn run_batch(ctx: &SimContext, rng: &SlotRng, spec: &BatchSpec) -> BatchCounts {
    let mut c = BatchCounts::default();
    for slot in spec.slots() {
        let o = run_slot(ctx, &mut rng.stream(slot));
        c.slots += 1;
        c.bits += u64::from(o.bits);
        c.errors += u64::from(o.ue2_bit_errors);
        c.relay_active += u64::from(o.relay_active);
        c.sic_correct += u64::from(o.sic_correct);
    }
    c
}

/// Runs waves of batches. Implementations may run a wave's batches
/// concurrently but must return their counts in input order.
pub trait BatchExecutor {
    /// Batches handed over per call.
    fn wave_size(&self) -> usize;

    fn run_wave(&self, ctx: &SimContext, rng: &SlotRng, batches: &[BatchSpec]) -> Vec<BatchCounts>;
}

/// Runs batches one at a time on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchExecutor for Sequential {
    fn wave_size(&self) -> usize {
        1
    }

    fn run_wave(&self, ctx: &SimContext, rng: &SlotRng, batches: &[BatchSpec]) -> Vec<BatchCounts> {
        batches.iter().map(|b| run_batch(ctx, rng, b)).collect()
    }
}

/// Outcome of a campaign at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub ber: f64,
    /// Wald standard error `√(p̂(1−p̂)/n)` over bits.
    pub std_err: f64,
    pub bits_simulated: u64,
    pub errors_observed: u64,
    pub slots: u64,
    pub relay_active_slots: u64,
    pub relay_active_fraction: f64,
    /// Wald standard error of the relay-active fraction over slots.
    pub relay_active_std_err: f64,
    /// Fraction of slots in which UE1 decided the far symbol correctly.
    pub sic_correct_fraction: f64,
    /// `max_bits` reached with no error: BER below resolution.
    pub unresolved: bool,
    pub sinr_th_used: Option<f64>,
}

fn wald(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let p = k as f64 / n as f64;
    (p, libm::sqrt(p * (1.0 - p) / n as f64))
}

impl CampaignResult {
    pub fn from_counts(c: &BatchCounts, sinr_th_used: Option<f64>) -> Self {
        let (ber, std_err) = wald(c.errors, c.bits);
        let (frac, frac_se) = wald(c.relay_active, c.slots);
        CampaignResult {
            ber,
            std_err,
            bits_simulated: c.bits,
            errors_observed: c.errors,
            slots: c.slots,
            relay_active_slots: c.relay_active,
            relay_active_fraction: frac,
            relay_active_std_err: frac_se,
            sic_correct_fraction: wald(c.sic_correct, c.slots).0,
            unresolved: c.errors == 0,
            sinr_th_used,
        }
    }
}

/// Runs slots until `target_errors` bit errors or `max_bits` bits.
pub fn run_campaign<E: BatchExecutor + ?Sized>(
    ctx: &SimContext,
    stop: StopRule,
    master_seed: u64,
    executor: &E,
) -> Result<CampaignResult, Error> {
    stop.validate()?;
    let bits_per_slot = u64::from(ctx.bits_per_slot());
    let max_slots = stop.max_bits.div_ceil(bits_per_slot);
    let rng = SlotRng::new(master_seed);
    let wave = executor.wave_size().max(1) as u64;
    let mut total = BatchCounts::default();
    let mut next = 0u64;
    'outer: loop {
        let specs: Vec<BatchSpec> = (next..next + wave).map_while(|k| batch_spec(k, max_slots)).collect();
        if specs.is_empty() {
            break;
        }
        next += specs.len() as u64;
        for counts in executor.run_wave(ctx, &rng, &specs) {
            total.add(&counts);
            if total.errors >= stop.target_errors || total.bits >= stop.max_bits {
                break 'outer;
            }
        }
    }
    Ok(CampaignResult::from_counts(&total, ctx.sinr_th_used()))
}
