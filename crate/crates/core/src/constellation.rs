//! Gray-mapped constellations, two-user superposition and ML detection.
//!
//! Bit labels are packed MSB-first into the symbol index, so the number of
//! bit errors between two decisions is `(a ^ b).count_ones()`.
//!
//! | scheme | label → point |
//! |--------|---------------|
//! | BPSK   | `0 → +1`, `1 → −1` |
//! | QPSK   | `b0 b1 → ((1−2b0) + j(1−2b1))/√2` |
//! | 16-QAM | `b0 b1` on I, `b2 b3` on Q; per axis `00 → +3, 01 → +1, 11 → −1, 10 → −3`, scaled by `1/√10` |

use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::Error;

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/√10

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const BPSK: [Complex64; 2] = [c(1.0, 0.0), c(-1.0, 0.0)];

const QPSK: [Complex64; 4] = [
    c(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    c(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    c(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Gray level for a 2-bit axis label.
const fn qam16_level(label: usize) -> f64 {
    match label {
        0b00 => 3.0,
        0b01 => 1.0,
        0b11 => -1.0,
        _ => -3.0,
    }
}

const QAM16: [Complex64; 16] = {
    let mut pts = [c(0.0, 0.0); 16];
    let mut i = 0;
    while i < 16 {
        pts[i] = c(
            qam16_level(i >> 2) * QAM16_SCALE,
            qam16_level(i & 0b11) * QAM16_SCALE,
        );
        i += 1;
    }
    pts
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bpsk,
    Qpsk,
    Qam16,
}

impl Scheme {
    pub const fn order(self) -> usize {
        match self {
            Scheme::Bpsk => 2,
            Scheme::Qpsk => 4,
            Scheme::Qam16 => 16,
        }
    }

    pub const fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Bpsk => 1,
            Scheme::Qpsk => 2,
            Scheme::Qam16 => 4,
        }
    }

    /// Unit average energy constellation, indexed by packed bit label.
    pub fn points(self) -> &'static [Complex64] {
        match self {
            Scheme::Bpsk => &BPSK,
            Scheme::Qpsk => &QPSK,
            Scheme::Qam16 => &QAM16,
        }
    }

    pub fn point(self, index: usize) -> Complex64 {
        self.points()[index]
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bpsk => "BPSK",
            Scheme::Qpsk => "QPSK",
            Scheme::Qam16 => "16-QAM",
        }
    }

    /// Pack a bit vector (values 0/1, MSB first) into a symbol index.
    pub fn index_of(self, bits: &[u8]) -> Result<usize, Error> {
        let expected = self.bits_per_symbol();
        if bits.len() != expected {
            return Err(Error::InputShape { expected, got: bits.len() });
        }
        bits.iter().try_fold(0usize, |acc, &b| match b {
            0 | 1 => Ok((acc << 1) | b as usize),
            other => Err(Error::NotABit(other)),
        })
    }

    pub fn bits_of(self, index: usize) -> SymbolBits {
        SymbolBits::from_index(index, self.bits_per_symbol())
    }
}

/// Gray-mapped unit-energy point for one symbol's worth of bits.
pub fn modulate(bits: &[u8], scheme: Scheme) -> Result<Complex64, Error> {
    scheme.index_of(bits).map(|i| scheme.point(i))
}

/// Single-user nearest-point demapper (`h = 1`).
pub fn demodulate(y: Complex64, scheme: Scheme) -> SymbolBits {
    let idx = argmin(scheme.points().iter().map(|p| (y - p).norm_sqr()));
    scheme.bits_of(idx)
}

/// Bit label of a decided symbol, at most four bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolBits {
    bits: [u8; 4],
    len: usize,
}

impl SymbolBits {
    fn from_index(index: usize, len: usize) -> Self {
        let mut bits = [0u8; 4];
        for (k, b) in bits.iter_mut().take(len).enumerate() {
            *b = ((index >> (len - 1 - k)) & 1) as u8;
        }
        SymbolBits { bits, len }
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits[..self.len]
    }
}

/// One of the six near/far constellation pairings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mode(u8);

impl Mode {
    pub const ALL: [Mode; 6] = [Mode(1), Mode(2), Mode(3), Mode(4), Mode(5), Mode(6)];

    pub fn new(id: u8) -> Result<Self, Error> {
        if (1..=6).contains(&id) {
            Ok(Mode(id))
        } else {
            Err(Error::UnknownMode(id))
        }
    }

    pub const fn id(self) -> u8 {
        self.0
    }

    /// Constellation of the near user (UE1).
    pub const fn near(self) -> Scheme {
        match self.0 {
            1 | 2 => Scheme::Bpsk,
            3 | 4 => Scheme::Qpsk,
            _ => Scheme::Qam16,
        }
    }

    /// Constellation of the far user (UE2).
    pub const fn far(self) -> Scheme {
        match self.0 {
            1 | 3 | 5 => Scheme::Bpsk,
            _ => Scheme::Qpsk,
        }
    }
}

impl core::fmt::Display for Mode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

const PA_SUM_TOL: f64 = 1e-12;

/// Power split between the near (`a1`) and far (`a2`) user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocation {
    a1: f64,
    a2: f64,
}

impl PowerAllocation {
    /// Requires `a1 + a2 = 1` and `0 ≤ a1 < a2`. `a1 = 0` is accepted as the
    /// degenerate single-user split.
    pub fn new(a1: f64, a2: f64) -> Result<Self, Error> {
        if !(a1.is_finite() && a2.is_finite()) || a1 < 0.0 {
            return Err(Error::Config("power fractions must be finite and non-negative"));
        }
        if (a1 + a2 - 1.0).abs() > PA_SUM_TOL {
            return Err(Error::Config("power fractions must sum to 1"));
        }
        if a1 >= a2 {
            return Err(Error::Config("near-user fraction a1 must be below a2"));
        }
        Ok(PowerAllocation { a1, a2 })
    }

    pub fn from_near_share(a1: f64) -> Result<Self, Error> {
        Self::new(a1, 1.0 - a1)
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperposedSymbol {
    /// `√a1·x1 + √a2·x2`, before transmit-power scaling.
    pub composite: Complex64,
    pub near_index: usize,
    pub far_index: usize,
}

pub fn superpose(
    bits1: &[u8],
    bits2: &[u8],
    pa: &PowerAllocation,
    mode: Mode,
) -> Result<SuperposedSymbol, Error> {
    let near_index = mode.near().index_of(bits1)?;
    let far_index = mode.far().index_of(bits2)?;
    Ok(SuperposedSymbol {
        composite: composite_point(mode, pa, near_index, far_index),
        near_index,
        far_index,
    })
}

fn composite_point(mode: Mode, pa: &PowerAllocation, near: usize, far: usize) -> Complex64 {
    mode.near().point(near) * libm::sqrt(pa.a1) + mode.far().point(far) * libm::sqrt(pa.a2)
}

/// All `M1·M2` superposed points; entry `near·M2 + far`.
#[derive(Debug, Clone)]
pub struct CompositeAlphabet {
    mode: Mode,
    points: Vec<Complex64>,
    far_points: &'static [Complex64],
}

impl CompositeAlphabet {
    pub fn new(mode: Mode, pa: &PowerAllocation) -> Self {
        let m1 = mode.near().order();
        let m2 = mode.far().order();
        let points = (0..m1 * m2)
            .map(|k| composite_point(mode, pa, k / m2, k % m2))
            .collect();
        CompositeAlphabet { mode, points, far_points: mode.far().points() }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, near: usize, far: usize) -> Complex64 {
        self.points[near * self.far_points.len() + far]
    }

    fn far_of(&self, composite_index: usize) -> usize {
        composite_index % self.far_points.len()
    }
}

/// A received sample together with the channel and transmit amplitude that
/// produced it: `y = amplitude·h·s + n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub y: Complex64,
    pub h: Complex64,
    pub amplitude: f64,
}

/// Decided far-user symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FarDecision {
    pub index: usize,
    pub scheme: Scheme,
}

impl FarDecision {
    pub fn bits(&self) -> SymbolBits {
        self.scheme.bits_of(self.index)
    }
}

/// Index of the smallest value; ties keep the lowest index.
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (k, v) in values.enumerate() {
        if v < best {
            best = v;
            best_idx = k;
        }
    }
    best_idx
}

/// Joint ML over the composite alphabet at the near user; only the far
/// component of the winning pair is returned.
pub fn sic_detect_far(obs: &Observation, alphabet: &CompositeAlphabet) -> FarDecision {
    let g = obs.h * obs.amplitude;
    let best = argmin(alphabet.points.iter().map(|&p| (obs.y - g * p).norm_sqr()));
    FarDecision { index: alphabet.far_of(best), scheme: alphabet.mode.far() }
}

/// How the far user merges the direct and relayed observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Receiver {
    /// Joint ML over `(x1, x2)` using both observations separately,
    /// assuming the relay forwarded the hypothesised `x2`.
    #[default]
    JointMl,
    /// ML on the single combined statistic `y_d·h_d* + y_r·h_r*`.
    ScalarMrc,
}

/// Far-user decision from the direct-link observation and, when the relay
/// was active, the relayed one. The relay hypothesis is always the
/// hypothesised `x2`, since the forwarded symbol is unknown at the receiver.
pub fn detect_combined(
    direct: &Observation,
    relay: Option<&Observation>,
    alphabet: &CompositeAlphabet,
    receiver: Receiver,
) -> FarDecision {
    let m2 = alphabet.far_points.len();
    let best = match (relay, receiver) {
        (None, _) => return sic_detect_far(direct, alphabet),
        (Some(r), Receiver::JointMl) => {
            let gd = direct.h * direct.amplitude;
            let gr = r.h * r.amplitude;
            let mut relay_metric = [0.0; 4];
            for (m, s) in relay_metric.iter_mut().zip(alphabet.far_points) {
                *m = (r.y - gr * s).norm_sqr();
            }
            argmin(
                alphabet
                    .points
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| (direct.y - gd * p).norm_sqr() + relay_metric[k % m2]),
            )
        }
        (Some(r), Receiver::ScalarMrc) => {
            let z = direct.y * direct.h.conj() + r.y * r.h.conj();
            let wd = direct.amplitude * direct.h.norm_sqr();
            let wr = r.amplitude * r.h.norm_sqr();
            argmin(
                alphabet
                    .points
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| (z - (p * wd + alphabet.far_points[k % m2] * wr)).norm_sqr()),
            )
        }
    };
    FarDecision { index: alphabet.far_of(best), scheme: alphabet.mode.far() }
}
