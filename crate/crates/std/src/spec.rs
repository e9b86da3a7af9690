//! Experiment specification: config file schema, flag overrides, validation.
//!
//! Config files are TOML with four optional sections; every key is optional
//! and command-line flags win over file values.
//!
//! ```toml
//! [link]
//! mode = 3                # 1..6 or "all"
//! a1 = 0.2
//! sigma_s1_db = 0.0
//! sigma_s2_db = 10.0
//! sigma_r_db = 10.0
//! relay_power_ratio = 0.5
//!
//! [sweep]
//! snr_start = 0.0
//! snr_stop = 30.0
//! snr_step = 5.0
//! grid_steps = 200        # threshold search grid
//!
//! [sim]
//! policy = "fixed:2"      # fixed:<v> | optimum | always | never | perfect-sic
//! receiver = "joint-ml"   # joint-ml | scalar-mrc
//! seed = 1
//! target_errors = 2000
//! max_bits = 100000000
//!
//! [output]
//! out = "curve.csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tbs_noma_core::analytic::{ModeCoefficients, NetworkConfig};
use tbs_noma_core::constellation::{Mode, PowerAllocation, Receiver};
use tbs_noma_core::sim::{RelayPolicy, StopRule};

use crate::error::CliError;

/// `--policy` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Fixed(f64),
    Optimum,
    Always,
    Never,
    PerfectSic,
}

impl PolicySpec {
    pub fn to_relay_policy(self) -> RelayPolicy {
        match self {
            PolicySpec::Fixed(v) => RelayPolicy::FixedThreshold(v),
            PolicySpec::Optimum => RelayPolicy::OptimumThreshold,
            PolicySpec::Always => RelayPolicy::AlwaysRelay,
            PolicySpec::Never => RelayPolicy::NeverRelay,
            PolicySpec::PerfectSic => RelayPolicy::PerfectSic,
        }
    }
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "optimum" => Ok(PolicySpec::Optimum),
            "always" => Ok(PolicySpec::Always),
            "never" => Ok(PolicySpec::Never),
            "perfect-sic" => Ok(PolicySpec::PerfectSic),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| format!("unknown policy '{s}'"))?
                    .parse::<f64>()
                    .map_err(|e| format!("bad fixed threshold in '{s}': {e}"))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(format!("fixed threshold must be finite and >= 0, got {v}"));
                }
                Ok(PolicySpec::Fixed(v))
            }
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Fixed(v) => write!(f, "fixed:{v}"),
            PolicySpec::Optimum => f.write_str("optimum"),
            PolicySpec::Always => f.write_str("always"),
            PolicySpec::Never => f.write_str("never"),
            PolicySpec::PerfectSic => f.write_str("perfect-sic"),
        }
    }
}

/// `--mode` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelection {
    One(Mode),
    All,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::One(m) => vec![m],
            ModeSelection::All => Mode::ALL.to_vec(),
        }
    }
}

impl FromStr for ModeSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(ModeSelection::All);
        }
        let id: u8 = s.parse().map_err(|_| format!("mode must be 1..6 or 'all', got '{s}'"))?;
        Mode::new(id).map(ModeSelection::One).map_err(|e| e.to_string())
    }
}

impl fmt::Display for ModeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSelection::One(m) => write!(f, "{}", m.id()),
            ModeSelection::All => f.write_str("all"),
        }
    }
}

fn parse_receiver(s: &str) -> Result<Receiver, String> {
    match s {
        "joint-ml" => Ok(Receiver::JointMl),
        "scalar-mrc" => Ok(Receiver::ScalarMrc),
        _ => Err(format!("receiver must be 'joint-ml' or 'scalar-mrc', got '{s}'")),
    }
}

fn receiver_name(r: Receiver) -> &'static str {
    match r {
        Receiver::JointMl => "joint-ml",
        Receiver::ScalarMrc => "scalar-mrc",
    }
}

/// Mode given as a number or as `"all"` in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeValue {
    Id(u8),
    Name(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub mode: Option<ModeValue>,
    pub a1: Option<f64>,
    pub sigma_s1_db: Option<f64>,
    pub sigma_s2_db: Option<f64>,
    pub sigma_r_db: Option<f64>,
    pub relay_power_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub snr_start: Option<f64>,
    pub snr_stop: Option<f64>,
    pub snr_step: Option<f64>,
    pub grid_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub policy: Option<String>,
    pub receiver: Option<String>,
    pub seed: Option<u64>,
    pub target_errors: Option<u64>,
    pub max_bits: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub out: Option<PathBuf>,
}

/// Raw, partially specified settings from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecFile {
    pub link: LinkSection,
    pub sweep: SweepSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Values present in `other` replace those in `self`.
    pub fn overlay(mut self, other: SpecFile) -> Self {
        macro_rules! take {
            ($($sec:ident . $field:ident),* $(,)?) => {
                $(if other.$sec.$field.is_some() { self.$sec.$field = other.$sec.$field; })*
            };
        }
        take!(
            link.mode, link.a1, link.sigma_s1_db, link.sigma_s2_db, link.sigma_r_db, link.relay_power_ratio,
            sweep.snr_start, sweep.snr_stop, sweep.snr_step, sweep.grid_steps,
            sim.policy, sim.receiver, sim.seed, sim.target_errors, sim.max_bits,
            output.out,
        );
        self
    }
}

/// SNR sweep in dB, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SnrSweep {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// Fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: ModeSelection,
    pub a1: f64,
    pub sigma_s1_db: f64,
    pub sigma_s2_db: f64,
    pub sigma_r_db: f64,
    pub relay_power_ratio: f64,
    pub snr: SnrSweep,
    pub grid_steps: usize,
    pub policy: PolicySpec,
    pub receiver: Receiver,
    pub seed: u64,
    pub stop: StopRule,
    pub out: PathBuf,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentSpec {
    pub fn resolve(file: &SpecFile, default_out: &str) -> Result<Self, CliError> {
        let mode = match &file.link.mode {
            None => ModeSelection::One(Mode::new(1).expect("mode 1 exists")),
            Some(ModeValue::Id(id)) => id.to_string().parse().map_err(bad)?,
            Some(ModeValue::Name(s)) => s.parse().map_err(bad)?,
        };
        let spec = ExperimentSpec {
            mode,
            a1: file.link.a1.unwrap_or(0.1),
            sigma_s1_db: file.link.sigma_s1_db.unwrap_or(0.0),
            sigma_s2_db: file.link.sigma_s2_db.unwrap_or(0.0),
            sigma_r_db: file.link.sigma_r_db.unwrap_or(0.0),
            relay_power_ratio: file.link.relay_power_ratio.unwrap_or(0.5),
            snr: SnrSweep {
                start: file.sweep.snr_start.unwrap_or(0.0),
                stop: file.sweep.snr_stop.unwrap_or(30.0),
                step: file.sweep.snr_step.unwrap_or(5.0),
            },
            grid_steps: file.sweep.grid_steps.unwrap_or(200),
            policy: file.sim.policy.as_deref().unwrap_or("fixed:2").parse().map_err(bad)?,
            receiver: parse_receiver(file.sim.receiver.as_deref().unwrap_or("joint-ml")).map_err(bad)?,
            seed: file.sim.seed.unwrap_or(1),
            stop: StopRule {
                target_errors: file.sim.target_errors.unwrap_or(2000),
                max_bits: file.sim.max_bits.unwrap_or(100_000_000),
            },
            out: file.output.out.clone().unwrap_or_else(|| PathBuf::from(default_out)),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.a1 > 0.0 && self.a1 < 0.5) {
            return Err(bad(format!("a1 must lie in (0, 0.5), got {}", self.a1)));
        }
        let finite = [self.sigma_s1_db, self.sigma_s2_db, self.sigma_r_db, self.snr.start, self.snr.stop];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(bad("dB values must be finite"));
        }
        if !(self.relay_power_ratio > 0.0 && self.relay_power_ratio.is_finite()) {
            return Err(bad("relay power ratio must be positive"));
        }
        if !(self.snr.step > 0.0 && self.snr.step.is_finite()) {
            return Err(bad("snr step must be positive"));
        }
        if self.snr.stop < self.snr.start {
            return Err(bad("snr stop must not be below snr start"));
        }
        if self.grid_steps < 3 {
            return Err(bad("grid_steps must be at least 3"));
        }
        self.stop.validate().map_err(|e| bad(e.to_string()))?;
        for m in self.mode.modes() {
            ModeCoefficients::for_allocation(m, &self.power_allocation()?).map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    pub fn power_allocation(&self) -> Result<PowerAllocation, CliError> {
        PowerAllocation::from_near_share(self.a1).map_err(|e| bad(e.to_string()))
    }

    pub fn network(&self, snr_db: f64) -> Result<NetworkConfig, CliError> {
        NetworkConfig::from_db(
            self.a1,
            snr_db,
            self.sigma_s1_db,
            self.sigma_s2_db,
            self.sigma_r_db,
            self.relay_power_ratio,
        )
        .map_err(|e| bad(e.to_string()))
    }

    /// Output file for one mode: the configured path, or with `_mode<k>`
    /// before the extension when several modes are swept.
    pub fn out_for(&self, mode: Mode) -> PathBuf {
        if let ModeSelection::One(_) = self.mode {
            return self.out.clone();
        }
        let stem = self.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let name = match self.out.extension() {
            Some(ext) => format!("{stem}_mode{}.{}", mode.id(), ext.to_string_lossy()),
            None => format!("{stem}_mode{}", mode.id()),
        };
        self.out.with_file_name(name)
    }

    /// The spec as a complete config file, for embedding in outputs.
    pub fn to_spec_file(&self) -> SpecFile {
        SpecFile {
            link: LinkSection {
                mode: Some(match self.mode {
                    ModeSelection::One(m) => ModeValue::Id(m.id()),
                    ModeSelection::All => ModeValue::Name("all".into()),
                }),
                a1: Some(self.a1),
                sigma_s1_db: Some(self.sigma_s1_db),
                sigma_s2_db: Some(self.sigma_s2_db),
                sigma_r_db: Some(self.sigma_r_db),
                relay_power_ratio: Some(self.relay_power_ratio),
            },
            sweep: SweepSection {
                snr_start: Some(self.snr.start),
                snr_stop: Some(self.snr.stop),
                snr_step: Some(self.snr.step),
                grid_steps: Some(self.grid_steps),
            },
            sim: SimSection {
                policy: Some(self.policy.to_string()),
                receiver: Some(receiver_name(self.receiver).into()),
                seed: Some(self.seed),
                target_errors: Some(self.stop.target_errors),
                max_bits: Some(self.stop.max_bits),
            },
            output: OutputSection { out: Some(self.out.clone()) },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_spec_file()).expect("spec serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_round_trip() {
        for s in ["fixed:2", "fixed:0.5", "optimum", "always", "never", "perfect-sic"] {
            assert_eq!(s.parse::<PolicySpec>().unwrap().to_string(), s);
        }
        assert!("fixed:-1".parse::<PolicySpec>().is_err());
        assert!("fixed:x".parse::<PolicySpec>().is_err());
        assert!("sometimes".parse::<PolicySpec>().is_err());
    }

    #[test]
    fn mode_selection_parse() {
        assert_eq!("all".parse::<ModeSelection>().unwrap(), ModeSelection::All);
        assert_eq!("4".parse::<ModeSelection>().unwrap().modes()[0].id(), 4);
        assert!("7".parse::<ModeSelection>().is_err());
        assert!("x".parse::<ModeSelection>().is_err());
    }

    #[test]
    fn sweep_points_inclusive() {
        let s = SnrSweep { start: 0.0, stop: 30.0, step: 5.0 };
        assert_eq!(s.points(), vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        assert_eq!(SnrSweep { start: 7.0, stop: 7.0, step: 1.0 }.points(), vec![7.0]);
        assert_eq!(SnrSweep { start: 0.0, stop: 0.3, step: 0.1 }.points().len(), 4);
    }

    #[test]
    fn flags_override_file() {
        let file: SpecFile = toml::from_str("[link]\nmode = 3\na1 = 0.2\n[sim]\nseed = 5\n").unwrap();
        let mut flags = SpecFile::default();
        flags.sim.seed = Some(9);
        let spec = ExperimentSpec::resolve(&file.overlay(flags), "x.csv").unwrap();
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.a1, 0.2);
        assert_eq!(spec.mode, ModeSelection::One(Mode::new(3).unwrap()));
    }

    #[test]
    fn mode_all_in_file() {
        let file: SpecFile = toml::from_str("[link]\nmode = \"all\"\n").unwrap();
        let spec = ExperimentSpec::resolve(&file, "out/c.csv").unwrap();
        assert_eq!(spec.mode, ModeSelection::All);
        assert_eq!(spec.out_for(Mode::new(5).unwrap()), PathBuf::from("out/c_mode5.csv"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<SpecFile>("[link]\nalpha = 1\n").is_err());
    }

    #[test]
    fn invalid_specs() {
        let with = |t: &str| ExperimentSpec::resolve(&toml::from_str(t).unwrap(), "x.csv");
        assert!(with("[link]\na1 = 0.5\n").is_err());
        assert!(with("[sweep]\nsnr_step = 0.0\n").is_err());
        assert!(with("[sim]\ntarget_errors = 10\n").is_err());
        match with("[link]\nmode = 6\na1 = 0.4\n") {
            Err(CliError::Config(msg)) => assert!(msg.contains("mode 6") && msg.contains("term 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn toml_round_trip() {
        let spec = ExperimentSpec::resolve(&SpecFile::default(), "c.csv").unwrap();
        let again = ExperimentSpec::resolve(&toml::from_str(&spec.to_toml()).unwrap(), "other.csv").unwrap();
        assert_eq!(spec, again);
    }
}
