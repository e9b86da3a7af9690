use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tbs_noma_std::experiment::{coefficient_table, curve_csv, curve_rows, threshold_csv, threshold_rows, write_file};
use tbs_noma_std::parallel::{default_workers, RayonExecutor};
use tbs_noma_std::spec::{ExperimentSpec, ModeSelection, ModeValue, PolicySpec, SpecFile};
use tbs_noma_std::validate::{self, Profile, ValidateOptions};
use tbs_noma_std::CliError;

#[derive(Parser)]
#[command(name = "tbs-noma", version, about = "Threshold-based selective cooperative NOMA: analytic BER, simulation and optimum thresholds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER against SNR: analytic and Monte Carlo, one CSV per mode.
    Curve(SweepArgs),
    /// Closed-form and brute-force optimum thresholds against SNR.
    Threshold(SweepArgs),
    /// Print the error-probability coefficients of a mode.
    Table {
        #[arg(long, default_value = "1")]
        mode: ModeSelection,
        #[arg(long, default_value_t = 0.1)]
        a1: f64,
    },
    /// Run the self checks; exits with 1 if any fails.
    Validate {
        #[arg(long, default_value = "quick")]
        profile: Profile,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        /// Scale all β under test by this factor (negative control).
        #[arg(long, hide = true)]
        corrupt_beta: Option<f64>,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1..6 or "all".
    #[arg(long)]
    mode: Option<ModeSelection>,
    #[arg(long)]
    a1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_s1_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_s2_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma_r_db: Option<f64>,
    /// Pr/Ps.
    #[arg(long)]
    relay_power_ratio: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_stop: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// fixed:<v> | optimum | always | never | perfect-sic
    #[arg(long)]
    policy: Option<PolicySpec>,
    /// joint-ml | scalar-mrc
    #[arg(long)]
    receiver: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    target_errors: Option<u64>,
    #[arg(long)]
    max_bits: Option<u64>,
    /// Points in the coarse threshold search grid.
    #[arg(long)]
    grid_steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

impl SweepArgs {
    fn spec(&self, default_out: &str) -> Result<ExperimentSpec, CliError> {
        let base = match &self.config {
            Some(p) => SpecFile::load(p)?,
            None => SpecFile::default(),
        };
        let mut flags = SpecFile::default();
        flags.link.mode = self.mode.map(|m| ModeValue::Name(m.to_string()));
        flags.link.a1 = self.a1;
        flags.link.sigma_s1_db = self.sigma_s1_db;
        flags.link.sigma_s2_db = self.sigma_s2_db;
        flags.link.sigma_r_db = self.sigma_r_db;
        flags.link.relay_power_ratio = self.relay_power_ratio;
        flags.sweep.snr_start = self.snr_start;
        flags.sweep.snr_stop = self.snr_stop;
        flags.sweep.snr_step = self.snr_step;
        flags.sweep.grid_steps = self.grid_steps;
        flags.sim.policy = self.policy.map(|p| p.to_string());
        flags.sim.receiver = self.receiver.clone();
        flags.sim.seed = self.seed;
        flags.sim.target_errors = self.target_errors;
        flags.sim.max_bits = self.max_bits;
        flags.output.out = self.out.clone();
        ExperimentSpec::resolve(&base.overlay(flags), default_out)
    }

    fn executor(&self) -> Result<RayonExecutor, CliError> {
        RayonExecutor::new(self.workers.unwrap_or_else(default_workers))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Curve(args) => {
            let spec = args.spec("curve.csv")?;
            let exec = args.executor()?;
            for mode in spec.mode.modes() {
                let rows = curve_rows(&spec, mode, &exec)?;
                let path = spec.out_for(mode);
                write_file(&path, &curve_csv(&spec, mode, &rows)?)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Threshold(args) => {
            let spec = args.spec("threshold.csv")?;
            let exec = args.executor()?;
            for mode in spec.mode.modes() {
                let rows = threshold_rows(&spec, mode, &exec)?;
                let path = spec.out_for(mode);
                write_file(&path, &threshold_csv(&spec, mode, &rows)?)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Table { mode, a1 } => {
            for m in mode.modes() {
                print!("{}", coefficient_table(m, a1)?);
            }
        }
        Command::Validate { profile, seed, workers, corrupt_beta } => {
            let exec = RayonExecutor::new(workers.unwrap_or_else(default_workers))?;
            let report = validate::run(&ValidateOptions { profile, seed, corrupt_beta }, &exec);
            println!("{report}");
            if !report.passed() {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
                return Err(CliError::Validation(failed.join("; ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tbs_noma_std::validate::QUAD_SIC;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("tbs-noma").chain(args.iter().copied())).unwrap()
    }

    // The output path is echoed into the CSV header, so comparisons reuse one path.
    fn sweep(out: &std::path::Path, extra: &[&str]) -> Vec<u8> {
        let out_s = out.to_str().unwrap().to_owned();
        let mut args = vec!["curve", "--mode", "2", "--target-errors", "100", "--max-bits", "200000", "--out", &out_s];
        args.extend_from_slice(extra);
        run(cli(&args)).unwrap();
        std::fs::read(out).unwrap()
    }

    #[test]
    fn table_lists_coefficients() {
        let t = coefficient_table(tbs_noma_core::constellation::Mode::new(1).unwrap(), 0.1).unwrap();
        assert!(t.contains("0.8") && t.contains("3.2"));
        let t = coefficient_table(tbs_noma_core::constellation::Mode::new(2).unwrap(), 0.1).unwrap();
        assert!(t.lines().last().unwrap().ends_with("0.9"));
        assert!(run(cli(&["table", "--mode", "all"])).is_ok());
    }

    #[test]
    fn invalid_power_allocation_exits_with_config_code() {
        let e = run(cli(&["table", "--mode", "6", "--a1", "0.4"])).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = run(cli(&["curve", "--a1", "0.7"])).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(Cli::try_parse_from(["tbs-noma", "curve", "--policy", "sometimes"]).is_err());
    }

    #[test]
    fn malformed_config_exits_with_config_code() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "[link]\nmodee = 1\n").unwrap();
        let e = run(cli(&["curve", "--config", p.to_str().unwrap()])).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let missing = dir.path().join("missing.toml");
        assert_eq!(run(cli(&["curve", "--config", missing.to_str().unwrap()])).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn csv_is_byte_identical_across_runs_and_workers() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("curve.csv");
        let a = sweep(&out, &["--snr-stop", "10", "--workers", "1"]);
        let b = sweep(&out, &["--snr-stop", "10", "--workers", "1"]);
        let c = sweep(&out, &["--snr-stop", "10", "--workers", "4"]);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn single_point_sweep_writes_one_row() {
        let dir = tempfile::tempdir().unwrap();
        let csv = String::from_utf8(sweep(&dir.path().join("one.csv"), &["--snr-start", "10", "--snr-stop", "10"])).unwrap();
        let data: Vec<_> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2, "{csv}");
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[link]\nmode = 3\na1 = 0.2\n[sim]\nseed = 5\n").unwrap();
        let c = cli(&["threshold", "--config", p.to_str().unwrap(), "--seed", "9"]);
        let Command::Threshold(args) = c.command else { unreachable!() };
        let s = args.spec("t.csv").unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.a1, 0.2);
        assert_eq!(s.mode.modes()[0].id(), 3);
    }

    #[test]
    fn corrupted_coefficients_fail_validation() {
        let exec = RayonExecutor::new(2).unwrap();
        let opts = ValidateOptions { profile: Profile::Quick, seed: 1, corrupt_beta: Some(1.5) };
        let report = validate::run(&opts, &exec);
        assert!(!report.passed());
        assert!(!report.check(QUAD_SIC).unwrap().passed);
    }
}
