//! `rcip`: simulate datasets, calibrate, evaluate, trace help-rate curves
//! and check the error-rate guarantee by Monte Carlo.
//!
//! Exit codes: 0 on success (including an infeasible calibration), 2 on
//! usage errors, 1 on runtime errors.

mod commands;
mod config_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rcip_core::calibration::HelpLevel;
use rcip_core::evaluation::MethodName;
use rcip_core::sim::PredictorPreset;

#[derive(Parser, Debug)]
#[command(
    name = "rcip",
    version,
    about = "Risk-calibrated interactive planning pipelines"
)]
struct Cli {
    /// TOML file whose keys mirror the subcommand's flag names; explicit
    /// flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a JSONL scenario dataset
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Calibrate (lambda, theta) with Learn-then-Test
    #[command(args_override_self = true)]
    Calibrate(CalibrateArgs),
    /// Evaluate a method on a dataset
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Help rate against target plan success for several methods
    #[command(args_override_self = true)]
    Curves(CurvesArgs),
    /// Monte Carlo check of the family-wise error rate
    #[command(args_override_self = true)]
    Fwer(FwerArgs),
}

const SUBCOMMANDS: [&str; 5] = ["simulate", "calibrate", "evaluate", "curves", "fwer"];

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EnvArg {
    Hallway,
    Bernoulli,
    Multistep,
    Misspecified,
    Zero,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PresetArg {
    Weak,
    Medium,
    Converged,
}

impl From<PresetArg> for PredictorPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Weak => PredictorPreset::Weak,
            PresetArg::Medium => PredictorPreset::Medium,
            PresetArg::Converged => PredictorPreset::Converged,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Rcip,
    Knowno,
    Simple,
    Entropy,
    Nohelp,
}

impl From<MethodArg> for MethodName {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rcip => MethodName::Rcip,
            MethodArg::Knowno => MethodName::Knowno,
            MethodArg::Simple => MethodName::Simple,
            MethodArg::Entropy => MethodName::Entropy,
            MethodArg::Nohelp => MethodName::Nohelp,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HelpLevelArg {
    Plan,
    Step,
}

impl From<HelpLevelArg> for HelpLevel {
    fn from(h: HelpLevelArg) -> Self {
        match h {
            HelpLevelArg::Plan => HelpLevel::Plan,
            HelpLevelArg::Step => HelpLevel::Step,
        }
    }
}

/// Generators with closed-form risks.
#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GeneratorArg {
    Bernoulli,
    Multistep,
    Zero,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = EnvArg::Hallway)]
    env: EnvArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long)]
    seed: u64,
    /// Predictor quality for the hallway environment
    #[arg(long, value_enum, default_value_t = PresetArg::Medium)]
    preset: PresetArg,
    /// Index of the first episode; disjoint ranges give independent splits
    #[arg(long, default_value_t = 0)]
    start: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
struct ThetaGridArg {
    min: f64,
    max: f64,
    count: usize,
    log: bool,
}

fn parse_theta_grid(s: &str) -> Result<ThetaGridArg, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [min, max, count, scale] = parts[..] else {
        return Err("expected MIN,MAX,COUNT,log|lin".into());
    };
    let min: f64 = min.parse().map_err(|e| format!("MIN: {e}"))?;
    let max: f64 = max.parse().map_err(|e| format!("MAX: {e}"))?;
    let count: usize = count.parse().map_err(|e| format!("COUNT: {e}"))?;
    let log = match scale {
        "log" => true,
        "lin" => false,
        other => return Err(format!("scale must be log or lin, got {other}")),
    };
    if !(min > 0.0 && max >= min && max.is_finite()) || count == 0 {
        return Err("need 0 < MIN <= MAX and COUNT >= 1".into());
    }
    Ok(ThetaGridArg {
        min,
        max,
        count,
        log,
    })
}

fn parse_open_unit(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is not in (0, 1)"))
    }
}

/// Grid and error-rate settings shared by every command that calibrates.
#[derive(Args, Debug, Serialize)]
struct GridArgs {
    #[arg(long, default_value_t = 0.01, value_parser = parse_open_unit)]
    delta: f64,
    /// Number of evenly spaced thresholds on [0, 1]
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    lambda_grid: u64,
    /// Temperature grid as MIN,MAX,COUNT,log|lin
    #[arg(long, default_value = "0.001,10,5,log", value_parser = parse_theta_grid)]
    theta_grid: ThetaGridArg,
    /// Fixed-sequence chains; defaults to one per temperature
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    chains: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct CalibrateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_open_unit)]
    alpha_cov: f64,
    /// Also control the help rate at this level
    #[arg(long, value_parser = parse_open_unit)]
    alpha_help: Option<f64>,
    #[arg(long, value_enum, default_value_t = HelpLevelArg::Plan)]
    help_level: HelpLevelArg,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// A calibrate result or baseline parameter file, or inline
    /// `lambda=L,theta=T` / `threshold=X`
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CurvesArgs {
    #[arg(long)]
    cal: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    methods: Vec<MethodArg>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_open_unit)]
    targets: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct FwerArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, value_parser = parse_open_unit)]
    alpha: f64,
    #[arg(long, value_parser = parse_open_unit)]
    alpha_help: Option<f64>,
    #[arg(long, value_enum, default_value_t = HelpLevelArg::Plan)]
    help_level: HelpLevelArg,
    #[arg(long, value_enum)]
    generator: GeneratorArg,
    /// Calibration records per trial
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    calibration_size: u64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match config_file::expand(std::env::args_os().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Calibrate(a) => commands::calibrate_cmd(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Curves(a) => commands::curves(a),
        Command::Fwer(a) => commands::fwer(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn theta_grid_parsing() {
        assert_eq!(
            parse_theta_grid("0.001,10,5,log").unwrap(),
            ThetaGridArg {
                min: 0.001,
                max: 10.0,
                count: 5,
                log: true
            }
        );
        assert!(parse_theta_grid("0,10,5,log").is_err());
        assert!(parse_theta_grid("1,10,5").is_err());
        assert!(parse_theta_grid("1,10,5,cubic").is_err());
    }

    #[test]
    fn later_flags_override_earlier_ones() {
        let cli = Cli::try_parse_from([
            "rcip",
            "fwer",
            "--trials",
            "5",
            "--alpha",
            "0.1",
            "--generator",
            "zero",
            "--seed",
            "1",
            "--out",
            "x",
            "--trials",
            "7",
        ])
        .unwrap();
        let Command::Fwer(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.trials, 7);
    }

    #[test]
    fn unit_interval_flags_are_checked() {
        assert!(parse_open_unit("0.5").is_ok());
        assert!(parse_open_unit("1").is_err());
        assert!(parse_open_unit("0").is_err());
        assert!(parse_open_unit("x").is_err());
    }
}
