use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

use rcip_core::baselines::{BaselineMethod, BaselineParams};
use rcip_core::calibration::{
    calibrate, even_grid, linear_grid, log_grid, CalibrationConfig, RiskSpec,
};
use rcip_core::evaluation::{
    evaluate as evaluate_records, fwer_monte_carlo, help_rate_curve, MethodName, MethodParams,
    MetricsReport, MIN_FWER_TRIALS,
};
use rcip_core::io::{curves_csv, read_dataset, to_json_pretty, write_dataset, FORMAT_VERSION};
use rcip_core::sim::{generate_range, SyntheticGenerator, WorldConfig};
use rcip_core::{Execution, ParamPair};

use crate::{
    CalibrateArgs, CurvesArgs, EnvArg, EvaluateArgs, FwerArgs, GeneratorArg, GridArgs, SimulateArgs,
};

/// Common head of every JSON output.
#[derive(Serialize)]
struct Envelope<'a, C: Serialize, B: Serialize> {
    format_version: u32,
    command: &'a str,
    config: &'a C,
    #[serde(flatten)]
    body: B,
}

fn write_report<C: Serialize, B: Serialize>(
    path: &Path,
    command: &str,
    config: &C,
    body: B,
) -> Result<()> {
    let text = to_json_pretty(&Envelope {
        format_version: FORMAT_VERSION,
        command,
        config,
        body,
    })?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `<out>.meta.json`, for outputs whose own format has no room for metadata.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn load(path: &Path) -> Result<Vec<rcip_core::ScenarioRecord>> {
    read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let count = usize::try_from(args.episodes)?;
    let exec = Execution::default();
    let records = match args.env {
        EnvArg::Hallway => {
            let world = WorldConfig::new(args.preset.into(), args.seed);
            generate_range(&world, args.start, count, exec)?
        }
        env => {
            let generator = match env {
                EnvArg::Bernoulli => SyntheticGenerator::bernoulli(),
                EnvArg::Multistep => SyntheticGenerator::multistep(),
                EnvArg::Misspecified => SyntheticGenerator::misspecified(),
                EnvArg::Zero => SyntheticGenerator::ZeroLoss,
                EnvArg::Hallway => unreachable!(),
            };
            generator.generate(args.seed, args.start, count, exec)
        }
    };
    write_dataset(&args.out, &records)
        .with_context(|| format!("writing {}", args.out.display()))?;
    #[derive(Serialize)]
    struct Body {
        records: usize,
    }
    write_report(
        &sidecar_path(&args.out),
        "simulate",
        args,
        Body {
            records: records.len(),
        },
    )
}

fn build_config(grid: &GridArgs, risks: Vec<RiskSpec>) -> Result<CalibrationConfig> {
    let t = grid.theta_grid;
    let theta_grid = if t.log {
        log_grid(t.min, t.max, t.count)?
    } else {
        linear_grid(t.min, t.max, t.count)?
    };
    let config = CalibrationConfig {
        delta: grid.delta,
        lambda_grid: even_grid(usize::try_from(grid.lambda_grid)?),
        num_chains: match grid.chains {
            Some(c) => usize::try_from(c)?,
            None => theta_grid.len(),
        },
        theta_grid,
        risks,
    };
    config.validate()?;
    Ok(config)
}

fn risks(alpha_cov: f64, alpha_help: Option<f64>, level: crate::HelpLevelArg) -> Vec<RiskSpec> {
    let mut risks = vec![RiskSpec::miscoverage(alpha_cov)];
    if let Some(a) = alpha_help {
        risks.push(RiskSpec::help(a, level.into()));
    }
    risks
}

#[derive(Serialize)]
struct ValidPoint<'a> {
    lambda: f64,
    theta: f64,
    p_values: &'a [f64],
}

#[derive(Serialize)]
struct SelectedPoint<'a> {
    lambda: f64,
    theta: f64,
    empirical_risks: &'a [f64],
    p_values: &'a [f64],
    empirical_help: f64,
}

pub fn calibrate_cmd(args: &CalibrateArgs) -> Result<()> {
    let records = load(&args.data)?;
    let config = build_config(
        &args.grid,
        risks(args.alpha_cov, args.alpha_help, args.help_level),
    )?;
    let result = calibrate(&records, &config)?;

    #[derive(Serialize)]
    struct Body<'a> {
        records: usize,
        risks: &'a [RiskSpec],
        num_hypotheses: usize,
        num_chains: usize,
        level: f64,
        feasible: bool,
        valid_count: usize,
        selected: Option<SelectedPoint<'a>>,
        valid_params: Vec<ValidPoint<'a>>,
    }
    let selected = result.selected.map(|j| {
        let row = &result.table[j];
        SelectedPoint {
            lambda: row.params.lambda,
            theta: row.params.theta,
            empirical_risks: &row.empirical_risks,
            p_values: &row.p_values,
            empirical_help: row.empirical_help,
        }
    });
    let valid_params = result
        .valid_rows()
        .map(|row| ValidPoint {
            lambda: row.params.lambda,
            theta: row.params.theta,
            p_values: &row.p_values,
        })
        .collect();
    if !result.is_feasible() {
        eprintln!("warning: no grid point passed; the valid set is empty");
    }
    write_report(
        &args.out,
        "calibrate",
        args,
        Body {
            records: records.len(),
            risks: &config.risks,
            num_hypotheses: config.num_hypotheses(),
            num_chains: config.num_chains,
            level: result.level(),
            feasible: result.is_feasible(),
            valid_count: result.valid.len(),
            selected,
            valid_params,
        },
    )
}

/// What `--params` resolved to.
enum Resolved {
    Params(MethodParams),
    /// A calibrate result with an empty valid set.
    Infeasible(String),
}

fn parse_inline(raw: &str) -> Result<Vec<(String, f64)>> {
    raw.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("expected key=value, got {kv:?}"))?;
            let v: f64 = v
                .trim()
                .parse()
                .with_context(|| format!("value of {}", k.trim()))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn resolve_params(method: MethodName, raw: Option<&str>) -> Result<Resolved> {
    let baseline = method.baseline();
    let Some(raw) = raw else {
        return match baseline {
            Some(BaselineMethod::NoHelp) => Ok(Resolved::Params(MethodParams::Baseline(
                BaselineParams::no_help(),
            ))),
            _ => bail!("{method} needs --params"),
        };
    };
    if baseline == Some(BaselineMethod::NoHelp) {
        bail!("nohelp takes no parameters");
    }
    let path = Path::new(raw);
    if path.is_file() {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return from_file(method, &value);
    }
    if !raw.contains('=') {
        bail!("params file {raw} not found");
    }
    let pairs = parse_inline(raw)?;
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
    let keys: Vec<&str> = pairs.iter().map(|(k, _)| k.as_str()).collect();
    match baseline {
        None => {
            let (Some(lambda), Some(theta), 2) = (get("lambda"), get("theta"), keys.len()) else {
                bail!("rcip takes lambda=L,theta=T; got {}", keys.join(", "));
            };
            Ok(Resolved::Params(MethodParams::Rcip(ParamPair::new(
                lambda, theta,
            )?)))
        }
        Some(b) => {
            let (Some(threshold), 1) = (get("threshold"), keys.len()) else {
                bail!("{method} takes threshold=X; got {}", keys.join(", "));
            };
            Ok(Resolved::Params(MethodParams::Baseline(
                BaselineParams::new(b, threshold)?,
            )))
        }
    }
}

fn from_file(method: MethodName, value: &Value) -> Result<Resolved> {
    if value.get("command").and_then(Value::as_str) == Some("calibrate") {
        if method != MethodName::Rcip {
            bail!("a calibrate result only parameterizes rcip, not {method}");
        }
        let selected = value
            .get("selected")
            .ok_or_else(|| anyhow!("calibrate result has no selected field"))?;
        if selected.is_null() {
            return Ok(Resolved::Infeasible(
                "the calibration result has an empty valid set".into(),
            ));
        }
        let field = |k: &str| {
            selected
                .get(k)
                .and_then(Value::as_f64)
                .ok_or_else(|| anyhow!("selected point lacks {k}"))
        };
        return Ok(Resolved::Params(MethodParams::Rcip(ParamPair::new(
            field("lambda")?,
            field("theta")?,
        )?)));
    }
    let params: BaselineParams = serde_json::from_value(value.clone())
        .context("expected a calibrate result or baseline parameters")?;
    if Some(params.method) != method.baseline() {
        bail!("parameter file is for {:?}, not {method}", params.method);
    }
    params.validate()?;
    Ok(Resolved::Params(MethodParams::Baseline(params)))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let method: MethodName = args.method.into();
    let resolved = resolve_params(method, args.params.as_deref())?;
    let records = load(&args.data)?;
    match resolved {
        Resolved::Infeasible(reason) => {
            #[derive(Serialize)]
            struct Body {
                feasible: bool,
                method: MethodName,
                reason: String,
                records: usize,
            }
            eprintln!("warning: {reason}; writing an infeasible report");
            write_report(
                &args.out,
                "evaluate",
                args,
                Body {
                    feasible: false,
                    method,
                    reason,
                    records: records.len(),
                },
            )
        }
        Resolved::Params(params) => {
            let report = evaluate_records(&records, &params)?;
            #[derive(Serialize)]
            struct Body {
                feasible: bool,
                #[serde(flatten)]
                report: MetricsReport,
                step_metrics: &'static str,
            }
            write_report(
                &args.out,
                "evaluate",
                args,
                Body {
                    feasible: true,
                    report,
                    step_metrics: "pooled over all steps of all records; steps after an empty set count as failures",
                },
            )
        }
    }
}

pub fn curves(args: &CurvesArgs) -> Result<()> {
    let cal = load(&args.cal)?;
    let test = load(&args.test)?;
    // risks are replaced per target
    let template = build_config(&args.grid, vec![RiskSpec::miscoverage(0.5)])?;
    let mut points = Vec::new();
    for &m in &args.methods {
        points.extend(help_rate_curve(
            &cal,
            &test,
            m.into(),
            &args.targets,
            &template,
            Execution::default(),
        )?);
    }
    fs::write(&args.out, curves_csv(&points))
        .with_context(|| format!("writing {}", args.out.display()))?;
    #[derive(Serialize)]
    struct Body {
        rows: usize,
        simple_rule: &'static str,
        entropy_rule: &'static str,
    }
    write_report(
        &sidecar_path(&args.out),
        "curves",
        args,
        Body {
            rows: points.len(),
            simple_rule: "smallest cumulative-mass target on a 1/1000 grid whose calibration plan success reaches the target",
            entropy_rule: "largest entropy cutoff, among observed step entropies, whose calibration plan success reaches the target",
        },
    )
}

pub fn fwer(args: &FwerArgs) -> Result<()> {
    let generator = match args.generator {
        GeneratorArg::Bernoulli => SyntheticGenerator::bernoulli(),
        GeneratorArg::Multistep => SyntheticGenerator::multistep(),
        GeneratorArg::Zero => SyntheticGenerator::ZeroLoss,
    };
    let config = build_config(
        &args.grid,
        risks(args.alpha, args.alpha_help, args.help_level),
    )?;
    let trials = usize::try_from(args.trials)?;
    if trials < MIN_FWER_TRIALS {
        eprintln!("warning: {trials} trials is below the recommended {MIN_FWER_TRIALS}");
    }
    let report = fwer_monte_carlo(
        &generator,
        &config,
        usize::try_from(args.calibration_size)?,
        trials,
        args.seed,
        Execution::default(),
    )?;
    write_report(&args.out, "fwer", args, report)
}
