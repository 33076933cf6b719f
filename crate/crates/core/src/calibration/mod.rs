//! Learn-then-Test calibration of `(lambda, theta)`.
//!
//! Every grid point is a null hypothesis that some risk exceeds its level.
//! Each risk gets a Hoeffding-Bentkus p-value, a point's combined p-value is
//! the largest of them, and fixed-sequence testing turns the table into a
//! set of points whose risks are all controlled with probability `1 - delta`
//! over the draw of the calibration data.
//!
//! The grid is flattened temperature-major with `lambda` ascending inside
//! each temperature block. Miscoverage grows with `lambda`, so a chain that
//! starts at a low threshold walks toward riskier hypotheses.

pub mod fst;
pub mod loss;
pub mod profile;
pub mod pvalue;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::types::{validate_dataset, ParamPair, ScenarioRecord};

pub use fst::{chain_starts, fixed_sequence_test};
pub use loss::{empirical_risk, help_loss, miscoverage_loss, HelpLevel};
pub use profile::{RecordStats, ThetaProfile};
pub use pvalue::{binomial_cdf, h1, hb_pvalue, ln_binomial_cdf};

pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_LAMBDA_COUNT: usize = 2000;
pub const DEFAULT_THETA_MIN: f64 = 0.001;
pub const DEFAULT_THETA_MAX: f64 = 10.0;
pub const DEFAULT_THETA_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Miscoverage,
    HelpRate(HelpLevel),
}

impl RiskKind {
    pub fn loss(self, record: &ScenarioRecord, params: ParamPair) -> Result<f64> {
        match self {
            RiskKind::Miscoverage => miscoverage_loss(record, params),
            RiskKind::HelpRate(level) => help_loss(record, params, level),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub kind: RiskKind,
    pub alpha: f64,
}

impl RiskSpec {
    pub fn miscoverage(alpha: f64) -> Self {
        RiskSpec {
            kind: RiskKind::Miscoverage,
            alpha,
        }
    }

    pub fn help(alpha: f64, level: HelpLevel) -> Self {
        RiskSpec {
            kind: RiskKind::HelpRate(level),
            alpha,
        }
    }
}

/// `count` evenly spaced values `i / (count - 1)` on [0, 1].
pub fn even_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| i as f64 / (count - 1) as f64).collect(),
    }
}

/// `count` log-spaced values from `min` to `max`. Points that land on an
/// exact power of ten are snapped to it.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || count == 0 {
        return Err(Error::invalid(format!(
            "log grid needs 0 < min <= max and count >= 1, got {min}, {max}, {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.log10(), max.log10());
    Ok((0..count)
        .map(|i| {
            let e = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            let rounded = e.round();
            if (e - rounded).abs() < 1e-9 {
                10f64.powi(rounded as i32)
            } else if i == 0 {
                min
            } else if i == count - 1 {
                max
            } else {
                10f64.powf(e)
            }
        })
        .collect())
}

pub fn linear_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && max >= min) || count == 0 {
        return Err(Error::invalid(format!(
            "linear grid needs min <= max and count >= 1, got {min}, {max}, {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    Ok((0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            min * (1.0 - t) + max * t
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub delta: f64,
    pub lambda_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub num_chains: usize,
    pub risks: Vec<RiskSpec>,
}

impl CalibrationConfig {
    /// Defaults: `delta = 0.01`, 2000 thresholds on [0, 1], five
    /// temperatures log-spaced on [0.001, 10], one chain per temperature.
    pub fn with_risks(risks: Vec<RiskSpec>) -> Self {
        let theta_grid = log_grid(DEFAULT_THETA_MIN, DEFAULT_THETA_MAX, DEFAULT_THETA_COUNT)
            .expect("default grid");
        CalibrationConfig {
            delta: DEFAULT_DELTA,
            lambda_grid: even_grid(DEFAULT_LAMBDA_COUNT),
            num_chains: theta_grid.len(),
            theta_grid,
            risks,
        }
    }

    pub fn miscoverage(alpha_cov: f64) -> Self {
        Self::with_risks(vec![RiskSpec::miscoverage(alpha_cov)])
    }

    pub fn num_hypotheses(&self) -> usize {
        self.lambda_grid.len() * self.theta_grid.len()
    }

    /// Grid point `j` of the flattened temperature-major order.
    pub fn params_at(&self, j: usize) -> ParamPair {
        let n = self.lambda_grid.len();
        ParamPair {
            lambda: self.lambda_grid[j % n],
            theta: self.theta_grid[j / n],
        }
    }

    /// Help level used to rank valid points: that of the help risk when one
    /// is configured, plan level otherwise.
    pub fn selection_level(&self) -> HelpLevel {
        self.risks
            .iter()
            .find_map(|r| match r.kind {
                RiskKind::HelpRate(level) => Some(level),
                RiskKind::Miscoverage => None,
            })
            .unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta {} outside (0, 1)",
                self.delta
            )));
        }
        check_grid("lambda", &self.lambda_grid)?;
        check_grid("theta", &self.theta_grid)?;
        if let Some(l) = self.lambda_grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::invalid(format!(
                "lambda grid value {l} outside [0, 1]"
            )));
        }
        if let Some(t) = self.theta_grid.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::invalid(format!(
                "theta grid value {t} must be positive"
            )));
        }
        if self.num_chains == 0 || self.num_chains > self.num_hypotheses() {
            return Err(Error::invalid(format!(
                "num_chains {} must be in [1, {}]",
                self.num_chains,
                self.num_hypotheses()
            )));
        }
        if self.risks.is_empty() {
            return Err(Error::invalid("no risks to control"));
        }
        if self.risks.len() > 1 && self.risks[0].kind != RiskKind::Miscoverage {
            return Err(Error::invalid(
                "miscoverage must be the first risk when controlling several",
            ));
        }
        for r in &self.risks {
            if !(r.alpha > 0.0 && r.alpha < 1.0) {
                return Err(Error::invalid(format!("alpha {} outside (0, 1)", r.alpha)));
            }
        }
        Ok(())
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!(
            "{name} grid has a non-finite value"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "{name} grid must be strictly ascending"
        )));
    }
    Ok(())
}

/// One tested hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRow {
    pub params: ParamPair,
    /// One per configured risk, same order.
    pub empirical_risks: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Largest of `p_values`.
    pub combined_p: f64,
    /// Empirical help rate at the selection level.
    pub empirical_help: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub config: CalibrationConfig,
    /// Every grid point in flattened order.
    pub table: Vec<PValueRow>,
    /// Indices into `table` of the valid set, ascending.
    pub valid: Vec<usize>,
    /// Index into `table` of the chosen operating point.
    pub selected: Option<usize>,
}

impl CalibrationResult {
    pub fn valid_params(&self) -> Vec<ParamPair> {
        self.valid.iter().map(|&j| self.table[j].params).collect()
    }

    pub fn valid_rows(&self) -> impl Iterator<Item = &PValueRow> {
        self.valid.iter().map(|&j| &self.table[j])
    }

    pub fn selected_params(&self) -> Option<ParamPair> {
        self.selected.map(|j| self.table[j].params)
    }

    pub fn is_feasible(&self) -> bool {
        !self.valid.is_empty()
    }

    /// Per-hypothesis acceptance level `delta / num_chains`.
    pub fn level(&self) -> f64 {
        self.config.delta / self.config.num_chains as f64
    }
}

pub fn calibrate(
    records: &[ScenarioRecord],
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    calibrate_with(records, config, Execution::default())
}

pub fn calibrate_with(
    records: &[ScenarioRecord],
    config: &CalibrationConfig,
    exec: Execution,
) -> Result<CalibrationResult> {
    if records.is_empty() {
        return Err(Error::invalid("calibration dataset is empty"));
    }
    config.validate()?;
    validate_dataset(records)?;
    let m = records.len() as u64;
    let level = config.selection_level();

    let blocks = exec.map_range(config.theta_grid.len(), |ti| -> Result<Vec<PValueRow>> {
        let theta = config.theta_grid[ti];
        let profile = ThetaProfile::build(records, theta)?;
        let mut cache: HashMap<(usize, u64), f64> = HashMap::new();
        let mut rows = Vec::with_capacity(config.lambda_grid.len());
        for &lambda in &config.lambda_grid {
            let mut empirical_risks = Vec::with_capacity(config.risks.len());
            let mut p_values = Vec::with_capacity(config.risks.len());
            for (k, risk) in config.risks.iter().enumerate() {
                let r_hat = profile.risk(risk.kind, lambda);
                let p = match cache.get(&(k, r_hat.to_bits())) {
                    Some(&p) => p,
                    None => {
                        let p = hb_pvalue(r_hat, risk.alpha, m)?;
                        cache.insert((k, r_hat.to_bits()), p);
                        p
                    }
                };
                empirical_risks.push(r_hat);
                p_values.push(p);
            }
            let combined_p = p_values.iter().copied().fold(0.0, f64::max);
            rows.push(PValueRow {
                params: ParamPair { lambda, theta },
                empirical_risks,
                p_values,
                combined_p,
                empirical_help: profile.help(lambda, level),
            });
        }
        Ok(rows)
    });

    let mut table = Vec::with_capacity(config.num_hypotheses());
    for block in blocks {
        table.extend(block?);
    }
    let combined: Vec<f64> = table.iter().map(|r| r.combined_p).collect();
    let valid = fixed_sequence_test(&combined, config.delta, config.num_chains);
    let selected = select_operating_point(&table, &valid);
    Ok(CalibrationResult {
        config: config.clone(),
        table,
        valid,
        selected,
    })
}

/// Lowest empirical help; ties go to the larger `theta`, then the larger
/// `lambda`.
pub fn select_operating_point(table: &[PValueRow], valid: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &j in valid {
        let better = match best {
            None => true,
            Some(b) => {
                let (x, y) = (&table[j], &table[b]);
                (x.empirical_help, -x.params.theta, -x.params.lambda)
                    < (y.empirical_help, -y.params.theta, -y.params.lambda)
            }
        };
        if better {
            best = Some(j);
        }
    }
    best
}

/// Level at which a secondary risk must be calibrated so that it holds at
/// `alpha_target` once miscovered (out-of-distribution) rollouts, which
/// occur with probability at most `alpha_cov`, are accounted for.
pub fn ood_adjust(alpha_target: f64, alpha_cov: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&alpha_target) && (0.0..=1.0).contains(&alpha_cov));
    (alpha_target - alpha_cov).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ActionId, IntentId, StepContext};

    fn record(id: usize, s: f64, correct: bool) -> ScenarioRecord {
        ScenarioRecord {
            scenario_id: format!("r{id}"),
            steps: vec![StepContext::new(
                vec![s.ln(), (1.0 - s).ln()],
                vec![ActionId(0), ActionId(1)],
                IntentId(if correct { 0 } else { 1 }),
            )
            .unwrap()],
        }
    }

    #[test]
    fn default_grids() {
        let c = CalibrationConfig::miscoverage(0.15);
        assert_eq!(c.delta, 0.01);
        assert_eq!(c.lambda_grid.len(), 2000);
        assert_eq!(c.lambda_grid[0], 0.0);
        assert_eq!(c.lambda_grid[1999], 1.0);
        assert_eq!(c.theta_grid, vec![0.001, 0.01, 0.1, 1.0, 10.0]);
        assert_eq!(c.num_chains, 5);
        assert_eq!(
            c.params_at(2000),
            ParamPair {
                lambda: 0.0,
                theta: 0.01
            }
        );
        assert!(c.validate().is_ok());
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(even_grid(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(log_grid(0.1, 10.0, 3).unwrap(), vec![0.1, 1.0, 10.0]);
        let g = log_grid(0.125, 2.0, 5).unwrap();
        assert_eq!(g[0], 0.125);
        assert_eq!(g[4], 2.0);
        assert!((g[2] - 0.5).abs() < 1e-15);
        assert!(log_grid(0.0, 1.0, 3).is_err());
        assert_eq!(linear_grid(0.0, 0.45, 10).unwrap()[9], 0.45);
    }

    #[test]
    fn config_validation() {
        let mut c = CalibrationConfig::miscoverage(0.15);
        c.num_chains = 0;
        assert!(c.validate().is_err());
        let mut c = CalibrationConfig::miscoverage(0.15);
        c.theta_grid = vec![1.0, 0.1];
        assert!(c.validate().is_err());
        let c = CalibrationConfig::with_risks(vec![
            RiskSpec::help(0.3, HelpLevel::Plan),
            RiskSpec::miscoverage(0.15),
        ]);
        assert!(c.validate().is_err());
        let c = CalibrationConfig::miscoverage(1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn perfect_predictor_is_calibratable() {
        let recs: Vec<_> = (0..400).map(|i| record(i, 0.95, true)).collect();
        let res = calibrate(&recs, &CalibrationConfig::miscoverage(0.999)).unwrap();
        assert!(res.is_feasible());
        let sel = res.selected_params().unwrap();
        assert!(res.valid_params().contains(&sel));
        // some valid threshold covers every record
        assert!(res.valid_rows().any(|r| r.empirical_risks[0] == 0.0));
    }

    #[test]
    fn tiny_dataset_is_infeasible() {
        let recs: Vec<_> = (0..10).map(|i| record(i, 0.95, true)).collect();
        let res = calibrate(&recs, &CalibrationConfig::miscoverage(0.01)).unwrap();
        assert!(!res.is_feasible());
        assert_eq!(res.selected, None);
        assert!(res.table.iter().all(|r| r.combined_p > 0.9));
    }

    #[test]
    fn valid_points_respect_the_level() {
        let recs: Vec<_> = (0..300)
            .map(|i| record(i, 0.2 + 0.6 * (i as f64 / 300.0), i % 7 != 0))
            .collect();
        let cfg = CalibrationConfig::with_risks(vec![
            RiskSpec::miscoverage(0.3),
            RiskSpec::help(0.9, HelpLevel::Plan),
        ]);
        // help is 1 at lambda = 0, so chains must also start mid-block
        let cfg = CalibrationConfig {
            num_chains: 100,
            ..cfg
        };
        let res = calibrate(&recs, &cfg).unwrap();
        assert!(res.is_feasible());
        for row in res.valid_rows() {
            assert!(row.combined_p <= res.level());
            assert_eq!(row.combined_p, row.p_values[0].max(row.p_values[1]));
        }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(calibrate(&[], &CalibrationConfig::miscoverage(0.1)).is_err());
    }

    #[test]
    fn selection_prefers_low_help_then_large_theta_then_large_lambda() {
        let row = |lambda, theta, help| PValueRow {
            params: ParamPair { lambda, theta },
            empirical_risks: vec![],
            p_values: vec![],
            combined_p: 0.0,
            empirical_help: help,
        };
        let table = vec![
            row(0.1, 1.0, 0.2),
            row(0.2, 1.0, 0.1),
            row(0.3, 1.0, 0.1),
            row(0.1, 10.0, 0.1),
            row(0.05, 10.0, 0.1),
        ];
        assert_eq!(select_operating_point(&table, &[0, 1, 2, 3, 4]), Some(3));
        assert_eq!(select_operating_point(&table, &[0, 1, 2]), Some(2));
        assert_eq!(select_operating_point(&table, &[]), None);
    }

    #[test]
    fn ood_adjust_clamps() {
        assert!((ood_adjust(0.30, 0.15) - 0.15).abs() < 1e-15);
        assert_eq!(ood_adjust(0.10, 0.15), 0.0);
        assert_eq!(ood_adjust(0.4, 0.0), 0.4);
    }
}
