//! Multi-`N`, multi-seed convergence experiments.
//!
//! A plan names a run configuration, the number of replications per `N` and
//! a list of checks. Every replication is simulated independently (in
//! parallel) and compared against one precomputed fluid solution. Results
//! are merged in `(N, replication)` order, so the report only depends on the
//! seeds. All numeric thresholds live in the plan: the limit theorems give
//! no rates, so they are calibration choices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use edfluid_core::distribution::{DistributionSpec, YStar};
use edfluid_core::fluid::{self, EmptyingTime, FluidSolution};
use edfluid_core::metrics::{
    is_nonincreasing, replication_metrics, summarize, trend_verdict, ReplicationMetrics, Summary, TrendRule,
};
use edfluid_core::sim::{build_initial_state, run, RandomSource};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{apply_overrides, read_json, Config, LawConfig};
use crate::error::AppError;
use crate::export;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigSource {
    /// Path to a config file, relative to the plan file.
    Path(String),
    Inline(Box<Value>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ErrQ,
    ErrR,
    ErrF,
    ErrM,
    CfMass,
    FrontierSup,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::ErrQ, Metric::ErrR, Metric::ErrF, Metric::ErrM, Metric::CfMass, Metric::FrontierSup];

    pub fn name(self) -> &'static str {
        match self {
            Metric::ErrQ => "err_q",
            Metric::ErrR => "err_r",
            Metric::ErrF => "err_f",
            Metric::ErrM => "err_m",
            Metric::CfMass => "cf_mass",
            Metric::FrontierSup => "frontier_sup",
        }
    }

    pub fn of(self, m: &ReplicationMetrics) -> Option<f64> {
        match self {
            Metric::ErrQ => Some(m.err_q),
            Metric::ErrR => m.err_r,
            Metric::ErrF => m.err_f,
            Metric::ErrM => m.err_m,
            Metric::CfMass => Some(m.cf_mass),
            Metric::FrontierSup => Some(m.frontier_sup),
        }
    }
}

fn half() -> f64 {
    0.5
}

fn one() -> usize {
    1
}

fn fifth() -> f64 {
    0.2
}

fn tenth() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    /// Means over `N` decrease (up to small inversions) and the last is at
    /// most `max_final_ratio` times the first.
    Trend {
        metric: Metric,
        #[serde(default = "half")]
        max_final_ratio: f64,
        #[serde(default = "one")]
        max_inversions: usize,
        #[serde(default = "fifth")]
        max_inversion_fraction: f64,
    },
    /// Mean at the largest `N` is at most `value`.
    FinalMeanAtMost { metric: Metric, value: f64 },
    /// Means over `N` never increase by more than `tolerance`.
    Nonincreasing {
        metric: Metric,
        #[serde(default)]
        tolerance: f64,
    },
    /// Fraction of replications at the largest `N` whose frontier stays
    /// below `y* + ε` is at least `value`.
    FrontierBoundFractionAtLeast { value: f64 },
    /// Mean first time the queue empties, at the largest `N`, is within
    /// `tolerance` of the fluid emptying time.
    FirstEmptyWithin { tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub config: ConfigSource,
    #[serde(default)]
    pub overrides: Vec<String>,
    pub replications: usize,
    /// Left end of the frontier comparison window; defaults to 0 when the
    /// frontier converges from time 0 and to `0.05 T` otherwise.
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "tenth")]
    pub frontier_epsilon: f64,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub note: Option<String>,
}

impl ExperimentPlan {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), AppError> {
        let plan: ExperimentPlan =
            serde_json::from_value(read_json(path)?).map_err(|e| AppError::Config(format!("plan: {e}")))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((plan, base))
    }

    /// The run configuration with the plan's overrides and then `extra`
    /// applied.
    pub fn resolve_config(&self, base_dir: &Path, extra: &[String]) -> Result<Config, AppError> {
        let mut value = match &self.config {
            ConfigSource::Path(p) => read_json(&base_dir.join(p))?,
            ConfigSource::Inline(v) => (**v).clone(),
        };
        apply_overrides(&mut value, &self.overrides)?;
        apply_overrides(&mut value, extra)?;
        Config::from_value(value)
    }

    fn validate(&self, cfg: &Config) -> Result<(), AppError> {
        if cfg.n_list.len() < 3 {
            return Err(AppError::Config("a convergence plan needs at least 3 values in N_list".into()));
        }
        if self.replications == 0 {
            return Err(AppError::Config("replications must be >= 1".into()));
        }
        if let LawConfig::Deterministic { .. } = cfg.patience_law {
            return Err(AppError::Config(
                "deterministic patience has no fluid limit to compare against; the harness refuses it".into(),
            ));
        }
        if let Some(k) = self.kappa {
            if !(0.0..cfg.horizon).contains(&k) {
                return Err(AppError::Config(format!("kappa must lie in [0, horizon), got {k}")));
            }
        }
        Ok(())
    }
}

/// Seed of replication `rep` at scale `n`.
pub fn replication_seed(base: u64, n: u64, rep: usize) -> u64 {
    base.wrapping_add(n.wrapping_mul(1_000_003)).wrapping_add(rep as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryJson {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

impl From<Summary> for SummaryJson {
    fn from(s: Summary) -> Self {
        SummaryJson { count: s.count, mean: s.mean, min: s.min, q10: s.q10, median: s.median, q90: s.q90, max: s.max }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub n: u64,
    pub metrics: BTreeMap<&'static str, SummaryJson>,
    /// Fraction of replications with `sup F^N <= y* + ε`.
    pub frontier_bound_fraction: Option<f64>,
    /// Fraction of replications whose queue emptied at a positive time.
    pub emptied_fraction: f64,
    pub first_empty_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplicationRow {
    pub n: u64,
    pub rep: usize,
    pub seed: u64,
    pub metrics: ReplicationMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub pass: bool,
    pub detail: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config: Value,
    pub n_list: Vec<u64>,
    pub replications: usize,
    pub regime: String,
    pub kappa: Option<f64>,
    pub frontier_epsilon: f64,
    pub y_star: Option<f64>,
    pub fluid_emptying_time: Option<f64>,
    pub levels: Vec<LevelSummary>,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<ReplicationRow>,
    #[serde(skip)]
    pub fluid: Option<FluidSolution>,
}

fn run_replication(cfg: &Config, sol: &FluidSolution, n: u64, seed: u64, eps: f64) -> Result<ReplicationMetrics, AppError> {
    let params = cfg.system_params(n, seed)?;
    let mut source = RandomSource::new(&params, cfg.arrival_law.to_spec()?, cfg.service_law.to_spec()?, cfg.patience()?)?;
    let state = build_initial_state(&cfg.initial_condition()?, &params, &mut source)?;
    let mut rc = cfg.run_config(n)?;
    rc.record_events = false;
    let trace = run(state, &mut source, &rc)?;
    Ok(replication_metrics(&trace, sol, eps)?)
}

fn y_star_of(patience: &DistributionSpec, lambda: f64, mu: f64) -> Option<f64> {
    match patience.y_star(lambda, mu) {
        Ok(YStar::Finite(y)) => Some(y),
        _ => None,
    }
}

pub fn run_experiment(plan: &ExperimentPlan, cfg: &Config) -> Result<ConvergenceReport, AppError> {
    plan.validate(cfg)?;
    let problem = cfg.fluid_problem(None)?;
    let sol = fluid::solve(&problem, plan.kappa)?;
    let eps = plan.frontier_epsilon;

    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for &n in &cfg.n_list {
        // all replications of one N succeed or the whole level fails
        let metrics = (0..plan.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(cfg.seed, n, rep);
                run_replication(cfg, &sol, n, seed, eps).map(|m| ReplicationRow { n, rep, seed, metrics: m })
            })
            .collect::<Result<Vec<_>, AppError>>()?;
        levels.push(level_summary(n, &metrics));
        rows.extend(metrics);
    }

    let mut report = ConvergenceReport {
        config: cfg.to_value(),
        n_list: cfg.n_list.clone(),
        replications: plan.replications,
        regime: format!("{:?}", problem.regime()),
        kappa: sol.frontier.as_ref().map(|f| f.kappa),
        frontier_epsilon: eps,
        y_star: y_star_of(&problem.patience, problem.lambda, problem.mu),
        fluid_emptying_time: sol.emptying_time.and_then(EmptyingTime::value),
        levels,
        checks: Vec::new(),
        pass: true,
        rows,
        fluid: Some(sol),
    };
    report.checks = plan.checks.iter().map(|c| evaluate(c, &report)).collect();
    report.pass = report.checks.iter().all(|c| c.pass);
    Ok(report)
}

fn level_summary(n: u64, rows: &[ReplicationRow]) -> LevelSummary {
    let mut metrics = BTreeMap::new();
    for metric in Metric::ALL {
        let values: Vec<f64> = rows.iter().filter_map(|r| metric.of(&r.metrics)).collect();
        if let Some(s) = summarize(&values) {
            metrics.insert(metric.name(), s.into());
        }
    }
    let bounds: Vec<bool> = rows.iter().filter_map(|r| r.metrics.frontier_within_bound).collect();
    let frontier_bound_fraction =
        (!bounds.is_empty()).then(|| bounds.iter().filter(|b| **b).count() as f64 / bounds.len() as f64);
    let emptied = rows.iter().filter(|r| r.metrics.emptied_before_horizon).count();
    let empties: Vec<f64> = rows
        .iter()
        .filter(|r| r.metrics.emptied_before_horizon)
        .filter_map(|r| r.metrics.first_queue_empty)
        .collect();
    LevelSummary {
        n,
        metrics,
        frontier_bound_fraction,
        emptied_fraction: emptied as f64 / rows.len().max(1) as f64,
        first_empty_mean: (!empties.is_empty()).then(|| empties.iter().sum::<f64>() / empties.len() as f64),
    }
}

fn means(report: &ConvergenceReport, metric: Metric) -> Option<Vec<f64>> {
    report
        .levels
        .iter()
        .map(|l| l.metrics.get(metric.name()).map(|s| s.mean))
        .collect()
}

fn evaluate(check: &Check, report: &ConvergenceReport) -> CheckOutcome {
    let outcome = |pass: bool, detail: String, values: Vec<f64>| CheckOutcome {
        check: check.clone(),
        pass,
        detail,
        values,
    };
    let missing = |metric: Metric| {
        outcome(false, format!("{} is not defined in the {} regime", metric.name(), report.regime), Vec::new())
    };
    let last = report.levels.last();
    match check {
        Check::Trend { metric, max_final_ratio, max_inversions, max_inversion_fraction } => {
            let Some(m) = means(report, *metric) else { return missing(*metric) };
            let rule = TrendRule {
                max_final_ratio: *max_final_ratio,
                max_inversions: *max_inversions,
                max_inversion_fraction: *max_inversion_fraction,
            };
            let v = trend_verdict(&m, &rule);
            outcome(v.pass, v.detail, m)
        }
        Check::FinalMeanAtMost { metric, value } => {
            let Some(m) = means(report, *metric) else { return missing(*metric) };
            let fin = *m.last().expect("at least 3 levels");
            outcome(fin <= *value, format!("final mean {fin}, limit {value}"), m)
        }
        Check::Nonincreasing { metric, tolerance } => {
            let Some(m) = means(report, *metric) else { return missing(*metric) };
            let pass = is_nonincreasing(&m, *tolerance);
            outcome(pass, format!("means {m:?}"), m)
        }
        Check::FrontierBoundFractionAtLeast { value } => match last.and_then(|l| l.frontier_bound_fraction) {
            Some(f) => outcome(
                f >= *value,
                format!("fraction {f} with y* = {:?}, eps = {}", report.y_star, report.frontier_epsilon),
                vec![f],
            ),
            None => outcome(false, "y* is infinite in this configuration".into(), Vec::new()),
        },
        Check::FirstEmptyWithin { tolerance } => {
            let (Some(tb), Some(mean)) = (report.fluid_emptying_time, last.and_then(|l| l.first_empty_mean)) else {
                return outcome(false, "no emptying time to compare".into(), Vec::new());
            };
            let fraction = last.map_or(0.0, |l| l.emptied_fraction);
            outcome(
                (mean - tb).abs() <= *tolerance,
                format!("mean first empty {mean} vs fluid {tb} ({} of replications emptied)", fraction),
                vec![mean, tb],
            )
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn replications_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(
        "N,replication,seed,err_q,err_r,err_f,err_m,frontier_sup,frontier_within_bound,cf_mass,first_queue_empty,emptied_before_horizon\n",
    );
    for r in &report.rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.rep,
            r.seed,
            m.err_q,
            opt(m.err_r),
            opt(m.err_f),
            opt(m.err_m),
            m.frontier_sup,
            m.frontier_within_bound.map(|b| b.to_string()).unwrap_or_default(),
            m.cf_mass,
            opt(m.first_queue_empty),
            m.emptied_before_horizon,
        );
    }
    out
}

/// `report.json`, `replications.csv` and `fluid.csv` in `dir`.
pub fn write_report(dir: &Path, report: &ConvergenceReport) -> Result<(), AppError> {
    fs::create_dir_all(dir)?;
    export::write_json(&dir.join("report.json"), &serde_json::to_value(report).expect("report serializes"))?;
    fs::write(dir.join("replications.csv"), replications_csv(report))?;
    if let Some(sol) = &report.fluid {
        export::write_fluid(&dir.join("fluid.csv"), sol)?;
    }
    Ok(())
}
