//! Repeated seeded trials, success rates with Wilson intervals, query
//! accounting, parameter sweeps and calibration of the budget constant.
//!
//! Trial `i` of an experiment with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` on stream `i`, so trials are independent,
//! can run in any order on any number of threads, and reproduce exactly.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::checks::{brute_force_opt, check_mhr, check_regular, OptResult, DEFAULT_TOL};
use crate::distributions::{ClassClaim, Distribution, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::estimation::DEFAULT_C;
use crate::instantiation::{run_setting, LearnerRun, Setting, SettingInputs, Trace};
use crate::oracle::PricingOracle;
use crate::unified_search::build_grid;

/// Version stamped into every report.
pub const SCHEMA_VERSION: u32 = 1;

/// Grid size of the brute-force optimum that trials are judged against.
pub const OPT_GRID: usize = 100_000;

/// Grid size of the class checks run before an experiment.
pub const CLASS_CHECK_GRID: usize = 10_000;

const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub distribution: DistributionSpec,
    /// Top of the value range; defaults to the top of the support.
    #[serde(rename = "H")]
    pub h: Option<f64>,
    pub eps: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub trials: u64,
    pub seed: u64,
    /// Defaults to the setting's guarantee factor.
    pub success_factor: Option<f64>,
    /// Oracle budget as a multiple of the run's query bound; `None` leaves it uncapped.
    pub oracle_budget_multiplier: Option<f64>,
    /// Run the numerical class checker for the setting's class first.
    pub check_class: bool,
    pub keep_per_trial: bool,
}

impl ExperimentConfig {
    pub fn new(setting: Setting, distribution: DistributionSpec, eps: f64, delta: f64) -> Self {
        Self {
            setting,
            distribution,
            h: None,
            eps,
            delta,
            c: DEFAULT_C,
            trials: 200,
            seed: 0,
            success_factor: None,
            oracle_budget_multiplier: Some(10.0),
            check_class: true,
            keep_per_trial: true,
        }
    }

    pub fn success_factor(&self) -> f64 {
        self.success_factor.unwrap_or_else(|| self.setting.guarantee_factor(self.eps))
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("need at least one trial"));
        }
        // The default factor 1 − 5ε reaches 0 at ε = 0.2, where every output counts.
        let f = self.success_factor();
        if !(0.0..1.0).contains(&f) {
            return Err(invalid(format!("success factor must lie in [0, 1), got {f}")));
        }
        if let Some(m) = self.oracle_budget_multiplier {
            if !(m.is_finite() && m >= 1.0) {
                return Err(invalid(format!("budget multiplier must be at least 1, got {m}")));
            }
        }
        Ok(())
    }
}

/// A validated experiment ready to run trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub distribution: Distribution,
    pub inputs: SettingInputs,
    pub opt: OptResult,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let distribution = config.distribution.build()?;
        let needed = config.setting.required_class();
        if !distribution.class_claim().satisfies(needed) {
            return Err(Error::ClassCheckFailed(format!(
                "{} needs a {needed:?} distribution, got {:?}",
                config.setting,
                distribution.class_claim()
            )));
        }
        if config.check_class {
            let report = match needed {
                ClassClaim::Regular => Some(check_regular(&distribution, CLASS_CHECK_GRID, DEFAULT_TOL)),
                ClassClaim::Mhr => Some(check_mhr(&distribution, CLASS_CHECK_GRID, DEFAULT_TOL)),
                ClassClaim::General => None,
            };
            if let Some(r) = report.filter(|r| !r.passed) {
                return Err(Error::ClassCheckFailed(format!(
                    "{needed:?} check failed: {}",
                    r.violation.unwrap_or_default()
                )));
            }
        }
        let h = match config.h {
            Some(h) => h,
            None if config.setting.uses_range_hint() => {
                if !distribution.is_bounded() {
                    return Err(Error::UnboundedSupport);
                }
                distribution.support_hi()
            }
            None => distribution.support_hi(),
        };
        let opt = brute_force_opt(&distribution, OPT_GRID)?;
        let inputs = SettingInputs { setting: config.setting, h, eps: config.eps, delta: config.delta, c: config.c };
        Ok(Self { config: config.clone(), distribution, inputs, opt })
    }

    /// Runs trial `index` and returns its outcome together with the learner trace.
    pub fn trial(&self, index: u64) -> Result<(TrialOutcome, Trace)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(index);
        let mut oracle = PricingOracle::from_rng(&self.distribution, rng);
        let run = run_setting(&self.inputs, &mut oracle, self.config.oracle_budget_multiplier)?;
        Ok((self.judge(index, &run), run.trace))
    }

    fn judge(&self, index: u64, run: &LearnerRun) -> TrialOutcome {
        let achieved = self.distribution.revenue(run.output);
        let (rounds, round_bound, pivots_ok, on_grid) = match &run.trace {
            Trace::Unified(t) => (
                Some(t.round_count()),
                Some(t.round_bound),
                t.pivots_within_windows() && t.windows_shrink(),
                build_grid(&t.params).get(t.output_index) == Some(&t.output),
            ),
            Trace::Grid(t) => (None, None, true, t.grid.get(t.output_index) == Some(&t.output)),
        };
        let queries = run.trace.queries();
        TrialOutcome {
            trial: index,
            output_price: run.output,
            achieved_revenue: achieved,
            success: achieved >= self.config.success_factor() * self.opt.opt_revenue,
            queries,
            query_bound: run.query_bound,
            hint: run.hint,
            rounds,
            round_bound,
            pivots_ok,
            output_on_grid: on_grid,
        }
    }

    pub fn run(&self) -> Result<TrialReport> {
        let outcomes: Vec<TrialOutcome> = (0..self.config.trials)
            .into_par_iter()
            .map(|i| self.trial(i).map(|(o, _)| o))
            .collect::<Result<_>>()?;
        Ok(self.report(outcomes))
    }

    fn report(&self, outcomes: Vec<TrialOutcome>) -> TrialReport {
        let trials = outcomes.len() as u64;
        let successes = outcomes.iter().filter(|o| o.success).count() as u64;
        let q: Vec<u64> = outcomes.iter().map(|o| o.queries).collect();
        let queries = QueryStats {
            min: *q.iter().min().unwrap(),
            max: *q.iter().max().unwrap(),
            mean: q.iter().map(|&x| x as f64).sum::<f64>() / trials as f64,
        };
        let invariants = InvariantSummary {
            max_rounds: outcomes.iter().filter_map(|o| o.rounds).max(),
            rounds_within_bound: outcomes.iter().all(|o| match (o.rounds, o.round_bound) {
                (Some(r), Some(b)) => r <= b,
                _ => true,
            }),
            pivots_within_windows: outcomes.iter().all(|o| o.pivots_ok),
            outputs_on_grid: outcomes.iter().all(|o| o.output_on_grid),
            queries_within_bound: outcomes.iter().all(|o| o.queries <= o.query_bound),
        };
        let cfg = &self.config;
        TrialReport {
            schema_version: SCHEMA_VERSION,
            setting: cfg.setting,
            distribution: cfg.distribution.clone(),
            h: self.inputs.h,
            eps: cfg.eps,
            delta: cfg.delta,
            c: cfg.c,
            seed: cfg.seed,
            success_factor: cfg.success_factor(),
            opt_price: self.opt.opt_price,
            opt_revenue: self.opt.opt_revenue,
            successes,
            trials,
            success_rate: successes as f64 / trials as f64,
            wilson_ci_95: wilson_interval(successes, trials),
            queries,
            theoretical_query_bound: outcomes.iter().map(|o| o.query_bound).max().unwrap(),
            invariants,
            per_trial: cfg.keep_per_trial.then_some(outcomes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub output_price: f64,
    pub achieved_revenue: f64,
    pub success: bool,
    pub queries: u64,
    pub query_bound: u64,
    pub hint: Option<f64>,
    pub rounds: Option<u64>,
    pub round_bound: Option<u64>,
    pub pivots_ok: bool,
    pub output_on_grid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub min: u64,
    pub mean: f64,
    pub max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub max_rounds: Option<u64>,
    pub rounds_within_bound: bool,
    pub pivots_within_windows: bool,
    pub outputs_on_grid: bool,
    pub queries_within_bound: bool,
}

impl InvariantSummary {
    pub fn all_hold(&self) -> bool {
        self.rounds_within_bound && self.pivots_within_windows && self.outputs_on_grid && self.queries_within_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema_version: u32,
    pub setting: Setting,
    pub distribution: DistributionSpec,
    #[serde(rename = "H")]
    pub h: f64,
    pub eps: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub seed: u64,
    pub success_factor: f64,
    pub opt_price: f64,
    pub opt_revenue: f64,
    pub successes: u64,
    pub trials: u64,
    pub success_rate: f64,
    pub wilson_ci_95: (f64, f64),
    pub queries: QueryStats,
    /// For one-sample settings, the largest per-trial bound.
    pub theoretical_query_bound: u64,
    pub invariants: InvariantSummary,
    pub per_trial: Option<Vec<TrialOutcome>>,
}

/// One CSV row per report.
#[derive(Debug, Clone, Serialize)]
struct CsvRow<'a> {
    schema_version: u32,
    setting: &'a str,
    distribution: String,
    #[serde(rename = "H")]
    h: f64,
    eps: f64,
    delta: f64,
    #[serde(rename = "C")]
    c: f64,
    seed: u64,
    trials: u64,
    successes: u64,
    success_rate: f64,
    wilson_lo: f64,
    wilson_hi: f64,
    queries_min: u64,
    queries_mean: f64,
    queries_max: u64,
    theoretical_query_bound: u64,
    opt_revenue: f64,
    invariants_hold: bool,
}

impl TrialReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn csv_row(&self) -> Result<CsvRow<'_>> {
        Ok(CsvRow {
            schema_version: self.schema_version,
            setting: self.setting.label(),
            distribution: self.distribution.to_json()?,
            h: self.h,
            eps: self.eps,
            delta: self.delta,
            c: self.c,
            seed: self.seed,
            trials: self.trials,
            successes: self.successes,
            success_rate: self.success_rate,
            wilson_lo: self.wilson_ci_95.0,
            wilson_hi: self.wilson_ci_95.1,
            queries_min: self.queries.min,
            queries_mean: self.queries.mean,
            queries_max: self.queries.max,
            theoretical_query_bound: self.theoretical_query_bound,
            opt_revenue: self.opt_revenue,
            invariants_hold: self.invariants.all_hold(),
        })
    }
}

/// Writes a header and one summary row per report.
pub fn write_csv<W: Write>(reports: &[TrialReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r.csv_row()?)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_csv_string(reports: &[TrialReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

pub fn run_trials(config: &ExperimentConfig) -> Result<TrialReport> {
    Experiment::prepare(config)?.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Eps,
    #[serde(rename = "H")]
    H,
    Delta,
}

impl SweepParameter {
    /// Abscissa of the scaling fit: `1/ε`, `H` or `1/δ`.
    pub fn abscissa(self, value: f64) -> f64 {
        match self {
            SweepParameter::H => value,
            _ => 1.0 / value,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepParameter::Eps => "eps",
            SweepParameter::H => "H",
            SweepParameter::Delta => "delta",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eps" => Ok(SweepParameter::Eps),
            "H" | "h" => Ok(SweepParameter::H),
            "delta" => Ok(SweepParameter::Delta),
            _ => Err(invalid(format!("unknown sweep parameter '{s}' (eps, H or delta)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub reports: Vec<TrialReport>,
    /// Least-squares slope of ln(mean queries) against ln(abscissa); `None` below two points.
    pub log_log_slope: Option<f64>,
}

/// One experiment per value of `parameter`. Sweeping `H` also moves the
/// distribution's own range when its family has one.
pub fn sweep(base: &ExperimentConfig, parameter: SweepParameter, values: &[f64]) -> Result<SweepReport> {
    let mut reports = Vec::with_capacity(values.len());
    for &v in values {
        let mut cfg = base.clone();
        match parameter {
            SweepParameter::Eps => cfg.eps = v,
            SweepParameter::Delta => cfg.delta = v,
            SweepParameter::H => {
                cfg.h = Some(v);
                if let Ok(spec) = base.distribution.with_range_hi(v) {
                    cfg.distribution = spec;
                }
            }
        }
        reports.push(run_trials(&cfg)?);
    }
    let points: Vec<(f64, f64)> = values
        .iter()
        .zip(&reports)
        .map(|(&v, r)| (parameter.abscissa(v).ln(), r.queries.mean.ln()))
        .collect();
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        parameter,
        values: values.to_vec(),
        reports,
        log_log_slope: least_squares_slope(&points),
    })
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub const DEFAULT_C_LADDER: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub schema_version: u32,
    pub target: f64,
    pub ladder: Vec<f64>,
    pub reports: Vec<TrialReport>,
    /// Smallest `C` whose Wilson lower bound reaches the target.
    pub chosen_c: Option<f64>,
    /// No rung's interval lies entirely below a smaller rung's interval.
    pub monotone_within_ci: bool,
}

/// Runs every rung of `ladder` (sorted ascending) and picks the smallest `C`
/// whose success rate meets `target` with 95% Wilson confidence.
pub fn calibrate_c(base: &ExperimentConfig, ladder: &[f64], target: f64) -> Result<CalibrationReport> {
    if ladder.is_empty() {
        return Err(invalid("calibration ladder is empty"));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(invalid(format!("target must lie in [0, 1], got {target}")));
    }
    let mut ladder = ladder.to_vec();
    ladder.sort_by(f64::total_cmp);
    let mut reports = Vec::with_capacity(ladder.len());
    for &c in &ladder {
        let cfg = ExperimentConfig { c, ..base.clone() };
        reports.push(run_trials(&cfg)?);
    }
    let chosen_c = ladder.iter().zip(&reports).find(|(_, r)| r.wilson_ci_95.0 >= target).map(|(&c, _)| c);
    let monotone_within_ci = reports
        .iter()
        .enumerate()
        .all(|(i, lower)| reports[i + 1..].iter().all(|upper| upper.wilson_ci_95.1 >= lower.wilson_ci_95.0));
    Ok(CalibrationReport { schema_version: SCHEMA_VERSION, target, ladder, reports, chosen_c, monotone_within_ci })
}
