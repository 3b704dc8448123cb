//! Search parameters for each hint model, and a single entry point that runs
//! the matching learner for a setting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::ClassClaim;
use crate::error::{invalid, Result};
use crate::grid_search::{grid_for_general, per_price_budget, run_general, GeneralTrace};
use crate::oracle::PricingOracle;
use crate::unified_search::{self, RunTrace, SearchParams};

/// Hint model and distribution class of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    RegularRange,
    MhrRange,
    RegularSample,
    MhrSample,
    GeneralRange,
}

impl Setting {
    pub const ALL: [Setting; 5] =
        [Setting::RegularRange, Setting::MhrRange, Setting::RegularSample, Setting::MhrSample, Setting::GeneralRange];

    pub fn label(self) -> &'static str {
        match self {
            Setting::RegularRange => "regular-range",
            Setting::MhrRange => "mhr-range",
            Setting::RegularSample => "regular-sample",
            Setting::MhrSample => "mhr-sample",
            Setting::GeneralRange => "general-range",
        }
    }

    /// Class the distribution must belong to for the guarantee to apply.
    pub fn required_class(self) -> ClassClaim {
        match self {
            Setting::RegularRange | Setting::RegularSample => ClassClaim::Regular,
            Setting::MhrRange | Setting::MhrSample => ClassClaim::Mhr,
            Setting::GeneralRange => ClassClaim::General,
        }
    }

    /// Promised fraction of the optimal revenue.
    pub fn guarantee_factor(self, eps: f64) -> f64 {
        match self {
            Setting::RegularSample => 1.0 - 6.0 * eps,
            Setting::GeneralRange => 1.0 - 3.0 * eps,
            _ => 1.0 - 5.0 * eps,
        }
    }

    pub fn uses_sample_hint(self) -> bool {
        matches!(self, Setting::RegularSample | Setting::MhrSample)
    }

    pub fn uses_range_hint(self) -> bool {
        !self.uses_sample_hint()
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Setting {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| invalid(format!("unknown setting '{s}'")))
    }
}

fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("need ε ∈ (0, 1) and δ ∈ (0, 1], got ε={eps} δ={delta}")));
    }
    Ok(())
}

/// Values known to lie in `[1, H]`, regular class: `ℓ = 1`, `r = H`, `γ = 1/H`.
pub fn regular_value_range(h: f64, eps: f64, delta: f64, c: f64) -> Result<SearchParams> {
    check_eps_delta(eps, delta)?;
    SearchParams::new(1.0, h, eps, delta, 1.0 / h)?.with_c(c)
}

/// Values known to lie in `[1, H]`, MHR class: `γ = 1/e`.
pub fn mhr_value_range(h: f64, eps: f64, delta: f64, c: f64) -> Result<SearchParams> {
    check_eps_delta(eps, delta)?;
    SearchParams::new(1.0, h, eps, delta, (-1.0f64).exp())?.with_c(c)
}

fn sample_window(s: f64, eps: f64, delta: f64) -> Result<(f64, f64)> {
    check_eps_delta(eps, delta)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid(format!("hint sample must be positive, got {s}")));
    }
    Ok((delta * s / 8.0, 4.0 * s / (delta * eps)))
}

/// One observed value `s`, regular class: `[δs/8, 4s/(δε)]`, `γ = ε`, search failure `δ/2`.
pub fn regular_one_sample(s: f64, eps: f64, delta: f64, c: f64) -> Result<SearchParams> {
    let (lo, hi) = sample_window(s, eps, delta)?;
    SearchParams::new(lo, hi, eps, delta / 2.0, eps)?.with_c(c)
}

/// One observed value `s`, MHR class: same window, `γ = 1/e`, search failure `δ/2`.
pub fn mhr_one_sample(s: f64, eps: f64, delta: f64, c: f64) -> Result<SearchParams> {
    let (lo, hi) = sample_window(s, eps, delta)?;
    SearchParams::new(lo, hi, eps, delta / 2.0, (-1.0f64).exp())?.with_c(c)
}

/// Learner trace for either algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum Trace {
    Unified(RunTrace),
    Grid(GeneralTrace),
}

impl Trace {
    pub fn output(&self) -> f64 {
        match self {
            Trace::Unified(t) => t.output,
            Trace::Grid(t) => t.output,
        }
    }

    pub fn queries(&self) -> u64 {
        match self {
            Trace::Unified(t) => t.ledger.total(),
            Trace::Grid(t) => t.ledger.total(),
        }
    }
}

/// Inputs shared by every setting. `h` is ignored by the one-sample settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingInputs {
    pub setting: Setting,
    #[serde(rename = "H")]
    pub h: f64,
    pub eps: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl SettingInputs {
    /// Search parameters for a range-hint setting, or for a given hint sample.
    pub fn search_params(&self, hint: Option<f64>) -> Result<Option<SearchParams>> {
        let Self { setting, h, eps, delta, c } = *self;
        let p = match setting {
            Setting::RegularRange => regular_value_range(h, eps, delta, c)?,
            Setting::MhrRange => mhr_value_range(h, eps, delta, c)?,
            Setting::RegularSample | Setting::MhrSample => {
                let s = hint.ok_or_else(|| invalid("one-sample setting needs a hint sample"))?;
                if setting == Setting::RegularSample {
                    regular_one_sample(s, eps, delta, c)?
                } else {
                    mhr_one_sample(s, eps, delta, c)?
                }
            }
            Setting::GeneralRange => return Ok(None),
        };
        Ok(Some(p))
    }

    /// Largest number of queries any run can issue, if it does not depend on the hint.
    pub fn query_bound(&self) -> Result<Option<u64>> {
        match self.setting {
            Setting::GeneralRange => {
                let n = per_price_budget(self.h, self.eps, self.delta)?;
                Ok(Some(grid_for_general(self.h, self.eps)?.len() as u64 * n))
            }
            s if s.uses_sample_hint() => Ok(None),
            _ => Ok(self.search_params(None)?.map(|p| p.query_bound())),
        }
    }
}

/// Outcome of one learner run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRun {
    pub output: f64,
    pub hint: Option<f64>,
    /// Query bound for this run's parameters.
    pub query_bound: u64,
    pub trace: Trace,
}

/// Draws the hint when the setting has one, then runs the matching learner.
///
/// With `budget_multiplier` set, the oracle is capped at that multiple of the
/// run's query bound before the first pricing query.
pub fn run_setting(
    inputs: &SettingInputs,
    oracle: &mut PricingOracle<'_>,
    budget_multiplier: Option<f64>,
) -> Result<LearnerRun> {
    let hint = if inputs.setting.uses_sample_hint() { Some(oracle.draw_hint_sample()?) } else { None };
    let params = inputs.search_params(hint)?;
    let query_bound = match &params {
        Some(p) => p.query_bound(),
        None => grid_for_general(inputs.h, inputs.eps)?.len() as u64 * per_price_budget(inputs.h, inputs.eps, inputs.delta)?,
    };
    if let Some(m) = budget_multiplier {
        oracle.set_budget(Some((m * query_bound as f64).ceil() as u64));
    }
    let (output, trace) = match params {
        Some(p) => {
            let (output, trace) = unified_search::run(&p, oracle)?;
            (output, Trace::Unified(trace))
        }
        None => {
            let (output, trace) = run_general(inputs.h, inputs.eps, inputs.delta, oracle)?;
            (output, Trace::Grid(trace))
        }
    };
    Ok(LearnerRun { output, hint, query_bound, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_settings() {
        let p = regular_value_range(20.0, 0.1, 0.2, 20.0).unwrap();
        assert_eq!((p.lo, p.hi, p.gamma, p.delta), (1.0, 20.0, 0.05, 0.2));
        let one = regular_value_range(1.0, 0.1, 0.2, 20.0).unwrap();
        assert_eq!(unified_search::build_grid(&one), vec![1.0]);
        let m = mhr_value_range(2.0, 0.05, 0.1, 20.0).unwrap();
        assert!((m.gamma - 0.36787944117144233).abs() < 1e-15);
        assert!(regular_value_range(0.5, 0.1, 0.2, 20.0).is_err());
    }

    #[test]
    fn sample_settings() {
        let p = regular_one_sample(10.0, 0.1, 0.2, 20.0).unwrap();
        assert!((p.lo - 0.25).abs() < 1e-12 && (p.hi - 2000.0).abs() < 1e-9);
        assert_eq!((p.gamma, p.delta), (0.1, 0.1));
        let m = mhr_one_sample(1.6, 0.1, 0.2, 20.0).unwrap();
        assert!((m.lo - 0.04).abs() < 1e-12 && (m.hi - 320.0).abs() < 1e-9);
        assert_eq!(m.gamma, (-1.0f64).exp());
        assert!(regular_one_sample(0.0, 0.1, 0.2, 20.0).is_err());
        assert!(mhr_one_sample(-1.0, 0.1, 0.2, 20.0).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for s in Setting::ALL {
            assert_eq!(s.label().parse::<Setting>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.label()));
        }
        assert!("hint-free".parse::<Setting>().is_err());
    }

    #[test]
    fn factors() {
        assert!((Setting::RegularRange.guarantee_factor(0.1) - 0.5).abs() < 1e-12);
        assert!((Setting::RegularSample.guarantee_factor(0.1) - 0.4).abs() < 1e-12);
        assert!((Setting::GeneralRange.guarantee_factor(0.1) - 0.7).abs() < 1e-12);
    }
}
