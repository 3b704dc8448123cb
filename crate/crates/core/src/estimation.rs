//! Empirical quantile and revenue estimates and the query budgets that size them.
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::{Phase, PricingOracle};

/// Default value of the budget constant `C`.
pub const DEFAULT_C: f64 = 20.0;

/// Inputs to the per-price budget formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateBudgets {
    #[serde(rename = "C")]
    pub c: f64,
    /// Round bound `R̃`, unceiled.
    pub r_tilde: f64,
    pub delta: f64,
    pub gamma: f64,
    pub eps: f64,
}

impl EstimateBudgets {
    pub fn new(c: f64, r_tilde: f64, delta: f64, gamma: f64, eps: f64) -> Result<Self> {
        let b = Self { c, r_tilde, delta, gamma, eps };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.c, self.r_tilde, self.delta, self.gamma, self.eps]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if !positive || self.delta > 1.0 || self.gamma > 1.0 || self.eps > 1.0 {
            return Err(invalid(format!("budget inputs out of range: {self:?}")));
        }
        Ok(())
    }

    fn log_term(&self) -> f64 {
        self.c * (self.r_tilde / self.delta).ln()
    }
}

/// `⌈C·ln(R̃/δ)/γ⌉`, at least 1.
pub fn quantile_queries(b: &EstimateBudgets) -> u64 {
    ceil_count(b.log_term() / b.gamma)
}

/// `⌈C·ln(R̃/δ)/(γ·ε²)⌉`, at least 1.
pub fn revenue_queries(b: &EstimateBudgets) -> u64 {
    ceil_count(b.log_term() / (b.gamma * b.eps * b.eps))
}

fn ceil_count(x: f64) -> u64 {
    // R̃/δ can sit below e when R̃ is tiny; never ask for zero queries.
    (x.ceil() as u64).max(1)
}

/// Posts `p` to `m` fresh values and returns the fraction that sold.
pub fn estimate_quantile(oracle: &mut PricingOracle<'_>, p: f64, m: u64, phase: Phase) -> Result<f64> {
    if m == 0 {
        return Err(invalid("estimate needs at least one query"));
    }
    let sales = oracle.query_many(p, m, phase)?;
    Ok(sales as f64 / m as f64)
}

/// `p · q̂(p)` from `m` fresh queries.
pub fn estimate_revenue(oracle: &mut PricingOracle<'_>, p: f64, m: u64, phase: Phase) -> Result<f64> {
    Ok(p * estimate_quantile(oracle, p, m, phase)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Distribution;
    use crate::hard_instances::{make_mhr_pair, make_regular_pair};

    fn budgets(c: f64, r_tilde: f64, delta: f64, gamma: f64, eps: f64) -> EstimateBudgets {
        EstimateBudgets::new(c, r_tilde, delta, gamma, eps).unwrap()
    }

    #[test]
    fn budget_formulas() {
        let b = budgets(20.0, 100.0, 0.1, 0.5, 0.1);
        assert_eq!(quantile_queries(&b), 277);
        assert_eq!(revenue_queries(&b), 27632);
        let eps_one = EstimateBudgets { eps: 1.0, ..b };
        assert_eq!(revenue_queries(&eps_one), quantile_queries(&b));
        // C·ln(R̃/δ) = 10 exactly when R̃/δ = e^{1/2} and C = 20.
        let exact = budgets(20.0, 0.5f64.exp(), 1.0, 1.0, 1.0);
        assert_eq!(quantile_queries(&exact), 10);
    }

    #[test]
    fn budget_scaling() {
        let b = budgets(20.0, 300.0, 0.05, 0.4, 0.08);
        let half = EstimateBudgets { gamma: 0.2, ..b };
        let q = quantile_queries(&b);
        assert!(quantile_queries(&half).abs_diff(2 * q) <= 1);
        let quarter = EstimateBudgets { eps: 0.02, ..b };
        assert!(revenue_queries(&quarter).abs_diff(16 * revenue_queries(&b)) <= 16);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(EstimateBudgets::new(0.0, 10.0, 0.1, 0.5, 0.1).is_err());
        assert!(EstimateBudgets::new(20.0, 10.0, 1.5, 0.5, 0.1).is_err());
        assert!(EstimateBudgets::new(20.0, 10.0, 0.1, 0.0, 0.1).is_err());
        assert!(EstimateBudgets::new(20.0, f64::NAN, 0.1, 0.5, 0.1).is_err());
    }

    #[test]
    fn point_mass_estimates_are_exact() {
        let d = Distribution::point_mass(5.0).unwrap();
        let mut o = PricingOracle::new(&d, 4);
        assert_eq!(estimate_quantile(&mut o, 3.0, 100, Phase::QuantileCheck).unwrap(), 1.0);
        assert_eq!(estimate_quantile(&mut o, 7.0, 100, Phase::QuantileCheck).unwrap(), 0.0);
        assert_eq!(estimate_revenue(&mut o, 3.0, 17, Phase::RevenueEstimate).unwrap(), 3.0);
        assert_eq!(estimate_revenue(&mut o, 0.0, 5, Phase::RevenueEstimate).unwrap(), 0.0);
        assert_eq!(o.ledger().total(), 222);
        assert!(estimate_quantile(&mut o, 3.0, 0, Phase::QuantileCheck).is_err());
    }

    #[test]
    fn estimates_are_multiples_of_one_over_m() {
        let f0 = make_mhr_pair(1.0 / 64.0).unwrap().f0;
        let mut o = PricingOracle::new(&f0, 11);
        for m in [1u64, 3, 7, 64] {
            let q = estimate_quantile(&mut o, 1.6, m, Phase::QuantileCheck).unwrap();
            let k = q * m as f64;
            assert!((k - k.round()).abs() < 1e-9 && (0.0..=1.0).contains(&q));
        }
    }

    /// Bernstein sample size for relative error `rel` at a sale probability `q`.
    fn bernstein_m(q: f64, rel: f64, delta: f64) -> u64 {
        let t = rel * q;
        ((2.0 * q * (1.0 - q) + 2.0 * t / 3.0) * (2.0 / delta).ln() / (t * t)).ceil() as u64
    }

    #[test]
    fn bernstein_audit_on_mhr_head() {
        let f0 = make_mhr_pair(1.0 / 64.0).unwrap().f0;
        let q = f0.quantile_prob(1.5);
        assert!((q - 0.8).abs() < 1e-12);
        let m = bernstein_m(q, 0.1, 0.01);
        assert_eq!(m, 310);
        let reps = 1000;
        let mut o = PricingOracle::new(&f0, 2024);
        let good = (0..reps)
            .filter(|_| {
                let est = estimate_quantile(&mut o, 1.5, m, Phase::QuantileCheck).unwrap();
                (est - q).abs() <= 0.1 * q
            })
            .count();
        assert!(good >= 990, "{good} of {reps} within tolerance");
    }

    #[test]
    fn revenue_estimate_on_regular_minus() {
        let pair = make_regular_pair(20.0, 0.1).unwrap();
        let mut o = PricingOracle::new(&pair.f_minus, 5);
        let est = estimate_revenue(&mut o, 10.0, 27632, Phase::RevenueEstimate).unwrap();
        assert!((est - 2.0).abs() <= 0.2, "estimate {est}");
    }
}
