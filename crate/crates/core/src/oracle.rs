//! The pricing-query interaction model.
//!
//! Each query draws a fresh value from the hidden distribution and reveals only
//! whether it is at least the posted price. Queries are metered in a
//! [`QueryLedger`]; the optional one-sample hint is revealed in full and is not
//! metered.
//!
//! The oracle never hands out values or the distribution it samples from:
//!
//! ```compile_fail
//! use posted_price::{Distribution, PricingOracle};
//! let d = Distribution::point_mass(5.0).unwrap();
//! let oracle = PricingOracle::new(&d, 7);
//! let _hidden = oracle.distribution;
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};

/// What a batch of queries was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    QuantileCheck,
    RevenueEstimate,
    FinalSelection,
}

/// Monotone count of pricing queries, split by phase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    total: u64,
    by_phase: BTreeMap<Phase, u64>,
}

impl QueryLedger {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn phase(&self, phase: Phase) -> u64 {
        self.by_phase.get(&phase).copied().unwrap_or(0)
    }

    pub fn by_phase(&self) -> &BTreeMap<Phase, u64> {
        &self.by_phase
    }

    fn record(&mut self, phase: Phase, n: u64) {
        self.total += n;
        *self.by_phase.entry(phase).or_insert(0) += n;
    }
}

/// Answers pricing queries against a hidden distribution.
///
/// One oracle serves one trial; it owns its random stream, so a fixed seed and
/// a fixed query sequence reproduce the same bits.
#[derive(Debug, Clone)]
pub struct PricingOracle<'a> {
    distribution: &'a Distribution,
    rng: ChaCha8Rng,
    ledger: QueryLedger,
    budget: Option<u64>,
    hint_drawn: bool,
}

impl<'a> PricingOracle<'a> {
    pub fn new(distribution: &'a Distribution, seed: u64) -> Self {
        Self::from_rng(distribution, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(distribution: &'a Distribution, rng: ChaCha8Rng) -> Self {
        Self { distribution, rng, ledger: QueryLedger::default(), budget: None, hint_drawn: false }
    }

    /// Caps the total number of pricing queries.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn set_budget(&mut self, budget: Option<u64>) {
        self.budget = budget;
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    /// Posts price `p` once: returns whether a fresh value is at least `p`.
    pub fn query(&mut self, p: f64, phase: Phase) -> Result<bool> {
        Ok(self.query_many(p, 1, phase)? == 1)
    }

    /// Posts price `p` for `m` fresh values and returns the number of sales.
    ///
    /// If the budget runs out part-way, the queries up to the budget are still
    /// recorded before `BudgetExhausted` is returned.
    pub fn query_many(&mut self, p: f64, m: u64, phase: Phase) -> Result<u64> {
        let allowed = match self.budget {
            Some(b) => m.min(b.saturating_sub(self.ledger.total)),
            None => m,
        };
        // A fresh value is v = P(u) for u uniform on (0, 1], and P(u) ≥ p exactly
        // when u ≤ q(p), so the sale bit is read off u without inverting.
        let q = self.distribution.quantile_prob(p);
        let mut sales = 0;
        for _ in 0..allowed {
            let u = 1.0 - self.rng.gen::<f64>();
            sales += u64::from(u <= q);
        }
        self.ledger.record(phase, allowed);
        if allowed < m {
            return Err(Error::BudgetExhausted { budget: self.budget.unwrap_or(0) });
        }
        Ok(sales)
    }

    /// Reveals one value in full. Allowed once per oracle and not counted as a query.
    pub fn draw_hint_sample(&mut self) -> Result<f64> {
        if self.hint_drawn {
            return Err(Error::HintAlreadyConsumed);
        }
        self.hint_drawn = true;
        Ok(self.distribution.sample(&mut self.rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard_instances::{make_general_family, make_mhr_pair};

    #[test]
    fn point_mass_bits() {
        let d = Distribution::point_mass(5.0).unwrap();
        let mut o = PricingOracle::new(&d, 1);
        assert!((0..500).all(|_| o.query(3.0, Phase::QuantileCheck).unwrap()));
        assert!((0..500).all(|_| !o.query(7.0, Phase::RevenueEstimate).unwrap()));
        assert!(o.query(5.0, Phase::FinalSelection).unwrap());
        assert_eq!(o.ledger().total(), 1001);
        assert_eq!(o.ledger().phase(Phase::QuantileCheck), 500);
        assert_eq!(o.ledger().phase(Phase::FinalSelection), 1);
        let sum: u64 = o.ledger().by_phase().values().sum();
        assert_eq!(sum, o.ledger().total());
    }

    #[test]
    fn general_base_sale_rate_at_p1() {
        let fam = make_general_family(20.0, 0.1).unwrap();
        let mut o = PricingOracle::new(&fam.base, 3);
        let n = 1_000_000u64;
        let sales = o.query_many(10.0, n, Phase::RevenueEstimate).unwrap();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((sales as f64 / n as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn budget_tripwire() {
        let d = Distribution::point_mass(5.0).unwrap();
        let mut o = PricingOracle::new(&d, 1).with_budget(10);
        assert_eq!(o.query_many(1.0, 8, Phase::RevenueEstimate).unwrap(), 8);
        let err = o.query_many(1.0, 5, Phase::RevenueEstimate).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { budget: 10 }));
        assert_eq!(o.ledger().total(), 10);
        assert!(o.query(1.0, Phase::QuantileCheck).is_err());
        assert_eq!(o.ledger().total(), 10);
    }

    #[test]
    fn hint_is_single_use_and_unmetered() {
        let d = Distribution::point_mass(5.0).unwrap();
        let mut o = PricingOracle::new(&d, 1);
        assert_eq!(o.draw_hint_sample().unwrap(), 5.0);
        assert!(matches!(o.draw_hint_sample(), Err(Error::HintAlreadyConsumed)));
        assert_eq!(o.ledger().total(), 0);
    }

    #[test]
    fn same_seed_same_bits() {
        let f0 = make_mhr_pair(1.0 / 64.0).unwrap().f0;
        let run = |seed| {
            let mut o = PricingOracle::new(&f0, seed);
            let bits: Vec<bool> =
                (0..200).map(|i| o.query(1.0 + i as f64 / 200.0, Phase::QuantileCheck).unwrap()).collect();
            (bits, o.ledger().clone())
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9).0, run(10).0);
    }

    #[test]
    fn hint_histogram_matches_density() {
        // Bins of width 0.1 on [1, 2]: mass 0.04 each below 1.5 and 0.16 above.
        let f0 = make_mhr_pair(1.0 / 64.0).unwrap().f0;
        let oracles = 100_000;
        let mut counts = [0u64; 10];
        for seed in 0..oracles {
            let s = PricingOracle::new(&f0, seed).draw_hint_sample().unwrap();
            counts[(((s - 1.0) * 10.0) as usize).min(9)] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let expected = oracles as f64 * if i < 5 { 0.04 } else { 0.16 };
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        // 0.999 quantile of χ² with 9 degrees of freedom.
        assert!(chi2 < 27.877, "χ² = {chi2}");
    }
}
