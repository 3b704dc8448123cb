//! Pricing-query learners for single-buyer revenue maximization.
//!
//! A learner posts prices to a buyer whose value is redrawn for every query and
//! only observes whether a sale happened. The crate provides
//!
//! * [`distributions`]: value distributions, brute-force optima and class checkers,
//! * [`hard_instances`]: the closed-form lower-bound constructions,
//! * [`oracle`]: the metered pricing-query interface and the one-sample hint,
//! * [`estimation`]: empirical sale-probability and revenue estimators with their budgets,
//! * [`unified_search`]: the ternary-search learner for regular and MHR distributions,
//! * [`grid_search`]: the uniform-budget learner for general distributions on `[1, H]`,
//! * [`instantiation`]: search parameters for each hint model,
//! * [`harness`]: seeded Monte-Carlo trials, sweeps and constant calibration.

pub mod distributions;
pub mod error;
pub mod estimation;
pub mod grid_search;
pub mod hard_instances;
pub mod harness;
pub mod instantiation;
pub mod oracle;
pub mod unified_search;
pub mod verify;

pub use distributions::{ClassClaim, Distribution, DistributionSpec};
pub use error::{Error, Result};
pub use oracle::{Phase, PricingOracle, QueryLedger};
pub use unified_search::{RunTrace, SearchParams};
