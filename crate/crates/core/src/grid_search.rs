//! Uniform-budget grid search for arbitrary values on `[1, H]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimation::estimate_revenue;
use crate::oracle::{Phase, PricingOracle, QueryLedger};

/// `[1, (1+ε), …, (1+ε)^K, H]` with `K = ⌊log_{1+ε} H⌋`, without duplicates.
pub fn grid_for_general(h: f64, eps: f64) -> Result<Vec<f64>> {
    check_inputs(h, eps, 0.5)?;
    let base = 1.0 + eps;
    let mut grid = vec![1.0];
    for k in 1.. {
        let p = base.powi(k);
        if p > h {
            break;
        }
        grid.push(p);
    }
    if *grid.last().unwrap() < h {
        grid.push(h);
    }
    Ok(grid)
}

/// `N = ⌈(16H/ε²)·ln(4H/(εδ))⌉` queries per grid price.
pub fn per_price_budget(h: f64, eps: f64, delta: f64) -> Result<u64> {
    check_inputs(h, eps, delta)?;
    Ok((16.0 * h / (eps * eps) * (4.0 * h / (eps * delta)).ln()).ceil() as u64)
}

fn check_inputs(h: f64, eps: f64, delta: f64) -> Result<()> {
    if !(h.is_finite() && h >= 1.0) {
        return Err(invalid(format!("H must be at least 1, got {h}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1), got {eps}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("δ must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralTrace {
    pub h: f64,
    pub eps: f64,
    pub delta: f64,
    pub per_price_queries: u64,
    pub grid: Vec<f64>,
    pub estimates: Vec<f64>,
    pub output: f64,
    pub output_index: usize,
    pub ledger: QueryLedger,
}

/// Estimates revenue at every grid price with `N` fresh queries each and posts the best.
pub fn run_general(h: f64, eps: f64, delta: f64, oracle: &mut PricingOracle<'_>) -> Result<(f64, GeneralTrace)> {
    let grid = grid_for_general(h, eps)?;
    let n = per_price_budget(h, eps, delta)?;
    let mut estimates = Vec::with_capacity(grid.len());
    let mut best = (0usize, f64::NEG_INFINITY);
    for (k, &p) in grid.iter().enumerate() {
        let est = estimate_revenue(oracle, p, n, Phase::RevenueEstimate)?;
        if est > best.1 {
            best = (k, est);
        }
        estimates.push(est);
    }
    let output = grid[best.0];
    let trace = GeneralTrace {
        h,
        eps,
        delta,
        per_price_queries: n,
        grid,
        estimates,
        output,
        output_index: best.0,
        ledger: oracle.ledger().clone(),
    };
    Ok((output, trace))
}
