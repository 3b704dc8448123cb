//! Ternary search over a geometric price grid for regular and MHR values.
//!
//! Each round either discards the top half of the current window because the
//! sale probability at its midpoint pivot is too small, or compares revenue
//! estimates at two pivots and keeps the side that can still contain a
//! near-optimal price. Once fewer than 20 grid points remain, every surviving
//! point and every pivot seen along the way is re-estimated and the best one is
//! posted.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{
    estimate_quantile, estimate_revenue, quantile_queries, revenue_queries, EstimateBudgets, DEFAULT_C,
};
use crate::oracle::{Phase, PricingOracle, QueryLedger};

/// The loop stops once the window holds fewer than this many grid points.
pub const MIN_WINDOW: usize = 20;

/// Parameters of one search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Lowest candidate price `ℓ`.
    pub lo: f64,
    /// Highest candidate price `r`.
    pub hi: f64,
    pub eps: f64,
    pub delta: f64,
    /// Sale-probability floor `γ`.
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl SearchParams {
    pub fn new(lo: f64, hi: f64, eps: f64, delta: f64, gamma: f64) -> Result<Self> {
        let p = Self { lo, hi, eps, delta, gamma, c: DEFAULT_C };
        p.validate()?;
        Ok(p)
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        self.c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.lo <= self.hi) {
            return Err(invalid(format!("need 0 < ℓ ≤ r, got ℓ={} r={}", self.lo, self.hi)));
        }
        // ε above 0.1 is accepted for sweeps; the pivot windows catch it if it breaks the search.
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("ε must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(invalid(format!("δ must lie in (0, 1], got {}", self.delta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid(format!("γ must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(invalid(format!("C must be positive, got {}", self.c)));
        }
        let rt = self.r_tilde();
        if !(rt.is_finite() && rt > 0.0) {
            return Err(invalid(format!("round bound is not finite and positive: {rt}")));
        }
        Ok(())
    }

    /// `R̃ = 22·ln²(r/ℓ) + 44·ln(r/ℓ)·ln(1/ε) + 66·ln(1/ε)`, unceiled.
    pub fn r_tilde(&self) -> f64 {
        let lr = (self.hi / self.lo).ln();
        let le = (1.0 / self.eps).ln();
        22.0 * lr * lr + 44.0 * lr * le + 66.0 * le
    }

    pub fn budgets(&self) -> EstimateBudgets {
        EstimateBudgets { c: self.c, r_tilde: self.r_tilde(), delta: self.delta, gamma: self.gamma, eps: self.eps }
    }

    /// Worst-case total queries: `(3⌈R̃⌉ + 20)` revenue-sized batches.
    pub fn query_bound(&self) -> u64 {
        (3 * round_bound(self) + MIN_WINDOW as u64) * revenue_queries(&self.budgets())
    }
}

/// `{(1+ε)^k·ℓ ≤ r}`, ascending.
pub fn build_grid(params: &SearchParams) -> Vec<f64> {
    let base = 1.0 + params.eps;
    let mut grid = vec![params.lo];
    for k in 1.. {
        let p = params.lo * base.powi(k);
        if p > params.hi {
            break;
        }
        grid.push(p);
    }
    grid
}

/// `⌈R̃⌉`.
pub fn round_bound(params: &SearchParams) -> u64 {
    params.r_tilde().ceil() as u64
}

/// Indices of the two pivots of a window `grid[lo..=hi]`.
///
/// `a` is the first point above `ℓᵢ + 0.2(rᵢ − ℓᵢ)` and `b` the first above
/// `ℓᵢ + 0.5(rᵢ − ℓᵢ)`. Fails with `InternalInvariant` unless `a` falls below
/// `ℓᵢ + 0.3(rᵢ − ℓᵢ)` and `b` below `ℓᵢ + 0.6(rᵢ − ℓᵢ)`.
pub fn pick_pivots(grid: &[f64], lo: usize, hi: usize) -> Result<(usize, usize)> {
    if hi >= grid.len() || hi + 1 < lo + MIN_WINDOW {
        return Err(invalid(format!("pivots need at least {MIN_WINDOW} points, got {lo}..={hi}")));
    }
    let (l, r) = (grid[lo], grid[hi]);
    let first_above = |frac: f64| {
        let t = l + frac * (r - l);
        lo + grid[lo..=hi].partition_point(|&p| p <= t)
    };
    let (a, b) = (first_above(0.2), first_above(0.5));
    if grid[a] >= l + 0.3 * (r - l) || grid[b] >= l + 0.6 * (r - l) {
        return Err(Error::InternalInvariant(format!(
            "pivot windows violated on [{l}, {r}]: a={} b={}",
            grid[a], grid[b]
        )));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    PruneRightByQuantile,
    KeepRight,
    KeepLeft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub i: u64,
    /// `|Sᵢ|` at the start of the round.
    pub size: usize,
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub b: f64,
    pub q_hat_b: f64,
    pub decision: Decision,
    pub rev_hat_a: Option<f64>,
    pub rev_hat_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalEstimate {
    pub price: f64,
    pub estimate: f64,
}

/// Everything one search saw and decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub params: SearchParams,
    pub grid_len: usize,
    pub round_bound: u64,
    pub quantile_queries: u64,
    pub revenue_queries: u64,
    pub rounds: Vec<RoundRecord>,
    /// `|S_{R+1}|`, the window left when the loop stops.
    pub final_size: usize,
    pub s_can: Vec<f64>,
    pub final_estimates: Vec<FinalEstimate>,
    pub output: f64,
    pub output_index: usize,
    /// The search cannot observe `q(ℓ) ≥ γ`; it is always reported unchecked.
    pub gamma_precondition_checked: bool,
    pub ledger: QueryLedger,
}

impl RunTrace {
    pub fn round_count(&self) -> u64 {
        self.rounds.len() as u64
    }

    /// Recomputes the pivot windows from the recorded rounds.
    pub fn pivots_within_windows(&self) -> bool {
        self.rounds
            .iter()
            .all(|r| r.a < r.lo + 0.3 * (r.hi - r.lo) && r.b < r.lo + 0.6 * (r.hi - r.lo) && r.a < r.b)
    }

    /// Each round strictly shrinks the window.
    pub fn windows_shrink(&self) -> bool {
        let sizes: Vec<usize> = self.rounds.iter().map(|r| r.size).chain([self.final_size]).collect();
        sizes.windows(2).all(|w| w[1] < w[0])
    }
}

/// Runs the search against `oracle` and returns the posted price with its trace.
pub fn run(params: &SearchParams, oracle: &mut PricingOracle<'_>) -> Result<(f64, RunTrace)> {
    params.validate()?;
    let grid = build_grid(params);
    let budgets = params.budgets();
    let mq = quantile_queries(&budgets);
    let mr = revenue_queries(&budgets);
    let bound = round_bound(params);

    let (mut lo, mut hi) = (0usize, grid.len() - 1);
    let mut s_can = BTreeSet::new();
    let mut rounds = Vec::new();
    while hi - lo + 1 >= MIN_WINDOW {
        let i = rounds.len() as u64 + 1;
        if i > bound {
            return Err(Error::InternalInvariant(format!("round {i} exceeds the bound {bound}")));
        }
        let (a, b) = pick_pivots(&grid, lo, hi)?;
        let size = hi - lo + 1;
        let (l_i, r_i) = (grid[lo], grid[hi]);
        let q_hat_b = estimate_quantile(oracle, grid[b], mq, Phase::QuantileCheck)?;
        let (decision, rev_hat_a, rev_hat_b) = if q_hat_b < 0.75 * params.gamma {
            hi = b;
            (Decision::PruneRightByQuantile, None, None)
        } else {
            s_can.insert(a);
            s_can.insert(b);
            let ra = estimate_revenue(oracle, grid[a], mr, Phase::RevenueEstimate)?;
            let rb = estimate_revenue(oracle, grid[b], mr, Phase::RevenueEstimate)?;
            let decision = if (1.0 + params.eps) * ra < (1.0 - params.eps) * rb {
                lo = a;
                Decision::KeepRight
            } else {
                hi = b;
                Decision::KeepLeft
            };
            (decision, Some(ra), Some(rb))
        };
        rounds.push(RoundRecord {
            i,
            size,
            lo: l_i,
            hi: r_i,
            a: grid[a],
            b: grid[b],
            q_hat_b,
            decision,
            rev_hat_a,
            rev_hat_b,
        });
    }
    let final_size = hi - lo + 1;
    s_can.extend(lo..=hi);

    let mut final_estimates = Vec::with_capacity(s_can.len());
    let mut best: Option<(usize, f64)> = None;
    for &k in &s_can {
        let est = estimate_revenue(oracle, grid[k], mr, Phase::FinalSelection)?;
        final_estimates.push(FinalEstimate { price: grid[k], estimate: est });
        // Ascending order plus a strict comparison keeps the lowest price on ties.
        if best.is_none_or(|(_, e)| est > e) {
            best = Some((k, est));
        }
    }
    let (output_index, _) = best.expect("candidate set always holds the final window");
    let output = grid[output_index];
    let trace = RunTrace {
        params: *params,
        grid_len: grid.len(),
        round_bound: bound,
        quantile_queries: mq,
        revenue_queries: mr,
        rounds,
        final_size,
        s_can: s_can.iter().map(|&k| grid[k]).collect(),
        final_estimates,
        output,
        output_index,
        gamma_precondition_checked: false,
        ledger: oracle.ledger().clone(),
    };
    Ok((output, trace))
}
