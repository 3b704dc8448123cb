//! Brute-force optimal prices and numerical checkers for the structural
//! properties of regular and MHR distributions.
//!
//! The checkers are grid-based: a "pass" certifies the property on the scanned
//! grid up to `tol`, nothing more. Tolerances are relative, `tol · max(1, |x|)`
//! against the quantity being compared.

use serde::Serialize;

use super::{Distribution, Family};
use crate::error::{invalid, Error, Result};

/// Smallest grid accepted by [`brute_force_opt`].
pub const MIN_OPT_GRID: usize = 1_000;

/// Default relative tolerance for the class checkers.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptResult {
    pub opt_price: f64,
    pub opt_revenue: f64,
    /// Number of prices scanned, including injected breakpoints.
    pub grid_resolution: usize,
}

/// Outcome of a grid check. `violation` describes the first failing point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub points_checked: usize,
    pub violation: Option<String>,
}

impl CheckReport {
    fn pass(points_checked: usize) -> Self {
        Self { passed: true, points_checked, violation: None }
    }

    fn fail(points_checked: usize, msg: String) -> Self {
        Self { passed: false, points_checked, violation: Some(msg) }
    }

    /// Combines two reports; the first violation wins.
    fn and(self, other: CheckReport) -> Self {
        let points_checked = self.points_checked + other.points_checked;
        match (self.violation, other.violation) {
            (Some(v), _) | (None, Some(v)) => Self::fail(points_checked, v),
            (None, None) => Self::pass(points_checked),
        }
    }
}

#[inline]
fn slack(tol: f64, x: f64) -> f64 {
    tol * x.abs().max(1.0)
}

/// `n` geometrically spaced prices on `[lo, hi]` merged with `extra` points inside it.
pub fn geometric_grid(lo: f64, hi: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n + extra.len() + 2);
    if lo == hi || n < 2 {
        pts.push(lo);
    } else {
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        pts.extend((0..n).map(|i| lo * (ratio * i as f64).exp()));
        pts[n - 1] = hi;
    }
    pts.extend(extra.iter().copied().filter(|p| *p >= lo && *p <= hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if lo == hi || n < 2 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut pts: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    pts[n - 1] = hi;
    pts
}

fn argmax_revenue(d: &Distribution, grid: &[f64]) -> Option<OptResult> {
    let mut best: Option<(f64, f64)> = None;
    for &p in grid {
        let rev = d.revenue(p);
        // Strict comparison over an ascending grid breaks ties toward the lowest price.
        if best.is_none_or(|(_, r)| rev > r) {
            best = Some((p, rev));
        }
    }
    best.map(|(opt_price, opt_revenue)| OptResult {
        opt_price,
        opt_revenue,
        grid_resolution: grid.len(),
    })
}

/// Revenue maximizer over a geometric grid of the support, augmented with every
/// atom and breakpoint.
pub fn brute_force_opt(d: &Distribution, grid_points: usize) -> Result<OptResult> {
    if grid_points < MIN_OPT_GRID {
        return Err(invalid(format!("brute-force grid needs at least {MIN_OPT_GRID} points")));
    }
    if !d.is_bounded() {
        return Err(Error::UnboundedSupport);
    }
    let grid = geometric_grid(d.support_lo(), d.support_hi(), grid_points, &d.breakpoints());
    Ok(argmax_revenue(d, &grid).expect("grid is nonempty"))
}

/// `max Rev(p)` over `p ∈ [lo, hi]` with `q(p) ≥ min_q`, or `None` when no such price exists.
pub fn brute_force_opt_within(
    d: &Distribution,
    lo: f64,
    hi: f64,
    min_q: f64,
    grid_points: usize,
) -> Result<Option<OptResult>> {
    if grid_points < MIN_OPT_GRID {
        return Err(invalid(format!("brute-force grid needs at least {MIN_OPT_GRID} points")));
    }
    if !(lo > 0.0 && lo <= hi) {
        return Err(invalid("search interval must satisfy 0 < lo ≤ hi"));
    }
    // {p : q(p) ≥ min_q} is (−∞, sup] because q is nonincreasing and left-continuous.
    let sup = if min_q <= 0.0 { f64::INFINITY } else { d.price_at_quantile(min_q.min(1.0)) };
    let top = hi.min(sup).min(d.support_hi().max(lo));
    if top < lo {
        return Ok(None);
    }
    let mut extra = d.breakpoints();
    extra.push(top);
    let grid: Vec<f64> = geometric_grid(lo, top, grid_points, &extra)
        .into_iter()
        .filter(|&p| d.quantile_prob(p) >= min_q)
        .collect();
    Ok(argmax_revenue(d, &grid))
}

/// Revenue in quantile space, `u · sup{p : q(p) ≥ u}`, with `R(0) = 0`.
fn quantile_revenue(d: &Distribution, u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        u * d.price_at_quantile(u)
    }
}

/// Concavity of the quantile-space revenue curve on `n + 1` equally spaced quantiles.
pub fn check_quantile_concavity(d: &Distribution, grid_points: usize, tol: f64) -> CheckReport {
    if !d.is_bounded() {
        return CheckReport::fail(0, "unbounded support".into());
    }
    let n = grid_points.max(2);
    let rev: Vec<f64> = (0..=n).map(|i| quantile_revenue(d, i as f64 / n as f64)).collect();
    for i in 1..n {
        let interp = 0.5 * (rev[i - 1] + rev[i + 1]);
        if rev[i] < interp - slack(tol, interp) {
            let u = |k: usize| k as f64 / n as f64;
            return CheckReport::fail(
                i,
                format!(
                    "quantile-space revenue not concave at q = ({:.6}, {:.6}, {:.6}): R = ({:.9}, {:.9}, {:.9})",
                    u(i - 1),
                    u(i),
                    u(i + 1),
                    rev[i - 1],
                    rev[i],
                    rev[i + 1]
                ),
            );
        }
    }
    CheckReport::pass(n - 1)
}

/// Prices strictly inside the continuous pieces where the density and the sale probability are positive.
fn continuous_grid(d: &Distribution, grid_points: usize) -> Vec<(f64, f64, f64)> {
    let pieces = d.continuous_pieces();
    if pieces.is_empty() {
        return Vec::new();
    }
    let grid = geometric_grid(d.support_lo(), d.support_hi(), grid_points, &[]);
    grid.into_iter()
        .filter(|p| pieces.iter().any(|&(lo, hi)| *p > lo && *p < hi))
        .filter_map(|p| {
            let f = d.density(p)?;
            let q = d.quantile_prob(p);
            (f > 0.0 && q > 0.0).then_some((p, f, q))
        })
        .collect()
}

fn check_nondecreasing(
    name: &str,
    values: impl Iterator<Item = (f64, f64)>,
    tol: f64,
) -> CheckReport {
    let mut prev: Option<(f64, f64)> = None;
    let mut count = 0;
    for (p, x) in values {
        if let Some((pp, px)) = prev {
            if x < px - slack(tol, px) {
                return CheckReport::fail(
                    count,
                    format!("{name} decreases between p = {pp:.6} ({px:.9}) and p = {p:.6} ({x:.9})"),
                );
            }
        }
        prev = Some((p, x));
        count += 1;
    }
    CheckReport::pass(count)
}

/// Regularity: virtual value `φ(v) = v − (1 − F(v))/f(v)` nondecreasing on the
/// continuous pieces, and revenue concave in quantile space.
pub fn check_regular(d: &Distribution, grid_points: usize, tol: f64) -> CheckReport {
    let phi = continuous_grid(d, grid_points).into_iter().map(|(p, f, q)| (p, p - q / f));
    check_nondecreasing("virtual value", phi, tol).and(check_quantile_concavity(d, grid_points, tol))
}

/// MHR: hazard rate `f/(1 − F)` nondecreasing, and no atom below the top of the support.
pub fn check_mhr(d: &Distribution, grid_points: usize, tol: f64) -> CheckReport {
    let interior_atom = match d.family() {
        Family::PointMass(_) => None,
        _ => d.atoms().into_iter().find(|&(x, _)| x < d.support_hi()),
    };
    if let Some((x, m)) = interior_atom {
        return CheckReport::fail(0, format!("atom of mass {m:.6} at {x:.6} below the top of the support"));
    }
    let hazard = continuous_grid(d, grid_points).into_iter().map(|(p, f, q)| (p, f / q));
    check_nondecreasing("hazard rate", hazard, tol)
}

/// Midpoint concavity of `Rev(p)` on `[support_lo, p_opt]` over a uniform grid.
pub fn check_half_concavity(d: &Distribution, grid_points: usize, tol: f64) -> Result<CheckReport> {
    let opt = brute_force_opt(d, grid_points.max(MIN_OPT_GRID))?;
    let grid = uniform_grid(d.support_lo(), opt.opt_price, grid_points);
    let rev: Vec<f64> = grid.iter().map(|&p| d.revenue(p)).collect();
    for i in 1..rev.len().saturating_sub(1) {
        let interp = 0.5 * (rev[i - 1] + rev[i + 1]);
        if rev[i] < interp - slack(tol, interp) {
            return Ok(CheckReport::fail(
                i,
                format!(
                    "Rev not concave at p = ({:.6}, {:.6}, {:.6}): ({:.9}, {:.9}, {:.9})",
                    grid[i - 1],
                    grid[i],
                    grid[i + 1],
                    rev[i - 1],
                    rev[i],
                    rev[i + 1]
                ),
            ));
        }
    }
    Ok(CheckReport::pass(rev.len()))
}

/// `Rev(p) ≥ Opt·(1 − q(p))` below the optimal price and `Rev(p) ≥ Opt·q(p)` above it.
pub fn check_rev_lower_bounds(d: &Distribution, grid_points: usize, tol: f64) -> Result<CheckReport> {
    let opt = brute_force_opt(d, grid_points.max(MIN_OPT_GRID))?;
    let grid = geometric_grid(d.support_lo(), d.support_hi(), grid_points, &d.breakpoints());
    for &p in &grid {
        let q = d.quantile_prob(p);
        let rev = p * q;
        let mut bounds = Vec::with_capacity(2);
        if p <= opt.opt_price {
            bounds.push(opt.opt_revenue * (1.0 - q));
        }
        if p >= opt.opt_price {
            bounds.push(opt.opt_revenue * q);
        }
        for bound in bounds {
            if rev < bound - slack(tol, bound) {
                return Ok(CheckReport::fail(
                    grid.len(),
                    format!("Rev({p:.6}) = {rev:.9} below lower bound {bound:.9}"),
                ));
            }
        }
    }
    Ok(CheckReport::pass(grid.len()))
}

/// Price with revenue at least `(1 − ε)·Opt` and sale probability at least `ε`:
/// the optimal price when `q(p_opt) ≥ ε`, otherwise the price where `q` crosses `ε`.
///
/// The crossing is located by bisection and reported as `sup{p : q(p) ≥ ε}`,
/// which is an atom's location when `q` jumps over `ε` there.
pub fn target_price(d: &Distribution, eps: f64, grid_points: usize) -> Result<f64> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(invalid("target price needs ε ∈ (0, 0.1]"));
    }
    let opt = brute_force_opt(d, grid_points)?;
    if d.quantile_prob(opt.opt_price) >= eps {
        return Ok(opt.opt_price);
    }
    // q(lo) ≥ ε > q(hi) throughout.
    let (mut lo, mut hi) = (d.support_lo(), opt.opt_price);
    if d.quantile_prob(lo) < eps {
        return Err(Error::InternalInvariant("sale probability never reaches ε".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d.quantile_prob(mid) >= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{DistributionSpec, Shape};
    use crate::hard_instances::{make_mhr_pair, make_regular_pair};

    const GRID: usize = 10_000;

    fn two_atoms() -> Distribution {
        DistributionSpec::DiscreteAtoms { values: vec![1.0, 100.0], masses: vec![0.5, 0.5] }
            .build()
            .unwrap()
    }

    /// q(p) = 2/(p+1) on [1, 39] with the remaining 0.05 as an atom at 39.
    fn pareto_tail() -> Distribution {
        DistributionSpec::PiecewiseCdf {
            breakpoints: vec![1.0, 39.0],
            pieces: vec![Shape::Rational { num: 2.0, slope: 1.0, offset: 1.0 }],
            class: crate::distributions::ClassClaim::Regular,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn brute_force_examples() {
        let minus = make_regular_pair(20.0, 0.1).unwrap().f_minus;
        let opt = brute_force_opt(&minus, 1_000_000).unwrap();
        assert!((opt.opt_price - 10.0).abs() < 1e-5);
        assert!((opt.opt_revenue - 2.0).abs() < 1e-3);

        let f1 = make_mhr_pair(1.0 / 64.0).unwrap().f1;
        let opt = brute_force_opt(&f1, GRID).unwrap();
        assert!((opt.opt_price - 1.75).abs() < 1e-12);
        assert!((opt.opt_revenue - (1.2 + 0.2 * 0.25 - 0.4 * 0.25 * 0.25)).abs() < 1e-12);

        let pm = Distribution::point_mass(5.0).unwrap();
        let opt = brute_force_opt(&pm, GRID).unwrap();
        assert_eq!((opt.opt_price, opt.opt_revenue), (5.0, 5.0));
    }

    #[test]
    fn brute_force_rejects_small_grid_and_unbounded() {
        let pm = Distribution::point_mass(5.0).unwrap();
        assert!(brute_force_opt(&pm, 10).is_err());
        let exp = DistributionSpec::TruncatedExponential { rate: 1.0, lower: 1.0, upper: None }
            .build()
            .unwrap();
        assert!(matches!(brute_force_opt(&exp, GRID), Err(Error::UnboundedSupport)));
    }

    #[test]
    fn brute_force_ties_go_low() {
        // Equal revenue 1 at every price on [1, 10].
        let d = DistributionSpec::PiecewiseCdf {
            breakpoints: vec![1.0, 10.0],
            pieces: vec![Shape::Rational { num: 1.0, slope: 1.0, offset: 0.0 }],
            class: crate::distributions::ClassClaim::Regular,
        }
        .build()
        .unwrap();
        let grid = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(argmax_revenue(&d, &grid).unwrap().opt_price, 1.0);
    }

    #[test]
    fn constrained_opt_respects_floor() {
        let minus = make_regular_pair(20.0, 0.1).unwrap().f_minus;
        let free = brute_force_opt_within(&minus, 1.0, 20.0, 0.05, GRID).unwrap().unwrap();
        assert!((free.opt_revenue - 2.0).abs() < 1e-9);
        // With a floor of 0.5 the best price is where q = 0.5.
        let tight = brute_force_opt_within(&minus, 1.0, 20.0, 0.5, GRID).unwrap().unwrap();
        assert!(minus.quantile_prob(tight.opt_price) >= 0.5);
        assert!(tight.opt_revenue < 2.0);
        assert!(brute_force_opt_within(&minus, 25.0, 30.0, 0.5, GRID).unwrap().is_none());
    }

    #[test]
    fn regular_checker_examples() {
        let mhr = make_mhr_pair(1.0 / 64.0).unwrap();
        assert!(check_regular(&mhr.f0, GRID, DEFAULT_TOL).passed);
        assert!(check_regular(&mhr.f1, GRID, DEFAULT_TOL).passed);
        assert!(check_regular(&make_regular_pair(20.0, 0.1).unwrap().f_minus, GRID, DEFAULT_TOL).passed);
        assert!(check_regular(&pareto_tail(), GRID, DEFAULT_TOL).passed);
        // q = 0.5 on (1, 100]: revenue 100u up to u = 0.5, then u.
        let report = check_regular(&two_atoms(), GRID, DEFAULT_TOL);
        assert!(!report.passed);
        assert!(report.violation.unwrap().contains("quantile-space"));
    }

    #[test]
    fn regular_plus_member_needs_small_h() {
        // The shared head has φ = −H/(H−4); the plus member's middle piece has φ = −Hε.
        // Regularity therefore needs H ≤ 4 + 1/ε.
        assert!(check_regular(&make_regular_pair(14.0, 0.1).unwrap().f_plus, GRID, DEFAULT_TOL).passed);
        assert!(check_regular(&make_regular_pair(20.0, 0.05).unwrap().f_plus, GRID, DEFAULT_TOL).passed);
        let report = check_regular(&make_regular_pair(20.0, 0.1).unwrap().f_plus, GRID, DEFAULT_TOL);
        assert!(!report.passed);
    }

    #[test]
    fn mhr_checker_examples() {
        let mhr = make_mhr_pair(1.0 / 64.0).unwrap();
        assert!(check_mhr(&mhr.f0, GRID, DEFAULT_TOL).passed);
        assert!(check_mhr(&mhr.f1, GRID, DEFAULT_TOL).passed);
        // Head of F₋ has hazard (H−4)/((H−4)v + H), which decreases.
        let minus = make_regular_pair(20.0, 0.1).unwrap().f_minus;
        let report = check_mhr(&minus, 200, DEFAULT_TOL);
        assert!(!report.passed);
        assert!(report.violation.unwrap().contains("hazard"));
        assert!(check_mhr(&Distribution::point_mass(5.0).unwrap(), GRID, DEFAULT_TOL).passed);
        assert!(!check_mhr(&two_atoms(), GRID, DEFAULT_TOL).passed);
    }

    #[test]
    fn half_concavity_examples() {
        let mhr = make_mhr_pair(1.0 / 64.0).unwrap();
        assert!(check_half_concavity(&mhr.f0, GRID, DEFAULT_TOL).unwrap().passed);
        assert!(check_half_concavity(&Distribution::point_mass(5.0).unwrap(), GRID, DEFAULT_TOL)
            .unwrap()
            .passed);
        let minus = make_regular_pair(20.0, 0.1).unwrap().f_minus;
        assert!(check_half_concavity(&minus, GRID, DEFAULT_TOL).unwrap().passed);
    }

    #[test]
    fn rev_lower_bound_examples() {
        let minus = make_regular_pair(20.0, 0.1).unwrap().f_minus;
        assert!(check_rev_lower_bounds(&minus, GRID, 1e-9).unwrap().passed);
        let f1 = make_mhr_pair(1.0 / 64.0).unwrap().f1;
        assert!(check_rev_lower_bounds(&f1, GRID, 1e-9).unwrap().passed);
        // At p_opt both bounds read Opt ≥ Opt·max(q, 1−q).
        let opt = brute_force_opt(&f1, GRID).unwrap();
        let q = f1.quantile_prob(opt.opt_price);
        assert!(opt.opt_revenue >= opt.opt_revenue * q.max(1.0 - q));
    }

    #[test]
    fn target_price_examples() {
        let f0 = make_mhr_pair(1.0 / 64.0).unwrap().f0;
        assert!((target_price(&f0, 0.1, GRID).unwrap() - 1.5).abs() < 1e-12);
        let minus = make_regular_pair(20.0, 0.1).unwrap().f_minus;
        assert!((target_price(&minus, 0.1, GRID).unwrap() - 10.0).abs() < 1e-12);
        // Optimum is the atom at 39 with q = 0.05; 2/(p+1) = 0.1 at p = 19.
        let d = pareto_tail();
        let opt = brute_force_opt(&d, GRID).unwrap();
        assert_eq!(opt.opt_price, 39.0);
        let p = target_price(&d, 0.1, GRID).unwrap();
        assert!((p - 19.0).abs() < 1e-9);
        assert!((d.quantile_prob(p) - 0.1).abs() < 1e-9);
        assert!(d.revenue(p) >= 0.9 * opt.opt_revenue);
        assert!(target_price(&d, 0.2, GRID).is_err());
    }

    #[test]
    fn grids_include_breakpoints() {
        let g = geometric_grid(1.0, 20.0, 5, &[10.0, 30.0]);
        assert!(g.contains(&10.0));
        assert!(!g.contains(&30.0));
        assert_eq!(*g.last().unwrap(), 20.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
