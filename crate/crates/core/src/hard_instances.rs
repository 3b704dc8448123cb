//! Closed-form lower-bound instances and checks of their separation.
//!
//! Three constructions:
//!
//! * [`RegularPair`]: two distributions on `[1, H]` with an atom at `H`, equal on
//!   `[1, H/2]`, whose optima are `2` at `H/2` and `2 + ε` at `H(2 + ε)/3`.
//! * [`MhrPair`]: two piecewise-constant densities on `[1, 2]` that agree on
//!   `[1, 1.5)`, with optima `(1.5, 1.2)` and `(1.5 + α, 1.2 + 0.2α − 0.4α²)`.
//! * [`GeneralFamily`]: a base distribution on `{1} ∪ {p_1, …, p_K}` with constant
//!   revenue 5 on the `p_k`, and `K − 1` perturbations that each move one mass up
//!   a step.
//!
//! All pieces are kept symbolic so the sale probabilities are exact to machine
//! precision; the separation margins are `O(ε²)`.

use serde::{Deserialize, Serialize};

use crate::distributions::checks::{geometric_grid, OptResult};
use crate::distributions::{
    ClassClaim, DiscreteAtoms, Distribution, DistributionSpec, Family, PiecewiseCdf, Shape,
};
use crate::error::{invalid, Result};

/// Default grid for [`separation_check`].
pub const SEPARATION_GRID: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularMember {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MhrMember {
    F0,
    F1,
}

#[derive(Debug, Clone)]
pub struct RegularPair {
    pub f_plus: Distribution,
    pub f_minus: Distribution,
    pub h: f64,
    pub eps: f64,
    /// Approximation slack of the lower bound; the pair separates `(1 − α·ε)`-optimal prices.
    pub alpha: f64,
}

impl RegularPair {
    pub const ALPHA: f64 = 0.01;

    /// Every `(1 − αε)`-optimal price for the minus member lies at or below this price.
    pub fn p_minus(&self) -> f64 {
        (1.0 - self.alpha * self.eps) * self.h / (2.0 - self.alpha)
    }

    /// Every `(1 − αε)`-optimal price for the plus member lies at or above this price.
    pub fn p_plus(&self) -> f64 {
        let e = self.eps;
        (1.0 - self.alpha * e) * (2.0 + e) * self.h / (3.0 + self.alpha * (2.0 + e))
    }
}

pub fn make_regular_pair(h: f64, eps: f64) -> Result<RegularPair> {
    if !(h.is_finite() && h >= 10.0) {
        return Err(invalid(format!("regular pair needs H ≥ 10 (got {h})")));
    }
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(invalid(format!("regular pair needs ε ∈ (0, 1/10] (got {eps})")));
    }
    let head = Shape::Rational { num: 2.0 * h - 4.0, slope: h - 4.0, offset: h };
    let build = |member: RegularMember| -> Result<Distribution> {
        let (knee, middle, tail) = match member {
            RegularMember::Plus => (
                h * (2.0 + eps) / 3.0,
                Shape::Rational { num: 2.0 + 4.0 * eps, slope: 1.0, offset: h * eps },
                Shape::Rational { num: 1.0 - eps, slope: 2.0, offset: -h * (1.0 + eps) },
            ),
            RegularMember::Minus => (
                h * (2.0 - eps) / 3.0,
                Shape::Rational { num: 2.0 - 4.0 * eps, slope: 1.0, offset: -h * eps },
                Shape::Rational { num: 1.0 + eps, slope: 2.0, offset: -h * (1.0 - eps) },
            ),
        };
        let cdf = PiecewiseCdf::new(vec![1.0, h / 2.0, knee, h], vec![head, middle, tail])?;
        Ok(Distribution::from_parts(
            DistributionSpec::LbRegularPair { h, eps, member },
            Family::Piecewise(cdf),
            ClassClaim::Regular,
        ))
    };
    Ok(RegularPair {
        f_plus: build(RegularMember::Plus)?,
        f_minus: build(RegularMember::Minus)?,
        h,
        eps,
        alpha: RegularPair::ALPHA,
    })
}

#[derive(Debug, Clone)]
pub struct MhrPair {
    pub f0: Distribution,
    pub f1: Distribution,
    pub eps: f64,
    /// Width of the shifted region, `16ε`.
    pub alpha: f64,
    /// Density of `F₁` on `[1.5 + α, 2]`.
    pub d2: f64,
}

pub fn make_mhr_pair(eps: f64) -> Result<MhrPair> {
    if !(eps > 0.0 && eps <= 1.0 / 64.0) {
        return Err(invalid(format!("MHR pair needs ε ∈ (0, 1/64] (got {eps})")));
    }
    let alpha = 16.0 * eps;
    let d2 = (0.8 - 0.4 * alpha) / (0.5 - alpha);
    let head = Shape::Linear { at_start: 1.0, density: 0.4 };
    let f0 = PiecewiseCdf::new(
        vec![1.0, 1.5, 2.0],
        vec![head, Shape::Linear { at_start: 0.8, density: 1.6 }],
    )?;
    let f1 = PiecewiseCdf::new(
        vec![1.0, 1.5 + alpha, 2.0],
        vec![head, Shape::Linear { at_start: 0.8 - 0.4 * alpha, density: d2 }],
    )?;
    let wrap = |member, cdf| {
        Distribution::from_parts(
            DistributionSpec::LbMhrPair { eps, member },
            Family::Piecewise(cdf),
            ClassClaim::Mhr,
        )
    };
    Ok(MhrPair { f0: wrap(MhrMember::F0, f0), f1: wrap(MhrMember::F1, f1), eps, alpha, d2 })
}

#[derive(Debug, Clone)]
pub struct GeneralFamily {
    pub base: Distribution,
    /// `perturbed[k - 1]` is `F_k` for `k = 1..K−1`.
    pub perturbed: Vec<Distribution>,
    pub h: f64,
    pub eps: f64,
    /// Spacing `Hε/2` of the support points.
    pub delta: f64,
    /// Number of support points above 1, `1/ε + 1`.
    pub k: usize,
    /// `p_1 < … < p_K`, from `H/2` to `H`.
    pub support: Vec<f64>,
    /// Masses of the base distribution on `support`.
    pub base_masses: Vec<f64>,
}

impl GeneralFamily {
    /// `0` is the base distribution, `k ≥ 1` the k-th perturbation.
    pub fn member(&self, k: usize) -> Result<&Distribution> {
        match k {
            0 => Ok(&self.base),
            k if k <= self.perturbed.len() => Ok(&self.perturbed[k - 1]),
            _ => Err(invalid(format!(
                "general family has members 0..={} (got {k})",
                self.perturbed.len()
            ))),
        }
    }
}

pub fn make_general_family(h: f64, eps: f64) -> Result<GeneralFamily> {
    if !(h.is_finite() && h >= 20.0) {
        return Err(invalid(format!("general family needs H ≥ 20 (got {h})")));
    }
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(invalid(format!("general family needs ε ∈ (0, 1/10] (got {eps})")));
    }
    let inv = 1.0 / eps;
    if (inv - inv.round()).abs() > 1e-9 {
        return Err(invalid(format!("general family needs 1/ε to be an integer (got {inv})")));
    }
    let k = inv.round() as usize + 1;
    let delta = h * eps / 2.0;
    let mut support: Vec<f64> = (0..k).map(|j| h / 2.0 + j as f64 * delta).collect();
    support[k - 1] = h;
    let mut base_masses: Vec<f64> = support
        .windows(2)
        .map(|w| 5.0 * (w[1] - w[0]) / (w[0] * w[1]))
        .collect();
    base_masses.push(5.0 / h);

    let atoms = |masses: &[f64]| -> Result<DiscreteAtoms> {
        let mut values = vec![1.0];
        values.extend_from_slice(&support);
        let mut all = vec![1.0 - 10.0 / h];
        all.extend_from_slice(masses);
        DiscreteAtoms::new(values, all)
    };
    let wrap = |member: usize, masses: &[f64]| -> Result<Distribution> {
        Ok(Distribution::from_parts(
            DistributionSpec::LbGeneralFamily { h, eps, member },
            Family::Atoms(atoms(masses)?),
            ClassClaim::General,
        ))
    };
    let base = wrap(0, &base_masses)?;
    let perturbed = (1..k)
        .map(|m| {
            let mut masses = base_masses.clone();
            masses[m] += masses[m - 1];
            masses[m - 1] = 0.0;
            wrap(m, &masses)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneralFamily { base, perturbed, h, eps, delta, k, support, base_masses })
}

/// Near-optimal price set of one member, as seen on the check grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearOptimalSet {
    pub opt: OptResult,
    pub threshold: f64,
    /// Smallest and largest grid price in the set.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub disjoint: bool,
    pub approx_factor: f64,
    pub sets: Vec<NearOptimalSet>,
    /// Midpoints of the gaps between consecutive sets, ordered by price.
    pub thresholds: Vec<f64>,
    /// A grid price that is near-optimal for two members, with their indices.
    pub overlap: Option<(usize, usize, f64)>,
}

/// Checks that no grid price is `approx_factor`-optimal for two of `members`.
pub fn separation_check(
    members: &[&Distribution],
    approx_factor: f64,
    grid_points: usize,
) -> Result<SeparationReport> {
    if members.len() < 2 {
        return Err(invalid("separation needs at least two distributions"));
    }
    if !(approx_factor > 0.0 && approx_factor <= 1.0) {
        return Err(invalid("approximation factor must lie in (0, 1]"));
    }
    let lo = members.iter().map(|d| d.support_lo()).fold(f64::INFINITY, f64::min);
    let hi = members.iter().map(|d| d.support_hi()).fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return Err(crate::error::Error::UnboundedSupport);
    }
    let extra: Vec<f64> = members.iter().flat_map(|d| d.breakpoints()).collect();
    let grid = geometric_grid(lo, hi, grid_points, &extra);

    let revenues: Vec<Vec<f64>> =
        members.iter().map(|d| grid.iter().map(|&p| d.revenue(p)).collect()).collect();
    let mut sets = Vec::with_capacity(members.len());
    let mut masks = Vec::with_capacity(members.len());
    for rev in &revenues {
        let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
        for (i, &r) in rev.iter().enumerate() {
            if r > best {
                best = r;
                best_i = i;
            }
        }
        let threshold = approx_factor * best;
        let mask: Vec<bool> = rev.iter().map(|&r| r >= threshold).collect();
        let first = mask.iter().position(|&m| m).expect("the optimum is in its own set");
        let last = mask.iter().rposition(|&m| m).expect("nonempty");
        sets.push(NearOptimalSet {
            opt: OptResult { opt_price: grid[best_i], opt_revenue: best, grid_resolution: grid.len() },
            threshold,
            lo: grid[first],
            hi: grid[last],
            count: mask.iter().filter(|&&m| m).count(),
        });
        masks.push(mask);
    }

    let mut overlap = None;
    'scan: for i in 0..grid.len() {
        let mut owner = None;
        for (m, mask) in masks.iter().enumerate() {
            if mask[i] {
                if let Some(o) = owner {
                    overlap = Some((o, m, grid[i]));
                    break 'scan;
                }
                owner = Some(m);
            }
        }
    }

    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by(|&a, &b| sets[a].lo.total_cmp(&sets[b].lo));
    let thresholds = order
        .windows(2)
        .filter(|w| sets[w[0]].hi < sets[w[1]].lo)
        .map(|w| 0.5 * (sets[w[0]].hi + sets[w[1]].lo))
        .collect();

    Ok(SeparationReport { disjoint: overlap.is_none(), approx_factor, sets, thresholds, overlap })
}
