//! Value distributions with analytic sale probability and revenue.
//!
//! Conventions: the CDF is strict, `F(v) = Pr[value < v]`, so the sale
//! probability `q(p) = 1 − F(p) = Pr[value ≥ p]` counts an atom at the posted
//! price as a sale. Every family exposes the generalized inverse
//! `sup{p : q(p) ≥ u}`, which drives both the sampler and the quantile-space
//! checkers in [`checks`].
//!
//! Distributions are built from a [`DistributionSpec`], which is also their JSON
//! form:
//!
//! ```json
//! {"family": "truncated-exponential", "params": {"rate": 0.5, "lower": 1.0, "upper": 20.0}}
//! ```

pub mod checks;
pub mod piecewise;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hard_instances::{self, MhrMember, RegularMember};
pub use piecewise::{PiecewiseCdf, Shape};

/// Structural class a distribution is claimed to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassClaim {
    Regular,
    Mhr,
    General,
}

impl ClassClaim {
    /// Whether a distribution carrying `self` may be fed to an algorithm that needs `needed`.
    pub fn satisfies(self, needed: ClassClaim) -> bool {
        match needed {
            ClassClaim::General => true,
            ClassClaim::Regular => matches!(self, ClassClaim::Regular | ClassClaim::Mhr),
            ClassClaim::Mhr => self == ClassClaim::Mhr,
        }
    }
}

fn default_general() -> ClassClaim {
    ClassClaim::General
}

/// JSON-serializable description of a distribution.
///
/// Parameter names per family:
///
/// | family | params |
/// |---|---|
/// | `piecewise-cdf` | `breakpoints`, `pieces` (each tagged by `shape`: `rational` {`num`,`slope`,`offset`}, `linear` {`at_start`,`density`}, `exponential` {`at_start`,`rate`}), optional `class` |
/// | `discrete-atoms` | `values`, `masses` |
/// | `point-mass` | `value` |
/// | `truncated-exponential` | `rate`, `lower`, optional `upper` (atom at `upper`; omitted means untruncated) |
/// | `lb-regular-pair` | `H`, `eps`, `member` (`plus` / `minus`) |
/// | `lb-mhr-pair` | `eps`, `member` (`f0` / `f1`) |
/// | `lb-general-family` | `H`, `eps`, `member` (0 for the base, k for the k-th perturbation) |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum DistributionSpec {
    PiecewiseCdf {
        breakpoints: Vec<f64>,
        pieces: Vec<Shape>,
        #[serde(default = "default_general")]
        class: ClassClaim,
    },
    DiscreteAtoms {
        values: Vec<f64>,
        masses: Vec<f64>,
    },
    PointMass {
        value: f64,
    },
    TruncatedExponential {
        rate: f64,
        lower: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
    LbRegularPair {
        #[serde(rename = "H")]
        h: f64,
        eps: f64,
        member: RegularMember,
    },
    LbMhrPair {
        eps: f64,
        member: MhrMember,
    },
    LbGeneralFamily {
        #[serde(rename = "H")]
        h: f64,
        eps: f64,
        member: usize,
    },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<Distribution> {
        match self {
            DistributionSpec::PiecewiseCdf { breakpoints, pieces, class } => {
                let cdf = PiecewiseCdf::new(breakpoints.clone(), pieces.clone())?;
                Ok(Distribution::from_parts(self.clone(), Family::Piecewise(cdf), *class))
            }
            DistributionSpec::DiscreteAtoms { values, masses } => {
                let atoms = DiscreteAtoms::new(values.clone(), masses.clone())?;
                Ok(Distribution::from_parts(self.clone(), Family::Atoms(atoms), ClassClaim::General))
            }
            &DistributionSpec::PointMass { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(invalid("point mass must sit at a positive finite price"));
                }
                Ok(Distribution::from_parts(self.clone(), Family::PointMass(value), ClassClaim::Mhr))
            }
            &DistributionSpec::TruncatedExponential { rate, lower, upper } => {
                let fam = TruncatedExponential::new(rate, lower, upper)?;
                Ok(Distribution::from_parts(self.clone(), Family::TruncExp(fam), ClassClaim::Mhr))
            }
            &DistributionSpec::LbRegularPair { h, eps, member } => {
                let pair = hard_instances::make_regular_pair(h, eps)?;
                Ok(match member {
                    RegularMember::Plus => pair.f_plus,
                    RegularMember::Minus => pair.f_minus,
                })
            }
            &DistributionSpec::LbMhrPair { eps, member } => {
                let pair = hard_instances::make_mhr_pair(eps)?;
                Ok(match member {
                    MhrMember::F0 => pair.f0,
                    MhrMember::F1 => pair.f1,
                })
            }
            &DistributionSpec::LbGeneralFamily { h, eps, member } => {
                let fam = hard_instances::make_general_family(h, eps)?;
                fam.member(member).cloned()
            }
        }
    }

    /// The same family re-parameterized to the value range `[1, h]`, for sweeps over `H`.
    pub fn with_range_hi(&self, h: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            DistributionSpec::LbRegularPair { h: hh, .. }
            | DistributionSpec::LbGeneralFamily { h: hh, .. } => *hh = h,
            DistributionSpec::TruncatedExponential { upper, .. } => *upper = Some(h),
            _ => return Err(invalid("this distribution family has no H parameter to sweep")),
        }
        Ok(out)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtoms {
    values: Vec<f64>,
    masses: Vec<f64>,
    /// `tail[j] = Σ_{i ≥ j} masses[i]`, with `tail[0] = 1` exactly.
    tail: Vec<f64>,
}

impl DiscreteAtoms {
    pub fn new(values: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != masses.len() {
            return Err(invalid("discrete atoms need equally many values and masses"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("atom locations must be positive and finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("atom locations must be strictly increasing"));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(invalid("atom masses must be nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("atom masses sum to {total}, not 1")));
        }
        let mut tail = vec![0.0; masses.len()];
        let mut acc = 0.0;
        for j in (0..masses.len()).rev() {
            acc += masses[j];
            tail[j] = acc.min(1.0);
        }
        tail[0] = 1.0;
        Ok(Self { values, masses, tail })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    #[inline]
    fn quantile_prob(&self, p: f64) -> f64 {
        let j = self.values.partition_point(|&v| v < p);
        if j == self.values.len() {
            0.0
        } else {
            self.tail[j]
        }
    }

    #[inline]
    fn price_at_quantile(&self, u: f64) -> f64 {
        // Largest j with tail[j] ≥ u; tail[0] = 1 ≥ u keeps this in range.
        let j = self.tail.partition_point(|&t| t >= u);
        self.values[j.max(1) - 1]
    }
}

/// Exponential with rate θ started at `lower`, with the tail above `upper` lumped into an atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedExponential {
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedExponential {
    pub fn new(rate: f64, lower: f64, upper: Option<f64>) -> Result<Self> {
        let upper = upper.unwrap_or(f64::INFINITY);
        if !(rate.is_finite() && rate > 0.0) {
            return Err(invalid("exponential rate must be positive"));
        }
        if !(lower.is_finite() && lower > 0.0 && upper >= lower) {
            return Err(invalid("exponential support must satisfy 0 < lower ≤ upper"));
        }
        Ok(Self { rate, lower, upper })
    }

    #[inline]
    fn quantile_prob(&self, p: f64) -> f64 {
        if p <= self.lower {
            1.0
        } else if p > self.upper {
            0.0
        } else {
            (-self.rate * (p - self.lower)).exp()
        }
    }

    #[inline]
    fn price_at_quantile(&self, u: f64) -> f64 {
        (self.lower - u.ln() / self.rate).min(self.upper)
    }
}

/// Concrete representation behind a [`Distribution`].
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Piecewise(PiecewiseCdf),
    Atoms(DiscreteAtoms),
    PointMass(f64),
    TruncExp(TruncatedExponential),
}

/// An immutable value distribution. Cheap to share across trial workers by reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    spec: DistributionSpec,
    family: Family,
    support_lo: f64,
    support_hi: f64,
    class_claim: ClassClaim,
}

impl Distribution {
    pub(crate) fn from_parts(spec: DistributionSpec, family: Family, class_claim: ClassClaim) -> Self {
        let (support_lo, support_hi) = match &family {
            Family::Piecewise(c) => (c.lo(), c.hi()),
            Family::Atoms(a) => (a.values[0], a.values[a.values.len() - 1]),
            Family::PointMass(v) => (*v, *v),
            Family::TruncExp(e) => (e.lower, e.upper),
        };
        Self { spec, family, support_lo, support_hi, class_claim }
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        spec.build()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        DistributionSpec::from_json(s)?.build()
    }

    pub fn to_json(&self) -> Result<String> {
        self.spec.to_json()
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        DistributionSpec::PointMass { value }.build()
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> f64 {
        self.support_hi
    }

    pub fn class_claim(&self) -> ClassClaim {
        self.class_claim
    }

    pub fn is_bounded(&self) -> bool {
        self.support_hi.is_finite()
    }

    /// `Pr[value < v]`.
    #[inline]
    pub fn cdf(&self, v: f64) -> f64 {
        1.0 - self.quantile_prob(v)
    }

    /// `Pr[value ≥ p]`, the sale probability at price `p`.
    #[inline]
    pub fn quantile_prob(&self, p: f64) -> f64 {
        match &self.family {
            Family::Piecewise(c) => c.quantile_prob(p),
            Family::Atoms(a) => a.quantile_prob(p),
            Family::PointMass(v) => {
                if p <= *v {
                    1.0
                } else {
                    0.0
                }
            }
            Family::TruncExp(e) => e.quantile_prob(p),
        }
    }

    #[inline]
    pub fn revenue(&self, p: f64) -> f64 {
        p * self.quantile_prob(p)
    }

    /// `sup{p : q(p) ≥ u}` for `u ∈ (0, 1]`. Evaluated at a uniform `u` this is a sample.
    #[inline]
    pub fn price_at_quantile(&self, u: f64) -> f64 {
        match &self.family {
            Family::Piecewise(c) => c.price_at_quantile(u),
            Family::Atoms(a) => a.price_at_quantile(u),
            Family::PointMass(v) => *v,
            Family::TruncExp(e) => e.price_at_quantile(u),
        }
    }

    /// Draws one value by inverse-CDF (table lookup for atoms).
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // gen() is in [0, 1); flip it to (0, 1] so u = 0 never occurs.
        let u = 1.0 - rng.gen::<f64>();
        self.price_at_quantile(u)
    }

    /// Closed-form density on the continuous part, `None` for purely atomic families.
    pub fn density(&self, v: f64) -> Option<f64> {
        match &self.family {
            Family::Piecewise(c) => Some(c.density(v)),
            Family::TruncExp(e) => {
                Some(if v > e.lower && v < e.upper { e.rate * e.quantile_prob(v) } else { 0.0 })
            }
            Family::Atoms(_) | Family::PointMass(_) => None,
        }
    }

    /// Atom locations and masses.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match &self.family {
            Family::Piecewise(c) => c.atoms(),
            Family::Atoms(a) => a
                .values
                .iter()
                .zip(&a.masses)
                .filter(|(_, m)| **m > 0.0)
                .map(|(v, m)| (*v, *m))
                .collect(),
            Family::PointMass(v) => vec![(*v, 1.0)],
            Family::TruncExp(e) => {
                if e.upper.is_finite() {
                    vec![(e.upper, e.quantile_prob(e.upper))]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Prices where `q` is not smooth: piece boundaries and atom locations.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = match &self.family {
            Family::Piecewise(c) => c.breakpoints().to_vec(),
            Family::Atoms(a) => a.values.clone(),
            Family::PointMass(v) => vec![*v],
            Family::TruncExp(e) => {
                let mut v = vec![e.lower];
                if e.upper.is_finite() {
                    v.push(e.upper);
                }
                v
            }
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Continuous intervals `[lo, hi)` on which a density exists.
    pub(crate) fn continuous_pieces(&self) -> Vec<(f64, f64)> {
        match &self.family {
            Family::Piecewise(c) => c.breakpoints().windows(2).map(|w| (w[0], w[1])).collect(),
            Family::TruncExp(e) if e.upper > e.lower => vec![(e.lower, e.upper)],
            _ => Vec::new(),
        }
    }
}

impl Serialize for Distribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = DistributionSpec::deserialize(d)?;
        spec.build().map_err(serde::de::Error::custom)
    }
}

impl TryFrom<DistributionSpec> for Distribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        spec.build()
    }
}
