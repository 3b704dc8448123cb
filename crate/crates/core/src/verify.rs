//! Fact tables for the lower-bound constructions: closed-form revenues and
//! optima, class checks, and separation of near-optimal prices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::checks::{
    brute_force_opt, check_half_concavity, check_mhr, check_regular, check_rev_lower_bounds, geometric_grid,
    CheckReport,
};
use crate::distributions::Distribution;
use crate::error::{invalid, Error, Result};
use crate::hard_instances::{make_general_family, make_mhr_pair, make_regular_pair, separation_check, RegularPair};

/// Grid of the class and structural checks.
pub const CHECK_GRID: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Instance {
    LbRegularPair,
    LbMhrPair,
    LbGeneral,
}

impl Instance {
    pub fn label(self) -> &'static str {
        match self {
            Instance::LbRegularPair => "lb-regular-pair",
            Instance::LbMhrPair => "lb-mhr-pair",
            Instance::LbGeneral => "lb-general",
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Instance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Instance::LbRegularPair, Instance::LbMhrPair, Instance::LbGeneral]
            .into_iter()
            .find(|i| i.label() == s)
            .ok_or_else(|| invalid(format!("unknown instance '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub name: String,
    pub expected: String,
    pub computed: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub instance: Instance,
    pub facts: Vec<Fact>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.facts.iter().all(|f| f.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter().filter(|f| !f.passed)
    }
}

#[derive(Default)]
struct Facts(Vec<Fact>);

impl Facts {
    fn value(&mut self, name: impl Into<String>, expected: f64, computed: f64, tol: f64) {
        let passed = (computed - expected).abs() <= tol * expected.abs().max(1.0);
        self.0.push(Fact { name: name.into(), expected: fmt_num(expected), computed: fmt_num(computed), passed });
    }

    fn range(&mut self, name: impl Into<String>, lo: f64, hi: f64, computed: f64) {
        self.0.push(Fact {
            name: name.into(),
            expected: format!("[{}, {}]", fmt_num(lo), fmt_num(hi)),
            computed: fmt_num(computed),
            passed: (lo..=hi).contains(&computed),
        });
    }

    fn check(&mut self, name: impl Into<String>, report: &CheckReport) {
        self.0.push(Fact {
            name: name.into(),
            expected: "pass".into(),
            computed: match &report.violation {
                None => format!("pass ({} points)", report.points_checked),
                Some(v) => format!("fail: {v}"),
            },
            passed: report.passed,
        });
    }

    fn flag(&mut self, name: impl Into<String>, expected: &str, computed: String, passed: bool) {
        self.0.push(Fact { name: name.into(), expected: expected.into(), computed, passed });
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}

/// Largest gap `max |q_a(p) − q_b(p)|` over a grid of `[lo, hi]`.
fn max_gap(a: &Distribution, b: &Distribution, lo: f64, hi: f64) -> f64 {
    geometric_grid(lo, hi, CHECK_GRID, &[])
        .into_iter()
        .map(|p| (a.quantile_prob(p) - b.quantile_prob(p)).abs())
        .fold(0.0, f64::max)
}

fn opt_facts(f: &mut Facts, label: &str, d: &Distribution, price: f64, revenue: f64, grid: usize, tol: f64) -> Result<()> {
    let opt = brute_force_opt(d, grid)?;
    f.value(format!("{label} optimal price"), price, opt.opt_price, tol);
    f.value(format!("{label} optimal revenue"), revenue, opt.opt_revenue, tol);
    Ok(())
}

fn regular_structure(f: &mut Facts, label: &str, d: &Distribution, tol: f64) -> Result<()> {
    f.check(format!("{label} regular"), &check_regular(d, CHECK_GRID, tol));
    f.check(format!("{label} half-concave below p_opt"), &check_half_concavity(d, CHECK_GRID, tol)?);
    f.check(format!("{label} revenue lower bounds"), &check_rev_lower_bounds(d, CHECK_GRID, tol)?);
    Ok(())
}

fn regular_pair(h: f64, eps: f64, grid: usize, tol: f64) -> Result<Facts> {
    let RegularPair { f_plus, f_minus, .. } = make_regular_pair(h, eps)?;
    let alpha = RegularPair::ALPHA;
    let top = h * (2.0 + eps) / 3.0;
    let mut f = Facts::default();
    f.value("Rev_F-(H/2)", 2.0, f_minus.revenue(h / 2.0), tol);
    f.value("Rev_F+(H(2+eps)/3)", 2.0 + eps, f_plus.revenue(top), tol);
    opt_facts(&mut f, "F-", &f_minus, h / 2.0, 2.0, grid, tol)?;
    opt_facts(&mut f, "F+", &f_plus, top, 2.0 + eps, grid, tol)?;
    f.value("max |q+ - q-| on [1, H/2]", 0.0, max_gap(&f_plus, &f_minus, 1.0, h / 2.0), tol);
    regular_structure(&mut f, "F-", &f_minus, tol)?;
    regular_structure(&mut f, "F+", &f_plus, tol)?;
    let sep = separation_check(&[&f_minus, &f_plus], 1.0 - alpha * eps, grid)?;
    f.flag(
        format!("near-optimal sets disjoint at 1-{alpha}eps"),
        "disjoint",
        describe_overlap(sep.overlap),
        sep.disjoint,
    );
    Ok(f)
}

fn mhr_pair(eps: f64, grid: usize, tol: f64) -> Result<Facts> {
    let pair = make_mhr_pair(eps)?;
    let peak1 = 1.5 + pair.alpha;
    let mut f = Facts::default();
    f.value("F0(1.25)", 0.1, pair.f0.cdf(1.25), tol);
    opt_facts(&mut f, "F0", &pair.f0, 1.5, 1.2, grid, tol)?;
    opt_facts(&mut f, "F1", &pair.f1, peak1, peak1 * (0.8 - 0.4 * pair.alpha), grid, tol)?;
    f.value("max |q0 - q1| on [1, 1.5]", 0.0, max_gap(&pair.f0, &pair.f1, 1.0, 1.5), tol);
    for (label, d) in [("F0", &pair.f0), ("F1", &pair.f1)] {
        f.check(format!("{label} MHR"), &check_mhr(d, CHECK_GRID, tol));
        let opt = brute_force_opt(d, grid)?;
        f.range(format!("{label} q(p_opt)"), (-1.0f64).exp() - 1e-6, 1.0, d.quantile_prob(opt.opt_price));
    }
    let sep = separation_check(&[&pair.f0, &pair.f1], 1.0 - eps, grid)?;
    f.flag("near-optimal sets disjoint at 1-eps", "disjoint", describe_overlap(sep.overlap), sep.disjoint);
    Ok(f)
}

fn general_family(h: f64, eps: f64, grid: usize, tol: f64) -> Result<Facts> {
    let fam = make_general_family(h, eps)?;
    let mut f = Facts::default();
    let worst = fam.support.iter().map(|&p| (fam.base.revenue(p) - 5.0).abs()).fold(0.0, f64::max);
    f.value("max_k |Rev_F0(p_k) - 5|", 0.0, worst, tol);
    f.value("Rev_F0(1)", 1.0, fam.base.revenue(1.0), tol);
    f.value("q_F0(p_1)", 10.0 / h, fam.base.quantile_prob(fam.support[0]), tol);
    for k in 1..fam.k {
        f.range(format!("Rev_F{k}(p_{})", k + 1), 5.25, 5.5, fam.member(k)?.revenue(fam.support[k]));
    }
    let members: Vec<&Distribution> = fam.perturbed.iter().collect();
    let sep = separation_check(&members, 1.0 - eps / 4.0, grid)?;
    f.flag("near-optimal sets disjoint at 1-eps/4", "disjoint", describe_overlap(sep.overlap), sep.disjoint);
    Ok(f)
}

fn describe_overlap(overlap: Option<(usize, usize, f64)>) -> String {
    match overlap {
        None => "disjoint".into(),
        Some((a, b, p)) => format!("members {a} and {b} share {}", fmt_num(p)),
    }
}

/// Runs every fact check for `instance`. Invalid parameters are errors, not failed facts.
pub fn verify_instance(instance: Instance, h: f64, eps: f64, grid: usize, tol: f64) -> Result<VerifyReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(invalid(format!("tolerance must be nonnegative, got {tol}")));
    }
    let facts = match instance {
        Instance::LbRegularPair => regular_pair(h, eps, grid, tol)?,
        Instance::LbMhrPair => mhr_pair(eps, grid, tol)?,
        Instance::LbGeneral => general_family(h, eps, grid, tol)?,
    };
    Ok(VerifyReport { instance, facts: facts.0 })
}
