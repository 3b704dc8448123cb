//! Piecewise survival curves with closed-form pieces.
//!
//! A [`PiecewiseCdf`] is described by breakpoints `b_0 < b_1 < … < b_n` and one
//! [`Shape`] per open-closed interval `(b_i, b_{i+1}]`. The sale probability is
//! `q(p) = 1` for `p ≤ b_0`, `q(p) = shape_i(p)` on `(b_i, b_{i+1}]` and `0`
//! above `b_n`. Because `q(p) = Pr[v ≥ p]` is left-continuous, atoms show up as
//! right-jumps: an atom at `b_i` has mass `shape_{i-1}(b_i) - shape_i(b_i⁺)`, and
//! the last shape's value at `b_n` is the atom at the top of the support.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Closed form of the sale probability on one piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    /// `q(p) = num / (slope·p + offset)`.
    Rational { num: f64, slope: f64, offset: f64 },
    /// `q(p) = at_start − density·(p − b_i)`: constant density on the piece.
    Linear { at_start: f64, density: f64 },
    /// `q(p) = at_start · exp(−rate·(p − b_i))`.
    Exponential { at_start: f64, rate: f64 },
}

impl Shape {
    #[inline]
    fn survival(&self, start: f64, p: f64) -> f64 {
        match *self {
            Shape::Rational { num, slope, offset } => num / (slope * p + offset),
            Shape::Linear { at_start, density } => at_start - density * (p - start),
            Shape::Exponential { at_start, rate } => at_start * (-rate * (p - start)).exp(),
        }
    }

    fn density(&self, start: f64, p: f64) -> f64 {
        match *self {
            Shape::Rational { num, slope, offset } => {
                let den = slope * p + offset;
                num * slope / (den * den)
            }
            Shape::Linear { density, .. } => density,
            Shape::Exponential { rate, .. } => rate * self.survival(start, p),
        }
    }

    /// Solves `survival(p) = u` for a `u` strictly inside the piece's range.
    #[inline]
    fn invert(&self, start: f64, u: f64) -> f64 {
        match *self {
            Shape::Rational { num, slope, offset } => (num / u - offset) / slope,
            Shape::Linear { at_start, density } => start + (at_start - u) / density,
            Shape::Exponential { at_start, rate } => start + (at_start / u).ln() / rate,
        }
    }
}

/// A validated piecewise survival curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf {
    breakpoints: Vec<f64>,
    shapes: Vec<Shape>,
    /// `shape_i(b_i⁺)`, cached for the sampler.
    starts: Vec<f64>,
    /// `shape_i(b_{i+1})`, cached for the sampler.
    ends: Vec<f64>,
}

const SHAPE_TOL: f64 = 1e-12;

impl PiecewiseCdf {
    pub fn new(breakpoints: Vec<f64>, shapes: Vec<Shape>) -> Result<Self> {
        if breakpoints.len() < 2 || shapes.len() + 1 != breakpoints.len() {
            return Err(invalid(format!(
                "piecewise CDF needs n+1 breakpoints for n pieces (got {} and {})",
                breakpoints.len(),
                shapes.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints[0] <= 0.0 {
            return Err(invalid("breakpoints must be finite and positive"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        let mut starts = Vec::with_capacity(shapes.len());
        let mut ends = Vec::with_capacity(shapes.len());
        let mut prev = 1.0;
        for (i, shape) in shapes.iter().enumerate() {
            let (lo, hi) = (breakpoints[i], breakpoints[i + 1]);
            validate_shape(shape, lo, hi)?;
            let start = shape.survival(lo, lo);
            let end = shape.survival(lo, hi);
            if !(0.0..=1.0 + SHAPE_TOL).contains(&start) || !(-SHAPE_TOL..=1.0).contains(&end) {
                return Err(invalid(format!("piece {i} leaves [0, 1]: {start} .. {end}")));
            }
            if start > prev + SHAPE_TOL {
                return Err(invalid(format!(
                    "sale probability increases at breakpoint {lo} ({prev} -> {start})"
                )));
            }
            if end > start + SHAPE_TOL {
                return Err(invalid(format!("piece {i} is increasing")));
            }
            // Snap rounding-level jumps so continuous joins carry no phantom atoms.
            let start = if (prev - start).abs() <= SHAPE_TOL { prev } else { start };
            let end = if end.abs() <= SHAPE_TOL { 0.0 } else { end.min(start) };
            starts.push(start);
            ends.push(end);
            prev = end;
        }
        Ok(Self { breakpoints, shapes, starts, ends })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    /// Index `i` with `p ∈ (b_i, b_{i+1}]`, or `None` outside `(b_0, b_n]`.
    #[inline]
    fn piece_of(&self, p: f64) -> Option<usize> {
        if p <= self.lo() || p > self.hi() {
            return None;
        }
        // First breakpoint ≥ p, minus one.
        let k = self.breakpoints.partition_point(|&b| b < p);
        Some(k - 1)
    }

    #[inline]
    pub fn quantile_prob(&self, p: f64) -> f64 {
        if p <= self.lo() {
            return 1.0;
        }
        match self.piece_of(p) {
            None => 0.0,
            Some(i) => {
                // Breakpoint values come from the caches so atoms are exact.
                if p == self.breakpoints[i + 1] {
                    self.ends[i]
                } else {
                    self.shapes[i]
                        .survival(self.breakpoints[i], p)
                        .clamp(self.ends[i], self.starts[i])
                }
            }
        }
    }

    /// Closed-form density at `p` (zero outside the continuous pieces).
    pub fn density(&self, p: f64) -> f64 {
        match self.piece_of(p) {
            None => 0.0,
            Some(i) => self.shapes[i].density(self.breakpoints[i], p),
        }
    }

    /// `sup{p : q(p) ≥ u}` for `u ∈ (0, 1]`.
    #[inline]
    pub fn price_at_quantile(&self, u: f64) -> f64 {
        for i in 0..self.shapes.len() {
            let lo = self.breakpoints[i];
            if u > self.starts[i] {
                return lo;
            }
            if u > self.ends[i] {
                let hi = self.breakpoints[i + 1];
                return self.shapes[i].invert(lo, u).clamp(lo, hi);
            }
        }
        self.hi()
    }

    /// Masses of the atoms, as `(location, mass)` pairs.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut prev = 1.0;
        for i in 0..self.shapes.len() {
            let jump = prev - self.starts[i];
            if jump > 0.0 {
                out.push((self.breakpoints[i], jump));
            }
            prev = self.ends[i];
        }
        if prev > 0.0 {
            out.push((self.hi(), prev));
        }
        out
    }
}

fn validate_shape(shape: &Shape, lo: f64, hi: f64) -> Result<()> {
    let ok = match *shape {
        Shape::Rational { num, slope, offset } => {
            num.is_finite()
                && num >= 0.0
                && slope.is_finite()
                && slope >= 0.0
                && offset.is_finite()
                && slope * lo + offset > 0.0
                && slope * hi + offset > 0.0
        }
        Shape::Linear { at_start, density } => {
            at_start.is_finite() && density.is_finite() && density >= 0.0
        }
        Shape::Exponential { at_start, rate } => {
            at_start.is_finite() && at_start >= 0.0 && rate.is_finite() && rate >= 0.0
        }
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("malformed piece on ({lo}, {hi}]: {shape:?}")))
    }
}
