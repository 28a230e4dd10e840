//! Intervals, chart rectangles and chart identifiers.

use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub const UNIT: Interval = Interval { lo: -1.0, hi: 1.0 };

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval, tol: f64) -> bool {
        self.lo - tol <= other.lo && other.hi <= self.hi + tol
    }

    /// Affine map from `[-1, 1]` onto the interval.
    pub fn from_unit(&self, s: f64) -> f64 {
        self.mid() + 0.5 * self.len() * s
    }

    /// Affine map from the interval onto `[-1, 1]`.
    pub fn to_unit(&self, x: f64) -> f64 {
        if self.len() == 0.0 {
            0.0
        } else {
            (2.0 * x - self.lo - self.hi) / self.len()
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Rectangle `[y_lo, y_hi] x [x_lo, x_hi]` in chart coordinates.
///
/// The first axis is the unstable coordinate `y`, the second the stable
/// coordinate `x`; bivariate fields take arguments in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub y: Interval,
    pub x: Interval,
}

impl Rect {
    pub fn new(y: Interval, x: Interval) -> Self {
        Rect { y, x }
    }

    pub const UNIT: Rect = Rect {
        y: Interval::UNIT,
        x: Interval::UNIT,
    };

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.y.lo, self.x.lo),
            (self.y.lo, self.x.hi),
            (self.y.hi, self.x.lo),
            (self.y.hi, self.x.hi),
        ]
    }
}

/// Identifier of a Markov rectangle / chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChartId(pub u8);

impl std::fmt::Display for ChartId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
