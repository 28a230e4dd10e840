//! Vertical and horizontal strips bounded by smooth graphs.

use crate::cheb::Cheb1;
use crate::geom::{ChartId, Interval};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `{ phi_minus(y) <= x <= phi_plus(y) }` — thin in `x`.
    Vertical,
    /// `{ psi_minus(x) <= y <= psi_plus(x) }` — thin in `y`.
    Horizontal,
}

/// A strip in a chart rectangle, bounded by two graphs over the transverse
/// interval. Boundary graphs are carried explicitly so containment tests are
/// a matter of sampling them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub orientation: Orientation,
    pub chart: ChartId,
    #[serde(rename = "phi_minus")]
    pub lower: Cheb1,
    #[serde(rename = "phi_plus")]
    pub upper: Cheb1,
}

const GRAPH_SAMPLES: usize = 64;

impl Strip {
    pub fn new(orientation: Orientation, chart: ChartId, lower: Cheb1, upper: Cheb1) -> Self {
        debug_assert_eq!(lower.interval, upper.interval);
        Strip {
            orientation,
            chart,
            lower,
            upper,
        }
    }

    /// Strip with constant boundaries.
    pub fn slab(
        orientation: Orientation,
        chart: ChartId,
        transverse: Interval,
        bounds: Interval,
    ) -> Self {
        Strip {
            orientation,
            chart,
            lower: Cheb1::constant(transverse, bounds.lo),
            upper: Cheb1::constant(transverse, bounds.hi),
        }
    }

    /// The interval the boundary graphs are defined over.
    pub fn transverse(&self) -> Interval {
        self.lower.interval
    }

    /// `phi_minus < phi_plus` pointwise on the closed interval.
    pub fn is_ordered(&self) -> bool {
        let iv = self.transverse();
        (0..=GRAPH_SAMPLES).all(|i| {
            let s = iv.lo + iv.len() * i as f64 / GRAPH_SAMPLES as f64;
            self.lower.eval(s) < self.upper.eval(s)
        })
    }

    /// Max boundary-graph slope over the transverse interval.
    pub fn max_slope(&self) -> f64 {
        let iv = self.transverse();
        let dl = self.lower.deriv();
        let du = self.upper.deriv();
        let mut m = 0.0f64;
        for i in 0..=GRAPH_SAMPLES {
            let s = iv.lo + iv.len() * i as f64 / GRAPH_SAMPLES as f64;
            m = m.max(dl.eval(s).abs()).max(du.eval(s).abs());
        }
        m
    }

    /// Gap between the graphs, sampled: `(min, max)` of `upper - lower`.
    pub fn thickness(&self) -> (f64, f64) {
        let iv = self.transverse();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=GRAPH_SAMPLES {
            let s = iv.lo + iv.len() * i as f64 / GRAPH_SAMPLES as f64;
            let d = self.upper.eval(s) - self.lower.eval(s);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    /// Range of the strip in the thin direction.
    pub fn bounds(&self) -> Interval {
        let lo = self.lower.range(GRAPH_SAMPLES).lo;
        let hi = self.upper.range(GRAPH_SAMPLES).hi;
        Interval::new(lo, hi)
    }

    /// `self` contained in `other` (same chart and orientation), up to `tol`.
    pub fn contained_in(&self, other: &Strip, tol: f64) -> bool {
        if self.chart != other.chart || self.orientation != other.orientation {
            return false;
        }
        let iv = self.transverse();
        (0..=GRAPH_SAMPLES).all(|i| {
            let s = iv.lo + iv.len() * i as f64 / GRAPH_SAMPLES as f64;
            other.lower.eval(s) - tol <= self.lower.eval(s)
                && self.upper.eval(s) <= other.upper.eval(s) + tol
        })
    }

    /// Strips disjoint in the thin direction, up to `tol`.
    pub fn disjoint_from(&self, other: &Strip, tol: f64) -> bool {
        let iv = self.transverse();
        let above = (0..=GRAPH_SAMPLES).all(|i| {
            let s = iv.lo + iv.len() * i as f64 / GRAPH_SAMPLES as f64;
            self.lower.eval(s) > other.upper.eval(s) + tol
        });
        let below = (0..=GRAPH_SAMPLES).all(|i| {
            let s = iv.lo + iv.len() * i as f64 / GRAPH_SAMPLES as f64;
            self.upper.eval(s) < other.lower.eval(s) - tol
        });
        above || below
    }

    pub fn center_graph(&self) -> Cheb1 {
        let mut coeffs =
            vec![0.0; self.lower.coeffs.len().max(self.upper.coeffs.len())];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let a = self.lower.coeffs.get(k).copied().unwrap_or(0.0);
            let b = self.upper.coeffs.get(k).copied().unwrap_or(0.0);
            *c = 0.5 * (a + b);
        }
        Cheb1 {
            interval: self.transverse(),
            coeffs,
        }
    }
}
