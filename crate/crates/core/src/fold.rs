//! The folding map near the quadratic tangency.
//!
//! The fold `G` is carried in factorized form through a tangency profile
//! `theta(y_u, x_s, t)` and the two diffeomorphism legs
//! `x_u = X_u(w, y_u)`, `y_s = Y_s(w, x_s)`, with `w^2 = theta` on the graph.
//! The model profile is `theta = t - y_u - chi(x_s)` with `chi` the identity
//! or a monotone cubic; both anchors sit on the local invariant manifolds so
//! that `theta(0, 0, t) = t` is the exact reparametrization normalization.

use crate::error::FoldError;
use crate::geom::{ChartId, Rect};
use serde::{Deserialize, Serialize};

/// Tangency profile `theta(y_u, x_s, t)`; sign encodes the relative position
/// of the folded curves, zero on the critical-value locus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Theta {
    /// `t - y_u - x_s`.
    Linear,
    /// `t - y_u - (x_s + c x_s^3)`, `c > 0`.
    CubicChi { c: f64 },
}

impl Theta {
    pub fn value(&self, y: f64, x: f64, t: f64) -> f64 {
        match self {
            Theta::Linear => t - y - x,
            Theta::CubicChi { c } => t - y - (x + c * x * x * x),
        }
    }
    pub fn dy(&self, _y: f64, _x: f64) -> f64 {
        -1.0
    }
    pub fn dx(&self, _y: f64, x: f64) -> f64 {
        match self {
            Theta::Linear => -1.0,
            Theta::CubicChi { c } => -(1.0 + 3.0 * c * x * x),
        }
    }
    pub fn dt(&self) -> f64 {
        1.0
    }
    pub fn dxx(&self, _y: f64, x: f64) -> f64 {
        match self {
            Theta::Linear => 0.0,
            Theta::CubicChi { c } => -6.0 * c * x,
        }
    }
    pub fn dyy(&self, _y: f64, _x: f64) -> f64 {
        0.0
    }
    pub fn dxy(&self, _y: f64, _x: f64) -> f64 {
        0.0
    }
    pub fn dxt(&self, _y: f64, _x: f64) -> f64 {
        0.0
    }
    pub fn dyt(&self, _y: f64, _x: f64) -> f64 {
        0.0
    }

    /// Invert `chi(x) = s` (theta solved for the `x_s` argument).
    pub fn chi_inverse(&self, s: f64) -> f64 {
        match self {
            Theta::Linear => s,
            Theta::CubicChi { c } => {
                let mut x = s;
                for _ in 0..60 {
                    let r = x + c * x * x * x - s;
                    if r.abs() < 1e-14 {
                        break;
                    }
                    x -= r / (1.0 + 3.0 * c * x * x);
                }
                x
            }
        }
    }
}

/// Affine leg of the fold factorization: `anchor + w + kappa * s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineLeg {
    pub anchor: f64,
    pub kappa: f64,
}

impl AffineLeg {
    pub fn value(&self, w: f64, s: f64) -> f64 {
        self.anchor + w + self.kappa * s
    }
    /// Solve `value(w, s) = target` for `w`.
    pub fn solve_w(&self, target: f64, s: f64) -> f64 {
        target - self.anchor - self.kappa * s
    }
}

/// Geometry of the model fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldConfig {
    /// Tongue anchor in the unstable chart (`x_u` of the tangency point).
    pub x_c: f64,
    /// Tongue anchor in the stable chart (`y_s` of the tangency image).
    pub y_c: f64,
    pub kappa_u: f64,
    pub kappa_s: f64,
    /// Return time of the excursion through the tongue.
    pub n0: usize,
    /// Half-width of the admissible `w` range (tongue bound).
    pub tongue_w: f64,
    /// `None` for the identity `chi`, `Some(c)` for the cubic alternate.
    pub chi_cubic: Option<f64>,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig {
            x_c: 0.5,
            y_c: 0.5,
            kappa_u: 0.02,
            kappa_s: 0.02,
            n0: 2,
            tongue_w: 0.25,
            chi_cubic: None,
        }
    }
}

/// The folding map at a fixed parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMap {
    pub theta: Theta,
    /// `x_u = X_u(w, y_u)`.
    pub x_u: AffineLeg,
    /// `y_s = Y_s(w, x_s)`.
    pub y_s: AffineLeg,
    pub n0: usize,
    pub t: f64,
    pub source: ChartId,
    pub target: ChartId,
    pub tongue_w: f64,
}

impl FoldMap {
    pub fn theta_at(&self, y_u: f64, x_s: f64) -> f64 {
        self.theta.value(y_u, x_s, self.t)
    }

    /// Forward fold: `(x_u, y_u) -> (x_s, y_s)` through the factorization.
    pub fn forward(&self, x_u: f64, y_u: f64) -> (f64, f64) {
        let w = self.x_u.solve_w(x_u, y_u);
        let x_s = self.theta.chi_inverse(self.t - y_u - w * w);
        let y_s = self.y_s.value(w, x_s);
        (x_s, y_s)
    }

    /// Inverse fold: `(x_s, y_s) -> (x_u, y_u)`.
    pub fn inverse(&self, x_s: f64, y_s: f64) -> (f64, f64) {
        let w = self.y_s.solve_w(y_s, x_s);
        // theta(y_u, x_s, t) = w^2 solved for y_u: y_u = t - chi(x_s) - w^2.
        let chi = self.t - self.theta.value(0.0, x_s, self.t);
        let y_u = self.t - chi - w * w;
        let x_u = self.x_u.value(w, y_u);
        (x_u, y_u)
    }

    /// Number of transverse intersections of `G({y_u = y0})` with
    /// `{x_s = x0}`, counted by sign changes along the admissible `w` range.
    pub fn curve_intersections(&self, y0: f64, x0: f64) -> usize {
        let n = 400;
        let mut count = 0;
        let mut prev = f64::NAN;
        for i in 0..=n {
            let w = -self.tongue_w + 2.0 * self.tongue_w * i as f64 / n as f64;
            let x_s = self.theta.chi_inverse(self.t - y0 - w * w);
            let g = x_s - x0;
            if !prev.is_nan() && prev.signum() != g.signum() && prev != 0.0 {
                count += 1;
            }
            prev = g;
        }
        count
    }
}

/// Build the model fold at parameter `t`.
pub fn make_model_fold(
    config: &FoldConfig,
    source: ChartId,
    target: ChartId,
    chart: Rect,
    t: f64,
) -> Result<FoldMap, FoldError> {
    let x_ok = chart.x.contains(config.x_c - config.tongue_w)
        && chart.x.contains(config.x_c + config.tongue_w);
    let y_ok = chart.y.contains(config.y_c - config.tongue_w)
        && chart.y.contains(config.y_c + config.tongue_w);
    if !x_ok || !y_ok {
        return Err(FoldError::InvalidGeometry);
    }
    let theta = match config.chi_cubic {
        None => Theta::Linear,
        Some(c) => Theta::CubicChi { c },
    };
    let fold = FoldMap {
        theta,
        x_u: AffineLeg {
            anchor: config.x_c,
            kappa: config.kappa_u,
        },
        y_s: AffineLeg {
            anchor: config.y_c,
            kappa: config.kappa_s,
        },
        n0: config.n0,
        t,
        source,
        target,
        tongue_w: config.tongue_w,
    };
    debug_assert!((fold.theta.value(0.0, 0.0, t) - t).abs() < 1e-12);
    Ok(fold)
}
