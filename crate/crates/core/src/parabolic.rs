//! Parabolic composition through the fold: tangency functional, displacement
//! quantities, the two branch maps with their full derivative calculus,
//! estimate measurements and the Lipschitz recursion checks.

use crate::compose::{CalculusReport, FormulaCheck};
use crate::error::FoldError;
use crate::field::{FieldJet, Jet2, ScalarField2};
use crate::fold::FoldMap;
use crate::geom::Rect;
use crate::map::{ImplicitMap, DERIVATIVE_FLOOR, MAX_NEWTON_ITERS, SOLVE_TOLERANCE};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Corner values of `-Cbar` over the `(y0, x1)` rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementQuad {
    pub delta: f64,
    pub delta_l: f64,
    pub delta_r: f64,
    pub delta_lr: f64,
}

impl DisplacementQuad {
    pub fn ordered(&self) -> bool {
        self.delta <= self.delta_l.min(self.delta_r) + 1e-12
            && self.delta_l.max(self.delta_r) <= self.delta_lr + 1e-12
    }
}

/// Tolerances for the parabolic composition gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParabolicConfig {
    /// (PC1) bound on `|A_1,y|, |A_1,yy|, |B_0,x|, |B_0,xx|`.
    pub b: f64,
    /// (PC2) gate: require `delta > pc2_factor * (|P_1| + |Q_0|)`.
    pub pc2_factor: f64,
    /// Fit degree for the branch fields.
    pub degree: usize,
}

impl Default for ParabolicConfig {
    fn default() -> Self {
        ParabolicConfig {
            b: 0.05,
            pc2_factor: 0.5,
            degree: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    fn factor(&self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }
}

/// Both affine-like branches of a parabolic composition, with the tangency
/// data they were built from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParabolicPair {
    pub plus: ImplicitMap,
    pub minus: ImplicitMap,
    pub w_plus: ScalarField2,
    pub w_minus: ScalarField2,
    pub cbar: ScalarField2,
    pub displacement: DisplacementQuad,
}

/// Evaluation context for the tangency functional of a pair `(F_0, G, F_1)`.
pub struct TangencyCtx<'a> {
    pub fold: FoldMap,
    a0: FieldJet,
    b0: FieldJet,
    a1: FieldJet,
    b1: FieldJet,
    rect0: Rect,
    rect1: Rect,
    _maps: std::marker::PhantomData<&'a ImplicitMap>,
}

/// Everything the parabolic derivative calculus produces at one point.
pub type Formulas = BTreeMap<&'static str, f64>;

impl<'a> TangencyCtx<'a> {
    pub fn new(f0: &'a ImplicitMap, fold: &FoldMap, f1: &'a ImplicitMap) -> Self {
        TangencyCtx {
            fold: fold.clone(),
            a0: FieldJet::new(&f0.a, f0.a_t.as_ref()),
            b0: FieldJet::new(&f0.b, f0.b_t.as_ref()),
            a1: FieldJet::new(&f1.a, f1.a_t.as_ref()),
            b1: FieldJet::new(&f1.b, f1.b_t.as_ref()),
            rect0: f0.rect(),
            rect1: f1.rect(),
            _maps: std::marker::PhantomData,
        }
    }

    /// Reuse the jets at a different fold parameter.
    pub fn set_fold(&mut self, fold: FoldMap) {
        self.fold = fold;
    }

    /// Rectangle the functional `Cbar` lives on: `y0` from the source of
    /// `F_0`, `x1` from the target of `F_1`.
    pub fn cbar_rect(&self) -> Rect {
        Rect::new(self.rect0.y, self.rect1.x)
    }

    /// Solve `x_u = X_u(w, B_0(y_0, x_u))` for `x_u`; returns `(x_u, Delta_0)`.
    pub fn solve_x(&self, w: f64, y0: f64) -> (f64, f64) {
        let kappa = self.fold.x_u.kappa;
        let mut xu = self.fold.x_u.anchor + w;
        let mut polish = false;
        for _ in 0..MAX_NEWTON_ITERS {
            let yu = self.b0.value(y0, xu);
            let r = xu - self.fold.x_u.value(w, yu);
            let d = 1.0 - kappa * self.b0.dx_at(y0, xu);
            if polish || r.abs() < f64::MIN_POSITIVE {
                return (xu, d);
            }
            if r.abs() < SOLVE_TOLERANCE {
                polish = true;
            }
            xu -= r / d;
        }
        let d = 1.0 - kappa * self.b0.dx_at(y0, xu);
        (xu, d)
    }

    /// Solve `y_s = Y_s(w, A_1(y_s, x_1))` for `y_s`; returns `(y_s, Delta_1)`.
    pub fn solve_y(&self, w: f64, x1: f64) -> (f64, f64) {
        let kappa = self.fold.y_s.kappa;
        let mut ys = self.fold.y_s.anchor + w;
        let mut polish = false;
        for _ in 0..MAX_NEWTON_ITERS {
            let xs = self.a1.value(ys, x1);
            let r = ys - self.fold.y_s.value(w, xs);
            let d = 1.0 - kappa * self.a1.dy_at(ys, x1);
            if polish || r.abs() < f64::MIN_POSITIVE {
                return (ys, d);
            }
            if r.abs() < SOLVE_TOLERANCE {
                polish = true;
            }
            ys -= r / d;
        }
        let d = 1.0 - kappa * self.a1.dy_at(ys, x1);
        (ys, d)
    }

    /// The tangency functional
    /// `C(w, y0, x1) = w^2 - theta(B_0(y0, X), A_1(Y, x1), t)`.
    pub fn c_value(&self, w: f64, y0: f64, x1: f64) -> f64 {
        let (xu, _) = self.solve_x(w, y0);
        let (ys, _) = self.solve_y(w, x1);
        let ybar = self.b0.value(y0, xu);
        let xbar = self.a1.value(ys, x1);
        w * w - self.fold.theta.value(ybar, xbar, self.fold.t)
    }

    /// Value and first two `w`-derivatives of `C` at a point, computed
    /// without assembling the full formula table.
    pub fn c_jet(&self, w: f64, y0: f64, x1: f64) -> (f64, f64, f64) {
        let fold = &self.fold;
        let (xu, d0) = self.solve_x(w, y0);
        let (ys, d1) = self.solve_y(w, x1);
        let di0 = 1.0 / d0;
        let di1 = 1.0 / d1;
        let (xu_y, ys_x) = (fold.x_u.kappa, fold.y_s.kappa);

        let b0 = self.b0.x_jet(y0, xu);
        let a1 = self.a1.y_jet(ys, x1);

        let x_w = di0;
        let y_w = di1;
        let ybar = b0.0;
        let xbar = a1.0;
        let ybar_w = b0.1 * x_w;
        let xbar_w = a1.1 * y_w;
        let x_ww = di0 * (xu_y * b0.2 * x_w * x_w);
        let y_ww = di1 * (ys_x * a1.2 * y_w * y_w);
        let ybar_ww = b0.2 * x_w * x_w + b0.1 * x_ww;
        let xbar_ww = a1.2 * y_w * y_w + a1.1 * y_ww;

        let t = fold.t;
        let th_y = fold.theta.dy(ybar, xbar);
        let th_x = fold.theta.dx(ybar, xbar);
        let th_xx = fold.theta.dxx(ybar, xbar);
        let th_yy = fold.theta.dyy(ybar, xbar);
        let th_xy = fold.theta.dxy(ybar, xbar);

        let c = w * w - fold.theta.value(ybar, xbar, t);
        let c_w = 2.0 * w - th_x * xbar_w - th_y * ybar_w;
        let c_ww = 2.0
            - (th_x * xbar_ww
                + th_y * ybar_ww
                + th_xx * xbar_w * xbar_w
                + 2.0 * th_xy * xbar_w * ybar_w
                + th_yy * ybar_w * ybar_w);
        (c, c_w, c_ww)
    }

    /// Minimum of `C` in `w` at fixed `(y0, x1)`: returns `(Cbar, w_min)`.
    ///
    /// Newton on `C_w = 0`, with a golden-section fallback when the profile
    /// strays from the certified regime `|C_ww - 2| <= 0.5`.
    pub fn cbar(&self, y0: f64, x1: f64) -> (f64, f64) {
        let mut w = 0.0;
        for _ in 0..MAX_NEWTON_ITERS {
            let (_, cw, cww) = self.c_jet(w, y0, x1);
            if (cww - 2.0).abs() > 0.5 {
                return self.cbar_golden(y0, x1);
            }
            let step = cw / cww;
            w -= step;
            if step.abs() < 1e-13 {
                break;
            }
        }
        (self.c_jet(w, y0, x1).0, w)
    }

    fn cbar_golden(&self, y0: f64, x1: f64) -> (f64, f64) {
        let phi = 0.5 * (3.0 - 5f64.sqrt());
        let (mut a, mut b) = (-self.fold.tongue_w, self.fold.tongue_w);
        for _ in 0..200 {
            let w1 = a + phi * (b - a);
            let w2 = b - phi * (b - a);
            if self.c_value(w1, y0, x1) < self.c_value(w2, y0, x1) {
                b = w2;
            } else {
                a = w1;
            }
            if (b - a).abs() < 1e-13 {
                break;
            }
        }
        let w = 0.5 * (a + b);
        (self.c_value(w, y0, x1), w)
    }

    /// Displacement quantities: `-Cbar` evaluated at the four corners of the
    /// `(y0, x1)` rectangle (exact for profiles monotone in each argument).
    pub fn displacement(&self) -> DisplacementQuad {
        let r = self.cbar_rect();
        let v = |y: f64, x: f64| -self.cbar(y, x).0;
        let rows = [
            (v(r.y.lo, r.x.lo), v(r.y.lo, r.x.hi)),
            (v(r.y.hi, r.x.lo), v(r.y.hi, r.x.hi)),
        ];
        let row_min = [rows[0].0.min(rows[0].1), rows[1].0.min(rows[1].1)];
        let row_max = [rows[0].0.max(rows[0].1), rows[1].0.max(rows[1].1)];
        DisplacementQuad {
            delta: row_min[0].min(row_min[1]),
            delta_l: row_min[0].max(row_min[1]),
            delta_r: row_max[0].min(row_max[1]),
            delta_lr: row_max[0].max(row_max[1]),
        }
    }

    /// Solve `C(w, y0, x1) = 0` on one branch.
    pub fn solve_w(&self, y0: f64, x1: f64, sign: BranchSign) -> Result<f64, FoldError> {
        let (cbar, w_min) = self.cbar(y0, x1);
        if cbar >= 0.0 {
            return Err(FoldError::NoIntersection(-cbar));
        }
        let (_, _, cww) = self.c_jet(w_min, y0, x1);
        let mut w = w_min + sign.factor() * (-cbar / (0.5 * cww)).sqrt();
        let mut polish = false;
        for _ in 0..MAX_NEWTON_ITERS {
            let (c, cw, _) = self.c_jet(w, y0, x1);
            if polish {
                return Ok(w);
            }
            if c.abs() < SOLVE_TOLERANCE {
                polish = true;
            }
            if cw.abs() < DERIVATIVE_FLOOR {
                return Err(FoldError::NoIntersection(-cbar));
            }
            w -= c / cw;
        }
        Ok(w)
    }

    /// Every quantity of the parabolic derivative calculus at `(w, y0, x1)`,
    /// named by formula. Branch-level entries (`A_x`, ..., `B_xt`) describe
    /// the parabolic composition through the given `w` (meaningful when
    /// `C(w, y0, x1) = 0`).
    pub fn point_formulas(&self, w: f64, y0: f64, x1: f64) -> Formulas {
        let fold = &self.fold;
        let (xu, d0) = self.solve_x(w, y0);
        let (ys, d1) = self.solve_y(w, x1);
        let b0 = self.b0.at(y0, xu);
        let a1 = self.a1.at(ys, x1);
        let a0 = self.a0.at(y0, xu);
        let b1 = self.b1.at(ys, x1);

        // Fold leg jets (affine legs: unit w-slope, constant kappa).
        let (xu_w, xu_y) = (1.0, fold.x_u.kappa);
        let (ys_w, ys_x) = (1.0, fold.y_s.kappa);

        let di0 = 1.0 / d0;
        let di1 = 1.0 / d1;
        let x_w = xu_w * di0;
        let x_y = xu_y * b0.y * di0;
        let x_t = xu_y * b0.t * di0;
        let y_w = ys_w * di1;
        let y_x = ys_x * a1.x * di1;
        let y_t = ys_x * a1.t * di1;

        let ybar = b0.v;
        let xbar = a1.v;
        let ybar_w = b0.x * x_w;
        let ybar_y = b0.y * di0;
        let ybar_t = b0.t + b0.x * x_t;
        let xbar_w = a1.y * y_w;
        let xbar_x = a1.x * di1;
        let xbar_t = a1.t + a1.y * y_t;

        let t = fold.t;
        let th_y = fold.theta.dy(ybar, xbar);
        let th_x = fold.theta.dx(ybar, xbar);
        let th_t = fold.theta.dt();
        let th_xx = fold.theta.dxx(ybar, xbar);
        let th_yy = fold.theta.dyy(ybar, xbar);
        let th_xy = fold.theta.dxy(ybar, xbar);
        let th_xt = fold.theta.dxt(ybar, xbar);
        let th_yt = fold.theta.dyt(ybar, xbar);

        let c = w * w - fold.theta.value(ybar, xbar, t);
        let c_w = 2.0 * w - th_x * xbar_w - th_y * ybar_w;
        let c_x = -th_x * xbar_x;
        let c_y = -th_y * ybar_y;
        let c_t = -(th_x * xbar_t + th_y * ybar_t + th_t);

        // Second derivatives of the eliminations (X_u, Y_s have no second
        // partials and no t-dependence; the general formulas keep the
        // leg-jet structure visible).
        let x_ww = di0 * (xu_y * b0.xx * x_w * x_w);
        let x_wy = di0 * (xu_y * x_w * (b0.xy + b0.xx * x_y));
        let x_yy = di0 * (xu_y * (b0.yy + 2.0 * b0.xy * x_y + b0.xx * x_y * x_y));
        let x_wt = di0 * (xu_y * x_w * (b0.xt + b0.xx * x_t));
        let x_yt = di0 * (xu_y * (b0.yt + b0.xy * x_t + b0.xt * x_y + b0.xx * x_y * x_t));
        let y_ww = di1 * (ys_x * a1.yy * y_w * y_w);
        let y_wx = di1 * (ys_x * y_w * (a1.xy + a1.yy * y_x));
        let y_xx = di1 * (ys_x * (a1.xx + 2.0 * a1.xy * y_x + a1.yy * y_x * y_x));
        let y_wt = di1 * (ys_x * y_w * (a1.yt + a1.yy * y_t));
        let y_xt = di1 * (ys_x * (a1.xt + a1.xy * y_t + a1.yt * y_x + a1.yy * y_x * y_t));

        let xbar_ww = a1.yy * y_w * y_w + a1.y * y_ww;
        let xbar_wx = a1.xy * y_w + a1.yy * y_w * y_x + a1.y * y_wx;
        let xbar_wt = a1.yt * y_w + a1.yy * y_w * y_t + a1.y * y_wt;
        let xbar_xx = a1.xx + 2.0 * a1.xy * y_x + a1.yy * y_x * y_x + a1.y * y_xx;
        let xbar_xt = a1.xt + a1.xy * y_t + a1.yt * y_x + a1.yy * y_x * y_t + a1.y * y_xt;
        let ybar_ww = b0.xx * x_w * x_w + b0.x * x_ww;
        let ybar_wy = b0.xy * x_w + b0.xx * x_w * x_y + b0.x * x_wy;
        let ybar_wt = b0.xt * x_w + b0.xx * x_w * x_t + b0.x * x_wt;
        let ybar_yy = b0.yy + 2.0 * b0.xy * x_y + b0.xx * x_y * x_y + b0.x * x_yy;
        let ybar_yt = b0.yt + b0.xy * x_t + b0.xt * x_y + b0.xx * x_y * x_t + b0.x * x_yt;

        let c_ww = 2.0
            - (th_x * xbar_ww
                + th_y * ybar_ww
                + th_xx * xbar_w * xbar_w
                + 2.0 * th_xy * xbar_w * ybar_w
                + th_yy * ybar_w * ybar_w);
        let c_wx = -(th_xx * xbar_w * xbar_x + th_xy * ybar_w * xbar_x + th_x * xbar_wx);
        let c_wy = -(th_yy * ybar_w * ybar_y + th_xy * xbar_w * ybar_y + th_y * ybar_wy);
        let c_wt = -(th_xt * xbar_w
            + th_xx * xbar_w * xbar_t
            + th_xy * (xbar_w * ybar_t + ybar_w * xbar_t)
            + th_yy * ybar_w * ybar_t
            + th_yt * ybar_w
            + th_x * xbar_wt
            + th_y * ybar_wt);
        let c_xx = -(th_xx * xbar_x * xbar_x + th_x * xbar_xx);
        let c_xy = -(th_xy * xbar_x * ybar_y);
        let c_yy = -(th_yy * ybar_y * ybar_y + th_y * ybar_yy);
        let c_xt = -(th_xt * xbar_x + th_xx * xbar_x * xbar_t + th_xy * xbar_x * ybar_t + th_x * xbar_xt);
        let c_yt = -(th_yt * ybar_y + th_yy * ybar_y * ybar_t + th_xy * ybar_y * xbar_t + th_y * ybar_yt);

        let w_x = -c_x / c_w;
        let w_y = -c_y / c_w;
        let w_t = -c_t / c_w;
        let w_xx = -(c_ww * w_x * w_x + 2.0 * c_wx * w_x + c_xx) / c_w;
        let w_xy = -(c_ww * w_x * w_y + c_wx * w_y + c_wy * w_x + c_xy) / c_w;
        let w_yy = -(c_ww * w_y * w_y + 2.0 * c_wy * w_y + c_yy) / c_w;
        let w_xt = -(c_ww * w_x * w_t + c_wx * w_t + c_wt * w_x + c_xt) / c_w;
        let w_yt = -(c_ww * w_y * w_t + c_wy * w_t + c_wt * w_y + c_yt) / c_w;

        // Branch coefficients.
        let a_x = a0.x * x_w * w_x;
        let a_y = a0.y + a0.x * (x_y + x_w * w_y);
        let a_t = a0.t + a0.x * (x_t + x_w * w_t);
        let b_y = b1.y * y_w * w_y;
        let b_x = b1.x + b1.y * (y_x + y_w * w_x);
        let b_t = b1.t + b1.y * (y_t + y_w * w_t);

        // Substituted closed forms.
        let a_x_sub = a0.x * a1.x / c_w * th_x * xu_w * di0 * di1;
        let b_y_sub = b1.y * b0.y / c_w * th_y * ys_w * di0 * di1;

        // Logarithmic derivatives of the branch coefficients.
        let la0_x = a0.xx / a0.x;
        let la0_y = a0.xy / a0.x;
        let la0_t = a0.xt / a0.x;
        let lb1_y = b1.yy / b1.y;
        let lb1_x = b1.xy / b1.y;
        let lb1_t = b1.yt / b1.y;
        let dx_log_a_x = w_x * x_w * la0_x + w_x * (x_ww / x_w) + w_xx / w_x;
        let dy_log_a_x = la0_y
            + la0_x * (x_y + x_w * w_y)
            + x_wy / x_w
            + w_y * (x_ww / x_w)
            + w_xy / w_x;
        let dt_log_a_x = la0_t
            + la0_x * (x_t + x_w * w_t)
            + x_wt / x_w
            + w_t * (x_ww / x_w)
            + w_xt / w_x;
        let dy_log_b_y = w_y * y_w * lb1_y + w_yy / w_y + w_y * (y_ww / y_w);
        let dx_log_b_y = lb1_x
            + y_wx / y_w
            + w_xy / w_y
            + lb1_y * (y_x + y_w * w_x)
            + w_x * (y_ww / y_w);
        let dt_log_b_y = lb1_t
            + lb1_y * (y_t + y_w * w_t)
            + y_wt / y_w
            + w_t * (y_ww / y_w)
            + w_yt / w_y;

        let a_yy = a0.yy
            + 2.0 * a0.xy * (x_y + x_w * w_y)
            + a0.xx * (x_y + x_w * w_y).powi(2)
            + a0.x * (x_yy + 2.0 * x_wy * w_y + x_ww * w_y * w_y + x_w * w_yy);
        let a_yt = a0.yt
            + a0.xy * (x_t + x_w * w_t)
            + a0.xt * (x_y + x_w * w_y)
            + a0.xx * (x_t + x_w * w_t) * (x_y + x_w * w_y)
            + a0.x * (x_yt + x_wy * w_t + x_wt * w_y + x_ww * w_y * w_t + x_w * w_yt);
        let b_xx = b1.xx
            + 2.0 * b1.xy * (y_x + y_w * w_x)
            + b1.yy * (y_x + y_w * w_x).powi(2)
            + b1.y * (y_xx + 2.0 * y_wx * w_x + y_ww * w_x * w_x + y_w * w_xx);
        let b_xt = b1.xt
            + b1.xy * (y_t + y_w * w_t)
            + b1.yt * (y_x + y_w * w_x)
            + b1.yy * (y_x + y_w * w_x) * (y_t + y_w * w_t)
            + b1.y * (y_xt + y_wx * w_t + y_wt * w_x + y_ww * w_x * w_t + y_w * w_xt);

        let mut m: Formulas = BTreeMap::new();
        m.insert("C", c);
        m.insert("C_w", c_w);
        m.insert("C_x", c_x);
        m.insert("C_y", c_y);
        m.insert("C_t", c_t);
        m.insert("C_ww", c_ww);
        m.insert("C_wx", c_wx);
        m.insert("C_wy", c_wy);
        m.insert("C_wt", c_wt);
        m.insert("C_xx", c_xx);
        m.insert("C_xy", c_xy);
        m.insert("C_yy", c_yy);
        m.insert("C_xt", c_xt);
        m.insert("C_yt", c_yt);
        m.insert("X", xu);
        m.insert("Y", ys);
        m.insert("X_w", x_w);
        m.insert("X_y", x_y);
        m.insert("X_t", x_t);
        m.insert("Y_w", y_w);
        m.insert("Y_x", y_x);
        m.insert("Y_t", y_t);
        m.insert("X_ww", x_ww);
        m.insert("X_wy", x_wy);
        m.insert("X_yy", x_yy);
        m.insert("X_wt", x_wt);
        m.insert("X_yt", x_yt);
        m.insert("Y_ww", y_ww);
        m.insert("Y_wx", y_wx);
        m.insert("Y_xx", y_xx);
        m.insert("Y_wt", y_wt);
        m.insert("Y_xt", y_xt);
        m.insert("Xbar", xbar);
        m.insert("Ybar", ybar);
        m.insert("Xbar_w", xbar_w);
        m.insert("Xbar_x", xbar_x);
        m.insert("Xbar_t", xbar_t);
        m.insert("Ybar_w", ybar_w);
        m.insert("Ybar_y", ybar_y);
        m.insert("Ybar_t", ybar_t);
        m.insert("Xbar_ww", xbar_ww);
        m.insert("Xbar_wx", xbar_wx);
        m.insert("Xbar_wt", xbar_wt);
        m.insert("Xbar_xx", xbar_xx);
        m.insert("Xbar_xt", xbar_xt);
        m.insert("Ybar_ww", ybar_ww);
        m.insert("Ybar_wy", ybar_wy);
        m.insert("Ybar_wt", ybar_wt);
        m.insert("Ybar_yy", ybar_yy);
        m.insert("Ybar_yt", ybar_yt);
        m.insert("W_x", w_x);
        m.insert("W_y", w_y);
        m.insert("W_t", w_t);
        m.insert("W_xx", w_xx);
        m.insert("W_xy", w_xy);
        m.insert("W_yy", w_yy);
        m.insert("W_xt", w_xt);
        m.insert("W_yt", w_yt);
        m.insert("A_x", a_x);
        m.insert("A_y", a_y);
        m.insert("A_t", a_t);
        m.insert("B_y", b_y);
        m.insert("B_x", b_x);
        m.insert("B_t", b_t);
        m.insert("A_x_sub", a_x_sub);
        m.insert("B_y_sub", b_y_sub);
        m.insert("dx_log_A_x", dx_log_a_x);
        m.insert("dy_log_A_x", dy_log_a_x);
        m.insert("dt_log_A_x", dt_log_a_x);
        m.insert("dy_log_B_y", dy_log_b_y);
        m.insert("dx_log_B_y", dx_log_b_y);
        m.insert("dt_log_B_y", dt_log_b_y);
        m.insert("A_yy", a_yy);
        m.insert("A_yt", a_yt);
        m.insert("B_xx", b_xx);
        m.insert("B_xt", b_xt);
        m
    }

    fn a0_at(&self, y0: f64, xu: f64) -> Jet2 {
        self.a0.at(y0, xu)
    }

    fn b1_at(&self, ys: f64, x1: f64) -> Jet2 {
        self.b1.at(ys, x1)
    }
}

/// Assemble the tangency functional for `(F_0, G, F_1)`: the field
/// `Cbar(y0, x1)` with the minimizing `w`, plus an evaluation context.
///
/// (PC1) is checked first: the tongue-side coefficients of the pair must be
/// flat against the fold geometry.
pub fn tangency_functional<'a>(
    f0: &'a ImplicitMap,
    fold: &'a FoldMap,
    f1: &'a ImplicitMap,
    cfg: &ParabolicConfig,
) -> Result<(TangencyCtx<'a>, ScalarField2, ScalarField2), FoldError> {
    check_pc1(f0, f1, cfg)?;
    let ctx = TangencyCtx::new(f0, fold, f1);
    let rect = ctx.cbar_rect();
    let deg = 12.min(cfg.degree.max(2));
    let ys = crate::cheb::lobatto_nodes(deg);
    let xs = crate::cheb::lobatto_nodes(deg);
    let mut cb = Vec::with_capacity(ys.len() * xs.len());
    let mut wm = Vec::with_capacity(ys.len() * xs.len());
    for &sy in &ys {
        let y0 = rect.y.from_unit(sy);
        for &sx in &xs {
            let x1 = rect.x.from_unit(sx);
            let (c, w) = ctx.cbar(y0, x1);
            cb.push(c);
            wm.push(w);
        }
    }
    let mut cbar = ScalarField2::from_node_values(rect, deg, deg, &cb);
    let mut wmin = ScalarField2::from_node_values(rect, deg, deg, &wm);
    cbar.trim(1e-13);
    wmin.trim(1e-13);
    Ok((ctx, cbar, wmin))
}

fn check_pc1(f0: &ImplicitMap, f1: &ImplicitMap, cfg: &ParabolicConfig) -> Result<(), FoldError> {
    let checks: [(&'static str, f64); 4] = [
        ("|A1_y|", f1.a.deriv_y().max_abs()),
        ("|A1_yy|", f1.a.deriv_y().deriv_y().max_abs()),
        ("|B0_x|", f0.b.deriv_x().max_abs()),
        ("|B0_xx|", f0.b.deriv_x().deriv_x().max_abs()),
    ];
    for (name, value) in checks {
        if value >= cfg.b {
            return Err(FoldError::PC1Violated {
                quantity: name,
                value,
                bound: cfg.b,
            });
        }
    }
    Ok(())
}

/// Displacement quantities of the pair at the fold's parameter value.
pub fn displacement(
    f0: &ImplicitMap,
    fold: &FoldMap,
    f1: &ImplicitMap,
    cfg: &ParabolicConfig,
) -> Result<DisplacementQuad, FoldError> {
    check_pc1(f0, f1, cfg)?;
    Ok(TangencyCtx::new(f0, fold, f1).displacement())
}

/// Parabolic composition `F_1 o G o F_0`: both branches as affine-like maps.
pub fn parabolic_compose(
    f0: &ImplicitMap,
    fold: &FoldMap,
    f1: &ImplicitMap,
    cfg: &ParabolicConfig,
) -> Result<ParabolicPair, FoldError> {
    check_pc1(f0, f1, cfg)?;
    let ctx = TangencyCtx::new(f0, fold, f1);
    let quad = ctx.displacement();
    if quad.delta <= 0.0 {
        return Err(FoldError::NoIntersection(quad.delta));
    }
    let (p1, _) = f1.widths();
    let (_, q0) = f0.widths();
    let required = cfg.pc2_factor * (p1 + q0);
    if quad.delta <= required {
        return Err(FoldError::PC2Violated {
            delta: quad.delta,
            required,
        });
    }

    let rect = ctx.cbar_rect();
    let deg = cfg.degree;
    let ys = crate::cheb::lobatto_nodes(deg);
    let xs = crate::cheb::lobatto_nodes(deg);
    let branch = |sign: BranchSign| -> Result<(ImplicitMap, ScalarField2), FoldError> {
        let mut a_vals = Vec::with_capacity(ys.len() * xs.len());
        let mut b_vals = Vec::with_capacity(ys.len() * xs.len());
        let mut at_vals = Vec::with_capacity(ys.len() * xs.len());
        let mut bt_vals = Vec::with_capacity(ys.len() * xs.len());
        let mut w_vals = Vec::with_capacity(ys.len() * xs.len());
        for &sy in &ys {
            let y0 = rect.y.from_unit(sy);
            for &sx in &xs {
                let x1 = rect.x.from_unit(sx);
                let w = ctx.solve_w(y0, x1, sign)?;
                let (xu, _) = ctx.solve_x(w, y0);
                let (ysol, _) = ctx.solve_y(w, x1);
                let a0 = ctx.a0_at(y0, xu);
                let b1 = ctx.b1_at(ysol, x1);
                a_vals.push(a0.v);
                b_vals.push(b1.v);
                w_vals.push(w);
                let f = ctx.point_formulas(w, y0, x1);
                at_vals.push(f["A_t"]);
                bt_vals.push(f["B_t"]);
            }
        }
        let mut a = ScalarField2::from_node_values(rect, deg, deg, &a_vals);
        let mut b = ScalarField2::from_node_values(rect, deg, deg, &b_vals);
        let mut at = ScalarField2::from_node_values(rect, deg, deg, &at_vals);
        let mut bt = ScalarField2::from_node_values(rect, deg, deg, &bt_vals);
        let mut wf = ScalarField2::from_node_values(rect, deg, deg, &w_vals);
        a.trim(1e-13);
        b.trim(1e-13);
        at.trim(1e-13);
        bt.trim(1e-13);
        wf.trim(1e-13);
        let map = ImplicitMap::from_fields(a, b, f0.source, f1.target)
            .map_err(|_| FoldError::NoIntersection(quad.delta))?
            .with_parameter_fields(Some(at), Some(bt));
        Ok((map, wf))
    };
    let (plus, w_plus) = branch(BranchSign::Plus)?;
    let (minus, w_minus) = branch(BranchSign::Minus)?;

    let (_, cbar, _) = tangency_functional(f0, fold, f1, cfg)?;
    Ok(ParabolicPair {
        plus,
        minus,
        w_plus,
        w_minus,
        cbar,
        displacement: quad,
    })
}

/// Measured constants for the parabolic width, distortion and deviation
/// estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParabolicEstimates {
    /// `|P^+-|/(|P_0||P_1| delta^-1/2)` for both branches.
    pub width_ratio_p: (f64, f64),
    /// `|Q^+-|/(|Q_0||Q_1| delta^-1/2)` for both branches.
    pub width_ratio_q: (f64, f64),
    /// Solved-for constant in the distortion bound.
    pub distortion_c: f64,
    /// Measured constants for the `|A_y - A_0,y|` and `|B_x - B_1,x|` bounds.
    pub ay_dev_c: f64,
    pub bx_dev_c: f64,
    /// Whether `D(F_0) + D(F_1) <= delta^-1/2` held (the distortion bound's
    /// own hypothesis).
    pub distortion_hypothesis: bool,
}

/// Measure the width/distortion/deviation constants realized by a pair.
pub fn check_parabolic_estimates(
    pair: &ParabolicPair,
    f0: &ImplicitMap,
    f1: &ImplicitMap,
) -> ParabolicEstimates {
    let delta = pair.displacement.delta;
    let (p0, q0) = f0.widths();
    let (p1, q1) = f1.widths();
    let (pp, qp) = pair.plus.widths();
    let (pm, qm) = pair.minus.widths();
    let scale_p = p0 * p1 / delta.sqrt();
    let scale_q = q0 * q1 / delta.sqrt();

    let d0 = f0.distortion().unwrap_or(f64::INFINITY);
    let d1 = f1.distortion().unwrap_or(f64::INFINITY);
    let dp = pair.plus.distortion().unwrap_or(f64::INFINITY);
    let dm = pair.minus.distortion().unwrap_or(f64::INFINITY);
    let d_branch = dp.max(dm);
    let base = d0.max(d1);
    let growth = (d_branch - base).max(0.0);
    let distortion_c = growth * delta / q0.max(p1);

    let ay_dev_c = deviation_constant(&pair.plus.a.deriv_y(), &f0.a.deriv_y(), p0 * q0 / delta.sqrt());
    let bx_dev_c = deviation_constant(&pair.plus.b.deriv_x(), &f1.b.deriv_x(), p1 * q1 / delta.sqrt());

    ParabolicEstimates {
        width_ratio_p: (pp / scale_p, pm / scale_p),
        width_ratio_q: (qp / scale_q, qm / scale_q),
        distortion_c,
        ay_dev_c,
        bx_dev_c,
        distortion_hypothesis: d0 + d1 <= 1.0 / delta.sqrt(),
    }
}

/// Max of `|f - g|` over f's rectangle (g evaluated at the corresponding
/// argument of the factor map), normalized by `scale`.
fn deviation_constant(branch_coeff: &ScalarField2, factor_coeff: &ScalarField2, scale: f64) -> f64 {
    // The comparison is pointwise in the branch rectangle; the factor
    // coefficient is nearly constant over its own rectangle at tongue scale,
    // so comparing against its value at the matching (y, x-midpoint) is the
    // measured deviation.
    let rect = branch_coeff.domain;
    let dev = crate::field::max_abs_refined(
        |y, x| branch_coeff.eval(y, x) - factor_coeff.eval(y, factor_coeff.domain.x.mid()),
        &rect,
    );
    dev / scale.max(1e-300)
}

/// Verify the parabolic derivative formulas against finite differences of
/// the refit branch fields and re-solved eliminations.
pub fn verify_parabolic_calculus(
    build: &dyn Fn(f64) -> (ImplicitMap, FoldMap, ImplicitMap),
    t: f64,
    sign: BranchSign,
    grid_n: usize,
    cfg: &ParabolicConfig,
    corrupt: Option<&str>,
) -> Result<CalculusReport, FoldError> {
    let (f0, fold, f1) = build(t);
    let pair = parabolic_compose(&f0, &fold, &f1, cfg)?;
    let branch = match sign {
        BranchSign::Plus => &pair.plus,
        BranchSign::Minus => &pair.minus,
    };
    let ht = 2e-4 * fold.t.abs().max(0.1);
    let (f0m, foldm, f1m) = build(t - ht);
    let (f0p, foldp, f1p) = build(t + ht);
    let pair_m = parabolic_compose(&f0m, &foldm, &f1m, cfg)?;
    let pair_p = parabolic_compose(&f0p, &foldp, &f1p, cfg)?;
    let (branch_m, branch_p) = match sign {
        BranchSign::Plus => (&pair_m.plus, &pair_p.plus),
        BranchSign::Minus => (&pair_m.minus, &pair_p.minus),
    };

    let ctx = TangencyCtx::new(&f0, &fold, &f1);
    let ctx_m = TangencyCtx::new(&f0m, &foldm, &f1m);
    let ctx_p = TangencyCtx::new(&f0p, &foldp, &f1p);
    let rect = ctx.cbar_rect();
    let h = 1e-3 * rect.x.len().max(rect.y.len());
    let hw = h;

    let mut acc = Accum::new();
    let ba = &branch.a;
    let bb = &branch.b;
    let bax = ba.deriv_x();
    let bby = bb.deriv_y();

    for i in 1..grid_n {
        let y0 = rect.y.lo + rect.y.len() * i as f64 / grid_n as f64;
        for j in 1..grid_n {
            let x1 = rect.x.lo + rect.x.len() * j as f64 / grid_n as f64;
            let w = ctx.solve_w(y0, x1, sign)?;
            let an = ctx.point_formulas(w, y0, x1);

            // C partials: finite differences of the assembled functional.
            let c = |ww: f64, yy: f64, xx: f64| ctx.c_value(ww, yy, xx);
            let c0 = c(w, y0, x1);
            acc.push("C_w", an["C_w"], (c(w + hw, y0, x1) - c(w - hw, y0, x1)) / (2.0 * hw));
            acc.push("C_x", an["C_x"], (c(w, y0, x1 + h) - c(w, y0, x1 - h)) / (2.0 * h));
            acc.push("C_y", an["C_y"], (c(w, y0 + h, x1) - c(w, y0 - h, x1)) / (2.0 * h));
            acc.push(
                "C_t",
                an["C_t"],
                (ctx_p.c_value(w, y0, x1) - ctx_m.c_value(w, y0, x1)) / (2.0 * ht),
            );
            acc.push("C_ww", an["C_ww"], (c(w + hw, y0, x1) - 2.0 * c0 + c(w - hw, y0, x1)) / (hw * hw));
            acc.push("C_xx", an["C_xx"], (c(w, y0, x1 + h) - 2.0 * c0 + c(w, y0, x1 - h)) / (h * h));
            acc.push("C_yy", an["C_yy"], (c(w, y0 + h, x1) - 2.0 * c0 + c(w, y0 - h, x1)) / (h * h));
            let mixed = |f1v: f64, f2v: f64, f3v: f64, f4v: f64, ha: f64, hb: f64| {
                ((f1v - f2v) - (f3v - f4v)) / (4.0 * ha * hb)
            };
            acc.push(
                "C_wx",
                an["C_wx"],
                mixed(c(w + hw, y0, x1 + h), c(w + hw, y0, x1 - h), c(w - hw, y0, x1 + h), c(w - hw, y0, x1 - h), hw, h),
            );
            acc.push(
                "C_wy",
                an["C_wy"],
                mixed(c(w + hw, y0 + h, x1), c(w + hw, y0 - h, x1), c(w - hw, y0 + h, x1), c(w - hw, y0 - h, x1), hw, h),
            );
            acc.push(
                "C_xy",
                an["C_xy"],
                mixed(c(w, y0 + h, x1 + h), c(w, y0 + h, x1 - h), c(w, y0 - h, x1 + h), c(w, y0 - h, x1 - h), h, h),
            );
            acc.push(
                "C_wt",
                an["C_wt"],
                mixed(
                    ctx_p.c_value(w + hw, y0, x1),
                    ctx_p.c_value(w - hw, y0, x1),
                    ctx_m.c_value(w + hw, y0, x1),
                    ctx_m.c_value(w - hw, y0, x1),
                    ht,
                    hw,
                ),
            );
            acc.push(
                "C_xt",
                an["C_xt"],
                mixed(
                    ctx_p.c_value(w, y0, x1 + h),
                    ctx_p.c_value(w, y0, x1 - h),
                    ctx_m.c_value(w, y0, x1 + h),
                    ctx_m.c_value(w, y0, x1 - h),
                    ht,
                    h,
                ),
            );
            acc.push(
                "C_yt",
                an["C_yt"],
                mixed(
                    ctx_p.c_value(w, y0 + h, x1),
                    ctx_p.c_value(w, y0 - h, x1),
                    ctx_m.c_value(w, y0 + h, x1),
                    ctx_m.c_value(w, y0 - h, x1),
                    ht,
                    h,
                ),
            );

            // Elimination legs.
            let xv = |ww: f64, yy: f64| ctx.solve_x(ww, yy).0;
            let yv = |ww: f64, xx: f64| ctx.solve_y(ww, xx).0;
            acc.push("X_w", an["X_w"], (xv(w + hw, y0) - xv(w - hw, y0)) / (2.0 * hw));
            acc.push("X_y", an["X_y"], (xv(w, y0 + h) - xv(w, y0 - h)) / (2.0 * h));
            acc.push("X_t", an["X_t"], (ctx_p.solve_x(w, y0).0 - ctx_m.solve_x(w, y0).0) / (2.0 * ht));
            acc.push("Y_w", an["Y_w"], (yv(w + hw, x1) - yv(w - hw, x1)) / (2.0 * hw));
            acc.push("Y_x", an["Y_x"], (yv(w, x1 + h) - yv(w, x1 - h)) / (2.0 * h));
            acc.push("Y_t", an["Y_t"], (ctx_p.solve_y(w, x1).0 - ctx_m.solve_y(w, x1).0) / (2.0 * ht));
            acc.push("X_ww", an["X_ww"], (xv(w + hw, y0) - 2.0 * xv(w, y0) + xv(w - hw, y0)) / (hw * hw));
            acc.push("X_yy", an["X_yy"], (xv(w, y0 + h) - 2.0 * xv(w, y0) + xv(w, y0 - h)) / (h * h));
            acc.push(
                "X_wy",
                an["X_wy"],
                mixed(xv(w + hw, y0 + h), xv(w + hw, y0 - h), xv(w - hw, y0 + h), xv(w - hw, y0 - h), hw, h),
            );
            acc.push(
                "X_wt",
                an["X_wt"],
                mixed(
                    ctx_p.solve_x(w + hw, y0).0,
                    ctx_p.solve_x(w - hw, y0).0,
                    ctx_m.solve_x(w + hw, y0).0,
                    ctx_m.solve_x(w - hw, y0).0,
                    ht,
                    hw,
                ),
            );
            acc.push(
                "X_yt",
                an["X_yt"],
                mixed(
                    ctx_p.solve_x(w, y0 + h).0,
                    ctx_p.solve_x(w, y0 - h).0,
                    ctx_m.solve_x(w, y0 + h).0,
                    ctx_m.solve_x(w, y0 - h).0,
                    ht,
                    h,
                ),
            );
            acc.push("Y_ww", an["Y_ww"], (yv(w + hw, x1) - 2.0 * yv(w, x1) + yv(w - hw, x1)) / (hw * hw));
            acc.push("Y_xx", an["Y_xx"], (yv(w, x1 + h) - 2.0 * yv(w, x1) + yv(w, x1 - h)) / (h * h));
            acc.push(
                "Y_wx",
                an["Y_wx"],
                mixed(yv(w + hw, x1 + h), yv(w + hw, x1 - h), yv(w - hw, x1 + h), yv(w - hw, x1 - h), hw, h),
            );
            acc.push(
                "Y_wt",
                an["Y_wt"],
                mixed(
                    ctx_p.solve_y(w + hw, x1).0,
                    ctx_p.solve_y(w - hw, x1).0,
                    ctx_m.solve_y(w + hw, x1).0,
                    ctx_m.solve_y(w - hw, x1).0,
                    ht,
                    hw,
                ),
            );
            acc.push(
                "Y_xt",
                an["Y_xt"],
                mixed(
                    ctx_p.solve_y(w, x1 + h).0,
                    ctx_p.solve_y(w, x1 - h).0,
                    ctx_m.solve_y(w, x1 + h).0,
                    ctx_m.solve_y(w, x1 - h).0,
                    ht,
                    h,
                ),
            );

            // Branch solution W and its derivatives.
            let wv = |yy: f64, xx: f64| ctx.solve_w(yy, xx, sign).unwrap();
            let w0 = wv(y0, x1);
            let wp_t = ctx_p.solve_w(y0, x1, sign)?;
            let wm_t = ctx_m.solve_w(y0, x1, sign)?;
            acc.push("W_x", an["W_x"], (wv(y0, x1 + h) - wv(y0, x1 - h)) / (2.0 * h));
            acc.push("W_y", an["W_y"], (wv(y0 + h, x1) - wv(y0 - h, x1)) / (2.0 * h));
            acc.push("W_t", an["W_t"], (wp_t - wm_t) / (2.0 * ht));
            acc.push("W_xx", an["W_xx"], (wv(y0, x1 + h) - 2.0 * w0 + wv(y0, x1 - h)) / (h * h));
            acc.push("W_yy", an["W_yy"], (wv(y0 + h, x1) - 2.0 * w0 + wv(y0 - h, x1)) / (h * h));
            acc.push(
                "W_xy",
                an["W_xy"],
                mixed(wv(y0 + h, x1 + h), wv(y0 + h, x1 - h), wv(y0 - h, x1 + h), wv(y0 - h, x1 - h), h, h),
            );
            acc.push(
                "W_xt",
                an["W_xt"],
                mixed(
                    ctx_p.solve_w(y0, x1 + h, sign)?,
                    ctx_p.solve_w(y0, x1 - h, sign)?,
                    ctx_m.solve_w(y0, x1 + h, sign)?,
                    ctx_m.solve_w(y0, x1 - h, sign)?,
                    ht,
                    h,
                ),
            );
            acc.push(
                "W_yt",
                an["W_yt"],
                mixed(
                    ctx_p.solve_w(y0 + h, x1, sign)?,
                    ctx_p.solve_w(y0 - h, x1, sign)?,
                    ctx_m.solve_w(y0 + h, x1, sign)?,
                    ctx_m.solve_w(y0 - h, x1, sign)?,
                    ht,
                    h,
                ),
            );

            // Branch coefficient fields against the refit.
            acc.push("A_x", an["A_x"], (ba.eval(y0, x1 + h) - ba.eval(y0, x1 - h)) / (2.0 * h));
            acc.push("A_y", an["A_y"], (ba.eval(y0 + h, x1) - ba.eval(y0 - h, x1)) / (2.0 * h));
            acc.push("B_y", an["B_y"], (bb.eval(y0 + h, x1) - bb.eval(y0 - h, x1)) / (2.0 * h));
            acc.push("B_x", an["B_x"], (bb.eval(y0, x1 + h) - bb.eval(y0, x1 - h)) / (2.0 * h));
            acc.push("A_t", an["A_t"], (branch_p.a.eval(y0, x1) - branch_m.a.eval(y0, x1)) / (2.0 * ht));
            acc.push("B_t", an["B_t"], (branch_p.b.eval(y0, x1) - branch_m.b.eval(y0, x1)) / (2.0 * ht));
            acc.push("A_x_sub", an["A_x_sub"], bax.eval(y0, x1));
            acc.push("B_y_sub", an["B_y_sub"], bby.eval(y0, x1));

            let lax = |yy: f64, xx: f64| bax.eval(yy, xx).abs().ln();
            let lby = |yy: f64, xx: f64| bby.eval(yy, xx).abs().ln();
            acc.push("dx_log_A_x", an["dx_log_A_x"], (lax(y0, x1 + h) - lax(y0, x1 - h)) / (2.0 * h));
            acc.push("dy_log_A_x", an["dy_log_A_x"], (lax(y0 + h, x1) - lax(y0 - h, x1)) / (2.0 * h));
            acc.push("dy_log_B_y", an["dy_log_B_y"], (lby(y0 + h, x1) - lby(y0 - h, x1)) / (2.0 * h));
            acc.push("dx_log_B_y", an["dx_log_B_y"], (lby(y0, x1 + h) - lby(y0, x1 - h)) / (2.0 * h));
            acc.push(
                "dt_log_A_x",
                an["dt_log_A_x"],
                (branch_p.a.deriv_x().eval(y0, x1).abs().ln() - branch_m.a.deriv_x().eval(y0, x1).abs().ln()) / (2.0 * ht),
            );
            acc.push(
                "dt_log_B_y",
                an["dt_log_B_y"],
                (branch_p.b.deriv_y().eval(y0, x1).abs().ln() - branch_m.b.deriv_y().eval(y0, x1).abs().ln()) / (2.0 * ht),
            );
            acc.push(
                "A_yy",
                an["A_yy"],
                (ba.eval(y0 + h, x1) - 2.0 * ba.eval(y0, x1) + ba.eval(y0 - h, x1)) / (h * h),
            );
            acc.push(
                "B_xx",
                an["B_xx"],
                (bb.eval(y0, x1 + h) - 2.0 * bb.eval(y0, x1) + bb.eval(y0, x1 - h)) / (h * h),
            );
            acc.push(
                "A_yt",
                an["A_yt"],
                (branch_p.a.deriv_y().eval(y0, x1) - branch_m.a.deriv_y().eval(y0, x1)) / (2.0 * ht),
            );
            acc.push(
                "B_xt",
                an["B_xt"],
                (branch_p.b.deriv_x().eval(y0, x1) - branch_m.b.deriv_x().eval(y0, x1)) / (2.0 * ht),
            );

            // Assembled intermediaries.
            let xbar = |ww: f64, xx: f64| {
                let (ysv, _) = ctx.solve_y(ww, xx);
                f1.a.eval(ysv, xx)
            };
            let ybar = |ww: f64, yy: f64| {
                let (xuv, _) = ctx.solve_x(ww, yy);
                f0.b.eval(yy, xuv)
            };
            acc.push("Xbar_w", an["Xbar_w"], (xbar(w + hw, x1) - xbar(w - hw, x1)) / (2.0 * hw));
            acc.push("Xbar_x", an["Xbar_x"], (xbar(w, x1 + h) - xbar(w, x1 - h)) / (2.0 * h));
            acc.push("Ybar_w", an["Ybar_w"], (ybar(w + hw, y0) - ybar(w - hw, y0)) / (2.0 * hw));
            acc.push("Ybar_y", an["Ybar_y"], (ybar(w, y0 + h) - ybar(w, y0 - h)) / (2.0 * h));
        }
    }
    Ok(acc.into_report(corrupt))
}

struct Accum {
    max_abs: BTreeMap<&'static str, f64>,
    scale: BTreeMap<&'static str, f64>,
}

impl Accum {
    fn new() -> Self {
        Accum {
            max_abs: BTreeMap::new(),
            scale: BTreeMap::new(),
        }
    }
    fn push(&mut self, name: &'static str, analytic: f64, reference: f64) {
        let e = self.max_abs.entry(name).or_insert(0.0);
        *e = e.max((analytic - reference).abs());
        let s = self.scale.entry(name).or_insert(0.0);
        *s = s.max(reference.abs());
    }
    fn into_report(self, corrupt: Option<&str>) -> CalculusReport {
        let checks = self
            .max_abs
            .into_iter()
            .map(|(name, err)| {
                let scale = self.scale.get(name).copied().unwrap_or(0.0).max(1e-4);
                let mut max_rel = err / scale;
                if corrupt == Some(name) {
                    max_rel += 1.0;
                }
                FormulaCheck {
                    name: name.to_string(),
                    max_rel,
                    ok: max_rel < crate::compose::CALCULUS_THRESHOLD,
                }
            })
            .collect();
        CalculusReport {
            checks,
            threshold: crate::compose::CALCULUS_THRESHOLD,
        }
    }
}

/// A one-parameter family of vertical-like curves `x = phi(y, s)` in a chart.
pub struct CurveFamily<'a> {
    pub phi: &'a dyn Fn(f64, f64) -> f64,
    pub y_range: crate::geom::Interval,
    pub s_range: crate::geom::Interval,
}

/// Report of one Lipschitz-recursion measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// Max of the input family's `|d/dy log(dphi/ds)|`.
    pub t_in: f64,
    /// Max of the pulled-back family's `|d/dy log(dPhi/ds)|`.
    pub t_out: f64,
}

fn check_monotone(family: &CurveFamily, hs: f64) -> Result<(), FoldError> {
    let n = 24;
    for i in 0..=n {
        let y = family.y_range.lo + family.y_range.len() * i as f64 / n as f64;
        for j in 0..=n {
            let s = family.s_range.lo + family.s_range.len() * j as f64 / n as f64;
            let d = ((family.phi)(y, s + hs) - (family.phi)(y, s - hs)) / (2.0 * hs);
            if d <= 0.0 {
                return Err(FoldError::FamilyNotMonotone);
            }
        }
    }
    Ok(())
}

fn family_t(family: &CurveFamily, hy: f64, hs: f64) -> f64 {
    let n = 24;
    let mut t = 0.0f64;
    for i in 0..=n {
        let y = family.y_range.lo + family.y_range.len() * i as f64 / n as f64;
        for j in 0..=n {
            let s = family.s_range.lo + family.s_range.len() * j as f64 / n as f64;
            let dphi = |yy: f64| ((family.phi)(yy, s + hs) - (family.phi)(yy, s - hs)) / (2.0 * hs);
            let v = (dphi(y + hy).abs().ln() - dphi(y - hy).abs().ln()) / (2.0 * hy);
            t = t.max(v.abs());
        }
    }
    t
}

/// Pull a monotone curve family back through an affine-like map and measure
/// the Lipschitz quantity `T' = max |d/dy0 log dPhi/ds|.
pub fn lipschitz_affine(f: &ImplicitMap, family: &CurveFamily) -> Result<LipschitzReport, FoldError> {
    let hs = 1e-4 * family.s_range.len().max(1e-3);
    check_monotone(family, hs)?;
    let hy = 1e-3 * f.rect().y.len();
    let t_in = family_t(family, hy, hs);

    // Phi(y0, s) = A(y0, phi(psi, s)) with psi solving y1 = B(y0, phi(y1, s)).
    let b = f.b.clone();
    let a = f.a.clone();
    let y1_mid = f2_mid(f);
    let phi_pull = move |y0: f64, s: f64| -> f64 {
        let mut y1 = y1_mid;
        for _ in 0..MAX_NEWTON_ITERS {
            let x1 = (family.phi)(y1, s);
            let r = y1 - b.eval(y0, x1);
            if r.abs() < 1e-14 {
                break;
            }
            let h = 1e-7;
            let dphi_dy = ((family.phi)(y1 + h, s) - (family.phi)(y1 - h, s)) / (2.0 * h);
            let d = 1.0 - b.deriv_x().eval(y0, x1) * dphi_dy;
            y1 -= r / d;
        }
        a.eval(y0, (family.phi)(y1, s))
    };

    let pulled = CurveFamily {
        phi: &phi_pull,
        y_range: f.rect().y,
        s_range: family.s_range,
    };
    let t_out = family_t(&pulled, hy, hs);
    Ok(LipschitzReport { t_in, t_out })
}

fn f2_mid(f: &ImplicitMap) -> f64 {
    f.image.transverse().mid()
}

/// Parabolic version: pull the family back through `G o F_0` on one branch.
#[allow(clippy::too_many_lines)]
pub fn lipschitz_parabolic(
    f0: &ImplicitMap,
    fold: &FoldMap,
    family: &CurveFamily,
    sign: BranchSign,
) -> Result<LipschitzReport, FoldError> {
    let hs = 1e-4 * family.s_range.len().max(1e-3);
    check_monotone(family, hs)?;
    let hy = 2e-3 * f0.rect().y.len();
    let t_in = family_t(family, hy, hs);

    let b0 = FieldJet::new(&f0.b, None);
    let a0 = f0.a.clone();
    let theta = fold.theta;
    let t = fold.t;
    let (xu_leg, ys_leg) = (fold.x_u, fold.y_s);
    let phi_pull = move |y0: f64, s: f64| -> f64 {
        // y_s = Y_s(w, phi(y_s, s)) solved for y_s, then Xbar = phi(Y, s);
        // x_u = X_u(w, B0(y0, x_u)) solved for x_u, Ybar = B0(y0, x_u);
        // C(w) = w^2 - theta(Ybar, Xbar, t) = 0 on the chosen branch.
        let c_at = |w: f64| -> f64 {
            let mut ys = ys_leg.anchor + w;
            for _ in 0..MAX_NEWTON_ITERS {
                let xs = (family.phi)(ys, s);
                let r = ys - ys_leg.value(w, xs);
                if r.abs() < 1e-14 {
                    break;
                }
                let h = 1e-7;
                let dphi = ((family.phi)(ys + h, s) - (family.phi)(ys - h, s)) / (2.0 * h);
                ys -= r / (1.0 - ys_leg.kappa * dphi);
            }
            let xbar = (family.phi)(ys, s);
            let mut xu = xu_leg.anchor + w;
            for _ in 0..MAX_NEWTON_ITERS {
                let yu = b0.value(y0, xu);
                let r = xu - xu_leg.value(w, yu);
                if r.abs() < 1e-14 {
                    break;
                }
                xu -= r / (1.0 - xu_leg.kappa * b0.dx_at(y0, xu));
            }
            let ybar = b0.value(y0, xu);
            w * w - theta.value(ybar, xbar, t)
        };
        // Locate the branch root of C by bisection from the vertex.
        let mut lo = 0.0;
        let mut hi = sign.factor() * 2.0 * fold.tongue_w;
        if c_at(lo) > 0.0 {
            return f64::NAN;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if c_at(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = 0.5 * (lo + hi);
        let mut xu = xu_leg.anchor + w;
        for _ in 0..MAX_NEWTON_ITERS {
            let yu = b0.value(y0, xu);
            let r = xu - xu_leg.value(w, yu);
            if r.abs() < 1e-14 {
                break;
            }
            xu -= r / (1.0 - xu_leg.kappa * b0.dx_at(y0, xu));
        }
        a0.eval(y0, xu)
    };

    let pulled = CurveFamily {
        phi: &phi_pull,
        y_range: f0.rect().y,
        s_range: family.s_range,
    };
    let t_out = family_t(&pulled, hy, hs);
    Ok(LipschitzReport { t_in, t_out })
}
