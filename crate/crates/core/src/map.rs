//! Implicitly represented affine-like maps and their diagnostics.
//!
//! An affine-like map `F` from a vertical strip `P` onto a horizontal strip
//! `Q` is stored through the pair `(A, B)` with
//! `F(x0, y0) = (x1, y1)  <=>  x0 = A(y0, x1), y1 = B(y0, x1)`,
//! both fields living on the rectangle `I_0^u x I_1^s`. The representation is
//! symmetric under time reversal and the second-order distortion calculus is
//! expressed directly in it.

use crate::error::MapError;
use crate::field::{max_abs_refined, ScalarField2};
use crate::geom::{ChartId, Rect};
use crate::strip::{Orientation, Strip};
use serde::{Deserialize, Serialize};

pub const DERIVATIVE_FLOOR: f64 = 1e-10;
pub const DELTA_FLOOR: f64 = 1e-6;
pub const SOLVE_TOLERANCE: f64 = 1e-12;
pub const MAX_NEWTON_ITERS: usize = 50;

/// Expansion floor and cone apertures, constrained by `1 < u v <= lambda^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub lambda: f64,
    pub u: f64,
    pub v: f64,
}

impl ConeParams {
    pub fn new(lambda: f64, u: f64, v: f64) -> Result<Self, MapError> {
        let c = ConeParams { lambda, u, v };
        if c.aperture_bound_holds() {
            Ok(c)
        } else {
            Err(MapError::InvalidConeParams)
        }
    }

    /// Diagnostic constructor; skips the aperture bound so arbitrary
    /// parameters can be tested against a map.
    pub fn raw(lambda: f64, u: f64, v: f64) -> Self {
        ConeParams { lambda, u, v }
    }

    pub fn aperture_bound_holds(&self) -> bool {
        self.lambda > 0.0
            && self.u > 0.0
            && self.v > 0.0
            && 1.0 < self.u * self.v
            && self.u * self.v <= self.lambda * self.lambda
    }

    /// Parameters after one simple composition.
    pub fn squared(&self) -> ConeParams {
        ConeParams {
            lambda: self.lambda * self.lambda,
            u: self.u,
            v: self.v,
        }
    }

    /// Class-level parameters `(lambda, u^1/2, v^1/2)`.
    pub fn relaxed(&self) -> ConeParams {
        ConeParams {
            lambda: self.lambda,
            u: self.u.sqrt(),
            v: self.v.sqrt(),
        }
    }
}

/// Report from a cone-condition check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeReport {
    pub ok: bool,
    /// `1 - max` of the two left-hand sides of (AL'2).
    pub margin: f64,
    /// Worst node and which inequality attains the max.
    pub worst: (f64, f64, String),
}

/// An affine-like map via its implicit representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImplicitMap {
    pub a: ScalarField2,
    pub b: ScalarField2,
    /// Parameter-velocity fields when the map belongs to a one-parameter
    /// family; `None` for parameter-independent maps.
    pub a_t: Option<ScalarField2>,
    pub b_t: Option<ScalarField2>,
    pub source: ChartId,
    pub target: ChartId,
    pub domain: Strip,
    pub image: Strip,
    pub cone: Option<ConeParams>,
}

impl ImplicitMap {
    /// Assemble a map from its fields, deriving the boundary strips and
    /// checking sign-definiteness of `A_x`, `B_y`.
    pub fn from_fields(
        a: ScalarField2,
        b: ScalarField2,
        source: ChartId,
        target: ChartId,
    ) -> Result<Self, MapError> {
        debug_assert_eq!(a.domain, b.domain);
        let rect = a.domain;
        let ax = a.deriv_x();
        let by = b.deriv_y();
        sign_definite(&ax, &rect)?;
        sign_definite(&by, &rect)?;

        // Domain strip: x0 = A(y0, x1) swept over the x1-endpoints.
        let g_lo = graph_of(&a, rect.x.lo, true);
        let g_hi = graph_of(&a, rect.x.hi, true);
        let domain = oriented_strip(Orientation::Vertical, source, g_lo, g_hi);
        // Image strip: y1 = B(y0, x1) swept over the y0-endpoints.
        let h_lo = graph_of(&b, rect.y.lo, false);
        let h_hi = graph_of(&b, rect.y.hi, false);
        let image = oriented_strip(Orientation::Horizontal, target, h_lo, h_hi);

        Ok(ImplicitMap {
            a,
            b,
            a_t: None,
            b_t: None,
            source,
            target,
            domain,
            image,
            cone: None,
        })
    }

    pub fn with_parameter_fields(
        mut self,
        a_t: Option<ScalarField2>,
        b_t: Option<ScalarField2>,
    ) -> Self {
        self.a_t = a_t;
        self.b_t = b_t;
        self
    }

    pub fn rect(&self) -> Rect {
        self.a.domain
    }

    /// Widths `(|P|, |Q|) = (max |A_x|, max |B_y|)` over the rectangle.
    pub fn widths(&self) -> (f64, f64) {
        let ax = self.a.deriv_x();
        let by = self.b.deriv_y();
        (ax.max_abs(), by.max_abs())
    }

    /// Cone condition (AL'2): `lambda |A_x| + u |A_y| <= 1` and
    /// `lambda |B_y| + v |B_x| <= 1` at every sampling node.
    pub fn check_cone(&self, cone: &ConeParams) -> ConeReport {
        let ax = self.a.deriv_x();
        let ay = self.a.deriv_y();
        let by = self.b.deriv_y();
        let bx = self.b.deriv_x();
        let rect = self.rect();
        let n = 64usize;
        let mut worst = (rect.y.lo, rect.x.lo, "stable".to_string());
        let mut max_lhs = f64::NEG_INFINITY;
        for i in 0..=n {
            let y = rect.y.lo + rect.y.len() * i as f64 / n as f64;
            for j in 0..=n {
                let x = rect.x.lo + rect.x.len() * j as f64 / n as f64;
                let lhs_s = cone.lambda * ax.eval(y, x).abs() + cone.u * ay.eval(y, x).abs();
                let lhs_u = cone.lambda * by.eval(y, x).abs() + cone.v * bx.eval(y, x).abs();
                if lhs_s > max_lhs {
                    max_lhs = lhs_s;
                    worst = (y, x, "stable".to_string());
                }
                if lhs_u > max_lhs {
                    max_lhs = lhs_u;
                    worst = (y, x, "unstable".to_string());
                }
            }
        }
        ConeReport {
            ok: max_lhs <= 1.0,
            margin: 1.0 - max_lhs,
            worst,
        }
    }

    /// Distortion `D(F)`: the sup over the rectangle of the six functions
    /// `d_x log|A_x|, d_y log|A_x|, A_yy, d_y log|B_y|, d_x log|B_y|, B_xx`.
    pub fn distortion(&self) -> Result<f64, MapError> {
        let ax = self.a.deriv_x();
        let ay = self.a.deriv_y();
        let by = self.b.deriv_y();
        let bx = self.b.deriv_x();
        let axx = ax.deriv_x();
        let axy = ax.deriv_y();
        let ayy = ay.deriv_y();
        let byy = by.deriv_y();
        let byx = by.deriv_x();
        let bxx = bx.deriv_x();
        let rect = self.rect();

        // Guard against vanishing coefficients before taking log-derivatives.
        let n = 64;
        let mut min_coeff = f64::INFINITY;
        for i in 0..=n {
            let y = rect.y.lo + rect.y.len() * i as f64 / n as f64;
            for j in 0..=n {
                let x = rect.x.lo + rect.x.len() * j as f64 / n as f64;
                min_coeff = min_coeff.min(ax.eval(y, x).abs()).min(by.eval(y, x).abs());
            }
        }
        if min_coeff < DERIVATIVE_FLOOR {
            return Err(MapError::VanishingDerivative(min_coeff));
        }
        Ok(max_abs_refined(
            |y, x| {
                let axv = ax.eval(y, x);
                let byv = by.eval(y, x);
                let lx = axx.eval(y, x) / axv;
                let ly = axy.eval(y, x) / axv;
                let my = byy.eval(y, x) / byv;
                let mx = byx.eval(y, x) / byv;
                lx.abs()
                    .max(ly.abs())
                    .max(ayy.eval(y, x).abs())
                    .max(my.abs())
                    .max(mx.abs())
                    .max(bxx.eval(y, x).abs())
            },
            &rect,
        ))
    }

    /// `det DF = A_x^{-1} B_y` at a point.
    pub fn det_df(&self, y: f64, x: f64) -> f64 {
        self.b.deriv_y().eval(y, x) / self.a.deriv_x().eval(y, x)
    }

    /// Jacobian of the forward map at `(x0, y0)`, by central differences of
    /// the forward evaluation (independent of the implicit-derivative
    /// formulas).
    pub fn forward_jacobian_fd(&self, x0: f64, y0: f64, h: f64) -> Result<[[f64; 2]; 2], MapError> {
        let (x1p, y1p) = self.forward(x0 + h, y0)?;
        let (x1m, y1m) = self.forward(x0 - h, y0)?;
        let (x2p, y2p) = self.forward(x0, y0 + h)?;
        let (x2m, y2m) = self.forward(x0, y0 - h)?;
        Ok([
            [(x1p - x1m) / (2.0 * h), (x2p - x2m) / (2.0 * h)],
            [(y1p - y1m) / (2.0 * h), (y2p - y2m) / (2.0 * h)],
        ])
    }

    /// Forward evaluation: given `(x0, y0)` in the domain strip, find
    /// `(x1, y1)` with Newton on `A(y0, x1) = x0`, polished to machine
    /// precision.
    pub fn forward(&self, x0: f64, y0: f64) -> Result<(f64, f64), MapError> {
        let ax = self.a.deriv_x();
        let mut x1 = self.rect().x.mid();
        let mut polish = false;
        for _ in 0..MAX_NEWTON_ITERS {
            let r = self.a.eval(y0, x1) - x0;
            if polish || r == 0.0 {
                return Ok((x1, self.b.eval(y0, x1)));
            }
            if r.abs() < SOLVE_TOLERANCE {
                polish = true;
            }
            let d = ax.eval(y0, x1);
            if d.abs() < DERIVATIVE_FLOOR {
                return Err(MapError::VanishingDerivative(d.abs()));
            }
            x1 -= r / d;
        }
        Err(MapError::ProjectionNotInvertible { y: y0, x: x0 })
    }

    /// Implicit representation of the inverse: swap `(A, B)` and reflect the
    /// coordinate roles. Widths swap accordingly.
    pub fn inverse_representation(&self) -> Result<ImplicitMap, MapError> {
        // For F^-1: x1' = y1, y0' = x0 swap roles; its fields on the
        // reflected rectangle are A~(y1, x0...) realized by transposing the
        // tensor data of A and B.
        let a_inv = transpose_field(&self.b);
        let b_inv = transpose_field(&self.a);
        ImplicitMap::from_fields(a_inv, b_inv, self.target, self.source)
    }

    /// Certify against a cone and remember the parameters.
    pub fn certified(mut self, cone: ConeParams) -> Option<ImplicitMap> {
        if self.check_cone(&cone).ok {
            self.cone = Some(cone);
            Some(self)
        } else {
            None
        }
    }
}

fn sign_definite(field: &ScalarField2, rect: &Rect) -> Result<(), MapError> {
    // A bilinear-free affine field attains its extrema at the corners.
    let n = if field.is_affine() { 1 } else { 32 };
    let mut sign = 0.0f64;
    for i in 0..=n {
        let y = rect.y.lo + rect.y.len() * i as f64 / n as f64;
        for j in 0..=n {
            let x = rect.x.lo + rect.x.len() * j as f64 / n as f64;
            let v = field.eval(y, x);
            if v.abs() < DERIVATIVE_FLOOR {
                return Err(MapError::VanishingDerivative(v.abs()));
            }
            if sign == 0.0 {
                sign = v.signum();
            } else if v.signum() != sign {
                return Err(MapError::OrientationInconsistent);
            }
        }
    }
    Ok(())
}

/// Extract the boundary graph of a field at a fixed second (or first) argument.
fn graph_of(field: &ScalarField2, fixed: f64, fix_x: bool) -> crate::cheb::Cheb1 {
    let (iv, deg) = if fix_x {
        (field.domain.y, field.ny.max(1))
    } else {
        (field.domain.x, field.nx.max(1))
    };
    crate::cheb::Cheb1::fit(iv, deg.min(16), |s| {
        if fix_x {
            field.eval(s, fixed)
        } else {
            field.eval(fixed, s)
        }
    })
}

fn oriented_strip(
    orientation: Orientation,
    chart: ChartId,
    g0: crate::cheb::Cheb1,
    g1: crate::cheb::Cheb1,
) -> Strip {
    // Order the graphs so lower < upper (the field is monotone in the swept
    // argument, so comparing at the midpoint suffices).
    let mid = g0.interval.mid();
    if g0.eval(mid) <= g1.eval(mid) {
        Strip::new(orientation, chart, g0, g1)
    } else {
        Strip::new(orientation, chart, g1, g0)
    }
}

fn transpose_field(f: &ScalarField2) -> ScalarField2 {
    let mut coeffs = vec![0.0; (f.nx + 1) * (f.ny + 1)];
    for i in 0..=f.ny {
        for j in 0..=f.nx {
            coeffs[j * (f.ny + 1) + i] = f.coeffs[i * (f.nx + 1) + j];
        }
    }
    ScalarField2 {
        domain: Rect::new(f.domain.x, f.domain.y),
        coeffs,
        ny: f.nx,
        nx: f.ny,
        closed_form: None,
    }
}

/// An explicit planar diffeomorphism with derivatives, used to import maps
/// into the implicit representation.
pub trait PlanarMap {
    fn eval(&self, x: f64, y: f64) -> (f64, f64);
    /// Jacobian `[[dX/dx, dX/dy], [dY/dx, dY/dy]]`.
    fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2];
}

/// Closure-backed planar map.
pub struct FnPlanar<F, J> {
    pub f: F,
    pub j: J,
}

impl<F: Fn(f64, f64) -> (f64, f64), J: Fn(f64, f64) -> [[f64; 2]; 2]> PlanarMap
    for FnPlanar<F, J>
{
    fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (self.f)(x, y)
    }
    fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        (self.j)(x, y)
    }
}

/// Import an explicit diffeomorphism restricted to a vertical strip as an
/// affine-like map onto the target chart rectangle (AL1 via per-node Newton).
pub fn from_diffeo(
    phi: &dyn PlanarMap,
    domain: &Strip,
    source_rect: Rect,
    target: ChartId,
    target_rect: Rect,
    degrees: (usize, usize),
) -> Result<ImplicitMap, MapError> {
    let rect = Rect::new(source_rect.y, target_rect.x);
    let ys = crate::cheb::lobatto_nodes(degrees.0);
    let xs = crate::cheb::lobatto_nodes(degrees.1);
    let mut a_vals = Vec::with_capacity(ys.len() * xs.len());
    let mut b_vals = Vec::with_capacity(ys.len() * xs.len());
    let mut x0_prev = domain.center_graph().eval(rect.y.mid());
    for &sy in &ys {
        let y0 = rect.y.from_unit(sy);
        let mut x0 = x0_prev;
        for (jx, &sx) in xs.iter().enumerate() {
            let x1 = rect.x.from_unit(sx);
            // Newton on the first component of phi: phi_x(x0, y0) = x1.
            let mut converged = false;
            for _ in 0..MAX_NEWTON_ITERS {
                let (fx, _) = phi.eval(x0, y0);
                let r = fx - x1;
                if r.abs() < SOLVE_TOLERANCE {
                    converged = true;
                    break;
                }
                let j = phi.jacobian(x0, y0);
                if j[0][0].abs() < DERIVATIVE_FLOOR {
                    return Err(MapError::ProjectionNotInvertible { y: y0, x: x1 });
                }
                x0 -= r / j[0][0];
            }
            if !converged || !x0.is_finite() {
                return Err(MapError::ProjectionNotInvertible { y: y0, x: x1 });
            }
            let (_, fy) = phi.eval(x0, y0);
            a_vals.push(x0);
            b_vals.push(fy);
            if jx == 0 {
                x0_prev = x0;
            }
        }
    }
    let mut a = ScalarField2::from_node_values(rect, degrees.0, degrees.1, &a_vals);
    let mut b = ScalarField2::from_node_values(rect, degrees.0, degrees.1, &b_vals);
    a.trim(1e-13);
    b.trim(1e-13);
    ImplicitMap::from_fields(a, b, domain.chart, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Interval;

    pub fn linear_map(lambda: f64) -> ImplicitMap {
        let a = ScalarField2::affine(Rect::UNIT, 0.0, 0.0, lambda);
        let b = ScalarField2::affine(Rect::UNIT, 0.0, lambda, 0.0);
        ImplicitMap::from_fields(a, b, ChartId(0), ChartId(1)).unwrap()
    }

    pub fn quad_map(lambda: f64, eps: f64) -> ImplicitMap {
        let a = ScalarField2::fit(Rect::UNIT, 4, 4, |y, x| lambda * x + eps * y * y);
        let b = ScalarField2::fit(Rect::UNIT, 4, 4, |y, x| lambda * y + eps * x * x);
        ImplicitMap::from_fields(a, b, ChartId(0), ChartId(1)).unwrap()
    }

    #[test]
    fn widths_of_linear_map() {
        let f = linear_map(0.3);
        let (p, q) = f.widths();
        assert!((p - 0.3).abs() < 1e-12);
        assert!((q - 0.3).abs() < 1e-12);
    }

    #[test]
    fn widths_of_quadratic_perturbation() {
        // A_x is identically 0.3: the grid max is exact.
        let f = quad_map(0.3, 0.01);
        let (p, q) = f.widths();
        assert!((p - 0.3).abs() < 1e-12);
        assert!((q - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cone_check_examples() {
        let f = linear_map(0.3);
        let r = f.check_cone(&ConeParams::raw(2.0, 1.0, 1.0));
        assert!(r.ok);
        assert!((r.margin - 0.4).abs() < 1e-12);

        let r = f.check_cone(&ConeParams::raw(4.0, 1.0, 1.0));
        assert!(!r.ok, "4 * 0.3 = 1.2 > 1");

        let degenerate = linear_map(1.0);
        assert!(!degenerate.check_cone(&ConeParams::raw(2.0, 1.0, 1.0)).ok);
    }

    #[test]
    fn cone_params_aperture_bound() {
        assert!(ConeParams::new(2.0, 1.1, 1.1).is_ok());
        assert!(ConeParams::new(2.0, 1.0, 1.0).is_err());
        assert!(ConeParams::new(1.0, 1.5, 1.5).is_err());
    }

    #[test]
    fn distortion_examples() {
        assert!(linear_map(0.3).distortion().unwrap() < 1e-13);
        // A_yy = 0.02, B_xx = 0.02, log-derivatives vanish.
        let d = quad_map(0.3, 0.01).distortion().unwrap();
        assert!((d - 0.02).abs() < 1e-10, "distortion {d}");
    }

    #[test]
    fn determinant_formula() {
        // The finite-difference Jacobian of the forward map has determinant
        // A_x^-1 B_y.
        let f = quad_map(0.3, 0.01);
        for &(x0, y0) in &[(0.05, -0.4), (-0.1, 0.6)] {
            let j = f.forward_jacobian_fd(x0, y0, 1e-6).unwrap();
            let det_fd = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let (x1, _) = f.forward(x0, y0).unwrap();
            let det = f.det_df(y0, x1);
            assert!(
                (det_fd - det).abs() / det.abs() < 1e-8,
                "FD det {det_fd} vs formula {det}"
            );
        }
    }

    #[test]
    fn from_diffeo_linear_hyperbolic() {
        // phi(x, y) = (x / 0.3, 0.3 y) restricted to |x| <= 0.3.
        let phi = FnPlanar {
            f: |x: f64, y: f64| (x / 0.3, 0.3 * y),
            j: |_x, _y| [[1.0 / 0.3, 0.0], [0.0, 0.3]],
        };
        let dom = Strip::slab(
            Orientation::Vertical,
            ChartId(0),
            Interval::UNIT,
            Interval::new(-0.3, 0.3),
        );
        let f = from_diffeo(&phi, &dom, Rect::UNIT, ChartId(1), Rect::UNIT, (8, 8)).unwrap();
        for &(y, x) in &[(0.5, -0.5), (-0.2, 0.9)] {
            assert!((f.a.eval(y, x) - 0.3 * x).abs() < 1e-12);
            assert!((f.b.eval(y, x) - 0.3 * y).abs() < 1e-12);
        }
    }

    #[test]
    fn from_diffeo_shear_forward_residual() {
        // Linear map composed with a small shear (x, y) -> (x + 0.01 y^2, y).
        let phi = FnPlanar {
            f: |x: f64, y: f64| (x / 0.3 + 0.01 * (0.3 * y) * (0.3 * y) / 0.3, 0.3 * y),
            j: |_x, y: f64| [[1.0 / 0.3, 0.006 * y * 0.3 / 0.3], [0.0, 0.3]],
        };
        let dom = Strip::slab(
            Orientation::Vertical,
            ChartId(0),
            Interval::UNIT,
            Interval::new(-0.4, 0.4),
        );
        let f = from_diffeo(&phi, &dom, Rect::UNIT, ChartId(1), Rect::UNIT, (12, 12)).unwrap();
        // Forward residual |phi(A(y0,x1), y0) - (x1, B(y0,x1))| at sample points.
        for &(y0, x1) in &[(0.4, -0.6), (-0.9, 0.2), (0.0, 0.99)] {
            let a = f.a.eval(y0, x1);
            let b = f.b.eval(y0, x1);
            let (px, py) = phi.eval(a, y0);
            assert!((px - x1).abs() < 1e-10, "residual {}", (px - x1).abs());
            assert!((py - b).abs() < 1e-10);
        }
    }

    #[test]
    fn from_diffeo_rejects_folded_strip() {
        // Non-monotone x-image: x -> x^2 folds the strip.
        let phi = FnPlanar {
            f: |x: f64, y: f64| (x * x, 0.3 * y),
            j: |x: f64, _y| [[2.0 * x, 0.0], [0.0, 0.3]],
        };
        let dom = Strip::slab(
            Orientation::Vertical,
            ChartId(0),
            Interval::UNIT,
            Interval::new(-0.5, 0.5),
        );
        assert!(from_diffeo(&phi, &dom, Rect::UNIT, ChartId(1), Rect::UNIT, (8, 8)).is_err());
    }

    #[test]
    fn time_symmetry_swaps_widths() {
        let f = quad_map(0.3, 0.01);
        let inv = f.inverse_representation().unwrap();
        let (p, q) = f.widths();
        let (pi, qi) = inv.widths();
        assert!((pi - q).abs() < 1e-11 && (qi - p).abs() < 1e-11);
    }

    #[test]
    fn strips_derived_from_fields() {
        let f = linear_map(0.3);
        let b = f.domain.bounds();
        assert!((b.lo + 0.3).abs() < 1e-12 && (b.hi - 0.3).abs() < 1e-12);
        assert!(f.domain.is_ordered() && f.image.is_ordered());
    }
}


#[cfg(test)]
mod error_tests {
    use super::*;
    use crate::field::ScalarField2;
    use crate::geom::Rect;

    #[test]
    fn vanishing_coefficient_is_detected() {
        // A_x crosses zero across the rectangle.
        let a = ScalarField2::fit(Rect::UNIT, 2, 2, |_, x| 0.5 * x * x);
        let b = ScalarField2::affine(Rect::UNIT, 0.0, 0.3, 0.0);
        assert!(matches!(
            ImplicitMap::from_fields(a, b, ChartId(0), ChartId(0)),
            Err(MapError::VanishingDerivative(_)) | Err(MapError::OrientationInconsistent)
        ));
    }
}
