//! Smooth bivariate fields as tensor Chebyshev interpolants.
//!
//! A `ScalarField2` carries the implicit data of the whole crate: the fields
//! `A`, `B` of an affine-like map, the tangency functional slices, and fold
//! components. Arguments are ordered `(y, x)` matching the chart rectangle.

use crate::cheb::{self, Cheb1};
use crate::error::FieldError;
use crate::geom::{Interval, Rect};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub type ClosedForm = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Tensor-Chebyshev interpolant of a smooth function on a rectangle.
///
/// Serializes as `{domain, degrees, coeffs}` with row-major coefficients;
/// the decimal encoding round-trips every f64 bit-exactly.
#[derive(Clone, Serialize, Deserialize)]
#[serde(from = "FieldRepr", into = "FieldRepr")]
pub struct ScalarField2 {
    pub domain: Rect,
    /// Row-major coefficients, `(degree_y + 1) x (degree_x + 1)`;
    /// entry `(i, j)` multiplies `T_i(yhat) T_j(xhat)`.
    pub coeffs: Vec<f64>,
    pub ny: usize,
    pub nx: usize,
    pub closed_form: Option<ClosedForm>,
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    domain: Rect,
    degrees: (usize, usize),
    coeffs: Vec<f64>,
}

impl From<ScalarField2> for FieldRepr {
    fn from(f: ScalarField2) -> Self {
        FieldRepr {
            domain: f.domain,
            degrees: (f.ny, f.nx),
            coeffs: f.coeffs,
        }
    }
}

impl From<FieldRepr> for ScalarField2 {
    fn from(r: FieldRepr) -> Self {
        ScalarField2 {
            domain: r.domain,
            coeffs: r.coeffs,
            ny: r.degrees.0,
            nx: r.degrees.1,
            closed_form: None,
        }
    }
}

impl std::fmt::Debug for ScalarField2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField2")
            .field("domain", &self.domain)
            .field("degrees", &(self.ny, self.nx))
            .finish()
    }
}

impl PartialEq for ScalarField2 {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.ny == other.ny
            && self.nx == other.nx
            && self.coeffs == other.coeffs
    }
}

/// Result of a grid fit, with the relative magnitude of the trailing
/// coefficient rows/columns as a resolution diagnostic.
#[derive(Debug, Clone)]
pub struct FieldFit {
    pub field: ScalarField2,
    /// Max trailing-coefficient magnitude relative to the largest coefficient.
    pub tail: f64,
    /// `Some(DegreeTooLow)` when the tail exceeds the fit tolerance.
    pub warning: Option<FieldError>,
}

pub const FIT_TOLERANCE: f64 = 1e-10;

impl ScalarField2 {
    pub fn constant(domain: Rect, value: f64) -> Self {
        ScalarField2 {
            domain,
            coeffs: vec![value],
            ny: 0,
            nx: 0,
            closed_form: None,
        }
    }

    /// `c0 + cy * y + cx * x` on the rectangle.
    pub fn affine(domain: Rect, c0: f64, cy: f64, cx: f64) -> Self {
        let mut f = ScalarField2 {
            domain,
            coeffs: vec![
                c0 + cy * domain.y.mid() + cx * domain.x.mid(),
                cx * 0.5 * domain.x.len(),
                cy * 0.5 * domain.y.len(),
                0.0,
            ],
            ny: 1,
            nx: 1,
            closed_form: None,
        };
        f.trim(1e-15);
        f
    }

    /// Interpolate `f` on the `(degree_y + 1) x (degree_x + 1)` Lobatto grid.
    pub fn fit(domain: Rect, degree_y: usize, degree_x: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let ys = cheb::lobatto_nodes(degree_y);
        let xs = cheb::lobatto_nodes(degree_x);
        let mut values = Vec::with_capacity(ys.len() * xs.len());
        for &sy in &ys {
            let y = domain.y.from_unit(sy);
            for &sx in &xs {
                values.push(f(y, domain.x.from_unit(sx)));
            }
        }
        Self::from_node_values(domain, degree_y, degree_x, &values)
    }

    /// Fit and remember the closed form for later refreshes.
    pub fn fit_closed(
        domain: Rect,
        degree_y: usize,
        degree_x: usize,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let mut field = Self::fit(domain, degree_y, degree_x, &f);
        field.closed_form = Some(Arc::new(f));
        field
    }

    /// Build from raw samples on the tensor Lobatto grid (ascending nodes,
    /// row-major over `y` then `x`).
    pub fn from_node_values(domain: Rect, degree_y: usize, degree_x: usize, values: &[f64]) -> Self {
        let ny = degree_y;
        let nx = degree_x;
        assert_eq!(values.len(), (ny + 1) * (nx + 1), "sample grid mismatch");
        // Transform along x for each y-row, then along y for each column.
        let mut stage = vec![0.0; (ny + 1) * (nx + 1)];
        for i in 0..=ny {
            let row = &values[i * (nx + 1)..(i + 1) * (nx + 1)];
            let c = cheb::transform(row);
            stage[i * (nx + 1)..(i + 1) * (nx + 1)].copy_from_slice(&c);
        }
        let mut coeffs = vec![0.0; (ny + 1) * (nx + 1)];
        let mut col = vec![0.0; ny + 1];
        for j in 0..=nx {
            for (i, c) in col.iter_mut().enumerate() {
                *c = stage[i * (nx + 1) + j];
            }
            let c = cheb::transform(&col);
            for i in 0..=ny {
                coeffs[i * (nx + 1) + j] = c[i];
            }
        }
        ScalarField2 {
            domain,
            coeffs,
            ny,
            nx,
            closed_form: None,
        }
    }

    /// Fit from samples with a resolution diagnostic (`DegreeTooLow` reported,
    /// not fatal).
    pub fn fit_field(domain: Rect, degree_y: usize, degree_x: usize, values: &[f64]) -> FieldFit {
        let field = Self::from_node_values(domain, degree_y, degree_x, values);
        let tail = field.tail_fraction();
        let warning = (degree_y >= 2 && degree_x >= 2 && tail > FIT_TOLERANCE).then_some(
            FieldError::DegreeTooLow {
                degrees: (degree_y, degree_x),
                tail,
            },
        );
        FieldFit {
            field,
            tail,
            warning,
        }
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    fn coeff(&self, i: usize, j: usize) -> f64 {
        self.coeffs[i * (self.nx + 1) + j]
    }

    pub fn eval(&self, y: f64, x: f64) -> f64 {
        let sx = self.domain.x.to_unit(x);
        let sy = self.domain.y.to_unit(y);
        // Contract x in every row, then Clenshaw over the y-coefficients.
        let mut g = Vec::with_capacity(self.ny + 1);
        for i in 0..=self.ny {
            g.push(cheb::clenshaw(
                &self.coeffs[i * (self.nx + 1)..(i + 1) * (self.nx + 1)],
                sx,
            ));
        }
        cheb::clenshaw(&g, sy)
    }

    /// Spectral partial derivative along `x`.
    pub fn deriv_x(&self) -> ScalarField2 {
        let scale = 2.0 / self.domain.x.len();
        let nx_out = self.nx.saturating_sub(1);
        let mut coeffs = vec![0.0; (self.ny + 1) * (nx_out + 1)];
        for i in 0..=self.ny {
            let row = &self.coeffs[i * (self.nx + 1)..(i + 1) * (self.nx + 1)];
            let d = cheb::differentiate(row);
            for (j, v) in d.iter().enumerate() {
                coeffs[i * (nx_out + 1) + j] = v * scale;
            }
        }
        ScalarField2 {
            domain: self.domain,
            coeffs,
            ny: self.ny,
            nx: nx_out,
            closed_form: None,
        }
    }

    /// Spectral partial derivative along `y`.
    pub fn deriv_y(&self) -> ScalarField2 {
        let scale = 2.0 / self.domain.y.len();
        let ny_out = self.ny.saturating_sub(1);
        let mut coeffs = vec![0.0; (ny_out + 1) * (self.nx + 1)];
        let mut col = vec![0.0; self.ny + 1];
        for j in 0..=self.nx {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.coeff(i, j);
            }
            let d = cheb::differentiate(&col);
            for (i, v) in d.iter().enumerate() {
                coeffs[i * (self.nx + 1) + j] = v * scale;
            }
        }
        ScalarField2 {
            domain: self.domain,
            coeffs,
            ny: ny_out,
            nx: self.nx,
            closed_form: None,
        }
    }

    /// Drop trailing coefficient rows/columns below `tol` (relative).
    pub fn trim(&mut self, tol: f64) {
        let scale = self
            .coeffs
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
            .max(1e-300);
        let mut ny_keep = 0;
        let mut nx_keep = 0;
        for i in 0..=self.ny {
            for j in 0..=self.nx {
                if self.coeff(i, j).abs() > tol * scale {
                    ny_keep = ny_keep.max(i);
                    nx_keep = nx_keep.max(j);
                }
            }
        }
        if ny_keep == self.ny && nx_keep == self.nx {
            return;
        }
        let mut coeffs = vec![0.0; (ny_keep + 1) * (nx_keep + 1)];
        for i in 0..=ny_keep {
            for j in 0..=nx_keep {
                coeffs[i * (nx_keep + 1) + j] = self.coeff(i, j);
            }
        }
        self.coeffs = coeffs;
        self.ny = ny_keep;
        self.nx = nx_keep;
    }

    /// Relative magnitude of the highest coefficient row and column.
    pub fn tail_fraction(&self) -> f64 {
        let scale = self
            .coeffs
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
            .max(1e-300);
        let mut tail = 0.0f64;
        for j in 0..=self.nx {
            tail = tail.max(self.coeff(self.ny, j).abs());
        }
        for i in 0..=self.ny {
            tail = tail.max(self.coeff(i, self.nx).abs());
        }
        if self.ny == 0 && self.nx == 0 {
            0.0
        } else {
            tail / scale
        }
    }

    /// True when the interpolant is affine (no bilinear or higher terms).
    pub fn is_affine(&self) -> bool {
        if self.ny > 1 || self.nx > 1 {
            return false;
        }
        if self.ny == 1 && self.nx == 1 {
            self.coeff(1, 1) == 0.0
        } else {
            true
        }
    }

    /// Maximum of `|f|` over a sampling grid refined until stable.
    pub fn max_abs(&self) -> f64 {
        max_abs_refined(|y, x| self.eval(y, x), &self.domain)
    }

    /// Refit from the remembered closed form at new degrees.
    pub fn refresh(&self, degree_y: usize, degree_x: usize) -> Option<ScalarField2> {
        let f = self.closed_form.clone()?;
        let mut out = Self::fit(self.domain, degree_y, degree_x, |y, x| f(y, x));
        out.closed_form = Some(f);
        Some(out)
    }

    /// Max deviation from the remembered closed form at the collocation
    /// nodes (zero for a fresh fit; nonzero after coefficient surgery).
    pub fn closed_form_residual(&self) -> Option<f64> {
        let f = self.closed_form.as_ref()?;
        let ys = cheb::lobatto_nodes(self.ny);
        let xs = cheb::lobatto_nodes(self.nx);
        let mut worst = 0.0f64;
        for &sy in &ys {
            let y = self.domain.y.from_unit(sy);
            for &sx in &xs {
                let x = self.domain.x.from_unit(sx);
                worst = worst.max((self.eval(y, x) - f(y, x)).abs());
            }
        }
        Some(worst)
    }
}

/// Value and partial derivatives of a field at a point, including the
/// parameter direction (zero for parameter-independent fields).
#[derive(Debug, Clone, Copy, Default)]
pub struct Jet2 {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
    pub xt: f64,
    pub yt: f64,
}

/// Precomputed spectral derivative fields of one scalar field, for repeated
/// jet evaluation.
pub struct FieldJet {
    v: ScalarField2,
    dx: ScalarField2,
    dy: ScalarField2,
    dxx: ScalarField2,
    dxy: ScalarField2,
    dyy: ScalarField2,
    dt: Option<(ScalarField2, ScalarField2, ScalarField2)>,
}

impl FieldJet {
    pub fn new(f: &ScalarField2, ft: Option<&ScalarField2>) -> Self {
        let dx = f.deriv_x();
        let dy = f.deriv_y();
        FieldJet {
            dxx: dx.deriv_x(),
            dxy: dx.deriv_y(),
            dyy: dy.deriv_y(),
            dx,
            dy,
            dt: ft.map(|g| (g.clone(), g.deriv_x(), g.deriv_y())),
            v: f.clone(),
        }
    }

    pub fn at(&self, y: f64, x: f64) -> Jet2 {
        let (t, xt, yt) = match &self.dt {
            Some((g, gx, gy)) => (g.eval(y, x), gx.eval(y, x), gy.eval(y, x)),
            None => (0.0, 0.0, 0.0),
        };
        Jet2 {
            v: self.v.eval(y, x),
            x: self.dx.eval(y, x),
            y: self.dy.eval(y, x),
            t,
            xx: self.dxx.eval(y, x),
            xy: self.dxy.eval(y, x),
            yy: self.dyy.eval(y, x),
            xt,
            yt,
        }
    }

    pub fn value(&self, y: f64, x: f64) -> f64 {
        self.v.eval(y, x)
    }

    pub fn dx_at(&self, y: f64, x: f64) -> f64 {
        self.dx.eval(y, x)
    }

    pub fn dy_at(&self, y: f64, x: f64) -> f64 {
        self.dy.eval(y, x)
    }

    /// `(value, d/dx, d2/dx2)` at a point.
    pub fn x_jet(&self, y: f64, x: f64) -> (f64, f64, f64) {
        (self.v.eval(y, x), self.dx.eval(y, x), self.dxx.eval(y, x))
    }

    /// `(value, d/dy, d2/dy2)` at a point.
    pub fn y_jet(&self, y: f64, x: f64) -> (f64, f64, f64) {
        (self.v.eval(y, x), self.dy.eval(y, x), self.dyy.eval(y, x))
    }
}

/// Refined-grid sup-norm estimator: starts on a 65x65 grid and doubles until
/// the change is below `1e-10` relative.
pub fn max_abs_refined(f: impl Fn(f64, f64) -> f64, rect: &Rect) -> f64 {
    let mut n = 64usize;
    let mut prev = grid_max(&f, rect, n);
    loop {
        n *= 2;
        let cur = grid_max(&f, rect, n);
        let scale = cur.abs().max(1e-300);
        if (cur - prev).abs() / scale < 1e-10 || n >= 512 {
            return cur;
        }
        prev = cur;
    }
}

fn grid_max(f: &impl Fn(f64, f64) -> f64, rect: &Rect, n: usize) -> f64 {
    let mut m = 0.0f64;
    for i in 0..=n {
        let y = rect.y.lo + rect.y.len() * i as f64 / n as f64;
        for j in 0..=n {
            let x = rect.x.lo + rect.x.len() * j as f64 / n as f64;
            m = m.max(f(y, x).abs());
        }
    }
    m
}

/// Univariate boundary graph helper: fit `f` over an interval.
pub fn fit_graph(interval: Interval, degree: usize, f: impl Fn(f64) -> f64) -> Cheb1 {
    Cheb1::fit(interval, degree, f)
}
