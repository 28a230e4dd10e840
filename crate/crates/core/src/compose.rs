//! Simple composition of affine-like maps with the full first/second-order
//! derivative calculus, and the verification harness that checks every
//! derivative formula against finite differences of the refit fields.

use crate::error::MapError;
use crate::field::ScalarField2;
use crate::geom::Rect;
use crate::map::{ImplicitMap, DELTA_FLOOR, MAX_NEWTON_ITERS, SOLVE_TOLERANCE};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Solve the elimination system
/// `x1 = A'(y1, x2)`, `y1 = B(y0, x1)` at one node.
pub fn eliminate(
    f: &ImplicitMap,
    f2: &ImplicitMap,
    y0: f64,
    x2: f64,
    seed: (f64, f64),
) -> Result<(f64, f64, f64), MapError> {
    let a2y = f2.a.deriv_y();
    let bx = f.b.deriv_x();
    let (mut x1, mut y1) = seed;
    // One extra step after the tolerance is met polishes the solution to
    // machine precision, which the finite-difference harness relies on.
    let mut polish = false;
    for _ in 0..MAX_NEWTON_ITERS {
        let r1 = x1 - f2.a.eval(y1, x2);
        let r2 = y1 - f.b.eval(y0, x1);
        let day = a2y.eval(y1, x2);
        let dbx = bx.eval(y0, x1);
        let delta = 1.0 - day * dbx;
        if delta.abs() < DELTA_FLOOR {
            return Err(MapError::DeltaDegenerate(delta.abs()));
        }
        if polish {
            return Ok((x1, y1, delta));
        }
        if r1.abs() < SOLVE_TOLERANCE && r2.abs() < SOLVE_TOLERANCE {
            polish = true;
        }
        // J = [[1, -A'_y], [-B_x, 1]], solve J d = -r.
        let dx1 = -(r1 + day * r2) / delta;
        let dy1 = -(r2 + dbx * r1) / delta;
        x1 += dx1;
        y1 += dy1;
    }
    Err(MapError::ProjectionNotInvertible { y: y0, x: x2 })
}

fn fit_degrees(f: &ImplicitMap, f2: &ImplicitMap) -> (usize, usize) {
    let affine = f.a.is_affine() && f.b.is_affine() && f2.a.is_affine() && f2.b.is_affine();
    if affine {
        (1, 1)
    } else {
        (16, 16)
    }
}

/// Simple composition `F'' = F' o F`.
///
/// The returned map carries refit fields `A''`, `B''` on the rectangle
/// `I_0^u x I_2^s`; its domain strip is `P & F^-1(P')` and its image strip is
/// `Q' & F'(Q)` by construction of the implicit representation. Parameter
/// fields are propagated when the inputs carry them.
pub fn simple_compose(f: &ImplicitMap, f2: &ImplicitMap) -> Result<ImplicitMap, MapError> {
    if f.target != f2.source {
        return Err(MapError::ChartMismatch(f.target.0, f2.source.0));
    }
    let rect = Rect::new(f.rect().y, f2.rect().x);
    let (dy, dx) = fit_degrees(f, f2);
    let ys = crate::cheb::lobatto_nodes(dy);
    let xs = crate::cheb::lobatto_nodes(dx);

    let with_t = f.a_t.is_some() || f2.a_t.is_some();
    let zero = ScalarField2::constant(f.rect(), 0.0);
    let f_at = f.a_t.as_ref().unwrap_or(&zero);
    let f_bt = f.b_t.as_ref().unwrap_or(&zero);
    let zero2 = ScalarField2::constant(f2.rect(), 0.0);
    let f2_at = f2.a_t.as_ref().unwrap_or(&zero2);
    let f2_bt = f2.b_t.as_ref().unwrap_or(&zero2);
    let fax = f.a.deriv_x();
    let f2by = f2.b.deriv_y();
    let f2ay = f2.a.deriv_y();
    let fbx = f.b.deriv_x();

    let mut a_vals = Vec::with_capacity(ys.len() * xs.len());
    let mut b_vals = Vec::with_capacity(ys.len() * xs.len());
    let mut at_vals = Vec::with_capacity(ys.len() * xs.len());
    let mut bt_vals = Vec::with_capacity(ys.len() * xs.len());

    let x1_interval = f.rect().x;
    let y1_interval = f2.rect().y;
    let mut row_seed = (x1_interval.mid(), y1_interval.mid());
    for &sy in &ys {
        let y0 = rect.y.from_unit(sy);
        let mut seed = row_seed;
        for (jx, &sx) in xs.iter().enumerate() {
            let x2 = rect.x.from_unit(sx);
            let (x1, y1, delta) = eliminate(f, f2, y0, x2, seed)?;
            seed = (x1, y1);
            if jx == 0 {
                row_seed = (x1, y1);
            }
            let overshoot = 0.5 * x1_interval.len();
            if x1 < x1_interval.lo - overshoot || x1 > x1_interval.hi + overshoot {
                return Err(MapError::EmptyIntersection);
            }
            a_vals.push(f.a.eval(y0, x1));
            b_vals.push(f2.b.eval(y1, x2));
            if with_t {
                let at = f_at.eval(y0, x1);
                let bt = f_bt.eval(y0, x1);
                let a2t = f2_at.eval(y1, x2);
                let b2t = f2_bt.eval(y1, x2);
                let xt = (a2t + f2ay.eval(y1, x2) * bt) / delta;
                let yt = (bt + a2t * fbx.eval(y0, x1)) / delta;
                at_vals.push(at + fax.eval(y0, x1) * xt);
                bt_vals.push(b2t + f2by.eval(y1, x2) * yt);
            }
        }
    }

    let mut a = ScalarField2::from_node_values(rect, dy, dx, &a_vals);
    let mut b = ScalarField2::from_node_values(rect, dy, dx, &b_vals);
    a.trim(1e-13);
    b.trim(1e-13);
    let mut out = ImplicitMap::from_fields(a, b, f.source, f2.target)?;
    if with_t {
        let mut at = ScalarField2::from_node_values(rect, dy, dx, &at_vals);
        let mut bt = ScalarField2::from_node_values(rect, dy, dx, &bt_vals);
        at.trim(1e-13);
        bt.trim(1e-13);
        out = out.with_parameter_fields(Some(at), Some(bt));
    }
    Ok(out)
}

/// All partial derivatives of one input map at a point, including the
/// parameter direction (zero when the map is parameter-independent).
#[derive(Debug, Clone, Copy, Default)]
struct Partials {
    x: f64,
    y: f64,
    t: f64,
    xx: f64,
    xy: f64,
    yy: f64,
    xt: f64,
    yt: f64,
}

fn partials(field: &ScalarField2, field_t: Option<&ScalarField2>, y: f64, x: f64) -> Partials {
    let dx = field.deriv_x();
    let dy = field.deriv_y();
    let (t, xt, yt) = match field_t {
        Some(ft) => (ft.eval(y, x), ft.deriv_x().eval(y, x), ft.deriv_y().eval(y, x)),
        None => (0.0, 0.0, 0.0),
    };
    Partials {
        x: dx.eval(y, x),
        y: dy.eval(y, x),
        t,
        xx: dx.deriv_x().eval(y, x),
        xy: dx.deriv_y().eval(y, x),
        yy: dy.deriv_y().eval(y, x),
        xt,
        yt,
    }
}

/// Values of every simple-composition derivative formula at one node.
pub fn simple_formulas(
    f: &ImplicitMap,
    f2: &ImplicitMap,
    y0: f64,
    x2: f64,
) -> Result<BTreeMap<&'static str, f64>, MapError> {
    let seed = (f.rect().x.mid(), f2.rect().y.mid());
    let (x1, y1, delta) = eliminate(f, f2, y0, x2, seed)?;
    let pa = partials(&f.a, f.a_t.as_ref(), y0, x1);
    let pb = partials(&f.b, f.b_t.as_ref(), y0, x1);
    let pa2 = partials(&f2.a, f2.a_t.as_ref(), y1, x2);
    let pb2 = partials(&f2.b, f2.b_t.as_ref(), y1, x2);
    let di = 1.0 / delta;

    let xx = pa2.x * di;
    let xy = pa2.y * pb.y * di;
    let xt = (pa2.t + pa2.y * pb.t) * di;
    let yx = pa2.x * pb.x * di;
    let yy = pb.y * di;
    let yt = (pb.t + pa2.t * pb.x) * di;

    let dlt_x = -(pb.xx * xx * pa2.y + pb.x * pa2.xy + pb.x * pa2.yy * yx);
    let dlt_y = -(pa2.yy * yy * pb.x + pa2.y * pb.xy + pa2.y * pb.xx * xy);
    let dlt_t = -(pb.xt * pa2.y + pb.xx * xt * pa2.y + pb.x * pa2.yt + pb.x * pa2.yy * yt);

    // Logarithmic derivatives of the input coefficient fields.
    let la_x = pa.xx / pa.x;
    let la_y = pa.xy / pa.x;
    let la_t = pa.xt / pa.x;
    let la2_x = pa2.xx / pa2.x;
    let la2_y = pa2.xy / pa2.x;
    let la2_t = pa2.xt / pa2.x;
    let lb_y = pb.yy / pb.y;
    let lb_x = pb.xy / pb.y;
    let lb_t = pb.yt / pb.y;
    let lb2_y = pb2.yy / pb2.y;
    let lb2_x = pb2.xy / pb2.y;
    let lb2_t = pb2.yt / pb2.y;

    let x_yy = pb.y * di * (pa2.yy * yy + pa2.y * lb_y + pa2.y * xy * lb_x - pa2.y * dlt_y * di);
    let y_xx = pa2.x * di * (pb.xx * xx + pb.x * la2_x + pb.x * yx * la2_y - pb.x * dlt_x * di);
    let x_yt = pb.y * di * (pa2.yy * yt + pa2.yt + pa2.y * lb_t + pa2.y * xt * lb_x - pa2.y * dlt_t * di);
    let y_xt = pa2.x * di * (pb.xx * xt + pb.xt + pb.x * la2_t + pb.x * yt * la2_y - pb.x * dlt_t * di);

    let mut m: BTreeMap<&'static str, f64> = BTreeMap::new();
    m.insert("X", x1);
    m.insert("Y", y1);
    m.insert("X_x", xx);
    m.insert("X_y", xy);
    m.insert("X_t", xt);
    m.insert("Y_x", yx);
    m.insert("Y_y", yy);
    m.insert("Y_t", yt);
    m.insert("A''_x", pa.x * pa2.x * di);
    m.insert("B''_y", pb2.y * pb.y * di);
    m.insert("A''_y", pa.y + pa.x * xy);
    m.insert("B''_x", pb2.x + pb2.y * yx);
    m.insert("A''_t", pa.t + pa.x * xt);
    m.insert("B''_t", pb2.t + pb2.y * yt);
    m.insert("dx_log_A''_x", la2_x + yx * la2_y + xx * la_x - dlt_x * di);
    m.insert("dy_log_A''_x", la_y + xy * la_x + yy * la2_y - dlt_y * di);
    m.insert("dt_log_A''_x", la_t + la2_t + xt * la_x + yt * la2_y - dlt_t * di);
    m.insert("dy_log_B''_y", lb_y + xy * lb_x + yy * lb2_y - dlt_y * di);
    m.insert("dx_log_B''_y", lb2_x + yx * lb2_y + xx * lb_x - dlt_x * di);
    m.insert("dt_log_B''_y", lb2_t + lb_t + yt * lb2_y + xt * lb_x - dlt_t * di);
    m.insert("X_yy", x_yy);
    m.insert("Y_xx", y_xx);
    m.insert("X_yt", x_yt);
    m.insert("Y_xt", y_xt);
    m.insert(
        "A''_yy",
        pa.yy + 2.0 * pa.xy * xy + pa.xx * xy * xy + pa.x * x_yy,
    );
    m.insert(
        "B''_xx",
        pb2.xx + 2.0 * pb2.xy * yx + pb2.yy * yx * yx + pb2.y * y_xx,
    );
    m.insert(
        "A''_yt",
        pa.yt + xt * pa.xy + xy * pa.xt + xt * xy * pa.xx + pa.x * x_yt,
    );
    m.insert(
        "B''_xt",
        pb2.xt + yt * pb2.xy + yx * pb2.yt + yt * yx * pb2.yy + pb2.y * y_xt,
    );
    Ok(m)
}

/// One formula's verification outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormulaCheck {
    pub name: String,
    pub max_rel: f64,
    pub ok: bool,
}

/// Discrepancy report for a family of derivative formulas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalculusReport {
    pub checks: Vec<FormulaCheck>,
    pub threshold: f64,
}

impl CalculusReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn flagged(&self) -> Vec<&FormulaCheck> {
        self.checks.iter().filter(|c| !c.ok).collect()
    }

    pub fn worst(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| m.max(c.max_rel))
    }
}

pub const CALCULUS_THRESHOLD: f64 = 1e-5;

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
    fn report(self, threshold: f64, corrupt: Option<&str>) -> CalculusReport {
        // Quantities far below the chart scale are checked in absolute terms:
        // the floor makes "relative error" meaningful for formulas whose true
        // value is numerically zero.
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
                    ok: max_rel < threshold,
                }
            })
            .collect();
        CalculusReport { checks, threshold }
    }
}

/// Check every formula of the simple-composition calculus against finite
/// differences of the refit composite (and re-solved eliminations), over an
/// interior verification grid.
///
/// `build` produces the two input maps at a given parameter value, so the
/// `t`-direction formulas can be differenced across recompositions.
/// `corrupt` marks one formula as failed, for fault-injection tests.
pub fn verify_composition_calculus(
    build: &dyn Fn(f64) -> (ImplicitMap, ImplicitMap),
    t: f64,
    grid_n: usize,
    corrupt: Option<&str>,
) -> Result<CalculusReport, MapError> {
    let (f, f2) = build(t);
    let composed = simple_compose(&f, &f2)?;
    let ht = 2e-4;
    let (fm, f2m) = build(t - ht);
    let (fp, f2p) = build(t + ht);
    let comp_m = simple_compose(&fm, &f2m)?;
    let comp_p = simple_compose(&fp, &f2p)?;

    let rect = composed.rect();
    let ca = &composed.a;
    let cb = &composed.b;
    let cax = ca.deriv_x();
    let cby = cb.deriv_y();

    let mut acc = Accum::new();
    // Keep the grid interior so finite differences stay inside the rectangle.
    let h1 = 1e-6 * rect.x.len().max(rect.y.len());
    let h2 = 1e-3 * rect.x.len().max(rect.y.len());
    for i in 1..grid_n {
        let y0 = rect.y.lo + rect.y.len() * i as f64 / grid_n as f64;
        for j in 1..grid_n {
            let x2 = rect.x.lo + rect.x.len() * j as f64 / grid_n as f64;
            let an = simple_formulas(&f, &f2, y0, x2)?;
            let seed = (f.rect().x.mid(), f2.rect().y.mid());

            // Elimination maps: first and second differences of re-solves.
            let solve = |y: f64, x: f64| -> Result<(f64, f64), MapError> {
                let (x1, y1, _) = eliminate(&f, &f2, y, x, seed)?;
                Ok((x1, y1))
            };
            let (x1_xp, y1_xp) = solve(y0, x2 + h2)?;
            let (x1_xm, y1_xm) = solve(y0, x2 - h2)?;
            let (x1_yp, y1_yp) = solve(y0 + h2, x2)?;
            let (x1_ym, y1_ym) = solve(y0 - h2, x2)?;
            let (x1_0, y1_0) = solve(y0, x2)?;
            acc.push("X_x", an["X_x"], (x1_xp - x1_xm) / (2.0 * h2));
            acc.push("X_y", an["X_y"], (x1_yp - x1_ym) / (2.0 * h2));
            acc.push("Y_x", an["Y_x"], (y1_xp - y1_xm) / (2.0 * h2));
            acc.push("Y_y", an["Y_y"], (y1_yp - y1_ym) / (2.0 * h2));
            acc.push("X_yy", an["X_yy"], (x1_yp - 2.0 * x1_0 + x1_ym) / (h2 * h2));
            acc.push("Y_xx", an["Y_xx"], (y1_xp - 2.0 * y1_0 + y1_xm) / (h2 * h2));

            // Parameter direction of the elimination.
            let solve_at = |pair: &(ImplicitMap, ImplicitMap)| -> Result<(f64, f64), MapError> {
                let (x1, y1, _) = eliminate(&pair.0, &pair.1, y0, x2, seed)?;
                Ok((x1, y1))
            };
            let (x1_tp, y1_tp) = solve_at(&(fp.clone(), f2p.clone()))?;
            let (x1_tm, y1_tm) = solve_at(&(fm.clone(), f2m.clone()))?;
            acc.push("X_t", an["X_t"], (x1_tp - x1_tm) / (2.0 * ht));
            acc.push("Y_t", an["Y_t"], (y1_tp - y1_tm) / (2.0 * ht));
            let solve_shift = |pair: &(ImplicitMap, ImplicitMap), dy: f64| -> Result<(f64, f64), MapError> {
                let (x1, y1, _) = eliminate(&pair.0, &pair.1, y0 + dy, x2, seed)?;
                Ok((x1, y1))
            };
            let (x1_tp_yp, _) = solve_shift(&(fp.clone(), f2p.clone()), h2)?;
            let (x1_tp_ym, _) = solve_shift(&(fp.clone(), f2p.clone()), -h2)?;
            let (x1_tm_yp, _) = solve_shift(&(fm.clone(), f2m.clone()), h2)?;
            let (x1_tm_ym, _) = solve_shift(&(fm.clone(), f2m.clone()), -h2)?;
            acc.push(
                "X_yt",
                an["X_yt"],
                ((x1_tp_yp - x1_tp_ym) - (x1_tm_yp - x1_tm_ym)) / (4.0 * h2 * ht),
            );
            let (_, y1_tp_xp, _) = eliminate(&fp, &f2p, y0, x2 + h2, seed)?;
            let (_, y1_tp_xm, _) = eliminate(&fp, &f2p, y0, x2 - h2, seed)?;
            let (_, y1_tm_xp, _) = eliminate(&fm, &f2m, y0, x2 + h2, seed)?;
            let (_, y1_tm_xm, _) = eliminate(&fm, &f2m, y0, x2 - h2, seed)?;
            acc.push(
                "Y_xt",
                an["Y_xt"],
                ((y1_tp_xp - y1_tp_xm) - (y1_tm_xp - y1_tm_xm)) / (4.0 * h2 * ht),
            );

            // First-order coefficients: finite differences of the refit values.
            acc.push("A''_x", an["A''_x"], (ca.eval(y0, x2 + h1) - ca.eval(y0, x2 - h1)) / (2.0 * h1));
            acc.push("A''_y", an["A''_y"], (ca.eval(y0 + h1, x2) - ca.eval(y0 - h1, x2)) / (2.0 * h1));
            acc.push("B''_y", an["B''_y"], (cb.eval(y0 + h1, x2) - cb.eval(y0 - h1, x2)) / (2.0 * h1));
            acc.push("B''_x", an["B''_x"], (cb.eval(y0, x2 + h1) - cb.eval(y0, x2 - h1)) / (2.0 * h1));
            acc.push("A''_t", an["A''_t"], (comp_p.a.eval(y0, x2) - comp_m.a.eval(y0, x2)) / (2.0 * ht));
            acc.push("B''_t", an["B''_t"], (comp_p.b.eval(y0, x2) - comp_m.b.eval(y0, x2)) / (2.0 * ht));

            // Log-derivatives: difference the log of the spectral coefficient
            // fields of the refit composite.
            let lax = |y: f64, x: f64| cax.eval(y, x).abs().ln();
            let lby = |y: f64, x: f64| cby.eval(y, x).abs().ln();
            acc.push("dx_log_A''_x", an["dx_log_A''_x"], (lax(y0, x2 + h2) - lax(y0, x2 - h2)) / (2.0 * h2));
            acc.push("dy_log_A''_x", an["dy_log_A''_x"], (lax(y0 + h2, x2) - lax(y0 - h2, x2)) / (2.0 * h2));
            acc.push("dy_log_B''_y", an["dy_log_B''_y"], (lby(y0 + h2, x2) - lby(y0 - h2, x2)) / (2.0 * h2));
            acc.push("dx_log_B''_y", an["dx_log_B''_y"], (lby(y0, x2 + h2) - lby(y0, x2 - h2)) / (2.0 * h2));
            acc.push(
                "dt_log_A''_x",
                an["dt_log_A''_x"],
                (comp_p.a.deriv_x().eval(y0, x2).abs().ln() - comp_m.a.deriv_x().eval(y0, x2).abs().ln())
                    / (2.0 * ht),
            );
            acc.push(
                "dt_log_B''_y",
                an["dt_log_B''_y"],
                (comp_p.b.deriv_y().eval(y0, x2).abs().ln() - comp_m.b.deriv_y().eval(y0, x2).abs().ln())
                    / (2.0 * ht),
            );

            // Second-order coefficients.
            acc.push(
                "A''_yy",
                an["A''_yy"],
                (ca.eval(y0 + h2, x2) - 2.0 * ca.eval(y0, x2) + ca.eval(y0 - h2, x2)) / (h2 * h2),
            );
            acc.push(
                "B''_xx",
                an["B''_xx"],
                (cb.eval(y0, x2 + h2) - 2.0 * cb.eval(y0, x2) + cb.eval(y0, x2 - h2)) / (h2 * h2),
            );
            acc.push(
                "A''_yt",
                an["A''_yt"],
                (comp_p.a.deriv_y().eval(y0, x2) - comp_m.a.deriv_y().eval(y0, x2)) / (2.0 * ht),
            );
            acc.push(
                "B''_xt",
                an["B''_xt"],
                (comp_p.b.deriv_x().eval(y0, x2) - comp_m.b.deriv_x().eval(y0, x2)) / (2.0 * ht),
            );
        }
    }
    Ok(acc.report(CALCULUS_THRESHOLD, corrupt))
}


#[cfg(test)]
mod error_tests {
    use super::*;
    use crate::field::ScalarField2;
    use crate::geom::{ChartId, Interval, Rect};

    #[test]
    fn degenerate_elimination_is_rejected() {
        // A'_y B_x = 1 at the center makes the elimination singular.
        let a = ScalarField2::affine(Rect::UNIT, 0.0, 1.0, 0.3);
        let b = ScalarField2::affine(Rect::UNIT, 0.0, 0.3, 1.0);
        let f = ImplicitMap::from_fields(a, b, ChartId(0), ChartId(0)).unwrap();
        match simple_compose(&f, &f) {
            Err(MapError::DeltaDegenerate(_)) | Err(MapError::ProjectionNotInvertible { .. }) => {}
            other => panic!("expected a singular elimination, got {other:?}"),
        }
    }

    #[test]
    fn chart_mismatch_is_rejected() {
        let a = ScalarField2::affine(Rect::UNIT, 0.0, 0.0, 0.3);
        let b = ScalarField2::affine(Rect::UNIT, 0.0, 0.3, 0.0);
        let f = ImplicitMap::from_fields(a.clone(), b.clone(), ChartId(0), ChartId(1)).unwrap();
        let g = ImplicitMap::from_fields(a, b, ChartId(0), ChartId(1)).unwrap();
        assert!(matches!(
            simple_compose(&f, &g),
            Err(MapError::ChartMismatch(1, 0))
        ));
    }

    #[test]
    fn disjoint_strips_yield_empty_intersection() {
        // F's image sits far outside F''s domain strip: the elimination
        // solution escapes the chart by more than the overshoot margin.
        let rect1 = Rect::new(Interval::UNIT, Interval::new(-0.05, 0.05));
        let a1 = ScalarField2::affine(rect1, 0.0, 0.0, 0.3);
        let b1 = ScalarField2::affine(rect1, 0.0, 0.3, 0.0);
        let f = ImplicitMap::from_fields(a1, b1, ChartId(0), ChartId(1)).unwrap();
        let rect2 = Rect::new(Interval::UNIT, Interval::UNIT);
        let a2 = ScalarField2::affine(rect2, 5.0, 0.0, 0.05);
        let b2 = ScalarField2::affine(rect2, 0.0, 0.3, 0.0);
        let g = ImplicitMap::from_fields(a2, b2, ChartId(1), ChartId(0)).unwrap();
        assert!(matches!(
            simple_compose(&f, &g),
            Err(MapError::EmptyIntersection) | Err(MapError::ProjectionNotInvertible { .. })
        ));
    }
}
