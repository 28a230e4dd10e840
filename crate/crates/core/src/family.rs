//! A concrete one-parameter family: an affine two-symbol horseshoe with
//! saddles on distinct orbits and a heteroclinic quadratic tangency that
//! unfolds through a model fold.
//!
//! Charts are `[0,1] x [0,1]`. The map expands `x` and contracts `y`;
//! branch `a -> a'` has domain strip `{x in [m, m + lambda_s]}` and image
//! slab `{y in [c, c + lambda_s]}`, with the offsets pinned so the saddles
//! sit at the chart corners and their local invariant manifolds are the
//! coordinate axes. Keeping every cylinder on the nonnegative side of the
//! axes makes the displacement functional bounded by `t`, which is what
//! forbids parabolic composition at the root scale. The fold carries points
//! of the tongue in chart `a_u` to chart `a_s` in `n0` excursion steps.

use crate::error::{FamilyError, FoldError, MapError};
use crate::fold::{make_model_fold, FoldConfig, FoldMap};
use crate::geom::{ChartId, Interval, Rect};
use crate::map::{from_diffeo, ConeParams, FnPlanar, ImplicitMap};
use crate::strip::{Orientation, Strip};
use serde::{Deserialize, Serialize};

/// Configuration of the model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    /// Contraction rate; the expansion rate is its reciprocal.
    pub lambda_s: f64,
    /// Tongue scale: the root parameter interval is `[eps0, 2 eps0]`.
    pub eps0: f64,
    /// Quadratic perturbation amplitude per branch (0 keeps the closed-form
    /// oracles exact).
    pub nonlinearity: f64,
    pub fold: FoldConfig,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            lambda_s: 0.284,
            eps0: 1e-4,
            nonlinearity: 0.0,
            fold: FoldConfig::default(),
        }
    }
}

/// Lenticular tongue regions at a parameter value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tongues {
    /// Unstable-side lens in chart `a_u`: `{0 <= y_u <= t - w^2}` in fold
    /// coordinates, sampled as a polyline boundary.
    pub l_u: Vec<(f64, f64)>,
    /// Stable-side lens in chart `a_s` (the fold image of `l_u`).
    pub l_s: Vec<(f64, f64)>,
    /// Max transverse thickness of `l_u`.
    pub thickness: f64,
}

/// The model family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFamily {
    pub config: FamilyConfig,
    /// Alphabet: chart 0 contains `p_u`, chart 1 contains `p_s`.
    pub charts: Vec<ChartId>,
    pub chart_rect: Rect,
    pub a_u: ChartId,
    pub a_s: ChartId,
    /// Closed-form transverse dimensions of the unperturbed horseshoe.
    pub d_s0: f64,
    pub d_u0: f64,
    /// Whether the configured dimensions satisfy the bifurcation-regime
    /// dimension condition.
    pub h4_ok: bool,
    pub warnings: Vec<String>,
}

/// `(d_s0 + d_u0)^2 + max^2 < d_s0 + d_u0 + max`.
pub fn check_h4(d_s0: f64, d_u0: f64) -> bool {
    let s = d_s0 + d_u0;
    let m = d_s0.max(d_u0);
    s * s + m * m < s + m
}

const LAMBDA_CONE: f64 = 3.0;
const CONE_APERTURE: f64 = 1.1;

impl ModelFamily {
    pub fn alphabet(&self) -> [ChartId; 2] {
        [ChartId(0), ChartId(1)]
    }

    /// All transitions are allowed outside the tongues.
    pub fn transitions(&self) -> Vec<(ChartId, ChartId)> {
        let mut v = Vec::new();
        for &a in &self.alphabet() {
            for &b in &self.alphabet() {
                v.push((a, b));
            }
        }
        v
    }

    pub fn cone(&self) -> ConeParams {
        ConeParams::raw(LAMBDA_CONE, CONE_APERTURE, CONE_APERTURE)
    }

    /// Source-strip origin of branch `a -> a'` (in `x`).
    pub fn strip_origin(&self, a: ChartId, a2: ChartId) -> f64 {
        if a == a2 {
            0.0
        } else {
            1.0 - self.config.lambda_s
        }
    }

    /// Image-slab origin of branch `a -> a'` (in `y`).
    pub fn slab_origin(&self, a: ChartId, a2: ChartId) -> f64 {
        if a == a2 {
            0.0
        } else {
            1.0 - self.config.lambda_s
        }
    }

    /// The underlying diffeomorphism branch `a -> a'` applied to a point of
    /// its domain strip.
    pub fn branch_forward(&self, a: ChartId, a2: ChartId, x: f64, y: f64) -> (f64, f64) {
        let l = self.config.lambda_s;
        let eps = self.config.nonlinearity;
        let m = self.strip_origin(a, a2);
        let c = self.slab_origin(a, a2);
        ((x - m) / l + eps * y * y, l * y + c + eps * (x - m) * (x - m))
    }

    /// Which branch's domain strip contains the point, if any.
    pub fn locate_branch(&self, a: ChartId, x: f64) -> Option<ChartId> {
        let l = self.config.lambda_s;
        for &a2 in &self.alphabet() {
            let m = self.strip_origin(a, a2);
            if x >= m && x <= m + l {
                return Some(a2);
            }
        }
        None
    }

    /// Transition map of branch `a -> a'` as an affine-like map.
    pub fn transition_map(&self, a: ChartId, a2: ChartId) -> Result<ImplicitMap, FamilyError> {
        if !self.transitions().contains(&(a, a2)) {
            return Err(FamilyError::NotATransition(a.0, a2.0));
        }
        let l = self.config.lambda_s;
        let eps = self.config.nonlinearity;
        let m = self.strip_origin(a, a2);
        let c = self.slab_origin(a, a2);
        let phi = FnPlanar {
            f: move |x: f64, y: f64| {
                (
                    (x - m) / l + eps * y * y,
                    l * y + c + eps * (x - m) * (x - m),
                )
            },
            j: move |x: f64, y: f64| [[1.0 / l, 2.0 * eps * y], [2.0 * eps * (x - m), l]],
        };
        let dom = Strip::slab(
            Orientation::Vertical,
            a,
            self.chart_rect.y,
            Interval::new(m, m + l),
        );
        let degrees = if eps == 0.0 { (1, 1) } else { (8, 8) };
        from_diffeo(&phi, &dom, self.chart_rect, a2, self.chart_rect, degrees)
            .map_err(|e| FamilyError::InvalidConfig(format!("branch ({a},{a2}): {e}")))
    }

    /// Composite transition map along an itinerary of chart vertices.
    pub fn itinerary_map(&self, vertices: &[ChartId]) -> Result<ImplicitMap, MapError> {
        assert!(vertices.len() >= 2);
        let mut map = self
            .transition_map(vertices[0], vertices[1])
            .expect("itinerary transition");
        for win in vertices[1..].windows(2) {
            let next = self.transition_map(win[0], win[1]).expect("transition");
            map = crate::compose::simple_compose(&map, &next)?;
        }
        Ok(map)
    }

    /// The fold at parameter `t`.
    pub fn fold_at(&self, t: f64) -> Result<FoldMap, FoldError> {
        make_model_fold(&self.config.fold, self.a_u, self.a_s, self.chart_rect, t)
    }

    /// Tongue regions at `t > 0`.
    pub fn tongues(&self, t: f64) -> Result<Tongues, FoldError> {
        if t <= 0.0 {
            return Err(FoldError::NotUnfolded(t));
        }
        let fold = self.fold_at(t)?;
        let n = 128;
        let wmax = t.sqrt();
        let mut l_u = Vec::with_capacity(2 * n + 2);
        let mut l_s = Vec::with_capacity(2 * n + 2);
        // Boundary of L_u: the W^u piece {y_u = 0} and the pulled-back
        // parabola {y_u = t - w^2}, both over w in [-sqrt t, sqrt t].
        for i in 0..=n {
            let w = -wmax + 2.0 * wmax * i as f64 / n as f64;
            let y_u = 0.0;
            let x_u = fold.x_u.value(w, y_u);
            l_u.push((x_u, y_u));
        }
        for i in 0..=n {
            let w = wmax - 2.0 * wmax * i as f64 / n as f64;
            let y_u = t - w * w;
            let x_u = fold.x_u.value(w, y_u);
            l_u.push((x_u, y_u));
        }
        for &(x_u, y_u) in &l_u {
            let (x_s, y_s) = fold.forward(x_u, y_u);
            l_s.push((x_s, y_s));
        }
        Ok(Tongues {
            l_u,
            l_s,
            thickness: t,
        })
    }

    /// Deepest pure cylinders containing the tongues for all `t` in the root
    /// interval `[eps0, 2 eps0]`:
    /// `(P_s, n_s)` in chart `a_s` and `(Q_u, n_u)` in chart `a_u`.
    pub fn special_rectangles(&self) -> SpecialRectangles {
        let l = self.config.lambda_s;
        let reach = 2.0 * self.config.eps0;
        // Stable-side lens spans x in [0, reach]; the all-a_s cylinder of
        // depth n has x-extent lambda_s^n around 0.
        let mut n_s = 0usize;
        while l.powi(n_s as i32 + 1) >= reach {
            n_s += 1;
        }
        let mut n_u = 0usize;
        while l.powi(n_u as i32 + 1) >= reach {
            n_u += 1;
        }
        SpecialRectangles {
            n_s,
            n_u,
            p_s_width: l.powi(n_s as i32),
            q_u_width: l.powi(n_u as i32),
        }
    }

    /// Simulate the orbit of a point under the horseshoe-with-fold dynamics
    /// for up to `steps` iterations; records the chart itinerary. Returns
    /// `None` at the step the orbit escapes.
    pub fn orbit_itinerary(
        &self,
        t: f64,
        mut chart: ChartId,
        mut x: f64,
        mut y: f64,
        steps: usize,
    ) -> (Vec<ChartId>, bool) {
        let mut itinerary = vec![chart];
        for _ in 0..steps {
            if let Some(next) = self.locate_branch(chart, x) {
                let (nx, ny) = self.branch_forward(chart, next, x, y);
                if !self.chart_rect.x.contains(nx) || !self.chart_rect.y.contains(ny) {
                    return (itinerary, false);
                }
                chart = next;
                x = nx;
                y = ny;
                itinerary.push(chart);
            } else if chart == self.a_u && t > 0.0 {
                // Possibly inside the tongue: excursion through the fold.
                let fold = match self.fold_at(t) {
                    Ok(f) => f,
                    Err(_) => return (itinerary, false),
                };
                let w = fold.x_u.solve_w(x, y);
                if y >= 0.0 && y <= t - w * w {
                    let (nx, ny) = fold.forward(x, y);
                    chart = self.a_s;
                    x = nx;
                    y = ny;
                    itinerary.push(chart);
                } else {
                    return (itinerary, false);
                }
            } else {
                return (itinerary, false);
            }
        }
        (itinerary, true)
    }
}

/// Depths and widths of the special cylinders around the tongues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialRectangles {
    pub n_s: usize,
    pub n_u: usize,
    pub p_s_width: f64,
    pub q_u_width: f64,
}

/// Build the model family, checking the dimension hypothesis.
pub fn make_family(config: FamilyConfig) -> Result<ModelFamily, FamilyError> {
    let l = config.lambda_s;
    if !(0.0 < l && l < 0.5) {
        return Err(FamilyError::InvalidConfig(format!(
            "lambda_s = {l} must lie in (0, 1/2) for disjoint strips"
        )));
    }
    if !(config.eps0 > 0.0 && config.eps0 < 0.1) {
        return Err(FamilyError::InvalidConfig(format!(
            "eps0 = {} out of range",
            config.eps0
        )));
    }
    let d0 = (2.0f64).ln() / (1.0 / l).ln();
    let h4_ok = check_h4(d0, d0);
    let mut warnings = Vec::new();
    if !h4_ok {
        warnings.push(format!(
            "H4 violated: d_s0 = d_u0 = {d0:.5} outside the admissible region"
        ));
    }
    Ok(ModelFamily {
        config,
        charts: vec![ChartId(0), ChartId(1)],
        chart_rect: Rect::new(Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)),
        a_u: ChartId(0),
        a_s: ChartId(1),
        d_s0: d0,
        d_u0: d0,
        h4_ok,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(lambda: f64) -> ModelFamily {
        make_family(FamilyConfig {
            lambda_s: lambda,
            ..FamilyConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn closed_form_dimensions() {
        let f = fam(1.0 / 3.0);
        assert!((f.d_s0 - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((f.d_s0 - 0.63093).abs() < 1e-5);

        let f = fam(0.284);
        assert!((f.d_s0 - 0.55056).abs() < 1e-4);
        assert!(f.h4_ok && f.warnings.is_empty());

        // d0 ~ 0.697 each: H4 fails, warned but not fatal.
        let f = fam(0.37);
        assert!((f.d_s0 - 0.697).abs() < 0.01);
        assert!(!f.h4_ok && !f.warnings.is_empty());
    }

    #[test]
    fn transition_maps_are_affine_with_expected_widths() {
        let f = fam(0.284);
        for (a, a2) in f.transitions() {
            let m = f.transition_map(a, a2).unwrap();
            let (p, q) = m.widths();
            assert!((p - 0.284).abs() < 1e-10, "width {p}");
            assert!((q - 0.284).abs() < 1e-10);
            assert!(m.distortion().unwrap() < 1e-9);
            assert!(m.check_cone(&f.cone()).ok);
            // A = lambda_s x1 + offset, B = lambda_s y0 + offset.
            let off_a = f.strip_origin(a, a2);
            let off_b = f.slab_origin(a, a2);
            for &(y, x) in &[(0.4, 0.3), (0.9, 0.8)] {
                assert!((m.a.eval(y, x) - (0.284 * x + off_a)).abs() < 1e-10);
                assert!((m.b.eval(y, x) - (0.284 * y + off_b)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn itinerary_widths_are_powers() {
        let f = fam(0.284);
        let ids = [ChartId(0), ChartId(1), ChartId(1), ChartId(0), ChartId(0)];
        let m = f.itinerary_map(&ids).unwrap();
        let (p, q) = m.widths();
        let expect = 0.284f64.powi(4);
        assert!((p - expect).abs() < 1e-12);
        assert!((q - expect).abs() < 1e-12);
        assert!(m.distortion().unwrap() < 1e-9);
    }

    #[test]
    fn perturbed_branches_have_bounded_distortion() {
        let f = make_family(FamilyConfig {
            lambda_s: 0.284,
            nonlinearity: 0.01,
            ..FamilyConfig::default()
        })
        .unwrap();
        let m = f.transition_map(ChartId(0), ChartId(1)).unwrap();
        let d = m.distortion().unwrap();
        assert!(d > 0.0 && d < 0.5, "distortion {d}");
        assert!(m.check_cone(&f.cone()).ok);
    }

    #[test]
    fn tongues_unfold_only_for_positive_t() {
        let f = fam(0.284);
        assert!(f.tongues(0.0).is_err());
        let t = f.config.eps0;
        let tg = f.tongues(t).unwrap();
        assert!(tg.thickness <= 2.0 * f.config.eps0);
        // Fold image round-trip: l_s is the forward image of l_u.
        let fold = f.fold_at(t).unwrap();
        let mut hd = 0.0f64;
        for (i, &(xu, yu)) in tg.l_u.iter().enumerate() {
            let (xs, ys) = fold.forward(xu, yu);
            let (bx, by) = tg.l_s[i];
            hd = hd.max(((xs - bx).powi(2) + (ys - by).powi(2)).sqrt());
        }
        assert!(hd < 1e-8, "Hausdorff distance {hd}");
    }

    #[test]
    fn special_rectangles_bracket_the_tongue_scale() {
        let f = fam(0.284);
        let s = f.special_rectangles();
        // Geometric definition: deepest cylinder width >= 2 eps0, child below.
        let reach = 2.0 * f.config.eps0;
        assert!(s.p_s_width >= reach && s.p_s_width * 0.284 < reach);
        let ratio = s.p_s_width / f.config.eps0;
        assert!((2.0..=2.0 / 0.284).contains(&ratio), "ratio {ratio}");
        assert_eq!(s.n_s, s.n_u);
    }

    #[test]
    fn saddles_on_distinct_orbits_with_axis_manifolds() {
        let f = fam(0.284);
        // p_u = (0,0) in chart 0 is fixed under branch 0->0 and its
        // unstable manifold {y=0} is invariant; symmetric for p_s.
        let (x, y) = f.branch_forward(ChartId(0), ChartId(0), 0.0, 0.0);
        assert_eq!((x, y), (0.0, 0.0));
        let (_, y1) = f.branch_forward(ChartId(0), ChartId(0), 0.2, 0.0);
        assert_eq!(y1, 0.0);
        let (x1, _) = f.branch_forward(ChartId(1), ChartId(1), 0.0, 0.5);
        assert_eq!(x1, 0.0);
    }

    #[test]
    fn orbit_coding_matches_cylinder_labels() {
        let f = fam(0.284);
        // A point in the depth-3 cylinder with itinerary 0,1,1,0 stays and
        // codes correctly.
        let l = f.config.lambda_s;
        // Build the cylinder x-interval by pulling back strip centers.
        let path = [ChartId(0), ChartId(1), ChartId(1), ChartId(0)];
        let mut center = 0.5;
        for k in (0..path.len() - 1).rev() {
            center = f.strip_origin(path[k], path[k + 1]) + l * center;
        }
        let (it, alive) = f.orbit_itinerary(0.0, ChartId(0), center, 0.0, 3);
        assert!(alive);
        assert_eq!(it, path);
    }
}

#[cfg(test)]
mod error_tests {
    use super::*;

    #[test]
    fn unknown_transition_is_rejected() {
        let f = make_family(FamilyConfig::default()).unwrap();
        assert!(matches!(
            f.transition_map(ChartId(0), ChartId(7)),
            Err(FamilyError::NotATransition(0, 7))
        ));
        assert!(make_family(FamilyConfig {
            lambda_s: 0.6,
            ..FamilyConfig::default()
        })
        .is_err());
    }
}
