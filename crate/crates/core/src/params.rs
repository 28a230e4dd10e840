//! Parameter-interval scale tree and the exponent calculus of the
//! bicritical-counting estimates.

use crate::error::ParamError;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A node of the parameter scale tree. Level-`k` intervals have length
/// `eps_k` with `eps_{k+1} = eps_k^{1+tau}`; each is divided into
/// `floor(eps_k^-tau)` candidates and the remainder is discarded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamInterval {
    pub level: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub eps: f64,
    pub candidate_index: usize,
    #[serde(skip)]
    pub parent: Option<Arc<ParamInterval>>,
}

impl ParamInterval {
    pub fn root(eps0: f64) -> Arc<ParamInterval> {
        Arc::new(ParamInterval {
            level: 0,
            t_lo: eps0,
            t_hi: 2.0 * eps0,
            eps: eps0,
            candidate_index: 0,
            parent: None,
        })
    }

    pub fn len(&self) -> f64 {
        self.eps
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.t_lo + self.t_hi)
    }

    pub fn contains(&self, other: &ParamInterval) -> bool {
        self.t_lo - 1e-15 <= other.t_lo && other.t_hi <= self.t_hi + 1e-15
    }

    /// Chain from this interval up to the root, inclusive.
    pub fn ancestors(self: &Arc<Self>) -> Vec<Arc<ParamInterval>> {
        let mut v = vec![self.clone()];
        let mut cur = self.clone();
        while let Some(p) = cur.parent.clone() {
            v.push(p.clone());
            cur = p;
        }
        v
    }
}

/// Number of candidates an interval of length `eps` is divided into.
pub fn candidate_count(eps: f64, tau: f64) -> usize {
    eps.powf(-tau).floor() as usize
}

/// Subdivide an interval into its candidates at the next scale.
pub fn candidates(node: &Arc<ParamInterval>, tau: f64) -> Result<Vec<Arc<ParamInterval>>, ParamError> {
    let eps_next = node.eps.powf(1.0 + tau);
    let count = candidate_count(node.eps, tau);
    if count < 2 {
        return Err(ParamError::TooFewCandidates(count));
    }
    Ok((0..count)
        .map(|i| {
            Arc::new(ParamInterval {
                level: node.level + 1,
                t_lo: node.t_lo + i as f64 * eps_next,
                t_hi: node.t_lo + (i + 1) as f64 * eps_next,
                eps: eps_next,
                candidate_index: i,
                parent: Some(node.clone()),
            })
        })
        .collect())
}

/// Length discarded when subdividing (the remainder past the last candidate).
pub fn discarded_length(eps: f64, tau: f64) -> f64 {
    let eps_next = eps.powf(1.0 + tau);
    eps - candidate_count(eps, tau) as f64 * eps_next
}

/// Scale table `eps_0, ..., eps_depth`.
pub fn scale_table(eps0: f64, tau: f64, depth: usize) -> Vec<f64> {
    let mut v = vec![eps0];
    for _ in 0..depth {
        let last = *v.last().unwrap();
        v.push(last.powf(1.0 + tau));
    }
    v
}

/// Materialize the full tree breadth-first to `depth`, level by level.
///
/// The node count grows like `eps^(-tau (1+tau)^k)` per level, so deep
/// trees are astronomically large; `max_nodes` caps the materialization
/// (the per-level discarded remainder is `discarded_length` of the level
/// scale, identical across a level). Use `materialize_path` for deep
/// scales.
pub fn interval_tree(
    eps0: f64,
    tau: f64,
    depth: usize,
    max_nodes: usize,
) -> Result<Vec<Vec<Arc<ParamInterval>>>, ParamError> {
    let mut levels = vec![vec![ParamInterval::root(eps0)]];
    let mut total = 1usize;
    for _ in 0..depth {
        let last = levels.last().unwrap();
        let mut next = Vec::new();
        for node in last {
            let kids = candidates(node, tau)?;
            total += kids.len();
            if total > max_nodes {
                return Ok(levels);
            }
            next.extend(kids);
        }
        levels.push(next);
    }
    Ok(levels)
}

/// Materialize one root-to-leaf path given candidate indices per level.
pub fn materialize_path(
    eps0: f64,
    tau: f64,
    indices: &[usize],
) -> Result<Vec<Arc<ParamInterval>>, ParamError> {
    let mut path = vec![ParamInterval::root(eps0)];
    for &idx in indices {
        let node = path.last().unwrap().clone();
        let kids = candidates(&node, tau)?;
        let pick = kids
            .get(idx)
            .ok_or(ParamError::TooFewCandidates(kids.len()))?;
        path.push(pick.clone());
    }
    Ok(path)
}

/// Leading-order exponents of the bicritical counting machinery, derived
/// from the transverse dimensions of the initial horseshoe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub d_s0: f64,
    pub d_u0: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub rho0_prime: f64,
    pub rho1_prime: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub beta_max: f64,
    /// Exponent of the phase-transition width: `sigma0 / (rho0 - rho1)`.
    pub x_cr_exponent: f64,
    /// Exponent of the budget-exhaustion width: `(sigma0 + sigma1) / rho1`.
    pub x_bar_exponent: f64,
    /// Upper bound for the transverse dimension of the exceptional set.
    pub exceptional_bound: f64,
}

/// `(d_s0 + d_u0)^2 + max^2 < d_s0 + d_u0 + max`.
pub fn check_h4(d_s0: f64, d_u0: f64) -> bool {
    crate::family::check_h4(d_s0, d_u0)
}

/// Leading-order exponent set (all `o(1)` corrections zeroed).
///
/// Convention: `d_s0 >= d_u0`; callers with the opposite ordering must swap.
pub fn exponents(d_s0: f64, d_u0: f64) -> Result<ExponentSet, ParamError> {
    if d_s0 < d_u0 {
        return Err(ParamError::ConventionViolated(d_s0, d_u0));
    }
    let sum = d_s0 + d_u0;
    let rho0 = d_s0;
    let rho1 = d_s0 * (2.0 * d_s0 + d_u0 - 1.0) / sum;
    let sigma0 = 1.0 - d_s0;
    let sigma1 = d_s0 - d_u0;
    let beta_max = (1.0 - d_u0) * sum / (d_s0 * (2.0 * d_s0 + d_u0 - 1.0));
    let exceptional_bound = (sum - 1.0) * 2.0 * d_s0 / (2.0 * d_u0 + d_s0);
    let set = ExponentSet {
        d_s0,
        d_u0,
        rho0,
        rho1,
        rho0_prime: d_u0 / d_s0 * rho0,
        rho1_prime: d_u0 / d_s0 * rho1,
        sigma0,
        sigma1,
        beta_max,
        x_cr_exponent: sigma0 / (rho0 - rho1),
        x_bar_exponent: (sigma0 + sigma1) / rho1,
        exceptional_bound,
    };
    debug_assert!((set.x_cr_exponent - sum / d_s0).abs() < 1e-9);
    debug_assert!((set.x_bar_exponent - beta_max).abs() < 1e-9);
    Ok(set)
}

/// The bicritical budget `B = max(B_0, B_1)` for a width threshold `x` and
/// a pair of enclosing parameter intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub b0: f64,
    pub b1: f64,
    pub b: f64,
    /// Which branch attains the max (`true` when `x <= x_cr`, the `B_0`
    /// regime).
    pub b0_regime: bool,
    pub x_cr: f64,
    pub x_bar: f64,
}

pub fn bicritical_budget(
    x: f64,
    i_alpha: f64,
    i_omega: f64,
    eps0: f64,
    p_u_width: f64,
    e: &ExponentSet,
) -> Budget {
    let xs = x / (eps0 * p_u_width);
    let ra = i_alpha / eps0;
    let ro = i_omega / eps0;
    let b0 = xs.powf(-e.rho0) * ra.powf(e.sigma0 + e.sigma1) * ro.powf(e.sigma0);
    let b1 = xs.powf(-e.rho1) * ra.powf(e.sigma1) * ra.min(ro).powf(e.sigma0);
    let x_cr = eps0 * p_u_width * ra.max(ro).powf(e.x_cr_exponent);
    let x_bar = eps0 * p_u_width * ra.powf(e.x_bar_exponent);
    Budget {
        b0,
        b1,
        b: b0.max(b1),
        b0_regime: x <= x_cr,
        x_cr,
        x_bar,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_candidate_counts_and_scales() {
        let eps0 = 1e-4;
        let tau = 0.25;
        assert_eq!(candidate_count(eps0, tau), 10);
        let root = ParamInterval::root(eps0);
        let kids = candidates(&root, tau).unwrap();
        assert_eq!(kids.len(), 10);
        assert!((kids[0].eps - 1e-5).abs() < 1e-18);
        assert!((kids[0].t_lo - eps0).abs() < 1e-18);
        assert!(kids[9].t_hi <= root.t_hi + 1e-15);

        // log eps_k = (1 + tau)^k log eps0 through depth 6.
        let scales = scale_table(eps0, tau, 6);
        for (k, &e) in scales.iter().enumerate() {
            let expect = ((1.0 + tau).powi(k as i32) * eps0.ln()).exp();
            assert!(
                (e.ln() - expect.ln()).abs() / expect.ln().abs() < 1e-10,
                "level {k}"
            );
        }
    }

    #[test]
    fn too_few_candidates_is_an_error() {
        // eps0 = 0.01, tau = 0.1: floor(10^0.2) = 1.
        assert_eq!(candidate_count(0.01, 0.1), 1);
        let root = ParamInterval::root(0.01);
        assert!(matches!(
            candidates(&root, 0.1),
            Err(ParamError::TooFewCandidates(1))
        ));
    }

    #[test]
    fn discarded_length_below_next_scale() {
        for &(eps, tau) in &[(1e-4, 0.25), (1e-5, 0.25), (1e-3, 0.2)] {
            let d = discarded_length(eps, tau);
            let eps_next = eps.powf(1.0 + tau);
            assert!(d >= -1e-18 && d < eps_next, "discard {d} vs {eps_next}");
        }
    }

    #[test]
    fn tree_materialization_with_cap() {
        let levels = interval_tree(1e-4, 0.25, 2, 100_000).unwrap();
        assert_eq!(levels.len(), 3);
        assert_eq!(levels[1].len(), 10);
        // Each level-1 interval of length 1e-5 divides into floor(1e-5^-.25)
        // = 17 candidates.
        assert_eq!(levels[2].len(), 170);
        // Candidates tile their parent with the remainder below the next
        // scale; the whole level discards less than one level-1 length.
        let mut discarded = 0.0;
        for node in &levels[1] {
            discarded += discarded_length(node.eps, 0.25);
        }
        assert!(discarded < levels[1][0].eps, "level discard {discarded}");
        // The cap stops materialization gracefully.
        let capped = interval_tree(1e-4, 0.25, 6, 1000).unwrap();
        assert!(capped.len() < 7);
    }

    #[test]
    fn path_materialization() {
        let path = materialize_path(1e-4, 0.25, &[3, 7]).unwrap();
        assert_eq!(path.len(), 3);
        assert!(path[0].contains(&path[1]) && path[1].contains(&path[2]));
        assert_eq!(path[2].ancestors().len(), 3);
    }

    #[test]
    fn h4_examples() {
        assert!(check_h4(0.55, 0.55)); // 1.5125 < 1.65
        assert!(!check_h4(0.7, 0.7)); // 2.45 >= 2.1
        assert!(check_h4(0.5, 0.5)); // 1.25 < 1.5
    }

    #[test]
    fn exponent_values_at_symmetric_point() {
        let e = exponents(0.55, 0.55).unwrap();
        assert!((e.rho0 - 0.55).abs() < 1e-12);
        assert!((e.rho1 - 0.325).abs() < 1e-12);
        assert!((e.sigma0 - 0.45).abs() < 1e-12);
        assert!(e.sigma1.abs() < 1e-12);
        assert!((e.beta_max - 1.38462).abs() < 1e-5);
        assert!((e.x_cr_exponent - 2.0).abs() < 1e-12);
        assert!((e.exceptional_bound - 0.06667).abs() < 1e-5);
        // rho' values scale by d_u0/d_s0 = 1 here.
        assert!((e.rho0_prime - e.rho0).abs() < 1e-12);
        assert!((e.rho1_prime - e.rho1).abs() < 1e-12);
    }

    #[test]
    fn convention_violation_reported() {
        assert!(matches!(
            exponents(0.5, 0.6),
            Err(ParamError::ConventionViolated(_, _))
        ));
    }

    #[test]
    fn critical_exponent_sign() {
        // sigma1 + sigma0 (rho0 - 2 rho1)/(rho0 - rho1) = 2 - 2ds - 2du.
        let e = exponents(0.55, 0.55).unwrap();
        let lhs = e.sigma1 + e.sigma0 * (e.rho0 - 2.0 * e.rho1) / (e.rho0 - e.rho1);
        assert!((lhs - (2.0 - 2.0 * 0.55 - 2.0 * 0.55)).abs() < 1e-12);
        assert!((lhs + 0.2).abs() < 1e-12);
    }

    #[test]
    fn beta_max_above_one_iff_h4_on_grid() {
        for i in 0..50 {
            for j in 0..=i {
                let ds = 0.02 + 0.96 * i as f64 / 49.0;
                let du = 0.02 + 0.96 * j as f64 / 49.0;
                if 2.0 * ds + du - 1.0 <= 0.0 {
                    continue; // beta_max undefined below the bifurcation regime
                }
                let e = exponents(ds, du).unwrap();
                assert_eq!(
                    e.beta_max > 1.0,
                    check_h4(ds, du),
                    "ds {ds} du {du} beta_max {}",
                    e.beta_max
                );
            }
        }
    }

    #[test]
    fn exponent_identities_on_grid() {
        for i in 0..50 {
            for j in 0..=i {
                let ds = 0.05 + 0.9 * i as f64 / 49.0;
                let du = 0.05 + 0.9 * j as f64 / 49.0;
                if 2.0 * ds + du - 1.0 <= 1e-6 || !check_h4(ds, du) {
                    continue;
                }
                let e = exponents(ds, du).unwrap();
                let sum = ds + du;
                assert!((e.rho0 - e.rho1 - ds * (1.0 - ds) / sum).abs() < 1e-12);
                assert!((e.x_cr_exponent - sum / ds).abs() < 1e-12);
                assert!((e.x_bar_exponent - e.beta_max).abs() < 1e-12);
                assert!(
                    (e.rho0_prime - e.rho1_prime - du * (1.0 - ds) / sum).abs() < 1e-12
                );
                assert!(
                    (e.sigma0 / (e.rho0_prime - e.rho1_prime) - sum / du).abs() < 1e-10
                );
            }
        }
    }

    #[test]
    fn budget_continuity_and_monotonicity() {
        let e = exponents(0.55, 0.55).unwrap();
        let eps0 = 1e-4;
        let p_u = 5e-4;
        let ia = 1e-5;
        let io = 3e-6;
        let b_at = |x: f64| bicritical_budget(x, ia, io, eps0, p_u, &e);
        let q = b_at(1.0);
        // B0 = B1 exactly at the crossover.
        let at_cross = b_at(q.x_cr);
        assert!(
            (at_cross.b0 - at_cross.b1).abs() / at_cross.b0 < 1e-9,
            "B0 {} B1 {}",
            at_cross.b0,
            at_cross.b1
        );
        // B0 regime below x_cr, B1 above.
        assert!(b_at(q.x_cr * 0.5).b0 >= b_at(q.x_cr * 0.5).b1);
        assert!(b_at(q.x_cr * 2.0).b1 >= b_at(q.x_cr * 2.0).b0);
        // Monotone nonincreasing in x over the discretization x = 2^-N.
        let mut prev = f64::INFINITY;
        for npow in (0..60).rev() {
            let x = (2.0f64).powi(-npow);
            let b = b_at(x).b;
            assert!(b <= prev * (1.0 + 1e-12), "B not decreasing at 2^-{npow}");
            prev = b;
        }
    }

    #[test]
    fn budget_crossover_exponent_matches_closed_form() {
        // With I_alpha = I_omega, B at the crossover reduces to
        // (|I|/eps0)^(sigma1 + sigma0 (rho0 - 2 rho1)/(rho0 - rho1)).
        let e = exponents(0.58, 0.52).unwrap();
        let eps0 = 1e-4;
        let p_u = 3e-4;
        let ia = 2e-6;
        let b = bicritical_budget(1.0, ia, ia, eps0, p_u, &e);
        let q = bicritical_budget(b.x_cr, ia, ia, eps0, p_u, &e);
        let expo = e.sigma1 + e.sigma0 * (e.rho0 - 2.0 * e.rho1) / (e.rho0 - e.rho1);
        let expect = (ia / eps0).powf(expo);
        assert!((q.b - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn budget_empty_beyond_x_bar() {
        let e = exponents(0.55, 0.55).unwrap();
        let eps0 = 1e-4;
        let p_u = 5e-4;
        let ia = 1e-5;
        let b = bicritical_budget(1.0, ia, ia, eps0, p_u, &e);
        // For x > x_bar the budget drops below one element.
        let beyond = bicritical_budget(b.x_bar * 1.5, ia, ia, eps0, p_u, &e);
        assert!(beyond.b < 1.0, "B = {}", beyond.b);
        let within = bicritical_budget(b.x_bar * 0.5, ia, ia, eps0, p_u, &e);
        assert!(within.b > 1.0, "B = {}", within.b);
    }
}
