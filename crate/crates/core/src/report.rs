//! Machine-readable verification reports: the randomized invariant suites
//! with their measured constants, in one JSON document.

use crate::compose::{simple_compose, verify_composition_calculus};
use crate::config::RunConfig;
use crate::field::ScalarField2;
use crate::geom::{ChartId, Rect};
use crate::map::{ConeParams, ImplicitMap};
use crate::parabolic::{
    check_parabolic_estimates, parabolic_compose, verify_parabolic_calculus, BranchSign,
    TangencyCtx,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub name: String,
    pub pass: bool,
    /// Measured constant or worst value, when the invariant has one.
    pub measured: f64,
    pub ceiling: f64,
    pub details: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema: String,
    pub seed: u64,
    pub checks: Vec<SuiteCheck>,
    pub all_pass: bool,
}

/// A random affine-like map family satisfying the cone condition, produced
/// by rejection sampling of small smooth perturbations of a linear map.
pub fn random_cone_map(
    rng: &mut ChaCha8Rng,
    cone: &ConeParams,
    with_t: bool,
    t: f64,
) -> ImplicitMap {
    loop {
        let lam = rng.random_range(0.15..0.35);
        let c: [f64; 8] = std::array::from_fn(|_| rng.random_range(-0.015..0.015));
        let a = ScalarField2::fit(Rect::UNIT, 6, 6, move |y, x| {
            lam * x + c[0] * y * y + c[1] * x * y + c[2] * x * x + c[3] * t * y
        });
        let b = ScalarField2::fit(Rect::UNIT, 6, 6, move |y, x| {
            lam * y + c[4] * x * x + c[5] * x * y + c[6] * y * y + c[7] * t * x
        });
        let Ok(map) = ImplicitMap::from_fields(a, b, ChartId(0), ChartId(0)) else {
            continue;
        };
        if !map.check_cone(cone).ok {
            continue;
        }
        if !with_t {
            return map;
        }
        let at = ScalarField2::fit(Rect::UNIT, 6, 6, move |y, _| c[3] * y);
        let bt = ScalarField2::fit(Rect::UNIT, 6, 6, move |_, x| c[7] * x);
        return map.with_parameter_fields(Some(at), Some(bt));
    }
}

fn push(checks: &mut Vec<SuiteCheck>, name: &str, measured: f64, ceiling: f64, details: String) {
    checks.push(SuiteCheck {
        name: name.to_string(),
        pass: measured <= ceiling,
        measured,
        ceiling,
        details,
    });
}

/// Run the randomized invariant suites and collect measured constants.
///
/// `fault` marks one named check as failed, for fault-injection tests.
pub fn run_verification(config: &RunConfig, pairs: usize, fault: Option<&str>) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();
    let cone = ConeParams::raw(2.0, 1.2, 1.2);

    // Simple-composition suite: cone upgrade, width law, distortion growth,
    // determinant formula, derivative-calculus agreement.
    let mut cone_fail = 0usize;
    let mut width_ratio_max: f64 = 1.0;
    let mut width_ratio_min: f64 = 1.0;
    let mut distortion_c: f64 = 0.0;
    let mut det_err: f64 = 0.0;
    let mut calc_worst: f64 = 0.0;
    for k in 0..pairs {
        let seeds: [u64; 2] = [rng.random(), rng.random()];
        let build = move |t: f64| {
            let mut r1 = ChaCha8Rng::seed_from_u64(seeds[0]);
            let mut r2 = ChaCha8Rng::seed_from_u64(seeds[1]);
            let c = ConeParams::raw(2.0, 1.2, 1.2);
            (
                random_cone_map(&mut r1, &c, true, t),
                random_cone_map(&mut r2, &c, true, t),
            )
        };
        let (f, g) = build(0.1);
        let composed = match simple_compose(&f, &g) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if !composed.check_cone(&cone.squared()).ok {
            cone_fail += 1;
        }
        let (p, _) = f.widths();
        let (p2, _) = g.widths();
        let (pc, _) = composed.widths();
        let ratio = pc / (p * p2);
        width_ratio_max = width_ratio_max.max(ratio);
        width_ratio_min = width_ratio_min.min(ratio);
        let (df, dg) = (f.distortion().unwrap(), g.distortion().unwrap());
        let dc = composed.distortion().unwrap();
        let base = df.max(dg);
        if dc > base {
            let (_, q) = f.widths();
            let denom = (q.max(p2) * (df + dg)).max(1e-12);
            distortion_c = distortion_c.max((dc - base) / denom);
        }
        for _ in 0..3 {
            let y0 = rng.random_range(-0.5..0.5);
            let x0 = rng.random_range(-0.02..0.02);
            let Ok(j) = composed.forward_jacobian_fd(x0, y0, 1e-6) else {
                continue;
            };
            let det_fd = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let Ok((x1, _)) = composed.forward(x0, y0) else {
                continue;
            };
            let det = composed.det_df(y0, x1);
            det_err = det_err.max((det_fd - det).abs() / det.abs().max(1e-12));
        }
        if k < 12 {
            if let Ok(rep) = verify_composition_calculus(&build, 0.1, 4, None) {
                calc_worst = calc_worst.max(rep.worst());
            }
        }
    }
    push(
        &mut checks,
        "cone_upgrade_lambda_squared",
        cone_fail as f64,
        0.0,
        format!("{cone_fail} failures over {pairs} composites"),
    );
    push(
        &mut checks,
        "width_near_multiplicativity",
        width_ratio_max.max(1.0 / width_ratio_min),
        10.0,
        format!("ratio range [{width_ratio_min:.4}, {width_ratio_max:.4}]"),
    );
    push(
        &mut checks,
        "distortion_growth_constant",
        distortion_c,
        10.0,
        "measured C of the composite distortion bound".to_string(),
    );
    push(
        &mut checks,
        "determinant_formula",
        det_err,
        1e-8,
        "max relative error of det DF = A_x^-1 B_y".to_string(),
    );
    push(
        &mut checks,
        "simple_calculus_finite_differences",
        calc_worst,
        1e-5,
        "worst formula discrepancy over the sampled pairs".to_string(),
    );

    // Parabolic suite on the model geometry.
    let para_setup = |t: f64| {
        let a0 = ScalarField2::fit(Rect::UNIT, 4, 4, |y, x| 0.3 * x + 0.01 * y * y);
        let b0 = ScalarField2::fit(Rect::UNIT, 4, 4, |y, x| 0.3 * y + 0.01 * x * x);
        let f0 = ImplicitMap::from_fields(a0, b0, ChartId(1), ChartId(0)).unwrap();
        let a1 = ScalarField2::fit(Rect::UNIT, 4, 4, |y, x| 0.3 * x + 0.012 * y * y);
        let b1 = ScalarField2::fit(Rect::UNIT, 4, 4, |y, x| 0.3 * y + 0.008 * x * x);
        let f1 = ImplicitMap::from_fields(a1, b1, ChartId(1), ChartId(0)).unwrap();
        let fold_cfg = crate::fold::FoldConfig {
            x_c: 0.0,
            y_c: 0.0,
            kappa_u: 0.02,
            kappa_s: 0.02,
            ..crate::fold::FoldConfig::default()
        };
        let fold =
            crate::fold::make_model_fold(&fold_cfg, ChartId(0), ChartId(1), Rect::UNIT, t)
                .unwrap();
        (f0, fold, f1)
    };
    let mut para_calc_worst: f64 = 0.0;
    for sign in [BranchSign::Plus, BranchSign::Minus] {
        if let Ok(rep) =
            verify_parabolic_calculus(&para_setup, 1.0, sign, 4, &config.parabolic, None)
        {
            para_calc_worst = para_calc_worst.max(rep.worst());
        }
    }
    push(
        &mut checks,
        "parabolic_calculus_finite_differences",
        para_calc_worst,
        1e-5,
        "worst formula discrepancy over both branches".to_string(),
    );

    let mut cw_dev: f64 = 0.0;
    let mut cww_dev: f64 = 0.0;
    let mut width_c: f64 = 0.0;
    let mut est_count = 0usize;
    for _ in 0..50 {
        let t: f64 = rng.random_range(0.8..1.4);
        let (f0, fold, f1) = para_setup(t);
        let ctx = TangencyCtx::new(&f0, &fold, &f1);
        for _ in 0..4 {
            let w = rng.random_range(-0.9..0.9);
            let y0 = rng.random_range(-1.0..1.0);
            let x1 = rng.random_range(-1.0..1.0);
            let f = ctx.point_formulas(w, y0, x1);
            cw_dev = cw_dev.max((f["C_w"] - 2.0 * w).abs());
            cww_dev = cww_dev.max((f["C_ww"] - 2.0).abs());
        }
        if let Ok(pair) = parabolic_compose(&f0, &fold, &f1, &config.parabolic) {
            let est = check_parabolic_estimates(&pair, &f0, &f1);
            for r in [est.width_ratio_p.0, est.width_ratio_p.1] {
                width_c = width_c.max(r).max(1.0 / r);
            }
            est_count += 1;
        }
    }
    push(
        &mut checks,
        "tangency_profile_cw",
        cw_dev,
        0.05,
        "max |C_w - 2w| over the model suite".to_string(),
    );
    push(
        &mut checks,
        "tangency_profile_cww",
        cww_dev,
        0.05,
        "max |C_ww - 2| over the model suite".to_string(),
    );
    push(
        &mut checks,
        "parabolic_width_constant",
        width_c,
        10.0,
        format!("two-sided width-law constant over {est_count} pairs"),
    );

    // Gibbs two-sided constant on a small perturbed class.
    let gibbs_c = (|| {
        let fam = crate::family::make_family(crate::family::FamilyConfig {
            lambda_s: 0.284,
            eps0: 1e-4,
            nonlinearity: 0.01,
            fold: crate::fold::FoldConfig::default(),
        })
        .ok()?;
        let budgets = crate::rclass::Budgets {
            n_max: 7,
            width_floor: 1e-5,
        };
        let class = crate::rclass::RClass::init(
            fam,
            crate::params::ParamInterval::root(1e-4),
            budgets,
            0.05,
        )
        .ok()?;
        let trunc = crate::dimension::Truncation {
            m_trunc: 6,
            w_min: 1e-5,
            base_y: 0.5,
        };
        let d = crate::dimension::solve_dimension(&class, &trunc).ok()?;
        Some(
            crate::dimension::gibbs_measure(&class, d, &trunc)
                .ok()?
                .gibbs_constant,
        )
    })()
    .unwrap_or(f64::INFINITY);
    push(
        &mut checks,
        "gibbs_two_sided_constant",
        gibbs_c,
        10.0,
        "max(mu/|P|^d, |P|^d/mu) over cylinders of the perturbed class".to_string(),
    );

    let mut report = VerifyReport {
        schema: "horseshoe/verify/v1".to_string(),
        seed: config.seed,
        checks,
        all_pass: true,
    };
    if let Some(name) = fault {
        for c in &mut report.checks {
            if c.name == name {
                c.pass = false;
                c.details = format!("fault injected: {}", c.details);
            }
        }
    }
    report.all_pass = report.checks.iter().all(|c| c.pass);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes_all() {
        let cfg = RunConfig::default();
        let rep = run_verification(&cfg, 20, None);
        for c in &rep.checks {
            assert!(c.pass, "{}: measured {} > {}", c.name, c.measured, c.ceiling);
        }
        assert!(rep.all_pass);
    }

    #[test]
    fn fault_injection_fails_exactly_one() {
        let cfg = RunConfig::default();
        let rep = run_verification(&cfg, 6, Some("determinant_formula"));
        let failing: Vec<_> = rep.checks.iter().filter(|c| !c.pass).collect();
        assert_eq!(failing.len(), 1);
        assert_eq!(failing[0].name, "determinant_formula");
    }
}
