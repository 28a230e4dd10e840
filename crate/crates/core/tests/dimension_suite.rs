//! Transfer-operator dimension computations against the closed-form
//! self-similar oracles, Gibbs-measure properties and the width series.

use horseshoe_core::dimension::{
    box_count_dimension, cylinder_states, dilatation, gibbs_measure, lambda_curve,
    solve_dimension, theta_dimension, theta_series, transfer_matrix, weighted_children_sum,
    Truncation,
};
use horseshoe_core::family::{make_family, FamilyConfig};
use horseshoe_core::params::ParamInterval;
use horseshoe_core::rclass::{Budgets, RClass};
use horseshoe_core::word::{parse_word, Word};
use horseshoe_core::{ChartId, FoldConfig};
use std::sync::{Arc, OnceLock};

fn pure_class(lambda: f64, depth: usize) -> RClass {
    let fam = make_family(FamilyConfig {
        lambda_s: lambda,
        eps0: 1e-4,
        nonlinearity: 0.0,
        fold: FoldConfig::default(),
    })
    .unwrap();
    let budgets = Budgets {
        n_max: depth,
        width_floor: lambda.powi(depth as i32) * 0.9,
    };
    RClass::init(fam, ParamInterval::root(1e-4), budgets, 0.05).unwrap()
}

fn third_class() -> &'static Arc<RClass> {
    static C: OnceLock<Arc<RClass>> = OnceLock::new();
    C.get_or_init(|| Arc::new(pure_class(1.0 / 3.0, 9)))
}

fn model_class() -> &'static Arc<RClass> {
    static C: OnceLock<Arc<RClass>> = OnceLock::new();
    C.get_or_init(|| Arc::new(pure_class(0.284, 9)))
}

fn perturbed_class() -> &'static Arc<RClass> {
    static C: OnceLock<Arc<RClass>> = OnceLock::new();
    C.get_or_init(|| {
        let fam = make_family(FamilyConfig {
            lambda_s: 0.284,
            eps0: 1e-4,
            nonlinearity: 0.01,
            fold: FoldConfig::default(),
        })
        .unwrap();
        let budgets = Budgets {
            n_max: 9,
            width_floor: 1e-6,
        };
        Arc::new(RClass::init(fam, ParamInterval::root(1e-4), budgets, 0.05).unwrap())
    })
}

fn trunc(m: usize, w_min: f64) -> Truncation {
    Truncation {
        m_trunc: m,
        w_min,
        base_y: 0.5,
    }
}

#[test]
fn dilatation_of_affine_primes() {
    let class = model_class();
    let b = dilatation(class, &parse_word("01").unwrap(), None, 0.5);
    let expect = (1.0f64 / 0.284).ln();
    assert!((b - expect).abs() < 1e-10, "b = {b}, expect {expect}");
    // Birkhoff sum over the primes of an n-fold simple composite.
    let word = parse_word("010011").unwrap();
    let primes = class.prime_decompose(&word);
    let total: f64 = primes
        .iter()
        .map(|p| dilatation(class, p, None, 0.5))
        .sum();
    assert!((total - 5.0 * expect).abs() < 1e-9);
}

#[test]
fn dilatation_close_to_log_width_on_perturbed_model() {
    let class = perturbed_class();
    for w in class.primes() {
        let e = class.get(&w).unwrap();
        if e.n == 0 {
            continue;
        }
        let b = dilatation(class, &w, None, 0.5);
        assert!(
            (b + e.p_width.ln()).abs() <= 0.5,
            "prime {}: b = {b}, log|P| = {}",
            w,
            e.p_width.ln()
        );
    }
}

#[test]
fn transfer_eigenvalue_closed_forms() {
    let class = third_class();
    // Depth-1 states: lambda_d = 2 * 3^(-d).
    let tm = transfer_matrix(class, 0.5, &trunc(1, 0.3)).unwrap();
    assert!(
        (tm.lambda - 2.0 * 3f64.powf(-0.5)).abs() < 1e-10,
        "lambda = {}",
        tm.lambda
    );
    let d_star = 2f64.ln() / 3f64.ln();
    let tm = transfer_matrix(class, d_star, &trunc(1, 0.3)).unwrap();
    assert!((tm.lambda - 1.0).abs() < 1e-12);
    // Perron vector positive on the irreducible full-shift block.
    assert!(tm.h.iter().all(|&x| x > 0.0));
    assert!(tm.left.iter().all(|&x| x > 0.0));
    // Deeper truncation agrees.
    let tm = transfer_matrix(class, d_star, &trunc(6, 1e-5)).unwrap();
    assert!((tm.lambda - 1.0).abs() < 1e-12);
}

#[test]
fn dimension_bisection_matches_self_similar_oracle() {
    // Oracle: the two-branch self-similar set with ratio lambda has
    // transverse dimension log 2 / log(1/lambda).
    let d = solve_dimension(third_class(), &trunc(6, 1e-5)).unwrap();
    assert!(
        (d - 0.630930).abs() < 1e-6,
        "d_s = {d} vs log2/log3 = {}",
        2f64.ln() / 3f64.ln()
    );

    let d = solve_dimension(model_class(), &trunc(6, 1e-5)).unwrap();
    let expect = 2f64.ln() / (1.0f64 / 0.284).ln();
    assert!((d - expect).abs() < 1e-5, "d_s = {d} vs {expect}");
    assert!((d - 0.55056).abs() < 1e-4);
}

#[test]
fn lambda_curve_monotone_and_vanishing() {
    let grid: Vec<f64> = (0..20).map(|i| 0.1 + 1.3 * i as f64 / 19.0).collect();
    for class in [third_class(), perturbed_class()] {
        let curve = lambda_curve(class, &trunc(4, 1e-5), &grid).unwrap();
        for win in curve.windows(2) {
            assert!(
                win[0].1 > win[1].1,
                "lambda not strictly decreasing at d = {}",
                win[1].0
            );
        }
        let tail = transfer_matrix(class, 1.5, &trunc(4, 1e-5)).unwrap();
        assert!(tail.lambda < 0.5, "lambda(1.5) = {}", tail.lambda);
    }
}

#[test]
fn eigenvector_two_sided_bound() {
    for class in [model_class(), perturbed_class()] {
        let tm = transfer_matrix(class, 0.55, &trunc(5, 1e-6)).unwrap();
        let max = tm.h.iter().cloned().fold(f64::MIN, f64::max);
        let min = tm.h.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min > 0.0 && max / min <= 20.0, "h ratio {}", max / min);
    }
}

#[test]
fn gibbs_measure_constant_model() {
    let class = third_class();
    let d_star = 2f64.ln() / 3f64.ln();
    let table = gibbs_measure(class, d_star, &trunc(6, 1e-5)).unwrap();
    assert!(
        (table.gibbs_constant - 1.0).abs() < 1e-10,
        "Gibbs constant {}",
        table.gibbs_constant
    );
    // Additivity: depth-k cylinders of one base rectangle sum to 1 exactly.
    for depth in 1..=6usize {
        for chart in [0u8, 1u8] {
            let total: f64 = table
                .mu
                .iter()
                .filter(|(w, _, _)| {
                    let word = parse_word(w).unwrap();
                    word.n(2) == depth && word.source() == ChartId(chart)
                })
                .map(|(_, _, mu)| mu)
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "depth {depth}: sum {total}");
        }
    }
}

#[test]
fn gibbs_measure_perturbed_model_bounded() {
    let class = perturbed_class();
    let d = solve_dimension(class, &trunc(8, 1e-6)).unwrap();
    let table = gibbs_measure(class, d, &trunc(8, 1e-6)).unwrap();
    assert!(
        table.gibbs_constant <= 10.0,
        "Gibbs constant {}",
        table.gibbs_constant
    );
}

#[test]
fn perturbed_dimension_near_pure_and_above_box_count() {
    let pure = 2f64.ln() / (1.0f64 / 0.284).ln();
    let class = perturbed_class();
    let d = solve_dimension(class, &trunc(8, 1e-6)).unwrap();
    assert!((d - pure).abs() < 0.05, "d = {d} vs pure {pure}");
    // Box-counting oracle of the depth-8 slice intersection.
    let bc = box_count_dimension(class, 8, 0.5);
    assert!((d - bc).abs() < 0.05, "transfer {d} vs box-count {bc}");
    let d_minus = pure - 1.0 * class.family.config.eps0;
    assert!(d >= d_minus, "d = {d} below d_s^- = {d_minus}");
}

#[test]
fn coboundary_insensitivity_of_the_dimension() {
    let class = perturbed_class();
    let center = solve_dimension(class, &trunc(6, 1e-6)).unwrap();
    let quarter = Truncation {
        m_trunc: 6,
        w_min: 1e-6,
        base_y: 0.25,
    };
    let moved = solve_dimension(class, &quarter).unwrap();
    assert!(
        (center - moved).abs() < 1e-3,
        "base-point shift moved d_s by {}",
        (center - moved).abs()
    );
}

#[test]
fn dimension_independent_of_base_rectangle() {
    let class = third_class();
    let d0 = theta_dimension(class, ChartId(0));
    let d1 = theta_dimension(class, ChartId(1));
    assert!((d0 - d1).abs() < 1e-6, "theta dims {d0} vs {d1}");
    assert!((d0 - 2f64.ln() / 3f64.ln()).abs() < 1e-3);
}

#[test]
fn theta_series_geometric_sums() {
    let class = model_class();
    let root = Word::root(ChartId(0));
    // s = 1: generation sums are (2 lambda)^k.
    let series = theta_series(class, &root, 1.0);
    let l = 0.284f64;
    for (k, g) in series.generation_sums.iter().enumerate().skip(1) {
        let expect = (2.0 * l).powi(k as i32);
        assert!((g - expect).abs() < 1e-10 * expect, "gen {k}");
    }
    assert!(series.convergent);
    // Geometric tail closed form.
    let r = 2.0 * l;
    let last = series.generation_sums.last().unwrap();
    assert!((series.tail_estimate - last * r / (1.0 - r)).abs() < 1e-12);

    // s = d_s0: every generation contributes exactly 1.
    let d0 = class.family.d_s0;
    let series = theta_series(class, &root, d0);
    for (k, g) in series.generation_sums.iter().enumerate().skip(1) {
        assert!((g - 1.0).abs() < 1e-10, "gen {k}: {g}");
    }
    assert!(!series.convergent || series.generation_sums.len() < 3);

    // s = d_s0 + 0.1: convergent with ratio 2 lambda^s per generation.
    let series = theta_series(class, &root, d0 + 0.1);
    assert!(series.convergent);
    let r = 2.0 * l.powf(d0 + 0.1);
    let last = series.generation_sums.last().unwrap();
    assert!((series.tail_estimate - last * r / (1.0 - r)).abs() < 1e-9);
}

#[test]
fn weighted_children_sums() {
    let class = model_class();
    let word = parse_word("01").unwrap();
    let kappa = 0.9;
    let d_minus = 0.54;
    // One generation: two simple children, each contributing
    // lambda^d_minus * kappa relative to the parent norm.
    let w = weighted_children_sum(class, &word, kappa, d_minus, 1);
    let per_gen = 2.0 * kappa * 0.284f64.powf(d_minus);
    assert!((w.sum / w.base_norm - per_gen).abs() < 1e-10);
    assert!((per_gen - 0.91).abs() < 0.01);
    // m generations decay like per_gen^m, below C kappa^(m/2) with C <= 3.
    for m in 1..=6 {
        let w = weighted_children_sum(class, &word, kappa, d_minus, m);
        let measured_c = w.bound_ratio;
        assert!(
            measured_c <= 3.0,
            "m = {m}: ratio {measured_c} exceeds the ceiling"
        );
        let expect = per_gen.powi(m as i32) / kappa.powf(m as f64 / 2.0);
        assert!((measured_c - expect).abs() < 1e-9);
    }
}

#[test]
fn weighted_children_sums_with_parabolic_content() {
    // A class with parabolic children still satisfies the weighted bound.
    let fam = make_family(FamilyConfig {
        lambda_s: 0.284,
        eps0: 0.01,
        nonlinearity: 0.0,
        fold: FoldConfig::default(),
    })
    .unwrap();
    let budgets = Budgets {
        n_max: 14,
        width_floor: 1e-6,
    };
    let path = horseshoe_core::params::materialize_path(0.01, 0.25, &[0]).unwrap();
    let root = RClass::init(fam, path[0].clone(), budgets, 0.05).unwrap();
    let mut class = RClass::descend(&Arc::new(root), path[1].clone());
    class.extend();
    assert!(class.elements().iter().any(|e| e.word.contains_block()));
    let word = parse_word("10").unwrap();
    for m in 1..=4 {
        let w = weighted_children_sum(&class, &word, 0.9, 0.54, m);
        assert!(w.bound_ratio <= 10.0, "m = {m}: {}", w.bound_ratio);
    }
}

#[test]
fn truncation_tail_mass_reported() {
    let class = model_class();
    let tm = transfer_matrix(class, 0.55, &trunc(4, 1e-4)).unwrap();
    // All trivial primes survive this truncation: no tail.
    assert_eq!(tm.tail_mass, 0.0);
    let states = cylinder_states(class, &trunc(4, 1e-4));
    assert_eq!(states.len(), tm.states.len());
}

#[test]
fn perturbed_strips_have_bounded_slope() {
    // Boundary graphs of every stored strip stay within the cone aperture.
    let class = perturbed_class();
    let aperture = 1.0 / class.family.cone().relaxed().u;
    for e in class.elements().iter().step_by(11) {
        let s = e.map.domain.max_slope();
        assert!(s <= aperture, "strip slope {s} for {}", e.word);
    }
}

#[test]
fn coarse_truncation_is_rejected() {
    // A truncation that keeps the trivial primes but drops the parabolic
    // ones carries untrustworthy tail mass.
    // A fatter tongue scale stores many parabolic primes; dropping all of
    // them leaves tail mass past the trust threshold.
    let fam = make_family(FamilyConfig {
        lambda_s: 0.284,
        eps0: 0.02,
        nonlinearity: 0.0,
        fold: FoldConfig::default(),
    })
    .unwrap();
    let budgets = Budgets {
        n_max: 14,
        width_floor: 1e-6,
    };
    let path = horseshoe_core::params::materialize_path(0.02, 0.25, &[0]).unwrap();
    let root = RClass::init(fam, path[0].clone(), budgets, 0.05).unwrap();
    let mut class = RClass::descend(&Arc::new(root), path[1].clone());
    class.extend();
    let coarse = Truncation {
        m_trunc: 3,
        w_min: 1e-3,
        base_y: 0.5,
    };
    assert!(matches!(
        transfer_matrix(&class, 0.55, &coarse),
        Err(horseshoe_core::DimError::TruncationTooCoarse(_, _))
    ));
    // The matched truncation is accepted.
    let fine = Truncation {
        m_trunc: 3,
        w_min: 1e-6,
        base_y: 0.5,
    };
    assert!(transfer_matrix(&class, 0.55, &fine).is_ok());
}

#[test]
fn dimension_of_a_class_with_parabolic_elements() {
    // With transverse tongue pairs contributing extra branches, the
    // transverse dimension stays close to the pure-shift value and above
    // the lower proxy.
    let fam = make_family(FamilyConfig {
        lambda_s: 0.284,
        eps0: 0.01,
        nonlinearity: 0.0,
        fold: FoldConfig::default(),
    })
    .unwrap();
    let budgets = Budgets {
        n_max: 14,
        width_floor: 1e-6,
    };
    let path = horseshoe_core::params::materialize_path(0.01, 0.25, &[0]).unwrap();
    let root = RClass::init(fam, path[0].clone(), budgets, 0.05).unwrap();
    let mut class = RClass::descend(&Arc::new(root), path[1].clone());
    class.extend();
    assert!(class.elements().iter().any(|e| e.word.contains_block()));

    let t = Truncation {
        m_trunc: 6,
        w_min: 1e-6,
        base_y: 0.5,
    };
    let d = solve_dimension(&class, &t).unwrap();
    let pure = class.family.d_s0;
    assert!((d - pure).abs() < 0.05, "d = {d} vs pure {pure}");
    let d_minus = pure - class.family.config.eps0;
    assert!(d >= d_minus);
    // Box-count oracle on the slice at depth 8.
    let bc = box_count_dimension(&class, 8, 0.5);
    assert!((d - bc).abs() < 0.05, "transfer {d} vs box-count {bc}");
}
