//! Thermodynamic formalism on a constructed class: transverse dilatation
//! over prime cylinders, the truncated transfer operator, the dimension
//! solving `lambda_d = 1`, the Gibbs measure, width series and weighted
//! children sums.

use crate::error::DimError;
use crate::geom::ChartId;
use crate::rclass::{p_contained, RClass};
use crate::word::Word;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Truncation of the symbolic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Truncation {
    /// Number of primes per cylinder state.
    pub m_trunc: usize,
    /// Minimal width of a state's composite rectangle.
    pub w_min: f64,
    /// Base point (unstable coordinate) where dilatations are evaluated;
    /// the chart center by default. Moving it reweights the operator by a
    /// bounded coboundary.
    pub base_y: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            m_trunc: 8,
            w_min: 1e-8,
            base_y: 0.5,
        }
    }
}

/// A depth-`m` cylinder state: a composable sequence of primes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CylinderState {
    pub primes: Vec<Word>,
    /// The composite word (stored in the class).
    pub word: Word,
}

/// Finite truncation of the transfer operator at exponent `d`.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub d: f64,
    pub states: Vec<CylinderState>,
    /// Sparse entries `(row, col, weight)`: row receives from col with
    /// weight `exp(-d b(col))`.
    pub entries: Vec<(usize, usize, f64)>,
    pub lambda: f64,
    /// Positive right eigenvector (the eigenfunction).
    pub h: Vec<f64>,
    /// Positive left eigenvector.
    pub left: Vec<f64>,
    /// Mass of the primes excluded by the truncation, `sum n |P|^d`.
    pub tail_mass: f64,
    pub iterations: usize,
}

/// Transverse dilatation of a prime against a stable-curve proxy.
///
/// The proxy is the center vertical graph of the deepest stored refinement
/// of the tail; `base_y` is the evaluation point in the source chart
/// (the chart center by default).
pub fn dilatation(class: &RClass, prime: &Word, tail: Option<&Word>, base_y: f64) -> f64 {
    let e = class.get(prime).expect("prime stored");
    let (x_arg, slope) = match tail.and_then(|w| class.get(w)) {
        Some(te) => {
            let g = te.map.domain.center_graph();
            (g.eval(base_y), g.deriv().eval(base_y))
        }
        None => (0.0, 0.0),
    };
    let ax = e.map.a.deriv_x().eval(base_y, x_arg);
    let bx = e.map.b.deriv_x().eval(base_y, x_arg);
    ((1.0 - bx * slope) / ax).abs().ln()
}

/// Deepest stored refinement of a word on the `P` side (the thinnest stored
/// descendant along the leftmost chain), used as the curve proxy.
pub fn deepest_refinement(class: &RClass, word: &Word) -> Word {
    let mut cur = word.clone();
    loop {
        let kids = class.children(&cur);
        match kids.first() {
            Some(k) => cur = k.word.clone(),
            None => return cur,
        }
    }
}

/// Enumerate cylinder states: composable prime sequences of length
/// `m_trunc` whose composite clears `w_min`.
pub fn cylinder_states(class: &RClass, trunc: &Truncation) -> Vec<CylinderState> {
    let primes: Vec<Word> = class
        .primes()
        .into_iter()
        .filter(|w| class.get(w).map(|e| e.p_width >= trunc.w_min).unwrap_or(false))
        .collect();
    let mut states: Vec<CylinderState> = primes
        .iter()
        .map(|p| CylinderState {
            primes: vec![p.clone()],
            word: p.clone(),
        })
        .collect();
    for _ in 1..trunc.m_trunc {
        let mut next = Vec::new();
        for s in &states {
            for p in &primes {
                if s.word.target() != p.source() {
                    continue;
                }
                let word = s.word.concat(p);
                let Some(e) = class.get(&word) else { continue };
                if e.p_width < trunc.w_min {
                    continue;
                }
                let mut seq = s.primes.clone();
                seq.push(p.clone());
                next.push(CylinderState { primes: seq, word });
            }
        }
        if next.is_empty() {
            break;
        }
        states = next;
    }
    states.sort_by_key(|s| s.word.to_string());
    states
}

/// Assemble the truncated transfer operator at exponent `d` and compute its
/// dominant eigendata by power iteration.
pub fn transfer_matrix(
    class: &RClass,
    d: f64,
    trunc: &Truncation,
) -> Result<TransferMatrix, DimError> {
    let states = cylinder_states(class, trunc);
    if states.is_empty() {
        return Err(DimError::BracketFailure(0.0, 0.0, 0.0, 0.0));
    }
    // Dilatation of each state's leading prime against the proxy curve of
    // its tail, refined to the deepest stored element.
    let b_of: Vec<f64> = states
        .iter()
        .map(|s| {
            let tail = if s.primes.len() > 1 {
                let mut w = s.primes[1].clone();
                for p in &s.primes[2..] {
                    w = w.concat(p);
                }
                Some(deepest_refinement(class, &w))
            } else {
                None
            };
            dilatation(class, &s.primes[0], tail.as_ref(), trunc.base_y)
        })
        .collect();

    // Edges: the column state sigma' = S0 . sigma[..m-1] feeds the row
    // state sigma whose prefix matches sigma''s suffix; at depth one the
    // chart chaining carries the adjacency.
    let mut entries = Vec::new();
    for (col, s) in states.iter().enumerate() {
        let image: Vec<Word> = s.primes[1..].to_vec();
        for (row, t) in states.iter().enumerate() {
            if t.primes.len() != s.primes.len() {
                continue;
            }
            let adjacent = t.primes[..t.primes.len() - 1] == image[..]
                && t.word.source() == s.primes[0].target();
            if adjacent {
                entries.push((row, col, (-d * b_of[col]).exp()));
            }
        }
    }

    // Tail of the excluded primes at the dimension proxy exponent
    // d_s^- = d_s^0 - eps0; past 0.1 the dimension answer is untrustworthy.
    let d_minus = class.family.d_s0 - class.family.config.eps0;
    let tail_mass: f64 = class
        .primes()
        .iter()
        .filter_map(|w| class.get(w))
        .filter(|e| e.p_width < trunc.w_min)
        .map(|e| e.n as f64 * e.p_width.powf(d_minus))
        .sum();
    if tail_mass > 0.1 {
        return Err(DimError::TruncationTooCoarse(tail_mass, 0.1));
    }

    let n = states.len();
    let (lambda, h, iters) = power_iteration(n, &entries, false)?;
    let (_, left, _) = power_iteration(n, &entries, true)?;
    Ok(TransferMatrix {
        d,
        states,
        entries,
        lambda,
        h,
        left,
        tail_mass,
        iterations: iters,
    })
}

fn power_iteration(
    n: usize,
    entries: &[(usize, usize, f64)],
    transpose: bool,
) -> Result<(f64, Vec<f64>, usize), DimError> {
    let mut v = vec![1.0f64; n];
    let mut lambda = 0.0;
    let max_iters = 10_000;
    for it in 0..max_iters {
        let mut next = vec![0.0f64; n];
        for &(r, c, w) in entries {
            let (r, c) = if transpose { (c, r) } else { (r, c) };
            next[r] += w * v[c];
        }
        let norm: f64 = next.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
        if norm == 0.0 {
            return Err(DimError::PowerIterationDiverged(it));
        }
        for x in &mut next {
            *x /= norm;
        }
        let diff: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if (norm - lambda).abs() < 1e-12 && diff < 1e-12 {
            return Ok((norm, v, it + 1));
        }
        lambda = norm;
    }
    Ok((lambda, v, max_iters))
}

/// `lambda_d` over a grid of exponents.
pub fn lambda_curve(
    class: &RClass,
    trunc: &Truncation,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, DimError> {
    grid.iter()
        .map(|&d| transfer_matrix(class, d, trunc).map(|m| (d, m.lambda)))
        .collect()
}

/// Solve `lambda_d = 1` by bisection on `[0.05, 1.5]`.
pub fn solve_dimension(class: &RClass, trunc: &Truncation) -> Result<f64, DimError> {
    let (mut lo, mut hi) = (0.05, 1.5);
    let f_lo = transfer_matrix(class, lo, trunc)?.lambda;
    let f_hi = transfer_matrix(class, hi, trunc)?.lambda;
    if !(f_lo > 1.0 && f_hi < 1.0) {
        return Err(DimError::BracketFailure(lo, hi, f_lo, f_hi));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let lam = transfer_matrix(class, mid, trunc)?.lambda;
        if (lam - 1.0).abs() < 1e-10 {
            return Ok(mid);
        }
        if lam > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gibbs weights on the truncated cylinder algebra.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsTable {
    pub d_s: f64,
    /// Per-state measure, normalized to 1 within each base rectangle.
    pub mu: Vec<(String, f64, f64)>, // (word, width, mu)
    /// Measured two-sided Gibbs constant `max(mu / |P|^d, |P|^d / mu)`
    /// over cylinder prefixes to the sampled depth.
    pub gibbs_constant: f64,
}

/// The Gibbs measure from the eigendata at the solved dimension.
pub fn gibbs_measure(
    class: &RClass,
    d_s: f64,
    trunc: &Truncation,
) -> Result<GibbsTable, DimError> {
    let tm = transfer_matrix(class, d_s, trunc)?;
    let n = tm.states.len();
    // Stationary weights mu(state) = left * right, normalized per base
    // rectangle of the state's source chart.
    let mut weights: Vec<f64> = (0..n).map(|i| tm.left[i] * tm.h[i]).collect();
    let mut per_chart: HashMap<ChartId, f64> = HashMap::new();
    for (i, s) in tm.states.iter().enumerate() {
        *per_chart.entry(s.word.source()).or_insert(0.0) += weights[i];
    }
    for (i, s) in tm.states.iter().enumerate() {
        weights[i] /= per_chart[&s.word.source()];
    }

    // Aggregate over prefixes of every depth and measure the Gibbs ratio.
    let mut gibbs_constant = 1.0f64;
    let mut mu_rows = Vec::new();
    for depth in 1..=tm.states.first().map(|s| s.primes.len()).unwrap_or(1) {
        let mut prefix_mass: HashMap<Word, f64> = HashMap::new();
        for (i, s) in tm.states.iter().enumerate() {
            let mut w = s.primes[0].clone();
            for p in s.primes.iter().take(depth).skip(1) {
                w = w.concat(p);
            }
            *prefix_mass.entry(w).or_insert(0.0) += weights[i];
        }
        let mut rows: Vec<(Word, f64)> = prefix_mass.into_iter().collect();
        rows.sort_by_key(|(w, _)| w.to_string());
        for (w, mu) in rows {
            let width = class.get(&w).map(|e| e.p_width).unwrap_or(0.0);
            if width > 0.0 && mu > 0.0 {
                let ratio = mu / width.powf(d_s);
                gibbs_constant = gibbs_constant.max(ratio).max(1.0 / ratio);
            }
            mu_rows.push((w.to_string(), width, mu));
        }
    }
    Ok(GibbsTable {
        d_s,
        mu: mu_rows,
        gibbs_constant,
    })
}

/// Partial sums of the width series over the descendants of an element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSeries {
    pub s: f64,
    /// Sum per generation depth (descendants with that many extra letters
    /// of provenance), starting at the element itself.
    pub generation_sums: Vec<f64>,
    pub partial_sum: f64,
    /// Geometric extrapolation of the remainder from the deepest ratio.
    pub tail_estimate: f64,
    pub convergent: bool,
}

/// The width series `sum |P|^s` over stored descendants of `p_star`.
pub fn theta_series(class: &RClass, p_star: &Word, s: f64) -> ThetaSeries {
    let base_n = class.get(p_star).map(|e| e.n).unwrap_or(0);
    let mut by_gen: HashMap<usize, f64> = HashMap::new();
    for e in class.elements() {
        if p_contained(&e.word, p_star) {
            *by_gen.entry(e.n - base_n).or_insert(0.0) += e.p_width.powf(s);
        }
    }
    let max_gen = by_gen.keys().copied().max().unwrap_or(0);
    let generation_sums: Vec<f64> = (0..=max_gen)
        .map(|g| by_gen.get(&g).copied().unwrap_or(0.0))
        .collect();
    let partial_sum: f64 = generation_sums.iter().sum();
    let ratio = if generation_sums.len() >= 2 {
        let a = generation_sums[generation_sums.len() - 2];
        let b = generation_sums[generation_sums.len() - 1];
        if a > 0.0 {
            b / a
        } else {
            0.0
        }
    } else {
        0.0
    };
    let convergent = ratio < 1.0;
    let tail_estimate = if convergent && ratio > 0.0 {
        generation_sums.last().unwrap() * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    };
    ThetaSeries {
        s,
        generation_sums,
        partial_sum,
        tail_estimate,
        convergent,
    }
}

/// Weighted descendant sum `sum ||P'||` over the m-th generation, with
/// `||P|| = |P|^d kappa^r`, reported against `kappa^(m/2) ||P||`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedChildrenSum {
    pub sum: f64,
    pub base_norm: f64,
    pub bound_ratio: f64,
}

pub fn weighted_children_sum(
    class: &RClass,
    word: &Word,
    kappa: f64,
    d_minus: f64,
    m: usize,
) -> WeightedChildrenSum {
    class.get(word).expect("element stored");
    let norm = |w: &Word| -> f64 {
        let el = class.get(w).expect("descendant stored");
        let r = el.r.unwrap_or_else(|| class.prime_decompose(w).len());
        el.p_width.powf(d_minus) * kappa.powi(r as i32)
    };
    let base_norm = norm(word);
    let mut gen: Vec<Word> = vec![word.clone()];
    for _ in 0..m {
        let mut next = Vec::new();
        for w in &gen {
            for c in class.children(w) {
                next.push(c.word.clone());
            }
        }
        gen = next;
    }
    let sum: f64 = gen.iter().map(&norm).sum();
    WeightedChildrenSum {
        sum,
        base_norm,
        bound_ratio: sum / (kappa.powf(m as f64 / 2.0) * base_norm),
    }
}

/// Box-counting estimate of the transverse dimension of the stable slice:
/// cover the `y = base_y` section of the depth-`n` cylinder strips by boxes
/// across dyadic scales and fit the count slope.
pub fn box_count_dimension(class: &RClass, depth: usize, base_y: f64) -> f64 {
    let intervals: Vec<(f64, f64)> = class
        .elements()
        .iter()
        .filter(|e| e.n == depth && !e.word.contains_block())
        .map(|e| {
            let lo = e.map.domain.lower.eval(base_y);
            let hi = e.map.domain.upper.eval(base_y);
            (lo.min(hi), lo.max(hi))
        })
        .collect();
    let mut pts = Vec::new();
    for k in 2..=9 {
        let eps = (0.5f64).powi(k);
        let mut boxes = std::collections::BTreeSet::new();
        for &(lo, hi) in &intervals {
            let b0 = (lo / eps).floor() as i64;
            let b1 = (hi / eps).floor() as i64;
            for b in b0..=b1 {
                boxes.insert(b);
            }
        }
        if !boxes.is_empty() {
            pts.push(((1.0 / eps).ln(), (boxes.len() as f64).ln()));
        }
    }
    least_squares_slope(&pts)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Dimension estimate from the growth of generation sums restricted to one
/// base rectangle: the exponent where the per-generation ratio crosses 1.
pub fn theta_dimension(class: &RClass, root: ChartId) -> f64 {
    let root_word = Word::root(root);
    let ratio_at = |s: f64| -> f64 {
        let series = theta_series(class, &root_word, s);
        let g = &series.generation_sums;
        if g.len() < 3 {
            return 0.0;
        }
        let a = g[g.len() - 2];
        let b = g[g.len() - 1];
        if a > 0.0 {
            b / a
        } else {
            0.0
        }
    };
    let (mut lo, mut hi) = (0.05, 1.5);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ratio_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
