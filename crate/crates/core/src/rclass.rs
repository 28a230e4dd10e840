//! The inductive classes of affine-like iterates over a parameter interval:
//! pure cylinders, closure under simple composition, transversality-gated
//! parabolic composition, parent/child bookkeeping and prime decomposition.

use crate::compose::simple_compose;
use crate::error::ClassError;
use crate::family::ModelFamily;
use crate::field::ScalarField2;
use crate::geom::ChartId;
use crate::map::ImplicitMap;
use crate::parabolic::{parabolic_compose, ParabolicConfig};
use crate::params::ParamInterval;
use crate::word::{Sign, Word};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Extension budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub n_max: usize,
    pub width_floor: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            n_max: 40,
            width_floor: 1e-9,
        }
    }
}

/// One iterate `(P, Q, n)` of the class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Element {
    pub word: Word,
    pub n: usize,
    pub map: ImplicitMap,
    pub p_width: f64,
    pub q_width: f64,
    /// `Q` contained in the special rectangle around the unstable tongue.
    pub in_q_u: bool,
    /// `P` contained in the special rectangle around the stable tongue.
    pub in_p_s: bool,
    /// Thinnest stored strict superset of `P` (filled after extension).
    pub parent: Option<Word>,
    /// Thinnest stored strict superset of `Q`.
    pub q_parent: Option<Word>,
    /// Prime-factor count (filled after extension).
    pub r: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairStatus {
    Transverse,
    Separated,
    CriticallyRelated,
}

/// Result of an extension run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtendReport {
    pub added_simple: usize,
    pub added_parabolic: usize,
    pub sweeps: usize,
    /// Elements whose compositions were cut off by the budgets.
    pub frontier: Vec<String>,
    pub exhausted: bool,
}

/// The class over one parameter interval, materialized along a chain of
/// ancestor classes.
pub struct RClass {
    pub family: ModelFamily,
    pub interval: Arc<ParamInterval>,
    pub parent_class: Option<Arc<RClass>>,
    pub budgets: Budgets,
    pub eta: f64,
    pub parabolic_cfg: ParabolicConfig,
    /// Special-rectangle words: deepest pure cylinders around the tongues.
    pub q_u_word: Word,
    pub p_s_word: Word,
    pub(crate) elements: Vec<Element>,
    pub(crate) index: HashMap<Word, usize>,
    pub(crate) children_of: HashMap<Word, Vec<Word>>,
    pub(crate) q_children_of: HashMap<Word, Vec<Word>>,
    pub(crate) trans_cache: Mutex<HashMap<(Word, Word), bool>>,
    pub(crate) sep_cache: Mutex<HashMap<(Word, Word), bool>>,
    pub(crate) quad_cache: Mutex<HashMap<(Word, Word), Vec<crate::parabolic::DisplacementQuad>>>,
}

impl RClass {
    /// The root class: all pure cylinders within budget, no parabolic
    /// elements (parabolic composition is never allowed at the root scale).
    pub fn init(
        family: ModelFamily,
        interval: Arc<ParamInterval>,
        budgets: Budgets,
        eta: f64,
    ) -> Result<RClass, ClassError> {
        let special = family.special_rectangles();
        let a_u = family.a_u;
        let a_s = family.a_s;
        let mut class = RClass {
            q_u_word: Word::Letters(vec![a_u.0; special.n_u + 1]),
            p_s_word: Word::Letters(vec![a_s.0; special.n_s + 1]),
            family,
            interval,
            parent_class: None,
            budgets,
            eta,
            parabolic_cfg: ParabolicConfig::default(),
            elements: Vec::new(),
            index: HashMap::new(),
            children_of: HashMap::new(),
            q_children_of: HashMap::new(),
            trans_cache: Mutex::new(HashMap::new()),
            sep_cache: Mutex::new(HashMap::new()),
            quad_cache: Mutex::new(HashMap::new()),
        };

        // Length-0 elements: the chart rectangles with the identity map.
        for chart in class.family.alphabet() {
            let rect = class.family.chart_rect;
            let a = ScalarField2::affine(rect, 0.0, 0.0, 1.0);
            let b = ScalarField2::affine(rect, 0.0, 1.0, 0.0);
            let map = ImplicitMap::from_fields(a, b, chart, chart)
                .expect("identity representation");
            class.insert_element(Word::root(chart), map);
        }

        // Pure cylinders by appending letters, breadth-first. Compositions
        // within one generation run in parallel; the ordered collect plus
        // the sorted sequential insertion keep the class identical across
        // worker counts.
        let branch_maps: HashMap<(ChartId, ChartId), ImplicitMap> = class
            .family
            .transitions()
            .into_iter()
            .map(|(a, b)| ((a, b), class.family.transition_map(a, b).expect("transition")))
            .collect();
        let mut frontier: Vec<usize> = (0..class.elements.len()).collect();
        while !frontier.is_empty() {
            let mut candidates: Vec<(usize, ChartId, ChartId)> = Vec::new();
            for &i in &frontier {
                let e = &class.elements[i];
                if e.n + 1 > class.budgets.n_max {
                    continue;
                }
                for (a, b) in class.family.transitions() {
                    if a == e.word.target() {
                        candidates.push((i, a, b));
                    }
                }
            }
            let elements = &class.elements;
            let mut batch: Vec<(Word, ImplicitMap)> = candidates
                .par_iter()
                .filter_map(|&(i, a, b)| {
                    let e = &elements[i];
                    let branch = &branch_maps[&(a, b)];
                    let map = if e.n == 0 {
                        branch.clone()
                    } else {
                        simple_compose(&e.map, branch).ok()?
                    };
                    Some((e.word.concat(&Word::letter(a, b)), map))
                })
                .collect();
            let n0 = class.family.config.fold.n0;
            batch.sort_by_key(|(w, _)| (w.n(n0), w.to_string()));
            let mut next = Vec::new();
            for (word, map) in batch {
                if class.index.contains_key(&word) {
                    continue;
                }
                let (p, _) = widths_of(&map);
                if p < class.budgets.width_floor {
                    continue;
                }
                next.push(class.insert_element(word, map));
            }
            frontier = next;
        }
        class.rebuild_links();
        Ok(class)
    }

    /// Child class along the interval tree: same family and budgets, pure
    /// cylinders regenerated, ancestor chain linked for the hereditary
    /// transversality closure.
    pub fn descend(parent: &Arc<RClass>, interval: Arc<ParamInterval>) -> RClass {
        let mut class = RClass::init(
            parent.family.clone(),
            interval,
            parent.budgets,
            parent.eta,
        )
        .expect("descend from a valid class");
        class.parabolic_cfg = parent.parabolic_cfg;
        class.parent_class = Some(parent.clone());
        class
    }

    /// Insert a prebuilt element (fixture hook; the canonical constructors
    /// are `init`, `extend`).
    pub fn insert_raw(&mut self, word: Word, map: ImplicitMap) {
        if !self.index.contains_key(&word) {
            self.insert_element(word, map);
            self.rebuild_links();
        }
    }

    /// Rebuild the map of a word from its provenance: compose letters along
    /// itineraries and resolve parabolic blocks through the fold at the
    /// interval's reference parameter.
    pub fn materialize_word(&self, word: &Word) -> Result<ImplicitMap, ClassError> {
        match word {
            Word::Letters(v) => {
                if v.len() == 1 {
                    let rect = self.family.chart_rect;
                    let a = ScalarField2::affine(rect, 0.0, 0.0, 1.0);
                    let b = ScalarField2::affine(rect, 0.0, 1.0, 0.0);
                    return ImplicitMap::from_fields(a, b, ChartId(v[0]), ChartId(v[0]))
                        .map_err(|e| ClassError::UnknownElement(e.to_string()));
                }
                let ids: Vec<ChartId> = v.iter().map(|&c| ChartId(c)).collect();
                self.family
                    .itinerary_map(&ids)
                    .map_err(|e| ClassError::UnknownElement(e.to_string()))
            }
            Word::Block { q0, sign, p1 } => {
                let f0 = self.materialize_word(q0)?;
                let f1 = self.materialize_word(p1)?;
                let fold = self
                    .family
                    .fold_at(self.interval.mid())
                    .map_err(|e| ClassError::UnknownElement(e.to_string()))?;
                let pair = parabolic_compose(&f0, &fold, &f1, &self.parabolic_cfg)
                    .map_err(|e| ClassError::UnknownElement(e.to_string()))?;
                Ok(match sign {
                    Sign::Plus => pair.plus,
                    Sign::Minus => pair.minus,
                })
            }
        }
    }

    /// Rebuild a class from dumped words (resume path): every word is
    /// rematerialized and inserted in the deterministic order.
    pub fn from_words(
        family: ModelFamily,
        interval: Arc<ParamInterval>,
        budgets: Budgets,
        eta: f64,
        words: &[Word],
    ) -> Result<RClass, ClassError> {
        let mut class = RClass::init(family, interval, budgets, eta)?;
        let n0 = class.family.config.fold.n0;
        let mut sorted: Vec<&Word> = words.iter().collect();
        sorted.sort_by_key(|w| (w.n(n0), w.to_string()));
        for word in sorted {
            if class.contains(word) {
                continue;
            }
            let map = class.materialize_word(word)?;
            class.insert_element(word.clone(), map);
        }
        class.rebuild_links();
        Ok(class)
    }

    fn insert_element(&mut self, word: Word, map: ImplicitMap) -> usize {
        let (p_width, q_width) = widths_of(&map);
        let n = word.n(self.family.config.fold.n0);
        let in_q_u = q_contained(&word, &self.q_u_word);
        let in_p_s = p_contained(&word, &self.p_s_word);
        let idx = self.elements.len();
        self.index.insert(word.clone(), idx);
        self.elements.push(Element {
            word,
            n,
            map,
            p_width,
            q_width,
            in_q_u,
            in_p_s,
            parent: None,
            q_parent: None,
            r: None,
        });
        idx
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, word: &Word) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &Word) -> Option<&Element> {
        self.index.get(word).map(|&i| &self.elements[i])
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Deterministic iteration order: breadth-first by length, then by word.
    pub fn sorted_words(&self) -> Vec<Word> {
        let mut v: Vec<(usize, String, Word)> = self
            .elements
            .iter()
            .map(|e| (e.n, e.word.to_string(), e.word.clone()))
            .collect();
        v.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        v.into_iter().map(|(_, _, w)| w).collect()
    }

    /// Extend to the fixed point of simple composition and allowed parabolic
    /// composition under the budgets.
    pub fn extend(&mut self) -> ExtendReport {
        let mut report = ExtendReport {
            added_simple: 0,
            added_parabolic: 0,
            sweeps: 0,
            frontier: Vec::new(),
            exhausted: false,
        };
        loop {
            report.sweeps += 1;
            let added = self.parabolic_sweep(&mut report) + self.simple_sweep(&mut report);
            if added == 0 {
                break;
            }
            if report.sweeps > 64 {
                // The closure did not reach its fixed point within the
                // sweep limit; the frontier marks what was still moving.
                report.exhausted = true;
                break;
            }
        }
        self.rebuild_links();
        report.frontier.sort();
        report.frontier.dedup();
        report
    }

    /// Add both branches of every allowed parabolic composition.
    fn parabolic_sweep(&mut self, report: &mut ExtendReport) -> usize {
        let t_hi = self.interval.t_hi;
        let t_ref = self.interval.mid();
        // The tangency normalization bounds -Cbar by t, so the all-t corner
        // condition is unsatisfiable when the interval is too long; and the
        // single-t conditions force the strips well below the scale
        // (t_hi / 2)^(1/(1-eta)).
        if 2.0 * self.interval.len() > t_hi {
            return 0;
        }
        let width_cap = 2.0 * (0.5 * t_hi).powf(1.0 / (1.0 - self.eta));
        let q_side: Vec<usize> = (0..self.elements.len())
            .filter(|&i| self.elements[i].in_q_u && self.elements[i].q_width <= width_cap)
            .collect();
        let p_side: Vec<usize> = (0..self.elements.len())
            .filter(|&i| self.elements[i].in_p_s && self.elements[i].p_width <= width_cap)
            .collect();
        let mut batch: Vec<(Word, ImplicitMap)> = Vec::new();
        let mut frontier_hits: Vec<String> = Vec::new();
        for &qi in &q_side {
            for &pi in &p_side {
                let (q_el, p_el) = (&self.elements[qi], &self.elements[pi]);
                let n_new = q_el.n + p_el.n + self.family.config.fold.n0;
                // Width-law pruning: the branch width is of the order
                // |P_0||P_1| delta^-1/2 and delta <= t_hi.
                let width_bound = 10.0 * q_el.p_width * p_el.p_width / t_hi.sqrt();
                if width_bound < self.budgets.width_floor {
                    continue;
                }
                if self.pair_status(&q_el.word, &p_el.word) != PairStatus::Transverse {
                    continue;
                }
                if n_new > self.budgets.n_max {
                    frontier_hits.push(q_el.word.to_string());
                    continue;
                }
                let words = [
                    Word::block(q_el.word.clone(), Sign::Plus, p_el.word.clone()),
                    Word::block(q_el.word.clone(), Sign::Minus, p_el.word.clone()),
                ];
                if words.iter().all(|w| self.index.contains_key(w)) {
                    continue;
                }
                let fold = match self.family.fold_at(t_ref) {
                    Ok(f) => f,
                    Err(_) => continue,
                };
                let pair = match parabolic_compose(&q_el.map, &fold, &p_el.map, &self.parabolic_cfg)
                {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                for (word, map) in words.into_iter().zip([pair.plus, pair.minus]) {
                    if !self.index.contains_key(&word) {
                        batch.push((word, map));
                    }
                }
            }
        }
        let n0 = self.family.config.fold.n0;
        batch.sort_by_key(|(w, _)| (w.n(n0), w.to_string()));
        let mut added = 0;
        for (word, map) in batch {
            if self.index.contains_key(&word) {
                continue;
            }
            let (p, _) = widths_of(&map);
            if p < self.budgets.width_floor {
                frontier_hits.push(word.to_string());
                continue;
            }
            self.insert_element(word, map);
            added += 1;
        }
        report.added_parabolic += added;
        report.frontier.extend(frontier_hits);
        added
    }

    /// Close under simple composition of stored elements. Pairs are
    /// enumerated through width buckets so the sweep stays near-linear in
    /// the number of admissible compositions.
    fn simple_sweep(&mut self, report: &mut ExtendReport) -> usize {
        let floor = self.budgets.width_floor;
        let mut batch: Vec<(Word, ImplicitMap)> = Vec::new();
        // Bucket indices by n; track the max P-width per bucket for pruning.
        let mut buckets: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, e) in self.elements.iter().enumerate() {
            if e.n > 0 {
                buckets.entry(e.n).or_default().push(i);
            }
        }
        let mut bucket_max: HashMap<usize, f64> = HashMap::new();
        for (&n, idxs) in &buckets {
            let m = idxs
                .iter()
                .fold(0.0f64, |m, &i| m.max(self.elements[i].p_width));
            bucket_max.insert(n, m);
        }
        let mut ns: Vec<usize> = buckets.keys().copied().collect();
        ns.sort_unstable();
        for &na in &ns {
            for &nb in &ns {
                if na + nb > self.budgets.n_max {
                    continue;
                }
                if 2.0 * bucket_max[&na] * bucket_max[&nb] < floor {
                    continue;
                }
                for &i in &buckets[&na] {
                    let (pi_w, ti) = {
                        let e = &self.elements[i];
                        (e.p_width, e.word.target())
                    };
                    for &j in &buckets[&nb] {
                        let e2 = &self.elements[j];
                        // Widths compose near-multiplicatively with measured
                        // constants close to 1 on the model maps; factor 2
                        // keeps the speculative composes rare while the
                        // post-compose width check stays exact.
                        if e2.word.source() != ti || 2.0 * pi_w * e2.p_width < floor {
                            continue;
                        }
                        let word = self.elements[i].word.concat(&e2.word);
                        if self.index.contains_key(&word) {
                            continue;
                        }
                        match simple_compose(&self.elements[i].map, &self.elements[j].map) {
                            Ok(map) => batch.push((word, map)),
                            Err(_) => continue,
                        }
                    }
                }
            }
        }
        let n0 = self.family.config.fold.n0;
        batch.sort_by_key(|(w, _)| (w.n(n0), w.to_string()));
        batch.dedup_by(|a, b| a.0 == b.0);
        let mut added = 0;
        for (word, map) in batch {
            if self.index.contains_key(&word) {
                continue;
            }
            let (p, _) = widths_of(&map);
            if p < floor {
                continue;
            }
            self.insert_element(word, map);
            added += 1;
        }
        report.added_simple += added;
        added
    }

    /// Recompute parent links and the children maps.
    pub fn rebuild_links(&mut self) {
        let mut parents: Vec<(Option<Word>, Option<Word>)> =
            Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            let parent = e
                .word
                .p_ancestors()
                .into_iter()
                .find(|w| self.index.contains_key(w));
            let q_parent = e
                .word
                .q_ancestors()
                .into_iter()
                .find(|w| self.index.contains_key(w));
            parents.push((parent, q_parent));
        }
        self.children_of.clear();
        self.q_children_of.clear();
        for (e, (parent, q_parent)) in self.elements.iter_mut().zip(parents) {
            e.parent = parent.clone();
            e.q_parent = q_parent.clone();
            if let Some(p) = parent {
                self.children_of.entry(p).or_default().push(e.word.clone());
            }
            if let Some(p) = q_parent {
                self.q_children_of
                    .entry(p)
                    .or_default()
                    .push(e.word.clone());
            }
        }
        for kids in self.children_of.values_mut().chain(self.q_children_of.values_mut()) {
            kids.sort_by_key(|w| (w.n(self.family.config.fold.n0), w.to_string()));
        }
        // Prime factor counts, memoized bottom-up over the deterministic
        // order so the recursion always hits the cache.
        let mut r_memo: HashMap<Word, usize> = HashMap::new();
        for w in self.sorted_words() {
            let r = self.prime_decompose(&w).len();
            r_memo.insert(w, r);
        }
        for e in &mut self.elements {
            e.r = r_memo.get(&e.word).copied();
        }
    }

    /// Children of an element: stored elements whose `P`-parent is it.
    pub fn children(&self, word: &Word) -> Vec<&Element> {
        self.children_of
            .get(word)
            .map(|v| v.iter().filter_map(|w| self.get(w)).collect())
            .unwrap_or_default()
    }

    /// Simple children have `n = parent.n + 1`.
    pub fn children_partitioned(&self, word: &Word) -> (Vec<&Element>, Vec<&Element>) {
        let n_parent = self.get(word).map(|e| e.n).unwrap_or(0);
        self.children(word)
            .into_iter()
            .partition(|c| c.n == n_parent + 1)
    }

    /// Witness of a non-simple child per the structure of parabolic blocks:
    /// the `p1`-side of its innermost left block.
    pub fn nonsimple_witness(word: &Word) -> Option<Word> {
        match word {
            Word::Letters(_) => None,
            Word::Block { p1, .. } => Some((**p1).clone()),
        }
    }

    /// Unique factorization into primes of the class (elements that are not
    /// simple compositions of shorter stored elements).
    pub fn prime_decompose(&self, word: &Word) -> Vec<Word> {
        if word.is_root() {
            return Vec::new();
        }
        // Pure itineraries always split fully into single letters.
        if let Word::Letters(v) = word {
            return v
                .windows(2)
                .map(|w| Word::Letters(w.to_vec()))
                .collect();
        }
        let mut valid: Vec<(Word, Word)> = word
            .splits()
            .into_iter()
            .filter(|(a, b)| self.contains(a) && self.contains(b))
            .collect();
        if valid.is_empty() {
            return vec![word.clone()];
        }
        let n0 = self.family.config.fold.n0;
        valid.sort_by_key(|(a, _)| (a.n(n0), a.to_string()));
        let (left, right) = valid.swap_remove(0);
        let mut out = self.prime_decompose(&left);
        out.extend(self.prime_decompose(&right));
        out
    }

    /// All stored primes, in deterministic order.
    pub fn primes(&self) -> Vec<Word> {
        self.sorted_words()
            .into_iter()
            .filter(|w| !w.is_root() && self.prime_decompose(w).len() == 1)
            .collect()
    }
}

/// Sup-norm widths with a fast path for constant coefficient fields.
pub fn widths_of(map: &ImplicitMap) -> (f64, f64) {
    let ax = map.a.deriv_x();
    let by = map.b.deriv_y();
    let p = if ax.degrees() == (0, 0) {
        ax.coeffs[0].abs()
    } else {
        ax.max_abs()
    };
    let q = if by.degrees() == (0, 0) {
        by.coeffs[0].abs()
    } else {
        by.max_abs()
    };
    (p, q)
}

/// `Q(word)` contained in `Q(anc)`.
pub fn q_contained(word: &Word, anc: &Word) -> bool {
    if word == anc {
        return true;
    }
    if let (Word::Letters(v), Word::Letters(a)) = (word, anc) {
        return v.len() >= a.len() && v[v.len() - a.len()..] == a[..];
    }
    word.q_ancestors().contains(anc)
}

/// `P(word)` contained in `P(anc)`.
pub fn p_contained(word: &Word, anc: &Word) -> bool {
    if word == anc {
        return true;
    }
    if let (Word::Letters(v), Word::Letters(a)) = (word, anc) {
        return v.len() >= a.len() && v[..a.len()] == a[..];
    }
    word.p_ancestors().contains(anc)
}
