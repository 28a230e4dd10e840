//! The transversality relation gating parabolic composition, with its
//! hereditary closure, the separated/critically-related trichotomy, the
//! criticality search and the regularity test.

use crate::parabolic::{DisplacementQuad, TangencyCtx};
use crate::rclass::{p_contained, q_contained, Element, PairStatus, RClass};
use crate::word::Word;
use serde::{Deserialize, Serialize};

/// Raw corner conditions of a pair over an interval, evaluated from the
/// endpoint displacement quads plus the (certified) unit slope of the
/// displacement in `t`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BaseConditions {
    pub t1: bool,
    pub t2: bool,
    pub t3: bool,
}

impl BaseConditions {
    pub fn all(&self) -> bool {
        self.t1 && self.t2 && self.t3
    }
}

/// Predicate arithmetic of the corner conditions, separated from the class
/// so the displacement output of the fold module can be tested directly.
///
/// `quads` are displacement quads sampled over the interval (first entry at
/// `t_lo`, last at `t_hi`); monotonicity of the displacement in `t` makes
/// the endpoint samples the extremizers.
pub fn base_conditions(
    quads: &[DisplacementQuad],
    q0_width: f64,
    p1_width: f64,
    interval_len: f64,
    eta: f64,
) -> BaseConditions {
    let min_lr = quads.iter().fold(f64::INFINITY, |m, q| m.min(q.delta_lr));
    let max_r = quads.iter().fold(f64::NEG_INFINITY, |m, q| m.max(q.delta_r));
    let max_l = quads.iter().fold(f64::NEG_INFINITY, |m, q| m.max(q.delta_l));
    BaseConditions {
        t1: min_lr >= 2.0 * interval_len,
        t2: max_r >= 2.0 * q0_width.powf(1.0 - eta),
        t3: max_l >= 2.0 * p1_width.powf(1.0 - eta),
    }
}

/// Outcome of the criticality search for one side of an element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Transverse,
    /// Certified critical; carries the witness path of pieces whose
    /// screening failed.
    Critical(Vec<String>),
    /// The width floor truncated the decomposition search (treated as
    /// critical by callers).
    Undetermined,
}

impl Criticality {
    pub fn is_critical(&self) -> bool {
        !matches!(self, Criticality::Transverse)
    }
}

/// Per-element criticality flags at the class interval.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct ElementFlags {
    pub p_critical: bool,
    pub q_critical: bool,
    pub bicritical: bool,
}

/// Result of the regularity test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub beta: f64,
    pub width_bound: f64,
    pub bicritical_count: usize,
    /// Fattest bicritical element violating (or nearest to) the bound.
    pub worst: Option<(String, f64)>,
}

impl RClass {
    /// Displacement quads of a pair at the interval endpoints. The
    /// displacement is monotone in `t` with unit slope (certified by the
    /// fold normalization), so the endpoints extremize every corner value.
    /// Results are cached per pair.
    pub fn displacement_samples(&self, q0: &Element, p1: &Element) -> Vec<DisplacementQuad> {
        let key = (q0.word.clone(), p1.word.clone());
        if let Some(v) = self.quad_cache.lock().unwrap().get(&key) {
            return v.clone();
        }
        let iv = &self.interval;
        let mut quads = Vec::with_capacity(2);
        let mut ctx: Option<TangencyCtx> = None;
        for &t in &[iv.t_lo, iv.t_hi] {
            let Ok(fold) = self.family.fold_at(t) else {
                continue;
            };
            match ctx.as_mut() {
                Some(c) => c.set_fold(fold),
                None => ctx = Some(TangencyCtx::new(&q0.map, &fold, &p1.map)),
            }
            quads.push(ctx.as_ref().unwrap().displacement());
        }
        self.quad_cache.lock().unwrap().insert(key, quads.clone());
        quads
    }

    /// The raw corner conditions for a stored pair.
    pub fn base_transversality(&self, q0: &Word, p1: &Word) -> bool {
        let (Some(qe), Some(pe)) = (self.get(q0), self.get(p1)) else {
            return false;
        };
        if !qe.in_q_u || !pe.in_p_s {
            return false;
        }
        // -Cbar <= t, so the all-t condition fails outright on long
        // intervals, and the single-t conditions are unreachable for strips
        // wider than the tongue scale. These prechecks keep the hereditary
        // closure from evaluating displacements at fat ancestors.
        let t_hi = self.interval.t_hi;
        if 2.0 * self.interval.len() > t_hi {
            return false;
        }
        if 2.0 * qe.q_width.powf(1.0 - self.eta) > t_hi + pe.p_width
            || 2.0 * pe.p_width.powf(1.0 - self.eta) > t_hi + qe.q_width
        {
            return false;
        }
        let quads = self.displacement_samples(qe, pe);
        if quads.is_empty() {
            return false;
        }
        base_conditions(
            &quads,
            qe.q_width,
            pe.p_width,
            self.interval.len(),
            self.eta,
        )
        .all()
    }

    /// The transversality relation: the hereditary closure of the base
    /// relation over ancestor elements and ancestor intervals, memoized.
    pub fn is_transverse(&self, q0: &Word, p1: &Word) -> bool {
        if let Some(&v) = self.trans_cache.lock().unwrap().get(&(q0.clone(), p1.clone())) {
            return v;
        }
        let mut v = self.base_transversality(q0, p1);
        if !v {
            if let Some(qa) = q0.q_ancestor_step() {
                if self.get(&qa).map(|e| e.in_q_u).unwrap_or(false) {
                    v = self.is_transverse(&qa, p1);
                }
            }
        }
        if !v {
            if let Some(pa) = p1.p_ancestor_step() {
                if self.get(&pa).map(|e| e.in_p_s).unwrap_or(false) {
                    v = self.is_transverse(q0, &pa);
                }
            }
        }
        if !v {
            if let Some(parent) = &self.parent_class {
                if parent.contains(q0) && parent.contains(p1) {
                    v = parent.is_transverse(q0, p1);
                }
            }
        }
        self.trans_cache
            .lock()
            .unwrap()
            .insert((q0.clone(), p1.clone()), v);
        v
    }

    /// Certified separation: the folded image of `Q_0` misses `P_1` for all
    /// `t` in the interval (the displacement stays negative at the top
    /// corner, which is monotone increasing in `t`).
    pub fn is_separated(&self, q0: &Word, p1: &Word) -> bool {
        if let Some(&v) = self.sep_cache.lock().unwrap().get(&(q0.clone(), p1.clone())) {
            return v;
        }
        let v = match (self.get(q0), self.get(p1)) {
            (Some(qe), Some(pe)) => {
                let quads = self.displacement_samples(qe, pe);
                !quads.is_empty() && quads.iter().all(|q| q.delta_lr < 0.0)
            }
            _ => false,
        };
        self.sep_cache
            .lock()
            .unwrap()
            .insert((q0.clone(), p1.clone()), v);
        v
    }

    /// Trichotomy for a stored pair with `Q_0` in the unstable special
    /// rectangle and `P_1` in the stable one.
    pub fn pair_status(&self, q0: &Word, p1: &Word) -> PairStatus {
        if self.is_transverse(q0, p1) {
            PairStatus::Transverse
        } else if self.is_separated(q0, p1) {
            PairStatus::Separated
        } else {
            PairStatus::CriticallyRelated
        }
    }

    /// Criticality of the `Q`-side of an element: can the stable special
    /// rectangle be decomposed into pieces each transverse to or separated
    /// from `Q`? The search descends by children; a childless
    /// critically-related piece counts as a floor truncation when its
    /// children would fall below the class width floor, and as a certified
    /// obstruction otherwise.
    pub fn q_criticality(&self, word: &Word) -> Criticality {
        let Some(e) = self.get(word) else {
            return Criticality::Undetermined;
        };
        if !e.in_q_u {
            // Q contains the special rectangle: unconditionally critical.
            if q_contained(&self.q_u_word, word) {
                return Criticality::Critical(vec![word.to_string()]);
            }
            return Criticality::Transverse;
        }
        let root = self.p_s_word.clone();
        let mut path = Vec::new();
        self.screen(word, &root, true, &mut path)
    }

    /// Criticality of the `P`-side, symmetric through the decomposition of
    /// the unstable special rectangle.
    pub fn p_criticality(&self, word: &Word) -> Criticality {
        let Some(e) = self.get(word) else {
            return Criticality::Undetermined;
        };
        if !e.in_p_s {
            if p_contained(&self.p_s_word, word) {
                return Criticality::Critical(vec![word.to_string()]);
            }
            return Criticality::Transverse;
        }
        let root = self.q_u_word.clone();
        let mut path = Vec::new();
        self.screen(word, &root, false, &mut path)
    }

    /// Recursive screening of `piece` (and its children) against the fixed
    /// element. `q_side` selects which argument the fixed element plays.
    fn screen(&self, fixed: &Word, piece: &Word, q_side: bool, path: &mut Vec<String>) -> Criticality {
        let status = if q_side {
            self.pair_status(fixed, piece)
        } else {
            self.pair_status(piece, fixed)
        };
        match status {
            PairStatus::Transverse | PairStatus::Separated => Criticality::Transverse,
            PairStatus::CriticallyRelated => {
                let kids: Vec<&Element> = if q_side {
                    self.children(piece)
                        .into_iter()
                        .filter(|c| c.in_p_s)
                        .collect()
                } else {
                    self.q_children(piece)
                        .into_iter()
                        .filter(|c| c.in_q_u)
                        .collect()
                };
                path.push(piece.to_string());
                if kids.is_empty() {
                    let width = self
                        .get(piece)
                        .map(|e| if q_side { e.p_width } else { e.q_width })
                        .unwrap_or(0.0);
                    // A piece that could not have stored children only
                    // because of the width floor leaves the search
                    // inconclusive; a piece with room to decompose that has
                    // none is a certified obstruction.
                    let resolvable =
                        width * self.family.config.lambda_s >= self.budgets.width_floor;
                    let out = if resolvable {
                        Criticality::Critical(path.clone())
                    } else {
                        Criticality::Undetermined
                    };
                    path.pop();
                    return out;
                }
                let mut undetermined = false;
                for kid in kids {
                    match self.screen(fixed, &kid.word, q_side, path) {
                        Criticality::Transverse => {}
                        Criticality::Critical(p) => {
                            path.pop();
                            return Criticality::Critical(p);
                        }
                        Criticality::Undetermined => undetermined = true,
                    }
                }
                path.pop();
                if undetermined {
                    Criticality::Undetermined
                } else {
                    Criticality::Transverse
                }
            }
        }
    }

    /// Children on the image side: stored elements whose `Q`-parent is the
    /// given word.
    pub fn q_children(&self, word: &Word) -> Vec<&Element> {
        self.q_children_of
            .get(word)
            .map(|v| v.iter().filter_map(|w| self.get(w)).collect())
            .unwrap_or_default()
    }

    /// Criticality flags of one element.
    pub fn flags(&self, word: &Word) -> ElementFlags {
        let p = self.p_criticality(word).is_critical();
        let q = self.q_criticality(word).is_critical();
        ElementFlags {
            p_critical: p,
            q_critical: q,
            bicritical: p && q,
        }
    }

    /// The regularity test: every bicritical element must be thinner than
    /// `|I|^beta` on both sides.
    pub fn regularity_test(&self, beta: f64) -> RegularityReport {
        let bound = self.interval.len().powf(beta);
        let mut worst: Option<(String, f64)> = None;
        let mut count = 0usize;
        for e in self.elements() {
            // Only elements meeting both special rectangles can be
            // bicritical; everything else is transverse on one side.
            let p_touches = e.in_p_s || p_contained(&self.p_s_word, &e.word);
            let q_touches = e.in_q_u || q_contained(&self.q_u_word, &e.word);
            if !p_touches || !q_touches {
                continue;
            }
            let flags = self.flags(&e.word);
            if !flags.bicritical {
                continue;
            }
            count += 1;
            let fat = e.p_width.max(e.q_width);
            if worst.as_ref().map(|(_, w)| fat > *w).unwrap_or(true) {
                worst = Some((e.word.to_string(), fat));
            }
        }
        let regular = worst.as_ref().map(|(_, w)| *w < bound).unwrap_or(true);
        RegularityReport {
            regular,
            beta,
            width_bound: bound,
            bicritical_count: count,
            worst,
        }
    }
}
