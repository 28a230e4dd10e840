//! Forests, products of forests and the concave-hereditary envelope — the
//! order-theoretic model behind the transversality relation.

use crate::error::ParamError;
use std::collections::BTreeSet;

/// A finite forest given by parent links: `parent[i]` is the node above `i`
/// (`None` at roots). Order convention: `x >= y` when `x` lies on the chain
/// from `y` up to its root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forest {
    pub parent: Vec<Option<usize>>,
}

impl Forest {
    pub fn new(parent: Vec<Option<usize>>) -> Result<Forest, ParamError> {
        let f = Forest { parent };
        for i in 0..f.parent.len() {
            // The up-set must be a finite chain: follow parents, fail on a
            // cycle or an out-of-range link.
            let mut seen = vec![false; f.parent.len()];
            let mut cur = i;
            loop {
                if seen[cur] {
                    return Err(ParamError::NotAForest(i));
                }
                seen[cur] = true;
                match f.parent[cur] {
                    Some(p) if p < f.parent.len() => cur = p,
                    Some(_) => return Err(ParamError::NotAForest(i)),
                    None => break,
                }
            }
        }
        Ok(f)
    }

    /// Chain from a node to its root, inclusive.
    pub fn up_set(&self, mut x: usize) -> Vec<usize> {
        let mut v = vec![x];
        while let Some(p) = self.parent[x] {
            v.push(p);
            x = p;
        }
        v
    }

    pub fn le(&self, x: usize, y: usize) -> bool {
        self.up_set(x).contains(&y)
    }

    pub fn comparable(&self, x: usize, y: usize) -> bool {
        self.le(x, y) || self.le(y, x)
    }

    pub fn join(&self, x: usize, y: usize) -> Option<usize> {
        if self.le(x, y) {
            Some(y)
        } else if self.le(y, x) {
            Some(x)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }
}

pub type Point = Vec<usize>;

/// Product of forests with set operations on tuples.
#[derive(Debug, Clone)]
pub struct ForestProduct {
    pub factors: Vec<Forest>,
}

impl ForestProduct {
    pub fn new(factors: Vec<Forest>) -> Self {
        ForestProduct { factors }
    }

    pub fn dims(&self) -> usize {
        self.factors.len()
    }

    pub fn le(&self, x: &Point, y: &Point) -> bool {
        x.iter()
            .zip(y)
            .zip(&self.factors)
            .all(|((&a, &b), f)| f.le(a, b))
    }

    /// Coordinate-wise comparability.
    pub fn c_comparable(&self, x: &Point, y: &Point) -> bool {
        x.iter()
            .zip(y)
            .zip(&self.factors)
            .all(|((&a, &b), f)| f.comparable(a, b))
    }

    pub fn join(&self, x: &Point, y: &Point) -> Option<Point> {
        x.iter()
            .zip(y)
            .zip(&self.factors)
            .map(|((&a, &b), f)| f.join(a, b))
            .collect()
    }

    /// All points of the product (for brute-force checks on small fixtures).
    pub fn all_points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = vec![Vec::new()];
        for f in &self.factors {
            let mut next = Vec::with_capacity(pts.len() * f.len());
            for p in &pts {
                for i in 0..f.len() {
                    let mut q = p.clone();
                    q.push(i);
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }

    /// Smallest concave hereditary superset, by fixed-point closure:
    /// alternately add joins of c-comparable pairs and down-sets.
    pub fn brute_force_envelope(&self, set: &BTreeSet<Point>) -> BTreeSet<Point> {
        let universe = self.all_points();
        let mut cur = set.clone();
        loop {
            let mut next = cur.clone();
            // Hereditary closure.
            for u in &universe {
                if !next.contains(u) && cur.iter().any(|x| self.le(u, x)) {
                    next.insert(u.clone());
                }
            }
            // Concave closure.
            let items: Vec<Point> = next.iter().cloned().collect();
            for (i, x) in items.iter().enumerate() {
                for y in items.iter().skip(i + 1) {
                    if self.c_comparable(x, y) {
                        if let Some(j) = self.join(x, y) {
                            next.insert(j);
                        }
                    }
                }
            }
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    /// The two-factor construction: joins of c-comparable pairs, then the
    /// down-closure. Equals the envelope when `dims() == 2`.
    pub fn ch_envelope_two_factors(&self, set: &BTreeSet<Point>) -> BTreeSet<Point> {
        assert_eq!(self.dims(), 2, "the closed form applies to two factors");
        let mut joins: BTreeSet<Point> = set.clone();
        let items: Vec<Point> = set.iter().cloned().collect();
        for (i, x) in items.iter().enumerate() {
            for y in items.iter().skip(i) {
                let _ = i;
                if self.c_comparable(x, y) {
                    if let Some(j) = self.join(x, y) {
                        joins.insert(j);
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        for u in self.all_points() {
            if joins.iter().any(|x| self.le(&u, x)) {
                out.insert(u);
            }
        }
        out
    }
}

/// Outcome of the three-factor counterexample constructions.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    /// Example 1: the extra point lies in the envelope but is not dominated
    /// by any join of a c-comparable pair, so the two-factor recipe fails.
    pub recipe_sufficient_for_three: bool,
    pub extra_point_in_envelope: bool,
    /// Example 2: the envelope splits into the three disjoint down-sets.
    pub envelope_is_three_down_sets: bool,
}

/// Build and verify the two structural examples with three factors.
pub fn ch_counterexamples() -> CounterexampleReport {
    // Example 1: chains x1 >= y1 >= z1 in the first factor; trees with a
    // root covering two incomparable children in the others.
    // Factor 1: 0 <- 1 <- 2 (chain, 0 is the root).
    let f1 = Forest::new(vec![None, Some(0), Some(1)]).unwrap();
    // Factor 2: root y2 = 0 with children x2 = 1, z2 = 2.
    let f2 = Forest::new(vec![None, Some(0), Some(0)]).unwrap();
    // Factor 3: root z3 = 0 with children x3 = 1, y3 = 2.
    let f3 = Forest::new(vec![None, Some(0), Some(0)]).unwrap();
    let prod = ForestProduct::new(vec![f1, f2, f3]);
    let x = vec![0usize, 1, 1]; // (x1, x2, x3)
    let y = vec![1usize, 0, 2]; // (y1, y2, y3)
    let z = vec![2usize, 2, 0]; // (z1, z2, z3)
    let a: BTreeSet<Point> = [x.clone(), y.clone(), z.clone()].into_iter().collect();
    let env = prod.brute_force_envelope(&a);
    // w = x v (y v z) = (x1, y2, z3).
    let w = vec![0usize, 0, 0];
    let extra_point_in_envelope = env.contains(&w);

    // Joins of c-comparable pairs of A.
    let mut a1: BTreeSet<Point> = a.clone();
    let items: Vec<Point> = a.iter().cloned().collect();
    for (i, p) in items.iter().enumerate() {
        for q in items.iter().skip(i + 1) {
            if prod.c_comparable(p, q) {
                if let Some(j) = prod.join(p, q) {
                    a1.insert(j);
                }
            }
        }
    }
    let recipe_sufficient_for_three = a1.iter().any(|u| prod.le(&w, u));

    // Example 2: every factor is a root with two incomparable children and
    // the three points sit at mutually incomparable positions.
    let g1 = Forest::new(vec![None, Some(0), Some(0)]).unwrap(); // root x1
    let g2 = Forest::new(vec![None, Some(0), Some(0)]).unwrap(); // root y2
    let g3 = Forest::new(vec![None, Some(0), Some(0)]).unwrap(); // root z3
    let prod2 = ForestProduct::new(vec![g1, g2, g3]);
    let x2 = vec![0usize, 1, 1];
    let y2 = vec![1usize, 0, 2];
    let z2 = vec![2usize, 2, 0];
    let a2: BTreeSet<Point> = [x2.clone(), y2.clone(), z2.clone()].into_iter().collect();
    let env2 = prod2.brute_force_envelope(&a2);
    let mut union = BTreeSet::new();
    for u in prod2.all_points() {
        if prod2.le(&u, &x2) || prod2.le(&u, &y2) || prod2.le(&u, &z2) {
            union.insert(u);
        }
    }
    let envelope_is_three_down_sets = env2 == union;

    CounterexampleReport {
        recipe_sufficient_for_three,
        extra_point_in_envelope,
        envelope_is_three_down_sets,
    }
}

/// Random forest with `n` nodes (each node's parent drawn among earlier
/// nodes or none).
pub fn random_forest(rng: &mut impl rand::Rng, n: usize) -> Forest {
    let parent = (0..n)
        .map(|i| {
            if i == 0 || rng.random_bool(0.3) {
                None
            } else {
                Some(rng.random_range(0..i))
            }
        })
        .collect();
    Forest::new(parent).expect("construction is acyclic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn forest_axioms() {
        let f = Forest::new(vec![None, Some(0), Some(0), Some(1)]).unwrap();
        assert_eq!(f.up_set(3), vec![3, 1, 0]);
        assert!(f.le(3, 0) && !f.le(0, 3));
        assert!(f.comparable(3, 1) && !f.comparable(2, 3));
        assert_eq!(f.join(3, 1), Some(1));
        // A cycle is rejected.
        assert!(Forest::new(vec![Some(1), Some(0)]).is_err());
    }

    #[test]
    fn empty_set_has_empty_envelope() {
        let f1 = Forest::new(vec![None, Some(0)]).unwrap();
        let f2 = Forest::new(vec![None, Some(0)]).unwrap();
        let prod = ForestProduct::new(vec![f1, f2]);
        let empty = BTreeSet::new();
        assert!(prod.ch_envelope_two_factors(&empty).is_empty());
        assert!(prod.brute_force_envelope(&empty).is_empty());
    }

    #[test]
    fn antichain_pair_generates_all_four() {
        // Chains a1 > a2 and b1 > b2; A = {(a2, b1), (a1, b2)} is
        // c-comparable, and the envelope is the full 2x2 square.
        let f1 = Forest::new(vec![None, Some(0)]).unwrap();
        let f2 = Forest::new(vec![None, Some(0)]).unwrap();
        let prod = ForestProduct::new(vec![f1, f2]);
        let a: BTreeSet<Point> = [vec![1, 0], vec![0, 1]].into_iter().collect();
        let env = prod.ch_envelope_two_factors(&a);
        assert_eq!(env.len(), 4);
        assert_eq!(env, prod.brute_force_envelope(&a));
    }

    #[test]
    fn singleton_is_its_down_set() {
        let f1 = Forest::new(vec![None, Some(0)]).unwrap();
        let f2 = Forest::new(vec![None, Some(0)]).unwrap();
        let prod = ForestProduct::new(vec![f1, f2]);
        let a: BTreeSet<Point> = [vec![1, 1]].into_iter().collect();
        let env = prod.ch_envelope_two_factors(&a);
        assert_eq!(env, [vec![1, 1]].into_iter().collect());
    }

    #[test]
    fn two_factor_formula_equals_brute_force_randomized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20250808);
        for _ in 0..1000 {
            let n1 = rng.random_range(2..6);
            let n2 = rng.random_range(2..6);
            let f1 = random_forest(&mut rng, n1);
            let f2 = random_forest(&mut rng, n2);
            let prod = ForestProduct::new(vec![f1, f2]);
            let universe = prod.all_points();
            let mut a = BTreeSet::new();
            let k = rng.random_range(0..5usize);
            for _ in 0..k {
                a.insert(universe[rng.random_range(0..universe.len())].clone());
            }
            assert_eq!(
                prod.ch_envelope_two_factors(&a),
                prod.brute_force_envelope(&a)
            );
        }
    }

    #[test]
    fn three_factor_examples() {
        let rep = ch_counterexamples();
        assert!(rep.extra_point_in_envelope);
        assert!(!rep.recipe_sufficient_for_three);
        assert!(rep.envelope_is_three_down_sets);
    }
}
