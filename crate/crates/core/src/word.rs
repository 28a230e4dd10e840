//! Canonical provenance words for class elements.
//!
//! An element is identified by a word: either a pure itinerary (chart
//! vertices) or a parabolic block `[q0 s p1]` with sign `s`. Simple
//! composition concatenates; a block absorbs left context into its `q0` side
//! and right context into its `p1` side, so each element has exactly one
//! canonical word. The different composition routes that produce the same
//! rectangle pair normalize to the same word.

use crate::geom::ChartId;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_char(&self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Word {
    /// Chart vertices `a_0 ... a_n`; `n` transitions (possibly 0).
    Letters(Vec<u8>),
    /// Parabolic block: both branches of `F(p1) o G o F(q0)` share the word
    /// shape and differ by the sign.
    Block {
        q0: Box<Word>,
        sign: Sign,
        p1: Box<Word>,
    },
}

impl Word {
    pub fn root(chart: ChartId) -> Word {
        Word::Letters(vec![chart.0])
    }

    pub fn letter(a: ChartId, b: ChartId) -> Word {
        Word::Letters(vec![a.0, b.0])
    }

    pub fn block(q0: Word, sign: Sign, p1: Word) -> Word {
        Word::Block {
            q0: Box::new(q0),
            sign,
            p1: Box::new(p1),
        }
    }

    /// Iteration length; a block contributes the `n0` excursion steps.
    pub fn n(&self, n0: usize) -> usize {
        match self {
            Word::Letters(v) => v.len() - 1,
            Word::Block { q0, p1, .. } => q0.n(n0) + p1.n(n0) + n0,
        }
    }

    pub fn source(&self) -> ChartId {
        match self {
            Word::Letters(v) => ChartId(v[0]),
            Word::Block { q0, .. } => q0.source(),
        }
    }

    pub fn target(&self) -> ChartId {
        match self {
            Word::Letters(v) => ChartId(*v.last().unwrap()),
            Word::Block { p1, .. } => p1.target(),
        }
    }

    pub fn is_root(&self) -> bool {
        matches!(self, Word::Letters(v) if v.len() == 1)
    }

    pub fn contains_block(&self) -> bool {
        matches!(self, Word::Block { .. })
    }

    /// Canonical concatenation (simple composition of words). The target of
    /// `self` must equal the source of `other`.
    pub fn concat(&self, other: &Word) -> Word {
        debug_assert_eq!(self.target(), other.source());
        match other {
            Word::Letters(vo) => {
                if vo.len() == 1 {
                    return self.clone();
                }
                match self {
                    Word::Letters(vs) => {
                        if vs.len() == 1 {
                            return other.clone();
                        }
                        let mut v = vs.clone();
                        v.extend_from_slice(&vo[1..]);
                        Word::Letters(v)
                    }
                    Word::Block { q0, sign, p1 } => Word::Block {
                        q0: q0.clone(),
                        sign: *sign,
                        p1: Box::new(p1.concat(other)),
                    },
                }
            }
            Word::Block { q0, sign, p1 } => Word::Block {
                q0: Box::new(self.concat(q0)),
                sign: *sign,
                p1: p1.clone(),
            },
        }
    }

    /// One step up the containment chain of the domain strips: the next
    /// larger word whose `P` contains this one's.
    pub fn p_ancestor_step(&self) -> Option<Word> {
        match self {
            Word::Letters(v) => {
                if v.len() <= 1 {
                    None
                } else {
                    Some(Word::Letters(v[..v.len() - 1].to_vec()))
                }
            }
            Word::Block { q0, sign, p1 } => match p1.p_ancestor_step() {
                Some(p1_up) if !p1_up.is_root() => Some(Word::Block {
                    q0: q0.clone(),
                    sign: *sign,
                    p1: Box::new(p1_up),
                }),
                _ => Some((**q0).clone()),
            },
        }
    }

    /// One step up the containment chain of the image strips.
    pub fn q_ancestor_step(&self) -> Option<Word> {
        match self {
            Word::Letters(v) => {
                if v.len() <= 1 {
                    None
                } else {
                    Some(Word::Letters(v[1..].to_vec()))
                }
            }
            Word::Block { q0, sign, p1 } => match q0.q_ancestor_step() {
                Some(q0_up) if !q0_up.is_root() => Some(Word::Block {
                    q0: Box::new(q0_up),
                    sign: *sign,
                    p1: p1.clone(),
                }),
                _ => Some((**p1).clone()),
            },
        }
    }

    /// Full chain of proper P-ancestors, nearest first.
    pub fn p_ancestors(&self) -> Vec<Word> {
        let mut v = Vec::new();
        let mut cur = self.clone();
        while let Some(up) = cur.p_ancestor_step() {
            v.push(up.clone());
            cur = up;
        }
        v
    }

    pub fn q_ancestors(&self) -> Vec<Word> {
        let mut v = Vec::new();
        let mut cur = self.clone();
        while let Some(up) = cur.q_ancestor_step() {
            v.push(up.clone());
            cur = up;
        }
        v
    }

    /// All splittings `self = left * right` compatible with the canonical
    /// form. For a block, lefts peel off the `q0` side and rights peel off
    /// the `p1` side; the reduced block must exist for the split to be valid,
    /// which the caller checks against the class store.
    pub fn splits(&self) -> Vec<(Word, Word)> {
        match self {
            Word::Letters(v) => (1..v.len().saturating_sub(1))
                .map(|k| {
                    (
                        Word::Letters(v[..=k].to_vec()),
                        Word::Letters(v[k..].to_vec()),
                    )
                })
                .collect(),
            Word::Block { q0, sign, p1 } => {
                let mut out = Vec::new();
                for (u, c) in q0.splits() {
                    out.push((
                        u,
                        Word::Block {
                            q0: Box::new(c),
                            sign: *sign,
                            p1: p1.clone(),
                        },
                    ));
                }
                // Splitting the whole q0 off is also a left split when q0
                // itself remains a valid block head; that case corresponds
                // to c being the trivial left part, which cannot happen
                // (a block needs a nonempty q0), so only proper peels above.
                for (d, v) in p1.splits() {
                    out.push((
                        Word::Block {
                            q0: q0.clone(),
                            sign: *sign,
                            p1: Box::new(d),
                        },
                        v,
                    ));
                }
                out
            }
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Word::Letters(v) => {
                for c in v {
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Word::Block { q0, sign, p1 } => write!(f, "[{q0}{}{p1}]", sign.as_char()),
        }
    }
}

/// Parse the display form back into a word.
pub fn parse_word(s: &str) -> Option<Word> {
    let bytes = s.as_bytes();
    let (w, used) = parse_inner(bytes)?;
    (used == bytes.len()).then_some(w)
}

fn parse_inner(b: &[u8]) -> Option<(Word, usize)> {
    if b.is_empty() {
        return None;
    }
    if b[0] == b'[' {
        let (q0, used0) = parse_inner(&b[1..])?;
        let sign = match b.get(1 + used0)? {
            b'+' => Sign::Plus,
            b'-' => Sign::Minus,
            _ => return None,
        };
        let (p1, used1) = parse_inner(&b[2 + used0..])?;
        if b.get(2 + used0 + used1) != Some(&b']') {
            return None;
        }
        Some((Word::block(q0, sign, p1), 3 + used0 + used1))
    } else {
        let mut v = Vec::new();
        let mut i = 0;
        while i < b.len() && b[i].is_ascii_digit() {
            v.push(b[i] - b'0');
            i += 1;
        }
        if v.is_empty() {
            return None;
        }
        Some((Word::Letters(v), i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        parse_word(s).unwrap()
    }

    #[test]
    fn concat_merges_shared_vertex() {
        let a = w("011");
        let b = w("110");
        // The junction vertex is shared: lengths add.
        assert_eq!(a.concat(&b).to_string(), "01110");
        assert_eq!(a.concat(&b).n(2), 4);
    }

    #[test]
    fn roots_are_neutral() {
        let a = w("011");
        assert_eq!(a.concat(&w("1")), a);
        assert_eq!(w("0").concat(&a), a);
    }

    #[test]
    fn blocks_absorb_context() {
        let block = Word::block(w("10"), Sign::Plus, w("11"));
        assert_eq!(block.to_string(), "[10+11]");
        // Left context goes into q0.
        let left = w("01").concat(&block);
        assert_eq!(left.to_string(), "[010+11]");
        // Right context goes into p1.
        let right = block.concat(&w("10"));
        assert_eq!(right.to_string(), "[10+110]");
        // Block-with-block concat nests on the q0 side of the right block.
        let b2 = Word::block(w("10"), Sign::Minus, w("11"));
        let both = block.concat(&b2);
        assert_eq!(both.to_string(), "[[10+110]-11]");
        // Associativity of the canonical concatenation.
        let x = w("01").concat(&block).concat(&w("10"));
        let y = w("01").concat(&block.concat(&w("10")));
        assert_eq!(x, y);
    }

    #[test]
    fn n_counts_excursion_steps() {
        let block = Word::block(w("10"), Sign::Plus, w("11"));
        assert_eq!(block.n(2), 1 + 1 + 2);
        assert_eq!(block.source(), ChartId(1));
        assert_eq!(block.target(), ChartId(1));
    }

    #[test]
    fn ancestor_chains() {
        let word = w("0110");
        assert_eq!(
            word.p_ancestors()
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>(),
            vec!["011", "01", "0"]
        );
        assert_eq!(
            word.q_ancestors()
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>(),
            vec!["110", "10", "0"]
        );
        let block = Word::block(w("10"), Sign::Plus, w("110"));
        let chain: Vec<String> = block.p_ancestors().iter().map(|x| x.to_string()).collect();
        assert_eq!(chain, vec!["[10+11]", "10", "1"]);
        let chain: Vec<String> = block.q_ancestors().iter().map(|x| x.to_string()).collect();
        assert_eq!(chain, vec!["110", "10", "0"]);
    }

    #[test]
    fn splits_enumerate_canonical_divisions() {
        let word = w("0110");
        let splits: Vec<String> = word
            .splits()
            .iter()
            .map(|(a, b)| format!("{a}|{b}"))
            .collect();
        assert_eq!(splits, vec!["01|110", "011|10"]);

        let block = Word::block(w("100"), Sign::Plus, w("110"));
        let splits: Vec<String> = block
            .splits()
            .iter()
            .map(|(a, b)| format!("{a}|{b}"))
            .collect();
        assert_eq!(splits, vec!["10|[00+110]", "[100+11]|10"]);
    }

    #[test]
    fn display_parse_roundtrip() {
        for s in ["0", "0110", "[10+11]", "[[10+1110]-11]", "[010-[10+11]]"] {
            assert_eq!(parse_word(s).unwrap().to_string(), s);
        }
        assert!(parse_word("[10*11]").is_none());
        assert!(parse_word("01]").is_none());
    }
}
