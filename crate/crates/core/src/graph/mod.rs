//! Arc-factored decoders over dense score matrices and the biaffine
//! graph-based parser.

mod cle;
mod eisner;
mod greedy;
pub mod parser;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treebank::HeadVector;

pub use cle::cle_decode;
pub use eisner::eisner_decode;
pub use greedy::greedy_decode;

/// Score of a masked arc: ROOT as dependent and self-loops.
pub const MASKED: f64 = f64::MIN;

/// `(n+1) × (n+1)` arc scores, row = head, column = dependent.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    n: usize,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    /// Fills every legal arc from `score(head, dependent)`.
    pub fn from_fn(n: usize, mut score: impl FnMut(usize, usize) -> f64) -> Self {
        let size = n + 1;
        let mut scores = vec![MASKED; size * size];
        for h in 0..size {
            for d in 1..size {
                if h != d {
                    scores[h * size + d] = score(h, d);
                }
            }
        }
        ScoreMatrix { n, scores }
    }

    /// Builds from square rows; column 0 and the diagonal are overwritten
    /// with [`MASKED`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if size < 2 || rows.iter().any(|r| r.len() != size) {
            return Err(Error::Shape(format!(
                "score matrix must be square with at least 2 rows, got {} rows",
                size
            )));
        }
        Ok(ScoreMatrix::from_fn(size - 1, |h, d| rows[h][d]))
    }

    /// Independent uniform scores in `[-1, 1)` rounded to multiples of
    /// 2⁻²⁰, so that sums of a few dozen arcs are exact.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        const SCALE: f64 = (1u64 << 20) as f64;
        ScoreMatrix::from_fn(n, |_, _| rng.gen_range(-(1i64 << 20)..(1i64 << 20)) as f64 / SCALE)
    }

    /// Number of tokens, ROOT excluded.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, head: usize, dependent: usize) -> f64 {
        self.scores[head * (self.n + 1) + dependent]
    }

    pub fn set(&mut self, head: usize, dependent: usize, value: f64) {
        self.scores[head * (self.n + 1) + dependent] = value;
    }

    pub fn is_masked(head: usize, dependent: usize) -> bool {
        dependent == 0 || head == dependent
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.scores.chunks(self.n + 1).map(|r| r.to_vec()).collect()
    }

    /// Sum of `S[heads[d]][d]` over dependents, in dependent order.
    pub fn tree_score(&self, heads: &[usize]) -> f64 {
        heads.iter().enumerate().map(|(i, &h)| self.get(h, i + 1)).sum()
    }

    /// Adds `c` to every unmasked entry.
    pub fn shifted(&self, c: f64) -> ScoreMatrix {
        ScoreMatrix::from_fn(self.n, |h, d| self.get(h, d) + c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeResult {
    pub heads: HeadVector,
    pub total_score: f64,
    pub is_tree: bool,
}

impl DecodeResult {
    pub(crate) fn from_heads(scores: &ScoreMatrix, heads: Vec<usize>) -> Self {
        let total_score = scores.tree_score(&heads);
        let heads = HeadVector::new_unchecked(heads);
        let is_tree = heads.is_tree();
        DecodeResult {
            heads,
            total_score,
            is_tree,
        }
    }
}

/// Graph decoders selectable at parse time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    Eisner,
    Greedy,
    Mst,
}

impl Decoder {
    pub fn decode(self, scores: &ScoreMatrix) -> DecodeResult {
        match self {
            Decoder::Eisner => eisner_decode(scores),
            Decoder::Greedy => greedy_decode(scores),
            Decoder::Mst => cle_decode(scores),
        }
    }
}

impl std::str::FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eisner" => Ok(Decoder::Eisner),
            "greedy" => Ok(Decoder::Greedy),
            "mst" => Ok(Decoder::Mst),
            other => Err(Error::InvalidArgument(format!("unknown graph decoder {:?}", other))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{enumerate_projective_trees, enumerate_trees};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// First maximum in enumeration order; strict comparison.
    fn brute_force(s: &ScoreMatrix, trees: &[HeadVector]) -> (Vec<usize>, f64) {
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        for t in trees {
            let score = s.tree_score(t.as_slice());
            if score > best.1 {
                best = (t.as_slice().to_vec(), score);
            }
        }
        best
    }

    fn example_matrix() -> ScoreMatrix {
        let mut s = ScoreMatrix::from_fn(2, |_, _| 0.0);
        s.set(0, 1, 4.0);
        s.set(0, 2, 3.0);
        s.set(1, 2, 6.0);
        s.set(2, 1, 6.0);
        s
    }

    #[test]
    fn masking() {
        let s = ScoreMatrix::from_rows(&[vec![9.0; 3], vec![9.0; 3], vec![9.0; 3]]).unwrap();
        assert_eq!(s.get(1, 1), MASKED);
        assert_eq!(s.get(2, 0), MASKED);
        assert_eq!(s.get(0, 2), 9.0);
        assert!(ScoreMatrix::from_rows(&[vec![0.0; 2]]).is_err());
    }

    #[test]
    fn single_token() {
        let s = ScoreMatrix::from_fn(1, |_, _| 2.5);
        for dec in [Decoder::Eisner, Decoder::Greedy, Decoder::Mst] {
            let r = dec.decode(&s);
            assert_eq!(r.heads.as_slice(), &[0]);
            assert_eq!(r.total_score, 2.5);
            assert!(r.is_tree);
        }
    }

    #[test]
    fn eisner_two_token_example() {
        let mut s = ScoreMatrix::from_fn(2, |_, _| 0.0);
        s.set(0, 1, 1.0);
        s.set(0, 2, 5.0);
        s.set(1, 2, 2.0);
        s.set(2, 1, 3.0);
        let r = eisner_decode(&s);
        assert_eq!(r.heads.as_slice(), &[2, 0]);
        assert_eq!(r.total_score, 8.0);
    }

    #[test]
    fn greedy_finds_cycle() {
        let r = greedy_decode(&example_matrix());
        assert_eq!(r.heads.as_slice(), &[2, 1]);
        assert!(!r.is_tree);
        assert_eq!(r.total_score, 12.0);
    }

    #[test]
    fn greedy_root_dominant() {
        let s = ScoreMatrix::from_fn(4, |h, _| if h == 0 { 10.0 } else { 1.0 });
        let r = greedy_decode(&s);
        assert_eq!(r.heads.as_slice(), &[0, 0, 0, 0]);
        assert!(r.is_tree);
    }

    #[test]
    fn greedy_ties_prefer_smaller_head() {
        let s = ScoreMatrix::from_fn(3, |_, _| 1.0);
        assert_eq!(greedy_decode(&s).heads.as_slice(), &[0, 0, 0]);
    }

    #[test]
    fn cle_two_token_example() {
        let r = cle_decode(&example_matrix());
        assert_eq!(r.heads.as_slice(), &[0, 1]);
        assert_eq!(r.total_score, 10.0);
        assert!(r.is_tree);
    }

    #[test]
    fn cle_ties_prefer_smaller_head_without_cycles() {
        let s = ScoreMatrix::from_fn(3, |_, _| 1.0);
        assert_eq!(cle_decode(&s).heads.as_slice(), &[0, 0, 0]);
    }

    #[test]
    fn cle_handles_nested_cycles() {
        // 1 <-> 2 and 3 <-> 4 strongly, with a weak link from root
        let mut s = ScoreMatrix::from_fn(4, |_, _| -5.0);
        s.set(1, 2, 10.0);
        s.set(2, 1, 10.0);
        s.set(3, 4, 10.0);
        s.set(4, 3, 10.0);
        s.set(2, 3, 8.0);
        s.set(3, 1, 7.0);
        s.set(0, 1, 1.0);
        let r = cle_decode(&s);
        let trees = enumerate_trees(4).unwrap();
        let (heads, score) = brute_force(&s, &trees);
        assert_eq!(r.total_score, score);
        assert_eq!(r.heads.as_slice(), heads.as_slice());
    }

    #[test]
    fn decoders_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=6 {
            let all = enumerate_trees(n).unwrap();
            let proj = enumerate_projective_trees(n).unwrap();
            for _ in 0..40 {
                let s = ScoreMatrix::random(n, &mut rng);
                let e = eisner_decode(&s);
                let c = cle_decode(&s);
                let (eh, es) = brute_force(&s, &proj);
                let (ch, cs) = brute_force(&s, &all);
                assert_eq!(e.total_score, es);
                assert_eq!(e.heads.as_slice(), eh.as_slice());
                assert_eq!(c.total_score, cs);
                assert_eq!(c.heads.as_slice(), ch.as_slice());
                assert!(greedy_decode(&s).total_score >= c.total_score);
                assert!(c.total_score >= e.total_score);
            }
        }
    }

    proptest! {
        #[test]
        fn constant_shift(seed in any::<u64>(), n in 1usize..9, k in -64i32..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = ScoreMatrix::random(n, &mut rng);
            let c = k as f64 / 8.0;
            let shifted = s.shifted(c);
            for dec in [Decoder::Eisner, Decoder::Greedy, Decoder::Mst] {
                let a = dec.decode(&s);
                let b = dec.decode(&shifted);
                prop_assert_eq!(&a.heads, &b.heads);
                prop_assert_eq!(b.total_score, a.total_score + n as f64 * c);
            }
        }

        #[test]
        fn decoder_outputs_are_trees(seed in any::<u64>(), n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = ScoreMatrix::random(n, &mut rng);
            let e = eisner_decode(&s);
            prop_assert!(e.is_tree);
            prop_assert!(e.heads.is_projective().unwrap());
            let c = cle_decode(&s);
            prop_assert!(c.is_tree);
            prop_assert!(greedy_decode(&s).total_score >= c.total_score);
            prop_assert!(c.total_score >= e.total_score);
        }
    }
}
