use super::{DecodeResult, ScoreMatrix};

/// Best-scoring head per dependent, chosen independently. The result can
/// contain cycles; `is_tree` reports whether it does not.
pub fn greedy_decode(scores: &ScoreMatrix) -> DecodeResult {
    let n = scores.n();
    let heads = (1..=n)
        .map(|d| {
            let mut best = 0;
            for h in 1..=n {
                if h != d && scores.get(h, d) > scores.get(best, d) {
                    best = h;
                }
            }
            best
        })
        .collect();
    DecodeResult::from_heads(scores, heads)
}
