use super::tensor::{log_sum_exp, Tensor};
use crate::error::{Error, Result};
use crate::graph::ScoreMatrix;
use crate::treebank::HeadVector;

/// `-log softmax(logits)[gold]` and its gradient `softmax - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], gold: usize) -> (f64, Vec<f64>) {
    let lse = log_sum_exp(logits, |_| true);
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - lse).exp()).collect();
    grad[gold] -= 1.0;
    (lse - logits[gold], grad)
}

/// Per-column softmax over candidate heads; masked entries get probability 0.
pub fn head_probabilities(scores: &ScoreMatrix) -> Tensor {
    let n = scores.n();
    let size = n + 1;
    let mut probs = Tensor::zeros(&[size, size]);
    for d in 1..size {
        let column: Vec<f64> = (0..size).map(|h| scores.get(h, d)).collect();
        let lse = log_sum_exp(&column, |h| h != d);
        for h in (0..size).filter(|&h| h != d) {
            probs.values_mut()[h * size + d] = (column[h] - lse).exp();
        }
    }
    probs
}

/// Summed head cross-entropy over dependents, with the gradient with
/// respect to every score entry (zero on masked entries).
pub fn head_cross_entropy(scores: &ScoreMatrix, gold: &HeadVector) -> Result<(f64, Tensor)> {
    let n = scores.n();
    if gold.len() != n {
        return Err(Error::Shape(format!("{} gold heads for {} tokens", gold.len(), n)));
    }
    if let Some((h, d)) = gold.arcs().find(|&(h, d)| h == d || h > n) {
        return Err(Error::InvalidArgument(format!("gold head {} of token {} is masked", h, d)));
    }
    let size = n + 1;
    let mut grad = head_probabilities(scores);
    let mut loss = 0.0;
    for (h, d) in gold.arcs() {
        let column: Vec<f64> = (0..size).map(|k| scores.get(k, d)).collect();
        let lse = log_sum_exp(&column, |k| k != d);
        loss += lse - column[h];
        grad.values_mut()[h * size + d] -= 1.0;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_option_has_zero_loss() {
        let s = ScoreMatrix::from_fn(1, |_, _| 3.7);
        let (loss, grad) = head_cross_entropy(&s, &HeadVector::new(vec![0]).unwrap()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn uniform_two_heads() {
        let s = ScoreMatrix::from_fn(2, |_, _| 1.0);
        let gold = HeadVector::new(vec![0, 1]).unwrap();
        let (loss, _) = head_cross_entropy(&s, &gold).unwrap();
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-15);
        let (l1, _) = softmax_cross_entropy(&[0.5, 0.5], 1);
        assert!((l1 - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn masked_gold_rejected() {
        let s = ScoreMatrix::from_fn(2, |_, _| 0.0);
        assert!(head_cross_entropy(&s, &HeadVector::new_unchecked(vec![1, 0])).is_err());
    }

    #[test]
    fn columns_sum_to_one() {
        let s = ScoreMatrix::random(6, &mut ChaCha8Rng::seed_from_u64(2)).shifted(0.0);
        let p = head_probabilities(&s);
        for d in 1..=6 {
            let total: f64 = (0..=6).map(|h| p.values()[h * 7 + d]).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = ScoreMatrix::random(4, &mut ChaCha8Rng::seed_from_u64(4));
        let gold = HeadVector::new(vec![2, 0, 4, 2]).unwrap();
        // parameterize by the dense matrix
        let dense = Tensor::from_vec(&[5, 5], s.to_rows().concat()).unwrap();
        let report = grad_check(&dense, |t| {
            let rows: Vec<Vec<f64>> = t.values().chunks(5).map(|r| r.to_vec()).collect();
            let m = ScoreMatrix::from_rows(&rows)?;
            head_cross_entropy(&m, &gold)
        })
        .unwrap();
        assert!(report.max_relative_error < 1e-6, "{:?}", report);
    }
}
