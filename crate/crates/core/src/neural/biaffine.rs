//! Biaffine arc scorer.
//!
//! ```text
//! S[h, d] = dep(d)ᵀ · U · head(h) + uᵀ · head(h) + b
//! ```
//!
//! where `head` and `dep` are separate MLPs over the encoder outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Mlp, MlpCache};
use super::params::{join, Params};
use super::tensor::{axpy, dot, Tensor};
use crate::error::{Error, Result};
use crate::graph::ScoreMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiaffineParams {
    pub head_mlp: Mlp,
    pub dep_mlp: Mlp,
    /// `U`, indexed `[dep, head]`.
    pub bilinear: Tensor,
    /// `u`
    pub head_bias: Tensor,
    /// `b`, one entry.
    pub bias: Tensor,
}

// `b` and the head MLP's output bias shift every score of a column by the
// same amount, so their gradient under a per-column softmax is identically
// zero. They start at zero and are not trained.

pub struct BiaffineCache {
    head_caches: Vec<MlpCache>,
    dep_caches: Vec<MlpCache>,
    heads: Vec<Vec<f64>>,
    deps: Vec<Vec<f64>>,
}

impl BiaffineParams {
    pub fn new<R: Rng>(input: usize, hidden: usize, arc_dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut head_mlp = Mlp::new(input, hidden, arc_dim, scale, rng);
        head_mlp.output.bias.fill(0.0);
        BiaffineParams {
            head_mlp,
            dep_mlp: Mlp::new(input, hidden, arc_dim, scale, rng),
            bilinear: Tensor::uniform(&[arc_dim, arc_dim], scale, rng),
            head_bias: Tensor::uniform(&[arc_dim], scale, rng),
            bias: Tensor::zeros(&[1]),
        }
    }

    pub fn input_size(&self) -> usize {
        self.head_mlp.hidden.input_size()
    }

    /// Scores from already-projected head and dependent representations.
    pub fn score_representations(&self, heads: &[Vec<f64>], deps: &[Vec<f64>]) -> ScoreMatrix {
        let n = heads.len() - 1;
        let b = self.bias.values()[0];
        // U · head(h) and uᵀ · head(h) per head
        let projected: Vec<(Vec<f64>, f64)> = heads
            .iter()
            .map(|h| {
                let mut uh = vec![0.0; self.bilinear.rows()];
                self.bilinear.matvec_acc(h, &mut uh);
                (uh, dot(self.head_bias.values(), h))
            })
            .collect();
        ScoreMatrix::from_fn(n, |h, d| dot(&deps[d], &projected[h].0) + projected[h].1 + b)
    }

    /// Arc scores for ROOT-prefixed encodings; column 0 and the diagonal are masked.
    pub fn forward(&self, encodings: &[Vec<f64>]) -> Result<(ScoreMatrix, BiaffineCache)> {
        if encodings.is_empty() {
            return Err(Error::Shape("biaffine scorer needs at least the ROOT encoding".into()));
        }
        if let Some(bad) = encodings.iter().find(|e| e.len() != self.input_size()) {
            return Err(Error::Shape(format!(
                "encoding of size {} where {} expected",
                bad.len(),
                self.input_size()
            )));
        }
        let (heads, head_caches): (Vec<_>, Vec<_>) = encodings.iter().map(|e| self.head_mlp.forward(e)).unzip();
        let (deps, dep_caches): (Vec<_>, Vec<_>) = encodings.iter().map(|e| self.dep_mlp.forward(e)).unzip();
        let scores = self.score_representations(&heads, &deps);
        Ok((
            scores,
            BiaffineCache {
                head_caches,
                dep_caches,
                heads,
                deps,
            },
        ))
    }

    /// `d_scores` is `(n+1) × (n+1)`; masked entries must be zero.
    pub fn backward(&self, cache: &BiaffineCache, d_scores: &Tensor, grad: &mut BiaffineParams) -> Vec<Vec<f64>> {
        let size = cache.heads.len();
        let a = self.bilinear.rows();
        let mut d_heads = vec![vec![0.0; a]; size];
        let mut d_deps = vec![vec![0.0; a]; size];
        for h in 0..size {
            let row = d_scores.row(h);
            let row_sum: f64 = row.iter().sum();
            if row.iter().all(|&g| g == 0.0) {
                continue;
            }
            // Σ_d g[h,d] · dep(d)
            let mut weighted_dep = vec![0.0; a];
            for (d, &g) in row.iter().enumerate() {
                if g != 0.0 {
                    axpy(g, &cache.deps[d], &mut weighted_dep);
                }
            }
            grad.bilinear.outer_acc(&weighted_dep, &cache.heads[h]);
            axpy(row_sum, &cache.heads[h], grad.head_bias.values_mut());
            self.bilinear.matvec_t_acc(&weighted_dep, &mut d_heads[h]);
            axpy(row_sum, self.head_bias.values(), &mut d_heads[h]);

            let mut uh = vec![0.0; a];
            self.bilinear.matvec_acc(&cache.heads[h], &mut uh);
            for (d, &g) in row.iter().enumerate() {
                if g != 0.0 {
                    axpy(g, &uh, &mut d_deps[d]);
                }
            }
        }
        (0..size)
            .map(|i| {
                let mut d = self.head_mlp.backward(&cache.head_caches[i], &d_heads[i], &mut grad.head_mlp);
                let dd = self.dep_mlp.backward(&cache.dep_caches[i], &d_deps[i], &mut grad.dep_mlp);
                axpy(1.0, &dd, &mut d);
                d
            })
            .collect()
    }
}

impl Params for BiaffineParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        let head = join(prefix, "head_mlp");
        self.head_mlp.hidden.visit(&join(&head, "hidden"), f);
        f(join(&join(&head, "output"), "weight"), &self.head_mlp.output.weight);
        self.dep_mlp.visit(&join(prefix, "dep_mlp"), f);
        f(join(prefix, "bilinear"), &self.bilinear);
        f(join(prefix, "head_bias"), &self.head_bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.head_mlp.hidden.visit_mut(f);
        f(&mut self.head_mlp.output.weight);
        self.dep_mlp.visit_mut(f);
        f(&mut self.bilinear);
        f(&mut self.head_bias);
    }
}

/// Arc scores for ROOT-prefixed encodings.
pub fn biaffine_scores(encodings: &[Vec<f64>], params: &BiaffineParams) -> Result<ScoreMatrix> {
    Ok(params.forward(encodings)?.0)
}
