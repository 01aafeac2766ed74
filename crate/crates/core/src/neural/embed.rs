use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, Params};
use super::tensor::Tensor;
use crate::conllu::Edu;

pub const UNK: usize = 0;
pub const ROOT: usize = 1;
const UNK_SYMBOL: &str = "<unk>";
const ROOT_SYMBOL: &str = "<root>";

/// String ↔ index map with reserved UNK (0) and ROOT (1) entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { items, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.items
    }
}

impl Vocab {
    /// Keeps every symbol seen at least `min_count` times, sorted.
    pub fn from_counts<'a>(symbols: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in symbols {
            *counts.entry(s).or_default() += 1;
        }
        let mut items = vec![UNK_SYMBOL.to_string(), ROOT_SYMBOL.to_string()];
        items.extend(
            counts
                .into_iter()
                .filter(|&(s, c)| c >= min_count && s != UNK_SYMBOL && s != ROOT_SYMBOL)
                .map(|(s, _)| s.to_string()),
        );
        Vocab::from(items)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(UNK)
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.items[i]
    }
}

/// Word and POS vocabularies built from a training corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub words: Vocab,
    pub pos: Vocab,
}

impl Vocabularies {
    /// Words seen fewer than `min_word_count` times fall back to UNK.
    pub fn build(corpus: &[Edu], min_word_count: usize) -> Self {
        let tokens = || corpus.iter().flat_map(|e| e.tokens.iter());
        Vocabularies {
            words: Vocab::from_counts(tokens().map(|t| t.form.as_str()), min_word_count),
            pos: Vocab::from_counts(tokens().map(|t| t.upos.as_str()), 1),
        }
    }

    /// `(word, pos)` indices for ROOT followed by every token.
    pub fn index(&self, edu: &Edu) -> Vec<(usize, usize)> {
        std::iter::once((ROOT, ROOT))
            .chain(edu.tokens.iter().map(|t| (self.words.get(&t.form), self.pos.get(&t.upos))))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTables {
    pub words: Tensor,
    pub pos: Tensor,
}

impl EmbeddingTables {
    pub fn new<R: Rng>(vocab: &Vocabularies, word_dim: usize, pos_dim: usize, scale: f64, rng: &mut R) -> Self {
        EmbeddingTables {
            words: Tensor::uniform(&[vocab.words.len(), word_dim], scale, rng),
            pos: Tensor::uniform(&[vocab.pos.len(), pos_dim], scale, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.words.cols() + self.pos.cols()
    }

    /// Concatenated word and POS vectors.
    pub fn lookup(&self, (word, pos): (usize, usize)) -> Vec<f64> {
        let mut v = self.words.row(word).to_vec();
        v.extend_from_slice(self.pos.row(pos));
        v
    }

    pub fn accumulate(&self, (word, pos): (usize, usize), d: &[f64], grad: &mut EmbeddingTables) {
        let dw = self.words.cols();
        super::tensor::axpy(1.0, &d[..dw], grad.words.row_mut(word));
        super::tensor::axpy(1.0, &d[dw..], grad.pos.row_mut(pos));
    }
}

impl Params for EmbeddingTables {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "words"), &self.words);
        f(join(prefix, "pos"), &self.pos);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        f(&mut self.words);
        f(&mut self.pos);
    }
}
