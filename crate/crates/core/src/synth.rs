//! Seeded synthetic treebanks for tests, demos and benchmarks.
//!
//! EDUs follow a tiny clause grammar over UPOS tags: one VERB attached to
//! ROOT, with noun phrases, prepositional phrases and adverbs on either
//! side. Heads are fully determined by the tag sequence, so a parser can
//! learn them from POS alone.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conllu::{Edu, Token};
use crate::error::{Error, Result};
use crate::treebank::HeadVector;

const WORDS_PER_TAG: usize = 12;

/// Uniformly random attachment order; always a single-rooted tree.
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> HeadVector {
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![0; n];
    for (k, &d) in order.iter().enumerate().skip(1) {
        heads[d - 1] = order[rng.gen_range(0..k)];
    }
    HeadVector::new(heads).expect("attachment to earlier nodes is acyclic")
}

/// Tags with the offset of each token's head inside the constituent;
/// `None` marks the constituent head, which attaches to the verb.
type Constituent = Vec<(&'static str, Option<usize>)>;

fn noun_phrase<R: Rng>(budget: usize, rng: &mut R) -> Constituent {
    let mut tags = Vec::new();
    if budget >= 2 && rng.gen_bool(0.6) {
        tags.push("DET");
    }
    while tags.len() + 1 < budget && tags.len() < 3 && rng.gen_bool(0.35) {
        tags.push("ADJ");
    }
    let noun = tags.len();
    let mut out: Constituent = tags.into_iter().map(|t| (t, Some(noun))).collect();
    out.push(("NOUN", None));
    out
}

fn constituent<R: Rng>(budget: usize, rng: &mut R) -> Constituent {
    let roll = rng.gen_range(0..10);
    if budget >= 2 && roll < 3 {
        let np = noun_phrase(budget - 1, rng);
        let noun = np.len();
        let mut out: Constituent = vec![("ADP", Some(noun))];
        out.extend(np.into_iter().map(|(t, h)| (t, h.map(|h| h + 1))));
        out
    } else if roll < 8 {
        noun_phrase(budget, rng)
    } else {
        vec![("ADV", None)]
    }
}

/// One EDU of exactly `len` tokens.
pub fn synthetic_edu<R: Rng>(len: usize, rng: &mut R) -> Edu {
    assert!(len >= 1, "EDUs have at least one token");
    let mut left: Vec<Constituent> = Vec::new();
    let mut right: Vec<Constituent> = Vec::new();
    let mut remaining = len - 1;
    while remaining > 0 {
        let c = constituent(remaining, rng);
        remaining -= c.len();
        if rng.gen_bool(0.35) {
            left.push(c);
        } else {
            right.push(c);
        }
    }
    let mut tags = Vec::with_capacity(len);
    let mut heads = Vec::with_capacity(len);
    let place = |c: Constituent, tags: &mut Vec<&'static str>, heads: &mut Vec<Option<usize>>| {
        let start = tags.len() + 1;
        for (t, h) in c {
            tags.push(t);
            heads.push(h.map(|h| start + h));
        }
    };
    for c in left {
        place(c, &mut tags, &mut heads);
    }
    let verb = tags.len() + 1;
    tags.push("VERB");
    heads.push(Some(0));
    for c in right {
        place(c, &mut tags, &mut heads);
    }
    let tokens = tags
        .iter()
        .zip(&heads)
        .enumerate()
        .map(|(i, (&tag, &h))| {
            let form = format!("{}{}", tag.to_lowercase(), rng.gen_range(0..WORDS_PER_TAG));
            Token::new(i + 1, form, tag, Some(h.unwrap_or(verb)))
        })
        .collect();
    Edu::new(Vec::new(), tokens)
}

/// `n_edus` EDUs with lengths drawn uniformly from `min_len..=max_len`.
pub fn synthetic_corpus(n_edus: usize, min_len: usize, max_len: usize, seed: u64) -> Result<Vec<Edu>> {
    if min_len == 0 || min_len > max_len {
        return Err(Error::InvalidArgument(format!("bad length range {}..={}", min_len, max_len)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_edus)
        .map(|i| {
            let len = rng.gen_range(min_len..=max_len);
            let mut edu = synthetic_edu(len, &mut rng);
            edu.comments.push(format!("# sent_id = synth-{}", i + 1));
            edu
        })
        .collect())
}
