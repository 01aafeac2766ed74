//! Head vectors, tree checks and exhaustive tree enumeration.
//!
//! A head vector over `n` tokens stores the head of dependent `d` (1-based)
//! at position `d - 1`; index 0 is the artificial ROOT.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sentence length accepted by the enumerators.
pub const MAX_ENUMERATION_LEN: usize = 7;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeadVector(Vec<usize>);

impl HeadVector {
    /// Wraps a list of heads, rejecting self-loops and out-of-range heads.
    pub fn new(heads: Vec<usize>) -> Result<Self> {
        let n = heads.len();
        for (i, &h) in heads.iter().enumerate() {
            if h > n {
                return Err(Error::InvalidTree(format!(
                    "head {} of token {} exceeds sentence length {}",
                    h,
                    i + 1,
                    n
                )));
            }
            if h == i + 1 {
                return Err(Error::InvalidTree(format!("token {} heads itself", h)));
            }
        }
        Ok(HeadVector(heads))
    }

    pub(crate) fn new_unchecked(heads: Vec<usize>) -> Self {
        HeadVector(heads)
    }

    /// Number of tokens, ROOT excluded.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Head of dependent `d` (1-based).
    pub fn head(&self, d: usize) -> usize {
        self.0[d - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Arcs as `(head, dependent)` pairs in dependent order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().enumerate().map(|(i, &h)| (h, i + 1))
    }

    /// True when every token reaches ROOT without passing through a cycle.
    pub fn is_tree(&self) -> bool {
        is_tree(&self.0)
    }

    /// Projectivity by the descendant definition: every token strictly inside
    /// the span of an arc must descend from that arc's head.
    pub fn is_projective(&self) -> Result<bool> {
        if !self.is_tree() {
            return Err(Error::InvalidTree(format!(
                "{} is not a tree rooted at 0",
                self
            )));
        }
        Ok(projective_by_descendants(&self.0))
    }

    /// Projectivity by the crossing-arc definition. Acyclicity is assumed.
    pub fn has_crossing_arcs(&self) -> bool {
        has_crossing_arcs(&self.0)
    }
}

impl fmt::Display for HeadVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, h) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", h)?;
        }
        write!(f, "]")
    }
}

impl AsRef<[usize]> for HeadVector {
    fn as_ref(&self) -> &[usize] {
        &self.0
    }
}

/// Acyclicity and reachability from ROOT for a raw head list.
pub(crate) fn is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().enumerate().any(|(i, &h)| h > n || h == i + 1) {
        return false;
    }
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    let mut path = Vec::with_capacity(n);
    for start in 1..=n {
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            path.push(node);
            node = heads[node - 1];
        }
        if state[node] == 1 {
            return false;
        }
        for &p in &path {
            state[p] = 2;
        }
        path.clear();
    }
    true
}

fn is_ancestor(heads: &[usize], ancestor: usize, mut node: usize) -> bool {
    while node != 0 {
        node = heads[node - 1];
        if node == ancestor {
            return true;
        }
    }
    ancestor == 0
}

fn projective_by_descendants(heads: &[usize]) -> bool {
    heads.iter().enumerate().all(|(i, &h)| {
        let d = i + 1;
        let (lo, hi) = if h < d { (h, d) } else { (d, h) };
        (lo + 1..hi).all(|k| is_ancestor(heads, h, k))
    })
}

fn has_crossing_arcs(heads: &[usize]) -> bool {
    let spans: Vec<(usize, usize)> = heads
        .iter()
        .enumerate()
        .map(|(i, &h)| if h < i + 1 { (h, i + 1) } else { (i + 1, h) })
        .collect();
    for (a, &(l1, r1)) in spans.iter().enumerate() {
        for &(l2, r2) in &spans[a + 1..] {
            if (l1 < l2 && l2 < r1 && r1 < r2) || (l2 < l1 && l1 < r2 && r2 < r1) {
                return true;
            }
        }
    }
    false
}

fn check_enumeration_len(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ENUMERATION_LEN {
        return Err(Error::InvalidArgument(format!(
            "tree enumeration supports 1..={} tokens, got {}",
            MAX_ENUMERATION_LEN, n
        )));
    }
    Ok(())
}

/// All dependency trees rooted at 0 over `n` tokens, in lexicographic order
/// of their head vectors. There are `(n+1)^(n-1)` of them.
pub fn enumerate_trees(n: usize) -> Result<Vec<HeadVector>> {
    check_enumeration_len(n)?;
    let mut out = Vec::new();
    let mut heads = vec![0usize; n];
    loop {
        if is_tree(&heads) {
            out.push(HeadVector(heads.clone()));
        }
        // odometer increment in base n+1, last position fastest
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            heads[pos] += 1;
            if heads[pos] <= n {
                break;
            }
            heads[pos] = 0;
        }
    }
}

/// The projective subset of [`enumerate_trees`], same order.
pub fn enumerate_projective_trees(n: usize) -> Result<Vec<HeadVector>> {
    Ok(enumerate_trees(n)?
        .into_iter()
        .filter(|t| projective_by_descendants(&t.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hv(h: &[usize]) -> HeadVector {
        HeadVector::new(h.to_vec()).unwrap()
    }

    #[test]
    fn projectivity_examples() {
        assert!(hv(&[0, 1, 2]).is_projective().unwrap());
        assert!(!hv(&[3, 0, 4, 2]).is_projective().unwrap());
        assert!(hv(&[2, 0]).is_projective().unwrap());
        assert!(hv(&[3, 0, 4, 2]).has_crossing_arcs());
    }

    #[test]
    fn projectivity_rejects_non_trees() {
        assert!(hv(&[2, 1]).is_projective().is_err());
    }

    #[test]
    fn self_loop_rejected() {
        assert!(HeadVector::new(vec![1]).is_err());
        assert!(HeadVector::new(vec![0, 3]).is_err());
    }

    #[test]
    fn small_enumerations() {
        assert_eq!(enumerate_trees(1).unwrap(), vec![hv(&[0])]);
        assert_eq!(
            enumerate_trees(2).unwrap(),
            vec![hv(&[0, 0]), hv(&[0, 1]), hv(&[2, 0])]
        );
        assert_eq!(enumerate_trees(3).unwrap().len(), 16);
        assert_eq!(enumerate_projective_trees(1).unwrap(), vec![hv(&[0])]);
        assert_eq!(enumerate_projective_trees(2).unwrap().len(), 3);
    }

    #[test]
    fn n3_projective_filter() {
        let all = enumerate_trees(3).unwrap();
        let proj = enumerate_projective_trees(3).unwrap();
        assert_eq!(proj.len(), 12);
        let mut excluded: Vec<_> = all.into_iter().filter(|t| !proj.contains(t)).collect();
        excluded.sort();
        let mut expected = vec![hv(&[3, 0, 0]), hv(&[3, 0, 2]), hv(&[0, 0, 1]), hv(&[2, 0, 1])];
        expected.sort();
        assert_eq!(excluded, expected);
    }

    #[test]
    fn enumeration_counts() {
        for n in 1..=6usize {
            let count = enumerate_trees(n).unwrap().len();
            assert_eq!(count, (n + 1).pow(n as u32 - 1), "n = {}", n);
        }
    }

    #[test]
    fn projectivity_definitions_agree() {
        for n in 1..=6 {
            for t in enumerate_trees(n).unwrap() {
                assert_eq!(
                    t.is_projective().unwrap(),
                    !t.has_crossing_arcs(),
                    "definitions disagree on {}",
                    t
                );
            }
        }
    }

    #[test]
    fn enumeration_bounds() {
        assert!(enumerate_trees(0).is_err());
        assert!(enumerate_trees(8).is_err());
        assert!(enumerate_projective_trees(8).is_err());
    }

    /// Reachability by fixed-point iteration, independent of `is_tree`.
    fn reaches_root_oracle(heads: &[usize]) -> bool {
        let n = heads.len();
        let mut reached = vec![false; n + 1];
        reached[0] = true;
        for _ in 0..n {
            for d in 1..=n {
                if reached[heads[d - 1]] {
                    reached[d] = true;
                }
            }
        }
        reached.iter().all(|&r| r)
    }

    #[test]
    fn is_tree_matches_reachability_oracle() {
        for n in 1..=5usize {
            let total = (n + 1).pow(n as u32);
            for code in 0..total {
                let mut c = code;
                let heads: Vec<usize> = (0..n)
                    .map(|_| {
                        let h = c % (n + 1);
                        c /= n + 1;
                        h
                    })
                    .collect();
                let self_loop = heads.iter().enumerate().any(|(i, &h)| h == i + 1);
                let expected = !self_loop && reaches_root_oracle(&heads);
                assert_eq!(is_tree(&heads), expected, "{:?}", heads);
            }
        }
    }
}
