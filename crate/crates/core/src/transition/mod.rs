//! Arc-standard transition system and its static oracle.

pub mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conllu::Edu;
use crate::error::{Error, Result};
use crate::treebank::HeadVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transition {
    Shift,
    LeftArc,
    RightArc,
}

impl Transition {
    /// Preference order used to break score ties.
    pub const ALL: [Transition; 3] = [Transition::Shift, Transition::LeftArc, Transition::RightArc];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transition::Shift => "SHIFT",
            Transition::LeftArc => "LEFT_ARC",
            Transition::RightArc => "RIGHT_ARC",
        })
    }
}

/// Parser state: a stack over ROOT and tokens, the next buffer position and
/// the arcs built so far.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    n: usize,
    stack: Vec<usize>,
    buffer_front: usize,
    heads: Vec<Option<usize>>,
}

impl Configuration {
    pub fn initial(n: usize) -> Self {
        Configuration {
            n,
            stack: vec![0],
            buffer_front: 1,
            heads: vec![None; n + 1],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    /// Next unconsumed token, if any.
    pub fn buffer_front(&self) -> Option<usize> {
        (self.buffer_front <= self.n).then_some(self.buffer_front)
    }

    pub fn buffer(&self) -> std::ops::RangeInclusive<usize> {
        self.buffer_front..=self.n
    }

    /// `i`-th stack element from the top, 0 being the top.
    pub fn stack_from_top(&self, i: usize) -> Option<usize> {
        self.stack.len().checked_sub(i + 1).map(|k| self.stack[k])
    }

    pub fn head_of(&self, d: usize) -> Option<usize> {
        self.heads[d]
    }

    /// Arcs as `(head, dependent)` pairs, ordered by dependent.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        (1..=self.n).filter_map(|d| self.heads[d].map(|h| (h, d))).collect()
    }

    pub fn is_terminal(&self) -> bool {
        self.buffer_front > self.n && self.stack == [0]
    }

    pub fn is_legal(&self, t: Transition) -> bool {
        match t {
            Transition::Shift => self.buffer_front <= self.n,
            Transition::LeftArc => self.stack.len() >= 2 && self.stack[self.stack.len() - 2] != 0,
            Transition::RightArc => self.stack.len() >= 2,
        }
    }

    /// The tree once terminal; `None` before.
    pub fn heads(&self) -> Option<HeadVector> {
        if !self.is_terminal() {
            return None;
        }
        let heads = self.heads[1..].iter().map(|h| h.expect("terminal configurations attach every token"));
        Some(HeadVector::new_unchecked(heads.collect()))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stack {:?}, buffer {}..={}", self.stack, self.buffer_front, self.n)
    }
}

/// Applies one transition, failing if its preconditions do not hold.
pub fn apply(c: &Configuration, t: Transition) -> Result<Configuration> {
    let mut next = c.clone();
    apply_in_place(&mut next, t)?;
    Ok(next)
}

pub(crate) fn apply_in_place(c: &mut Configuration, t: Transition) -> Result<()> {
    if !c.is_legal(t) {
        return Err(Error::IllegalTransition {
            transition: t.to_string(),
            configuration: c.to_string(),
        });
    }
    match t {
        Transition::Shift => {
            c.stack.push(c.buffer_front);
            c.buffer_front += 1;
        }
        Transition::LeftArc => {
            let top = c.stack.pop().expect("legal LEFT_ARC");
            let second = c.stack.pop().expect("legal LEFT_ARC");
            c.heads[second] = Some(top);
            c.stack.push(top);
        }
        Transition::RightArc => {
            let top = c.stack.pop().expect("legal RIGHT_ARC");
            let second = *c.stack.last().expect("legal RIGHT_ARC");
            c.heads[top] = Some(second);
        }
    }
    Ok(())
}

/// The gold-consistent transition for `c` under the arc-standard system.
pub fn static_oracle(c: &Configuration, gold: &HeadVector) -> Result<Transition> {
    if gold.len() != c.n {
        return Err(Error::InvalidArgument(format!(
            "gold tree has {} tokens, configuration {}",
            gold.len(),
            c.n
        )));
    }
    if let (Some(top), Some(second)) = (c.stack_from_top(0), c.stack_from_top(1)) {
        if second != 0 && gold.head(second) == top {
            return Ok(Transition::LeftArc);
        }
        if top != 0 && gold.head(top) == second {
            let complete = (1..=c.n).all(|d| gold.head(d) != top || c.heads[d] == Some(top));
            if complete {
                return Ok(Transition::RightArc);
            }
        }
    }
    if c.is_legal(Transition::Shift) {
        return Ok(Transition::Shift);
    }
    Err(Error::Oracle(format!("no gold transition from {}", c)))
}

/// Oracle derivation for a gold tree, or `None` when the tree is not
/// projective and cannot be derived.
pub fn derive_sequence(gold: &HeadVector) -> Result<Option<Vec<(Configuration, Transition)>>> {
    if !gold.is_tree() {
        return Err(Error::InvalidTree(format!("{} is not a tree", gold)));
    }
    if !gold.is_projective()? {
        return Ok(None);
    }
    let mut c = Configuration::initial(gold.len());
    let mut out = Vec::with_capacity(2 * gold.len());
    while !c.is_terminal() {
        let t = static_oracle(&c, gold)?;
        out.push((c.clone(), t));
        apply_in_place(&mut c, t)?;
    }
    Ok(Some(out))
}

/// Oracle derivation for an annotated EDU; `None` signals a non-projective
/// tree the caller should skip.
pub fn derive_gold_sequence(edu: &Edu) -> Result<Option<Vec<(Configuration, Transition)>>> {
    let gold = edu
        .heads()
        .ok_or_else(|| Error::InvalidTree("EDU has missing or invalid heads".into()))?;
    derive_sequence(&gold)
}

/// Replays transitions from the initial configuration.
pub fn replay(n: usize, transitions: impl IntoIterator<Item = Transition>) -> Result<Configuration> {
    let mut c = Configuration::initial(n);
    for t in transitions {
        apply_in_place(&mut c, t)?;
    }
    Ok(c)
}
