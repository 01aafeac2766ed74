use super::{DecodeResult, ScoreMatrix};

/// Chart cells for one span `(s, t)`, `s < t`.
///
/// Right cells are headed by `s`, left cells by `t`. Incomplete cells end in
/// the arc between `s` and `t`; complete cells have absorbed all dependents
/// on the far side.
struct Chart {
    size: usize,
    complete_right: Vec<f64>,
    complete_left: Vec<f64>,
    incomplete_right: Vec<f64>,
    incomplete_left: Vec<f64>,
    split_complete_right: Vec<usize>,
    split_complete_left: Vec<usize>,
    split_incomplete: Vec<usize>,
}

impl Chart {
    fn at(&self, s: usize, t: usize) -> usize {
        s * self.size + t
    }
}

/// Highest-scoring projective tree, first-order Eisner dynamic program.
///
/// Among equal-scoring splits the leftmost is kept.
pub fn eisner_decode(scores: &ScoreMatrix) -> DecodeResult {
    let n = scores.n();
    let size = n + 1;
    let cells = size * size;
    let mut c = Chart {
        size,
        complete_right: vec![f64::NEG_INFINITY; cells],
        complete_left: vec![f64::NEG_INFINITY; cells],
        incomplete_right: vec![f64::NEG_INFINITY; cells],
        incomplete_left: vec![f64::NEG_INFINITY; cells],
        split_complete_right: vec![0; cells],
        split_complete_left: vec![0; cells],
        split_incomplete: vec![0; cells],
    };
    for s in 0..size {
        let i = c.at(s, s);
        c.complete_right[i] = 0.0;
        c.complete_left[i] = 0.0;
    }

    for width in 1..size {
        for s in 0..size - width {
            let t = s + width;
            let here = c.at(s, t);

            let mut best = f64::NEG_INFINITY;
            let mut best_r = s;
            for r in s..t {
                let v = c.complete_right[c.at(s, r)] + c.complete_left[c.at(r + 1, t)];
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
            c.split_incomplete[here] = best_r;
            c.incomplete_right[here] = best + scores.get(s, t);
            if s != 0 {
                c.incomplete_left[here] = best + scores.get(t, s);
            }

            let mut best = f64::NEG_INFINITY;
            let mut best_r = s;
            for r in s..t {
                let v = c.complete_left[c.at(s, r)] + c.incomplete_left[c.at(r, t)];
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
            c.complete_left[here] = best;
            c.split_complete_left[here] = best_r;

            let mut best = f64::NEG_INFINITY;
            let mut best_r = s + 1;
            for r in s + 1..=t {
                let v = c.incomplete_right[c.at(s, r)] + c.complete_right[c.at(r, t)];
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
            c.complete_right[here] = best;
            c.split_complete_right[here] = best_r;
        }
    }

    let mut heads = vec![0usize; n];
    backtrack(&c, Cell::CompleteRight, 0, n, &mut heads);
    DecodeResult::from_heads(scores, heads)
}

#[derive(Clone, Copy)]
enum Cell {
    CompleteRight,
    CompleteLeft,
    IncompleteRight,
    IncompleteLeft,
}

fn backtrack(c: &Chart, cell: Cell, s: usize, t: usize, heads: &mut [usize]) {
    let mut stack = vec![(cell, s, t)];
    while let Some((cell, s, t)) = stack.pop() {
        if s == t {
            continue;
        }
        let here = c.at(s, t);
        match cell {
            Cell::CompleteRight => {
                let r = c.split_complete_right[here];
                stack.push((Cell::IncompleteRight, s, r));
                stack.push((Cell::CompleteRight, r, t));
            }
            Cell::CompleteLeft => {
                let r = c.split_complete_left[here];
                stack.push((Cell::CompleteLeft, s, r));
                stack.push((Cell::IncompleteLeft, r, t));
            }
            Cell::IncompleteRight | Cell::IncompleteLeft => {
                if let Cell::IncompleteRight = cell {
                    heads[t - 1] = s;
                } else {
                    heads[s - 1] = t;
                }
                let r = c.split_incomplete[here];
                stack.push((Cell::CompleteRight, s, r));
                stack.push((Cell::CompleteLeft, r + 1, t));
            }
        }
    }
}
