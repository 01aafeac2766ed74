use super::{DecodeResult, ScoreMatrix};

// Chu-Liu-Edmonds for maximum spanning arborescences on a dense graph:
//
// 1. pick the best incoming edge for every non-root node;
// 2. if those edges form a cycle, contract it into one node, scoring an
//    edge u -> cycle by s(u, v) - s(best(v), v) for the cycle node v it
//    enters (the cycle total is a shared constant and dropped);
// 3. solve the contracted graph recursively and expand, breaking the cycle
//    at the node where the chosen incoming edge enters.
//
// Node 0 is the root in every recursion level; contraction keeps the
// relative order of the surviving nodes and appends the supernode last.

/// Highest-scoring dependency tree rooted at 0, non-projective allowed.
pub fn cle_decode(scores: &ScoreMatrix) -> DecodeResult {
    let n = scores.n();
    let graph: Vec<Vec<f64>> = (0..=n)
        .map(|h| {
            (0..=n)
                .map(|d| {
                    if ScoreMatrix::is_masked(h, d) {
                        f64::NEG_INFINITY
                    } else {
                        scores.get(h, d)
                    }
                })
                .collect()
        })
        .collect();
    let parents = maximum_arborescence(&graph);
    DecodeResult::from_heads(scores, parents[1..].to_vec())
}

fn best_incoming(graph: &[Vec<f64>]) -> Vec<usize> {
    let m = graph.len();
    let mut best = vec![0usize; m];
    for v in 1..m {
        let mut b = 0;
        for u in 1..m {
            if u != v && graph[u][v] > graph[b][v] {
                b = u;
            }
        }
        best[v] = b;
    }
    best
}

/// Nodes of some cycle among the chosen parents, if any.
fn find_cycle(parents: &[usize]) -> Option<Vec<usize>> {
    let m = parents.len();
    // 0 = unseen, 1 = on current walk, 2 = done
    let mut state = vec![0u8; m];
    state[0] = 2;
    for start in 1..m {
        let mut walk = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            walk.push(v);
            v = parents[v];
        }
        if state[v] == 1 {
            let pos = walk.iter().position(|&x| x == v).expect("v is on the walk");
            let mut cycle = walk[pos..].to_vec();
            cycle.sort_unstable();
            return Some(cycle);
        }
        for w in walk {
            state[w] = 2;
        }
    }
    None
}

fn maximum_arborescence(graph: &[Vec<f64>]) -> Vec<usize> {
    let m = graph.len();
    let best = best_incoming(graph);
    let cycle = match find_cycle(&best) {
        None => return best,
        Some(c) => c,
    };

    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let survivors: Vec<usize> = (0..m).filter(|&v| !in_cycle[v]).collect();
    let k = survivors.len();

    let mut contracted = vec![vec![f64::NEG_INFINITY; k + 1]; k + 1];
    let mut enters = vec![0usize; k];
    let mut leaves = vec![0usize; k];
    for (iu, &u) in survivors.iter().enumerate() {
        for (iv, &v) in survivors.iter().enumerate() {
            contracted[iu][iv] = graph[u][v];
        }
        let mut best_in = f64::NEG_INFINITY;
        let mut best_out = f64::NEG_INFINITY;
        enters[iu] = cycle[0];
        leaves[iu] = cycle[0];
        for &c in &cycle {
            let incoming = graph[u][c] - graph[best[c]][c];
            if incoming > best_in {
                best_in = incoming;
                enters[iu] = c;
            }
            if graph[c][u] > best_out {
                best_out = graph[c][u];
                leaves[iu] = c;
            }
        }
        contracted[iu][k] = best_in;
        contracted[k][iu] = best_out;
    }
    // the root has no incoming edges
    contracted[k][0] = f64::NEG_INFINITY;

    let sub = maximum_arborescence(&contracted);

    let mut parents = best;
    for (iv, &v) in survivors.iter().enumerate().skip(1) {
        let p = sub[iv];
        parents[v] = if p == k { leaves[iv] } else { survivors[p] };
    }
    let entry_from = sub[k];
    let entry = enters[entry_from];
    parents[entry] = survivors[entry_from];
    parents
}
