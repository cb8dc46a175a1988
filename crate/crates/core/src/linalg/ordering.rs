use std::collections::BTreeSet;

use super::SparsityPattern;

/// Minimum-degree fill-reducing ordering of the graph of `A + Aᵀ`.
///
/// Returns `perm` with `perm[new] = old`. Nodes are eliminated greedily by
/// current degree in the elimination graph, ties broken by lowest index, so
/// the ordering is a deterministic function of the pattern.
pub fn minimum_degree(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.ncols().max(pattern.nrows());
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for j in 0..pattern.ncols() {
        for &i in pattern.column(j) {
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }

    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for _ in 0..n {
        let pivot = (0..n)
            .filter(|&v| !eliminated[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("a node remains");
        eliminated[pivot] = true;
        perm.push(pivot);

        let neighbours: Vec<usize> = std::mem::take(&mut adj[pivot]).into_iter().collect();
        for &u in &neighbours {
            adj[u].remove(&pivot);
        }
        // Eliminating the pivot turns its neighbourhood into a clique.
        for (k, &u) in neighbours.iter().enumerate() {
            for &w in &neighbours[k + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
    }
    perm
}

/// Inverse of a permutation: `inv[perm[k]] = k`.
pub(crate) fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
