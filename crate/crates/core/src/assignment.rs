//! Min-cost perfect assignment by successive shortest augmenting paths.
//!
//! Dijkstra with row/column potentials over a sparse bipartite graph with
//! non-negative integer costs. Ties in the priority queue go to the lowest
//! column index, so results are a pure function of the input.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Assignment {
    pub col_of_row: Vec<usize>,
    /// Dual potentials with `row_pot[r] + col_pot[c] <= cost(r, c)` on every
    /// edge and equality on matched edges.
    pub row_pot: Vec<i64>,
    pub col_pot: Vec<i64>,
    pub cost: i64,
}

/// `adj[r]` lists `(column, cost)` pairs. Returns `None` when no perfect
/// matching exists.
pub(crate) fn min_cost_perfect_assignment(adj: &[Vec<(usize, i64)>]) -> Option<Assignment> {
    let n = adj.len();
    let mut u = vec![0i64; n];
    let mut v = vec![0i64; n];
    let mut col_of_row = vec![NONE; n];
    let mut row_of_col = vec![NONE; n];
    let mut dist = vec![i64::MAX; n];
    let mut from = vec![NONE; n];
    let mut done = vec![false; n];
    let mut finalized: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();

    for root in 0..n {
        for &c in &finalized {
            done[c] = false;
        }
        finalized.clear();
        dist.iter_mut().for_each(|d| *d = i64::MAX);
        heap.clear();

        let relax = |row: usize, base: i64, dist: &mut [i64], from: &mut [usize], heap: &mut BinaryHeap<_>, done: &[bool], u: &[i64], v: &[i64]| {
            for &(c, w) in &adj[row] {
                if done[c] {
                    continue;
                }
                let nd = base + w - u[row] - v[c];
                if nd < dist[c] {
                    dist[c] = nd;
                    from[c] = row;
                    heap.push(Reverse((nd, c)));
                }
            }
        };
        relax(root, 0, &mut dist, &mut from, &mut heap, &done, &u, &v);

        let mut end = NONE;
        while let Some(Reverse((d, c))) = heap.pop() {
            if done[c] || d > dist[c] {
                continue;
            }
            done[c] = true;
            finalized.push(c);
            if row_of_col[c] == NONE {
                end = c;
                break;
            }
            relax(row_of_col[c], d, &mut dist, &mut from, &mut heap, &done, &u, &v);
        }
        if end == NONE {
            return None;
        }

        let delta = dist[end];
        u[root] += delta;
        for &c in &finalized {
            if c == end {
                continue;
            }
            let shift = delta - dist[c];
            v[c] -= shift;
            u[row_of_col[c]] += shift;
        }

        let mut c = end;
        loop {
            let r = from[c];
            let prev = col_of_row[r];
            col_of_row[r] = c;
            row_of_col[c] = r;
            if r == root {
                break;
            }
            c = prev;
        }
    }

    let cost = (0..n)
        .map(|r| adj[r].iter().find(|e| e.0 == col_of_row[r]).expect("matched edge exists").1)
        .sum();
    Some(Assignment { col_of_row, row_pot: u, col_pot: v, cost })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(adj: &[Vec<(usize, i64)>]) -> Option<i64> {
        fn rec(r: usize, adj: &[Vec<(usize, i64)>], used: &mut Vec<bool>) -> Option<i64> {
            if r == adj.len() {
                return Some(0);
            }
            let mut best: Option<i64> = None;
            for &(c, w) in &adj[r] {
                if !used[c] {
                    used[c] = true;
                    if let Some(rest) = rec(r + 1, adj, used) {
                        best = Some(best.map_or(w + rest, |b: i64| b.min(w + rest)));
                    }
                    used[c] = false;
                }
            }
            best
        }
        rec(0, adj, &mut vec![false; adj.len()])
    }

    #[test]
    fn matches_brute_force_and_certifies_duals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.random_range(1..=6);
            let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
            for row in adj.iter_mut() {
                for c in 0..n {
                    if rng.random_bool(0.5) {
                        row.push((c, rng.random_range(0..4)));
                    }
                }
            }
            let got = min_cost_perfect_assignment(&adj);
            assert_eq!(got.as_ref().map(|a| a.cost), brute(&adj));
            if let Some(a) = got {
                for (r, edges) in adj.iter().enumerate() {
                    for &(c, w) in edges {
                        assert!(a.row_pot[r] + a.col_pot[c] <= w);
                        if a.col_of_row[r] == c {
                            assert_eq!(a.row_pot[r] + a.col_pot[c], w);
                        }
                    }
                }
            }
        }
    }
}
