//! Brute-force reference computations.
//!
//! These are deliberately naive and independent of the optimized search
//! implementations: the validation suite and the crate's own tests compare
//! engine output against them. Exhaustive enumeration visits every simple
//! path, so keep it to small instances (it is exponential in the worst
//! case); `yen_ksp` serves as the scalable reference beyond that.

use crate::fixed::{self, Milli};
use crate::graph::VertexId;
use crate::ksp::{PathGraph, RankedPath};

/// Every simple path from `s` to `t` in `(cost, lexicographic)` order,
/// truncated to `k`. Pass `usize::MAX` for all of them.
pub fn exhaustive_ksp<G: PathGraph + ?Sized>(
    g: &G,
    s: VertexId,
    t: VertexId,
    k: usize,
) -> Vec<RankedPath> {
    if s == t {
        return vec![RankedPath {
            cost: 0,
            vertices: vec![s],
        }];
    }
    let mut out = Vec::new();
    let mut on_path = vec![false; g.id_bound()];
    let mut path = vec![s];
    on_path[s as usize] = true;
    dfs(g, t, &mut path, &mut on_path, 0, &mut out);
    out.sort();
    out.truncate(k);
    out
}

fn dfs<G: PathGraph + ?Sized>(
    g: &G,
    t: VertexId,
    path: &mut Vec<VertexId>,
    on_path: &mut Vec<bool>,
    cost: Milli,
    out: &mut Vec<RankedPath>,
) {
    let v = *path.last().unwrap();
    if v == t {
        out.push(RankedPath {
            cost,
            vertices: path.clone(),
        });
        return;
    }
    let mut next: Vec<(VertexId, Milli)> = Vec::new();
    g.for_each_neighbor(v, &mut |w, c| next.push((w, c)));
    for (w, c) in next {
        if on_path[w as usize] {
            continue;
        }
        on_path[w as usize] = true;
        path.push(w);
        dfs(g, t, path, on_path, fixed::add(cost, c), out);
        path.pop();
        on_path[w as usize] = false;
    }
}

/// Shortest distance between every vertex and `t` by plain Dijkstra,
/// re-derived here so bound checks do not lean on the engine's own search.
pub fn dijkstra_oracle<G: PathGraph + ?Sized>(g: &G, t: VertexId) -> Vec<Milli> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let mut dist = vec![fixed::INF; g.id_bound()];
    let mut heap = BinaryHeap::new();
    dist[t as usize] = 0;
    heap.push(Reverse((0, t)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        g.for_each_neighbor(v, &mut |w, c| {
            let nd = fixed::add(d, c);
            if nd < dist[w as usize] {
                dist[w as usize] = nd;
                heap.push(Reverse((nd, w)));
            }
        });
    }
    dist
}
