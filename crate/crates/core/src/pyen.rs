//! Accelerated loopless KSP for the per-subgraph partial searches.
//!
//! [`pyen_ksp`] returns exactly what [`crate::ksp::yen_ksp`] returns — same
//! paths, same `(cost, lexicographic)` order, bit for bit — but runs each
//! spur search forward from the deviation vertex with two shortcuts layered
//! on top:
//!
//! * **Suffix reuse.** One reverse shortest-path-tree from the target seeds a
//!   [`ReuseIndex`] (per-vertex distance to the target plus the next hop of
//!   the lexicographically smallest shortest path). A spur search that
//!   settles a vertex whose stored suffix avoids everything the deviation
//!   removed completes through the suffix immediately and never expands that
//!   subtree.
//! * **Task pruning.** Once the candidate pool already holds as many pending
//!   paths as there are ranks left to emit, a deviation task whose root cost
//!   plus search frontier exceeds the worst still-needed pending cost is
//!   abandoned: nothing it could produce can enter the final list. Ties are
//!   kept — a same-cost candidate can still win lexicographically.
//!
//! Both shortcuts can be switched off to show they never change results.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::fixed::{self, Milli, INF};
use crate::graph::VertexId;
use crate::ksp::{
    dijkstra_distances, edge_cost, PathGraph, QueryError, RankedPath, Residual,
};

/// Per-vertex shortest distance to a fixed target, with the next hop along
/// the lexicographically smallest shortest path. Built once per query by a
/// single reverse shortest-path-tree computation; spur paths never write to
/// it, so every stored suffix is a true shortest path of the unmodified
/// graph.
#[derive(Debug, Clone)]
pub struct ReuseIndex {
    pub target: VertexId,
    /// Distance from each vertex to `target`; `INF` when unknown/unreachable.
    pub dist: Vec<Milli>,
    /// Next vertex on the stored shortest path toward `target`; `None` at
    /// the target itself and at unreachable vertices.
    pub next: Vec<Option<VertexId>>,
}

impl ReuseIndex {
    pub fn build<G: PathGraph + ?Sized>(g: &G, target: VertexId) -> ReuseIndex {
        let dist = dijkstra_distances(g, target, &Residual::default());
        let mut next: Vec<Option<VertexId>> = vec![None; g.id_bound()];
        for v in 0..g.id_bound() {
            if dist[v] == INF || v as VertexId == target {
                continue;
            }
            let here = dist[v];
            let mut hop = None;
            g.for_each_neighbor(v as VertexId, &mut |w, c| {
                // First (= smallest-id) neighbor still on a shortest path:
                // the same greedy rule the plain lex search walks by.
                if hop.is_none()
                    && dist[w as usize] != INF
                    && fixed::add(c, dist[w as usize]) == here
                {
                    hop = Some(w);
                }
            });
            next[v] = Some(hop.expect("finite distance implies a successor"));
        }
        ReuseIndex { target, dist, next }
    }

    /// The stored suffix from `v` to the target (inclusive of both), if it
    /// avoids the residual's removed vertices/edges and every vertex in
    /// `on_path` after `v`. Positive costs make the stored tree acyclic, so
    /// the walk terminates.
    pub fn valid_suffix(
        &self,
        v: VertexId,
        residual: &Residual,
        on_path: &HashSet<VertexId>,
    ) -> Option<Vec<VertexId>> {
        if self.dist[v as usize] == INF {
            return None;
        }
        let mut suffix = vec![v];
        let mut cur = v;
        while cur != self.target {
            let nxt = self.next[cur as usize].expect("finite distance implies a successor");
            if residual.banned_vertices.contains(&nxt)
                || residual.bans_edge(cur, nxt)
                || on_path.contains(&nxt)
            {
                return None;
            }
            suffix.push(nxt);
            cur = nxt;
        }
        Some(suffix)
    }
}

/// Instrumentation for one [`pyen_ksp`] run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PyenStats {
    /// Spur searches that completed a vertex through a stored suffix.
    pub reuse_hits: u64,
    /// Deviation tasks abandoned because their frontier could no longer
    /// reach the final list.
    pub pruned_tasks: u64,
    /// Spur searches started (deviation tasks plus the rank-1 search).
    pub spur_searches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PyenOptions {
    pub use_reuse: bool,
    pub use_pruning: bool,
}

impl Default for PyenOptions {
    fn default() -> Self {
        PyenOptions {
            use_reuse: true,
            use_pruning: true,
        }
    }
}

enum SpurOutcome {
    Found(RankedPath),
    NotFound,
    Abandoned,
}

/// Forward best-first search from `spur` to `t` under `residual`, exploring
/// partial vertex sequences in `(cost, sequence)` order so the returned path
/// is exactly the lexicographically smallest shortest one. Entries whose
/// endpoint has a valid stored suffix are completed in place; any pop whose
/// cost exceeds `frontier_limit` abandons the task (heap pops are
/// non-decreasing, so nothing cheaper remains).
fn spur_search<G: PathGraph + ?Sized>(
    g: &G,
    spur: VertexId,
    t: VertexId,
    residual: &Residual,
    reuse: Option<&ReuseIndex>,
    frontier_limit: Milli,
    stats: &mut PyenStats,
) -> SpurOutcome {
    stats.spur_searches += 1;
    let mut settled = vec![false; g.id_bound()];
    let mut heap: BinaryHeap<Reverse<(Milli, Vec<VertexId>)>> = BinaryHeap::new();
    heap.push(Reverse((0, vec![spur])));
    while let Some(Reverse((d, seq))) = heap.pop() {
        if d > frontier_limit {
            return SpurOutcome::Abandoned;
        }
        let v = *seq.last().expect("sequences are non-empty");
        if v == t {
            return SpurOutcome::Found(RankedPath {
                cost: d,
                vertices: seq,
            });
        }
        if settled[v as usize] {
            continue;
        }
        settled[v as usize] = true;
        if let Some(ri) = reuse {
            if ri.dist[v as usize] != INF {
                let on_path: HashSet<VertexId> = seq.iter().copied().collect();
                if let Some(suffix) = ri.valid_suffix(v, residual, &on_path) {
                    stats.reuse_hits += 1;
                    let mut vertices = seq;
                    vertices.extend_from_slice(&suffix[1..]);
                    heap.push(Reverse((fixed::add(d, ri.dist[v as usize]), vertices)));
                    // Every other continuation through `v` costs at least as
                    // much and reads lexicographically later than the stored
                    // suffix, so the subtree below `v` is done.
                    continue;
                }
            }
        }
        g.for_each_neighbor(v, &mut |w, c| {
            if settled[w as usize]
                || residual.banned_vertices.contains(&w)
                || residual.bans_edge(v, w)
            {
                return;
            }
            let mut vertices = seq.clone();
            vertices.push(w);
            heap.push(Reverse((fixed::add(d, c), vertices)));
        });
    }
    SpurOutcome::NotFound
}

/// Cost of the `m`-th cheapest pending candidate, or `INF` when fewer than
/// `m` are pending. This is the pruning bound: the final list's missing ranks
/// all cost at most this much.
fn mth_pending_cost(pool: &BinaryHeap<Reverse<RankedPath>>, m: usize) -> Milli {
    if m == 0 || pool.len() < m {
        return INF;
    }
    let mut costs: Vec<Milli> = pool.iter().map(|Reverse(p)| p.cost).collect();
    let (_, kth, _) = costs.select_nth_unstable(m - 1);
    *kth
}

/// The `k` loopless shortest paths from `s` to `t`, identical to
/// [`crate::ksp::yen_ksp`] output, computed with suffix reuse and deviation
/// pruning per `opts`. Also returns the run's instrumentation counters.
pub fn pyen_ksp<G: PathGraph + ?Sized>(
    g: &G,
    s: VertexId,
    t: VertexId,
    k: usize,
    opts: PyenOptions,
) -> Result<(Vec<RankedPath>, PyenStats), QueryError> {
    if k == 0 {
        return Err(QueryError::ZeroK);
    }
    for v in [s, t] {
        if (v as usize) >= g.id_bound() {
            return Err(QueryError::VertexOutOfRange(v));
        }
    }
    let mut stats = PyenStats::default();
    if s == t {
        return Ok((
            vec![RankedPath {
                cost: 0,
                vertices: vec![s],
            }],
            stats,
        ));
    }
    let reuse_index = opts.use_reuse.then(|| ReuseIndex::build(g, t));
    let reuse = reuse_index.as_ref();

    let mut accepted: Vec<RankedPath> = Vec::new();
    let mut pool: BinaryHeap<Reverse<RankedPath>> = BinaryHeap::new();
    let mut seen: HashSet<Vec<VertexId>> = HashSet::new();

    match spur_search(g, s, t, &Residual::default(), reuse, INF, &mut stats) {
        SpurOutcome::Found(p) => {
            seen.insert(p.vertices.clone());
            accepted.push(p);
        }
        _ => return Ok((accepted, stats)),
    }

    while accepted.len() < k {
        let prev = accepted.last().expect("rank 1 accepted").clone();
        // Bound for this whole stage: with i paths out, only k-i ranks
        // remain, and the pool already shows k-i candidates at or below this
        // cost. A snapshot per stage keeps task outcomes independent of task
        // order.
        let bound = if opts.use_pruning {
            mth_pending_cost(&pool, k - accepted.len())
        } else {
            INF
        };
        let mut root_cost: Milli = 0;
        for l in 0..prev.vertices.len() - 1 {
            let spur = prev.vertices[l];
            let root = &prev.vertices[..=l];
            let mut residual = Residual::default();
            for &v in &root[..l] {
                residual.banned_vertices.insert(v);
            }
            for acc in &accepted {
                if acc.vertices.len() > l + 1 && acc.vertices[..=l] == *root {
                    residual.ban_edge(acc.vertices[l], acc.vertices[l + 1]);
                }
            }
            let limit = if bound == INF { INF } else { bound - root_cost };
            match spur_search(g, spur, t, &residual, reuse, limit, &mut stats) {
                SpurOutcome::Found(spur_path) => {
                    let mut vertices = root[..l].to_vec();
                    vertices.extend_from_slice(&spur_path.vertices);
                    let cand = RankedPath {
                        cost: fixed::add(root_cost, spur_path.cost),
                        vertices,
                    };
                    if seen.insert(cand.vertices.clone()) {
                        pool.push(Reverse(cand));
                    }
                }
                SpurOutcome::NotFound => {}
                SpurOutcome::Abandoned => stats.pruned_tasks += 1,
            }
            root_cost = fixed::add(
                root_cost,
                edge_cost(g, prev.vertices[l], prev.vertices[l + 1])
                    .expect("accepted path edges exist"),
            );
        }
        match pool.pop() {
            Some(Reverse(p)) => accepted.push(p),
            None => break,
        }
    }
    Ok((accepted, stats))
}
