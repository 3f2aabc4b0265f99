//! Loopless k-shortest-path search.
//!
//! [`YenEnumerator`] produces simple paths between two vertices one rank at a
//! time, in ascending `(distance, vertex sequence)` order: equal-distance
//! paths are ordered lexicographically by their vertex ids. That total order
//! is the project-wide tie rule; every search in this crate (including the
//! per-spur shortest-path searches here) honors it, so independent
//! implementations produce bit-identical path lists.
//!
//! [`yen_ksp`] is the classic batch form and doubles as the reference
//! implementation the optimized searches are tested against.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use thiserror::Error;

use crate::fixed::{self, Milli, INF};
use crate::graph::{Graph, VertexId};

/// Read-only view of a weighted undirected graph for path searches.
///
/// Implementations must visit neighbors in ascending vertex-id order (the
/// lexicographic tie rule depends on it) and must present each undirected
/// edge from both endpoints with the same cost.
pub trait PathGraph {
    /// Exclusive upper bound on vertex ids that can appear.
    fn id_bound(&self) -> usize;
    /// Calls `f(neighbor, cost)` for each edge incident to `v`, ascending by
    /// neighbor id. Costs are positive.
    fn for_each_neighbor(&self, v: VertexId, f: &mut dyn FnMut(VertexId, Milli));
}

impl PathGraph for Graph {
    fn id_bound(&self) -> usize {
        self.vertex_count()
    }

    fn for_each_neighbor(&self, v: VertexId, f: &mut dyn FnMut(VertexId, Milli)) {
        for &(w, e) in self.neighbors(v) {
            f(w, self.edge(e).current);
        }
    }
}

/// A simple path with its total cost. Ordered by `(cost, vertex sequence)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedPath {
    pub cost: Milli,
    pub vertices: Vec<VertexId>,
}

impl Ord for RankedPath {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .cmp(&other.cost)
            .then_with(|| self.vertices.cmp(&other.vertices))
    }
}

impl PartialOrd for RankedPath {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(VertexId),
}

/// Residual restrictions for a spur search: vertices that must not appear
/// and undirected edges (as ordered pairs `(min, max)`) that must not be
/// crossed.
#[derive(Debug, Default, Clone)]
pub struct Residual {
    pub banned_vertices: HashSet<VertexId>,
    pub banned_edges: HashSet<(VertexId, VertexId)>,
}

impl Residual {
    pub fn bans_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.banned_edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn ban_edge(&mut self, u: VertexId, v: VertexId) {
        self.banned_edges.insert((u.min(v), u.max(v)));
    }
}

/// Shortest distances from `source` to every vertex, honoring `residual`.
/// Unreachable vertices get [`INF`].
pub fn dijkstra_distances<G: PathGraph + ?Sized>(
    g: &G,
    source: VertexId,
    residual: &Residual,
) -> Vec<Milli> {
    let mut dist = vec![INF; g.id_bound()];
    if residual.banned_vertices.contains(&source) {
        return dist;
    }
    let mut heap: BinaryHeap<Reverse<(Milli, VertexId)>> = BinaryHeap::new();
    dist[source as usize] = 0;
    heap.push(Reverse((0, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        g.for_each_neighbor(v, &mut |w, c| {
            if residual.banned_vertices.contains(&w) || residual.bans_edge(v, w) {
                return;
            }
            let nd = fixed::add(d, c);
            if nd < dist[w as usize] {
                dist[w as usize] = nd;
                heap.push(Reverse((nd, w)));
            }
        });
    }
    dist
}

/// The shortest path from `s` to `t` under `residual`, with equal-cost ties
/// broken toward the lexicographically smallest vertex sequence.
///
/// Runs one Dijkstra from `t` and then walks forward from `s`, always taking
/// the smallest neighbor that still lies on a shortest path; positive costs
/// make the walk strictly decrease remaining distance, so it terminates and
/// the result is simple.
pub fn lex_shortest_path<G: PathGraph + ?Sized>(
    g: &G,
    s: VertexId,
    t: VertexId,
    residual: &Residual,
) -> Option<RankedPath> {
    if residual.banned_vertices.contains(&s) || residual.banned_vertices.contains(&t) {
        return None;
    }
    if s == t {
        return Some(RankedPath {
            cost: 0,
            vertices: vec![s],
        });
    }
    let dist_t = dijkstra_distances(g, t, residual);
    if dist_t[s as usize] == INF {
        return None;
    }
    let total = dist_t[s as usize];
    let mut vertices = vec![s];
    let mut cur = s;
    while cur != t {
        let mut next: Option<VertexId> = None;
        let here = dist_t[cur as usize];
        g.for_each_neighbor(cur, &mut |w, c| {
            if next.is_some() {
                return;
            }
            if residual.banned_vertices.contains(&w) || residual.bans_edge(cur, w) {
                return;
            }
            if dist_t[w as usize] != INF && fixed::add(c, dist_t[w as usize]) == here {
                next = Some(w);
            }
        });
        let next = next.expect("finite distance implies a shortest-path successor");
        vertices.push(next);
        cur = next;
    }
    Some(RankedPath {
        cost: total,
        vertices,
    })
}

/// Cost of the edge between `u` and `v`, if present.
pub fn edge_cost<G: PathGraph + ?Sized>(g: &G, u: VertexId, v: VertexId) -> Option<Milli> {
    let mut found = None;
    g.for_each_neighbor(u, &mut |w, c| {
        if w == v && found.is_none() {
            found = Some(c);
        }
    });
    found
}

/// Total cost of a vertex sequence, or `None` if some edge is missing.
pub fn path_cost<G: PathGraph + ?Sized>(g: &G, vertices: &[VertexId]) -> Option<Milli> {
    let mut total = 0;
    for pair in vertices.windows(2) {
        total = fixed::add(total, edge_cost(g, pair[0], pair[1])?);
    }
    Some(total)
}

/// Resumable loopless-KSP enumeration between a fixed vertex pair.
///
/// Each [`next_path`](Self::next_path) call yields the next simple path in
/// `(cost, lexicographic)` order, or `None` once every simple path has been
/// produced. The caller must pass the same graph to every call; the
/// enumerator's internal state assumes the graph has not changed in between.
#[derive(Debug, Clone)]
pub struct YenEnumerator {
    s: VertexId,
    t: VertexId,
    accepted: Vec<RankedPath>,
    /// Accepted-path prefix (spur vertex included) → successor vertices used
    /// by accepted paths continuing that prefix. Lets a deviation look up its
    /// banned edges directly instead of rescanning every accepted path.
    prefix_next: HashMap<Vec<VertexId>, BTreeSet<VertexId>>,
    pool: BinaryHeap<Reverse<RankedPath>>,
    seen: HashSet<Vec<VertexId>>,
    exhausted: bool,
}

impl YenEnumerator {
    pub fn new(s: VertexId, t: VertexId) -> YenEnumerator {
        YenEnumerator {
            s,
            t,
            accepted: Vec::new(),
            prefix_next: HashMap::new(),
            pool: BinaryHeap::new(),
            seen: HashSet::new(),
            exhausted: false,
        }
    }

    fn accept(&mut self, p: RankedPath) {
        for l in 0..p.vertices.len().saturating_sub(1) {
            self.prefix_next
                .entry(p.vertices[..=l].to_vec())
                .or_default()
                .insert(p.vertices[l + 1]);
        }
        self.accepted.push(p);
    }

    /// Paths already produced, in order.
    pub fn produced(&self) -> &[RankedPath] {
        &self.accepted
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn next_path<G: PathGraph + ?Sized>(&mut self, g: &G) -> Option<RankedPath> {
        if self.exhausted {
            return None;
        }
        if self.s == self.t {
            // The only loopless path from a vertex to itself is the
            // zero-length one.
            self.exhausted = !self.accepted.is_empty();
            if self.exhausted {
                return None;
            }
            let p = RankedPath {
                cost: 0,
                vertices: vec![self.s],
            };
            self.accept(p.clone());
            return Some(p);
        }
        if self.accepted.is_empty() {
            match lex_shortest_path(g, self.s, self.t, &Residual::default()) {
                Some(p) => {
                    self.seen.insert(p.vertices.clone());
                    self.accept(p.clone());
                    return Some(p);
                }
                None => {
                    self.exhausted = true;
                    return None;
                }
            }
        }
        self.expand_deviations(g);
        match self.pool.pop() {
            Some(Reverse(p)) => {
                self.accept(p.clone());
                Some(p)
            }
            None => {
                self.exhausted = true;
                None
            }
        }
    }

    /// Pushes every deviation of the most recently accepted path into the
    /// candidate pool.
    fn expand_deviations<G: PathGraph + ?Sized>(&mut self, g: &G) {
        let prev = self.accepted.last().expect("expand after first path").clone();
        let mut root_cost: Milli = 0;
        for l in 0..prev.vertices.len() - 1 {
            let spur = prev.vertices[l];
            let root = &prev.vertices[..=l];
            let mut residual = Residual::default();
            // Loopless rule: the spur path may not revisit the root.
            for &v in &root[..l] {
                residual.banned_vertices.insert(v);
            }
            // Any accepted path sharing this root must leave the spur node
            // by a different edge.
            if let Some(nexts) = self.prefix_next.get(root) {
                for &w in nexts {
                    residual.ban_edge(spur, w);
                }
            }
            if let Some(spur_path) = lex_shortest_path(g, spur, self.t, &residual) {
                let mut vertices = root[..l].to_vec();
                vertices.extend_from_slice(&spur_path.vertices);
                let cand = RankedPath {
                    cost: fixed::add(root_cost, spur_path.cost),
                    vertices,
                };
                if self.seen.insert(cand.vertices.clone()) {
                    self.pool.push(Reverse(cand));
                }
            }
            root_cost = fixed::add(
                root_cost,
                edge_cost(g, prev.vertices[l], prev.vertices[l + 1])
                    .expect("accepted path edges exist"),
            );
        }
    }
}

/// The `k` loopless shortest paths from `s` to `t`, ascending by
/// `(distance, vertex sequence)`. Returns fewer than `k` paths when fewer
/// simple paths exist, and a single zero-length path when `s == t`.
pub fn yen_ksp<G: PathGraph + ?Sized>(
    g: &G,
    s: VertexId,
    t: VertexId,
    k: usize,
) -> Result<Vec<RankedPath>, QueryError> {
    if k == 0 {
        return Err(QueryError::ZeroK);
    }
    for v in [s, t] {
        if (v as usize) >= g.id_bound() {
            return Err(QueryError::VertexOutOfRange(v));
        }
    }
    let mut en = YenEnumerator::new(s, t);
    let mut out = Vec::new();
    while out.len() < k {
        match en.next_path(g) {
            Some(p) => out.push(p),
            None => break,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Classic textbook instance: 6 vertices, paths from 0 to 5.
    fn diamond() -> Graph {
        Graph::from_edges(
            6,
            &[
                (0, 1, 3),
                (0, 2, 2),
                (1, 2, 1),
                (1, 3, 4),
                (2, 3, 2),
                (2, 4, 3),
                (3, 4, 2),
                (3, 5, 1),
                (4, 5, 2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn shortest_path_matches_dijkstra_distance() {
        let g = diamond();
        let p = lex_shortest_path(&g, 0, 5, &Residual::default()).unwrap();
        assert_eq!(p.cost, fixed::from_int(5));
        assert_eq!(p.vertices, vec![0, 2, 3, 5]);
    }

    #[test]
    fn ksp_is_sorted_loopless_and_distinct() {
        let g = diamond();
        let paths = yen_ksp(&g, 0, 5, 10).unwrap();
        for w in paths.windows(2) {
            assert!(w[0] < w[1], "ascending (cost, lex) order");
        }
        for p in &paths {
            let mut vs = p.vertices.clone();
            vs.sort_unstable();
            vs.dedup();
            assert_eq!(vs.len(), p.vertices.len(), "loopless");
            assert_eq!(path_cost(&g, &p.vertices), Some(p.cost));
        }
    }

    #[test]
    fn matches_exhaustive_enumeration_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..60 {
            let n = 5 + (round % 6);
            let g = Graph::random_connected(n, n, 10, &mut rng);
            let all = oracle::exhaustive_ksp(&g, 0, (n - 1) as VertexId, usize::MAX);
            for k in [1, 2, 5, usize::MAX] {
                let got = yen_ksp(&g, 0, (n - 1) as VertexId, k).unwrap();
                let want: Vec<_> = all.iter().take(k).cloned().collect();
                assert_eq!(got, want, "n={n} k={k} round={round}");
            }
        }
    }

    #[test]
    fn equal_weight_ties_are_lexicographic() {
        // Two equal-cost routes 0-1-3 and 0-2-3; lex order puts 0,1,3 first.
        let g = Graph::from_edges(4, &[(0, 1, 1), (1, 3, 1), (0, 2, 1), (2, 3, 1)]).unwrap();
        let paths = yen_ksp(&g, 0, 3, 2).unwrap();
        assert_eq!(paths[0].vertices, vec![0, 1, 3]);
        assert_eq!(paths[1].vertices, vec![0, 2, 3]);
        assert_eq!(paths[0].cost, paths[1].cost);
    }

    #[test]
    fn source_equals_target_yields_single_zero_path() {
        let g = diamond();
        let paths = yen_ksp(&g, 2, 2, 5).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].cost, 0);
        assert_eq!(paths[0].vertices, vec![2]);
    }

    #[test]
    fn zero_k_is_rejected() {
        let g = diamond();
        assert_eq!(yen_ksp(&g, 0, 5, 0), Err(QueryError::ZeroK));
    }

    #[test]
    fn disconnected_pair_yields_empty_list() {
        let g = Graph::from_edges(4, &[(0, 1, 1), (2, 3, 1)]).unwrap();
        assert!(yen_ksp(&g, 0, 3, 4).unwrap().is_empty());
    }

    #[test]
    fn enumerator_is_resumable() {
        let g = diamond();
        let batch = yen_ksp(&g, 0, 5, 6).unwrap();
        let mut en = YenEnumerator::new(0, 5);
        let mut streamed = Vec::new();
        for _ in 0..3 {
            streamed.push(en.next_path(&g).unwrap());
        }
        for _ in 0..3 {
            streamed.push(en.next_path(&g).unwrap());
        }
        assert_eq!(streamed, batch);
    }
}
