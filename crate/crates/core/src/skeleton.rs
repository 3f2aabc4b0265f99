//! The skeleton graph: every boundary vertex of every subgraph, with an edge
//! per vertex pair weighted by the minimum lower-bound distance over the
//! subgraphs containing that pair.
//!
//! Each edge keeps its full per-subgraph contribution map so that a rising
//! bound in the annotated subgraph can never leave a stale over-estimate
//! behind — the weight is recomputed as the minimum over the map on every
//! update. The cheaper replace-if-argmin rule is available behind
//! [`UpdateRule::ReplaceArgmin`] for comparison, but it is not sound and is
//! never the default.
//!
//! Query vertices that are not boundary vertices are attached temporarily:
//! the attachment computes bounding paths from the vertex to every boundary
//! vertex of its subgraph, wires the resulting lower bounds in as skeleton
//! edges, and hands back a handle whose `release` restores both the skeleton
//! and the touched [`SubgraphBounds`] to deep equality with their
//! pre-attachment state.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::bounds::{MbdTable, SubgraphBounds};
use crate::fixed::{fmt_milli, parse_milli, Milli, INF};
use crate::graph::{Graph, VertexId};
use crate::ksp::{PathGraph, RankedPath, YenEnumerator};
use crate::partition::{Subgraph, SubgraphId};

/// How an update folds a changed contribution into the cached edge weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Recompute weight and annotation as the minimum over the full
    /// contribution map. Always sound.
    MinOverMap,
    /// Replace the cached weight when the update comes from the annotated
    /// subgraph, otherwise keep the smaller of old and new. Leaves a stale
    /// over-estimate when the annotated subgraph's bound rises past another
    /// contribution; kept only for comparison runs.
    ReplaceArgmin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonEdge {
    /// Lower-bound distance contributed by each subgraph containing the pair.
    pub contributions: BTreeMap<SubgraphId, Milli>,
    /// Cached weight; equals the contribution minimum under
    /// [`UpdateRule::MinOverMap`].
    pub weight: Milli,
    /// Subgraph annotated as supplying `weight`; ties go to the smaller id.
    pub argmin: SubgraphId,
}

impl SkeletonEdge {
    fn min_entry(&self) -> (Milli, SubgraphId) {
        self.contributions
            .iter()
            .map(|(&sg, &lbd)| (lbd, sg))
            .min()
            .expect("contribution map never empty")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SkeletonError {
    #[error("vertex {0} is not in the skeleton")]
    VertexAbsent(VertexId),
    #[error("vertex {0} is not in subgraph {1}")]
    NotInSubgraph(VertexId, SubgraphId),
}

/// One broadcast bound change, as carried on the wire between cluster nodes:
/// `seq,u,v,sg,lbd` per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbdUpdate {
    pub seq: u64,
    pub u: VertexId,
    pub v: VertexId,
    pub sg: SubgraphId,
    pub lbd: Milli,
}

impl LbdUpdate {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.seq,
            self.u,
            self.v,
            self.sg,
            fmt_milli(self.lbd)
        )
    }

    pub fn parse_line(line: &str) -> Option<LbdUpdate> {
        let mut it = line.trim().split(',');
        let seq = it.next()?.parse().ok()?;
        let u = it.next()?.parse().ok()?;
        let v = it.next()?.parse().ok()?;
        let sg = it.next()?.parse().ok()?;
        let lbd = parse_milli(it.next()?)?;
        if it.next().is_some() {
            return None;
        }
        Some(LbdUpdate { seq, u, v, sg, lbd })
    }
}

/// The two-level index's upper level: a weighted graph over boundary
/// vertices. Finite-weight edges appear in the adjacency lists; an edge whose
/// every contribution is unreachable keeps its record but carries no
/// adjacency, so it cannot appear on a reference path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonGraph {
    adj: BTreeMap<VertexId, Vec<VertexId>>,
    edges: BTreeMap<(VertexId, VertexId), SkeletonEdge>,
    pub rule: UpdateRule,
}

fn norm(u: VertexId, v: VertexId) -> (VertexId, VertexId) {
    (u.min(v), u.max(v))
}

impl SkeletonGraph {
    pub fn new(rule: UpdateRule) -> SkeletonGraph {
        SkeletonGraph {
            adj: BTreeMap::new(),
            edges: BTreeMap::new(),
            rule,
        }
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.adj.keys().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    /// Edges that currently carry a finite weight.
    pub fn edge_count(&self) -> usize {
        self.edges.values().filter(|e| e.weight < INF).count()
    }

    pub fn edge(&self, u: VertexId, v: VertexId) -> Option<&SkeletonEdge> {
        self.edges.get(&norm(u, v))
    }

    pub fn weight(&self, u: VertexId, v: VertexId) -> Milli {
        self.edge(u, v).map_or(INF, |e| e.weight)
    }

    /// Adds `v` as an (initially isolated) skeleton vertex.
    pub fn ensure_vertex(&mut self, v: VertexId) {
        self.adj.entry(v).or_default();
    }

    fn link(&mut self, u: VertexId, v: VertexId) {
        let ns = self.adj.entry(u).or_default();
        let pos = ns.partition_point(|&w| w < v);
        if ns.get(pos) != Some(&v) {
            ns.insert(pos, v);
        }
    }

    fn unlink(&mut self, u: VertexId, v: VertexId) {
        if let Some(ns) = self.adj.get_mut(&u) {
            if let Ok(pos) = ns.binary_search(&v) {
                ns.remove(pos);
            }
        }
    }

    /// Makes adjacency membership match the edge's weight finiteness.
    fn relink(&mut self, key: (VertexId, VertexId), finite: bool) {
        if finite {
            self.link(key.0, key.1);
            self.link(key.1, key.0);
        } else {
            self.unlink(key.0, key.1);
            self.unlink(key.1, key.0);
        }
    }

    /// Records `lbd` as subgraph `sg`'s contribution to the pair, creating
    /// the pair if needed, and refreshes the cached weight per the update
    /// rule. Returns whether the edge weight changed.
    pub fn apply_lbd_update(
        &mut self,
        pair: (VertexId, VertexId),
        sg: SubgraphId,
        lbd: Milli,
    ) -> bool {
        let key = norm(pair.0, pair.1);
        self.ensure_vertex(key.0);
        self.ensure_vertex(key.1);
        let e = self.edges.entry(key).or_insert_with(|| SkeletonEdge {
            contributions: BTreeMap::new(),
            weight: INF,
            argmin: sg,
        });
        let old = e.weight;
        e.contributions.insert(sg, lbd);
        match self.rule {
            UpdateRule::MinOverMap => {
                let (w, a) = e.min_entry();
                e.weight = w;
                e.argmin = a;
            }
            UpdateRule::ReplaceArgmin => {
                if old == INF || sg == e.argmin {
                    // First contribution, or the annotated subgraph re-broadcast:
                    // take the new value verbatim (stale when it rose past a
                    // smaller contribution from elsewhere).
                    e.weight = lbd;
                    e.argmin = sg;
                } else if lbd < e.weight {
                    e.weight = lbd;
                    e.argmin = sg;
                }
            }
        }
        let new = e.weight;
        if (old < INF) != (new < INF) {
            self.relink(key, new < INF);
        }
        old != new
    }

    /// Applies one wire-format record. Sequence ordering is the transport's
    /// job; the skeleton applies records in the order given.
    pub fn apply_update(&mut self, upd: &LbdUpdate) -> bool {
        self.apply_lbd_update((upd.u, upd.v), upd.sg, upd.lbd)
    }

    /// A resumable loopless-shortest-path enumeration between two skeleton
    /// vertices, for rank-by-rank reference-path consumption.
    pub fn reference_paths(
        &self,
        s: VertexId,
        t: VertexId,
    ) -> Result<YenEnumerator, SkeletonError> {
        for v in [s, t] {
            if !self.contains_vertex(v) {
                return Err(SkeletonError::VertexAbsent(v));
            }
        }
        Ok(YenEnumerator::new(s, t))
    }

    /// The `rank`-th (1-based) loopless shortest path between `s` and `t`,
    /// or `None` when fewer simple paths exist. Convenience wrapper over
    /// [`SkeletonGraph::reference_paths`] for one-shot callers.
    pub fn reference_path(
        &self,
        s: VertexId,
        t: VertexId,
        rank: usize,
    ) -> Result<Option<RankedPath>, SkeletonError> {
        assert!(rank >= 1, "ranks are 1-based");
        let mut yen = self.reference_paths(s, t)?;
        let mut out = None;
        for _ in 0..rank {
            out = yen.next_path(self);
            if out.is_none() {
                break;
            }
        }
        Ok(out)
    }

    /// Writes the finite edges as `u,v,weight,argmin_sg` CSV rows.
    pub fn dump_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "u,v,weight,argmin_sg")?;
        for (&(u, v), e) in &self.edges {
            if e.weight < INF {
                writeln!(w, "{},{},{},{}", u, v, fmt_milli(e.weight), e.argmin)?;
            }
        }
        Ok(())
    }
}

impl PathGraph for SkeletonGraph {
    fn id_bound(&self) -> usize {
        self.adj
            .last_key_value()
            .map_or(0, |(&v, _)| v as usize + 1)
    }

    fn for_each_neighbor(&self, v: VertexId, f: &mut dyn FnMut(VertexId, Milli)) {
        if let Some(ns) = self.adj.get(&v) {
            for &w in ns {
                f(w, self.edges[&norm(v, w)].weight);
            }
        }
    }
}

/// Builds the skeleton from a complete minimum-bound table: one edge per
/// pair, weighted by the minimum contribution, annotated with its subgraph.
/// Pairs whose every contribution is unreachable keep their record but no
/// adjacency.
pub fn build_skeleton(table: &MbdTable) -> SkeletonGraph {
    let mut sk = SkeletonGraph::new(UpdateRule::MinOverMap);
    for (&pair, per_sg) in &table.map {
        for (&sg, &lbd) in per_sg {
            sk.apply_lbd_update(pair, sg, lbd);
        }
    }
    sk
}

/// Transient state added for one query vertex; dropping it without `release`
/// would leak the attachment, so release is an explicit, consuming call.
#[derive(Debug)]
pub struct Attachment {
    pub vertex: VertexId,
    pub sg: SubgraphId,
    /// Vertices the attachment introduced: the query vertex itself when it
    /// was new, plus any pair endpoint the skeleton had never seen (a lone
    /// boundary vertex appears in no pair, a co-located target may be
    /// interior).
    added_vertices: Vec<VertexId>,
    /// Bounding-path pairs this attachment inserted into the subgraph's
    /// bounds (and owns).
    pair_keys: Vec<(VertexId, VertexId)>,
    /// Skeleton edges this attachment created.
    edge_keys: Vec<(VertexId, VertexId)>,
    /// True when the vertex was newly attached but no finite-weight edge
    /// connects it: the query can only be answered if source and target are
    /// co-located in this subgraph.
    pub isolated: bool,
}

impl Attachment {
    pub fn edge_keys(&self) -> &[(VertexId, VertexId)] {
        &self.edge_keys
    }

    /// Removes every piece of transient state the attachment added, restoring
    /// both the skeleton and the bounds to their pre-attachment contents.
    pub fn release(self, sk: &mut SkeletonGraph, bounds: &mut SubgraphBounds) {
        for key in &self.edge_keys {
            if let Some(e) = sk.edges.remove(key) {
                if e.weight < INF {
                    sk.relink(*key, false);
                }
            }
        }
        for v in &self.added_vertices {
            let emptied = sk.adj.remove(v);
            debug_assert_eq!(emptied.as_deref(), Some(&[][..]));
        }
        bounds.detach_pairs(&self.pair_keys);
    }
}

/// Temporarily treats `v` as a boundary vertex of `sg`: computes bounding
/// paths from `v` to every boundary vertex of the subgraph (plus any
/// `extra_targets` inside it, e.g. a co-located query endpoint) and inserts
/// the resulting lower bounds as skeleton edges. Already-present pairs are
/// left untouched, so overlapping attachments own disjoint state.
pub fn attach_query_vertex(
    sk: &mut SkeletonGraph,
    g: &Graph,
    sg: &Subgraph,
    bounds: &mut SubgraphBounds,
    v: VertexId,
    extra_targets: &[VertexId],
) -> Result<Attachment, SkeletonError> {
    if !sg.contains_vertex(v) {
        return Err(SkeletonError::NotInSubgraph(v, sg.id));
    }
    let mut targets: Vec<VertexId> = sg.boundary.clone();
    for &t in extra_targets {
        if t != v && sg.contains_vertex(t) && !targets.contains(&t) {
            targets.push(t);
        }
    }
    let v_was_absent = !sk.contains_vertex(v);
    let mut added_vertices = Vec::new();
    if v_was_absent {
        added_vertices.push(v);
    }
    sk.ensure_vertex(v);
    let pair_keys = bounds.attach_pairs(g, sg, v, &targets);
    let mut edge_keys = Vec::with_capacity(pair_keys.len());
    for &key in &pair_keys {
        for end in [key.0, key.1] {
            if !sk.contains_vertex(end) {
                added_vertices.push(end);
            }
        }
        let lb = bounds.lower_bound(key.0, key.1);
        debug_assert!(!sk.edges.contains_key(&key));
        sk.apply_lbd_update(key, sg.id, lb.value);
        edge_keys.push(key);
    }
    let isolated = v_was_absent
        && sk
            .adj
            .get(&v)
            .map_or(true, |ns| ns.is_empty());
    Ok(Attachment {
        vertex: v,
        sg: sg.id,
        added_vertices,
        pair_keys,
        edge_keys,
        isolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::from_int;
    use crate::ksp::{dijkstra_distances, Residual};
    use crate::oracle::exhaustive_ksp;
    use crate::partition::partition;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_of(entries: &[(VertexId, VertexId, SubgraphId, Milli)]) -> MbdTable {
        let mut t = MbdTable::default();
        for &(u, v, sg, lbd) in entries {
            t.insert((u, v), sg, lbd);
        }
        t
    }

    #[test]
    fn single_pair_builds_single_edge() {
        let sk = build_skeleton(&table_of(&[(3, 9, 0, from_int(7))]));
        assert_eq!(sk.vertex_count(), 2);
        assert_eq!(sk.edge_count(), 1);
        assert_eq!(sk.weight(9, 3), from_int(7));
        assert_eq!(sk.edge(3, 9).unwrap().argmin, 0);
        let p = sk.reference_path(3, 9, 1).unwrap().unwrap();
        assert_eq!(p.vertices, vec![3, 9]);
        assert_eq!(p.cost, from_int(7));
        assert_eq!(sk.reference_path(3, 9, 2).unwrap(), None);
    }

    #[test]
    fn minimum_contribution_wins_and_ties_go_to_smaller_subgraph() {
        let sk = build_skeleton(&table_of(&[
            (1, 2, 1, from_int(5)),
            (1, 2, 2, from_int(9)),
        ]));
        assert_eq!(sk.weight(1, 2), from_int(5));
        assert_eq!(sk.edge(1, 2).unwrap().argmin, 1);

        let tied = build_skeleton(&table_of(&[
            (1, 2, 7, from_int(5)),
            (1, 2, 4, from_int(5)),
        ]));
        assert_eq!(tied.edge(1, 2).unwrap().argmin, 4);
    }

    #[test]
    fn rising_argmin_contribution_falls_back_to_next_subgraph() {
        let mut sk = build_skeleton(&table_of(&[
            (1, 2, 1, from_int(5)),
            (1, 2, 2, from_int(9)),
        ]));
        // Re-broadcasting the current value is a no-op.
        assert!(!sk.apply_lbd_update((1, 2), 2, from_int(9)));
        // SG 1's bound rises past SG 2's: the map minimum takes over.
        assert!(sk.apply_lbd_update((1, 2), 1, from_int(12)));
        assert_eq!(sk.weight(1, 2), from_int(9));
        assert_eq!(sk.edge(1, 2).unwrap().argmin, 2);
        // A new subgraph undercutting everything wins immediately.
        assert!(sk.apply_lbd_update((1, 2), 3, from_int(4)));
        assert_eq!(sk.weight(1, 2), from_int(4));
        assert_eq!(sk.edge(1, 2).unwrap().argmin, 3);
    }

    #[test]
    fn replace_argmin_rule_keeps_the_stale_overestimate() {
        let mut sk = SkeletonGraph::new(UpdateRule::ReplaceArgmin);
        sk.apply_lbd_update((1, 2), 1, from_int(5));
        sk.apply_lbd_update((1, 2), 2, from_int(9));
        assert_eq!(sk.weight(1, 2), from_int(5));
        // The annotated subgraph's bound rises; the rule replaces in place
        // and never consults SG 2's smaller contribution.
        assert!(sk.apply_lbd_update((1, 2), 1, from_int(12)));
        assert_eq!(sk.weight(1, 2), from_int(12));
        assert_eq!(sk.edge(1, 2).unwrap().argmin, 1);
        // The sound rule on the same record stream disagrees.
        let mut sound = SkeletonGraph::new(UpdateRule::MinOverMap);
        for (sg, w) in [(1, 5), (2, 9), (1, 12)] {
            sound.apply_lbd_update((1, 2), sg, from_int(w));
        }
        assert_eq!(sound.weight(1, 2), from_int(9));
    }

    #[test]
    fn update_from_new_subgraph_below_single_contribution() {
        let mut sk = build_skeleton(&table_of(&[(1, 2, 1, from_int(5))]));
        assert!(sk.apply_lbd_update((1, 2), 2, from_int(4)));
        assert_eq!(sk.weight(1, 2), from_int(4));
        assert_eq!(sk.edge(1, 2).unwrap().argmin, 2);
    }

    #[test]
    fn unreachable_contributions_leave_edge_out_of_adjacency() {
        let mut sk = build_skeleton(&table_of(&[(1, 2, 1, INF), (2, 3, 1, from_int(2))]));
        assert_eq!(sk.vertex_count(), 3);
        assert_eq!(sk.edge_count(), 1);
        assert_eq!(sk.weight(1, 2), INF);
        // Unreachable pairs cannot appear on reference paths…
        assert_eq!(sk.reference_path(1, 3, 1).unwrap(), None);
        // …until some subgraph supplies a finite bound.
        sk.apply_lbd_update((1, 2), 4, from_int(1));
        let p = sk.reference_path(1, 3, 1).unwrap().unwrap();
        assert_eq!(p.vertices, vec![1, 2, 3]);
        assert_eq!(p.cost, from_int(3));
        // And a bound going unreachable again drops the adjacency.
        sk.apply_lbd_update((1, 2), 4, INF);
        assert_eq!(sk.reference_path(1, 3, 1).unwrap(), None);
        assert!(sk.edge(1, 2).is_some());
    }

    #[test]
    fn triangle_reference_ranks_by_distance() {
        let sk = build_skeleton(&table_of(&[
            (0, 1, 0, from_int(1)),
            (1, 2, 0, from_int(1)),
            (0, 2, 0, from_int(3)),
        ]));
        let p1 = sk.reference_path(0, 2, 1).unwrap().unwrap();
        assert_eq!((p1.cost, p1.vertices.clone()), (from_int(2), vec![0, 1, 2]));
        let p2 = sk.reference_path(0, 2, 2).unwrap().unwrap();
        assert_eq!((p2.cost, p2.vertices.clone()), (from_int(3), vec![0, 2]));
        assert_eq!(sk.reference_path(0, 2, 3).unwrap(), None);
        assert_eq!(
            sk.reference_path(0, 9, 1),
            Err(SkeletonError::VertexAbsent(9))
        );
    }

    #[test]
    fn reference_paths_match_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e1e);
        for _ in 0..30 {
            let n: u32 = rng.gen_range(4..12);
            let mut sk = SkeletonGraph::new(UpdateRule::MinOverMap);
            for u in 0..n {
                sk.ensure_vertex(u);
                for v in u + 1..n {
                    if rng.gen_bool(0.4) {
                        sk.apply_lbd_update((u, v), rng.gen_range(0..3), rng.gen_range(1..=9_000));
                    }
                }
            }
            let s = rng.gen_range(0..n);
            let mut t = rng.gen_range(0..n);
            if t == s {
                t = (t + 1) % n;
            }
            let want = exhaustive_ksp(&sk, s, t, 5);
            let mut yen = sk.reference_paths(s, t).unwrap();
            for expected in &want {
                assert_eq!(yen.next_path(&sk).as_ref(), Some(expected));
            }
            if want.len() < 5 {
                assert_eq!(yen.next_path(&sk), None);
            }
        }
    }

    /// Replaying exactly the changed-bound records a refresh reports must
    /// leave every replica equal to a skeleton rebuilt from scratch.
    #[test]
    fn update_stream_matches_fresh_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xcafe);
        for round in 0..12 {
            let n = rng.gen_range(12..28);
            let extra = rng.gen_range(4..12);
            let g0 = Graph::random_connected(n, extra, 9, &mut rng);
            let mut g = g0.clone();
            let parts = partition(&g, 6).unwrap();
            let mut all: Vec<SubgraphBounds> = parts
                .subgraphs
                .iter()
                .map(|sg| SubgraphBounds::build(&g, sg, 4))
                .collect();
            let mut sk = build_skeleton(&MbdTable::from_bounds(&all));

            for _ in 0..4 {
                // Perturb a third of the edges, then broadcast per-subgraph
                // refresh diffs into the skeleton.
                let mut changes = Vec::new();
                for e in 0..g.edge_count() as u32 {
                    if rng.gen_bool(0.3) {
                        let new: Milli = rng.gen_range(1..=12_000);
                        changes.push((e, new - g.edge(e).current));
                    }
                }
                g.apply_deltas(&changes).unwrap();
                for b in all.iter_mut() {
                    let sg = parts.subgraphs[b.sg as usize].clone();
                    for (pair, lb) in b.refresh(&g, &sg) {
                        sk.apply_lbd_update(pair, b.sg, lb);
                    }
                }
                let fresh = build_skeleton(&MbdTable::from_bounds(&all));
                assert_eq!(sk, fresh, "round {round}: replica diverged from rebuild");
            }
        }
    }

    #[test]
    fn skeleton_distance_never_exceeds_true_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd15c);
        for _ in 0..15 {
            let n = rng.gen_range(20..60);
            let extra = rng.gen_range(5..25);
            let g = Graph::random_connected(n, extra, 9, &mut rng);
            let parts = partition(&g, rng.gen_range(4..10)).unwrap();
            let all: Vec<SubgraphBounds> = parts
                .subgraphs
                .iter()
                .map(|sg| SubgraphBounds::build(&g, sg, 3))
                .collect();
            let sk = build_skeleton(&MbdTable::from_bounds(&all));
            let verts: Vec<VertexId> = sk.vertices().collect();
            for &s in &verts {
                let via_sk = dijkstra_distances(&sk, s, &Residual::default());
                let truth = dijkstra_distances(&g, s, &Residual::default());
                for &t in &verts {
                    if t == s {
                        continue;
                    }
                    let d_sk = via_sk[t as usize];
                    let d_g = truth[t as usize];
                    assert!(
                        d_sk <= d_g,
                        "skeleton distance {d_sk} exceeds true distance {d_g} for ({s},{t})"
                    );
                }
            }
        }
    }

    #[test]
    fn every_edge_weight_bounded_by_annotated_subgraph_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xb0b);
        for _ in 0..10 {
            let n = rng.gen_range(16..40);
            let g = Graph::random_connected(n, rng.gen_range(4..16), 9, &mut rng);
            let parts = partition(&g, 5).unwrap();
            let all: Vec<SubgraphBounds> = parts
                .subgraphs
                .iter()
                .map(|sg| SubgraphBounds::build(&g, sg, 3))
                .collect();
            let sk = build_skeleton(&MbdTable::from_bounds(&all));
            for (&(u, v), e) in &sk.edges {
                if e.weight == INF {
                    continue;
                }
                let sg = &parts.subgraphs[e.argmin as usize];
                let d = crate::bounds::subgraph_distance(&g, sg, u, v);
                assert!(e.weight <= d, "edge ({u},{v}) weight {} > {d}", e.weight);
            }
        }
    }

    #[test]
    fn attachment_wires_interior_vertex_and_release_restores_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x077);
        let mut exercised = 0;
        'outer: for _ in 0..20 {
            let n = rng.gen_range(16..40);
            let g = Graph::random_connected(n, rng.gen_range(4..16), 9, &mut rng);
            let parts = partition(&g, 6).unwrap();
            for sg in &parts.subgraphs {
                let interior: Vec<VertexId> = sg
                    .vertices
                    .iter()
                    .copied()
                    .filter(|&v| !sg.is_boundary(v))
                    .collect();
                if interior.is_empty() || sg.boundary.is_empty() {
                    continue;
                }
                let v = interior[rng.gen_range(0..interior.len())];
                let mut bounds = SubgraphBounds::build(&g, sg, 3);
                let mut sk = build_skeleton(&MbdTable::from_bounds(&[bounds.clone()]));
                let sk_before = sk.clone();
                let bounds_before = bounds.clone();

                let att = attach_query_vertex(&mut sk, &g, sg, &mut bounds, v, &[]).unwrap();
                assert!(sk.contains_vertex(v));
                assert!(!att.isolated, "interior vertex of a connected region");
                for &b in &sg.boundary {
                    let w = sk.weight(v, b);
                    let d = crate::bounds::subgraph_distance(&g, sg, v, b);
                    assert!(w <= d, "attached weight {w} exceeds within-subgraph {d}");
                    assert_eq!(w == INF, d == INF);
                }
                att.release(&mut sk, &mut bounds);
                assert_eq!(sk, sk_before);
                assert_eq!(bounds, bounds_before);
                exercised += 1;
                if exercised >= 12 {
                    break 'outer;
                }
            }
        }
        assert!(exercised >= 5, "too few attachable instances generated");
    }

    #[test]
    fn boundary_vertex_attachment_is_a_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x404);
        let g = Graph::random_connected(24, 10, 9, &mut rng);
        let parts = partition(&g, 6).unwrap();
        let sg = parts
            .subgraphs
            .iter()
            .find(|sg| !sg.boundary.is_empty())
            .unwrap();
        let b = sg.boundary[0];
        let mut bounds = SubgraphBounds::build(&g, sg, 3);
        let mut sk = build_skeleton(&MbdTable::from_bounds(&[bounds.clone()]));
        let sk_before = sk.clone();
        let att = attach_query_vertex(&mut sk, &g, sg, &mut bounds, b, &[]).unwrap();
        assert_eq!(sk, sk_before, "boundary vertices are already wired");
        assert!(att.edge_keys().is_empty());
        assert!(!att.isolated);
        att.release(&mut sk, &mut bounds);
        assert_eq!(sk, sk_before);

        let outside = (0..g.vertex_count() as u32)
            .find(|&v| !sg.contains_vertex(v))
            .unwrap();
        assert_eq!(
            attach_query_vertex(&mut sk, &g, sg, &mut bounds, outside, &[]).unwrap_err(),
            SkeletonError::NotInSubgraph(outside, sg.id)
        );
    }

    /// A single-subgraph partition has no boundary at all, so an attached
    /// vertex is isolated unless a co-located target is supplied with it.
    #[test]
    fn colocated_target_rescues_isolated_attachment() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x888);
        let g = Graph::random_connected(10, 5, 9, &mut rng);
        let parts = partition(&g, 10).unwrap();
        assert_eq!(parts.subgraphs.len(), 1);
        let sg = &parts.subgraphs[0];
        let mut bounds = SubgraphBounds::build(&g, sg, 3);
        let mut sk = build_skeleton(&MbdTable::from_bounds(&[bounds.clone()]));

        let lone = attach_query_vertex(&mut sk, &g, sg, &mut bounds, 2, &[]).unwrap();
        assert!(lone.isolated);
        lone.release(&mut sk, &mut bounds);

        let s = attach_query_vertex(&mut sk, &g, sg, &mut bounds, 2, &[7]).unwrap();
        assert!(!s.isolated);
        let w = sk.weight(2, 7);
        assert!(w <= crate::bounds::subgraph_distance(&g, sg, 2, 7));
        assert!(w > 0);
        // The co-located pair is owned by the first attachment; attaching the
        // other endpoint afterwards claims nothing it would double-free.
        let t = attach_query_vertex(&mut sk, &g, sg, &mut bounds, 7, &[2]).unwrap();
        assert!(t.edge_keys().is_empty());
        t.release(&mut sk, &mut bounds);
        assert_eq!(sk.weight(2, 7), w);
        s.release(&mut sk, &mut bounds);
        assert!(!sk.contains_vertex(2));
        assert!(!sk.contains_vertex(7));
    }

    #[test]
    fn csv_dump_lists_finite_edges_with_annotations() {
        let sk = build_skeleton(&table_of(&[
            (1, 2, 1, from_int(5)),
            (1, 2, 2, from_int(9)),
            (2, 5, 2, 2500),
            (1, 5, 0, INF),
        ]));
        let mut out = Vec::new();
        sk.dump_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "u,v,weight,argmin_sg\n1,2,5,1\n2,5,2.5,2\n");
    }

    #[test]
    fn update_wire_format_round_trips() {
        let upd = LbdUpdate {
            seq: 42,
            u: 3,
            v: 17,
            sg: 2,
            lbd: 1250,
        };
        let line = upd.to_line();
        assert_eq!(line, "42,3,17,2,1.25");
        assert_eq!(LbdUpdate::parse_line(&line), Some(upd));
        assert_eq!(LbdUpdate::parse_line("1,2,3,4"), None);
        assert_eq!(LbdUpdate::parse_line("1,2,3,4,5,6"), None);
        assert_eq!(LbdUpdate::parse_line("x,2,3,4,5"), None);
    }
}
