//! Filter-and-refine KSP over the two-level index.
//!
//! A query walks reference paths of the skeleton graph in ascending order
//! ([`crate::skeleton::SkeletonGraph`] weights are lower bounds, so reference
//! distances only ever under-estimate). Each reference path names a class of
//! real paths — those visiting exactly its boundary-vertex sequence — and
//! [`candidate_ksp`] refines the class into concrete paths: per adjacent
//! pair, the k shortest within-subgraph partials (other boundary vertices
//! excluded so classes stay disjoint), joined pairwise while discarding any
//! concatenation that repeats a vertex. [`ksp_dg`] drives the iteration and
//! stops as soon as the k-th best found distance is at most the next
//! reference distance: every unexamined class is lower-bounded by it, so
//! nothing better remains.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::fixed::{Milli, INF};
use crate::graph::{Graph, VertexId};
use crate::ksp::{QueryError, RankedPath, YenEnumerator};
use crate::partition::{CurrentWeights, Partition, Subgraph, SubgraphView};
use crate::pyen::{pyen_ksp, PyenOptions, PyenStats};
use crate::skeleton::{attach_query_vertex, Attachment, SkeletonGraph};

/// Per-query instrumentation, aggregated across all refinement work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineCounters {
    /// Reference paths consumed (including the one that certified the stop).
    pub iterations: u64,
    pub reuse_hits: u64,
    pub pruned_tasks: u64,
    /// Per-subgraph partial KSP searches issued.
    pub subgraph_invocations: u64,
}

impl EngineCounters {
    pub fn absorb_spur_stats(&mut self, s: PyenStats) {
        self.reuse_hits += s.reuse_hits;
        self.pruned_tasks += s.pruned_tasks;
    }
}

/// The boundary-vertex subsequence of a path, with the endpoints always
/// included (a query endpoint is treated as a boundary vertex for its
/// lifetime).
pub fn boundary_sequence(vertices: &[VertexId], parts: &Partition) -> Vec<VertexId> {
    let last = vertices.len().saturating_sub(1);
    vertices
        .iter()
        .enumerate()
        .filter(|&(i, &v)| i == 0 || i == last || parts.is_boundary(v))
        .map(|(_, &v)| v)
        .collect()
}

/// The k shortest paths from `u` to `v` that stay inside `sg` and avoid
/// every other boundary vertex of `sg` as well as `exclude_also` (the query
/// endpoints): exactly the within-subgraph members of one boundary-sequence
/// class. Empty when the pair is not co-located here.
pub fn partial_ksp_in(
    g: &Graph,
    sg: &Subgraph,
    u: VertexId,
    v: VertexId,
    k: usize,
    opts: PyenOptions,
    exclude_also: &[VertexId],
) -> (Vec<RankedPath>, PyenStats) {
    if !sg.contains_vertex(u) || !sg.contains_vertex(v) {
        return (Vec::new(), PyenStats::default());
    }
    let mut exclude: HashSet<VertexId> = sg.boundary.iter().copied().collect();
    exclude.extend(exclude_also.iter().copied());
    exclude.remove(&u);
    exclude.remove(&v);
    let view = SubgraphView::new(g, sg, CurrentWeights).excluding(&exclude);
    match pyen_ksp(&view, u, v, k, opts) {
        Ok((paths, stats)) => (paths, stats),
        Err(_) => (Vec::new(), PyenStats::default()),
    }
}

/// Merges per-subgraph partial lists into the k best overall. Each path
/// lives in exactly one subgraph (every edge has one owner), so the union
/// never holds duplicates.
pub fn merge_partials(lists: Vec<Vec<RankedPath>>, k: usize) -> Vec<RankedPath> {
    let mut all: Vec<RankedPath> = lists.into_iter().flatten().collect();
    all.sort();
    all.truncate(k);
    all
}

/// Cross-concatenates two sorted partial lists (`c` ending where `y`
/// begins), keeps only combinations whose full vertex sequence stays simple,
/// and returns the k best by `(cost, sequence)`. Pairs are popped best-first
/// from a frontier heap, so the full cross product is never materialized:
/// popping stops once k valid combinations exist and the frontier cost is
/// strictly past the k-th best (equal-cost pairs still in the frontier could
/// win on the sequence tiebreak, so ties keep popping).
pub fn join_candidates(c: &[RankedPath], y: &[RankedPath], k: usize) -> Vec<RankedPath> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    if c.is_empty() || y.is_empty() || k == 0 {
        return Vec::new();
    }
    let cost_of = |i: usize, j: usize| crate::fixed::add(c[i].cost, y[j].cost);
    let mut heap: BinaryHeap<Reverse<(Milli, usize, usize)>> = BinaryHeap::new();
    let mut queued: HashSet<(usize, usize)> = HashSet::new();
    heap.push(Reverse((cost_of(0, 0), 0, 0)));
    queued.insert((0, 0));
    let mut valid: Vec<RankedPath> = Vec::new();
    while let Some(Reverse((cost, i, j))) = heap.pop() {
        if valid.len() >= k {
            let worst = valid.iter().map(|p| p.cost).max().expect("non-empty");
            if cost > worst {
                break;
            }
        }
        debug_assert_eq!(c[i].vertices.last(), y[j].vertices.first());
        let mut seen: HashSet<VertexId> = c[i].vertices.iter().copied().collect();
        if y[j].vertices[1..].iter().all(|v| seen.insert(*v)) {
            let mut vertices = c[i].vertices.clone();
            vertices.extend_from_slice(&y[j].vertices[1..]);
            valid.push(RankedPath { cost, vertices });
        }
        if i + 1 < c.len() && queued.insert((i + 1, j)) {
            heap.push(Reverse((cost_of(i + 1, j), i + 1, j)));
        }
        if j + 1 < y.len() && queued.insert((i, j + 1)) {
            heap.push(Reverse((cost_of(i, j + 1), i, j + 1)));
        }
    }
    valid.sort();
    valid.truncate(k);
    valid
}

/// Memo of merged per-pair segment lists. Within one query every input to a
/// segment search is fixed — weights, partition, k, the excluded boundary
/// vertices and endpoints — so a pair's list never changes between
/// references and consecutive reference paths share most of their pairs.
pub type SegmentCache = HashMap<(VertexId, VertexId), Vec<RankedPath>>;

/// Chains per-pair segment lists along a reference path with simple-only
/// joins, yielding the k best members of the reference's class. `segment`
/// supplies the merged partial list for one adjacent pair; empty means the
/// pair has no within-class realization and kills the whole class.
pub fn chain_segments(
    ref_path: &RankedPath,
    k: usize,
    mut segment: impl FnMut(VertexId, VertexId) -> Vec<RankedPath>,
) -> Vec<RankedPath> {
    assert!(ref_path.vertices.len() >= 2, "reference paths span two vertices");
    let mut chain: Option<Vec<RankedPath>> = None;
    for pair in ref_path.vertices.windows(2) {
        let seg = segment(pair[0], pair[1]);
        if seg.is_empty() {
            return Vec::new();
        }
        chain = Some(match chain {
            None => seg,
            Some(c) => join_candidates(&c, &seg, k),
        });
        if chain.as_ref().is_some_and(|c| c.is_empty()) {
            return Vec::new();
        }
    }
    // With sound bounds every result costs at least ref_path.cost; the
    // validation suite checks that theorem (and must be able to observe it
    // broken under fault injection), so it is not asserted here.
    chain.unwrap_or_default()
}

/// Refines one reference path into up to k concrete candidate paths in `g`:
/// per adjacent reference pair, partial KSPs from every subgraph containing
/// the pair, merged and then chained with simple-only joins. Every returned
/// path costs at least the reference distance (its segments are what the
/// reference edges lower-bound).
pub fn candidate_ksp(
    g: &Graph,
    parts: &Partition,
    ref_path: &RankedPath,
    k: usize,
    opts: PyenOptions,
    query_endpoints: &[VertexId],
    counters: &mut EngineCounters,
    segments: &mut SegmentCache,
) -> Vec<RankedPath> {
    chain_segments(ref_path, k, |u, v| match segments.get(&(u, v)) {
        Some(cached) => cached.clone(),
        None => {
            let mut lists = Vec::new();
            for sg_id in parts.shared_subgraphs(u, v) {
                counters.subgraph_invocations += 1;
                let (paths, stats) = partial_ksp_in(
                    g,
                    &parts.subgraphs[sg_id as usize],
                    u,
                    v,
                    k,
                    opts,
                    query_endpoints,
                );
                counters.absorb_spur_stats(stats);
                lists.push(paths);
            }
            let merged = merge_partials(lists, k);
            segments.insert((u, v), merged.clone());
            merged
        }
    })
}

/// Up to k best distinct paths found so far, with the termination distance:
/// the k-th best cost once full, infinite while still filling.
#[derive(Debug, Clone, Default)]
pub struct CandidateList {
    k: usize,
    set: BTreeSet<RankedPath>,
}

impl CandidateList {
    pub fn new(k: usize) -> CandidateList {
        CandidateList {
            k,
            set: BTreeSet::new(),
        }
    }

    pub fn absorb(&mut self, batch: Vec<RankedPath>) {
        for p in batch {
            self.set.insert(p);
        }
        while self.set.len() > self.k {
            self.set.pop_last();
        }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// `Dist`: the bar a next reference distance has to beat.
    pub fn dist(&self) -> Milli {
        if self.set.len() == self.k {
            self.set.last().map_or(INF, |p| p.cost)
        } else {
            INF
        }
    }

    pub fn into_paths(self) -> Vec<RankedPath> {
        self.set.into_iter().collect()
    }
}

/// Query-side state of one running KSP-DG query: the resumable reference
/// enumeration and the candidate list. The driver (in-process [`ksp_dg`] or
/// a simulated query worker) feeds it one reference rank at a time.
#[derive(Debug, Clone)]
pub struct KspDgSession {
    pub s: VertexId,
    pub t: VertexId,
    pub k: usize,
    yen: YenEnumerator,
    list: CandidateList,
    segments: SegmentCache,
    pub counters: EngineCounters,
}

impl KspDgSession {
    pub fn new(s: VertexId, t: VertexId, k: usize) -> KspDgSession {
        KspDgSession {
            s,
            t,
            k,
            yen: YenEnumerator::new(s, t),
            list: CandidateList::new(k),
            segments: SegmentCache::new(),
            counters: EngineCounters::default(),
        }
    }

    /// Fetches the next reference path off the skeleton, counting it as an
    /// iteration. `None` once the skeleton's simple paths are exhausted.
    pub fn next_reference(&mut self, sk: &SkeletonGraph) -> Option<RankedPath> {
        let p = self.yen.next_path(sk)?;
        self.counters.iterations += 1;
        Some(p)
    }

    /// Refines one reference path against this session's query, reusing
    /// previously computed segments.
    pub fn refine(
        &mut self,
        g: &Graph,
        parts: &Partition,
        ref_path: &RankedPath,
        opts: PyenOptions,
    ) -> Vec<RankedPath> {
        candidate_ksp(
            g,
            parts,
            ref_path,
            self.k,
            opts,
            &[self.s, self.t],
            &mut self.counters,
            &mut self.segments,
        )
    }

    pub fn absorb(&mut self, candidates: Vec<RankedPath>) {
        self.list.absorb(candidates);
    }

    /// True when the list is full and the next reference distance can no
    /// longer improve it: every unexamined class costs at least `next_ref`.
    pub fn certified(&self, next_ref: Option<&RankedPath>) -> bool {
        match next_ref {
            Some(r) => self.list.dist() <= r.cost,
            None => false,
        }
    }

    pub fn found(&self) -> usize {
        self.list.len()
    }

    pub fn finish(self) -> (Vec<RankedPath>, EngineCounters) {
        (self.list.into_paths(), self.counters)
    }
}

#[derive(Debug, Clone)]
pub struct KspDgOutcome {
    pub paths: Vec<RankedPath>,
    /// Stopped via the reference-distance bound (as opposed to exhausting
    /// the skeleton's simple paths). The bound fires once the next reference
    /// distance merely equals `Dist`, so when several paths tie at the k-th
    /// distance the kept alternates may differ lexicographically from a full
    /// enumeration's choice; the distance multiset is exact either way.
    pub certified: bool,
    /// No path exists between the endpoints.
    pub unreachable: bool,
    pub counters: EngineCounters,
}

/// Filter-and-refine k-shortest-paths over the full graph. Interior query
/// endpoints are attached to the skeleton for the duration of the query and
/// released afterwards, leaving skeleton and bounds exactly as found.
pub fn ksp_dg(
    g: &Graph,
    parts: &Partition,
    sk: &mut SkeletonGraph,
    bounds: &mut [SubgraphBounds],
    s: VertexId,
    t: VertexId,
    k: usize,
    opts: PyenOptions,
) -> Result<KspDgOutcome, QueryError> {
    if k == 0 {
        return Err(QueryError::ZeroK);
    }
    for v in [s, t] {
        if (v as usize) >= g.vertex_count() {
            return Err(QueryError::VertexOutOfRange(v));
        }
    }
    if s == t {
        return Ok(KspDgOutcome {
            paths: vec![RankedPath {
                cost: 0,
                vertices: vec![s],
            }],
            certified: true,
            unreachable: false,
            counters: EngineCounters::default(),
        });
    }
    let attachments = attach_endpoints(g, parts, sk, bounds, s, t);

    let mut session = KspDgSession::new(s, t, k);
    let mut certified = false;
    let mut next_ref = session.next_reference(sk);
    while let Some(refp) = next_ref {
        let cands = session.refine(g, parts, &refp, opts);
        session.absorb(cands);
        next_ref = session.next_reference(sk);
        if session.certified(next_ref.as_ref()) {
            certified = true;
            break;
        }
    }
    let (paths, counters) = session.finish();

    release_attachments(attachments, sk, bounds);
    Ok(KspDgOutcome {
        unreachable: paths.is_empty(),
        certified,
        paths,
        counters,
    })
}

/// Attaches any query endpoint the skeleton does not already contain, to
/// every subgraph holding it, offering the other endpoint as a co-located
/// direct target. Returned handles must be released in reverse order (an
/// earlier attachment may own a vertex a later one relies on).
pub fn attach_endpoints(
    g: &Graph,
    parts: &Partition,
    sk: &mut SkeletonGraph,
    bounds: &mut [SubgraphBounds],
    s: VertexId,
    t: VertexId,
) -> Vec<Attachment> {
    let mut attachments = Vec::new();
    // Decide up front: attaching one endpoint can introduce the other as a
    // bare vertex (via the co-located direct pair), which must not be
    // mistaken for it already being wired to the boundary.
    let needs = [(s, t, !sk.contains_vertex(s)), (t, s, !sk.contains_vertex(t))];
    for (v, other, needed) in needs {
        if !needed {
            continue;
        }
        for &sg_id in &parts.vertex_subgraphs[v as usize] {
            let sg = &parts.subgraphs[sg_id as usize];
            debug_assert_eq!(bounds[sg_id as usize].sg, sg_id);
            let att = attach_query_vertex(sk, g, sg, &mut bounds[sg_id as usize], v, &[other])
                .expect("endpoint is in its own subgraph");
            attachments.push(att);
        }
    }
    attachments
}

pub fn release_attachments(
    attachments: Vec<Attachment>,
    sk: &mut SkeletonGraph,
    bounds: &mut [SubgraphBounds],
) {
    for att in attachments.into_iter().rev() {
        let sg = att.sg as usize;
        att.release(sk, &mut bounds[sg]);
    }
}

use crate::bounds::SubgraphBounds;
