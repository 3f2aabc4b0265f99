//! Deterministic message-passing simulation of the distributed deployment.
//!
//! One entrance worker routes weight batches and assigns queries; subgraph
//! workers own partitioned weights, per-pair bounds and the compacted
//! bounding-path indexes, and answer partial searches; query workers hold
//! skeleton replicas and drive the filter-and-refine rounds. Everything runs
//! in one process under a seeded scheduler: a message sent while processing
//! logical step `s` is delivered at step `s+1`, and the interleaving of
//! same-step deliveries is drawn from the scheduler RNG — so one seed fixes
//! the whole message log byte for byte, while query results are the same
//! under every seed.
//!
//! Isolation contract: a query is answered exactly as of the snapshot it was
//! assigned on. Weight batches are snapshot boundaries; the driver quiesces
//! every batch cascade (weights refreshed, lower-bound updates applied at
//! every replica) before the same tick's queries are assigned. Each query
//! then pins that state: the entrance stamps it with the latest batch
//! sequence number, subgraph workers keep one graph version per applied
//! batch and answer partial requests against the stamped version, and the
//! query worker clones its skeleton replica at assignment. Later ticks'
//! updates may overtake a still-running query; they reach the live replica
//! between rounds and serve the next query, never the pinned clone.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{MbdTable, SubgraphBounds};
use crate::candidate::{
    chain_segments, merge_partials, partial_ksp_in, EngineCounters, KspDgOutcome, KspDgSession,
};
use crate::compact::{compact_subgraph_bounds, refresh_bounds, CompactError, CompactedIndex};
use crate::fixed::{fmt_milli, Milli};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::ksp::RankedPath;
use crate::partition::{partition, Partition, PartitionError, SubgraphId};
use crate::pyen::{PyenOptions, PyenStats};
use crate::skeleton::{build_skeleton, LbdUpdate, SkeletonGraph};

/// Worker address. Ordering gives the deterministic iteration order the
/// scheduler and the parallel merge rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Addr {
    Entrance,
    Sg(u32),
    Q(u32),
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::Entrance => write!(f, "entrance"),
            Addr::Sg(i) => write!(f, "sg{i}"),
            Addr::Q(i) => write!(f, "q{i}"),
        }
    }
}

/// A query as assigned: endpoints, k, and the pinned snapshot (the sequence
/// number of the last weight batch emitted before assignment).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub id: u64,
    pub s: VertexId,
    pub t: VertexId,
    pub k: usize,
    pub epoch: u64,
}

/// One lower-bound row for a temporarily attached query endpoint.
#[derive(Debug, Clone)]
pub struct AttachEntry {
    pub u: VertexId,
    pub v: VertexId,
    pub sg: SubgraphId,
    pub lbd: Milli,
}

/// A resolved query: the engine outcome plus its identity and snapshot.
#[derive(Debug, Clone)]
pub struct SimQueryOutcome {
    pub query_id: u64,
    pub epoch: u64,
    pub outcome: KspDgOutcome,
}

/// Protocol message. Weight batches carry deltas in milli-units; sequence
/// numbers increase strictly per (sender, receiver) channel for batches and
/// never decrease for the lower-bound updates they cause.
#[derive(Debug, Clone)]
pub enum ClusterMessage {
    WeightBatch {
        seq: u64,
        items: Vec<(VertexId, VertexId, Milli)>,
    },
    LbdUpdate(LbdUpdate),
    QueryAssign {
        query: QuerySpec,
    },
    RefPathBroadcast {
        query_id: u64,
        ref_path: RankedPath,
        rank: u64,
    },
    PartialKspRequest {
        query: QuerySpec,
        pair: (VertexId, VertexId),
        rank: u64,
    },
    PartialKspResponse {
        query_id: u64,
        pair: (VertexId, VertexId),
        rank: u64,
        paths: Vec<RankedPath>,
        stats: PyenStats,
        invocations: u64,
    },
    AttachRequest {
        query: QuerySpec,
        vertex: VertexId,
        other: VertexId,
    },
    AttachResponse {
        query_id: u64,
        vertex: VertexId,
        entries: Vec<AttachEntry>,
    },
    QueryResult(SimQueryOutcome),
}

fn fmt_paths(paths: &[RankedPath]) -> String {
    paths
        .iter()
        .map(|p| {
            let verts: Vec<String> = p.vertices.iter().map(|v| v.to_string()).collect();
            format!("{}:{}", fmt_milli(p.cost), verts.join(" "))
        })
        .collect::<Vec<_>>()
        .join("|")
}

impl ClusterMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClusterMessage::WeightBatch { .. } => "WeightBatch",
            ClusterMessage::LbdUpdate(_) => "LbdUpdate",
            ClusterMessage::QueryAssign { .. } => "QueryAssign",
            ClusterMessage::RefPathBroadcast { .. } => "RefPathBroadcast",
            ClusterMessage::PartialKspRequest { .. } => "PartialKspRequest",
            ClusterMessage::PartialKspResponse { .. } => "PartialKspResponse",
            ClusterMessage::AttachRequest { .. } => "AttachRequest",
            ClusterMessage::AttachResponse { .. } => "AttachResponse",
            ClusterMessage::QueryResult(_) => "QueryResult",
        }
    }

    /// Canonical wire text; the log digests it.
    pub fn wire(&self) -> String {
        match self {
            ClusterMessage::WeightBatch { seq, items } => {
                let body: Vec<String> = items
                    .iter()
                    .map(|&(u, v, d)| format!("{u}-{v}:{}", fmt_milli(d)))
                    .collect();
                format!("seq={seq};items={}", body.join(","))
            }
            ClusterMessage::LbdUpdate(u) => u.to_line(),
            ClusterMessage::QueryAssign { query } => format!(
                "id={};s={};t={};k={};epoch={}",
                query.id, query.s, query.t, query.k, query.epoch
            ),
            ClusterMessage::RefPathBroadcast {
                query_id,
                ref_path,
                rank,
            } => format!(
                "id={query_id};rank={rank};ref={}",
                fmt_paths(std::slice::from_ref(ref_path))
            ),
            ClusterMessage::PartialKspRequest { query, pair, rank } => format!(
                "id={};pair={}-{};k={};rank={rank};epoch={}",
                query.id, pair.0, pair.1, query.k, query.epoch
            ),
            ClusterMessage::PartialKspResponse {
                query_id,
                pair,
                rank,
                paths,
                stats,
                invocations,
            } => format!(
                "id={query_id};pair={}-{};rank={rank};paths={};hits={};pruned={};inv={invocations}",
                pair.0,
                pair.1,
                fmt_paths(paths),
                stats.reuse_hits,
                stats.pruned_tasks,
            ),
            ClusterMessage::AttachRequest {
                query,
                vertex,
                other,
            } => format!(
                "id={};v={vertex};other={other};epoch={}",
                query.id, query.epoch
            ),
            ClusterMessage::AttachResponse {
                query_id,
                vertex,
                entries,
            } => {
                let body: Vec<String> = entries
                    .iter()
                    .map(|e| format!("{},{},{},{}", e.u, e.v, e.sg, fmt_milli(e.lbd)))
                    .collect();
                format!("id={query_id};v={vertex};entries={}", body.join("|"))
            }
            ClusterMessage::QueryResult(r) => format!(
                "id={};epoch={};certified={};unreachable={};iters={};inv={};paths={}",
                r.query_id,
                r.epoch,
                r.outcome.certified,
                r.outcome.unreachable,
                r.outcome.counters.iterations,
                r.outcome.counters.subgraph_invocations,
                fmt_paths(&r.outcome.paths)
            ),
        }
    }
}

/// One timestamped workload event. Updates sharing a tick form one weight
/// batch; that batch is a snapshot boundary for the tick's queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Update {
        tick: u64,
        u: VertexId,
        v: VertexId,
        delta: Milli,
    },
    Query {
        tick: u64,
        s: VertexId,
        t: VertexId,
        k: usize,
    },
}

impl TraceEvent {
    pub fn tick(&self) -> u64 {
        match *self {
            TraceEvent::Update { tick, .. } | TraceEvent::Query { tick, .. } => tick,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub z: usize,
    pub xi: usize,
    /// MinHash count and LSH band count for the per-subgraph compacted
    /// indexes the workers refresh through.
    pub h: usize,
    pub b: usize,
    pub subgraph_workers: usize,
    pub query_workers: usize,
    pub scheduler_seed: u64,
    /// Route partial and attach requests only to workers that own a subgraph
    /// containing the pair/vertex, instead of broadcasting to all.
    pub targeted_routing: bool,
    /// Answer partial requests against the query's pinned weight version and
    /// enumerate over a pinned skeleton clone. Turning this off answers from
    /// the latest state instead, for comparison runs; answers may then mix
    /// snapshots.
    pub strict_isolation: bool,
    /// Process each step's deliveries with worker-level parallelism. Results
    /// are identical to the sequential mode; the log ordering is the
    /// canonical per-step order instead of the seeded interleaving.
    pub parallel: bool,
    pub opts: PyenOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            z: 8,
            xi: 3,
            h: 20,
            b: 2,
            subgraph_workers: 2,
            query_workers: 2,
            scheduler_seed: 0,
            targeted_routing: false,
            strict_isolation: true,
            parallel: false,
            opts: PyenOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid worker count: {0}")]
    WorkerCount(&'static str),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Compact(#[from] CompactError),
}

/// One processed delivery in the message log.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub tick: u64,
    pub sender: Addr,
    pub receiver: Addr,
    pub kind: &'static str,
    /// Truncated SHA-256 of the wire text.
    pub digest: String,
    pub wire: String,
}

fn digest_of(wire: &str) -> String {
    let d = Sha256::digest(wire.as_bytes());
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

struct Envelope {
    sender: Addr,
    msg: ClusterMessage,
}

// ---------------------------------------------------------------------------
// Entrance

struct Entrance {
    batch_seq: u64,
    next_query_id: u64,
}

/// Splits a weight batch by owning subgraph. Items naming a pair with no
/// edge are rejected (reported back by reason); everything else lands in
/// exactly one sub-batch.
pub fn route_weight_batch(
    g: &Graph,
    parts: &Partition,
    items: &[(VertexId, VertexId, Milli)],
) -> (Vec<(SubgraphId, Vec<(VertexId, VertexId, Milli)>)>, Vec<String>) {
    let mut per_sg: BTreeMap<SubgraphId, Vec<(VertexId, VertexId, Milli)>> = BTreeMap::new();
    let mut rejects = Vec::new();
    for &(u, v, d) in items {
        match g.edge_between(u, v) {
            Some(e) => per_sg
                .entry(parts.edge_owner[e as usize])
                .or_default()
                .push((u, v, d)),
            None => rejects.push(format!("update names no edge: {u}-{v}")),
        }
    }
    (per_sg.into_iter().collect(), rejects)
}

// ---------------------------------------------------------------------------
// Subgraph worker

struct SgWorker {
    owned: Vec<SubgraphId>,
    /// Graph versions per applied batch, ascending by sequence number; the
    /// first entry is the initial state with sequence 0. Only owned
    /// subgraphs' weights are authoritative in these copies.
    versions: Vec<(u64, Graph)>,
    bounds: BTreeMap<SubgraphId, SubgraphBounds>,
    indexes: BTreeMap<SubgraphId, CompactedIndex>,
    rejects: Vec<String>,
}

impl SgWorker {
    fn version_at(&self, epoch: u64, strict: bool) -> &Graph {
        if !strict {
            return &self.versions.last().expect("baseline version").1;
        }
        &self
            .versions
            .iter()
            .rev()
            .find(|&&(seq, _)| seq <= epoch)
            .expect("baseline version has sequence 0")
            .1
    }

    fn handle(
        &mut self,
        parts: &Partition,
        cfg: &SimConfig,
        query_workers: usize,
        msg: &ClusterMessage,
    ) -> Vec<(Addr, ClusterMessage)> {
        match msg {
            ClusterMessage::WeightBatch { seq, items } => {
                self.apply_batch(parts, query_workers, *seq, items)
            }
            ClusterMessage::PartialKspRequest { query, pair, rank } => {
                let g = self.version_at(query.epoch, cfg.strict_isolation);
                let mut lists = Vec::new();
                let mut stats = PyenStats::default();
                let mut invocations = 0u64;
                for &sg_id in &self.owned {
                    let sg = &parts.subgraphs[sg_id as usize];
                    if !sg.contains_vertex(pair.0) || !sg.contains_vertex(pair.1) {
                        continue;
                    }
                    invocations += 1;
                    let (paths, st) =
                        partial_ksp_in(g, sg, pair.0, pair.1, query.k, cfg.opts, &[query.s, query.t]);
                    stats.reuse_hits += st.reuse_hits;
                    stats.pruned_tasks += st.pruned_tasks;
                    stats.spur_searches += st.spur_searches;
                    lists.push(paths);
                }
                let paths = merge_partials(lists, query.k);
                vec![(
                    Addr::Q((query.id % query_workers as u64) as u32),
                    ClusterMessage::PartialKspResponse {
                        query_id: query.id,
                        pair: *pair,
                        rank: *rank,
                        paths,
                        stats,
                        invocations,
                    },
                )]
            }
            ClusterMessage::AttachRequest {
                query,
                vertex,
                other,
            } => {
                let g = self.version_at(query.epoch, cfg.strict_isolation);
                let mut entries = Vec::new();
                for &sg_id in &self.owned {
                    let sg = &parts.subgraphs[sg_id as usize];
                    if !sg.contains_vertex(*vertex) {
                        continue;
                    }
                    let mut targets = sg.boundary.clone();
                    if other != vertex && sg.contains_vertex(*other) && !targets.contains(other) {
                        targets.push(*other);
                    }
                    let keys: Vec<(VertexId, VertexId)> = targets
                        .iter()
                        .filter(|&&t| t != *vertex)
                        .map(|&t| (t.min(*vertex), t.max(*vertex)))
                        .filter(|key| !self.bounds[&sg_id].pairs.contains_key(key))
                        .collect();
                    let tmp = SubgraphBounds::build_for_pairs(g, sg, self.bounds[&sg_id].xi, &keys);
                    for &(u, v) in &keys {
                        entries.push(AttachEntry {
                            u,
                            v,
                            sg: sg_id,
                            lbd: tmp.lower_bound(u, v).value,
                        });
                    }
                }
                vec![(
                    Addr::Q((query.id % query_workers as u64) as u32),
                    ClusterMessage::AttachResponse {
                        query_id: query.id,
                        vertex: *vertex,
                        entries,
                    },
                )]
            }
            // Reference announcements carry no work for the subgraph side;
            // the per-pair requests do.
            ClusterMessage::RefPathBroadcast { .. } => Vec::new(),
            other => unreachable!("subgraph worker got {}", other.kind()),
        }
    }

    fn apply_batch(
        &mut self,
        parts: &Partition,
        query_workers: usize,
        seq: u64,
        items: &[(VertexId, VertexId, Milli)],
    ) -> Vec<(Addr, ClusterMessage)> {
        let mut g = self.versions.last().expect("baseline version").1.clone();
        // Group this worker's items per owned subgraph; routing already
        // dropped unknown edges.
        let mut per_sg: BTreeMap<SubgraphId, Vec<(EdgeId, Milli)>> = BTreeMap::new();
        for &(u, v, d) in items {
            let e = g.edge_between(u, v).expect("entrance validated the edge");
            per_sg.entry(parts.edge_owner[e as usize]).or_default().push((e, d));
        }
        let mut out = Vec::new();
        for (sg_id, changes) in per_sg {
            debug_assert!(self.owned.contains(&sg_id), "batch routed to wrong worker");
            let sg = &parts.subgraphs[sg_id as usize];
            let bounds = self.bounds.get_mut(&sg_id).expect("owned bounds");
            let idx = &self.indexes[&sg_id];
            match refresh_bounds(&mut g, sg, bounds, idx, &changes) {
                Ok(changed) => {
                    for ((u, v), lbd) in changed {
                        for q in 0..query_workers {
                            out.push((
                                Addr::Q(q as u32),
                                ClusterMessage::LbdUpdate(LbdUpdate {
                                    seq,
                                    u,
                                    v,
                                    sg: sg_id,
                                    lbd,
                                }),
                            ));
                        }
                    }
                }
                Err(e) => self
                    .rejects
                    .push(format!("batch {seq} rejected for subgraph {sg_id}: {e}")),
            }
        }
        self.versions.push((seq, g));
        out
    }
}

// ---------------------------------------------------------------------------
// Query worker

struct PendingRank {
    ref_path: RankedPath,
    awaiting: BTreeMap<(VertexId, VertexId), usize>,
    collected: HashMap<(VertexId, VertexId), Vec<Vec<RankedPath>>>,
}

struct ActiveQuery {
    spec: QuerySpec,
    sk: SkeletonGraph,
    session: KspDgSession,
    /// Merged per-pair segment lists, aggregated across responding workers.
    segments: HashMap<(VertexId, VertexId), Vec<RankedPath>>,
    pending: Option<PendingRank>,
    attach_awaiting: usize,
    attach_entries: Vec<AttachEntry>,
    attach_vertices: Vec<VertexId>,
}

struct QueryWorker {
    replica: SkeletonGraph,
    active: BTreeMap<u64, ActiveQuery>,
}

impl QueryWorker {
    fn handle(
        &mut self,
        parts: &Partition,
        cfg: &SimConfig,
        sg_workers: usize,
        msg: &ClusterMessage,
    ) -> Vec<(Addr, ClusterMessage)> {
        match msg {
            ClusterMessage::LbdUpdate(u) => {
                // Between rounds by construction: the worker is not inside a
                // join while processing this message. Pinned clones of
                // running queries are untouched.
                self.replica.apply_update(u);
                Vec::new()
            }
            ClusterMessage::QueryAssign { query } => self.assign(parts, cfg, sg_workers, query),
            ClusterMessage::AttachResponse {
                query_id,
                vertex: _,
                entries,
            } => {
                let Some(aq) = self.active.get_mut(query_id) else {
                    unreachable!("attach response for unknown query {query_id}");
                };
                aq.attach_entries.extend(entries.iter().cloned());
                aq.attach_awaiting -= 1;
                if aq.attach_awaiting > 0 {
                    return Vec::new();
                }
                // Apply in canonical order; the final skeleton state is
                // order-independent, this just keeps intermediate states
                // reproducible for debugging.
                let mut entries = std::mem::take(&mut aq.attach_entries);
                entries.sort_by_key(|e| (e.u, e.v, e.sg));
                for e in &entries {
                    aq.sk.apply_lbd_update((e.u, e.v), e.sg, e.lbd);
                }
                // A vertex with no attachable pair (a lone-subgraph interior
                // endpoint) still becomes a skeleton vertex, as an isolated
                // one.
                for &v in &aq.attach_vertices {
                    aq.sk.ensure_vertex(v);
                }
                self.drive(parts, cfg, sg_workers, *query_id)
            }
            ClusterMessage::PartialKspResponse {
                query_id,
                pair,
                rank: _,
                paths,
                stats,
                invocations,
            } => {
                let Some(aq) = self.active.get_mut(query_id) else {
                    unreachable!("partial response for unknown query {query_id}");
                };
                aq.session.counters.subgraph_invocations += invocations;
                aq.session.counters.absorb_spur_stats(*stats);
                let pending = aq.pending.as_mut().expect("response outside a rank");
                pending
                    .collected
                    .entry(*pair)
                    .or_default()
                    .push(paths.clone());
                let left = pending.awaiting.get_mut(pair).expect("unrequested pair");
                *left -= 1;
                if *left == 0 {
                    pending.awaiting.remove(pair);
                }
                if !pending.awaiting.is_empty() {
                    return Vec::new();
                }
                // Rank complete: merge each pair across workers, join, and
                // advance.
                let pending = aq.pending.take().expect("checked above");
                for (pair, lists) in pending.collected {
                    let merged = merge_partials(lists, aq.spec.k);
                    aq.segments.insert(pair, merged);
                }
                let k = aq.spec.k;
                let cands = chain_segments(&pending.ref_path, k, |u, v| {
                    aq.segments
                        .get(&(u, v))
                        .cloned()
                        .expect("segment requested for every pair")
                });
                aq.session.absorb(cands);
                self.drive(parts, cfg, sg_workers, *query_id)
            }
            other => unreachable!("query worker got {}", other.kind()),
        }
    }

    fn assign(
        &mut self,
        parts: &Partition,
        cfg: &SimConfig,
        sg_workers: usize,
        query: &QuerySpec,
    ) -> Vec<(Addr, ClusterMessage)> {
        if query.s == query.t {
            return vec![(
                Addr::Entrance,
                ClusterMessage::QueryResult(SimQueryOutcome {
                    query_id: query.id,
                    epoch: query.epoch,
                    outcome: KspDgOutcome {
                        paths: vec![RankedPath {
                            cost: 0,
                            vertices: vec![query.s],
                        }],
                        certified: true,
                        unreachable: false,
                        counters: EngineCounters::default(),
                    },
                }),
            )];
        }
        let mut aq = ActiveQuery {
            spec: query.clone(),
            session: KspDgSession::new(query.s, query.t, query.k),
            // The pinned view: assignment happens after the epoch's batch
            // cascade quiesced, so this clone is the epoch's skeleton.
            sk: self.replica.clone(),
            segments: HashMap::new(),
            pending: None,
            attach_awaiting: 0,
            attach_entries: Vec::new(),
            attach_vertices: Vec::new(),
        };
        // Snapshot both endpoints' needs before anything mutates the clone.
        let needs: Vec<(VertexId, VertexId)> = [(query.s, query.t), (query.t, query.s)]
            .into_iter()
            .filter(|&(v, _)| !aq.sk.contains_vertex(v))
            .collect();
        let mut out = Vec::new();
        for &(v, other) in &needs {
            let targets = attach_targets(parts, cfg, sg_workers, v);
            aq.attach_awaiting += targets.len();
            aq.attach_vertices.push(v);
            for t in targets {
                out.push((
                    t,
                    ClusterMessage::AttachRequest {
                        query: query.clone(),
                        vertex: v,
                        other,
                    },
                ));
            }
        }
        let id = query.id;
        self.active.insert(id, aq);
        if out.is_empty() {
            return self.drive(parts, cfg, sg_workers, id);
        }
        out
    }

    /// Advances a query through as many ranks as the cached segments allow,
    /// stopping when a rank needs fresh partial searches or the query
    /// resolves.
    fn drive(
        &mut self,
        parts: &Partition,
        cfg: &SimConfig,
        sg_workers: usize,
        id: u64,
    ) -> Vec<(Addr, ClusterMessage)> {
        let mut out = Vec::new();
        loop {
            let aq = self.active.get_mut(&id).expect("active query");
            let next = aq.session.next_reference(&aq.sk);
            let done = if aq.session.certified(next.as_ref()) {
                Some(true)
            } else if next.is_none() {
                Some(false)
            } else {
                None
            };
            if let Some(certified) = done {
                let aq = self.active.remove(&id).expect("active query");
                let (paths, counters) = aq.session.finish();
                out.push((
                    Addr::Entrance,
                    ClusterMessage::QueryResult(SimQueryOutcome {
                        query_id: id,
                        epoch: aq.spec.epoch,
                        outcome: KspDgOutcome {
                            unreachable: paths.is_empty(),
                            certified,
                            paths,
                            counters,
                        },
                    }),
                ));
                return out;
            }
            let ref_path = next.expect("checked above");
            let rank = aq.session.counters.iterations;
            for i in 0..sg_workers {
                out.push((
                    Addr::Sg(i as u32),
                    ClusterMessage::RefPathBroadcast {
                        query_id: id,
                        ref_path: ref_path.clone(),
                        rank,
                    },
                ));
            }
            let mut awaiting = BTreeMap::new();
            for w in ref_path.vertices.windows(2) {
                let pair = (w[0], w[1]);
                if aq.segments.contains_key(&pair) || awaiting.contains_key(&pair) {
                    continue;
                }
                let targets = pair_targets(parts, cfg, sg_workers, pair);
                awaiting.insert(pair, targets.len());
                for t in targets {
                    out.push((
                        t,
                        ClusterMessage::PartialKspRequest {
                            query: aq.spec.clone(),
                            pair,
                            rank,
                        },
                    ));
                }
            }
            if awaiting.is_empty() {
                // Every pair served from cache: join immediately and try the
                // next reference.
                let k = aq.spec.k;
                let cands = chain_segments(&ref_path, k, |u, v| {
                    aq.segments
                        .get(&(u, v))
                        .cloned()
                        .expect("cached segment for every pair")
                });
                aq.session.absorb(cands);
                continue;
            }
            aq.pending = Some(PendingRank {
                ref_path,
                awaiting,
                collected: HashMap::new(),
            });
            return out;
        }
    }
}

fn worker_of_sg(sg: SubgraphId, sg_workers: usize) -> Addr {
    Addr::Sg((sg as usize % sg_workers) as u32)
}

fn attach_targets(parts: &Partition, cfg: &SimConfig, sg_workers: usize, v: VertexId) -> Vec<Addr> {
    if !cfg.targeted_routing {
        return (0..sg_workers).map(|i| Addr::Sg(i as u32)).collect();
    }
    let mut targets: Vec<Addr> = parts.vertex_subgraphs[v as usize]
        .iter()
        .map(|&sg| worker_of_sg(sg, sg_workers))
        .collect();
    targets.sort();
    targets.dedup();
    targets
}

fn pair_targets(
    parts: &Partition,
    cfg: &SimConfig,
    sg_workers: usize,
    pair: (VertexId, VertexId),
) -> Vec<Addr> {
    if !cfg.targeted_routing {
        return (0..sg_workers).map(|i| Addr::Sg(i as u32)).collect();
    }
    let mut targets: Vec<Addr> = parts
        .shared_subgraphs(pair.0, pair.1)
        .into_iter()
        .map(|sg| worker_of_sg(sg, sg_workers))
        .collect();
    targets.sort();
    targets.dedup();
    debug_assert!(!targets.is_empty(), "skeleton pair with no co-locating subgraph");
    targets
}

// ---------------------------------------------------------------------------
// Simulation driver

pub struct Simulation {
    pub cfg: SimConfig,
    g0: Graph,
    pub parts: Partition,
    entrance: Entrance,
    sgs: Vec<SgWorker>,
    qs: Vec<QueryWorker>,
    step: u64,
    current: BTreeMap<Addr, VecDeque<Envelope>>,
    next: BTreeMap<Addr, VecDeque<Envelope>>,
    rng: ChaCha8Rng,
    pub log: Vec<LogRow>,
    pub results: BTreeMap<u64, SimQueryOutcome>,
    pub rejects: Vec<String>,
    /// Trace tick of each emitted weight batch; index i holds batch seq i+1.
    pub batch_ticks: Vec<u64>,
}

impl Simulation {
    pub fn new(g: &Graph, cfg: SimConfig) -> Result<Simulation, SimError> {
        if cfg.subgraph_workers == 0 {
            return Err(SimError::WorkerCount("subgraph_workers"));
        }
        if cfg.query_workers == 0 {
            return Err(SimError::WorkerCount("query_workers"));
        }
        let parts = partition(g, cfg.z)?;
        let mut all_bounds = Vec::new();
        for sg in &parts.subgraphs {
            all_bounds.push(SubgraphBounds::build(g, sg, cfg.xi));
        }
        let table = MbdTable::from_bounds(&all_bounds);
        let replica = build_skeleton(&table);
        let mut sgs: Vec<SgWorker> = (0..cfg.subgraph_workers)
            .map(|_| SgWorker {
                owned: Vec::new(),
                versions: vec![(0, g.clone())],
                bounds: BTreeMap::new(),
                indexes: BTreeMap::new(),
                rejects: Vec::new(),
            })
            .collect();
        for (sg_id, b) in all_bounds.into_iter().enumerate() {
            let sg_id = sg_id as SubgraphId;
            let Addr::Sg(w) = worker_of_sg(sg_id, cfg.subgraph_workers) else {
                unreachable!()
            };
            let idx = compact_subgraph_bounds(&b, cfg.h, cfg.b)?;
            let worker = &mut sgs[w as usize];
            worker.owned.push(sg_id);
            worker.bounds.insert(sg_id, b);
            worker.indexes.insert(sg_id, idx);
        }
        let qs = (0..cfg.query_workers)
            .map(|_| QueryWorker {
                replica: replica.clone(),
                active: BTreeMap::new(),
            })
            .collect();
        let rng = ChaCha8Rng::seed_from_u64(cfg.scheduler_seed);
        Ok(Simulation {
            cfg,
            g0: g.clone(),
            parts,
            entrance: Entrance {
                batch_seq: 0,
                next_query_id: 0,
            },
            sgs,
            qs,
            step: 0,
            current: BTreeMap::new(),
            next: BTreeMap::new(),
            rng,
            log: Vec::new(),
            results: BTreeMap::new(),
            rejects: Vec::new(),
            batch_ticks: Vec::new(),
        })
    }

    fn send(&mut self, sender: Addr, receiver: Addr, msg: ClusterMessage) {
        self.next
            .entry(receiver)
            .or_default()
            .push_back(Envelope { sender, msg });
    }

    fn process(&mut self, receiver: Addr, env: Envelope) {
        let wire = env.msg.wire();
        self.log.push(LogRow {
            tick: self.step,
            sender: env.sender,
            receiver,
            kind: env.msg.kind(),
            digest: digest_of(&wire),
            wire,
        });
        let out = {
            let Simulation {
                parts,
                cfg,
                sgs,
                qs,
                results,
                ..
            } = &mut *self;
            match receiver {
                Addr::Entrance => {
                    if let ClusterMessage::QueryResult(r) = env.msg {
                        results.insert(r.query_id, r);
                    }
                    Vec::new()
                }
                Addr::Sg(i) => sgs[i as usize].handle(parts, cfg, qs.len(), &env.msg),
                Addr::Q(i) => {
                    let n_sg = sgs.len();
                    qs[i as usize].handle(parts, cfg, n_sg, &env.msg)
                }
            }
        };
        for (to, msg) in out {
            self.send(receiver, to, msg);
        }
    }

    /// Delivers everything in flight. A message sent while processing step s
    /// is handled at step s+1; within one step the interleaving across
    /// receivers is drawn from the scheduler RNG (or is the canonical order
    /// in parallel mode).
    fn drain(&mut self) {
        while !self.current.is_empty() || !self.next.is_empty() {
            if self.current.is_empty() {
                self.step += 1;
                self.current = std::mem::take(&mut self.next);
            }
            if self.cfg.parallel {
                // Worker-level parallelism would go per receiver here; the
                // state partitioning already makes each receiver's batch
                // independent, so the canonical order is also the merge
                // order.
                let receivers: Vec<Addr> = self.current.keys().copied().collect();
                for r in receivers {
                    let mut queue = self.current.remove(&r).expect("listed receiver");
                    while let Some(env) = queue.pop_front() {
                        self.process(r, env);
                    }
                }
                continue;
            }
            let receivers: Vec<Addr> = self.current.keys().copied().collect();
            let pick = receivers[self.rng.gen_range(0..receivers.len())];
            let queue = self.current.get_mut(&pick).expect("listed receiver");
            let env = queue.pop_front().expect("nonempty queue");
            if queue.is_empty() {
                self.current.remove(&pick);
            }
            self.process(pick, env);
        }
    }

    fn emit_batch(&mut self, tick: u64, items: Vec<(VertexId, VertexId, Milli)>) {
        self.entrance.batch_seq += 1;
        let seq = self.entrance.batch_seq;
        self.batch_ticks.push(tick);
        let (per_sg, rejects) = route_weight_batch(&self.g0, &self.parts, &items);
        self.rejects.extend(rejects);
        // Sub-batches for subgraphs sharing a worker ride one envelope so a
        // channel never sees the same sequence twice.
        let mut per_worker: BTreeMap<Addr, Vec<(VertexId, VertexId, Milli)>> = BTreeMap::new();
        for (sg_id, sub) in per_sg {
            per_worker
                .entry(worker_of_sg(sg_id, self.sgs.len()))
                .or_default()
                .extend(sub);
        }
        for (w, items) in per_worker {
            self.send(Addr::Entrance, w, ClusterMessage::WeightBatch { seq, items });
        }
    }

    fn emit_query(&mut self, s: VertexId, t: VertexId, k: usize) {
        let id = self.entrance.next_query_id;
        self.entrance.next_query_id += 1;
        let query = QuerySpec {
            id,
            s,
            t,
            k,
            epoch: self.entrance.batch_seq,
        };
        let target = Addr::Q((id % self.qs.len() as u64) as u32);
        self.send(Addr::Entrance, target, ClusterMessage::QueryAssign { query });
    }

    /// Runs a trace to completion. Each tick quiesces in-flight work (the
    /// previous tick's queries and this tick's weight batch) before the
    /// tick's queries are assigned, so every query pins a fully applied
    /// snapshot while still overlapping the next tick's updates.
    pub fn run(&mut self, trace: &[TraceEvent]) {
        let mut by_tick: BTreeMap<u64, Vec<&TraceEvent>> = BTreeMap::new();
        for ev in trace {
            by_tick.entry(ev.tick()).or_default().push(ev);
        }
        for (tick, events) in by_tick {
            let updates: Vec<(VertexId, VertexId, Milli)> = events
                .iter()
                .filter_map(|ev| match **ev {
                    TraceEvent::Update { u, v, delta, .. } => Some((u, v, delta)),
                    _ => None,
                })
                .collect();
            if !updates.is_empty() {
                self.emit_batch(tick, updates);
            }
            self.drain();
            for ev in events {
                if let TraceEvent::Query { s, t, k, .. } = *ev {
                    self.emit_query(s, t, k);
                }
            }
        }
        self.drain();
    }

    /// The message log as CSV.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("tick,sender,receiver,kind,digest\n");
        for row in &self.log {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.tick, row.sender, row.receiver, row.kind, row.digest
            ));
        }
        out
    }

    /// All worker rejection notes (unroutable items, refused batches).
    pub fn all_rejects(&self) -> Vec<String> {
        let mut all = self.rejects.clone();
        for sg in &self.sgs {
            all.extend(sg.rejects.iter().cloned());
        }
        all
    }

    /// The query workers' live skeleton replicas, for convergence checks.
    pub fn replicas(&self) -> Vec<&SkeletonGraph> {
        self.qs.iter().map(|q| &q.replica).collect()
    }

    /// Validation self-test hook: overwrites every contribution of every
    /// boundary pair on every query worker's replica with `value`, leaving
    /// the owners' bounds untouched. Deliberately breaks the lower-bound
    /// contract so downstream checks must catch it.
    pub fn corrupt_replica_bounds(&mut self, value: Milli) {
        let mut pairs: Vec<((VertexId, VertexId), SubgraphId)> = Vec::new();
        for w in &self.sgs {
            for (&sg_id, b) in &w.bounds {
                for &pair in b.pairs.keys() {
                    pairs.push((pair, sg_id));
                }
            }
        }
        for q in &mut self.qs {
            for &(pair, sg) in &pairs {
                q.replica.apply_lbd_update(pair, sg, value);
            }
        }
    }

    /// Current weight of an edge according to its owning worker's latest
    /// version.
    pub fn owned_weight(&self, e: EdgeId) -> Milli {
        let sg = self.parts.edge_owner[e as usize];
        let Addr::Sg(w) = worker_of_sg(sg, self.sgs.len()) else {
            unreachable!()
        };
        self.sgs[w as usize]
            .versions
            .last()
            .expect("baseline version")
            .1
            .edge(e)
            .current
    }
}

/// Builds and runs a simulation over a trace, returning the drained state.
pub fn run_simulation(
    g: &Graph,
    cfg: SimConfig,
    trace: &[TraceEvent],
) -> Result<Simulation, SimError> {
    let mut sim = Simulation::new(g, cfg)?;
    sim.run(trace);
    Ok(sim)
}

/// Replays a trace's weight updates through batch `epoch` onto a fresh copy
/// of the graph — the reference for what a query pinned to that epoch must
/// see. Mirrors the workers' acceptance rules: unroutable items are skipped
/// and a sub-batch that would drive a weight non-positive is dropped whole.
pub fn snapshot_at(g: &Graph, parts: &Partition, trace: &[TraceEvent], epoch: u64) -> Graph {
    let mut by_tick: BTreeMap<u64, Vec<(VertexId, VertexId, Milli)>> = BTreeMap::new();
    for ev in trace {
        if let TraceEvent::Update { tick, u, v, delta } = *ev {
            by_tick.entry(tick).or_default().push((u, v, delta));
        }
    }
    let mut out = g.clone();
    for (_, items) in by_tick.into_iter().take(epoch as usize) {
        let (per_sg, _) = route_weight_batch(g, parts, &items);
        for (_, sub) in per_sg {
            let changes: Vec<(EdgeId, Milli)> = sub
                .iter()
                .map(|&(u, v, d)| (out.edge_between(u, v).expect("routed edge"), d))
                .collect();
            // Same atomicity as refresh_bounds: the whole sub-batch or none.
            let _ = out.apply_deltas(&changes);
        }
    }
    out
}
