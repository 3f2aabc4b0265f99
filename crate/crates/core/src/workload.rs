//! Workload generation, trace files, benchmark execution, and validation.
//!
//! The pieces behind the command-line front end: the α/τ weight-variation
//! model, the line-delimited event-trace format, seeded query generation,
//! the three benchmark modes, and the oracle-backed validation suite with
//! its fault-injection self-test hook.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bounds::{MbdTable, SubgraphBounds};
use crate::candidate::{attach_endpoints, release_attachments, KspDgSession};
use crate::compact::compact_subgraph_bounds;
use crate::fixed::{fmt_milli, from_int, parse_milli, Milli};
use crate::graph::{Graph, VertexId};
use crate::ksp::{yen_ksp, QueryError, RankedPath};
use crate::partition::{partition, PartitionError};
use crate::pyen::pyen_ksp;
use crate::sim::{
    run_simulation, snapshot_at, SimConfig, SimError, Simulation, TraceEvent,
};
use crate::skeleton::build_skeleton;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Compact(#[from] crate::compact::CompactError),
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> WorkloadError {
    WorkloadError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// Weight-variation model

/// The α/τ dynamics: per snapshot, a fraction α of edges changes weight by a
/// multiplicative factor within ±τ. The underlying traffic model in the
/// source material is unspecified beyond this envelope, so the factor is
/// drawn uniformly from [1−τ, 1+τ]; results land on the milli grid and never
/// drop below one grid unit, keeping every weight positive.
#[derive(Debug, Clone, Copy)]
pub struct DynamicsConfig {
    pub alpha: f64,
    pub tau: f64,
    pub snapshots: usize,
    pub seed: u64,
}

impl DynamicsConfig {
    pub fn check(&self) -> Result<(), WorkloadError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(WorkloadError::Config(format!(
                "alpha must be in [0,1], got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(WorkloadError::Config(format!(
                "tau must be in [0,1), got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Generates the update half of an event trace: snapshot `i` becomes tick
/// `i+1`, carrying ⌊α·|E|⌋ distinct uniformly chosen edges, each with the
/// delta that moves its (tracked) current weight by a uniform factor in
/// [1−τ, 1+τ]. Identical config and seed give a byte-identical trace.
pub fn generate_weight_stream(
    g: &Graph,
    cfg: &DynamicsConfig,
) -> Result<Vec<TraceEvent>, WorkloadError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = g.edge_count();
    let per_batch = (cfg.alpha * m as f64).floor() as usize;
    let mut current: Vec<Milli> = g.edges().iter().map(|e| e.current).collect();
    let mut events = Vec::with_capacity(per_batch * cfg.snapshots);
    for snapshot in 0..cfg.snapshots {
        let tick = snapshot as u64 + 1;
        let mut chosen: Vec<usize> = sample(&mut rng, m, per_batch).into_iter().collect();
        chosen.sort_unstable();
        for ei in chosen {
            let factor = if cfg.tau == 0.0 {
                1.0
            } else {
                rng.gen_range(1.0 - cfg.tau..=1.0 + cfg.tau)
            };
            let next = ((current[ei] as f64 * factor).round() as Milli).max(1);
            let delta = next - current[ei];
            current[ei] = next;
            let e = &g.edges()[ei];
            events.push(TraceEvent::Update {
                tick,
                u: e.u,
                v: e.v,
                delta,
            });
        }
    }
    Ok(events)
}

// ---------------------------------------------------------------------------
// Event-trace text format

/// Renders events as the line format `t=<tick> update <u>-<v> <Δw>` /
/// `t=<tick> query <s> <t> <k>`, sorted by tick with updates ahead of
/// queries within one tick (their semantic order) and original order
/// otherwise preserved.
pub fn emit_trace(events: &[TraceEvent]) -> String {
    let mut by_tick: BTreeMap<u64, (Vec<&TraceEvent>, Vec<&TraceEvent>)> = BTreeMap::new();
    for ev in events {
        let slot = by_tick.entry(ev.tick()).or_default();
        match ev {
            TraceEvent::Update { .. } => slot.0.push(ev),
            TraceEvent::Query { .. } => slot.1.push(ev),
        }
    }
    let mut out = String::new();
    for (_, (updates, queries)) in by_tick {
        for ev in updates.into_iter().chain(queries) {
            match *ev {
                TraceEvent::Update { tick, u, v, delta } => {
                    out.push_str(&format!("t={tick} update {u}-{v} {}\n", fmt_milli(delta)));
                }
                TraceEvent::Query { tick, s, t, k } => {
                    out.push_str(&format!("t={tick} query {s} {t} {k}\n"));
                }
            }
        }
    }
    out
}

/// Parses the trace line format; `file` labels error messages.
pub fn parse_trace(text: &str, file: &str) -> Result<Vec<TraceEvent>, WorkloadError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let t_field = fields.next().expect("nonempty line");
        let tick: u64 = t_field
            .strip_prefix("t=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(file, lineno, format!("bad tick field `{t_field}`")))?;
        match fields.next() {
            Some("update") => {
                let edge = fields
                    .next()
                    .ok_or_else(|| parse_err(file, lineno, "update needs `<u>-<v> <Δw>`"))?;
                let (u, v) = edge
                    .split_once('-')
                    .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                    .ok_or_else(|| parse_err(file, lineno, format!("bad edge `{edge}`")))?;
                let dw = fields
                    .next()
                    .ok_or_else(|| parse_err(file, lineno, "update needs a weight delta"))?;
                let delta = parse_milli(dw)
                    .ok_or_else(|| parse_err(file, lineno, format!("bad weight delta `{dw}`")))?;
                events.push(TraceEvent::Update { tick, u, v, delta });
            }
            Some("query") => {
                let mut num = |name: &str| -> Result<u64, WorkloadError> {
                    fields
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| parse_err(file, lineno, format!("bad query {name}")))
                };
                let s = num("source")? as VertexId;
                let t = num("target")? as VertexId;
                let k = num("k")? as usize;
                events.push(TraceEvent::Query { tick, s, t, k });
            }
            other => {
                return Err(parse_err(
                    file,
                    lineno,
                    format!("unknown event `{}`", other.unwrap_or("")),
                ));
            }
        }
        if fields.next().is_some() {
            return Err(parse_err(file, lineno, "trailing fields"));
        }
    }
    Ok(events)
}

// ---------------------------------------------------------------------------
// Query generation

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRow {
    pub id: u64,
    pub s: VertexId,
    pub t: VertexId,
    pub k: usize,
}

fn components(g: &Graph) -> Vec<u32> {
    let n = g.vertex_count();
    let mut comp = vec![u32::MAX; n];
    let mut next = 0;
    for start in 0..n as VertexId {
        if comp[start as usize] != u32::MAX {
            continue;
        }
        comp[start as usize] = next;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(w, _) in g.neighbors(u) {
                if comp[w as usize] == u32::MAX {
                    comp[w as usize] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

/// `n` uniformly random connected (s,t) pairs with s ≠ t, each with a k
/// drawn uniformly from `k_range` (inclusive). The graph must have some
/// component with at least two vertices.
pub fn generate_queries(
    g: &Graph,
    n: usize,
    k_range: (usize, usize),
    seed: u64,
) -> Result<Vec<QueryRow>, WorkloadError> {
    if k_range.0 == 0 || k_range.0 > k_range.1 {
        return Err(WorkloadError::Config(format!(
            "bad k range {}..={}",
            k_range.0, k_range.1
        )));
    }
    let comp = components(g);
    let nv = g.vertex_count();
    let connectable = {
        let mut sizes = BTreeMap::new();
        for &c in &comp {
            *sizes.entry(c).or_insert(0usize) += 1;
        }
        sizes.values().any(|&s| s >= 2)
    };
    if n > 0 && !connectable {
        return Err(WorkloadError::Config(
            "graph has no connected vertex pair".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for id in 0..n as u64 {
        let (s, t) = loop {
            let s = rng.gen_range(0..nv as VertexId);
            let t = rng.gen_range(0..nv as VertexId);
            if s != t && comp[s as usize] == comp[t as usize] {
                break (s, t);
            }
        };
        let k = rng.gen_range(k_range.0..=k_range.1);
        rows.push(QueryRow { id, s, t, k });
    }
    Ok(rows)
}

pub fn emit_queries_csv(rows: &[QueryRow]) -> String {
    let mut out = String::from("query_id,s,t,k\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.id, r.s, r.t, r.k));
    }
    out
}

pub fn parse_queries_csv(text: &str, file: &str) -> Result<Vec<QueryRow>, WorkloadError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line == "query_id,s,t,k" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(file, lineno, "expected `query_id,s,t,k`"));
        }
        let num = |idx: usize, name: &str| -> Result<u64, WorkloadError> {
            fields[idx]
                .trim()
                .parse()
                .map_err(|_| parse_err(file, lineno, format!("bad {name} `{}`", fields[idx])))
        };
        rows.push(QueryRow {
            id: num(0, "query_id")?,
            s: num(1, "s")? as VertexId,
            t: num(2, "t")? as VertexId,
            k: num(3, "k")? as usize,
        });
    }
    Ok(rows)
}

/// Spreads query rows over a trace's tick range (evenly, in row order) and
/// appends them as query events. With no update ticks everything lands on
/// tick 1. Assigned ticks are nondecreasing in row order, so the simulator's
/// query ids follow row order whether or not the trace already holds its own
/// query events — ids always follow (tick, appearance) order.
pub fn interleave_queries(trace: &mut Vec<TraceEvent>, rows: &[QueryRow]) {
    let max_tick = trace.iter().map(|e| e.tick()).max().unwrap_or(1).max(1);
    let n = rows.len().max(1) as u64;
    for (i, r) in rows.iter().enumerate() {
        let tick = 1 + (i as u64 * max_tick) / n;
        trace.push(TraceEvent::Query {
            tick,
            s: r.s,
            t: r.t,
            k: r.k,
        });
    }
}

/// The queries of a trace in the order the simulation entrance assigns ids:
/// grouped by tick, original order within a tick.
pub fn ordered_queries(trace: &[TraceEvent]) -> Vec<(u64, u64, VertexId, VertexId, usize)> {
    let mut by_tick: BTreeMap<u64, Vec<(VertexId, VertexId, usize)>> = BTreeMap::new();
    for ev in trace {
        if let TraceEvent::Query { tick, s, t, k } = *ev {
            by_tick.entry(tick).or_default().push((s, t, k));
        }
    }
    let mut out = Vec::new();
    let mut id = 0u64;
    for (tick, qs) in by_tick {
        for (s, t, k) in qs {
            out.push((id, tick, s, t, k));
            id += 1;
        }
    }
    out
}

/// The snapshot a query at `tick` pins: the number of update batches at or
/// before that tick (batches are numbered per distinct update tick, in
/// order).
pub fn epoch_at_tick(trace: &[TraceEvent], tick: u64) -> u64 {
    let update_ticks: BTreeSet<u64> = trace
        .iter()
        .filter(|ev| matches!(ev, TraceEvent::Update { .. }))
        .map(|ev| ev.tick())
        .collect();
    update_ticks.iter().filter(|&&t| t <= tick).count() as u64
}

// ---------------------------------------------------------------------------
// Benchmark configuration

/// Everything the front end reads from a `key=value` config file. Field
/// defaults mirror the evaluated setup: ξ=10 bounding paths, half the edges
/// changing by up to ±50% per snapshot, 20-snapshot streams, 20 MinHash
/// rows in 2-row bands.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub z: usize,
    pub xi: usize,
    pub k_default: usize,
    pub h: usize,
    pub b: usize,
    pub scheduler_seed: u64,
    pub targeted_routing: bool,
    pub strict_isolation: bool,
    pub parallel: bool,
    pub subgraph_workers: usize,
    pub query_workers: usize,
    pub alpha: f64,
    pub tau: f64,
    pub snapshots: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            z: 32,
            xi: 10,
            k_default: 10,
            h: 20,
            b: 2,
            scheduler_seed: 0,
            targeted_routing: false,
            strict_isolation: true,
            parallel: false,
            subgraph_workers: 2,
            query_workers: 2,
            alpha: 0.5,
            tau: 0.5,
            snapshots: 20,
        }
    }
}

impl BenchConfig {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            z: self.z,
            xi: self.xi,
            h: self.h,
            b: self.b,
            subgraph_workers: self.subgraph_workers,
            query_workers: self.query_workers,
            scheduler_seed: self.scheduler_seed,
            targeted_routing: self.targeted_routing,
            strict_isolation: self.strict_isolation,
            parallel: self.parallel,
            opts: Default::default(),
        }
    }

    pub fn dynamics(&self, seed: u64) -> DynamicsConfig {
        DynamicsConfig {
            alpha: self.alpha,
            tau: self.tau,
            snapshots: self.snapshots,
            seed,
        }
    }

    /// Parses `key=value` lines; `#` starts a comment. Unknown keys and
    /// malformed values are errors with the offending line.
    pub fn parse(text: &str, file: &str) -> Result<BenchConfig, WorkloadError> {
        let mut cfg = BenchConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(file, lineno, "expected `key=value`"))?;
            let (key, value) = (key.trim(), value.trim());
            macro_rules! set {
                ($field:ident, $kind:literal) => {
                    cfg.$field = value.parse().map_err(|_| {
                        parse_err(file, lineno, format!("{key} wants {}, got `{value}`", $kind))
                    })?
                };
            }
            match key {
                "z" => set!(z, "an integer"),
                "xi" => set!(xi, "an integer"),
                "k_default" => set!(k_default, "an integer"),
                "h" => set!(h, "an integer"),
                "b" => set!(b, "an integer"),
                "scheduler_seed" => set!(scheduler_seed, "an integer"),
                "targeted_routing" => set!(targeted_routing, "true/false"),
                "strict_isolation" => set!(strict_isolation, "true/false"),
                "parallel" => set!(parallel, "true/false"),
                "subgraph_workers" => set!(subgraph_workers, "an integer"),
                "query_workers" => set!(query_workers, "an integer"),
                "alpha" => set!(alpha, "a number"),
                "tau" => set!(tau, "a number"),
                "snapshots" => set!(snapshots, "an integer"),
                other => {
                    return Err(parse_err(file, lineno, format!("unknown key `{other}`")));
                }
            }
        }
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// Benchmark execution

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    KspDg,
    Yen,
    PyenOnly,
}

impl BenchMode {
    pub fn parse(s: &str) -> Option<BenchMode> {
        match s {
            "ksp-dg" => Some(BenchMode::KspDg),
            "yen" => Some(BenchMode::Yen),
            "pyen-only" => Some(BenchMode::PyenOnly),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BenchMode::KspDg => "ksp-dg",
            BenchMode::Yen => "yen",
            BenchMode::PyenOnly => "pyen-only",
        }
    }
}

#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub query_id: u64,
    pub paths: Vec<RankedPath>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRow {
    pub query_id: u64,
    pub iterations: u64,
    pub reuse_hits: u64,
    pub pruned_tasks: u64,
    pub subgraph_invocations: u64,
}

#[derive(Debug)]
pub struct BenchOutput {
    pub mode: BenchMode,
    pub results: Vec<QueryRecord>,
    pub counters: Vec<CounterRow>,
    /// The simulation's message log (header-only outside ksp-dg mode).
    pub log_csv: String,
    pub rejects: Vec<String>,
    pub elapsed_ms: u128,
}

impl BenchOutput {
    /// `query_id,rank,distance,v0 v1 … vn` lines, ranks 1-based.
    pub fn results_text(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            for (i, p) in r.paths.iter().enumerate() {
                let verts: Vec<String> = p.vertices.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.query_id,
                    i + 1,
                    fmt_milli(p.cost),
                    verts.join(" ")
                ));
            }
        }
        out
    }

    pub fn counters_csv(&self) -> String {
        let mut out =
            String::from("query_id,iterations,reuse_hits,pruned_tasks,subgraph_invocations\n");
        for c in &self.counters {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.query_id, c.iterations, c.reuse_hits, c.pruned_tasks, c.subgraph_invocations
            ));
        }
        out
    }

    /// One aggregate series point for external plotting; sweeps come from
    /// varying the config across runs.
    pub fn aggregate_csv(&self, cfg: &BenchConfig) -> String {
        let n = self.counters.len().max(1) as f64;
        let mean = |f: fn(&CounterRow) -> u64| {
            self.counters.iter().map(f).sum::<u64>() as f64 / n
        };
        format!(
            "mode,queries,z,xi,k_default,mean_iterations,mean_reuse_hits,mean_pruned_tasks,mean_subgraph_invocations,elapsed_ms\n{},{},{},{},{},{:.3},{:.3},{:.3},{:.3},{}\n",
            self.mode.name(),
            self.counters.len(),
            cfg.z,
            cfg.xi,
            cfg.k_default,
            mean(|c| c.iterations),
            mean(|c| c.reuse_hits),
            mean(|c| c.pruned_tasks),
            mean(|c| c.subgraph_invocations),
            self.elapsed_ms
        )
    }
}

/// Parses the per-query counter CSV emitted by [`BenchOutput::counters_csv`].
pub fn parse_counters_csv(text: &str, file: &str) -> Result<Vec<CounterRow>, WorkloadError> {
    const HEADER: &str = "query_id,iterations,reuse_hits,pruned_tasks,subgraph_invocations";
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line == HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(file, lineno, format!("expected `{HEADER}`")));
        }
        let num = |idx: usize, name: &str| -> Result<u64, WorkloadError> {
            fields[idx]
                .trim()
                .parse()
                .map_err(|_| parse_err(file, lineno, format!("bad {name} `{}`", fields[idx])))
        };
        rows.push(CounterRow {
            query_id: num(0, "query_id")?,
            iterations: num(1, "iterations")?,
            reuse_hits: num(2, "reuse_hits")?,
            pruned_tasks: num(3, "pruned_tasks")?,
            subgraph_invocations: num(4, "subgraph_invocations")?,
        });
    }
    Ok(rows)
}

/// Runs a trace in one of the three modes. `ksp-dg` replays it through the
/// cluster simulation; `yen` and `pyen-only` answer each query directly on
/// its pinned snapshot (full Yen, respectively progressive search on the
/// whole graph), as baselines. Counter rows in `ksp-dg` mode carry the
/// engine's own instrumentation verbatim; `pyen-only` reports its search
/// stats; `yen` has none.
pub fn run_bench(
    g: &Graph,
    cfg: &BenchConfig,
    trace: &[TraceEvent],
    mode: BenchMode,
) -> Result<BenchOutput, WorkloadError> {
    let start = Instant::now();
    let queries = ordered_queries(trace);
    let mut results = Vec::with_capacity(queries.len());
    let mut counters = Vec::with_capacity(queries.len());
    let mut log_csv = String::from("tick,sender,receiver,kind,digest\n");
    let mut rejects = Vec::new();
    match mode {
        BenchMode::KspDg => {
            let sim = run_simulation(g, cfg.sim_config(), trace)?;
            log_csv = sim.log_csv();
            rejects = sim.all_rejects();
            for (id, ..) in &queries {
                let r = &sim.results[id];
                results.push(QueryRecord {
                    query_id: *id,
                    paths: r.outcome.paths.clone(),
                });
                let c = r.outcome.counters;
                counters.push(CounterRow {
                    query_id: *id,
                    iterations: c.iterations,
                    reuse_hits: c.reuse_hits,
                    pruned_tasks: c.pruned_tasks,
                    subgraph_invocations: c.subgraph_invocations,
                });
            }
        }
        BenchMode::Yen | BenchMode::PyenOnly => {
            let parts = partition(g, cfg.z)?;
            let mut snapshots: BTreeMap<u64, Graph> = BTreeMap::new();
            for &(id, tick, s, t, k) in &queries {
                let epoch = epoch_at_tick(trace, tick);
                let snap = snapshots
                    .entry(epoch)
                    .or_insert_with(|| snapshot_at(g, &parts, trace, epoch));
                let (paths, row) = match mode {
                    BenchMode::Yen => (
                        yen_ksp(snap, s, t, k)?,
                        CounterRow {
                            query_id: id,
                            iterations: 0,
                            reuse_hits: 0,
                            pruned_tasks: 0,
                            subgraph_invocations: 0,
                        },
                    ),
                    BenchMode::PyenOnly => {
                        let (paths, stats) = pyen_ksp(snap, s, t, k, Default::default())?;
                        (
                            paths,
                            CounterRow {
                                query_id: id,
                                iterations: 0,
                                reuse_hits: stats.reuse_hits,
                                pruned_tasks: stats.pruned_tasks,
                                subgraph_invocations: 0,
                            },
                        )
                    }
                    BenchMode::KspDg => unreachable!(),
                };
                results.push(QueryRecord {
                    query_id: id,
                    paths,
                });
                counters.push(row);
            }
        }
    }
    Ok(BenchOutput {
        mode,
        results,
        counters,
        log_csv,
        rejects,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

// ---------------------------------------------------------------------------
// Validation

/// Validation self-test hook: `CorruptLbd` overwrites every replica's
/// skeleton bounds with a huge value after setup, which must make the oracle
/// check fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultInjection {
    None,
    CorruptLbd,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// On failure: a minimized trace (update batches pruned while the first
    /// failure persists) plus the failing query, as trace text.
    pub repro: Option<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {} — {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        if let Some(r) = &self.repro {
            out.push_str("minimized reproduction:\n");
            out.push_str(r);
        }
        out
    }
}

/// Runs the oracle-equivalence suite and per-module invariant checks over a
/// seeded dynamic workload: `n_queries` random connected queries with k up
/// to `k_max`, interleaved with an α/τ update stream, replayed through the
/// cluster simulation. On an oracle mismatch the report carries a minimized
/// reproduction trace.
pub fn validate(
    g: &Graph,
    cfg: &BenchConfig,
    seed: u64,
    n_queries: usize,
    k_max: usize,
    fault: FaultInjection,
) -> Result<ValidationReport, WorkloadError> {
    let mut checks = Vec::new();
    let mut repro = None;

    // Workload under test.
    let mut trace = generate_weight_stream(g, &cfg.dynamics(seed))?;
    let rows = if n_queries > 0 {
        generate_queries(g, n_queries, (1, k_max.max(1)), seed ^ 0x9e37_79b9)?
    } else {
        Vec::new()
    };
    interleave_queries(&mut trace, &rows);

    let run_with_fault = |trace: &[TraceEvent]| -> Result<Simulation, WorkloadError> {
        let mut sim = Simulation::new(g, cfg.sim_config())?;
        if fault == FaultInjection::CorruptLbd {
            sim.corrupt_replica_bounds(from_int(1000));
        }
        sim.run(trace);
        Ok(sim)
    };
    let sim = run_with_fault(&trace)?;

    // Partition invariants: full cover, one owner per edge, size cap.
    {
        let parts = &sim.parts;
        let mut covered = vec![false; g.vertex_count()];
        for sg in &parts.subgraphs {
            for &v in &sg.vertices {
                covered[v as usize] = true;
            }
        }
        let sizes_ok = parts.subgraphs.iter().all(|sg| sg.vertices.len() <= cfg.z);
        let edges_ok = (0..g.edge_count()).all(|e| {
            let sg = &parts.subgraphs[parts.edge_owner[e] as usize];
            sg.edges.contains(&(e as u32))
        });
        let all_covered = covered.iter().all(|&c| c);
        checks.push(Check {
            name: "partition-cover-and-ownership",
            passed: sizes_ok && edges_ok && all_covered,
            detail: format!(
                "{} subgraphs over {} vertices, z={}",
                parts.subgraphs.len(),
                g.vertex_count(),
                cfg.z
            ),
        });
    }

    // Bounds stay below true subgraph distances on the final snapshot.
    {
        let final_epoch = epoch_at_tick(&trace, u64::MAX);
        let snap = snapshot_at(g, &sim.parts, &trace, final_epoch);
        let mut violations = 0u64;
        let mut pairs = 0u64;
        for sg in &sim.parts.subgraphs {
            let b = SubgraphBounds::build(&snap, sg, cfg.xi);
            for (&(u, v), _) in &b.pairs {
                pairs += 1;
                let lb = b.lower_bound(u, v).value;
                if lb > crate::bounds::subgraph_distance(&snap, sg, u, v) {
                    violations += 1;
                }
            }
        }
        checks.push(Check {
            name: "bounds-below-true-distance",
            passed: violations == 0,
            detail: format!("{pairs} boundary pairs, {violations} violations"),
        });
    }

    // Compaction round trip on the initial bounds.
    {
        let mut bad = 0u64;
        for sg in &sim.parts.subgraphs {
            let b = SubgraphBounds::build(g, sg, cfg.xi);
            let idx = compact_subgraph_bounds(&b, cfg.h, cfg.b)?;
            for &e in &sg.edges {
                let mut got: Vec<_> = idx.paths_containing(e).into_iter().collect();
                got.sort();
                let mut want: Vec<_> = b
                    .pairs
                    .iter()
                    .flat_map(|(&pair, pb)| {
                        pb.paths
                            .iter()
                            .filter(|sp| sp.edges.contains(&e))
                            .map(move |sp| (pair, sp.id))
                    })
                    .collect();
                want.sort();
                if got != want {
                    bad += 1;
                }
            }
        }
        checks.push(Check {
            name: "compaction-round-trip",
            passed: bad == 0,
            detail: format!("{bad} edges with mismatched path sets"),
        });
    }

    // Replica convergence after the drained run.
    {
        let final_epoch = epoch_at_tick(&trace, u64::MAX);
        let snap = snapshot_at(g, &sim.parts, &trace, final_epoch);
        let rebuilt: Vec<SubgraphBounds> = sim
            .parts
            .subgraphs
            .iter()
            .map(|sg| SubgraphBounds::build(&snap, sg, cfg.xi))
            .collect();
        let want = build_skeleton(&MbdTable::from_bounds(&rebuilt));
        let diverged = sim.replicas().iter().filter(|r| ***r != want).count();
        checks.push(Check {
            name: "replica-convergence",
            // The corrupted-lbd fault leaves replicas inconsistent by
            // design; the check stays honest either way.
            passed: diverged == 0,
            detail: format!("{diverged} replicas differ from a rebuild"),
        });
    }

    // Reference distances stay below true shortest distances (pinned).
    {
        let mut violations = Vec::new();
        for (id, r) in &sim.results {
            let (_, tick, s, t, _) = ordered_queries(&trace)[*id as usize];
            debug_assert_eq!(epoch_at_tick(&trace, tick), r.epoch);
            if s == t {
                continue;
            }
            let snap = snapshot_at(g, &sim.parts, &trace, r.epoch);
            let parts = partition(&snap, cfg.z)?;
            let mut bounds: Vec<SubgraphBounds> = parts
                .subgraphs
                .iter()
                .map(|sg| SubgraphBounds::build(&snap, sg, cfg.xi))
                .collect();
            let mut sk = build_skeleton(&MbdTable::from_bounds(&bounds));
            let atts = attach_endpoints(&snap, &parts, &mut sk, &mut bounds, s, t);
            let mut session = KspDgSession::new(s, t, 1);
            let ref1 = session.next_reference(&sk);
            release_attachments(atts, &mut sk, &mut bounds);
            let true1 = yen_ksp(&snap, s, t, 1)?;
            match (ref1, true1.first()) {
                (Some(r1), Some(p1)) if r1.cost > p1.cost => {
                    violations.push(format!("query {id}: ref {} > true {}", r1.cost, p1.cost));
                }
                (None, Some(_)) => {
                    violations.push(format!("query {id}: no reference despite a path"));
                }
                _ => {}
            }
        }
        checks.push(Check {
            name: "reference-lower-bound",
            passed: violations.is_empty(),
            detail: if violations.is_empty() {
                format!("{} queries checked", sim.results.len())
            } else {
                violations.join("; ")
            },
        });
    }

    // The oracle check: every simulated answer equals Yen's distance
    // multiset on the query's pinned snapshot.
    {
        let mut first_failure = None;
        for (id, r) in &sim.results {
            let (_, tick, s, t, k) = ordered_queries(&trace)[*id as usize];
            let _ = tick;
            let snap = snapshot_at(g, &sim.parts, &trace, r.epoch);
            let want = yen_ksp(&snap, s, t, k)?;
            let got: Vec<Milli> = r.outcome.paths.iter().map(|p| p.cost).collect();
            let want: Vec<Milli> = want.iter().map(|p| p.cost).collect();
            if got != want {
                first_failure = Some((*id, s, t, k));
                break;
            }
        }
        if let Some((id, s, t, k)) = first_failure {
            let epoch = sim.results[&id].epoch;
            repro = Some(minimize_repro(
                g,
                &trace,
                epoch,
                (s, t, k),
                &run_with_fault,
            )?);
            checks.push(Check {
                name: "pinned-snapshot-oracle",
                passed: false,
                detail: format!("query {id} ({s}->{t}, k={k}) disagrees with Yen"),
            });
        } else {
            checks.push(Check {
                name: "pinned-snapshot-oracle",
                passed: true,
                detail: format!("{} queries match", sim.results.len()),
            });
        }
    }

    Ok(ValidationReport { checks, repro })
}

/// Greedily drops whole update batches while the single failing query still
/// disagrees with the oracle, then renders the survivors plus the query as
/// trace text.
fn minimize_repro(
    g: &Graph,
    trace: &[TraceEvent],
    epoch: u64,
    query: (VertexId, VertexId, usize),
    run: &dyn Fn(&[TraceEvent]) -> Result<Simulation, WorkloadError>,
) -> Result<String, WorkloadError> {
    let (s, t, k) = query;
    let mut update_ticks: Vec<u64> = trace
        .iter()
        .filter(|ev| matches!(ev, TraceEvent::Update { .. }))
        .map(|ev| ev.tick())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .take(epoch as usize)
        .collect();
    let fails = |ticks: &[u64]| -> Result<bool, WorkloadError> {
        let mut t2: Vec<TraceEvent> = trace
            .iter()
            .filter(|ev| matches!(ev, TraceEvent::Update { .. }) && ticks.contains(&ev.tick()))
            .cloned()
            .collect();
        let query_tick = ticks.last().copied().unwrap_or(0) + 1;
        t2.push(TraceEvent::Query {
            tick: query_tick,
            s,
            t,
            k,
        });
        let sim = run(&t2)?;
        let r = &sim.results[&0];
        let snap = snapshot_at(g, &sim.parts, &t2, r.epoch);
        let want = yen_ksp(&snap, s, t, k)?;
        let got: Vec<Milli> = r.outcome.paths.iter().map(|p| p.cost).collect();
        let want: Vec<Milli> = want.iter().map(|p| p.cost).collect();
        Ok(got != want)
    };
    if !fails(&update_ticks)? {
        // The failure needs the full interleaving; report it unminimized.
        let mut full: Vec<TraceEvent> = trace.to_vec();
        full.push(TraceEvent::Query {
            tick: trace.iter().map(|e| e.tick()).max().unwrap_or(0) + 1,
            s,
            t,
            k,
        });
        return Ok(emit_trace(&full));
    }
    let mut i = 0;
    while i < update_ticks.len() {
        let mut candidate = update_ticks.clone();
        candidate.remove(i);
        if fails(&candidate)? {
            update_ticks = candidate;
        } else {
            i += 1;
        }
    }
    let mut minimized: Vec<TraceEvent> = trace
        .iter()
        .filter(|ev| {
            matches!(ev, TraceEvent::Update { .. }) && update_ticks.contains(&ev.tick())
        })
        .cloned()
        .collect();
    minimized.push(TraceEvent::Query {
        tick: update_ticks.last().copied().unwrap_or(0) + 1,
        s,
        t,
        k,
    });
    Ok(emit_trace(&minimized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::MILLI_ONE;
    use crate::ksp::path_cost;

    #[test]
    fn stream_counts_positivity_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x61);
        let g = Graph::random_connected(60, 60, 9, &mut rng);
        let m = g.edge_count();
        let cfg = DynamicsConfig {
            alpha: 0.5,
            tau: 0.5,
            snapshots: 8,
            seed: 42,
        };
        let events = generate_weight_stream(&g, &cfg).unwrap();
        assert_eq!(events.len(), (m / 2) * 8);
        for tick in 1..=8u64 {
            let per_batch: Vec<_> = events.iter().filter(|e| e.tick() == tick).collect();
            assert_eq!(per_batch.len(), m / 2);
            // Distinct edges within one batch.
            let distinct: BTreeSet<(VertexId, VertexId)> = per_batch
                .iter()
                .map(|e| match e {
                    TraceEvent::Update { u, v, .. } => (*u, *v),
                    _ => unreachable!(),
                })
                .collect();
            assert_eq!(distinct.len(), m / 2);
        }
        // Cumulative positivity.
        let mut w: Vec<Milli> = g.edges().iter().map(|e| e.current).collect();
        for ev in &events {
            if let TraceEvent::Update { u, v, delta, .. } = *ev {
                let e = g.edge_between(u, v).unwrap() as usize;
                w[e] += delta;
                assert!(w[e] > 0, "weight drove nonpositive");
            }
        }
        // Identical seed: byte-identical trace.
        let again = generate_weight_stream(&g, &cfg).unwrap();
        assert_eq!(emit_trace(&events), emit_trace(&again));
        // Different seed: different trace (overwhelmingly).
        let other = generate_weight_stream(
            &g,
            &DynamicsConfig {
                seed: 43,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(emit_trace(&events), emit_trace(&other));
    }

    #[test]
    fn stream_degenerate_settings() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x62);
        let g = Graph::random_connected(20, 10, 5, &mut rng);
        let none = generate_weight_stream(
            &g,
            &DynamicsConfig {
                alpha: 0.0,
                tau: 0.5,
                snapshots: 5,
                seed: 1,
            },
        )
        .unwrap();
        assert!(none.is_empty());
        let still = generate_weight_stream(
            &g,
            &DynamicsConfig {
                alpha: 1.0,
                tau: 0.0,
                snapshots: 3,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(still.len(), 3 * g.edge_count());
        assert!(still.iter().all(|e| matches!(e, TraceEvent::Update { delta: 0, .. })));
        assert!(generate_weight_stream(
            &g,
            &DynamicsConfig {
                alpha: 1.5,
                tau: 0.0,
                snapshots: 1,
                seed: 1
            }
        )
        .is_err());
        assert!(generate_weight_stream(
            &g,
            &DynamicsConfig {
                alpha: 0.5,
                tau: 1.0,
                snapshots: 1,
                seed: 1
            }
        )
        .is_err());
    }

    #[test]
    fn trace_text_round_trips() {
        let events = vec![
            TraceEvent::Update {
                tick: 1,
                u: 3,
                v: 17,
                delta: 250,
            },
            TraceEvent::Update {
                tick: 1,
                u: 0,
                v: 2,
                delta: -1500,
            },
            TraceEvent::Query {
                tick: 1,
                s: 5,
                t: 9,
                k: 4,
            },
            TraceEvent::Query {
                tick: 3,
                s: 9,
                t: 5,
                k: 1,
            },
        ];
        let text = emit_trace(&events);
        assert_eq!(
            text,
            "t=1 update 3-17 0.25\nt=1 update 0-2 -1.5\nt=1 query 5 9 4\nt=3 query 9 5 1\n"
        );
        let parsed = parse_trace(&text, "trace").unwrap();
        assert_eq!(parsed, events);
    }

    #[test]
    fn trace_parse_errors_carry_lines() {
        let bad = "t=1 update 3-17 0.25\nt=2 explode\n";
        let err = parse_trace(bad, "stream.txt").unwrap_err();
        assert_eq!(err.to_string(), "stream.txt:2: unknown event `explode`");
        let bad2 = "tick one\n";
        assert!(parse_trace(bad2, "f").unwrap_err().to_string().contains("f:1"));
        let bad3 = "t=1 update 3x17 1\n";
        assert!(parse_trace(bad3, "f")
            .unwrap_err()
            .to_string()
            .contains("bad edge"));
        let bad4 = "t=1 query 1 2 3 4\n";
        assert!(parse_trace(bad4, "f")
            .unwrap_err()
            .to_string()
            .contains("trailing"));
    }

    #[test]
    fn queries_are_connected_deterministic_and_csv_round_trip() {
        // Two components: 0..14 connected, 15..19 connected.
        let mut rng = ChaCha8Rng::seed_from_u64(0x63);
        let left = Graph::random_connected(15, 8, 5, &mut rng);
        let mut edges: Vec<(VertexId, VertexId, u32)> = left
            .edges()
            .iter()
            .map(|e| (e.u, e.v, (e.current / MILLI_ONE) as u32))
            .collect();
        edges.extend([(15, 16, 1), (16, 17, 1), (17, 18, 1), (18, 19, 2), (15, 19, 3)]);
        let g = Graph::from_edges(20, &edges).unwrap();
        let comp = components(&g);
        let rows = generate_queries(&g, 40, (1, 5), 7).unwrap();
        for r in &rows {
            assert_ne!(r.s, r.t);
            assert_eq!(comp[r.s as usize], comp[r.t as usize]);
            assert!((1..=5).contains(&r.k));
        }
        assert_eq!(rows, generate_queries(&g, 40, (1, 5), 7).unwrap());
        let csv = emit_queries_csv(&rows);
        assert_eq!(parse_queries_csv(&csv, "q.csv").unwrap(), rows);
        let err = parse_queries_csv("query_id,s,t,k\n0,1,2\n", "q.csv").unwrap_err();
        assert!(err.to_string().starts_with("q.csv:2"));
    }

    #[test]
    fn bench_modes_agree_on_distance_multisets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x64);
        let g = Graph::random_connected(40, 30, 9, &mut rng);
        let cfg = BenchConfig {
            z: 8,
            xi: 3,
            snapshots: 4,
            alpha: 0.3,
            tau: 0.4,
            ..BenchConfig::default()
        };
        let mut trace = generate_weight_stream(&g, &cfg.dynamics(5)).unwrap();
        let rows = generate_queries(&g, 12, (1, 5), 6).unwrap();
        interleave_queries(&mut trace, &rows);
        let dg = run_bench(&g, &cfg, &trace, BenchMode::KspDg).unwrap();
        let yen = run_bench(&g, &cfg, &trace, BenchMode::Yen).unwrap();
        let py = run_bench(&g, &cfg, &trace, BenchMode::PyenOnly).unwrap();
        assert_eq!(dg.results.len(), rows.len());
        for ((a, b), c) in dg.results.iter().zip(&yen.results).zip(&py.results) {
            assert_eq!(a.query_id, b.query_id);
            let da: Vec<Milli> = a.paths.iter().map(|p| p.cost).collect();
            let db: Vec<Milli> = b.paths.iter().map(|p| p.cost).collect();
            let dc: Vec<Milli> = c.paths.iter().map(|p| p.cost).collect();
            assert_eq!(da, db, "query {}", a.query_id);
            assert_eq!(da, dc, "query {}", a.query_id);
        }
        // Result lines are well-formed and ranks count from 1.
        let text = dg.results_text();
        for line in text.lines() {
            let mut f = line.splitn(4, ',');
            let _id: u64 = f.next().unwrap().parse().unwrap();
            let rank: usize = f.next().unwrap().parse().unwrap();
            assert!(rank >= 1);
            assert!(parse_milli(f.next().unwrap()).is_some());
            assert!(!f.next().unwrap().is_empty());
        }
    }

    #[test]
    fn k1_answers_are_plain_shortest_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x65);
        let g = Graph::random_connected(30, 20, 9, &mut rng);
        let cfg = BenchConfig {
            z: 8,
            xi: 3,
            snapshots: 2,
            ..BenchConfig::default()
        };
        let mut trace = generate_weight_stream(&g, &cfg.dynamics(9)).unwrap();
        let rows = generate_queries(&g, 8, (1, 1), 10).unwrap();
        interleave_queries(&mut trace, &rows);
        let dg = run_bench(&g, &cfg, &trace, BenchMode::KspDg).unwrap();
        for (record, (_, tick, s, t, _)) in dg.results.iter().zip(ordered_queries(&trace)) {
            let parts = partition(&g, cfg.z).unwrap();
            let snap = snapshot_at(&g, &parts, &trace, epoch_at_tick(&trace, tick));
            let want = yen_ksp(&snap, s, t, 1).unwrap();
            assert_eq!(record.paths.len(), 1);
            assert_eq!(record.paths[0].cost, want[0].cost);
            assert_eq!(path_cost(&snap, &record.paths[0].vertices), Some(want[0].cost));
        }
    }

    #[test]
    fn counters_carry_engine_instrumentation_verbatim() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x66);
        let g = Graph::random_connected(30, 18, 5, &mut rng);
        let cfg = BenchConfig {
            z: 8,
            xi: 3,
            snapshots: 3,
            ..BenchConfig::default()
        };
        let mut trace = generate_weight_stream(&g, &cfg.dynamics(2)).unwrap();
        let rows = generate_queries(&g, 6, (2, 4), 3).unwrap();
        interleave_queries(&mut trace, &rows);
        let out = run_bench(&g, &cfg, &trace, BenchMode::KspDg).unwrap();
        let sim = run_simulation(&g, cfg.sim_config(), &trace).unwrap();
        for row in &out.counters {
            let c = sim.results[&row.query_id].outcome.counters;
            assert_eq!(row.iterations, c.iterations);
            assert_eq!(row.reuse_hits, c.reuse_hits);
            assert_eq!(row.pruned_tasks, c.pruned_tasks);
            assert_eq!(row.subgraph_invocations, c.subgraph_invocations);
        }
        let csv = out.counters_csv();
        assert!(csv.starts_with("query_id,iterations,reuse_hits,pruned_tasks,subgraph_invocations\n"));
        assert_eq!(csv.lines().count(), 1 + out.counters.len());
    }

    #[test]
    fn config_parses_defaults_overrides_and_errors() {
        let cfg = BenchConfig::parse("", "c").unwrap();
        assert_eq!(cfg.xi, 10);
        assert_eq!(cfg.h, 20);
        let cfg = BenchConfig::parse(
            "# tuned\nz=16\nxi = 5\ntargeted_routing=true\nalpha=0.25 # half of half\n",
            "c",
        )
        .unwrap();
        assert_eq!(cfg.z, 16);
        assert_eq!(cfg.xi, 5);
        assert!(cfg.targeted_routing);
        assert_eq!(cfg.alpha, 0.25);
        let err = BenchConfig::parse("z=16\nwat=1\n", "conf.txt").unwrap_err();
        assert_eq!(err.to_string(), "conf.txt:2: unknown key `wat`");
        let err = BenchConfig::parse("xi=ten\n", "conf.txt").unwrap_err();
        assert!(err.to_string().contains("conf.txt:1"));
    }

    #[test]
    fn counter_csv_round_trips() {
        let rows = vec![
            CounterRow {
                query_id: 0,
                iterations: 3,
                reuse_hits: 14,
                pruned_tasks: 2,
                subgraph_invocations: 9,
            },
            CounterRow {
                query_id: 7,
                iterations: 1,
                reuse_hits: 0,
                pruned_tasks: 0,
                subgraph_invocations: 4,
            },
        ];
        let out = BenchOutput {
            mode: BenchMode::KspDg,
            results: Vec::new(),
            counters: rows.clone(),
            log_csv: String::new(),
            rejects: Vec::new(),
            elapsed_ms: 0,
        };
        let text = out.counters_csv();
        assert_eq!(parse_counters_csv(&text, "c.csv").unwrap(), rows);
        let err = parse_counters_csv("1,2,3\n", "c.csv").unwrap_err();
        assert!(err.to_string().starts_with("c.csv:1"));
        let err = parse_counters_csv("1,2,x,4,5\n", "c.csv").unwrap_err();
        assert!(err.to_string().contains("bad reuse_hits"));
    }

    #[test]
    fn validation_passes_clean_and_names_corrupted_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x67);
        let g = Graph::random_connected(36, 24, 9, &mut rng);
        let cfg = BenchConfig {
            z: 8,
            xi: 3,
            snapshots: 4,
            alpha: 0.3,
            tau: 0.4,
            ..BenchConfig::default()
        };
        let clean = validate(&g, &cfg, 11, 10, 4, FaultInjection::None).unwrap();
        assert!(clean.passed(), "{}", clean.to_text());
        assert!(clean.repro.is_none());
        assert!(clean.to_text().contains("PASS pinned-snapshot-oracle"));

        let hurt = validate(&g, &cfg, 11, 10, 4, FaultInjection::CorruptLbd).unwrap();
        assert!(!hurt.passed());
        let text = hurt.to_text();
        assert!(
            text.contains("FAIL pinned-snapshot-oracle"),
            "fault did not surface in: {text}"
        );
        // The minimized reproduction is a valid trace ending in the query.
        let repro = hurt.repro.as_deref().expect("repro trace");
        let events = parse_trace(repro, "repro").unwrap();
        assert!(matches!(events.last(), Some(TraceEvent::Query { .. })));
    }

    #[test]
    fn validation_with_no_queries_trivially_passes_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x68);
        let g = Graph::random_connected(20, 10, 5, &mut rng);
        let cfg = BenchConfig {
            z: 6,
            xi: 2,
            snapshots: 2,
            ..BenchConfig::default()
        };
        let report = validate(&g, &cfg, 3, 0, 4, FaultInjection::None).unwrap();
        assert!(report.passed(), "{}", report.to_text());
    }

    #[test]
    fn interleaving_spreads_queries_and_keeps_id_order() {
        let mut trace = vec![
            TraceEvent::Update {
                tick: 1,
                u: 0,
                v: 1,
                delta: 0,
            },
            TraceEvent::Update {
                tick: 6,
                u: 0,
                v: 1,
                delta: 0,
            },
        ];
        let rows: Vec<QueryRow> = (0..4)
            .map(|id| QueryRow {
                id,
                s: id as VertexId,
                t: id as VertexId + 1,
                k: 1,
            })
            .collect();
        interleave_queries(&mut trace, &rows);
        let ordered = ordered_queries(&trace);
        assert_eq!(ordered.len(), 4);
        for (i, &(id, tick, s, _, _)) in ordered.iter().enumerate() {
            assert_eq!(id, i as u64);
            assert_eq!(s, rows[i].s);
            assert!((1..=6).contains(&tick));
        }
        assert_eq!(epoch_at_tick(&trace, 0), 0);
        assert_eq!(epoch_at_tick(&trace, 1), 1);
        assert_eq!(epoch_at_tick(&trace, 5), 1);
        assert_eq!(epoch_at_tick(&trace, 6), 2);
    }
}
