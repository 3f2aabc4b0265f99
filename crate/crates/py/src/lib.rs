//! Python bindings for the k-shortest-path engine: graph loading and
//! generation, the Yen baseline, the filter-and-refine `ksp_dg` query,
//! workload generation, trace replay through the cluster simulation, and the
//! validation suite. Distances cross the boundary as integer milli-units so
//! comparisons stay exact; `fmt_milli`/`parse_milli` convert to the decimal
//! text the CLI emits.

use std::fs::File;
use std::io::BufReader;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kspdg::bounds::{MbdTable, SubgraphBounds};
use kspdg::graph::{emit_dimacs, parse_dimacs, Graph as CoreGraph};
use kspdg::partition::partition;
use kspdg::skeleton::build_skeleton;
use kspdg::workload::{
    emit_queries_csv, emit_trace, generate_queries, generate_weight_stream, interleave_queries,
    parse_queries_csv, parse_trace, run_bench, BenchConfig, BenchMode, DynamicsConfig,
    FaultInjection,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An undirected graph with positive fixed-point edge weights.
#[pyclass(name = "Graph", module = "kspdg_py")]
#[derive(Clone)]
pub struct PyGraph {
    inner: CoreGraph,
}

#[pymethods]
impl PyGraph {
    /// Loads a 9th-DIMACS-challenge `.gr` file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let inner =
            parse_dimacs(BufReader::new(f)).map_err(|e| value_err(format!("{path}: {e}")))?;
        Ok(PyGraph { inner })
    }

    /// Builds a graph over vertices `0..n` from `(u, v, weight)` triples
    /// with positive integer weights.
    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(u32, u32, u32)>) -> PyResult<Self> {
        let inner = CoreGraph::from_edges(n, &edges).map_err(value_err)?;
        Ok(PyGraph { inner })
    }

    /// Seeded random connected graph: a spanning tree plus `extra_edges`
    /// distinct extras, weights uniform in `1..=max_weight`.
    #[staticmethod]
    fn random_connected(n: usize, extra_edges: usize, max_weight: u32, seed: u64) -> PyResult<Self> {
        if n == 0 {
            return Err(PyValueError::new_err("need at least one vertex"));
        }
        if max_weight == 0 {
            return Err(PyValueError::new_err("max_weight must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyGraph {
            inner: CoreGraph::random_connected(n, extra_edges, max_weight, &mut rng),
        })
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// Adds `delta_milli` to the weight of edge `(u, v)`; the result must
    /// stay positive.
    fn apply_update(&mut self, u: u32, v: u32, delta_milli: i64) -> PyResult<()> {
        let e = self
            .inner
            .edge_between(u, v)
            .ok_or_else(|| PyValueError::new_err(format!("no edge {u}-{v}")))?;
        self.inner.apply_deltas(&[(e, delta_milli)]).map_err(value_err)
    }

    /// The graph in `.gr` text form (weights must be whole units).
    fn emit_gr(&self) -> PyResult<String> {
        let mut out = Vec::new();
        emit_dimacs(&self.inner, &mut out).map_err(value_err)?;
        Ok(String::from_utf8(out).expect("ascii output"))
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(vertices={}, edges={})",
            self.inner.vertex_count(),
            self.inner.edge_count()
        )
    }
}

/// Outcome of one `ksp_dg` query. `paths` is a list of
/// `(cost_milli, [v0, v1, ...])` pairs ranked by cost.
#[pyclass(module = "kspdg_py")]
pub struct QueryAnswer {
    #[pyo3(get)]
    pub paths: Vec<(i64, Vec<u32>)>,
    /// Stopped via the reference-distance bound rather than exhausting the
    /// reference-path enumeration.
    #[pyo3(get)]
    pub certified: bool,
    #[pyo3(get)]
    pub unreachable: bool,
    #[pyo3(get)]
    pub iterations: u64,
    #[pyo3(get)]
    pub reuse_hits: u64,
    #[pyo3(get)]
    pub pruned_tasks: u64,
    #[pyo3(get)]
    pub subgraph_invocations: u64,
}

#[pymethods]
impl QueryAnswer {
    fn __repr__(&self) -> String {
        format!(
            "QueryAnswer(paths={}, certified={}, unreachable={}, iterations={})",
            self.paths.len(),
            self.certified,
            self.unreachable,
            self.iterations
        )
    }
}

/// Outputs of one benchmark replay: the CLI's file contents as strings.
#[pyclass(module = "kspdg_py")]
pub struct BenchRun {
    #[pyo3(get)]
    pub mode: String,
    /// `query_id,rank,distance,v0 v1 ... vn` records.
    #[pyo3(get)]
    pub results: String,
    /// Per-query instrumentation CSV.
    #[pyo3(get)]
    pub counters: String,
    /// Simulation message log CSV (header-only outside ksp-dg mode).
    #[pyo3(get)]
    pub messages: String,
    /// Update batches rejected for touching unknown edges or driving a
    /// weight non-positive.
    #[pyo3(get)]
    pub rejects: Vec<String>,
}

#[pymethods]
impl BenchRun {
    fn __repr__(&self) -> String {
        format!(
            "BenchRun(mode={:?}, result_records={}, rejects={})",
            self.mode,
            self.results.lines().count(),
            self.rejects.len()
        )
    }
}

/// Yen's k shortest loopless paths as `(cost_milli, [vertices])` pairs —
/// the brute-force oracle the engine is validated against.
#[pyfunction]
fn yen(graph: &PyGraph, s: u32, t: u32, k: usize) -> PyResult<Vec<(i64, Vec<u32>)>> {
    let paths = kspdg::ksp::yen_ksp(&graph.inner, s, t, k).map_err(value_err)?;
    Ok(paths.into_iter().map(|p| (p.cost, p.vertices)).collect())
}

/// Filter-and-refine k shortest paths: partitions the graph (≤ `z` vertices
/// per subgraph), builds the two-level lower-bound index with `xi` bounding
/// paths per boundary pair, and answers through reference-path refinement.
#[pyfunction]
#[pyo3(signature = (graph, s, t, k, z=32, xi=10))]
fn ksp_dg(graph: &PyGraph, s: u32, t: u32, k: usize, z: usize, xi: usize) -> PyResult<QueryAnswer> {
    let g = &graph.inner;
    let parts = partition(g, z).map_err(value_err)?;
    let mut bounds: Vec<SubgraphBounds> = parts
        .subgraphs
        .iter()
        .map(|sg| SubgraphBounds::build(g, sg, xi))
        .collect();
    let mut sk = build_skeleton(&MbdTable::from_bounds(&bounds));
    let out = kspdg::candidate::ksp_dg(g, &parts, &mut sk, &mut bounds, s, t, k, Default::default())
        .map_err(value_err)?;
    Ok(QueryAnswer {
        paths: out.paths.into_iter().map(|p| (p.cost, p.vertices)).collect(),
        certified: out.certified,
        unreachable: out.unreachable,
        iterations: out.counters.iterations,
        reuse_hits: out.counters.reuse_hits,
        pruned_tasks: out.counters.pruned_tasks,
        subgraph_invocations: out.counters.subgraph_invocations,
    })
}

/// Seeded dynamic-weight event trace in the `t=<tick> update <u>-<v> <Δw>`
/// line format: `snapshots` batches, each changing a fraction `alpha` of the
/// edges by a multiplicative factor within ±`tau`.
#[pyfunction]
#[pyo3(signature = (graph, alpha=0.5, tau=0.5, snapshots=20, seed=0))]
fn gen_stream(graph: &PyGraph, alpha: f64, tau: f64, snapshots: usize, seed: u64) -> PyResult<String> {
    let cfg = DynamicsConfig {
        alpha,
        tau,
        snapshots,
        seed,
    };
    let events = generate_weight_stream(&graph.inner, &cfg).map_err(value_err)?;
    Ok(emit_trace(&events))
}

/// Seeded random connected queries as `query_id,s,t,k` CSV.
#[pyfunction]
#[pyo3(signature = (graph, count=50, k_min=1, k_max=10, seed=0))]
fn gen_queries(graph: &PyGraph, count: usize, k_min: usize, k_max: usize, seed: u64) -> PyResult<String> {
    let rows = generate_queries(&graph.inner, count, (k_min, k_max), seed).map_err(value_err)?;
    Ok(emit_queries_csv(&rows))
}

/// Replays a workload. `trace` uses the event-trace line format and may
/// contain query events; `queries` CSV rows, if given, are spread evenly
/// over its tick range. `config` takes the same `key=value` text as the CLI
/// config file. Modes: `ksp-dg` (cluster simulation), `yen` (oracle
/// baseline), `pyen-only`.
#[pyfunction]
#[pyo3(signature = (graph, trace="", queries="", config="", mode="ksp-dg"))]
fn run_trace(graph: &PyGraph, trace: &str, queries: &str, config: &str, mode: &str) -> PyResult<BenchRun> {
    let cfg = BenchConfig::parse(config, "<config>").map_err(value_err)?;
    let mode = BenchMode::parse(mode)
        .ok_or_else(|| PyValueError::new_err(format!("unknown mode `{mode}` (ksp-dg, yen, pyen-only)")))?;
    let mut events = parse_trace(trace, "<trace>").map_err(value_err)?;
    if !queries.is_empty() {
        let rows = parse_queries_csv(queries, "<queries>").map_err(value_err)?;
        interleave_queries(&mut events, &rows);
    }
    let out = run_bench(&graph.inner, &cfg, &events, mode).map_err(value_err)?;
    Ok(BenchRun {
        mode: out.mode.name().to_string(),
        results: out.results_text(),
        counters: out.counters_csv(),
        messages: out.log_csv,
        rejects: out.rejects,
    })
}

/// Runs the oracle-equivalence and invariant suite over a seeded dynamic
/// workload; returns `(passed, report_text)`. `inject_fault=True` corrupts
/// replica bounds after setup, which the suite must catch.
#[pyfunction]
#[pyo3(signature = (graph, config="", seed=0, queries=20, k_max=5, inject_fault=false))]
fn validate(
    graph: &PyGraph,
    config: &str,
    seed: u64,
    queries: usize,
    k_max: usize,
    inject_fault: bool,
) -> PyResult<(bool, String)> {
    let cfg = BenchConfig::parse(config, "<config>").map_err(value_err)?;
    let fault = if inject_fault {
        FaultInjection::CorruptLbd
    } else {
        FaultInjection::None
    };
    let report =
        kspdg::workload::validate(&graph.inner, &cfg, seed, queries, k_max, fault).map_err(value_err)?;
    Ok((report.passed(), report.to_text()))
}

/// Worst-case element count of one subgraph's pair-bounds index:
/// `n_b·(n_b−1)/2 · xi · n_e` for `n_b` boundary vertices, `xi` bounding
/// paths per pair, and `n_e` edges.
#[pyfunction]
fn estimate_epindex_elements(n_b: u64, xi: u64, n_e: u64) -> u64 {
    kspdg::bounds::estimate_epindex_elements(n_b, xi, n_e)
}

/// Renders integer milli-units as the decimal text the CLI emits
/// (`1500` → `"1.5"`).
#[pyfunction]
fn fmt_milli(m: i64) -> String {
    kspdg::fixed::fmt_milli(m)
}

/// Parses decimal text (up to three fraction digits) to milli-units.
#[pyfunction]
fn parse_milli(s: &str) -> PyResult<i64> {
    kspdg::fixed::parse_milli(s)
        .ok_or_else(|| PyValueError::new_err(format!("not a milli-grid value: `{s}`")))
}

#[pymodule]
pub fn kspdg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<QueryAnswer>()?;
    m.add_class::<BenchRun>()?;
    m.add_function(wrap_pyfunction!(yen, m)?)?;
    m.add_function(wrap_pyfunction!(ksp_dg, m)?)?;
    m.add_function(wrap_pyfunction!(gen_stream, m)?)?;
    m.add_function(wrap_pyfunction!(gen_queries, m)?)?;
    m.add_function(wrap_pyfunction!(run_trace, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_epindex_elements, m)?)?;
    m.add_function(wrap_pyfunction!(fmt_milli, m)?)?;
    m.add_function(wrap_pyfunction!(parse_milli, m)?)?;
    Ok(())
}
