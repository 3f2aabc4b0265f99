//! Undirected weighted graphs and 9th-DIMACS-challenge `.gr` I/O.
//!
//! Input files use 1-based vertex ids and directed arc lines; the loader
//! collapses each arc pair to one undirected edge (keeping the minimum arc
//! weight) and renumbers vertices to dense 0-based ids. Every edge carries
//! two weights: `initial`, the integer weight at load time, frozen for the
//! graph's lifetime, and `current`, the live fixed-point weight that updates
//! mutate. Lower-bound machinery keys off `initial`; distances use `current`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::fixed::{self, Milli};

pub type VertexId = u32;
pub type EdgeId = u32;

/// One undirected edge. Endpoints are stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    /// Live weight in milli-units; always positive.
    pub current: Milli,
    /// Integer weight at load time; positive, never changes.
    pub initial: u32,
}

impl Edge {
    /// The endpoint opposite `w`.
    pub fn other(&self, w: VertexId) -> VertexId {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected graph with dense vertex ids `0..vertex_count()`.
///
/// Invariants: no self-loops, at most one edge per vertex pair, all weights
/// positive. Adjacency lists are sorted by neighbor id, which downstream
/// searches rely on for deterministic iteration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<(VertexId, EdgeId)>>,
    edges: Vec<Edge>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: duplicate problem line")]
    DuplicateHeader { line: usize },
    #[error("line {line}: arc line before problem line")]
    ArcBeforeHeader { line: usize },
    #[error("line {line}: malformed arc line: {reason}")]
    MalformedArc { line: usize, reason: String },
    #[error("line {line}: vertex id {id} out of range 1..={max}")]
    VertexOutOfRange { line: usize, id: i64, max: usize },
    #[error("line {line}: non-positive weight {w}")]
    NonPositiveWeight { line: usize, w: i64 },
    #[error("line {line}: self-loop on vertex {id}")]
    SelfLoop { line: usize, id: i64 },
    #[error("line {line}: unknown line type {tag:?}")]
    UnknownLineType { line: usize, tag: String },
    #[error("missing problem line")]
    MissingHeader,
    #[error("edge ({u}, {v}): {reason}")]
    BadEdge { u: VertexId, v: VertexId, reason: String },
    #[error("graph has a non-integer weight on edge ({u}, {v}); cannot emit integer format")]
    NonIntegerWeight { u: VertexId, v: VertexId },
    #[error("io error: {0}")]
    Io(String),
}

impl Graph {
    /// Builds a graph from whole-unit integer edge weights.
    pub fn from_edges(
        n: usize,
        edges: &[(VertexId, VertexId, u32)],
    ) -> Result<Graph, GraphError> {
        let mut g = Graph {
            adj: vec![Vec::new(); n],
            edges: Vec::with_capacity(edges.len()),
        };
        for &(u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    /// A graph with `n` vertices and no edges yet.
    pub fn new_empty(n: usize) -> Graph {
        Graph {
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    /// Adds one undirected edge with integer weight `w`, keeping adjacency
    /// lists sorted. Returns the new edge's id.
    pub fn add_edge(&mut self, u: VertexId, v: VertexId, w: u32) -> Result<EdgeId, GraphError> {
        let n = self.adj.len();
        if u as usize >= n || v as usize >= n {
            return Err(GraphError::BadEdge {
                u,
                v,
                reason: format!("vertex id out of range 0..{n}"),
            });
        }
        if u == v {
            return Err(GraphError::BadEdge {
                u,
                v,
                reason: "self-loop".into(),
            });
        }
        if w == 0 {
            return Err(GraphError::BadEdge {
                u,
                v,
                reason: "zero weight".into(),
            });
        }
        if self.edge_between(u, v).is_some() {
            return Err(GraphError::BadEdge {
                u,
                v,
                reason: "duplicate edge".into(),
            });
        }
        let id = self.edges.len() as EdgeId;
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.edges.push(Edge {
            u: a,
            v: b,
            current: fixed::from_int(w as i64),
            initial: w,
        });
        let pos = self.adj[u as usize].partition_point(|&(x, _)| x < v);
        self.adj[u as usize].insert(pos, (v, id));
        let pos = self.adj[v as usize].partition_point(|&(x, _)| x < u);
        self.adj[v as usize].insert(pos, (u, id));
        Ok(id)
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` as `(neighbor, edge id)`, ascending by neighbor id.
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adj[v as usize]
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        let list = &self.adj[u as usize];
        list.binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| list[i].1)
    }

    /// Sets the live weight of `e`. Rejects non-positive values.
    pub fn set_weight(&mut self, e: EdgeId, w: Milli) -> Result<(), GraphError> {
        if w <= 0 {
            let edge = self.edge(e);
            return Err(GraphError::BadEdge {
                u: edge.u,
                v: edge.v,
                reason: format!("weight update to non-positive {}", fixed::fmt_milli(w)),
            });
        }
        self.edges[e as usize].current = w;
        Ok(())
    }

    /// Applies weight deltas atomically: the whole batch is rejected if any
    /// edge id is unknown or any resulting weight would be non-positive.
    pub fn apply_deltas(&mut self, changes: &[(EdgeId, Milli)]) -> Result<(), GraphError> {
        let mut scratch: BTreeMap<EdgeId, Milli> = BTreeMap::new();
        for &(e, dw) in changes {
            if e as usize >= self.edges.len() {
                return Err(GraphError::BadEdge {
                    u: 0,
                    v: 0,
                    reason: format!("unknown edge id {e}"),
                });
            }
            let cur = scratch
                .entry(e)
                .or_insert_with(|| self.edges[e as usize].current);
            *cur = fixed::add(*cur, dw);
            if *cur <= 0 {
                let edge = &self.edges[e as usize];
                return Err(GraphError::BadEdge {
                    u: edge.u,
                    v: edge.v,
                    reason: format!(
                        "batch drives weight to non-positive {}",
                        fixed::fmt_milli(*cur)
                    ),
                });
            }
        }
        for (e, w) in scratch {
            self.edges[e as usize].current = w;
        }
        Ok(())
    }

    /// Connected-component id per vertex, numbered by smallest member id.
    pub fn component_ids(&self) -> Vec<u32> {
        let n = self.vertex_count();
        let mut comp = vec![u32::MAX; n];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != u32::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s as VertexId);
            while let Some(v) = stack.pop() {
                for &(w, _) in self.neighbors(v) {
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

    pub fn is_connected(&self) -> bool {
        self.vertex_count() <= 1 || self.component_ids().iter().all(|&c| c == 0)
    }

    /// Random connected graph: a random spanning tree plus `extra_edges`
    /// distinct non-loop edges, integer weights uniform in `1..=max_weight`.
    pub fn random_connected<R: Rng>(
        n: usize,
        extra_edges: usize,
        max_weight: u32,
        rng: &mut R,
    ) -> Graph {
        assert!(n >= 1);
        assert!(max_weight >= 1);
        let mut edges: Vec<(VertexId, VertexId, u32)> = Vec::new();
        let mut present = std::collections::HashSet::new();
        for v in 1..n {
            let u = rng.gen_range(0..v) as VertexId;
            let w = rng.gen_range(1..=max_weight);
            edges.push((u, v as VertexId, w));
            present.insert((u.min(v as VertexId), u.max(v as VertexId)));
        }
        let max_extra = n * (n - 1) / 2 - (n - 1);
        let mut added = 0;
        let mut attempts = 0;
        while added < extra_edges.min(max_extra) && attempts < 50 * extra_edges + 100 {
            attempts += 1;
            let u = rng.gen_range(0..n) as VertexId;
            let v = rng.gen_range(0..n) as VertexId;
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if present.contains(&key) {
                continue;
            }
            present.insert(key);
            edges.push((key.0, key.1, rng.gen_range(1..=max_weight)));
            added += 1;
        }
        Graph::from_edges(n, &edges).expect("generated edges are valid")
    }
}

/// Parses a 9th-DIMACS-challenge `.gr` file.
///
/// Comment lines (`c ...`) are skipped; exactly one problem line
/// `p sp <n> <m>` must precede all arc lines `a <u> <v> <w>`; vertex ids are
/// 1-based and weights are positive integers. Arc pairs (and repeated arcs)
/// collapse to one undirected edge with the minimum seen weight.
pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<Graph, GraphError> {
    let mut n: Option<usize> = None;
    // (u, v) with u < v, 0-based -> min weight
    let mut collapsed: BTreeMap<(VertexId, VertexId), u32> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GraphError::Io(e.to_string()))?;
        let lineno = idx + 1;
        let mut parts = line.split_whitespace();
        let tag = match parts.next() {
            Some(t) => t,
            None => continue,
        };
        match tag {
            "c" => continue,
            "p" => {
                if n.is_some() {
                    return Err(GraphError::DuplicateHeader { line: lineno });
                }
                let kind = parts.next().unwrap_or("");
                if kind != "sp" {
                    return Err(GraphError::MalformedHeader {
                        line: lineno,
                        reason: format!("expected 'p sp <n> <m>', got kind {kind:?}"),
                    });
                }
                let nv: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| GraphError::MalformedHeader {
                        line: lineno,
                        reason: "vertex count missing or not a number".into(),
                    })?;
                let _arcs: usize = parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| GraphError::MalformedHeader {
                        line: lineno,
                        reason: "arc count missing or not a number".into(),
                    })?;
                if parts.next().is_some() {
                    return Err(GraphError::MalformedHeader {
                        line: lineno,
                        reason: "trailing tokens".into(),
                    });
                }
                n = Some(nv);
            }
            "a" => {
                let n = n.ok_or(GraphError::ArcBeforeHeader { line: lineno })?;
                let mut field = |name: &str| -> Result<i64, GraphError> {
                    parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| GraphError::MalformedArc {
                            line: lineno,
                            reason: format!("{name} missing or not a number"),
                        })
                };
                let u = field("source")?;
                let v = field("target")?;
                let w = field("weight")?;
                for id in [u, v] {
                    if id < 1 || id as usize > n {
                        return Err(GraphError::VertexOutOfRange {
                            line: lineno,
                            id,
                            max: n,
                        });
                    }
                }
                if w < 1 {
                    return Err(GraphError::NonPositiveWeight { line: lineno, w });
                }
                if u == v {
                    return Err(GraphError::SelfLoop { line: lineno, id: u });
                }
                let (a, b) = ((u - 1) as VertexId, (v - 1) as VertexId);
                let key = (a.min(b), a.max(b));
                let w = w as u32;
                collapsed
                    .entry(key)
                    .and_modify(|cur| *cur = (*cur).min(w))
                    .or_insert(w);
            }
            _ => {
                return Err(GraphError::UnknownLineType {
                    line: lineno,
                    tag: tag.to_string(),
                })
            }
        }
    }
    let n = n.ok_or(GraphError::MissingHeader)?;
    let edges: Vec<(VertexId, VertexId, u32)> = collapsed
        .into_iter()
        .map(|((u, v), w)| (u, v, w))
        .collect();
    Graph::from_edges(n, &edges)
}

/// Writes the graph in the same `.gr` format that [`parse_dimacs`] reads:
/// one arc line per undirected edge, 1-based ids, integer weights.
///
/// Fails if any live weight has drifted off the whole-unit grid, since the
/// format cannot represent it.
pub fn emit_dimacs<W: Write>(g: &Graph, mut out: W) -> Result<(), GraphError> {
    for e in g.edges() {
        if e.current % fixed::MILLI_ONE != 0 {
            return Err(GraphError::NonIntegerWeight { u: e.u, v: e.v });
        }
    }
    let write = |out: &mut W, s: String| {
        out.write_all(s.as_bytes())
            .map_err(|e| GraphError::Io(e.to_string()))
    };
    write(
        &mut out,
        format!("p sp {} {}\n", g.vertex_count(), g.edge_count()),
    )?;
    for e in g.edges() {
        write(
            &mut out,
            format!(
                "a {} {} {}\n",
                e.u + 1,
                e.v + 1,
                e.current / fixed::MILLI_ONE
            ),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse_str(s: &str) -> Result<Graph, GraphError> {
        parse_dimacs(s.as_bytes())
    }

    #[test]
    fn parses_basic_file_and_collapses_arc_pairs() {
        let g = parse_str(
            "c tiny road net\n\
             p sp 3 4\n\
             a 1 2 5\n\
             a 2 1 7\n\
             a 2 3 2\n\
             a 3 2 2\n",
        )
        .unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        let e = g.edge(g.edge_between(0, 1).unwrap());
        // Arc pair (1->2, 2->1) collapses to the minimum weight.
        assert_eq!(e.current, 5000);
        assert_eq!(e.initial, 5);
    }

    #[test]
    fn header_example_counts() {
        // A file that declares 264,346 vertices parses to that vertex count
        // even when only a few arcs are present.
        let g = parse_str("p sp 264346 733846\na 1 2 803\n").unwrap();
        assert_eq!(g.vertex_count(), 264346);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn errors_name_line_numbers() {
        assert_eq!(
            parse_str("p sp x 4\n"),
            Err(GraphError::MalformedHeader {
                line: 1,
                reason: "vertex count missing or not a number".into()
            })
        );
        assert_eq!(
            parse_str("p sp 3 1\np sp 3 1\n"),
            Err(GraphError::DuplicateHeader { line: 2 })
        );
        assert_eq!(
            parse_str("c x\np sp 3 1\na 1 9 5\n"),
            Err(GraphError::VertexOutOfRange {
                line: 3,
                id: 9,
                max: 3
            })
        );
        assert_eq!(
            parse_str("p sp 3 1\na 1 2 0\n"),
            Err(GraphError::NonPositiveWeight { line: 2, w: 0 })
        );
        assert_eq!(
            parse_str("a 1 2 1\n"),
            Err(GraphError::ArcBeforeHeader { line: 1 })
        );
        assert_eq!(parse_str("c only comments\n"), Err(GraphError::MissingHeader));
    }

    #[test]
    fn emit_then_parse_preserves_content() {
        // Edge ids are renumbered into (u, v) order by the parser, so compare
        // canonical edge lists; a second round trip is then an exact identity.
        let canon = |g: &Graph| {
            let mut edges: Vec<(VertexId, VertexId, Milli, u32)> = g
                .edges()
                .iter()
                .map(|e| (e.u, e.v, e.current, e.initial))
                .collect();
            edges.sort_unstable();
            (g.vertex_count(), edges)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let g = Graph::random_connected(30, 25, 100, &mut rng);
            let mut buf = Vec::new();
            emit_dimacs(&g, &mut buf).unwrap();
            let g2 = parse_dimacs(buf.as_slice()).unwrap();
            assert_eq!(canon(&g), canon(&g2));
            let mut buf2 = Vec::new();
            emit_dimacs(&g2, &mut buf2).unwrap();
            let g3 = parse_dimacs(buf2.as_slice()).unwrap();
            assert_eq!(g2, g3);
        }
    }

    #[test]
    fn emit_rejects_fractional_weights() {
        let mut g = Graph::from_edges(2, &[(0, 1, 5)]).unwrap();
        g.set_weight(0, 5500).unwrap();
        let mut buf = Vec::new();
        assert!(matches!(
            emit_dimacs(&g, &mut buf),
            Err(GraphError::NonIntegerWeight { .. })
        ));
    }

    #[test]
    fn from_edges_rejects_invalid_input() {
        assert!(Graph::from_edges(3, &[(0, 0, 1)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1, 2), (1, 0, 3)]).is_err());
        assert!(Graph::from_edges(2, &[(0, 2, 1)]).is_err());
    }

    #[test]
    fn set_weight_rejects_non_positive() {
        let mut g = Graph::from_edges(2, &[(0, 1, 5)]).unwrap();
        assert!(g.set_weight(0, 0).is_err());
        assert!(g.set_weight(0, -100).is_err());
        assert!(g.set_weight(0, 1).is_ok());
    }

    #[test]
    fn random_connected_is_connected_and_deterministic() {
        let mut rng1 = ChaCha8Rng::seed_from_u64(42);
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let a = Graph::random_connected(100, 80, 50, &mut rng1);
        let b = Graph::random_connected(100, 80, 50, &mut rng2);
        assert_eq!(a, b);
        assert!(a.is_connected());
    }
}
