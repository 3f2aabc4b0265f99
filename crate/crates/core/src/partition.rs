//! Vertex partitioning into bounded-size overlapping subgraphs.
//!
//! The partition assigns every *edge* to exactly one subgraph; vertices may
//! be shared. A vertex that belongs to two or more subgraphs is a *boundary*
//! vertex. Any path between interior vertices of different subgraphs must
//! pass through a boundary vertex, because each edge lives entirely inside
//! its owning subgraph; the lower-bound index and the skeleton graph are
//! built on that separator property.
//!
//! Construction is deterministic: regions grow breadth-first from the
//! smallest uncovered vertex id, following only unassigned edges, until the
//! vertex budget `z` is reached. Edges whose endpoints end up in different
//! regions are swept into additional bridging subgraphs afterwards.

use std::collections::HashSet;
use std::collections::VecDeque;
use std::io::Write;

use thiserror::Error;

use crate::fixed::Milli;
use crate::graph::{EdgeId, Graph, VertexId};
use crate::ksp::PathGraph;

pub type SubgraphId = u32;

/// One subgraph of the partition: a vertex subset (at most `z` of them) and
/// the edges it owns. All id lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub id: SubgraphId,
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    /// Vertices of this subgraph that also belong to another subgraph.
    pub boundary: Vec<VertexId>,
}

impl Subgraph {
    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }

    /// All unordered boundary pairs `(u, v)` with `u < v`, lexicographic.
    pub fn boundary_pairs(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::new();
        for (i, &u) in self.boundary.iter().enumerate() {
            for &v in &self.boundary[i + 1..] {
                out.push((u, v));
            }
        }
        out
    }
}

/// An edge partition of a graph with shared boundary vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub z: usize,
    pub subgraphs: Vec<Subgraph>,
    /// Subgraph ids containing each vertex, ascending.
    pub vertex_subgraphs: Vec<Vec<SubgraphId>>,
    /// Owning subgraph of each edge.
    pub edge_owner: Vec<SubgraphId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("vertex budget z={0} is too small; need z >= 2 to hold an edge")]
    ZTooSmall(usize),
}

impl Partition {
    pub fn is_boundary(&self, v: VertexId) -> bool {
        self.vertex_subgraphs[v as usize].len() >= 2
    }

    /// Subgraphs containing both `u` and `v`, ascending by id.
    pub fn shared_subgraphs(&self, u: VertexId, v: VertexId) -> Vec<SubgraphId> {
        let a = &self.vertex_subgraphs[u as usize];
        let b = &self.vertex_subgraphs[v as usize];
        a.iter().filter(|id| b.contains(id)).copied().collect()
    }

    /// All boundary vertices of the graph, ascending.
    pub fn boundary_vertices(&self) -> Vec<VertexId> {
        (0..self.vertex_subgraphs.len() as VertexId)
            .filter(|&v| self.is_boundary(v))
            .collect()
    }
}

/// Partitions `g` into subgraphs of at most `z` vertices each.
///
/// Deterministic for a given graph: regions grow breadth-first from the
/// smallest-id vertex not yet covered, following unassigned edges in
/// neighbor-id order; leftover edges (endpoints in different regions) are
/// clustered into bridging subgraphs the same way. Each connected component
/// is partitioned independently since growth never crosses missing edges.
pub fn partition(g: &Graph, z: usize) -> Result<Partition, PartitionError> {
    if z < 2 {
        return Err(PartitionError::ZTooSmall(z));
    }
    let n = g.vertex_count();
    let m = g.edge_count();
    let mut covered = vec![false; n];
    let mut edge_assigned = vec![false; m];
    let mut subgraphs: Vec<Subgraph> = Vec::new();

    let push_subgraph = |vertices: Vec<VertexId>, edges: Vec<EdgeId>,
                         subgraphs: &mut Vec<Subgraph>| {
        let id = subgraphs.len() as SubgraphId;
        subgraphs.push(Subgraph {
            id,
            vertices,
            edges,
            boundary: Vec::new(),
        });
    };

    // Main pass: BFS regions seeded at uncovered vertices.
    for seed in 0..n as VertexId {
        if covered[seed as usize] {
            continue;
        }
        let mut in_region = HashSet::new();
        let mut region = vec![seed];
        in_region.insert(seed);
        let mut queue = VecDeque::from([seed]);
        'grow: while let Some(u) = queue.pop_front() {
            for &(w, e) in g.neighbors(u) {
                if edge_assigned[e as usize] || in_region.contains(&w) {
                    continue;
                }
                if region.len() == z {
                    break 'grow;
                }
                in_region.insert(w);
                region.push(w);
                queue.push_back(w);
            }
        }
        let mut edges = Vec::new();
        for &u in &region {
            covered[u as usize] = true;
            for &(w, e) in g.neighbors(u) {
                if !edge_assigned[e as usize] && u < w && in_region.contains(&w) {
                    edge_assigned[e as usize] = true;
                    edges.push(e);
                }
            }
        }
        region.sort_unstable();
        edges.sort_unstable();
        push_subgraph(region, edges, &mut subgraphs);
    }

    // Bridging pass: cluster edges left between regions.
    loop {
        let seed = match (0..n as VertexId).find(|&v| {
            g.neighbors(v)
                .iter()
                .any(|&(_, e)| !edge_assigned[e as usize])
        }) {
            Some(v) => v,
            None => break,
        };
        let mut in_cluster = HashSet::from([seed]);
        let mut vertices = vec![seed];
        let mut edges = Vec::new();
        let mut queue = VecDeque::from([seed]);
        while let Some(u) = queue.pop_front() {
            for &(w, e) in g.neighbors(u) {
                if edge_assigned[e as usize] {
                    continue;
                }
                let new = !in_cluster.contains(&w) as usize;
                if vertices.len() + new > z {
                    continue; // leave for a later cluster
                }
                edge_assigned[e as usize] = true;
                edges.push(e);
                if new == 1 {
                    in_cluster.insert(w);
                    vertices.push(w);
                    queue.push_back(w);
                }
            }
        }
        vertices.sort_unstable();
        edges.sort_unstable();
        push_subgraph(vertices, edges, &mut subgraphs);
    }

    // Boundary bookkeeping.
    let mut vertex_subgraphs: Vec<Vec<SubgraphId>> = vec![Vec::new(); n];
    for sg in &subgraphs {
        for &v in &sg.vertices {
            vertex_subgraphs[v as usize].push(sg.id);
        }
    }
    for sg in &mut subgraphs {
        sg.boundary = sg
            .vertices
            .iter()
            .copied()
            .filter(|&v| vertex_subgraphs[v as usize].len() >= 2)
            .collect();
    }
    let mut edge_owner = vec![0 as SubgraphId; m];
    for sg in &subgraphs {
        for &e in &sg.edges {
            edge_owner[e as usize] = sg.id;
        }
    }
    Ok(Partition {
        z,
        subgraphs,
        vertex_subgraphs,
        edge_owner,
    })
}

/// Writes the partition as CSV rows `subgraph_id,vertex_id,is_boundary`.
pub fn write_partition_csv<W: Write>(p: &Partition, mut out: W) -> std::io::Result<()> {
    writeln!(out, "subgraph_id,vertex_id,is_boundary")?;
    for sg in &p.subgraphs {
        for &v in &sg.vertices {
            writeln!(out, "{},{},{}", sg.id, v, sg.is_boundary(v) as u8)?;
        }
    }
    Ok(())
}

/// Edge-cost source for subgraph views.
pub trait EdgeCosts {
    fn cost(&self, e: EdgeId, g: &Graph) -> Milli;
}

/// Live weights in milli-units.
#[derive(Clone, Copy)]
pub struct CurrentWeights;

impl EdgeCosts for CurrentWeights {
    fn cost(&self, e: EdgeId, g: &Graph) -> Milli {
        g.edge(e).current
    }
}

/// Frozen initial weights as raw counts (one cost unit per virtual
/// fragment); path costs under this view are fragment counts, not
/// milli-units.
#[derive(Clone, Copy)]
pub struct VfragCounts;

impl EdgeCosts for VfragCounts {
    fn cost(&self, e: EdgeId, g: &Graph) -> Milli {
        g.edge(e).initial as Milli
    }
}

/// A subgraph as a searchable graph: only the subgraph's own edges are
/// visible, and `exclude`d vertices are invisible. Vertex ids stay global.
pub struct SubgraphView<'a, C: EdgeCosts> {
    pub graph: &'a Graph,
    pub sg: &'a Subgraph,
    pub costs: C,
    pub exclude: Option<&'a HashSet<VertexId>>,
}

impl<'a, C: EdgeCosts> SubgraphView<'a, C> {
    pub fn new(graph: &'a Graph, sg: &'a Subgraph, costs: C) -> Self {
        SubgraphView {
            graph,
            sg,
            costs,
            exclude: None,
        }
    }

    pub fn excluding(mut self, exclude: &'a HashSet<VertexId>) -> Self {
        self.exclude = Some(exclude);
        self
    }
}

impl<'a, C: EdgeCosts> PathGraph for SubgraphView<'a, C> {
    fn id_bound(&self) -> usize {
        self.graph.vertex_count()
    }

    fn for_each_neighbor(&self, v: VertexId, f: &mut dyn FnMut(VertexId, Milli)) {
        if let Some(ex) = self.exclude {
            if ex.contains(&v) {
                return;
            }
        }
        for &(w, e) in self.graph.neighbors(v) {
            if !self.sg.contains_edge(e) {
                continue;
            }
            if let Some(ex) = self.exclude {
                if ex.contains(&w) {
                    continue;
                }
            }
            f(w, self.costs.cost(e, self.graph));
        }
    }
}
