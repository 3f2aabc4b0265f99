//! Per-subgraph lower bounds on boundary-pair distances.
//!
//! For each pair of boundary vertices the index stores a small set of
//! *bounding paths*: representatives of the cheapest fragment counts (phi
//! values) that any simple path between the pair can have. Fragment counts
//! are frozen at build time, so the stored paths stay valid under weight
//! changes; only their current costs and the fragment multiset need
//! refreshing.
//!
//! A pair's lower bound combines two facts: the current cost of a stored
//! path is exact for its phi class when that class is a certified singleton
//! (the class was fully scanned and held one path), and any path with a
//! fragment count of at least `phi` costs at least the sum of the `phi`
//! cheapest fragment units in the subgraph. When some scanned class is not a
//! certified singleton the bound falls back to the fragment sum at that
//! class, which stays sound whatever the unseen class members cost.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::fixed::{add, Milli, INF};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::ksp::{dijkstra_distances, Residual, YenEnumerator};
use crate::partition::{Subgraph, SubgraphView, VfragCounts};
use crate::units::UnitMultiset;

/// Raw-path enumeration cap per pair, as a multiple of the requested number
/// of distinct phi classes.
pub const RAW_CAP_FACTOR: usize = 50;

/// One stored bounding path between a boundary pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredPath {
    pub id: u32,
    /// Total fragment count along the path (sum of frozen initial weights).
    pub phi: u64,
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
    /// Current cost of the path; refreshed on weight changes.
    pub actual: Milli,
    /// Number of same-phi paths seen while this class was scanned.
    pub class_size: u32,
    /// True when every path of this phi value was enumerated.
    pub class_complete: bool,
}

impl StoredPath {
    /// The stored cost is exactly the class minimum only when nothing else
    /// shares the class.
    pub fn certified_singleton(&self) -> bool {
        self.class_complete && self.class_size == 1
    }
}

/// Bounding paths for one vertex pair, ascending by phi.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBounds {
    pub src: VertexId,
    pub dst: VertexId,
    pub paths: Vec<StoredPath>,
    /// True when enumeration ran out of simple paths (rather than hitting
    /// the class or raw-path budget).
    pub exhausted: bool,
}

/// How a lower bound was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundClaim {
    /// Cheapest stored path; exact distance for the pair.
    ShortestStored,
    /// Sum of the cheapest fragments at the largest scanned phi.
    CheapestFragments,
    /// Fallback at the first class that is not a certified singleton.
    Guarded,
    /// No path exists (or none was scanned); bound is infinite.
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LowerBound {
    pub value: Milli,
    /// True when `value` is the pair's exact current distance.
    pub exact: bool,
    pub claim: BoundClaim,
    /// Stored path id backing a `ShortestStored` claim.
    pub witness: Option<u32>,
}

/// Enumerates bounding paths for `(src, dst)` inside the subgraph view:
/// loopless paths by ascending fragment count, keeping the first path of
/// each distinct phi, until `xi` classes are stored, the raw cap
/// (`RAW_CAP_FACTOR * xi`) is hit, or the pair is exhausted.
pub fn compute_bounding_paths(
    g: &Graph,
    sg: &Subgraph,
    src: VertexId,
    dst: VertexId,
    xi: usize,
) -> PairBounds {
    assert!(xi >= 1, "need at least one phi class");
    let view = SubgraphView::new(g, sg, VfragCounts);
    let mut yen = YenEnumerator::new(src, dst);
    let mut paths: Vec<StoredPath> = Vec::new();
    let mut raw = 0usize;
    let cap = RAW_CAP_FACTOR * xi;
    let mut exhausted = false;
    loop {
        let next = yen.next_path(&view);
        let path = match next {
            Some(p) => p,
            None => {
                // Every simple path seen: all scanned classes are complete.
                for sp in &mut paths {
                    sp.class_complete = true;
                }
                exhausted = true;
                break;
            }
        };
        raw += 1;
        let phi = path.cost as u64;
        match paths.last_mut() {
            Some(last) if last.phi == phi => {
                last.class_size += 1;
            }
            _ => {
                // A larger phi arrived, so every earlier class is done.
                for sp in &mut paths {
                    sp.class_complete = true;
                }
                if paths.len() == xi {
                    break;
                }
                let edges = path
                    .vertices
                    .windows(2)
                    .map(|w| g.edge_between(w[0], w[1]).expect("path edge exists"))
                    .collect();
                paths.push(StoredPath {
                    id: paths.len() as u32,
                    phi,
                    vertices: path.vertices,
                    edges,
                    actual: 0,
                    class_size: 1,
                    class_complete: false,
                });
            }
        }
        if raw >= cap {
            break;
        }
    }
    let mut pb = PairBounds {
        src,
        dst,
        paths,
        exhausted,
    };
    refresh_actuals(g, &mut pb);
    pb
}

fn refresh_actuals(g: &Graph, pb: &mut PairBounds) {
    for sp in &mut pb.paths {
        sp.actual = sp
            .edges
            .iter()
            .fold(0, |acc, &e| add(acc, g.edge(e).current));
    }
}

/// The lower-bound index of one subgraph: bounding paths per vertex pair
/// plus the fragment unit multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphBounds {
    pub sg: crate::partition::SubgraphId,
    pub xi: usize,
    pub pairs: BTreeMap<(VertexId, VertexId), PairBounds>,
    pub units: UnitMultiset,
}

impl SubgraphBounds {
    /// Builds bounds for every boundary pair of the subgraph.
    pub fn build(g: &Graph, sg: &Subgraph, xi: usize) -> Self {
        let pairs = sg.boundary_pairs();
        Self::build_for_pairs(g, sg, xi, &pairs)
    }

    pub fn build_for_pairs(
        g: &Graph,
        sg: &Subgraph,
        xi: usize,
        wanted: &[(VertexId, VertexId)],
    ) -> Self {
        let mut pairs = BTreeMap::new();
        for &(u, v) in wanted {
            let (src, dst) = (u.min(v), u.max(v));
            pairs.insert((src, dst), compute_bounding_paths(g, sg, src, dst, xi));
        }
        SubgraphBounds {
            sg: sg.id,
            xi,
            pairs,
            units: UnitMultiset::from_subgraph(g, sg),
        }
    }

    /// Adds pairs `(q, t)` for a temporarily attached query vertex; returns
    /// the inserted keys so the caller can detach them later.
    pub fn attach_pairs(
        &mut self,
        g: &Graph,
        sg: &Subgraph,
        q: VertexId,
        targets: &[VertexId],
    ) -> Vec<(VertexId, VertexId)> {
        let mut added = Vec::new();
        for &t in targets {
            if t == q {
                continue;
            }
            let key = (q.min(t), q.max(t));
            if self.pairs.contains_key(&key) {
                continue;
            }
            self.pairs
                .insert(key, compute_bounding_paths(g, sg, key.0, key.1, self.xi));
            added.push(key);
        }
        added
    }

    pub fn detach_pairs(&mut self, keys: &[(VertexId, VertexId)]) {
        for key in keys {
            self.pairs.remove(key);
        }
    }

    /// Current lower bound on the pair's distance within this subgraph.
    pub fn lower_bound(&self, u: VertexId, v: VertexId) -> LowerBound {
        let key = (u.min(v), u.max(v));
        let pb = match self.pairs.get(&key) {
            Some(pb) => pb,
            None => {
                return LowerBound {
                    value: INF,
                    exact: false,
                    claim: BoundClaim::Unreachable,
                    witness: None,
                }
            }
        };
        self.pair_lower_bound(pb)
    }

    fn pair_lower_bound(&self, pb: &PairBounds) -> LowerBound {
        if pb.paths.is_empty() {
            return LowerBound {
                value: INF,
                // An exhausted empty pair really has no connecting path.
                exact: pb.exhausted,
                claim: BoundClaim::Unreachable,
                witness: None,
            };
        }
        let r = pb.paths.len();
        // The last class never needs certification: the fragment sum at its
        // phi already covers it together with everything beyond.
        let prefix_certified = pb.paths[..r - 1].iter().all(|p| p.certified_singleton());
        if prefix_certified {
            let (witness, d_min) = pb
                .paths
                .iter()
                .map(|p| (p.id, p.actual))
                .min_by_key(|&(id, d)| (d, id))
                .unwrap();
            let bd_last = self.units.prefix_sum(pb.paths[r - 1].phi);
            if d_min <= bd_last {
                return LowerBound {
                    value: d_min,
                    exact: true,
                    claim: BoundClaim::ShortestStored,
                    witness: Some(witness),
                };
            }
            return LowerBound {
                value: bd_last,
                exact: false,
                claim: BoundClaim::CheapestFragments,
                witness: None,
            };
        }
        // Some scanned class may hide a cheaper unseen member; bound it by
        // the fragment sum at the first such class and keep the exact costs
        // of certified singletons.
        let first_open = pb
            .paths
            .iter()
            .find(|p| !p.certified_singleton())
            .unwrap();
        let mut value = self.units.prefix_sum(first_open.phi);
        for p in &pb.paths {
            if p.certified_singleton() {
                value = value.min(p.actual);
            }
        }
        LowerBound {
            value,
            exact: false,
            claim: BoundClaim::Guarded,
            witness: None,
        }
    }

    /// Re-derives unit sums and stored-path costs from current weights.
    /// Returns the pairs whose lower bound changed, with the new bound,
    /// ascending by pair.
    pub fn refresh(&mut self, g: &Graph, sg: &Subgraph) -> Vec<((VertexId, VertexId), Milli)> {
        let before: Vec<(_, Milli)> = self
            .pairs
            .iter()
            .map(|(&key, pb)| (key, self.pair_lower_bound(pb).value))
            .collect();
        self.units = UnitMultiset::from_subgraph(g, sg);
        for pb in self.pairs.values_mut() {
            refresh_actuals(g, pb);
        }
        let mut changed = Vec::new();
        for (key, old) in before {
            let new = self.pair_lower_bound(&self.pairs[&key]).value;
            if new != old {
                changed.push((key, new));
            }
        }
        changed
    }

    /// Rows for the bounding-path dump: `(src, dst, phi, actual, bound)`
    /// per stored path, ascending by pair then phi.
    pub fn dump_rows(&self) -> Vec<(VertexId, VertexId, u64, Milli, Milli)> {
        let mut rows = Vec::new();
        for (&(u, v), pb) in &self.pairs {
            for sp in &pb.paths {
                rows.push((u, v, sp.phi, sp.actual, self.units.prefix_sum(sp.phi)));
            }
        }
        rows
    }
}

impl SubgraphBounds {
    /// All current lower bounds, ascending by pair.
    pub fn all_lower_bounds(&self) -> Vec<((VertexId, VertexId), LowerBound)> {
        self.pairs
            .iter()
            .map(|(&key, pb)| (key, self.pair_lower_bound(pb)))
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoundsError {
    #[error("pair ({0}, {1}) is not in the table")]
    MissingPair(VertexId, VertexId),
}

/// Per-pair lower bounds across all subgraphs containing the pair, with the
/// minimum (and its subgraph) derivable per pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MbdTable {
    pub map: BTreeMap<(VertexId, VertexId), BTreeMap<crate::partition::SubgraphId, Milli>>,
}

impl MbdTable {
    pub fn from_bounds(all: &[SubgraphBounds]) -> MbdTable {
        let mut table = MbdTable::default();
        for b in all {
            for (pair, lb) in b.all_lower_bounds() {
                table.insert(pair, b.sg, lb.value);
            }
        }
        table
    }

    pub fn insert(
        &mut self,
        pair: (VertexId, VertexId),
        sg: crate::partition::SubgraphId,
        lbd: Milli,
    ) {
        let key = (pair.0.min(pair.1), pair.0.max(pair.1));
        self.map.entry(key).or_default().insert(sg, lbd);
    }

    /// Minimum lower bound over the pair's subgraphs; ties go to the smaller
    /// subgraph id.
    pub fn min_lower_bound(
        &self,
        u: VertexId,
        v: VertexId,
    ) -> Result<(Milli, crate::partition::SubgraphId), BoundsError> {
        let key = (u.min(v), u.max(v));
        let per_sg = self.map.get(&key).ok_or(BoundsError::MissingPair(u, v))?;
        per_sg
            .iter()
            .map(|(&sg, &lbd)| (lbd, sg))
            .min_by_key(|&(lbd, sg)| (lbd, sg))
            .ok_or(BoundsError::MissingPair(u, v))
    }
}

/// Element-count estimate for a flat pair index over one subgraph:
/// every unordered boundary pair times `xi` stored paths times the edge
/// count.
pub fn estimate_epindex_elements(n_b: u64, xi: u64, n_e: u64) -> u64 {
    n_b * (n_b - 1) / 2 * xi * n_e
}

/// True shortest distance between two vertices inside a subgraph view, for
/// bound validation.
pub fn subgraph_distance(g: &Graph, sg: &Subgraph, u: VertexId, v: VertexId) -> Milli {
    let view = SubgraphView::new(g, sg, crate::partition::CurrentWeights);
    if !sg.contains_vertex(u) || !sg.contains_vertex(v) {
        return INF;
    }
    dijkstra_distances(&view, u, &Residual::default())[v as usize]
}
