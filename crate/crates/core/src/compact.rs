//! Compact storage of bounding paths: inverted edge index, MinHash/LSH
//! grouping of similar edges, and shared prefix trees.
//!
//! The inverted index maps each edge to the bounding paths containing it.
//! Edges whose path lists overlap heavily are found by MinHashing the
//! path-membership matrix and banding the signatures; each group of similar
//! edges then shares one prefix tree in which an edge's path list is a chain
//! of path nodes ending in a tail node that records the list length. Walking
//! upward from a tail reproduces the edge's path set exactly, so the tree
//! answers edge-to-paths lookups while storing shared list prefixes once.
//!
//! Trees are structure-only (ids, no weights): weight updates never touch
//! them, they are rebuilt only when bounding paths are recomputed.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::bounds::SubgraphBounds;
use crate::graph::{EdgeId, VertexId};

pub type PathId = u32;

/// How many hash functions and bands the pipeline uses by default.
pub const DEFAULT_HASHES: usize = 20;
pub const DEFAULT_BANDS: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompactError {
    #[error("invalid hash family: {0}")]
    HashFamily(String),
    #[error("modulus {c} is smaller than the row count {rows}")]
    ModulusTooSmall { c: u64, rows: usize },
    #[error("band count {b} does not divide hash count {h}")]
    BandCount { h: usize, b: usize },
    #[error("group must not be empty")]
    EmptyGroup,
    #[error("edge {0} appears in more than one tree")]
    DuplicateEdge(EdgeId),
    #[error("edge {0} is not registered")]
    UnregisteredEdge(EdgeId),
}

/// Inverted index: edge id -> ascending, duplicate-free list of the paths
/// containing it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EbpIndex {
    pub map: BTreeMap<EdgeId, Vec<PathId>>,
}

impl EbpIndex {
    pub fn paths_of(&self, e: EdgeId) -> &[PathId] {
        self.map.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Total number of (edge, path) entries.
    pub fn elements(&self) -> usize {
        self.map.values().map(Vec::len).sum()
    }
}

/// Builds the inverted index from `(path id, edge set)` pairs.
pub fn build_ebp(paths: &[(PathId, Vec<EdgeId>)]) -> EbpIndex {
    let mut map: BTreeMap<EdgeId, BTreeSet<PathId>> = BTreeMap::new();
    for (pid, edges) in paths {
        for &e in edges {
            map.entry(e).or_default().insert(*pid);
        }
    }
    EbpIndex {
        map: map
            .into_iter()
            .map(|(e, set)| (e, set.into_iter().collect()))
            .collect(),
    }
}

/// Binary path-membership matrix: rows are path ids (sorted), columns are
/// edge ids (sorted), cell set iff the path contains the edge.
#[derive(Debug, Clone)]
pub struct PeMatrix {
    pub paths: Vec<PathId>,
    pub edges: Vec<EdgeId>,
    /// cells[row][col]
    pub cells: Vec<Vec<bool>>,
}

impl PeMatrix {
    pub fn from_ebp(ebp: &EbpIndex) -> PeMatrix {
        let edges: Vec<EdgeId> = ebp.map.keys().copied().collect();
        let paths: Vec<PathId> = ebp
            .map
            .values()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let row_of: BTreeMap<PathId, usize> =
            paths.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let mut cells = vec![vec![false; edges.len()]; paths.len()];
        for (col, e) in edges.iter().enumerate() {
            for p in ebp.paths_of(*e) {
                cells[row_of[p]][col] = true;
            }
        }
        PeMatrix {
            paths,
            edges,
            cells,
        }
    }

    pub fn rows(&self) -> usize {
        self.paths.len()
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn smallest_prime_ge(n: u64) -> u64 {
    let mut c = n.max(2);
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// The first `n` primes: 2, 3, 5, ...
pub fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2;
    while out.len() < n {
        if is_prime(c) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Default hash family `h_i(r) = (a_i * r + 1) mod c` with `a_i` the first
/// `h` primes and `c` the smallest prime at or above the row count, which
/// keeps the row map injective (`c >= rows`).
pub fn default_hash_family(h: usize, rows: usize) -> Vec<(u64, u64)> {
    let c = smallest_prime_ge(rows as u64);
    first_primes(h).into_iter().map(|a| (a, c)).collect()
}

/// MinHash signatures: `cells[i][col]` is the minimum of `h_i` over the rows
/// set in that column; empty columns carry the sentinel `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigMatrix {
    pub edges: Vec<EdgeId>,
    /// cells[hash][col]
    pub cells: Vec<Vec<u64>>,
    pub sentinel: u64,
}

impl SigMatrix {
    pub fn hash_count(&self) -> usize {
        self.cells.len()
    }

    /// Fraction of hashes on which two columns agree.
    pub fn agreement(&self, a: usize, b: usize) -> f64 {
        let same = self.cells.iter().filter(|row| row[a] == row[b]).count();
        same as f64 / self.cells.len() as f64
    }
}

/// Row-scan MinHash over the membership matrix with hash functions
/// `(a_i, c)`. All hashes must share one modulus `c`, prime, at least the
/// row count, with distinct multipliers.
pub fn minhash_signatures(
    m: &PeMatrix,
    hashes: &[(u64, u64)],
) -> Result<SigMatrix, CompactError> {
    if hashes.is_empty() {
        return Err(CompactError::HashFamily("no hash functions".into()));
    }
    let c = hashes[0].1;
    if hashes.iter().any(|&(_, ci)| ci != c) {
        return Err(CompactError::HashFamily(
            "hash functions disagree on the modulus".into(),
        ));
    }
    if !is_prime(c) {
        return Err(CompactError::HashFamily(format!("modulus {c} is not prime")));
    }
    if (c as usize) < m.rows() {
        return Err(CompactError::ModulusTooSmall { c, rows: m.rows() });
    }
    let mut seen = BTreeSet::new();
    for &(a, _) in hashes {
        if !seen.insert(a) {
            return Err(CompactError::HashFamily(format!(
                "duplicate multiplier {a}"
            )));
        }
    }
    let cols = m.edges.len();
    let mut cells = vec![vec![c; cols]; hashes.len()];
    for r in 0..m.rows() {
        let hashed: Vec<u64> = hashes.iter().map(|&(a, c)| (a * r as u64 + 1) % c).collect();
        for col in 0..cols {
            if m.cells[r][col] {
                for (i, &hr) in hashed.iter().enumerate() {
                    if hr < cells[i][col] {
                        cells[i][col] = hr;
                    }
                }
            }
        }
    }
    Ok(SigMatrix {
        edges: m.edges.clone(),
        cells,
        sentinel: c,
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Groups edges whose signature columns are identical in at least one of
/// `b` equal bands; groups are the connected components of that collision
/// relation, ordered by smallest member edge id, members ascending.
pub fn lsh_group(sig: &SigMatrix, b: usize) -> Result<Vec<Vec<EdgeId>>, CompactError> {
    let h = sig.hash_count();
    if b == 0 || h % b != 0 {
        return Err(CompactError::BandCount { h, b });
    }
    let cols = sig.edges.len();
    let size = h / b;
    let mut uf = UnionFind::new(cols);
    for band in 0..b {
        let mut buckets: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        for col in 0..cols {
            let key: Vec<u64> = (band * size..(band + 1) * size)
                .map(|i| sig.cells[i][col])
                .collect();
            match buckets.get(&key) {
                Some(&first) => uf.union(first, col),
                None => {
                    buckets.insert(key, col);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<EdgeId>> = BTreeMap::new();
    for col in 0..cols {
        let root = uf.find(col);
        groups.entry(root).or_default().push(sig.edges[col]);
    }
    // BTreeMap over root = smallest column index = smallest edge id, since
    // columns are sorted by edge id.
    Ok(groups.into_values().collect())
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    GroupRoot,
    Path(PathId),
    /// Leaf annotation: this edge's path list ends here and has `set_size`
    /// entries (the chain of path nodes above).
    Tail { edge: EdgeId, set_size: usize },
}

#[derive(Debug, Clone)]
struct Node {
    kind: NodeKind,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
}

/// Shared prefix tree of one edge group. Path nodes form chains; tail nodes
/// are leaves marking where an edge's (frequency-sorted) path list ends.
#[derive(Debug, Clone)]
pub struct MpTree {
    nodes: Vec<Node>,
    root: NodeId,
    tails: BTreeMap<EdgeId, NodeId>,
}

impl MpTree {
    fn new() -> Self {
        MpTree {
            nodes: vec![Node {
                kind: NodeKind::GroupRoot,
                parent: None,
                children: Vec::new(),
            }],
            root: 0,
            tails: BTreeMap::new(),
        }
    }

    fn add_node(&mut self, kind: NodeKind, parent: NodeId) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            kind,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Longest chain of path nodes matching a prefix of `l`, starting at any
    /// path node; on equal lengths the first chain found in preorder wins.
    /// Returns the last matched node (the group root on no match) and the
    /// matched length.
    fn best_match(&self, l: &[PathId]) -> (NodeId, usize) {
        let mut best: Option<(NodeId, usize)> = None;
        if !l.is_empty() {
            let mut stack = vec![self.root];
            while let Some(x) = stack.pop() {
                if matches!(self.nodes[x].kind, NodeKind::Path(p) if p == l[0]) {
                    let mut cur = x;
                    let mut len = 1;
                    while len < l.len() {
                        let next = self.nodes[cur].children.iter().copied().find(|&ch| {
                            matches!(self.nodes[ch].kind, NodeKind::Path(q) if q == l[len])
                        });
                        match next {
                            Some(ch) => {
                                cur = ch;
                                len += 1;
                            }
                            None => break,
                        }
                    }
                    if best.map_or(true, |(_, bl)| len > bl) {
                        best = Some((cur, len));
                    }
                }
                for &ch in self.nodes[x].children.iter().rev() {
                    if matches!(self.nodes[ch].kind, NodeKind::Path(_)) {
                        stack.push(ch);
                    }
                }
            }
        }
        best.unwrap_or((self.root, 0))
    }

    fn insert(&mut self, e: EdgeId, l: &[PathId]) {
        let (mut at, matched) = self.best_match(l);
        for &p in &l[matched..] {
            at = self.add_node(NodeKind::Path(p), at);
        }
        let tail = self.add_node(
            NodeKind::Tail {
                edge: e,
                set_size: l.len(),
            },
            at,
        );
        self.tails.insert(e, tail);
    }

    /// Walks `set_size` path nodes upward from the edge's tail.
    pub fn retrieve(&self, e: EdgeId) -> Option<BTreeSet<PathId>> {
        let &tail = self.tails.get(&e)?;
        let NodeKind::Tail { set_size, .. } = self.nodes[tail].kind else {
            unreachable!("tail registry points at tail nodes");
        };
        let mut out = BTreeSet::new();
        let mut cur = self.nodes[tail].parent;
        for _ in 0..set_size {
            let id = cur.expect("chain at least set_size long");
            let NodeKind::Path(p) = self.nodes[id].kind else {
                unreachable!("chain ancestors are path nodes");
            };
            out.insert(p);
            cur = self.nodes[id].parent;
        }
        Some(out)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.tails.keys().copied()
    }

    /// Number of path nodes (tails and the root excluded).
    pub fn path_node_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Path(_)))
            .count()
    }

    pub fn tail_count(&self) -> usize {
        self.tails.len()
    }

    /// Indented preorder dump, one node per line (`path:<id>` /
    /// `tail:<edge>,<count>`, two spaces per level), for golden-file tests.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(NodeId, usize)> = self.nodes[self.root]
            .children
            .iter()
            .rev()
            .map(|&c| (c, 0))
            .collect();
        while let Some((id, depth)) = stack.pop() {
            let n = &self.nodes[id];
            for _ in 0..depth {
                out.push_str("  ");
            }
            match n.kind {
                NodeKind::GroupRoot => unreachable!("group root is never a child"),
                NodeKind::Path(p) => out.push_str(&format!("path:{p}\n")),
                NodeKind::Tail { edge, set_size } => {
                    out.push_str(&format!("tail:{edge},{set_size}\n"))
                }
            }
            for &ch in n.children.iter().rev() {
                stack.push((ch, depth + 1));
            }
        }
        out
    }

    /// `(parent path id or None, kind)` pairs for structural assertions.
    #[cfg(test)]
    fn chain_of(&self, e: EdgeId) -> Vec<PathId> {
        let mut ids: Vec<PathId> = Vec::new();
        let &tail = self.tails.get(&e).unwrap();
        let mut cur = self.nodes[tail].parent;
        while let Some(id) = cur {
            if let NodeKind::Path(p) = self.nodes[id].kind {
                ids.push(p);
            }
            cur = self.nodes[id].parent;
        }
        ids.reverse();
        ids
    }
}

/// Sorts each edge's path list by global path frequency (descending, ties by
/// ascending path id) and inserts edges in ascending id order, appending
/// each list's unmatched remainder below the longest matching prefix chain.
pub fn build_mptree(group: &[EdgeId], ebp: &EbpIndex) -> Result<MpTree, CompactError> {
    if group.is_empty() {
        return Err(CompactError::EmptyGroup);
    }
    let mut freq: BTreeMap<PathId, usize> = BTreeMap::new();
    for list in ebp.map.values() {
        for &p in list {
            *freq.entry(p).or_default() += 1;
        }
    }
    let mut edges: Vec<EdgeId> = group.to_vec();
    edges.sort_unstable();
    let mut tree = MpTree::new();
    for e in edges {
        let mut l: Vec<PathId> = ebp.paths_of(e).to_vec();
        l.sort_by_key(|p| (std::cmp::Reverse(freq[p]), *p));
        tree.insert(e, &l);
    }
    Ok(tree)
}

/// Forest of group trees under one conceptual root, with a registry mapping
/// every edge to its tree.
#[derive(Debug, Clone)]
pub struct GmpTree {
    pub trees: Vec<MpTree>,
    registry: BTreeMap<EdgeId, usize>,
}

pub fn merge_gmptree(trees: Vec<MpTree>) -> Result<GmpTree, CompactError> {
    let mut registry = BTreeMap::new();
    for (i, t) in trees.iter().enumerate() {
        for e in t.edges() {
            if registry.insert(e, i).is_some() {
                return Err(CompactError::DuplicateEdge(e));
            }
        }
    }
    Ok(GmpTree { trees, registry })
}

impl GmpTree {
    pub fn registry_size(&self) -> usize {
        self.registry.len()
    }

    pub fn path_node_count(&self) -> usize {
        self.trees.iter().map(MpTree::path_node_count).sum()
    }

    /// Concatenated group-tree dumps in group order; each group's nodes
    /// restart at indent zero under the conceptual root.
    pub fn dump_text(&self) -> String {
        self.trees.iter().map(MpTree::dump_text).collect()
    }
}

/// Paths containing `e`, reproduced from the edge's tail chain.
pub fn retrieve_paths(t: &GmpTree, e: EdgeId) -> Result<BTreeSet<PathId>, CompactError> {
    let &tree = t
        .registry
        .get(&e)
        .ok_or(CompactError::UnregisteredEdge(e))?;
    Ok(t.trees[tree].retrieve(e).expect("registry is consistent"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactionReport {
    /// Path nodes stored across all trees.
    pub node_count: usize,
    /// (edge, path) entries in the inverted index.
    pub element_count: usize,
    /// node_count / element_count; 1.0 means nothing was shared.
    pub ratio: f64,
}

pub fn compaction_report(t: &GmpTree, ebp: &EbpIndex) -> CompactionReport {
    let node_count = t.path_node_count();
    let element_count = ebp.elements();
    let ratio = if element_count == 0 {
        1.0
    } else {
        node_count as f64 / element_count as f64
    };
    CompactionReport {
        node_count,
        element_count,
        ratio,
    }
}

/// Where each globally numbered path of a subgraph came from.
#[derive(Debug, Clone, Default)]
pub struct PathCatalog {
    /// Indexed by global path id: the boundary pair and the path's local id
    /// within that pair's bounding set.
    pub entries: Vec<((VertexId, VertexId), u32)>,
}

/// Numbers all bounding paths of a subgraph with global path ids (pair
/// order, then local id) and returns their edge sets for compaction.
pub fn catalog_bounds(b: &SubgraphBounds) -> (PathCatalog, Vec<(PathId, Vec<EdgeId>)>) {
    let mut catalog = PathCatalog::default();
    let mut paths = Vec::new();
    for (&pair, pb) in &b.pairs {
        for sp in &pb.paths {
            let pid = catalog.entries.len() as PathId;
            catalog.entries.push((pair, sp.id));
            paths.push((pid, sp.edges.clone()));
        }
    }
    (catalog, paths)
}

/// A subgraph's compacted edge-to-paths index with its build parameters.
#[derive(Debug, Clone)]
pub struct CompactedIndex {
    pub ebp: EbpIndex,
    pub gmp: GmpTree,
    pub catalog: PathCatalog,
    /// Modulus used by the hash family, recorded for reports: the smallest
    /// prime at or above the membership-matrix row count.
    pub hash_c: u64,
    pub hashes: usize,
    pub bands: usize,
}

/// Full compaction pipeline for one subgraph's cataloged bounding paths.
pub fn compact_catalog(
    catalog: PathCatalog,
    paths: &[(PathId, Vec<EdgeId>)],
    h: usize,
    b: usize,
) -> Result<CompactedIndex, CompactError> {
    let ebp = build_ebp(paths);
    let pe = PeMatrix::from_ebp(&ebp);
    let family = default_hash_family(h, pe.rows());
    let hash_c = family.first().map(|&(_, c)| c).unwrap_or(2);
    let sig = minhash_signatures(&pe, &family)?;
    let groups = lsh_group(&sig, b)?;
    let trees = groups
        .iter()
        .map(|g| build_mptree(g, &ebp))
        .collect::<Result<Vec<_>, _>>()?;
    let gmp = merge_gmptree(trees)?;
    Ok(CompactedIndex {
        ebp,
        gmp,
        catalog,
        hash_c,
        hashes: h,
        bands: b,
    })
}

pub fn compact_subgraph_bounds(
    bounds: &SubgraphBounds,
    h: usize,
    b: usize,
) -> Result<CompactedIndex, CompactError> {
    let (catalog, paths) = catalog_bounds(bounds);
    compact_catalog(catalog, &paths, h, b)
}

impl CompactedIndex {
    /// Bounding paths containing `e`, as (pair, local path id). Edges on no
    /// bounding path yield an empty list.
    pub fn paths_containing(&self, e: EdgeId) -> Vec<((VertexId, VertexId), u32)> {
        match retrieve_paths(&self.gmp, e) {
            Ok(set) => set
                .into_iter()
                .map(|pid| self.catalog.entries[pid as usize])
                .collect(),
            Err(CompactError::UnregisteredEdge(_)) => Vec::new(),
            Err(_) => unreachable!("retrieve only fails on unregistered edges"),
        }
    }
}

/// Incremental maintenance for one subgraph: applies the weight-delta batch
/// (atomically rejected if any weight would turn non-positive), rebuilds the
/// fragment unit sums, adds each delta to the stored cost of exactly the
/// bounding paths containing the edge (found through the compacted index),
/// and returns the pairs whose lower bound changed, ascending.
pub fn refresh_bounds(
    g: &mut crate::graph::Graph,
    sg: &crate::partition::Subgraph,
    bounds: &mut SubgraphBounds,
    idx: &CompactedIndex,
    changes: &[(EdgeId, crate::fixed::Milli)],
) -> Result<Vec<((VertexId, VertexId), crate::fixed::Milli)>, crate::graph::GraphError> {
    g.apply_deltas(changes)?;
    let before = bounds.all_lower_bounds();
    bounds.units = crate::units::UnitMultiset::from_subgraph(g, sg);
    for &(e, dw) in changes {
        for (pair, local) in idx.paths_containing(e) {
            let pb = bounds
                .pairs
                .get_mut(&pair)
                .expect("catalog pairs exist in bounds");
            pb.paths[local as usize].actual += dw;
        }
    }
    let changed = before
        .into_iter()
        .filter_map(|(pair, old)| {
            let new = bounds.lower_bound(pair.0, pair.1);
            (new.value != old.value).then_some((pair, new.value))
        })
        .collect();
    Ok(changed)
}
