//! Exact k-shortest-path queries over dynamic weighted graphs.
//!
//! The crate builds a two-level lower-bound index over a vertex partition of
//! an undirected graph and answers k-shortest-path (KSP) queries with a
//! filter-and-refine search that touches only the subgraphs a candidate route
//! actually crosses:
//!
//! * [`graph`] loads 9th-DIMACS-challenge `.gr` files into fixed-point
//!   weighted graphs and partitions them into bounded-size subgraphs.
//! * [`bounds`] maintains, per subgraph, a small set of bounding paths per
//!   boundary-vertex pair and derives lower-bound distances that stay valid
//!   (and cheap to refresh) as edge weights change.
//! * [`compact`] stores the bounding paths in a shared prefix tree grouped by
//!   MinHash/LSH similarity, giving compact edge-to-path lookups.
//! * [`skeleton`] assembles the boundary-vertex skeleton graph whose edge
//!   weights are the tightest known lower bounds, and enumerates reference
//!   paths over it on demand.
//! * [`ksp`], [`pyen`] and [`candidate`] implement the path searches: a
//!   classic loopless KSP baseline, an accelerated variant with shortest-path
//!   reuse, and the filter-and-refine driver that joins per-subgraph partial
//!   results along each reference path.
//! * [`sim`] runs the whole pipeline as a deterministic message-passing
//!   cluster simulation with snapshot-isolated queries.
//! * [`workload`] generates reproducible update/query workloads and drives
//!   end-to-end benchmark and validation runs.
//!
//! All weights are fixed-point milli-units (see [`fixed`]), so distance
//! comparisons are exact and runs are bit-reproducible.

pub mod bounds;
pub mod candidate;
pub mod compact;
pub mod fixed;
pub mod graph;
pub mod ksp;
pub mod oracle;
pub mod partition;
pub mod pyen;
pub mod sim;
pub mod skeleton;
pub mod units;
pub mod workload;
