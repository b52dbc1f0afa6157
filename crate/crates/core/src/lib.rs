//! Fault-tolerant light spanners for finite doubling metrics.
//!
//! The pipeline normalizes a metric, builds a greedy net tree, collects cross
//! edges guided by a light spanner and sweeps the tree bottom-up, joining
//! surrogate sets of cross-edge endpoints. [`verify`] audits the result under
//! vertex faults.

pub mod baseline;
pub mod construct;
pub mod error;
pub mod gen;
pub mod metric;
pub mod net_tree;
pub mod surrogate;
pub mod verify;

pub use baseline::{light_spanner, lightness, mst, shortest_dist, Edge, WeightedGraph, UNREACHABLE};
pub use construct::{
    bipartite_connection, build_ft_spanner, classify_lnf, Build, BuildReport, Config, Constants, CrossEdgeStore,
    EdgeClass, Profile, Provenance, SpannerGraph,
};
pub use error::{Error, Result};
pub use metric::{load_points, InputFormat, Metric, PointId};
pub use net_tree::{CrossEdge, CrossNeighbors, NetTree, NodeId};
pub use surrogate::{Counters, PointClass};
pub use verify::{AuditReport, Bounds};
