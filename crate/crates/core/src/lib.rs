//! Distance-based partitioning of node-attributed graphs into connected,
//! non-overlapping τ-close clusters.
//!
//! The pipeline is:
//!
//! 1. load an [`AttributedGraph`] (edges, attribute table, attribute schema),
//! 2. derive the operational threshold `τ` and hop radius `l` from the
//!    attraction ratios `α_S` / `α_T` ([`tuning`]),
//! 3. optionally build bottom-k sketches of the `l`-neighborhoods ([`sketch`]),
//! 4. repeatedly grow clusters from random seeds until every node is assigned
//!    ([`clustering`]),
//! 5. score the result with WCSS and modularity ([`metrics`]).
//!
//! [`oracle`] holds brute-force reference implementations used to check the
//! fast paths, and [`synth`] generates planted-partition test graphs.

pub mod clustering;
pub mod distance;
mod error;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod sketch;
pub mod synth;
pub mod tuning;

pub use clustering::{Clustering, RunOptions, Variant};
pub use distance::{DistanceConfig, DistanceMode, Metric, TopologicalBackend};
pub use error::{Error, LoadError, Result};
pub use graph::{ActiveView, AttributeKind, AttributeSchema, AttributedGraph, SemanticVector};
pub use sketch::{BottomKSketch, SketchTable};
pub use tuning::{EmpiricalCdf, TuningReport};
