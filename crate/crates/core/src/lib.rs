//! Content-addressed hypergraph store for mathematical knowledge.
//!
//! A store maps short SHA-256 ids to nerves: a record string plus an
//! ordered list of references. Atoms reference only themselves; a nerve of
//! width `w` references `w + 1` distinct existing nerves. On top of the
//! store sit the width and depth decompositions, the math-network plugin
//! ([`leannets`]), source ingestion and a metrics engine.

pub mod decomposition;
pub mod ingest;
pub mod leannets;
pub mod metrics;
pub mod scalar;
pub mod scc;
pub mod store;

pub use decomposition::{
    depth_filtration, undepthed_set, width_profile, CycleWitness, DepthAssignment, UndepthedSet,
    WidthProfile, CYCLIC_DEPTH,
};
pub use leannets::{
    extract_skeleton, parse_record, propagate, AffectedSet, Direction, RecordFields, SkeletonGraph,
    Sort, Source,
};
pub use metrics::{
    cluster, compute_metric, ClusterMethod, ClusterParams, MetricName, MetricsError,
};
pub use scalar::Scalar;
pub use store::{compute_id, HashId, HashMode, Nerve, Store, StoreError, StoreLock};

pub type MetricVectorF64 = metrics::MetricVector<f64>;
pub type MetricVectorF32 = metrics::MetricVector<f32>;
pub type MetricParamsF64 = metrics::MetricParams<f64>;
pub type MetricParamsF32 = metrics::MetricParams<f32>;
pub type ClusteringF64 = metrics::Clustering<f64>;
pub type ClusteringF32 = metrics::Clustering<f32>;
