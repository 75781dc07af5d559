//! Node metrics and clusterings over skeleton graphs.
//!
//! Every computation can be restricted to the nodes of one source; the
//! restriction drops cross-source edges, so adding such an edge never
//! changes a per-source result.
//!
//! All functions are generic over the [`Scalar`] they compute in.

mod centrality;
mod community;
pub mod linalg;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::leannets::{SkeletonGraph, Source};
use crate::scalar::Scalar;
use crate::store::HashId;

pub use centrality::{
    betweenness, dag_depth_values, degree, hits, in_degree, katz, katz_alpha, out_degree,
    pagerank, pagerank_history, reachability, spectral_radius_bound,
};
pub use community::{
    by_labels, greedy_modularity, louvain, modularity, spectral, UndirectedGraph,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown clustering method `{0}`")]
    UnknownMethod(String),
    #[error("{metric} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        metric: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("cannot form {k} clusters from {nodes} nodes")]
    EmptyGraph { k: usize, nodes: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::UnknownMetric(_) => "unknown_metric",
            MetricsError::UnknownMethod(_) => "unknown_method",
            MetricsError::NonConvergence { .. } => "non_convergence",
            MetricsError::EmptyGraph { .. } => "empty_graph",
            MetricsError::InvalidParameter(_) => "invalid_parameter",
        }
    }
}

/// Compact directed graph over node indices `0..n`.
///
/// Adjacency lists are deduplicated and ascending; the multi-edge counts
/// are kept separately for the degree metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexGraph {
    out: Vec<Vec<usize>>,
    inn: Vec<Vec<usize>>,
    out_edges: Vec<usize>,
    in_edges: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl IndexGraph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        let mut out_edges = vec![0; n];
        let mut in_edges = vec![0; n];
        let edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(u, v) in &edges {
            out[u].push(v);
            inn[v].push(u);
            out_edges[u] += 1;
            in_edges[v] += 1;
        }
        for list in out.iter_mut().chain(inn.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        IndexGraph {
            out,
            inn,
            out_edges,
            in_edges,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    /// Distinct successors, ascending.
    pub fn successors(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.inn[v]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.out
    }

    /// Edge count with parallel edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as given, parallel edges included.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// A skeleton graph flattened to indices, ids sorted ascending.
#[derive(Debug, Clone)]
pub struct IndexedSkeleton {
    pub ids: Vec<HashId>,
    pub graph: IndexGraph,
}

impl IndexedSkeleton {
    pub fn new(skeleton: &SkeletonGraph, source: Option<Source>) -> Self {
        let restricted;
        let skeleton = match source {
            Some(s) => {
                restricted = skeleton.restrict_to_source(s);
                &restricted
            }
            None => skeleton,
        };
        let ids: Vec<HashId> = skeleton.nodes().keys().cloned().collect();
        let index: BTreeMap<&HashId, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let graph = IndexGraph::from_edges(
            ids.len(),
            skeleton
                .edges()
                .iter()
                .map(|e| (index[&e.from], index[&e.to])),
        );
        IndexedSkeleton { ids, graph }
    }

    fn label<T>(&self, values: Vec<T>) -> BTreeMap<HashId, T> {
        self.ids.iter().cloned().zip(values).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Degree,
    InDegree,
    OutDegree,
    Pagerank,
    Betweenness,
    Katz,
    HitsHub,
    HitsAuthority,
    DagDepth,
    Reachability,
}

impl MetricName {
    pub const ALL: [MetricName; 10] = [
        MetricName::Degree,
        MetricName::InDegree,
        MetricName::OutDegree,
        MetricName::Pagerank,
        MetricName::Betweenness,
        MetricName::Katz,
        MetricName::HitsHub,
        MetricName::HitsAuthority,
        MetricName::DagDepth,
        MetricName::Reachability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Degree => "degree",
            MetricName::InDegree => "in_degree",
            MetricName::OutDegree => "out_degree",
            MetricName::Pagerank => "pagerank",
            MetricName::Betweenness => "betweenness",
            MetricName::Katz => "katz",
            MetricName::HitsHub => "hits_hub",
            MetricName::HitsAuthority => "hits_authority",
            MetricName::DagDepth => "dag_depth",
            MetricName::Reachability => "reachability",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MetricsError::UnknownMetric(s.to_string()))
    }
}

/// Parameters of the iterative metrics. Non-iterative metrics ignore them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricParams<T> {
    /// PageRank damping factor.
    pub damping: T,
    /// PageRank L1 residual tolerance.
    pub tolerance: T,
    /// PageRank iteration cap.
    pub max_iterations: usize,
    /// Katz attenuation; `None` picks `0.85 / max(lambda_max, 1)`.
    pub katz_alpha: Option<T>,
    pub katz_beta: T,
    /// Relative L1 tolerance for the Katz and HITS solvers.
    pub solver_tolerance: T,
    pub solver_max_iterations: usize,
    /// Initial hub vector for HITS, aligned with ascending node ids.
    #[serde(skip)]
    pub hits_start: Option<Vec<T>>,
}

impl<T: Scalar> Default for MetricParams<T> {
    fn default() -> Self {
        MetricParams {
            damping: T::of(0.85),
            tolerance: T::default_tolerance(),
            max_iterations: 200,
            katz_alpha: None,
            katz_beta: T::one(),
            solver_tolerance: T::solver_tolerance(),
            solver_max_iterations: 10_000,
            hits_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence<T> {
    pub iterations: usize,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricVector<T> {
    pub name: MetricName,
    pub params: MetricParams<T>,
    pub values: BTreeMap<HashId, T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence<T>>,
}

/// Computes one named metric on the skeleton, or on one source's induced
/// subgraph when `source` is given.
pub fn compute_metric<T: Scalar>(
    skeleton: &SkeletonGraph,
    name: MetricName,
    params: &MetricParams<T>,
    source: Option<Source>,
) -> Result<MetricVector<T>, MetricsError> {
    let indexed = IndexedSkeleton::new(skeleton, source);
    let g = &indexed.graph;
    let mut convergence = None;
    let values: Vec<T> = match name {
        MetricName::Degree => degree(g),
        MetricName::InDegree => in_degree(g),
        MetricName::OutDegree => out_degree(g),
        MetricName::Pagerank => {
            let (values, conv) = pagerank(g, params)?;
            convergence = Some(conv);
            values
        }
        MetricName::Betweenness => betweenness(g),
        MetricName::Katz => {
            let (values, conv) = katz(g, params)?;
            convergence = Some(conv);
            values
        }
        MetricName::HitsHub | MetricName::HitsAuthority => {
            let (hubs, authorities, conv) = hits(g, params)?;
            convergence = Some(conv);
            if name == MetricName::HitsHub {
                hubs
            } else {
                authorities
            }
        }
        MetricName::DagDepth => dag_depth_values(g),
        MetricName::Reachability => reachability(g),
    };
    Ok(MetricVector {
        name,
        params: params.clone(),
        values: indexed.label(values),
        source,
        convergence,
    })
}

/// Longest path from an in-degree-0 component, on the condensation.
pub fn dag_depth<T: Scalar>(skeleton: &SkeletonGraph, source: Option<Source>) -> MetricVector<T> {
    compute_metric(skeleton, MetricName::DagDepth, &MetricParams::default(), source)
        .expect("dag depth is infallible")
}

/// Number of nodes forward-reachable from each node, itself excluded.
pub fn reachability_count<T: Scalar>(
    skeleton: &SkeletonGraph,
    source: Option<Source>,
) -> MetricVector<T> {
    compute_metric(skeleton, MetricName::Reachability, &MetricParams::default(), source)
        .expect("reachability is infallible")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    Louvain,
    GreedyModularity,
    Spectral,
    BySort,
    ByDepth,
}

impl ClusterMethod {
    pub const ALL: [ClusterMethod; 5] = [
        ClusterMethod::Louvain,
        ClusterMethod::GreedyModularity,
        ClusterMethod::Spectral,
        ClusterMethod::BySort,
        ClusterMethod::ByDepth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterMethod::Louvain => "louvain",
            ClusterMethod::GreedyModularity => "greedy_modularity",
            ClusterMethod::Spectral => "spectral",
            ClusterMethod::BySort => "by_sort",
            ClusterMethod::ByDepth => "by_depth",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClusterMethod {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClusterMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MetricsError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ClusterParams {
    /// Spectral cluster count; defaults to `min(2, nodes)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering<T> {
    pub method: ClusterMethod,
    pub params: ClusterParams,
    /// Labels are contiguous from 0, numbered by first appearance in
    /// ascending node id order (ascending depth for `by_depth`).
    pub assignment: BTreeMap<HashId, usize>,
    /// Modularity of the partition; absent on edgeless graphs.
    pub quality: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
}

impl<T> Clustering<T> {
    pub fn cluster_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }
}

/// Renumbers arbitrary labels to `0..` in order of first appearance.
pub fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

pub fn cluster<T: Scalar>(
    skeleton: &SkeletonGraph,
    method: ClusterMethod,
    params: &ClusterParams,
    source: Option<Source>,
) -> Result<Clustering<T>, MetricsError> {
    let indexed = IndexedSkeleton::new(skeleton, source);
    let n = indexed.ids.len();
    let undirected = UndirectedGraph::<T>::symmetrize(&indexed.graph);
    let labels = match method {
        ClusterMethod::Louvain => louvain(&undirected, params.seed),
        ClusterMethod::GreedyModularity => greedy_modularity(&undirected),
        ClusterMethod::Spectral => {
            let k = params.k.unwrap_or(n.min(2));
            if k > n {
                return Err(MetricsError::EmptyGraph { k, nodes: n });
            }
            if k == 0 && n > 0 {
                return Err(MetricsError::InvalidParameter("k must be at least 1".into()));
            }
            spectral(&undirected, k, params.seed)
        }
        ClusterMethod::BySort => {
            let sorts: Vec<usize> = indexed
                .ids
                .iter()
                .map(|id| skeleton.node(id.as_str()).map_or(usize::MAX, |f| f.effective_sort() as usize))
                .collect();
            relabel(&sorts)
        }
        ClusterMethod::ByDepth => {
            let depths: Vec<T> = dag_depth_values(&indexed.graph);
            let depths: Vec<usize> = depths.iter().map(|d| d.to_usize().unwrap_or(0)).collect();
            by_labels(&depths)
        }
    };
    let quality = (undirected.total_weight() > T::zero()).then(|| modularity(&undirected, &labels));
    Ok(Clustering {
        method,
        params: params.clone(),
        assignment: indexed.label(labels),
        quality,
        source,
    })
}
