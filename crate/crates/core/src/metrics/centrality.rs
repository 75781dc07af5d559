#![allow(clippy::needless_range_loop, clippy::type_complexity)]

use std::collections::VecDeque;

use super::{Convergence, IndexGraph, MetricParams, MetricsError};
use crate::scalar::Scalar;
use crate::scc;

/// In plus out degree, parallel edges counted.
pub fn degree<T: Scalar>(g: &IndexGraph) -> Vec<T> {
    (0..g.len())
        .map(|v| T::of_usize(g.in_edges[v] + g.out_edges[v]))
        .collect()
}

pub fn in_degree<T: Scalar>(g: &IndexGraph) -> Vec<T> {
    g.in_edges.iter().map(|&d| T::of_usize(d)).collect()
}

pub fn out_degree<T: Scalar>(g: &IndexGraph) -> Vec<T> {
    g.out_edges.iter().map(|&d| T::of_usize(d)).collect()
}

fn l1_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs())
}

fn l1_norm<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x.abs())
}

/// Power iteration with uniform teleport; mass on dangling nodes is spread
/// uniformly. Also returns the L1 residual of every step.
pub fn pagerank_history<T: Scalar>(
    g: &IndexGraph,
    params: &MetricParams<T>,
) -> Result<(Vec<T>, Vec<T>), MetricsError> {
    let n = g.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let nf = T::of_usize(n);
    let d = params.damping;
    let mut x = vec![T::one() / nf; n];
    let mut history = Vec::new();
    for _ in 0..params.max_iterations {
        let dangling = (0..n)
            .filter(|&v| g.out[v].is_empty())
            .fold(T::zero(), |acc, v| acc + x[v]);
        let base = (T::one() - d) / nf + d * dangling / nf;
        let mut next = vec![base; n];
        for v in 0..n {
            let out = &g.out[v];
            if out.is_empty() {
                continue;
            }
            let share = d * x[v] / T::of_usize(out.len());
            for &w in out {
                next[w] += share;
            }
        }
        let residual = l1_diff(&next, &x);
        history.push(residual);
        x = next;
        if residual < params.tolerance {
            return Ok((x, history));
        }
    }
    Err(MetricsError::NonConvergence {
        metric: "pagerank",
        iterations: params.max_iterations,
        residual: history.last().and_then(|r| r.to_f64()).unwrap_or(f64::NAN),
    })
}

pub fn pagerank<T: Scalar>(
    g: &IndexGraph,
    params: &MetricParams<T>,
) -> Result<(Vec<T>, Convergence<T>), MetricsError> {
    let (x, history) = pagerank_history(g, params)?;
    let convergence = Convergence {
        iterations: history.len(),
        residual: history.last().copied().unwrap_or_else(T::zero),
    };
    Ok((x, convergence))
}

/// Brandes' algorithm for unweighted directed graphs. Unnormalized, with
/// endpoints excluded.
pub fn betweenness<T: Scalar>(g: &IndexGraph) -> Vec<T> {
    let n = g.len();
    let mut cb = vec![T::zero(); n];
    let mut sigma = vec![T::zero(); n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![T::zero(); n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in 0..n {
        for v in 0..n {
            sigma[v] = T::zero();
            dist[v] = usize::MAX;
            delta[v] = T::zero();
            preds[v].clear();
        }
        order.clear();
        sigma[s] = T::one();
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &g.out[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] = sigma[w] + sigma[v];
                    preds[w].push(v);
                }
            }
        }
        for &w in order.iter().rev() {
            let dw = T::one() + delta[w];
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * dw;
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb
}

/// Upper bound on the spectral radius of the adjacency matrix: zero for
/// acyclic graphs, otherwise a Collatz-Wielandt bound from power iteration
/// on `A + I`.
pub fn spectral_radius_bound<T: Scalar>(g: &IndexGraph) -> T {
    let n = g.len();
    if !scc::cyclic_nodes(&g.out).iter().any(|&c| c) {
        return T::zero();
    }
    let mut x = vec![T::one(); n];
    let mut bound = T::infinity();
    for _ in 0..100 {
        let mut y = x.clone();
        for v in 0..n {
            for &w in &g.out[v] {
                y[v] += x[w];
            }
        }
        let ratio = (0..n).fold(T::zero(), |m, v| m.max(y[v] / x[v]));
        bound = bound.min(ratio);
        let norm = y.iter().fold(T::zero(), |m, &v| m.max(v));
        x = y.into_iter().map(|v| v / norm).collect();
    }
    (bound - T::one()).max(T::zero())
}

/// Default Katz attenuation: `0.85 / max(lambda, 1)` with `lambda` from
/// [`spectral_radius_bound`].
pub fn katz_alpha<T: Scalar>(g: &IndexGraph) -> T {
    T::of(0.85) / spectral_radius_bound::<T>(g).max(T::one())
}

/// Solves `x = alpha * A^T x + beta` by fixed-point iteration, so each node
/// accumulates attenuated walks ending at it.
pub fn katz<T: Scalar>(
    g: &IndexGraph,
    params: &MetricParams<T>,
) -> Result<(Vec<T>, Convergence<T>), MetricsError> {
    let n = g.len();
    let alpha = params.katz_alpha.unwrap_or_else(|| katz_alpha(g));
    if alpha <= T::zero() || alpha.is_nan() {
        return Err(MetricsError::InvalidParameter(format!(
            "katz alpha must be positive, got {alpha}"
        )));
    }
    let beta = params.katz_beta;
    let mut x = vec![beta; n];
    if n == 0 {
        return Ok((x, Convergence { iterations: 0, residual: T::zero() }));
    }
    let mut residual = T::infinity();
    for it in 1..=params.solver_max_iterations {
        let mut next = vec![beta; n];
        for v in 0..n {
            for &w in &g.out[v] {
                next[w] += alpha * x[v];
            }
        }
        let scale = l1_norm(&next).max(T::min_positive_value());
        residual = l1_diff(&next, &x) / scale;
        x = next;
        if !residual.is_finite() {
            break;
        }
        if residual < params.solver_tolerance {
            return Ok((x, Convergence { iterations: it, residual }));
        }
    }
    Err(MetricsError::NonConvergence {
        metric: "katz",
        iterations: params.solver_max_iterations,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

fn normalize_l2<T: Scalar>(v: &mut [T]) -> bool {
    let norm = v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if norm > T::zero() {
        v.iter_mut().for_each(|x| *x /= norm);
        true
    } else {
        false
    }
}

/// Alternating hub/authority updates with L2 normalization. Returns
/// `(hubs, authorities, convergence)`; edgeless graphs give zero vectors.
pub fn hits<T: Scalar>(
    g: &IndexGraph,
    params: &MetricParams<T>,
) -> Result<(Vec<T>, Vec<T>, Convergence<T>), MetricsError> {
    let n = g.len();
    let mut hubs = match &params.hits_start {
        Some(start) if start.len() == n => {
            if start.iter().any(|&x| x <= T::zero() || x.is_nan()) {
                return Err(MetricsError::InvalidParameter(
                    "hits start vector must be positive".into(),
                ));
            }
            start.clone()
        }
        Some(start) => {
            return Err(MetricsError::InvalidParameter(format!(
                "hits start vector has {} entries for {n} nodes",
                start.len()
            )))
        }
        None => vec![T::one(); n],
    };
    let mut auth = vec![T::zero(); n];
    if g.edge_count() == 0 {
        return Ok((
            vec![T::zero(); n],
            auth,
            Convergence { iterations: 0, residual: T::zero() },
        ));
    }
    normalize_l2(&mut hubs);
    let mut residual = T::infinity();
    for it in 1..=params.solver_max_iterations {
        let mut next_auth = vec![T::zero(); n];
        for v in 0..n {
            for &w in &g.out[v] {
                next_auth[w] += hubs[v];
            }
        }
        normalize_l2(&mut next_auth);
        let mut next_hubs = vec![T::zero(); n];
        for v in 0..n {
            next_hubs[v] = g.out[v].iter().fold(T::zero(), |acc, &w| acc + next_auth[w]);
        }
        normalize_l2(&mut next_hubs);
        residual = l1_diff(&next_hubs, &hubs) + l1_diff(&next_auth, &auth);
        hubs = next_hubs;
        auth = next_auth;
        if residual < params.solver_tolerance {
            return Ok((hubs, auth, Convergence { iterations: it, residual }));
        }
    }
    Err(MetricsError::NonConvergence {
        metric: "hits",
        iterations: params.solver_max_iterations,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Longest path length from any in-degree-0 component, on the condensation.
/// Members of one strongly connected component share its depth.
pub fn dag_depth_values<T: Scalar>(g: &IndexGraph) -> Vec<T> {
    let (of, comps) = scc::component_map(&g.out);
    let mut depth = vec![0usize; comps.len()];
    // Tarjan emits sinks first; walk sources first.
    for c in (0..comps.len()).rev() {
        for &v in &comps[c] {
            for &w in &g.out[v] {
                let cw = of[w];
                if cw != c {
                    depth[cw] = depth[cw].max(depth[c] + 1);
                }
            }
        }
    }
    of.iter().map(|&c| T::of_usize(depth[c])).collect()
}

/// Count of distinct nodes forward-reachable from each node, itself excluded.
pub fn reachability<T: Scalar>(g: &IndexGraph) -> Vec<T> {
    let n = g.len();
    let mut seen = vec![usize::MAX; n];
    let mut stack = Vec::new();
    (0..n)
        .map(|s| {
            let mut count = 0usize;
            seen[s] = s;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &g.out[v] {
                    if seen[w] != s {
                        seen[w] = s;
                        count += 1;
                        stack.push(w);
                    }
                }
            }
            T::of_usize(count)
        })
        .collect()
}
