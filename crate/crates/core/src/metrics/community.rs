use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::{kmeans, symmetric_eigen};
use super::{relabel, IndexGraph};
use crate::scalar::Scalar;

/// Weighted undirected graph. Each directed edge contributes weight one in
/// both directions; a self-loop contributes two to the diagonal.
#[derive(Debug, Clone)]
pub struct UndirectedGraph<T> {
    adj: Vec<BTreeMap<usize, T>>,
    degree: Vec<T>,
    total: T,
}

impl<T: Scalar> UndirectedGraph<T> {
    pub fn symmetrize(g: &IndexGraph) -> Self {
        Self::from_weighted(g.len(), g.edges().iter().map(|&(u, v)| (u, v, T::one())))
    }

    pub fn from_weighted(n: usize, edges: impl IntoIterator<Item = (usize, usize, T)>) -> Self {
        let mut adj = vec![BTreeMap::new(); n];
        let mut degree = vec![T::zero(); n];
        let mut total = T::zero();
        for (u, v, w) in edges {
            *adj[u].entry(v).or_insert_with(T::zero) += w;
            *adj[v].entry(u).or_insert_with(T::zero) += w;
            degree[u] += w;
            degree[v] += w;
            total += w;
        }
        UndirectedGraph { adj, degree, total }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Sum of edge weights, `m`.
    pub fn total_weight(&self) -> T {
        self.total
    }

    pub fn weight(&self, u: usize, v: usize) -> T {
        self.adj[u].get(&v).copied().unwrap_or_else(T::zero)
    }

    pub fn degree(&self, v: usize) -> T {
        self.degree[v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.adj[v].iter().map(|(&w, &x)| (w, x))
    }
}

/// Newman modularity of a labelling. Zero on edgeless graphs.
pub fn modularity<T: Scalar>(g: &UndirectedGraph<T>, labels: &[usize]) -> T {
    let m = g.total;
    if m <= T::zero() {
        return T::zero();
    }
    let two_m = m + m;
    let mut internal: BTreeMap<usize, T> = BTreeMap::new();
    let mut totals: BTreeMap<usize, T> = BTreeMap::new();
    for u in 0..g.len() {
        *totals.entry(labels[u]).or_insert_with(T::zero) += g.degree[u];
        for (v, w) in g.neighbors(u) {
            if labels[u] == labels[v] {
                *internal.entry(labels[u]).or_insert_with(T::zero) += w;
            }
        }
    }
    totals.iter().fold(T::zero(), |q, (c, &tot)| {
        let inside = internal.get(c).copied().unwrap_or_else(T::zero);
        q + inside / two_m - (tot / two_m) * (tot / two_m)
    })
}

/// Groups nodes by an integer key; clusters are numbered by ascending key.
pub fn by_labels(keys: &[usize]) -> Vec<usize> {
    let ranks: BTreeMap<usize, usize> = keys
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    keys.iter().map(|k| ranks[k]).collect()
}

/// One local-moving pass of Louvain. Returns the community of every node
/// and whether anything moved.
fn local_moving<T: Scalar>(g: &UndirectedGraph<T>, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = g.len();
    let two_m = g.total + g.total;
    let mut community: Vec<usize> = (0..n).collect();
    let mut tot: Vec<T> = g.degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let eps = T::epsilon() * T::of(16.0);
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &v in &order {
            let k = g.degree[v];
            let own = community[v];
            let mut links: BTreeMap<usize, T> = BTreeMap::new();
            for (w, x) in g.neighbors(v) {
                if w != v {
                    *links.entry(community[w]).or_insert_with(T::zero) += x;
                }
            }
            tot[own] -= k;
            let gain = |c: usize, links: &BTreeMap<usize, T>| {
                links.get(&c).copied().unwrap_or_else(T::zero) - tot[c] * k / two_m
            };
            let mut best = own;
            let mut best_gain = gain(own, &links);
            for &c in links.keys() {
                let g_c = gain(c, &links);
                if g_c > best_gain + eps {
                    best = c;
                    best_gain = g_c;
                }
            }
            tot[best] += k;
            if best != own {
                community[v] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    (community, moved_any)
}

/// Louvain modularity optimization. Node visiting order is shuffled with
/// the seed, so results are reproducible for a fixed seed.
pub fn louvain<T: Scalar>(g: &UndirectedGraph<T>, seed: u64) -> Vec<usize> {
    let n = g.len();
    let mut membership: Vec<usize> = (0..n).collect();
    if g.total <= T::zero() {
        return membership;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = g.clone();
    loop {
        let (community, moved) = local_moving(&level, &mut rng);
        if !moved {
            break;
        }
        let dense = relabel(&community);
        let count = dense.iter().max().map_or(0, |m| m + 1);
        for m in membership.iter_mut() {
            *m = dense[*m];
        }
        let mut edges = Vec::new();
        for u in 0..level.len() {
            for (v, w) in level.neighbors(u) {
                // Each undirected pair once; the diagonal already holds both halves.
                if u < v {
                    edges.push((dense[u], dense[v], w));
                } else if u == v {
                    edges.push((dense[u], dense[u], w / T::of(2.0)));
                }
            }
        }
        level = UndirectedGraph::from_weighted(count, edges);
        if count == 1 {
            break;
        }
    }
    relabel(&membership)
}

/// Clauset-Newman-Moore agglomeration: merge the connected pair of
/// communities with the largest modularity gain while the gain is positive.
pub fn greedy_modularity<T: Scalar>(g: &UndirectedGraph<T>) -> Vec<usize> {
    let n = g.len();
    let mut membership: Vec<usize> = (0..n).collect();
    if g.total <= T::zero() {
        return membership;
    }
    let two_m = g.total + g.total;
    // e[i][j]: fraction of edge ends joining communities i and j (i != j).
    let mut e: Vec<BTreeMap<usize, T>> = (0..n)
        .map(|u| {
            g.neighbors(u)
                .filter(|&(v, _)| v != u)
                .map(|(v, w)| (v, w / two_m))
                .collect()
        })
        .collect();
    let mut a: Vec<T> = g.degree.iter().map(|&d| d / two_m).collect();
    let mut alive: Vec<bool> = vec![true; n];
    let eps = T::epsilon() * T::of(16.0);
    loop {
        let mut best: Option<(T, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for (&j, &eij) in &e[i] {
                if j <= i {
                    continue;
                }
                let dq = (eij - a[i] * a[j]) * T::of(2.0);
                if best.is_none_or(|(b, _, _)| dq > b + eps) {
                    best = Some((dq, i, j));
                }
            }
        }
        let Some((dq, i, j)) = best else { break };
        if dq <= eps {
            break;
        }
        // Merge j into i.
        let ej = std::mem::take(&mut e[j]);
        for (k, w) in ej {
            if k == i {
                continue;
            }
            *e[i].entry(k).or_insert_with(T::zero) += w;
            let row = &mut e[k];
            row.remove(&j);
            *row.entry(i).or_insert_with(T::zero) += w;
        }
        e[i].remove(&j);
        a[i] = a[i] + a[j];
        a[j] = T::zero();
        alive[j] = false;
        for m in membership.iter_mut() {
            if *m == j {
                *m = i;
            }
        }
    }
    relabel(&membership)
}

/// Spectral clustering: the `k` eigenvectors of the symmetric normalized
/// Laplacian with the smallest eigenvalues, rows normalized to unit length,
/// then seeded k-means.
pub fn spectral<T: Scalar>(g: &UndirectedGraph<T>, k: usize, seed: u64) -> Vec<usize> {
    let n = g.len();
    if n == 0 {
        return Vec::new();
    }
    let inv_sqrt: Vec<T> = g
        .degree
        .iter()
        .map(|&d| if d > T::zero() { T::one() / d.sqrt() } else { T::zero() })
        .collect();
    let mut lap = vec![T::zero(); n * n];
    for u in 0..n {
        if g.degree[u] > T::zero() {
            lap[u * n + u] = T::one();
        }
        for (v, w) in g.neighbors(u) {
            lap[u * n + v] -= w * inv_sqrt[u] * inv_sqrt[v];
        }
    }
    let (_, vectors) = symmetric_eigen(&lap, n);
    let mut rows = vec![T::zero(); n * k];
    for u in 0..n {
        let row = &mut rows[u * k..(u + 1) * k];
        for (c, x) in row.iter_mut().enumerate() {
            *x = vectors[u * n + c];
        }
        let norm = row.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
        if norm > T::zero() {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    relabel(&kmeans(&rows, k, k, seed))
}
