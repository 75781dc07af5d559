#![allow(dead_code)]

use astrolabe_core::{HashId, HashMode, Nerve, SkeletonGraph, Store};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

pub fn label(i: usize) -> HashId {
    HashId::new(format!("n{i:02}"))
}

/// Random structural-mode store with labelled ids. Nerves reference
/// earlier nerves only, unless `cycle_p` rewires one ref of a non-atom to a
/// later nerve, which may close a reference cycle.
pub fn random_store(rng: &mut impl Rng, max_nerves: usize, cycle_p: f64) -> Store {
    let n = rng.gen_range(1..=max_nerves);
    let atoms = rng.gen_range(2..=6).min(n);
    let mut refs: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        if i < atoms {
            refs.push(vec![i]);
            continue;
        }
        let width = rng.gen_range(1..=3usize.min(i - 1));
        let mut pool: Vec<usize> = (0..i).collect();
        pool.shuffle(rng);
        refs.push(pool.into_iter().take(width + 1).collect());
    }
    if n > atoms + 1 && rng.gen_bool(cycle_p) {
        let lo = rng.gen_range(atoms..n - 1);
        let hi = rng.gen_range(lo + 1..n);
        let slot = rng.gen_range(0..refs[lo].len());
        if !refs[lo].contains(&hi) {
            refs[lo][slot] = hi;
        }
    }
    let mut store = Store::new(HashMode::Structural);
    for (i, r) in refs.iter().enumerate() {
        store.insert_unchecked(Nerve {
            id: label(i),
            refs: r.iter().map(|&j| label(j)).collect(),
            record: String::new(),
        });
    }
    store
}

/// Store with `n` atoms `v0..` of the given sources and one width-1 nerve
/// per listed edge.
pub fn graph_store(sources: &[&str], edges: &[(usize, usize)]) -> (Store, Vec<HashId>) {
    let mut store = Store::new(HashMode::Strict);
    let ids: Vec<HashId> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            store
                .insert_atom(&format!(r#"{{"sort":"theorem","source":"{s}","title":"v{i}"}}"#))
                .unwrap()
        })
        .collect();
    for (k, &(u, v)) in edges.iter().enumerate() {
        store
            .insert_nerve(&format!("edge {k}"), &[ids[u].clone(), ids[v].clone()])
            .unwrap();
    }
    (store, ids)
}

pub fn skeleton_of(sources: &[&str], edges: &[(usize, usize)]) -> (SkeletonGraph, Vec<HashId>) {
    let (store, ids) = graph_store(sources, edges);
    (astrolabe_core::extract_skeleton(&store), ids)
}

/// All `(u, v)` pairs with `u != v` over `n` nodes, in a fixed order.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v {
                pairs.push((u, v));
            }
        }
    }
    pairs
}

pub fn edges_of_mask(pairs: &[(usize, usize)], mask: u64) -> Vec<(usize, usize)> {
    pairs
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &p)| p)
        .collect()
}
