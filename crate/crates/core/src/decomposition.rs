//! Width and depth decompositions of a store.
//!
//! Width is local: `len(ref) - 1`. Depth comes from the filtration
//! `A(0) ⊆ A(1) ⊆ ...` where `A(0)` holds the atoms and `A(m+1)` holds every
//! nerve whose references all lie in `A(m)`. Nerves never admitted get depth
//! `-1`; they are exactly the nerves that can reach a reference cycle.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::scc;
use crate::store::{HashId, Store};

/// Depth sentinel for nerves trapped behind a reference cycle.
pub const CYCLIC_DEPTH: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WidthProfile {
    pub widths: BTreeMap<HashId, usize>,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn width_profile(store: &Store) -> WidthProfile {
    let mut widths = BTreeMap::new();
    let mut histogram = BTreeMap::new();
    for nerve in store.iter() {
        let w = nerve.width();
        widths.insert(nerve.id.clone(), w);
        *histogram.entry(w).or_insert(0) += 1;
    }
    WidthProfile { widths, histogram }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DepthAssignment {
    pub depths: BTreeMap<HashId, i64>,
    /// Smallest `N` with `A(N) = A(N+1)`.
    pub stabilization_stage: usize,
}

impl DepthAssignment {
    pub fn depth(&self, id: &str) -> Option<i64> {
        self.depths.get(id).copied()
    }

    /// Members of `A(m)`: every nerve with finite depth at most `m`.
    pub fn stage(&self, m: usize) -> BTreeSet<HashId> {
        self.depths
            .iter()
            .filter(|(_, &d)| d >= 0 && d as usize <= m)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn undepthed(&self) -> BTreeSet<HashId> {
        self.depths
            .iter()
            .filter(|(_, &d)| d == CYCLIC_DEPTH)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Computes every nerve's depth with a worklist over the reverse-reference
/// index, in time linear in the total reference length.
///
/// A nerve of positive width is admitted once all of its distinct references
/// are admitted, at one stage past the deepest of them.
pub fn depth_filtration(store: &Store) -> DepthAssignment {
    let ids: Vec<&HashId> = store.ids().collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let n = ids.len();

    let mut depth = vec![CYCLIC_DEPTH; n];
    let mut pending = vec![0usize; n];
    let mut deepest = vec![0i64; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut queue = VecDeque::new();

    for (i, nerve) in store.iter().enumerate() {
        if nerve.width() == 0 {
            depth[i] = 0;
            queue.push_back(i);
            continue;
        }
        let distinct: BTreeSet<&str> = nerve.refs.iter().map(HashId::as_str).collect();
        let mut resolvable = true;
        for r in &distinct {
            match index.get(r) {
                Some(&j) => dependents[j].push(i),
                None => resolvable = false,
            }
        }
        // A dangling reference can never be admitted; leave pending above the
        // number of decrements it can receive.
        pending[i] = distinct.len() + usize::from(!resolvable);
    }

    while let Some(r) = queue.pop_front() {
        for &e in &dependents[r] {
            pending[e] -= 1;
            deepest[e] = deepest[e].max(depth[r]);
            if pending[e] == 0 {
                depth[e] = deepest[e] + 1;
                queue.push_back(e);
            }
        }
    }

    let stabilization_stage = depth.iter().copied().max().unwrap_or(0).max(0) as usize;
    DepthAssignment {
        depths: ids.into_iter().cloned().zip(depth).collect(),
        stabilization_stage,
    }
}

/// A finite reference chain from a nerve to a reference cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleWitness {
    /// Starts at the witnessed nerve and ends at the first cycle node reached.
    pub path: Vec<HashId>,
    /// The cycle through the last path node, starting with that node; the
    /// last element references the first.
    pub cycle: Vec<HashId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UndepthedSet {
    /// `None` only when a dangling reference (a closure violation) is what
    /// kept the nerve out of the filtration.
    pub members: BTreeMap<HashId, Option<CycleWitness>>,
}

impl UndepthedSet {
    pub fn ids(&self) -> BTreeSet<HashId> {
        self.members.keys().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// The nerves of depth `-1` together with a shortest witness chain to a
/// cycle. Neighbours are explored in ascending id order so the witness is
/// deterministic.
pub fn undepthed_set(store: &Store, assignment: &DepthAssignment) -> UndepthedSet {
    let members: Vec<HashId> = assignment.undepthed().into_iter().collect();
    let index: HashMap<&str, usize> = members
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let adj: Vec<Vec<usize>> = members
        .iter()
        .map(|id| {
            let mut out: Vec<usize> = store
                .get(id.as_str())
                .map(|n| {
                    n.refs
                        .iter()
                        .filter_map(|r| index.get(r.as_str()).copied())
                        .collect()
                })
                .unwrap_or_default();
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();
    let on_cycle = scc::cyclic_nodes(&adj);

    let witness = |start: usize| -> Option<CycleWitness> {
        let entry_path = if on_cycle[start] {
            vec![start]
        } else {
            bfs_path(&adj, start, |v| on_cycle[v])?
        };
        let entry = *entry_path.last()?;
        let cycle = shortest_cycle(&adj, entry)?;
        Some(CycleWitness {
            path: entry_path.into_iter().map(|i| members[i].clone()).collect(),
            cycle: cycle.into_iter().map(|i| members[i].clone()).collect(),
        })
    };

    UndepthedSet {
        members: (0..members.len())
            .map(|i| (members[i].clone(), witness(i)))
            .collect(),
    }
}

fn bfs_parents(adj: &[Vec<usize>], start: usize) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut parent = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    (parent, order)
}

fn unwind(parent: &[Option<usize>], mut v: usize, stop: usize) -> Vec<usize> {
    let mut path = vec![v];
    while v != stop {
        v = parent[v].expect("bfs tree is connected to its root");
        path.push(v);
    }
    path.reverse();
    path
}

fn bfs_path(adj: &[Vec<usize>], start: usize, goal: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
    let (parent, order) = bfs_parents(adj, start);
    let target = order.into_iter().find(|&v| goal(v))?;
    Some(unwind(&parent, target, start))
}

/// Shortest cycle through `v`: a shortest path from `v` to some node that
/// references `v`.
fn shortest_cycle(adj: &[Vec<usize>], v: usize) -> Option<Vec<usize>> {
    let (parent, order) = bfs_parents(adj, v);
    let closing = order.into_iter().find(|&u| adj[u].contains(&v))?;
    Some(unwind(&parent, closing, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::HashMode;

    fn layered() -> Store {
        Store::from_json_str(
            include_str!("../tests/fixtures/layered.json"),
            HashMode::Structural,
        )
        .unwrap()
    }

    #[test]
    fn layered_widths() {
        let profile = width_profile(&layered());
        for (id, w) in [
            ("a1", 0),
            ("a4", 0),
            ("e1", 1),
            ("f2", 1),
            ("m1", 1),
            ("c3", 1),
            ("f1", 2),
            ("m2", 2),
        ] {
            assert_eq!(profile.widths[id], w, "{id}");
        }
        assert_eq!(profile.histogram, BTreeMap::from([(0, 4), (1, 9), (2, 2)]));
    }

    #[test]
    fn layered_depths() {
        let depths = depth_filtration(&layered());
        let expected = [
            ("a1", 0),
            ("a2", 0),
            ("a3", 0),
            ("a4", 0),
            ("e1", 1),
            ("e2", 1),
            ("e3", 1),
            ("e4", 1),
            ("f1", 2),
            ("f2", 2),
            ("m1", 3),
            ("m2", 4),
            ("c1", -1),
            ("c2", -1),
            ("c3", -1),
        ];
        for (id, d) in expected {
            assert_eq!(depths.depth(id), Some(d), "{id}");
        }
        assert_eq!(depths.stabilization_stage, 4);
        assert_eq!(depths.stage(4), depths.stage(5));
    }

    #[test]
    fn layered_cycle_witnesses() {
        let store = layered();
        let u = undepthed_set(&store, &depth_filtration(&store));
        assert_eq!(u.ids().len(), 3);
        let w = u.members["c1"].as_ref().unwrap();
        assert_eq!(w.path, [HashId::from("c1")]);
        assert_eq!(w.cycle, ["c1".into(), "c2".into(), HashId::from("c3")]);
    }

    #[test]
    fn tail_into_cycle() {
        let mut store = layered();
        store.insert_unchecked(crate::store::Nerve {
            id: "t".into(),
            refs: vec!["a4".into(), "c2".into()],
            record: String::new(),
        });
        let depths = depth_filtration(&store);
        assert_eq!(depths.depth("t"), Some(-1));
        let u = undepthed_set(&store, &depths);
        let w = u.members["t"].as_ref().unwrap();
        assert_eq!(w.path, ["t".into(), HashId::from("c2")]);
        assert_eq!(w.cycle, ["c2".into(), "c3".into(), HashId::from("c1")]);
    }

    #[test]
    fn atoms_only() {
        let mut store = Store::new(HashMode::Strict);
        store.insert_atom("x").unwrap();
        store.insert_atom("y").unwrap();
        let depths = depth_filtration(&store);
        assert!(depths.depths.values().all(|&d| d == 0));
        assert_eq!(depths.stabilization_stage, 0);
        assert!(undepthed_set(&store, &depths).is_empty());
    }

    #[test]
    fn empty_store() {
        let store = Store::new(HashMode::Strict);
        let depths = depth_filtration(&store);
        assert!(depths.depths.is_empty());
        assert_eq!(depths.stabilization_stage, 0);
    }

    #[test]
    fn dangling_reference_has_no_witness() {
        let mut store = Store::new(HashMode::Structural);
        store.insert_unchecked(crate::store::Nerve {
            id: "a".into(),
            refs: vec!["a".into()],
            record: String::new(),
        });
        store.insert_unchecked(crate::store::Nerve {
            id: "e".into(),
            refs: vec!["a".into(), "ghost".into()],
            record: String::new(),
        });
        let depths = depth_filtration(&store);
        assert_eq!(depths.depth("e"), Some(-1));
        assert_eq!(undepthed_set(&store, &depths).members["e"], None);
    }
}
