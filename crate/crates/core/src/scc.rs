//! Strongly connected components over index adjacency lists.

/// Tarjan's algorithm, iterative so deep chains cannot overflow the stack.
///
/// Components are returned in reverse topological order of the condensation
/// (a component is emitted after every component it can reach).
pub fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0usize;
    // (node, position in its adjacency list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&(v, pos)) = call.last() {
            if pos == 0 && index[v] == usize::MAX {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(pos) {
                if let Some(top) = call.last_mut() {
                    top.1 += 1;
                }
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// Component index of every node, plus the component list.
pub fn component_map(adj: &[Vec<usize>]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let comps = tarjan(adj);
    let mut of = vec![0; adj.len()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            of[v] = c;
        }
    }
    (of, comps)
}

/// Nodes lying on some directed cycle: members of components with more than
/// one node, or single nodes with a self-loop.
pub fn cyclic_nodes(adj: &[Vec<usize>]) -> Vec<bool> {
    let mut cyclic = vec![false; adj.len()];
    for comp in tarjan(adj) {
        let nontrivial = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
        if nontrivial {
            for v in comp {
                cyclic[v] = true;
            }
        }
    }
    cyclic
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cycle_and_tail() {
        // 0 -> 1 -> 2 -> 0, 3 -> 0
        let adj = vec![vec![1], vec![2], vec![0], vec![0]];
        let comps = tarjan(&adj);
        assert_eq!(comps.len(), 2);
        assert!(comps.contains(&vec![0, 1, 2]));
        assert_eq!(cyclic_nodes(&adj), [true, true, true, false]);
    }

    #[test]
    fn reverse_topological_order() {
        // 0 -> 1 -> 2
        let comps = tarjan(&[vec![1], vec![2], vec![]]);
        assert_eq!(comps, [vec![2], vec![1], vec![0]]);
    }

    #[test]
    fn long_chain_does_not_overflow() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| if i + 1 < n { vec![i + 1] } else { vec![] })
            .collect();
        assert_eq!(tarjan(&adj).len(), n);
    }
}
