use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::UsageGraph;
use crate::project::ElementId;

/// Strongly connected components (iterative Tarjan). Returns the component
/// index of every node.
fn components(adj: &[BTreeSet<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut count = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, Vec<usize>)> = vec![(root, adj[root].iter().copied().collect())];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, pending)) = work.last_mut() {
            let v = *v;
            if let Some(w) = pending.pop() {
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, adj[w].iter().copied().collect()));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some((parent, _)) = work.last() {
                low[*parent] = low[*parent].min(low[v]);
            }
            if low[v] == index[v] {
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp[w] = count;
                    if w == v {
                        break;
                    }
                }
                count += 1;
            }
        }
    }
    (comp, count)
}

/// Usee-before-user order over all nodes. Self-loops are ignored. While a
/// cycle remains, the member of each strongly connected component with the
/// lexicographically smallest id loses its edges into that component. Ties
/// among ready nodes go to the earliest node in project order.
pub fn topological_order(graph: &UsageGraph) -> Vec<ElementId> {
    let nodes = graph.nodes();
    let n = nodes.len();
    let mut adj: Vec<BTreeSet<usize>> =
        (0..n).map(|u| graph.out_neighbors(u).filter(|&v| v != u).collect()).collect();

    loop {
        let (comp, count) = components(&adj);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
        for (v, &c) in comp.iter().enumerate() {
            members[c].push(v);
        }
        let mut broke = false;
        for group in members.iter().filter(|g| g.len() > 1) {
            let smallest = *group.iter().min_by(|a, b| nodes[**a].cmp(&nodes[**b])).expect("nonempty");
            let c = comp[smallest];
            adj[smallest].retain(|&w| comp[w] != c);
            broke = true;
        }
        if !broke {
            break;
        }
    }

    // Kahn's algorithm over "user waits for its usees".
    let mut waiting: Vec<usize> = adj.iter().map(BTreeSet::len).collect();
    let mut users_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, outs) in adj.iter().enumerate() {
        for &v in outs {
            users_of[v].push(u);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| waiting[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(nodes[v].clone());
        for &u in &users_of[v] {
            waiting[u] -= 1;
            if waiting[u] == 0 {
                ready.push(Reverse(u));
            }
        }
    }
    debug_assert_eq!(order.len(), n, "cycle breaking left a cycle");
    order
}
