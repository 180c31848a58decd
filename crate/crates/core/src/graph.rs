//! Strongly connected components on adjacency lists.

/// Tarjan's algorithm, iterative. Components are returned in reverse
/// topological order (sinks first).
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0usize;
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*i) {
                *i += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
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
                out.push(comp);
            }
        }
    }
    out
}

/// Component id of every vertex.
pub fn component_ids(n: usize, sccs: &[Vec<usize>]) -> Vec<usize> {
    let mut id = vec![usize::MAX; n];
    for (c, comp) in sccs.iter().enumerate() {
        for &v in comp {
            id[v] = c;
        }
    }
    id
}

/// Components with no edge leaving them.
pub fn bottom_components<'a>(adj: &[Vec<usize>], sccs: &'a [Vec<usize>]) -> Vec<&'a Vec<usize>> {
    let id = component_ids(adj.len(), sccs);
    sccs.iter()
        .enumerate()
        .filter(|(c, comp)| comp.iter().all(|&v| adj[v].iter().all(|&w| id[w] == *c)))
        .map(|(_, comp)| comp)
        .collect()
}

/// Vertices that can reach some vertex in `targets`.
pub fn backward_reachable(adj: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = adj.len();
    let mut rev = vec![Vec::new(); n];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            rev[w].push(v);
        }
    }
    let mut seen = targets.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&v| targets[v]).collect();
    while let Some(w) = stack.pop() {
        for &v in &rev[w] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycles_and_a_bridge() {
        // 0 <-> 1 -> 2 <-> 3, 4 isolated
        let adj = vec![vec![1], vec![0, 2], vec![3], vec![2], vec![]];
        let mut sccs = tarjan_scc(&adj);
        sccs.sort();
        assert_eq!(sccs, vec![vec![0, 1], vec![2, 3], vec![4]]);
        let bottoms = bottom_components(&adj, &sccs);
        let mut b: Vec<_> = bottoms.into_iter().cloned().collect();
        b.sort();
        assert_eq!(b, vec![vec![2, 3], vec![4]]);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|v| vec![(v + 1) % n]).collect();
        let sccs = tarjan_scc(&adj);
        assert_eq!(sccs.len(), 1);
        assert_eq!(sccs[0].len(), n);
    }

    #[test]
    fn backward_reach() {
        let adj = vec![vec![1], vec![2], vec![2], vec![3]];
        let r = backward_reachable(&adj, &[false, false, true, false]);
        assert_eq!(r, vec![true, true, true, false]);
    }
}
