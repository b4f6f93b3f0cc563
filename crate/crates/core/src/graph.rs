//! Directed-graph utilities over dense `usize` node ids: strongly connected
//! components, cycle detection and simple-cycle enumeration.

/// Strongly connected components of a graph given as adjacency lists.
#[derive(Debug, Clone)]
pub struct Sccs {
    /// Components in reverse topological order (sinks first).
    pub components: Vec<Vec<usize>>,
    pub component_of: Vec<usize>,
}

impl Sccs {
    /// True if the component contains a cycle: more than one node, or a
    /// single node with a self-loop.
    pub fn is_cyclic(&self, adj: &[Vec<usize>], component: usize) -> bool {
        let members = &self.components[component];
        members.len() > 1 || adj[members[0]].contains(&members[0])
    }

    /// True if no edge leaves the component.
    pub fn is_closed(&self, adj: &[Vec<usize>], component: usize) -> bool {
        self.components[component]
            .iter()
            .all(|&v| adj[v].iter().all(|&w| self.component_of[w] == component))
    }
}

/// Iterative Tarjan.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Sccs {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut component_of = vec![UNVISITED; n];
    let mut components = Vec::new();
    let mut next_index = 0;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (node, position of next edge to explore)
        let mut call_stack = vec![(root, 0usize)];
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&(v, edge)) = call_stack.last() {
            if let Some(&w) = adj[v].get(edge) {
                if let Some(top) = call_stack.last_mut() {
                    top.1 += 1;
                }
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call_stack.pop();
            if let Some(&(parent, _)) = call_stack.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let id = components.len();
                let mut members = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component_of[w] = id;
                    members.push(w);
                    if w == v {
                        break;
                    }
                }
                members.sort_unstable();
                components.push(members);
            }
        }
    }

    Sccs {
        components,
        component_of,
    }
}

pub fn has_cycle(adj: &[Vec<usize>]) -> bool {
    let sccs = strongly_connected_components(adj);
    (0..sccs.components.len()).any(|c| sccs.is_cyclic(adj, c))
}

/// All elementary cycles, each reported as a node sequence starting at its
/// smallest node. Exponential in the worst case; meant for small graphs.
pub fn simple_cycles(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut cycles = Vec::new();
    let mut path = Vec::new();
    let mut on_path = vec![false; adj.len()];
    for start in 0..adj.len() {
        extend_cycles(adj, start, start, &mut path, &mut on_path, &mut cycles);
    }
    cycles
}

fn extend_cycles(
    adj: &[Vec<usize>],
    start: usize,
    v: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    cycles: &mut Vec<Vec<usize>>,
) {
    path.push(v);
    on_path[v] = true;
    let mut successors = adj[v].clone();
    successors.sort_unstable();
    successors.dedup();
    for w in successors {
        if w == start {
            cycles.push(path.clone());
        } else if w > start && !on_path[w] {
            extend_cycles(adj, start, w, path, on_path, cycles);
        }
    }
    on_path[v] = false;
    path.pop();
}

/// Shortest cycle through `node` restricted to nodes accepted by `keep`,
/// as a node sequence starting at `node`.
pub fn shortest_cycle_through(adj: &[Vec<usize>], node: usize, keep: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
    use std::collections::VecDeque;
    let mut parent = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    let mut seen = vec![false; adj.len()];
    for &w in &adj[node] {
        if w == node {
            return Some(vec![node]);
        }
    }
    seen[node] = true;
    queue.push_back(node);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if w == node {
                let mut cycle = vec![v];
                let mut cur = v;
                while cur != node {
                    cur = parent[cur];
                    cycle.push(cur);
                }
                cycle.reverse();
                return Some(cycle);
            }
            if !seen[w] && keep(w) {
                seen[w] = true;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    None
}
