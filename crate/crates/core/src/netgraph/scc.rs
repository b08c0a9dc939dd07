use super::{NodeId, WeightedDigraph};

/// Tarjan's algorithm (iterative). Components come out in reverse
/// topological order of the condensation: if an edge runs from component
/// `a` to component `b != a`, then `b` is listed before `a`.
pub fn strongly_connected_components(g: &WeightedDigraph) -> Vec<Vec<NodeId>> {
    const UNVISITED: usize = usize::MAX;
    let n = g.node_count();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0;
    // (node, position in its out-neighbour list)
    let mut call: Vec<(NodeId, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let succ = g.out_neighbors(v);
            if *pos < succ.len() {
                let w = succ[*pos].0;
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
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
                components.push(comp);
            }
        }
    }
    components
}

/// Edges of the condensation DAG as `(from_component, to_component)` pairs,
/// deduplicated, indexed into `components`.
pub fn condensation_edges(g: &WeightedDigraph, components: &[Vec<NodeId>]) -> Vec<(usize, usize)> {
    let mut comp_of = vec![0; g.node_count()];
    for (c, nodes) in components.iter().enumerate() {
        for &v in nodes {
            comp_of[v] = c;
        }
    }
    let mut out: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .map(|e| (comp_of[e.src], comp_of[e.dst]))
        .filter(|(a, b)| a != b)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
