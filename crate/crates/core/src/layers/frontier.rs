use std::collections::VecDeque;

use crate::graph::Graph;

/// Exact hop distance from the nearest selected node, `None` when
/// unreachable or farther than `max_depth`.
pub fn hop_depths(g: &Graph, selected: &[usize], max_depth: usize) -> Vec<Option<usize>> {
    let mut depth = vec![None; g.num_nodes()];
    let mut queue = VecDeque::new();
    for &s in selected {
        if depth[s].is_none() {
            depth[s] = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = depth[v].unwrap();
        if d >= max_depth {
            continue;
        }
        for &w in g.neighbors(v) {
            if depth[w].is_none() {
                depth[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    depth
}

/// Shells `P⁽⁰⁾ … P⁽Q−1⁾` around `selected`: `P⁽q⁾` holds the nodes at exact
/// hop distance `q`, so the shells are pairwise disjoint. Each shell is
/// sorted by node id.
pub fn frontier_sets(g: &Graph, selected: &[usize], depth: usize) -> Vec<Vec<usize>> {
    let mut shells = vec![Vec::new(); depth];
    if depth == 0 {
        return shells;
    }
    for (v, d) in hop_depths(g, selected, depth - 1).into_iter().enumerate() {
        if let Some(d) = d {
            shells[d].push(v);
        }
    }
    shells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DenseMatrix;

    fn path4() -> Graph {
        Graph::from_edges(
            4,
            &[(0, 1), (1, 2), (2, 3)],
            DenseMatrix::zeros(4, 1),
            vec![0; 4],
            1,
        )
        .unwrap()
    }

    #[test]
    fn path_shells() {
        assert_eq!(
            frontier_sets(&path4(), &[0], 3),
            vec![vec![0], vec![1], vec![2]]
        );
    }

    #[test]
    fn everything_selected() {
        let all: Vec<usize> = (0..4).collect();
        assert_eq!(frontier_sets(&path4(), &all, 3), vec![all, vec![], vec![]]);
    }

    #[test]
    fn empty_selection() {
        assert_eq!(
            frontier_sets(&path4(), &[], 2),
            vec![Vec::<usize>::new(); 2]
        );
    }
}
