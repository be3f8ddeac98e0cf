//! Maximum-cardinality bipartite matching (Hopcroft-Karp).

use std::collections::VecDeque;

const FREE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteMatching {
    pub size: usize,
    /// Partner of each left vertex.
    pub left: Vec<Option<usize>>,
}

/// `adjacency[u]` lists the right neighbours of left vertex `u`; right
/// vertices are `0..right`.
pub fn hopcroft_karp(adjacency: &[Vec<usize>], right: usize) -> BipartiteMatching {
    let n = adjacency.len();
    let mut match_l = vec![FREE; n];
    let mut match_r = vec![FREE; right];
    let mut dist = vec![0usize; n];
    let mut size = 0;
    loop {
        // BFS layers from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..n {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                match match_r[w] {
                    FREE => found = true,
                    v if dist[v] == usize::MAX => {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; n];
        for u in 0..n {
            if match_l[u] == FREE && augment(u, adjacency, &mut match_l, &mut match_r, &mut dist, &mut next) {
                size += 1;
            }
        }
    }
    BipartiteMatching {
        size,
        left: match_l.into_iter().map(|w| (w != FREE).then_some(w)).collect(),
    }
}

/// Iterative layered DFS from `root`.
fn augment(
    root: usize,
    adjacency: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    let mut stack = vec![root];
    while let Some(&u) = stack.last() {
        if next[u] == adjacency[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            continue;
        }
        let w = adjacency[u][next[u]];
        next[u] += 1;
        let v = match_r[w];
        if v == FREE {
            // Flip the path recorded on the stack.
            let mut w = w;
            while let Some(u) = stack.pop() {
                let prev = match_l[u];
                match_l[u] = w;
                match_r[w] = u;
                w = prev;
            }
            return true;
        }
        if dist[v] == dist[u] + 1 {
            stack.push(v);
        }
    }
    false
}

pub fn max_matching(adjacency: &[Vec<usize>], right: usize) -> usize {
    hopcroft_karp(adjacency, right).size
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::instance::MatchingInstance;
    use crate::convex::welfare::lp_opt;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn trivial_graphs() {
        assert_eq!(max_matching(&[vec![0], vec![1], vec![2]], 3), 3);
        assert_eq!(max_matching(&[vec![], vec![]], 2), 0);
        assert_eq!(max_matching(&[], 0), 0);
    }

    #[test]
    fn needs_augmenting_path() {
        // Greedy 0-0 blocks 1; the optimum re-routes 0 to 1.
        let m = hopcroft_karp(&[vec![0, 1], vec![0]], 2);
        assert_eq!(m.size, 2);
        assert_eq!(m.left, vec![Some(1), Some(0)]);
    }

    #[test]
    fn agrees_with_max_flow() {
        let mut rng = seeded(5);
        for _ in 0..50 {
            let (n, k) = (rng.random_range(1..30), rng.random_range(1..30));
            let adj: Vec<Vec<usize>> = (0..n)
                .map(|_| (0..k).filter(|_| rng.random_bool(0.1)).collect())
                .collect();
            let m = hopcroft_karp(&adj, k);
            let edges: Vec<(usize, usize)> =
                adj.iter().enumerate().flat_map(|(i, ws)| ws.iter().map(move |&w| (i, w))).collect();
            let inst = MatchingInstance::from_edges(n, vec![1; k], &edges).unwrap();
            assert_eq!(m.size as u64, lp_opt(&inst).value);
            let mut used = vec![false; k];
            for (u, w) in m.left.iter().enumerate() {
                if let Some(w) = *w {
                    assert!(adj[u].contains(&w));
                    assert!(!std::mem::replace(&mut used[w], true));
                }
            }
        }
    }
}
