//! From one-to-one to many-to-one matching and back.

use rand::Rng;

use crate::convex::instance::MatchingInstance;
use crate::error::{Error, Result};
use crate::rng::seeded;

use super::rang::OneToOneInstance;

/// `b` copies of every left vertex (copy `c` of `v` is player `v*b + c`),
/// each good with supply `b`.
pub fn lift_many_to_one(g: &OneToOneInstance, b: u64) -> Result<MatchingInstance> {
    lift_adjacency(&g.adjacency, g.n(), b)
}

pub fn lift_adjacency(adjacency: &[Vec<usize>], goods: usize, b: u64) -> Result<MatchingInstance> {
    if b == 0 {
        return Err(Error::param("b must be a positive integer"));
    }
    let b = b as usize;
    let edges: Vec<(usize, usize)> = adjacency
        .iter()
        .enumerate()
        .flat_map(|(v, ws)| ws.iter().flat_map(move |&w| (0..b).map(move |c| (v * b + c, w))))
        .collect();
    MatchingInstance::from_edges(adjacency.len() * b, vec![b as u64; goods], &edges)
}

/// Each original vertex samples one of its `b` copies uniformly and keeps
/// that copy's matched good; when two vertices keep the same good the
/// lower-index vertex wins.
pub fn sample_reduce(lifted: &[Option<usize>], n: usize, b: u64, seed: u64) -> Result<Vec<Option<usize>>> {
    let b = b as usize;
    if b == 0 || lifted.len() != n * b {
        return Err(Error::input(format!("expected {} lifted players, got {}", n * b, lifted.len())));
    }
    let mut rng = seeded(seed);
    let mut taken = std::collections::HashSet::new();
    Ok((0..n)
        .map(|v| {
            let c = rng.random_range(0..b);
            lifted[v * b + c].filter(|&w| taken.insert(w))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::welfare::{capped_welfare, lp_opt};
    use crate::lowerbound::rang::rang;

    #[test]
    fn lift_of_perfect_matching() {
        let lifted = lift_adjacency(&[vec![0], vec![1]], 2, 2).unwrap();
        assert_eq!(lp_opt(&lifted).value, 4);
        let one = lift_adjacency(&[vec![0, 1], vec![1]], 2, 1).unwrap();
        assert_eq!(one.edges(), vec![(0, 0), (0, 1), (1, 1)]);
        assert_eq!(one.supplies(), &[1, 1]);
    }

    #[test]
    fn lifted_rang_keeps_b_times_opt() {
        let g = rang(1, 16, 4).unwrap();
        let lifted = lift_many_to_one(&g, 4).unwrap();
        assert!(lp_opt(&lifted).value >= 4 * g.max_matching() as u64);
        assert!(lp_opt(&lifted).value >= 56);
    }

    #[test]
    fn sampling_outputs_a_matching() {
        let g = rang(1, 32, 1).unwrap();
        let lifted = lift_many_to_one(&g, 3).unwrap();
        let opt = lp_opt(&lifted);
        assert_eq!(capped_welfare(&opt.assignment, &lifted).unwrap().welfare, opt.value);
        for seed in 0..20 {
            let m = sample_reduce(&opt.assignment, 32, 3, seed).unwrap();
            let mut used = std::collections::HashSet::new();
            for (v, w) in m.iter().enumerate() {
                if let Some(w) = *w {
                    assert!(g.adjacency[v].contains(&w));
                    assert!(used.insert(w));
                }
            }
        }
    }

    #[test]
    fn sampling_edge_cases() {
        assert_eq!(sample_reduce(&[None, None], 2, 1, 0).unwrap(), vec![None, None]);
        assert_eq!(sample_reduce(&[Some(0), Some(0)], 2, 1, 0).unwrap(), vec![Some(0), None]);
        assert!(sample_reduce(&[None], 2, 1, 0).is_err());
    }
}
