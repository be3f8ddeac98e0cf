//! Deterministic shortest paths with a fixed tie-break.
//!
//! Among minimum-cost paths the routine prefers fewer edges, and among those
//! the lexicographically smallest edge-index sequence. Distances to the sink
//! are computed backwards with key `(cost, hops)`; the path is then walked
//! forward from the source, always taking the lowest-index edge that stays on
//! an optimal `(cost, hops)` label. Hop counts strictly decrease along the
//! walk, so the result is a simple path even when some edges cost zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

use super::game::RoutingGame;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    cost: f64,
    hops: usize,
}

impl Label {
    fn cmp_key(&self, other: &Label) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.hops.cmp(&other.hops))
    }
}

#[derive(Debug, PartialEq)]
struct Entry(Label, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap, so reverse.
        other.0.cmp_key(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost `s_i -> d_i` path under the given per-edge weights (which must
/// be nonnegative), returned with its cost.
pub fn shortest_path(game: &RoutingGame, player: usize, weights: &[f64]) -> Result<(f64, Vec<usize>)> {
    let (source, sink) = game.pair(player);
    let mut label: Vec<Option<Label>> = vec![None; game.node_count()];
    let mut done = vec![false; game.node_count()];
    let mut heap = BinaryHeap::new();
    let start = Label { cost: 0.0, hops: 0 };
    label[sink] = Some(start);
    heap.push(Entry(start, sink));
    while let Some(Entry(here, v)) = heap.pop() {
        if std::mem::replace(&mut done[v], true) {
            continue;
        }
        for &e in game.in_edges(v) {
            let u = game.edges()[e].from;
            if done[u] {
                continue;
            }
            let cand = Label {
                cost: weights[e] + here.cost,
                hops: here.hops + 1,
            };
            if label[u].is_none_or(|old| cand.cmp_key(&old) == Ordering::Less) {
                label[u] = Some(cand);
                heap.push(Entry(cand, u));
            }
        }
    }
    let Some(best) = label[source] else {
        return Err(Error::Unreachable {
            player,
            source_node: source,
            target: sink,
        });
    };
    let mut path = Vec::with_capacity(best.hops);
    let mut at = source;
    while at != sink {
        let here = label[at].expect("nodes on the walk are labelled");
        let e = game
            .out_edges(at)
            .iter()
            .copied()
            .find(|&e| {
                label[game.edges()[e].to].is_some_and(|next| {
                    next.hops + 1 == here.hops && weights[e] + next.cost == here.cost
                })
            })
            .expect("the relaxing edge of every label is tight");
        path.push(e);
        at = game.edges()[e].to;
    }
    Ok((best.cost, path))
}

/// Fewest-edge path, lexicographically smallest among those.
pub fn fewest_edge_path(game: &RoutingGame, player: usize) -> Result<Vec<usize>> {
    Ok(shortest_path(game, player, &vec![0.0; game.edge_count()])?.1)
}

/// Best response to approximate per-edge counts: weights
/// `c_e(clamp(count_e, 0, n))`. Returns the path and its cost at the counts.
pub fn best_response_path(player: usize, counts: &[f64], game: &RoutingGame) -> Result<(f64, Vec<usize>)> {
    if let Some(bad) = counts.iter().find(|c| !c.is_finite()) {
        return Err(Error::input(format!("count {bad} is not finite")));
    }
    let weights: Vec<f64> = (0..game.edge_count()).map(|e| game.clamped_cost(e, counts[e])).collect();
    shortest_path(game, player, &weights)
}

/// Cost of a path under clamped counts.
pub fn path_cost_at_counts(path: &[usize], counts: &[f64], game: &RoutingGame) -> f64 {
    path.iter().map(|&e| game.clamped_cost(e, counts[e])).sum()
}
