//! Integral outcomes: independent rounding, capped welfare, constraint
//! violation, and the exact matching optimum.

use rand::Rng;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::rng::{agent_rng, ProtocolRng};

use super::instance::MatchingInstance;
use super::program::FractionalAssignment;

/// Draws one good for a player: good `j` with probability `row[j]`, nothing
/// with the remaining probability.
pub fn sample_row(row: &[f64], rng: &mut ProtocolRng) -> Result<Option<usize>> {
    let total: f64 = row.iter().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::Invariant(format!("row sums to {total} > 1")));
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &x) in row.iter().enumerate() {
        acc += x;
        if u < acc {
            return Ok(Some(j));
        }
    }
    Ok(None)
}

/// Player `i` rounds its row on the stream derived from `(seed, i)`.
pub fn independent_rounding(x: &FractionalAssignment, seed: u64) -> Result<Vec<Option<usize>>> {
    x.rows()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            sample_row(row, &mut agent_rng(seed, i)).map_err(|e| match e {
                Error::Invariant(msg) => Error::Invariant(format!("player {i}: {msg}")),
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CappedWelfare {
    pub welfare: u64,
    /// Feasible matching after truncation: per good, the `b_j` lowest-index
    /// players who value it are kept; everyone else is unmatched.
    pub kept: Vec<Option<usize>>,
}

/// `sum_j min(#{i assigned to j with v_ij = 1}, b_j)`.
pub fn capped_welfare(assignment: &[Option<usize>], inst: &MatchingInstance) -> Result<CappedWelfare> {
    if assignment.len() != inst.n() {
        return Err(Error::input(format!(
            "assignment covers {} players, instance has {}",
            assignment.len(),
            inst.n()
        )));
    }
    let mut used = vec![0u64; inst.k()];
    let mut kept = vec![None; inst.n()];
    for (i, choice) in assignment.iter().enumerate() {
        if let Some(j) = *choice {
            if j >= inst.k() {
                return Err(Error::input(format!("player {i} assigned to unknown good {j}")));
            }
            if inst.value(i, j) && used[j] < inst.supplies()[j] {
                used[j] += 1;
                kept[i] = Some(j);
            }
        }
    }
    Ok(CappedWelfare {
        welfare: used.iter().sum(),
        kept,
    })
}

/// `sum_j (#{i assigned to j} - b_j)_+`.
pub fn constraint_violation(assignment: &[Option<usize>], inst: &MatchingInstance) -> f64 {
    let mut counts = vec![0u64; inst.k()];
    for j in assignment.iter().flatten() {
        counts[*j] += 1;
    }
    counts
        .iter()
        .zip(inst.supplies())
        .map(|(&c, &b)| c.saturating_sub(b) as f64)
        .sum()
}

/// Exact `E[capped welfare]` when each player rounds its row independently.
/// By linearity this is `sum_j E[min(X_j, b_j)]` with `X_j` a Poisson-binomial
/// count over the players who value `j`.
pub fn expected_capped_welfare(x: &FractionalAssignment, inst: &MatchingInstance) -> f64 {
    (0..inst.k())
        .map(|j| {
            let cap = inst.supplies()[j] as usize;
            // dist[c] = P(X_j = c) for c < cap, dist[cap] = P(X_j >= cap).
            let mut dist = vec![0.0; cap + 1];
            dist[0] = 1.0;
            for (i, row) in x.rows().iter().enumerate() {
                let p = if inst.value(i, j) { row[j] } else { 0.0 };
                if p == 0.0 {
                    continue;
                }
                dist[cap] += dist[cap - 1] * p;
                for c in (1..cap).rev() {
                    dist[c] = dist[c] * (1.0 - p) + dist[c - 1] * p;
                }
                dist[0] *= 1.0 - p;
            }
            dist.iter().enumerate().map(|(c, q)| c as f64 * q).sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpOptimum {
    pub value: u64,
    pub assignment: Vec<Option<usize>>,
}

/// Exact optimum of the matching LP via integral max flow
/// source -> players (cap 1) -> goods (valued edges) -> sink (cap b_j).
pub fn lp_opt(inst: &MatchingInstance) -> LpOptimum {
    let (n, k) = (inst.n(), inst.k());
    let source = n + k;
    let sink = source + 1;
    let mut net = FlowNetwork::new(n + k + 2);
    let mut arcs = Vec::new();
    for i in 0..n {
        net.add_edge(source, i, 1);
        for j in 0..k {
            if inst.value(i, j) {
                arcs.push((i, j, net.add_edge(i, n + j, 1)));
            }
        }
    }
    for (j, &b) in inst.supplies().iter().enumerate() {
        net.add_edge(n + j, sink, b);
    }
    let value = net.max_flow(source, sink);
    let mut assignment = vec![None; n];
    for (i, j, arc) in arcs {
        if net.flow(arc) > 0 {
            assignment[i] = Some(j);
        }
    }
    LpOptimum { value, assignment }
}
