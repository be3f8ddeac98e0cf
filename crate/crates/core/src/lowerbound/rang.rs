//! The random hard instance `RanG(rho, n)`.
//!
//! With `kappa = n/(8 rho)` and block size `A = n/(16 rho^2)`: orderings of
//! `V` and `W` are drawn uniformly; the first `kappa` vertices of `W` form
//! `W1`. `V` is cut into `16 rho^2` consecutive blocks of `A` vertices, and
//! inside each block `W1` is split into disjoint sets of `2 rho`, one per
//! vertex. Finally `v_i` is joined round-robin to
//! `w_{kappa + 1 + ((i - 1) mod (n - kappa))}` in `W2`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::convex::instance::{MatchingInstance, MatchingInstanceFile};
use crate::error::{Error, Result};
use crate::rng::seeded;

use super::matching::max_matching;

/// Generator record kept alongside a `RanG` graph. Vertex labels are
/// positions in `0..n`; `v_order[i]` is the vertex called `v_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangMeta {
    pub rho: usize,
    pub seed: u64,
    pub kappa: usize,
    pub block_size: usize,
    pub v_order: Vec<usize>,
    pub w_order: Vec<usize>,
    /// The unique `W2` neighbour of each vertex of `V`.
    pub designated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneToOneInstance {
    /// Sorted `W` neighbours of each vertex of `V`.
    pub adjacency: Vec<Vec<usize>>,
    pub meta: RangMeta,
}

pub fn check_divisibility(rho: usize, n: usize) -> Result<()> {
    if rho == 0 {
        return Err(Error::param("rho must be a positive integer"));
    }
    let blocks = 16 * rho * rho;
    if n == 0 || n % blocks != 0 || n % (8 * rho) != 0 {
        return Err(Error::param(format!(
            "n = {n} must be a positive multiple of 16 rho^2 = {blocks} (and of 8 rho = {})",
            8 * rho
        )));
    }
    Ok(())
}

pub fn rang(rho: usize, n: usize, seed: u64) -> Result<OneToOneInstance> {
    check_divisibility(rho, n)?;
    let kappa = n / (8 * rho);
    let block_size = n / (16 * rho * rho);
    let mut rng = seeded(seed);
    let mut w_order: Vec<usize> = (0..n).collect();
    w_order.shuffle(&mut rng);
    let mut v_order: Vec<usize> = (0..n).collect();
    v_order.shuffle(&mut rng);

    let mut adjacency = vec![Vec::with_capacity(2 * rho + 1); n];
    let mut w1 = w_order[..kappa].to_vec();
    for block in v_order.chunks(block_size) {
        w1.shuffle(&mut rng);
        for (&v, t) in block.iter().zip(w1.chunks(2 * rho)) {
            adjacency[v].extend_from_slice(t);
        }
    }
    let mut designated = vec![0; n];
    for (i, &v) in v_order.iter().enumerate() {
        let w = w_order[kappa + i % (n - kappa)];
        adjacency[v].push(w);
        designated[v] = w;
    }
    for a in &mut adjacency {
        a.sort_unstable();
    }
    Ok(OneToOneInstance {
        adjacency,
        meta: RangMeta {
            rho,
            seed,
            kappa,
            block_size,
            v_order,
            w_order,
            designated,
        },
    })
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    order.len() == n && order.iter().all(|&x| x < n && !std::mem::replace(&mut seen[x], true))
}

/// Re-derives every structural property of a `RanG` graph from its edges and
/// metadata; the construction itself is not trusted.
pub fn validate_rang(g: &OneToOneInstance) -> Result<()> {
    let m = &g.meta;
    let n = g.adjacency.len();
    let bad = |msg: String| Err(Error::Invariant(msg));
    check_divisibility(m.rho, n)?;
    if m.kappa != n / (8 * m.rho) || m.block_size != n / (16 * m.rho * m.rho) {
        return bad(format!("kappa {} / block size {} do not match n = {n}", m.kappa, m.block_size));
    }
    if !is_permutation(&m.v_order, n) || !is_permutation(&m.w_order, n) {
        return bad("vertex orderings are not permutations".into());
    }
    let mut in_w1 = vec![false; n];
    for &w in &m.w_order[..m.kappa] {
        in_w1[w] = true;
    }
    for (v, nbrs) in g.adjacency.iter().enumerate() {
        if nbrs.windows(2).any(|p| p[0] >= p[1]) || nbrs.iter().any(|&w| w >= n) {
            return bad(format!("vertex {v}: neighbour list not sorted, distinct and in range"));
        }
        let ones = nbrs.iter().filter(|&&w| in_w1[w]).count();
        let twos: Vec<usize> = nbrs.iter().copied().filter(|&w| !in_w1[w]).collect();
        if ones != 2 * m.rho || twos.len() != 1 {
            return bad(format!("vertex {v}: {ones} W1 and {} W2 neighbours", twos.len()));
        }
        if twos[0] != m.designated[v] {
            return bad(format!("vertex {v}: W2 neighbour differs from the recorded one"));
        }
    }
    for (b, block) in m.v_order.chunks(m.block_size).enumerate() {
        let mut taken = vec![false; n];
        for &v in block {
            for &w in g.adjacency[v].iter().filter(|&&w| in_w1[w]) {
                if std::mem::replace(&mut taken[w], true) {
                    return bad(format!("block {b}: W1 vertex {w} shared inside the block"));
                }
            }
        }
    }
    for (i, &v) in m.v_order.iter().enumerate() {
        if m.designated[v] != m.w_order[m.kappa + i % (n - m.kappa)] {
            return bad(format!("v_{} breaks the round-robin W2 assignment", i + 1));
        }
    }
    Ok(())
}

impl OneToOneInstance {
    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn max_matching(&self) -> usize {
        max_matching(&self.adjacency, self.n())
    }

    /// Unit-supply matching instance on the same edges.
    pub fn to_matching_instance(&self) -> Result<MatchingInstance> {
        let edges: Vec<(usize, usize)> = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(v, ws)| ws.iter().map(move |&w| (v, w)))
            .collect();
        MatchingInstance::from_edges(self.n(), vec![1; self.n()], &edges)
    }

    pub fn to_file(&self) -> Result<MatchingInstanceFile> {
        let meta = serde_json::json!({ "name": "rang", "params": self.meta });
        Ok(self.to_matching_instance()?.to_file(Some(meta)))
    }

    /// Reads a file written by [`OneToOneInstance::to_file`] and validates it.
    pub fn from_file(file: MatchingInstanceFile) -> Result<Self> {
        let meta = file
            .generator
            .clone()
            .filter(|g| g.get("name").and_then(|n| n.as_str()) == Some("rang"))
            .and_then(|g| g.get("params").cloned())
            .ok_or_else(|| Error::input("instance has no RanG generator block"))?;
        let meta: RangMeta = serde_json::from_value(meta)?;
        let inst = file.into_instance()?;
        let adjacency = (0..inst.n())
            .map(|i| (0..inst.k()).filter(|&j| inst.value(i, j)).collect())
            .collect();
        let g = OneToOneInstance { adjacency, meta };
        validate_rang(&g)?;
        Ok(g)
    }
}

/// `ceil(7n/8)`.
pub fn good_graph_bound(n: usize) -> usize {
    (7 * n).div_ceil(8)
}
