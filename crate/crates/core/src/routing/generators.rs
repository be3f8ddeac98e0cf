//! Seeded routing games: parallel links and directed grids.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

use super::cost::CostFunction;
use super::game::{Edge, RoutingGame};

/// `n` players sharing one source and sink joined by one link per cost.
pub fn parallel_edges_game(n: usize, costs: &[CostFunction]) -> Result<RoutingGame> {
    let edges = costs
        .iter()
        .map(|c| Edge {
            from: 0,
            to: 1,
            cost: c.clone(),
        })
        .collect();
    RoutingGame::new(2, edges, vec![(0, 1); n])
}

/// Linear cost with slope in `[max_slope/5, max_slope]` and an intercept
/// small enough that the cost stays in `[0, 1]` on `[0, n]`.
fn random_linear(rng: &mut impl Rng, n: usize, max_slope: f64) -> CostFunction {
    let slope = rng.random_range(max_slope / 5.0..=max_slope);
    let room = (1.0 - slope * n as f64).max(0.0);
    CostFunction::linear(slope, rng.random_range(0.0..=room))
}

fn slope_bound(n: usize, max_slope: Option<f64>) -> Result<f64> {
    let s = max_slope.unwrap_or(1.0 / n as f64);
    if !(s > 0.0) || s * n as f64 > 1.0 + 1e-12 {
        return Err(Error::param(format!("max slope must lie in (0, 1/n], got {s}")));
    }
    Ok(s)
}

/// Parallel-link game with `m` random linear costs; slopes default to at most
/// `1/n`.
pub fn parallel_edges(n: usize, m: usize, max_slope: Option<f64>, seed: u64) -> Result<RoutingGame> {
    if n == 0 || m == 0 {
        return Err(Error::param("parallel game needs n >= 1 and m >= 1"));
    }
    let s = slope_bound(n, max_slope)?;
    let mut rng = seeded(seed);
    let costs: Vec<CostFunction> = (0..m).map(|_| random_linear(&mut rng, n, s)).collect();
    parallel_edges_game(n, &costs)
}

/// `width x height` grid with edges pointing right and down (node
/// `y * width + x`; per node, the right edge precedes the down edge). Each
/// player travels from a random node to a distinct node weakly below and to
/// its right.
pub fn grid(width: usize, height: usize, n: usize, max_slope: Option<f64>, seed: u64) -> Result<RoutingGame> {
    if width * height < 2 || n == 0 {
        return Err(Error::param("grid game needs at least two nodes and one player"));
    }
    let s = slope_bound(n, max_slope)?;
    let mut rng = seeded(seed);
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let v = y * width + x;
            if x + 1 < width {
                edges.push(Edge {
                    from: v,
                    to: v + 1,
                    cost: random_linear(&mut rng, n, s),
                });
            }
            if y + 1 < height {
                edges.push(Edge {
                    from: v,
                    to: v + width,
                    cost: random_linear(&mut rng, n, s),
                });
            }
        }
    }
    let players = (0..n)
        .map(|_| loop {
            let (sx, sy) = (rng.random_range(0..width), rng.random_range(0..height));
            let (dx, dy) = (rng.random_range(sx..width), rng.random_range(sy..height));
            if (sx, sy) != (dx, dy) {
                break (sy * width + sx, dy * width + dx);
            }
        })
        .collect();
    RoutingGame::new(width * height, edges, players)
}
