use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::cost::CostFunction;
use super::paths::fewest_edge_path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: CostFunction,
}

/// Directed graph, per-edge costs, and one source-sink pair per player.
/// Nodes and edges are 0-indexed; edge order is the tie-breaking order for
/// paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RoutingGameFile", into = "RoutingGameFile")]
pub struct RoutingGame {
    nodes: usize,
    edges: Vec<Edge>,
    players: Vec<(usize, usize)>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    lipschitz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingGameFile {
    pub nodes: usize,
    pub edges: Vec<Edge>,
    pub players: Vec<(usize, usize)>,
}

impl TryFrom<RoutingGameFile> for RoutingGame {
    type Error = Error;
    fn try_from(f: RoutingGameFile) -> Result<Self> {
        RoutingGame::new(f.nodes, f.edges, f.players)
    }
}

impl From<RoutingGame> for RoutingGameFile {
    fn from(g: RoutingGame) -> Self {
        RoutingGameFile {
            nodes: g.nodes,
            edges: g.edges,
            players: g.players,
        }
    }
}

impl RoutingGame {
    pub fn new(nodes: usize, edges: Vec<Edge>, players: Vec<(usize, usize)>) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::input("a routing game needs at least one player"));
        }
        let n = players.len();
        let mut out_edges = vec![Vec::new(); nodes];
        let mut in_edges = vec![Vec::new(); nodes];
        for (e, edge) in edges.iter().enumerate() {
            if edge.from >= nodes || edge.to >= nodes {
                return Err(Error::input(format!("edge {e} references a node outside 0..{nodes}")));
            }
            edge.cost.validate(n).map_err(|err| Error::input(format!("edge {e}: {err}")))?;
            out_edges[edge.from].push(e);
            in_edges[edge.to].push(e);
        }
        let lipschitz = edges.iter().map(|e| e.cost.lipschitz()).fold(0.0, f64::max);
        let game = RoutingGame {
            nodes,
            edges,
            players,
            out_edges,
            in_edges,
            lipschitz,
        };
        for (i, &(s, d)) in game.players.iter().enumerate() {
            if s >= nodes || d >= nodes {
                return Err(Error::input(format!("player {i} has an endpoint outside 0..{nodes}")));
            }
            if s == d {
                return Err(Error::input(format!("player {i} has identical source and sink")));
            }
            fewest_edge_path(&game, i)?;
        }
        Ok(game)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// `m`.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `n`.
    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn players(&self) -> &[(usize, usize)] {
        &self.players
    }

    pub fn pair(&self, player: usize) -> (usize, usize) {
        self.players[player]
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_edges[node]
    }

    /// `lambda_c`: the largest declared Lipschitz constant over all edges.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn cost(&self, edge: usize, load: f64) -> f64 {
        self.edges[edge].cost.eval(load)
    }

    /// Cost at an approximate count, clamped into the domain `[0, n]`.
    pub fn clamped_cost(&self, edge: usize, count: f64) -> f64 {
        self.cost(edge, count.clamp(0.0, self.player_count() as f64))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Every player's path (edge indices from source to sink) and the induced
/// edge loads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowState {
    paths: Vec<Vec<usize>>,
    loads: Vec<u64>,
}

impl FlowState {
    pub fn new(game: &RoutingGame, paths: Vec<Vec<usize>>) -> Result<Self> {
        if paths.len() != game.player_count() {
            return Err(Error::input(format!(
                "flow has {} paths for {} players",
                paths.len(),
                game.player_count()
            )));
        }
        let mut loads = vec![0u64; game.edge_count()];
        for (i, path) in paths.iter().enumerate() {
            check_simple_path(game, i, path)?;
            for &e in path {
                loads[e] += 1;
            }
        }
        Ok(FlowState { paths, loads })
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn path(&self, player: usize) -> &[usize] {
        &self.paths[player]
    }

    pub fn loads(&self) -> &[u64] {
        &self.loads
    }

    /// Moves one player to a new path, keeping loads consistent.
    pub fn switch(&mut self, game: &RoutingGame, player: usize, path: Vec<usize>) -> Result<()> {
        check_simple_path(game, player, &path)?;
        for &e in &self.paths[player] {
            self.loads[e] -= 1;
        }
        for &e in &path {
            self.loads[e] += 1;
        }
        self.paths[player] = path;
        Ok(())
    }

    /// A player's cost `sum_{e in P_i} c_e(f_e)`.
    pub fn player_cost(&self, game: &RoutingGame, player: usize) -> f64 {
        self.paths[player].iter().map(|&e| game.cost(e, self.loads[e] as f64)).sum()
    }
}

pub fn check_simple_path(game: &RoutingGame, player: usize, path: &[usize]) -> Result<()> {
    let (s, d) = game.pair(player);
    let mut at = s;
    let mut seen = vec![false; game.node_count()];
    seen[s] = true;
    for &e in path {
        let edge = game
            .edges()
            .get(e)
            .ok_or_else(|| Error::input(format!("player {player}: unknown edge {e}")))?;
        if edge.from != at {
            return Err(Error::input(format!("player {player}: edge {e} does not continue the path")));
        }
        at = edge.to;
        if std::mem::replace(&mut seen[at], true) {
            return Err(Error::input(format!("player {player}: path revisits node {at}")));
        }
    }
    if at != d {
        return Err(Error::input(format!("player {player}: path ends at {at}, not at sink {d}")));
    }
    Ok(())
}

/// `Psi(f) = sum_e sum_{x=1}^{f_e} c_e(x)`.
pub fn potential(f: &FlowState, game: &RoutingGame) -> f64 {
    f.loads()
        .iter()
        .enumerate()
        .map(|(e, &load)| (1..=load).map(|x| game.cost(e, x as f64)).sum::<f64>())
        .sum()
}
