use rayon::prelude::*;
use serde::Serialize;

use super::game::{FlowState, RoutingGame};
use super::paths::shortest_path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumCheck {
    pub ok: bool,
    pub max_regret: f64,
    /// Per player: current cost minus the cheapest unilateral deviation.
    pub regrets: Vec<f64>,
}

/// Certifies an `epsilon`-equilibrium from scratch. A player's deviation
/// cost is a shortest path under `c_e(f_e - [e in P_i] + 1)`, the loads the
/// player would face after leaving its current path.
pub fn verify_equilibrium(f: &FlowState, game: &RoutingGame, epsilon: f64) -> EquilibriumCheck {
    let regrets: Vec<f64> = (0..game.player_count())
        .into_par_iter()
        .map(|i| {
            let mut others = f.loads().to_vec();
            for &e in f.path(i) {
                others[e] -= 1;
            }
            let weights: Vec<f64> = others
                .iter()
                .enumerate()
                .map(|(e, &load)| game.cost(e, (load + 1) as f64))
                .collect();
            let (best, _) = shortest_path(game, i, &weights).expect("a feasible flow connects every pair");
            f.player_cost(game, i) - best
        })
        .collect();
    let max_regret = regrets.iter().copied().fold(0.0, f64::max);
    EquilibriumCheck {
        ok: max_regret <= epsilon,
        max_regret,
        regrets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::cost::CostFunction;
    use crate::routing::generators::parallel_edges_game;

    fn halves() -> RoutingGame {
        parallel_edges_game(2, &[CostFunction::linear(0.5, 0.0), CostFunction::linear(0.5, 0.0)]).unwrap()
    }

    #[test]
    fn balanced_loads_are_exact_equilibrium() {
        let g = halves();
        let f = FlowState::new(&g, vec![vec![0], vec![1]]).unwrap();
        let c = verify_equilibrium(&f, &g, 0.0);
        assert!(c.ok);
        assert_eq!(c.max_regret, 0.0);
    }

    #[test]
    fn stacked_loads_regret_half() {
        let g = halves();
        let f = FlowState::new(&g, vec![vec![0], vec![0]]).unwrap();
        let c = verify_equilibrium(&f, &g, 0.49);
        assert!(!c.ok);
        assert_eq!(c.max_regret, 0.5);
        assert!(verify_equilibrium(&f, &g, 0.5).ok);
    }

    #[test]
    fn single_player_on_shortest_path() {
        let g = parallel_edges_game(1, &[CostFunction::linear(0.2, 0.3), CostFunction::linear(0.2, 0.1)]).unwrap();
        assert!(verify_equilibrium(&FlowState::new(&g, vec![vec![1]]).unwrap(), &g, 0.0).ok);
        let c = verify_equilibrium(&FlowState::new(&g, vec![vec![0]]).unwrap(), &g, 0.0);
        assert!(!c.ok);
        assert!((c.max_regret - 0.2).abs() < 1e-15);
    }
}
