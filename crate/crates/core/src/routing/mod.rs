//! Atomic routing games and coordination through compressed best-response
//! dynamics.

pub mod cost;
pub mod equilibrium;
pub mod game;
pub mod generators;
pub mod paths;
pub mod sim;

pub use cost::CostFunction;
pub use equilibrium::{verify_equilibrium, EquilibriumCheck};
pub use game::{potential, Edge, FlowState, RoutingGame};
pub use paths::{best_response_path, fewest_edge_path, shortest_path};
pub use generators::{grid, parallel_edges, parallel_edges_game};
pub use sim::{br_sim, extract_path, BrSimOutput, RoutingMessage, RoutingParams, RoutingProtocol};
