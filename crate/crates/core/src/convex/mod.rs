//! Coordination for linearly separable convex programs by broadcasting
//! rounded prices of a strongly concave (regularized) relaxation, specialized
//! to many-to-one matching.

pub mod best_response;
pub mod dual;
pub mod instance;
pub mod program;
pub mod rec;
pub mod welfare;

pub use best_response::{agent_best_response, regularized_argmax};
pub use dual::{solve_regularized_dual, DualMethod, DualSolution, DualSolverOptions};
pub use instance::{planted_instance, random_instance, MatchingInstance, MatchingInstanceFile};
pub use program::{DualVector, FractionalAssignment, MatchingProgram, SeparableProgram};
pub use rec::{decode_assignment, rec_protocol, round_dual, RecOutcome, RecParams, RecProtocol};
pub use welfare::{capped_welfare, constraint_violation, expected_capped_welfare, independent_rounding, lp_opt};
