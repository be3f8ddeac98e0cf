//! Hard-instance generators and matching oracles for probing the trade-off
//! between message length and welfare.

pub mod matching;
pub mod multiple_index;
pub mod rang;
pub mod reduction;

pub use matching::{hopcroft_karp, max_matching, BipartiteMatching};
pub use multiple_index::{gen_multiple_index, success_rate, Baseline, MultipleIndexInstance, SuccessRate};
pub use rang::{good_graph_bound, rang, validate_rang, OneToOneInstance, RangMeta};
pub use reduction::{lift_adjacency, lift_many_to_one, sample_reduce};
