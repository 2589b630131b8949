//! Extensive-form games induced by the protocols and a pure-strategy SPE solver.

pub mod build;
pub mod profile;
pub mod solve;
pub mod tree;

pub use build::{
    build_gamma1, build_gamma2, build_gamma3, build_gamma3_nature, build_gamma3_unchecked, default_grid,
    quarter_grid, repay_label, BuildError, RoundDistribution,
};
pub use profile::{honest_profile, honest_rule, oracle_free_rule, profile_from_rule};
pub use solve::{
    is_spe, profile_values, solve_spe, solve_spe_capped, Equilibrium, SolveError, SpeSet, SpeVerdict,
    StrategyProfile, Witness,
};
pub use tree::{export_dot, GameNode, GameTree, InfoSetId, NodeId, NodeKind, NodeTag, TreeError};
