//! Scenario files, the checks they request and the reports produced from them.

pub mod file;
pub mod report;
pub mod run;

pub use file::{parse_scenario, validate_checks, Check, GridKind, Scenario, ScenarioError};
pub use report::{CheckOutcome, Format, Report, Table};
pub use run::{
    corollary1, game_export, observe_path, play, random_paths, run, run_check, scenario_tree, simulate,
    thresholds, tx_matrix, PathObservation, RunError, RunOptions,
};
