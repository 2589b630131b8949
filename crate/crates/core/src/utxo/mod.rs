//! UTXO model: spending conditions, transactions, the P1 collateral lock and chunked collateral.

pub mod collateral;
pub mod condition;
pub mod ledger;

pub use collateral::{
    build_chunked_collateral, build_pi1_collateral_tx, funding_set, realize_pi1_settlement, redistribute_chunks,
    spend_matrix, spend_matrix_csv, ChunkError, RealizeError, Realization,
};
pub use condition::{eval_condition, Condition, Signature, Witness};
pub use ledger::{apply_tx, Branch, OutPoint, Output, Transaction, UtxoError, UtxoSet};
