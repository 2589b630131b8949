//! Simulator and equilibrium checker for fiat-denominated, crypto-collateralized loans.

pub mod model;
pub mod protocols;
pub mod utxo;
pub mod game;
pub mod scenario;
