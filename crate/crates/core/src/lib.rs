//! Simulation library for a two-link brachiating robot travelling on a
//! flexible overhead cable.

pub mod cable;
pub mod checks;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod oracle;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
