//! Equalizer zero-determinant strategies in discounted repeated Stackelberg
//! games with two actions per player.
//!
//! The crate evaluates memory-one strategy profiles exactly and by
//! simulation, computes the region of enforceable equalizer parameters,
//! synthesizes the leader's equalizer strategy, and compares the best
//! equalizer against a strong Stackelberg equilibrium found by search.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod evaluation;
pub mod game;
pub mod io;
pub mod scenarios;
pub mod zd;

pub use error::{Error, Result};
pub use game::{Action, GameSpec, MemoryOneStrategy, PayoffTable, ReducedState, StateIndex};
