//! Local causal states as predictive spacetime autoencoders.
//!
//! The pipeline runs on 1+1 dimensional fields with periodic space:
//!
//! 1. [`lattice`] simulates the circle-map coupled map lattice.
//! 2. [`lightcone`] extracts past and future lightcones and defines the
//!    decay-weighted lightcone distance.
//! 3. [`clustering`] discretizes lightcones with K-Means and merges past
//!    clusters with indistinguishable predictive distributions.
//! 4. [`causal_states`] assembles the encoder and the stochastic decoder.
//! 5. [`dynamics`] estimates the stochastic cellular automaton over states
//!    and forecasts latent and observable fields.
//!
//! [`format`] holds the binary containers for fields, models and rules.

pub mod causal_states;
pub mod clustering;
pub mod dynamics;
mod error;
pub mod field;
pub mod format;
pub mod lattice;
pub mod lightcone;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use field::{Grid, SpacetimeField, StateField, MARGIN};
