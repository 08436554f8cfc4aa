//! Kingman's mutation-selection model with constant and i.i.d. random
//! mutation probabilities.
//!
//! The population is a fitness distribution on `[0, 1]`. Each generation
//! size-biases it by fitness and then replaces a fraction `β_n` of it with
//! the mutant law `Q`. The crate computes deterministic equilibria, runs the
//! forward and backward recursions on finite atomic measures, estimates
//! condensate masses at the top fitness `h`, and decides whether mass
//! condenses there under a random mutation law.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod error;
pub mod backward;
pub mod condensation;
pub mod config;
pub mod forward;
pub mod kingman;
pub mod law;
pub mod measure;
pub mod quadrature;
pub mod seed;
pub mod stats;
pub mod two_atom;
pub mod validation;

pub use error::{Error, Result};
pub use law::{BetaStream, MutationLaw};
pub use measure::{Atom, DiscreteMeasure, SupportInfo};
pub use seed::SeedSpec;
