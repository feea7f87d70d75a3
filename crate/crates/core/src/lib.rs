//! Preference-metric bandits.
//!
//! Arms are scored by the signed Choquet integral of a distortion `h`, and
//! because a distorted utility of a mixture can beat every single arm, the
//! learning target is a point of the simplex rather than an arm index. The
//! crate provides exact and quadrature Choquet evaluation, simplex grids,
//! ground-truth oracles, mixture-learning policies and a seeded harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod choquet;
pub mod config;
pub mod distortion;
pub mod envs;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod policies;
pub mod quadrature;
pub mod simplex;

pub use error::{Error, Result};
