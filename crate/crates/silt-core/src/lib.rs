//! Simulation and exact-verification toolkit for the self-intersection
//! local times of the simple symmetric random walk on `Z^d`.
//!
//! The crate combines three kinds of machinery that check each other:
//!
//! * exact combinatorial oracles (transition-probability tables, killed-walk
//!   tables, full path enumeration) in [`oracle`];
//! * deterministic structural identities of the dyadic strand decomposition
//!   of a walk (midpoint identity, level-set inclusions, pair-count
//!   domination) in [`dyadic`];
//! * reproducible Monte Carlo estimators for rare events, confined walks and
//!   random walk in random scenery in [`rare_event`] and [`rwrs`].
//!
//! All randomness flows through counter-based [`rng::RngStream`] handles, so
//! every estimate is a pure function of `(seed, stream, parameters)`,
//! independent of platform and worker count.

pub mod dyadic;
mod error;
pub mod field;
pub mod oracle;
pub mod rare_event;
pub mod rng;
pub mod rwrs;
pub mod walk;

pub use error::{Result, SiltError};
