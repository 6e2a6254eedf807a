//! Convex-programming policies for linearly constrained (safe) linear bandits.
//!
//! The crate is layered bottom-up:
//!
//! - [`conic`]: LP/SOCP representation, the solving contract and vertex
//!   purification of LP solutions.
//! - [`decision_set`]: decision sets as unions of conic-representable convex
//!   pieces, and the perspective lift that turns optimization over their
//!   convex hull into one conic program.
//! - [`estimation`]: regularized least-squares state, confidence radii and
//!   the vertices of the ℓ1 confidence polytope.
//! - [`policy`]: the omniscient optimal policy, the ℓ1 optimistic-pessimistic
//!   step and the upper-bound-maximization step.
//! - [`environment`]: the simulated bandit, regret ledger and violation checks.
//! - [`harness`]: configuration, single runs, replicated studies, presets and
//!   CSV/SVG artifacts.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conic;
pub mod decision_set;
pub mod environment;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod policy;

pub use error::{Error, Result};
