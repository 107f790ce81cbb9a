//! Continuous-time frog model on the integer lattice.
//!
//! Dormant particles sit on the sites of `Z^d`; the particles at the origin
//! start active. Active particles perform continuous-time random walks with an
//! arbitrary waiting-time law between jumps, and the first visit of an active
//! particle to a site wakes every particle sleeping there.
//!
//! The crate is organised as:
//!
//! - [`stream`]: counter-based random streams keyed by `(seed, path)`.
//! - [`laws`]: waiting-time and occupancy laws and their functionals.
//! - [`engine`]: the event-driven simulator, slowing policies and couplings.
//! - [`construction`]: the staged chain-of-sites construction with restarts.
//! - [`analysis`]: Monte-Carlo bound verdicts, growth curves, explosion proxies.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod construction;
pub mod engine;
pub mod error;
pub mod laws;
pub mod stream;
pub mod walk;

pub use error::{FrogError, Result};
pub use laws::{InitLaw, JumpLaw, MassEstimate};
pub use stream::{derive_stream, RandomStream};
