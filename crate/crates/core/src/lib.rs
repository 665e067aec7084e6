//! Service policies for a single server alternating between two Poisson
//! queues with batch (gated) service of unit length.
//!
//! The crate covers three routes to the expected discounted waiting cost:
//!
//! * [`cyclic`]: closed forms for the state-independent policy that serves
//!   the slow queue once and then the fast queue `k` times, including the
//!   threshold rule for the optimal `k`.
//! * [`mdp`]: the state-dependent optimum by value iteration on a truncated
//!   grid.
//! * [`sim`]: Monte Carlo estimates for either kind of policy.
//!
//! [`schedule`] evaluates arbitrary periodic schedules and enumerates them
//! exhaustively, and [`report`] assembles the numerical tables emitted by the
//! `batchq` command-line tool.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default). Every parallel path has a sequential twin selected through
//! [`Execution`], and both produce bit-identical results.

pub mod cyclic;
pub mod error;
pub mod mdp;
pub mod model;
pub mod par;
pub mod report;
pub mod schedule;
pub mod sim;

pub use cyclic::{CyclicPolicy, KStarResult};
pub use error::{Error, Result};
pub use mdp::{SolverConfig, ValueTable};
pub use model::{Action, ModelParams, QueueState, TruncatedPmf};
pub use par::Execution;
pub use schedule::Schedule;
pub use sim::{SimConfig, SimEstimate};
