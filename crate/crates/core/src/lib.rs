//! Gradient descent-ascent in unconstrained bilinear zero-sum games.
//!
//! Agent 1 maximizes and agent 2 minimizes `⟨x1, A x2⟩`. The crate simulates
//! simultaneous and alternating updates with fixed step sizes, plus a
//! continuous-time reference, and checks the properties that separate the two
//! discrete rules: bounded regret, a conserved perturbed energy, bounded
//! orbits, volume preservation and recurrence under alternation.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
pub mod metrics;
pub mod numerics;

pub use error::{Error, Result};
pub use game::{payoff, payoff_agent2, GameInstance, JointState, PayoffMatrix, Stage, StepSizes};
