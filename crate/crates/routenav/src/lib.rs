//! Desk-scale navigation-learning laboratory.
//!
//! The pipeline mirrors a real deployment study end to end, on synthetic
//! data small enough to run on a laptop:
//!
//! 1. [`traversal`] — synthetic route traversals with appearance-change
//!    variants, plus the binary descriptor-table and manifest formats.
//! 2. [`features`] — PCA-plus-whitening reduction of descriptors to compact
//!    visual observations.
//! 3. [`env`] — a goal-driven navigation MDP over a traversal with sparse
//!    rewards and distance curriculum.
//! 4. [`net`] — a recurrent actor-critic (linear encoder, LSTM, policy and
//!    value heads, optional conv encoder) with exact manual gradients.
//! 5. [`ppo`] — clipped-surrogate policy optimization with generalized
//!    advantage estimation over vectorized recurrent rollouts.
//! 6. [`eval`] — single-frame place-recognition AUC and navigation
//!    deployment statistics under appearance change.

pub mod container;
pub mod env;
pub mod error;
pub mod eval;
pub mod features;
pub mod net;
pub mod ppo;
pub mod rng;
pub mod traversal;

pub use error::{Error, Result};
