//! Self-supervised reinforcement learning: collect episodes with a stochastic
//! policy, keep the state-action pairs from the best episodes in a ranking
//! buffer, and regress the policy onto them.

pub mod envs;
pub mod error;
pub mod io;
pub mod mdp;
pub mod oracle;
pub mod policy;
pub mod replay;
pub mod trainer;

pub use error::{Error, Result};
