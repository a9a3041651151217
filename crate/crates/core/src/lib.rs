//! Bandit-driven curriculum scheduling.
//!
//! Training examples are ranked by how well their raw bytes compress and
//! split into difficulty tasks. A multi-armed bandit (UCB1 or EXP3) then
//! chooses which task to train on at each step, rewarded by the learner's
//! loss-based progress. Random and easy-to-hard sequential orderings are
//! provided as baselines.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod policy;
pub mod report;
pub mod reward;
pub mod scheduler;

pub use error::{Error, Result};
