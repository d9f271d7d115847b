//! Per-mini-slot multi-objective R-learning.
//!
//! The timeslot problem splits into one independent learner per mini-slot.
//! Each learner quantizes what it observed, grows its state set on demand, and
//! keeps two action-value tables (throughput and negative energy) combined by
//! a fixed weight vector when choosing actions.

mod controller;
mod learning;
mod quantize;
mod tables;

use thiserror::Error;

pub use controller::{DrcController, MinislotAgent, MinislotStep, TimeslotOutcome};
pub use learning::{
    baseline_mode, greedy_action, learn, scalarize, select_action, td_snapshot, unexplored_actions,
    update_avg_reward, update_q, ExplorationRule, LearnParams, Selection, TdSnapshot,
};
pub use quantize::{quantize, QuantizedState, QuantizerConfig};
pub use tables::AgentTables;

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("parameter `{0}` out of range: {1}")]
    InvalidParam(&'static str, f64),
    #[error("weights must be non-negative and not both zero, got ({0}, {1})")]
    InvalidWeights(f64, f64),
    #[error("cannot quantize non-positive power {0}")]
    NonPositivePower(f64),
    #[error("table dump line {0}: {1}")]
    Dump(usize, String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
