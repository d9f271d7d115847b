//! Dynamic resource configuration for grant-free IoT uplinks, learned with
//! multi-objective average-reward reinforcement learning.

pub mod agent;
pub mod config;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod radio;
pub mod report;
