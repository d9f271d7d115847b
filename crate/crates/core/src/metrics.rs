//! Per-timeslot bookkeeping: realized rewards, average-reward estimates and
//! decision errors.
//!
//! The error count tallies every (UE, mini-slot) collision with interference.
//! The decision error rates only ask whether a mini-slot, or a timeslot,
//! contained at least one such collision.

use thiserror::Error;

use crate::agent::TimeslotOutcome;
use crate::radio::{DecisionErrorFlags, RewardVector};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("average over zero timeslots is undefined")]
    EmptyWindow,
    #[error("requested {requested} timeslots but only {recorded} are recorded")]
    BeyondTrace { requested: usize, recorded: usize },
    #[error("at most 64 mini-slots per timeslot can be tracked, got {0}")]
    TooManyMinislots(usize),
    #[error("expected {expected} mini-slot entries, got {got}")]
    MinislotMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerLevel {
    Minislot,
    Timeslot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeslotRecord {
    pub t: u64,
    /// Decoded transmissions over the timeslot.
    pub throughput: i32,
    /// Resource blocks used over the timeslot (positive).
    pub energy: i32,
    /// Per-mini-slot `[R, -P]` average-reward estimates after this timeslot.
    pub avg_rewards: Vec<[f64; 2]>,
    pub err_count: u32,
    /// Bit `n` set when zero-based mini-slot `n` had an error.
    pub minislot_err_bits: u64,
    pub timeslot_err: bool,
}

impl TimeslotRecord {
    pub fn summed_avg_reward(&self) -> [f64; 2] {
        self.avg_rewards
            .iter()
            .fold([0.0; 2], |acc, r| [acc[0] + r[0], acc[1] + r[1]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    num_minislots: usize,
    records: Vec<TimeslotRecord>,
    // prefix sums, entry k covers records[..k]
    cum_err_minislots: Vec<u64>,
    cum_err_timeslots: Vec<u64>,
}

impl RunTrace {
    pub fn new(num_minislots: usize) -> Result<Self, MetricsError> {
        if num_minislots > 64 {
            return Err(MetricsError::TooManyMinislots(num_minislots));
        }
        Ok(Self {
            num_minislots,
            records: Vec::new(),
            cum_err_minislots: vec![0],
            cum_err_timeslots: vec![0],
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_minislots(&self) -> usize {
        self.num_minislots
    }

    pub fn records(&self) -> &[TimeslotRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TimeslotRecord> {
        self.records.last()
    }

    /// Appends one timeslot.
    pub fn record_timeslot(
        &mut self,
        flags: &[DecisionErrorFlags],
        rewards: &[RewardVector],
        avg_rewards: Vec<[f64; 2]>,
    ) -> Result<&TimeslotRecord, MetricsError> {
        for got in [flags.len(), rewards.len(), avg_rewards.len()] {
            if got != self.num_minislots {
                return Err(MetricsError::MinislotMismatch {
                    expected: self.num_minislots,
                    got,
                });
            }
        }
        let mut bits = 0u64;
        let mut count = 0u32;
        for (n, f) in flags.iter().enumerate() {
            let c = f.count() as u32;
            if c > 0 {
                bits |= 1 << n;
            }
            count += c;
        }
        let record = TimeslotRecord {
            t: self.records.len() as u64,
            throughput: rewards.iter().map(|r| r.throughput).sum(),
            energy: -rewards.iter().map(|r| r.neg_energy).sum::<i32>(),
            avg_rewards,
            err_count: count,
            minislot_err_bits: bits,
            timeslot_err: bits != 0,
        };
        self.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn record_outcome(
        &mut self,
        outcome: &TimeslotOutcome,
        avg_rewards: Vec<[f64; 2]>,
    ) -> Result<&TimeslotRecord, MetricsError> {
        let flags: Vec<_> = outcome.steps.iter().map(|s| s.errors.clone()).collect();
        let rewards: Vec<_> = outcome.steps.iter().map(|s| s.reward).collect();
        self.record_timeslot(&flags, &rewards, avg_rewards)
    }

    /// Appends an already built record, e.g. when reloading a trace.
    pub fn push(&mut self, record: TimeslotRecord) {
        let ms = u64::from(record.minislot_err_bits.count_ones());
        let ts = u64::from(record.timeslot_err);
        let last_ms = *self.cum_err_minislots.last().expect("non-empty prefix");
        let last_ts = *self.cum_err_timeslots.last().expect("non-empty prefix");
        self.cum_err_minislots.push(last_ms + ms);
        self.cum_err_timeslots.push(last_ts + ts);
        self.records.push(record);
    }

    /// Average decision error rate over the first `upto` timeslots.
    pub fn avg_der(&self, level: DerLevel, upto: usize) -> Result<f64, MetricsError> {
        if upto == 0 {
            return Err(MetricsError::EmptyWindow);
        }
        if upto > self.records.len() {
            return Err(MetricsError::BeyondTrace {
                requested: upto,
                recorded: self.records.len(),
            });
        }
        Ok(match level {
            DerLevel::Minislot => {
                self.cum_err_minislots[upto] as f64 / (self.num_minislots * upto) as f64
            }
            DerLevel::Timeslot => self.cum_err_timeslots[upto] as f64 / upto as f64,
        })
    }

    /// Estimates `(Rbar, Pbar)` summed over mini-slots, one entry per timeslot.
    pub fn avg_reward_series(&self) -> Vec<[f64; 2]> {
        self.records
            .iter()
            .map(TimeslotRecord::summed_avg_reward)
            .collect()
    }

    /// Trailing moving average of [`avg_reward_series`](Self::avg_reward_series).
    pub fn smoothed_avg_reward_series(&self, window: usize) -> Vec<[f64; 2]> {
        let raw = self.avg_reward_series();
        let window = window.max(1);
        let mut acc = [0.0f64; 2];
        let mut out = Vec::with_capacity(raw.len());
        for (i, r) in raw.iter().enumerate() {
            acc[0] += r[0];
            acc[1] += r[1];
            if i >= window {
                acc[0] -= raw[i - window][0];
                acc[1] -= raw[i - window][1];
            }
            let k = (i + 1).min(window) as f64;
            out.push([acc[0] / k, acc[1] / k]);
        }
        out
    }
}
