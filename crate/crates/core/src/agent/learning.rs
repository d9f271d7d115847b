//! Weighted-sum action choice and the vector R-learning updates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tables::AgentTables;
use super::AgentError;
use crate::radio::RewardVector;

/// How the exploration branch defines "not yet explored".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationRule {
    /// Actions whose scalarized value still equals the scalarized initial
    /// value `w . q0` (exact comparison).
    #[default]
    InitialValue,
    /// Actions never updated in this state.
    Untried,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnParams {
    pub w_r: f64,
    pub w_p: f64,
    pub kappa_q: f64,
    pub kappa_r: f64,
    pub epsilon: f64,
    /// Per-timeslot multiplicative decay of `epsilon`; 1.0 keeps it constant.
    pub epsilon_decay: f64,
    pub eta: f64,
    pub q0_r: f64,
    pub q0_p: f64,
    pub exploration: ExplorationRule,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            w_r: 1.0,
            w_p: 0.5,
            kappa_q: 0.1,
            kappa_r: 0.05,
            epsilon: 0.15,
            epsilon_decay: 1.0,
            eta: 1.0,
            q0_r: 0.0,
            q0_p: 0.0,
            exploration: ExplorationRule::default(),
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let unit = |name, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(AgentError::InvalidParam(name, v))
            }
        };
        if !(self.w_r >= 0.0 && self.w_p >= 0.0) || (self.w_r == 0.0 && self.w_p == 0.0) {
            return Err(AgentError::InvalidWeights(self.w_r, self.w_p));
        }
        unit("kappa_q", self.kappa_q)?;
        unit("kappa_r", self.kappa_r)?;
        unit("epsilon_decay", self.epsilon_decay)?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(AgentError::InvalidParam("epsilon", self.epsilon));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(AgentError::InvalidParam("eta", self.eta));
        }
        for (name, v) in [("q0_r", self.q0_r), ("q0_p", self.q0_p)] {
            if !v.is_finite() {
                return Err(AgentError::InvalidParam(name, v));
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> [f64; 2] {
        [self.w_r, self.w_p]
    }

    pub fn q0(&self) -> [f64; 2] {
        [self.q0_r, self.q0_p]
    }

    /// Exploration probability in timeslot `t`.
    pub fn epsilon_at(&self, t: u64) -> f64 {
        if self.epsilon_decay == 1.0 {
            self.epsilon
        } else {
            self.epsilon * self.epsilon_decay.powf(t as f64)
        }
    }
}

/// Single-objective R-learning: same machinery, energy weight set to zero.
pub fn baseline_mode(params: &LearnParams) -> LearnParams {
    LearnParams {
        w_r: 1.0,
        w_p: 0.0,
        ..*params
    }
}

#[inline]
pub fn scalarize(w: [f64; 2], q: [f64; 2]) -> f64 {
    w[0] * q[0] + w[1] * q[1]
}

/// Greedy action at `s`; the lowest index wins ties.
pub fn greedy_action(tables: &AgentTables, s: usize, w: [f64; 2]) -> usize {
    let (r, p) = (tables.row_r(s), tables.row_p(s));
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for a in 0..tables.num_actions() {
        let v = scalarize(w, [r[a], p[a]]);
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    best
}

/// Actions eligible for the exploration branch at `s`, ascending.
pub fn unexplored_actions(tables: &AgentTables, s: usize, params: &LearnParams) -> Vec<usize> {
    match params.exploration {
        ExplorationRule::Untried => (0..tables.num_actions())
            .filter(|&a| !tables.is_explored(s, a))
            .collect(),
        ExplorationRule::InitialValue => {
            let w = params.weights();
            let init = scalarize(w, params.q0());
            let (r, p) = (tables.row_r(s), tables.row_p(s));
            (0..tables.num_actions())
                .filter(|&a| scalarize(w, [r[a], p[a]]) == init)
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: usize,
    /// True when the action came from the greedy rule, including the
    /// fallback taken when nothing is left to explore.
    pub greedy: bool,
}

/// Draws `u ~ U(0,1)`; greedy when `u >= epsilon`, otherwise a uniform pick
/// among unexplored actions (greedy if there are none).
pub fn select_action<R: Rng + ?Sized>(
    tables: &AgentTables,
    s: usize,
    params: &LearnParams,
    epsilon: f64,
    rng: &mut R,
) -> Selection {
    let u: f64 = rng.random();
    if u < epsilon {
        let candidates = unexplored_actions(tables, s, params);
        if !candidates.is_empty() {
            let pick = candidates[rng.random_range(0..candidates.len())];
            return Selection {
                action: pick,
                greedy: false,
            };
        }
    }
    Selection {
        action: greedy_action(tables, s, params.weights()),
        greedy: true,
    }
}

/// Action values read before either update is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdSnapshot {
    pub q_sa: [f64; 2],
    pub q_next: [f64; 2],
}

pub fn td_snapshot(
    tables: &AgentTables,
    s: usize,
    a: usize,
    s_next: usize,
    w: [f64; 2],
) -> TdSnapshot {
    let a_star = greedy_action(tables, s_next, w);
    TdSnapshot {
        q_sa: tables.q(s, a),
        q_next: tables.q(s_next, a_star),
    }
}

/// `q(s,a) <- q(s,a)(1-kq) + kq (r - rbar + q(s', a*))`, both components.
pub fn update_q(
    tables: &mut AgentTables,
    s: usize,
    a: usize,
    reward: RewardVector,
    snap: &TdSnapshot,
    kappa_q: f64,
) {
    let r = reward.as_array();
    let rbar = tables.avg_reward;
    let q = std::array::from_fn(|k| {
        snap.q_sa[k] * (1.0 - kappa_q) + kappa_q * (r[k] - rbar[k] + snap.q_next[k])
    });
    tables.set_q(s, a, q);
    tables.record_visit(s, a);
}

/// `rbar <- rbar(1-kr) + kr (r + q(s', a*) - q(s,a))`, only for greedy steps.
pub fn update_avg_reward(
    tables: &mut AgentTables,
    reward: RewardVector,
    snap: &TdSnapshot,
    kappa_r: f64,
    greedy: bool,
) {
    if !greedy {
        return;
    }
    let r = reward.as_array();
    let rbar = tables.avg_reward;
    tables.avg_reward = std::array::from_fn(|k| {
        rbar[k] * (1.0 - kappa_r) + kappa_r * (r[k] + snap.q_next[k] - snap.q_sa[k])
    });
}

/// One learning step for the transition `(s, a) -> s_next`.
pub fn learn(
    tables: &mut AgentTables,
    s: usize,
    a: usize,
    reward: RewardVector,
    s_next: usize,
    params: &LearnParams,
    greedy: bool,
) {
    let snap = td_snapshot(tables, s, a, s_next, params.weights());
    update_q(tables, s, a, reward, &snap, params.kappa_q);
    update_avg_reward(tables, reward, &snap, params.kappa_r, greedy);
}
