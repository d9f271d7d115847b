use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::learning::{learn, select_action, LearnParams};
use super::quantize::{quantize, QuantizedState, QuantizerConfig};
use super::tables::AgentTables;
use super::AgentError;
use crate::grid::ActionSpace;
use crate::radio::{DecisionErrorFlags, RadioEnv, RewardVector, SpectrumState};

/// RNG stream for one role of one mini-slot. Streams never overlap, so each
/// mini-slot's draws are independent of every other mini-slot's.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn env_stream(minislot: usize) -> u64 {
    2 * minislot as u64
}

fn agent_stream(minislot: usize) -> u64 {
    2 * minislot as u64 + 1
}

/// Learner owning the tables of a single mini-slot.
#[derive(Debug, Clone)]
pub struct MinislotAgent {
    pub tables: AgentTables,
    /// Row of the state observed most recently.
    pub state: usize,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinislotStep {
    pub action: usize,
    pub greedy: bool,
    pub reward: RewardVector,
    pub errors: DecisionErrorFlags,
    pub new_state: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeslotOutcome {
    pub t: u64,
    pub steps: Vec<MinislotStep>,
}

impl TimeslotOutcome {
    pub fn throughput(&self) -> i32 {
        self.steps.iter().map(|s| s.reward.throughput).sum()
    }

    pub fn energy(&self) -> i32 {
        -self.steps.iter().map(|s| s.reward.neg_energy).sum::<i32>()
    }
}

/// The AP-side configuration loop: one learner per mini-slot acting on a
/// shared simulated uplink.
#[derive(Debug, Clone)]
pub struct DrcController {
    env: RadioEnv,
    actions: ActionSpace,
    quantizer: QuantizerConfig,
    params: LearnParams,
    seed: u64,
    agents: Vec<MinislotAgent>,
    env_rngs: Vec<ChaCha8Rng>,
    t: u64,
}

impl DrcController {
    pub fn new(
        env: RadioEnv,
        quantizer: QuantizerConfig,
        params: LearnParams,
        seed: u64,
    ) -> Result<Self, AgentError> {
        params.validate()?;
        quantizer.validate()?;
        let actions = ActionSpace::new(env.dims);
        let dims = env.dims;
        let initial = quantize(
            &SpectrumState::noise_floor(dims.num_freqs, env.phy.noise_power),
            env.phy.noise_power,
            &quantizer,
        )?;
        let agents = (0..dims.num_minislots)
            .map(|n| MinislotAgent {
                tables: AgentTables::new(actions.len(), initial.clone(), params.q0()),
                state: 0,
                rng: stream_rng(seed, agent_stream(n)),
            })
            .collect();
        let env_rngs = (0..dims.num_minislots)
            .map(|n| stream_rng(seed, env_stream(n)))
            .collect();
        Ok(Self {
            env,
            actions,
            quantizer,
            params,
            seed,
            agents,
            env_rngs,
            t: 0,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn env(&self) -> &RadioEnv {
        &self.env
    }

    pub fn params(&self) -> &LearnParams {
        &self.params
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn agents(&self) -> &[MinislotAgent] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [MinislotAgent] {
        &mut self.agents
    }

    pub fn avg_rewards(&self) -> Vec<[f64; 2]> {
        self.agents.iter().map(|a| a.tables.avg_reward).collect()
    }

    /// Average-reward estimates summed over mini-slots.
    pub fn summed_avg_reward(&self) -> [f64; 2] {
        self.agents.iter().fold([0.0; 2], |acc, a| {
            [
                acc[0] + a.tables.avg_reward[0],
                acc[1] + a.tables.avg_reward[1],
            ]
        })
    }

    fn quantize_observation(&self, observed: &SpectrumState) -> QuantizedState {
        quantize(observed, self.env.phy.noise_power, &self.quantizer)
            .expect("observed powers include strictly positive noise")
    }

    /// Configures, transmits and learns for every mini-slot of the current
    /// timeslot, then advances `t`.
    pub fn run_timeslot(&mut self) -> TimeslotOutcome {
        let t = self.t;
        let epsilon = self.params.epsilon_at(t);
        let mut steps = Vec::with_capacity(self.agents.len());
        for n in 0..self.agents.len() {
            let sel = {
                let agent = &mut self.agents[n];
                select_action(
                    &agent.tables,
                    agent.state,
                    &self.params,
                    epsilon,
                    &mut agent.rng,
                )
            };
            let outcome =
                self.env
                    .step_minislot(self.actions.get(sel.action), n, t, &mut self.env_rngs[n]);
            let next = self.quantize_observation(&outcome.observed);
            let agent = &mut self.agents[n];
            let (s_next, new_state) = agent.tables.match_or_add_state(&next, self.params.eta);
            learn(
                &mut agent.tables,
                agent.state,
                sel.action,
                outcome.reward,
                s_next,
                &self.params,
                sel.greedy,
            );
            agent.state = s_next;
            steps.push(MinislotStep {
                action: sel.action,
                greedy: sel.greedy,
                reward: outcome.reward,
                errors: outcome.errors,
                new_state,
            });
        }
        self.t += 1;
        TimeslotOutcome { t, steps }
    }

    /// Learner tables, current states and RNG positions, as text.
    pub fn checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "t {}", self.t);
        let _ = writeln!(out, "seed {}", self.seed);
        for (n, agent) in self.agents.iter().enumerate() {
            let _ = writeln!(
                out,
                "agent {n} state {} rng {} env_rng {}",
                agent.state,
                agent.rng.get_word_pos(),
                self.env_rngs[n].get_word_pos()
            );
            out.push_str(&agent.tables.dump());
            let _ = writeln!(out, "end");
        }
        out
    }

    /// Rebuilds a controller from [`checkpoint`](Self::checkpoint) output.
    pub fn restore(
        env: RadioEnv,
        quantizer: QuantizerConfig,
        params: LearnParams,
        text: &str,
    ) -> Result<Self, AgentError> {
        let err = |m: &str| AgentError::Checkpoint(m.to_string());
        let mut lines = text.lines();
        let field = |line: Option<&str>, key: &str| -> Result<u64, AgentError> {
            line.and_then(|l| l.strip_prefix(key))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| AgentError::Checkpoint(format!("missing `{key}`")))
        };
        let t = field(lines.next(), "t ")?;
        let seed = field(lines.next(), "seed ")?;
        let mut ctl = Self::new(env, quantizer, params, seed)?;
        ctl.t = t;
        for n in 0..ctl.agents.len() {
            let head = lines.next().ok_or_else(|| err("missing agent header"))?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            if parts.len() != 8 || parts[0] != "agent" || parts[1] != n.to_string() {
                return Err(err(&format!("bad agent header `{head}`")));
            }
            let state: usize = parts[3].parse().map_err(|_| err("bad state index"))?;
            let rng_pos: u128 = parts[5].parse().map_err(|_| err("bad rng position"))?;
            let env_pos: u128 = parts[7].parse().map_err(|_| err("bad env rng position"))?;
            let mut body = String::new();
            for line in lines.by_ref() {
                if line == "end" {
                    break;
                }
                body.push_str(line);
                body.push('\n');
            }
            let tables = AgentTables::parse_dump(&body)?;
            if tables.num_actions() != ctl.actions.len() || state >= tables.num_states() {
                return Err(err("tables do not fit the configured grid"));
            }
            let agent = &mut ctl.agents[n];
            agent.tables = tables;
            agent.state = state;
            agent.rng.set_word_pos(rng_pos);
            ctl.env_rngs[n].set_word_pos(env_pos);
        }
        Ok(ctl)
    }
}
