//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use morl_drc::agent::{
    greedy_action, learn, quantize, select_action, unexplored_actions, AgentTables, DrcController,
    ExplorationRule, LearnParams, QuantizedState, QuantizerConfig,
};
use morl_drc::config::{preset, ScenarioConfig};
use morl_drc::experiment::run_experiment;
use morl_drc::grid::{enumerate_actions, validate_action, GridDims, ResourceAction};
use morl_drc::metrics::{DerLevel, RunTrace};
use morl_drc::radio::{DecisionErrorFlags, RadioEnv, RewardVector, SpectrumState};

// ---- action enumeration ------------------------------------------------------

pub fn dims_strategy() -> impl Strategy<Value = GridDims> {
    (2usize..=6).prop_flat_map(|m| {
        (Just(m), 1usize..=3.min(m - 1), 1usize..=4)
            .prop_map(|(m, k, n)| GridDims::new(m, n, k, 1).unwrap())
    })
}

/// Sum over the number of active UEs of (which UEs) x (ordered distinct
/// frequencies).
pub fn action_count_formula(m: usize, k: usize) -> usize {
    let choose = |n: usize, r: usize| (0..r).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
    let perm = |n: usize, r: usize| (0..r).map(|i| n - i).product::<usize>();
    (0..=k).map(|j| choose(k, j) * perm(m, j)).sum()
}

/// Every vector in `{none, f1..fM}^K`, kept when no frequency repeats.
pub fn brute_force_actions(m: usize, k: usize) -> Vec<ResourceAction> {
    let mut out = Vec::new();
    let total = (m + 1).pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let assign: Vec<Option<usize>> = (0..k)
            .map(|_| {
                let d = c % (m + 1);
                c /= m + 1;
                (d > 0).then(|| d - 1)
            })
            .collect();
        let used: Vec<usize> = assign.iter().flatten().copied().collect();
        let mut dedup = used.clone();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.len() == used.len() {
            out.push(ResourceAction::new(assign));
        }
    }
    out
}

pub fn check_enumeration(dims: GridDims) -> Result<(), TestCaseError> {
    let listed = enumerate_actions(&dims);
    let brute = brute_force_actions(dims.num_freqs, dims.num_ues);
    prop_assert_eq!(listed.len(), brute.len());
    prop_assert_eq!(
        listed.len(),
        action_count_formula(dims.num_freqs, dims.num_ues)
    );
    prop_assert!(listed[0].is_idle());
    let mut a: Vec<_> = listed.clone();
    let mut b = brute;
    a.sort_by_key(|x| format!("{x:?}"));
    b.sort_by_key(|x| format!("{x:?}"));
    prop_assert_eq!(a, b);
    for act in &listed {
        prop_assert_eq!(validate_action(&dims, act), Ok(true));
    }
    Ok(())
}

// ---- value and average-reward updates ---------------------------------------

#[derive(Debug, Clone)]
pub struct UpdateCase {
    pub num_actions: usize,
    pub values: Vec<(f64, f64)>,
    pub num_states: usize,
    pub rbar: (f64, f64),
    pub reward: (i32, i32),
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
    pub w: (f64, f64),
    pub kappa_q: f64,
    pub kappa_r: f64,
    pub greedy: bool,
}

pub fn update_case_strategy() -> impl Strategy<Value = UpdateCase> {
    (1usize..=4, 1usize..=8).prop_flat_map(|(ns, na)| {
        (
            prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), ns * na),
            (-20.0f64..20.0, -20.0f64..0.0),
            (0i32..=3, -3i32..=0),
            0..ns,
            0..na,
            0..ns,
            (0.0f64..2.0, 0.0f64..2.0).prop_filter("non-zero weights", |w| w.0 + w.1 > 0.0),
            0.001f64..=1.0,
            0.001f64..=1.0,
            any::<bool>(),
        )
            .prop_map(
                move |(values, rbar, reward, s, a, s_next, w, kq, kr, greedy)| UpdateCase {
                    num_actions: na,
                    values,
                    num_states: ns,
                    rbar,
                    reward,
                    s,
                    a,
                    s_next,
                    w,
                    kappa_q: kq,
                    kappa_r: kr,
                    greedy,
                },
            )
    })
}

fn tables_from(case: &UpdateCase) -> AgentTables {
    let mut t = AgentTables::new(
        case.num_actions,
        QuantizedState { levels: vec![0] },
        [0.0, 0.0],
    );
    for i in 1..case.num_states {
        let (idx, added) = t.match_or_add_state(
            &QuantizedState {
                levels: vec![i as u8],
            },
            0.0,
        );
        assert!(added && idx == i);
    }
    for s in 0..case.num_states {
        for a in 0..case.num_actions {
            let (r, p) = case.values[s * case.num_actions + a];
            t.set_q(s, a, [r, p]);
        }
    }
    t.avg_reward = [case.rbar.0, case.rbar.1];
    t
}

/// The two update rules written out with plain scalars.
pub fn check_update_oracle(case: &UpdateCase) -> Result<(), TestCaseError> {
    let na = case.num_actions;
    let v = |s: usize, a: usize| case.values[s * na + a];
    let mut a_star = 0;
    let mut best = f64::NEG_INFINITY;
    for a in 0..na {
        let (r, p) = v(case.s_next, a);
        let val = case.w.0 * r + case.w.1 * p;
        if val > best {
            best = val;
            a_star = a;
        }
    }
    let (q_sa_r, q_sa_p) = v(case.s, case.a);
    let (qn_r, qn_p) = v(case.s_next, a_star);
    let (rb_r, rb_p) = case.rbar;
    let (r_r, r_p) = (f64::from(case.reward.0), f64::from(case.reward.1));
    let kq = case.kappa_q;
    let kr = case.kappa_r;
    let want_q_r = q_sa_r * (1.0 - kq) + kq * (r_r - rb_r + qn_r);
    let want_q_p = q_sa_p * (1.0 - kq) + kq * (r_p - rb_p + qn_p);
    let (want_rb_r, want_rb_p) = if case.greedy {
        (
            rb_r * (1.0 - kr) + kr * (r_r + qn_r - q_sa_r),
            rb_p * (1.0 - kr) + kr * (r_p + qn_p - q_sa_p),
        )
    } else {
        (rb_r, rb_p)
    };

    let mut t = tables_from(case);
    let params = LearnParams {
        w_r: case.w.0,
        w_p: case.w.1,
        kappa_q: case.kappa_q,
        kappa_r: case.kappa_r,
        ..LearnParams::default()
    };
    let reward = RewardVector {
        throughput: case.reward.0,
        neg_energy: case.reward.1,
    };
    learn(
        &mut t,
        case.s,
        case.a,
        reward,
        case.s_next,
        &params,
        case.greedy,
    );

    let got = t.q(case.s, case.a);
    prop_assert!(
        (got[0] - want_q_r).abs() <= 1e-12,
        "q_R {} vs {}",
        got[0],
        want_q_r
    );
    prop_assert!(
        (got[1] - want_q_p).abs() <= 1e-12,
        "q_P {} vs {}",
        got[1],
        want_q_p
    );
    prop_assert!((t.avg_reward[0] - want_rb_r).abs() <= 1e-12);
    prop_assert!((t.avg_reward[1] - want_rb_p).abs() <= 1e-12);
    for s in 0..case.num_states {
        for a in 0..na {
            if (s, a) != (case.s, case.a) {
                let (r, p) = v(s, a);
                prop_assert_eq!(t.q(s, a), [r, p]);
            }
        }
    }
    prop_assert!(t.is_explored(case.s, case.a));
    Ok(())
}

// ---- baseline degeneracy -----------------------------------------------------

/// Plain single-objective R-learning over the same simulated uplink, written
/// without the vector machinery. Returns the action indices taken, per
/// timeslot and mini-slot, plus the final throughput tables and average
/// rewards.
pub struct ScalarReference {
    pub actions: Vec<Vec<usize>>,
    pub tables: Vec<Vec<Vec<f64>>>,
    pub rbar: Vec<f64>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn rel_dist(s: &[u8], stored: &[u8]) -> f64 {
    let norm = stored
        .iter()
        .map(|&x| f64::from(x).powi(2))
        .sum::<f64>()
        .sqrt();
    let diff = s
        .iter()
        .zip(stored)
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        if s.iter().all(|&x| x == 0) {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / norm
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn scalar_r_learning(
    env: &RadioEnv,
    quantizer: &QuantizerConfig,
    p: &LearnParams,
    seed: u64,
    timeslots: u64,
) -> ScalarReference {
    let actions = enumerate_actions(&env.dims);
    let na = actions.len();
    let n_ms = env.dims.num_minislots;
    let noise = env.phy.noise_power;
    let start = quantize(
        &SpectrumState::noise_floor(env.dims.num_freqs, noise),
        noise,
        quantizer,
    )
    .unwrap()
    .levels;

    let mut states: Vec<Vec<Vec<u8>>> = vec![vec![start]; n_ms];
    let mut q: Vec<Vec<Vec<f64>>> = vec![vec![vec![p.q0_r; na]]; n_ms];
    let mut rbar = vec![0.0f64; n_ms];
    let mut cur = vec![0usize; n_ms];
    let mut env_rng: Vec<_> = (0..n_ms).map(|n| stream(seed, 2 * n as u64)).collect();
    let mut ag_rng: Vec<_> = (0..n_ms).map(|n| stream(seed, 2 * n as u64 + 1)).collect();
    let mut taken = Vec::new();

    for t in 0..timeslots {
        let eps = p.epsilon_at(t);
        let mut row = Vec::with_capacity(n_ms);
        for n in 0..n_ms {
            let s = cur[n];
            let u: f64 = ag_rng[n].random();
            let mut greedy = true;
            let mut a = usize::MAX;
            if u < eps {
                let fresh: Vec<usize> = (0..na).filter(|&i| q[n][s][i] == p.q0_r).collect();
                if !fresh.is_empty() {
                    a = fresh[ag_rng[n].random_range(0..fresh.len())];
                    greedy = false;
                }
            }
            if greedy {
                a = argmax(&q[n][s]);
            }
            row.push(a);

            let out = env.step_minislot(&actions[a], n, t, &mut env_rng[n]);
            let obs = quantize(&out.observed, noise, quantizer).unwrap().levels;
            let mut hit: Option<(usize, f64)> = None;
            for (i, st) in states[n].iter().enumerate() {
                let d = rel_dist(&obs, st);
                if d <= p.eta && hit.is_none_or(|(_, bd)| d < bd) {
                    hit = Some((i, d));
                }
            }
            let s2 = match hit {
                Some((i, _)) => i,
                None => {
                    states[n].push(obs);
                    q[n].push(vec![p.q0_r; na]);
                    states[n].len() - 1
                }
            };
            let r = f64::from(out.reward.throughput);
            let q_sa = q[n][s][a];
            let q_next = q[n][s2][argmax(&q[n][s2])];
            q[n][s][a] = q_sa * (1.0 - p.kappa_q) + p.kappa_q * (r - rbar[n] + q_next);
            if greedy {
                rbar[n] = rbar[n] * (1.0 - p.kappa_r) + p.kappa_r * (r + q_next - q_sa);
            }
            cur[n] = s2;
        }
        taken.push(row);
    }
    ScalarReference {
        actions: taken,
        tables: q,
        rbar,
    }
}

pub fn check_baseline_degeneracy(
    cfg: &ScenarioConfig,
    seed: u64,
    timeslots: u64,
) -> Result<(), TestCaseError> {
    let base = cfg.baseline();
    prop_assert_eq!(base.learning.w_p, 0.0);
    prop_assert_eq!(base.learning.exploration, ExplorationRule::InitialValue);
    let env = base.environment().unwrap();
    let reference = scalar_r_learning(&env, &base.quantizer, &base.learning, seed, timeslots);
    let mut ctl = DrcController::new(env, base.quantizer, base.learning, seed).unwrap();
    for t in 0..timeslots as usize {
        let out = ctl.run_timeslot();
        let got: Vec<usize> = out.steps.iter().map(|s| s.action).collect();
        prop_assert_eq!(&got, &reference.actions[t], "timeslot {}", t);
    }
    for (n, agent) in ctl.agents().iter().enumerate() {
        prop_assert_eq!(
            agent.tables.avg_reward[0].to_bits(),
            reference.rbar[n].to_bits()
        );
        prop_assert_eq!(agent.tables.num_states(), reference.tables[n].len());
        for (s, row) in reference.tables[n].iter().enumerate() {
            let lib: Vec<u64> = agent.tables.row_r(s).iter().map(|v| v.to_bits()).collect();
            let refr: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(lib, refr, "mini-slot {} state {}", n, s);
        }
    }
    Ok(())
}

// ---- table shape -----------------------------------------------------------------

/// Drives one table through `ops` random state lookups and updates and checks
/// that the row counts of all per-state arrays agree after every step.
pub fn check_table_shape(seed: u64, ops: usize) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = 43;
    let mut t = AgentTables::new(na, QuantizedState::zeros(6), [0.0, 0.0]);
    let params = LearnParams::default();
    let mut s = 0;
    for _ in 0..ops {
        if rng.random_bool(0.5) {
            let levels = (0..6).map(|_| rng.random_range(0..8u8)).collect();
            let eta = [0.0, 0.1, 0.5, 1.0][rng.random_range(0..4)];
            let before = t.num_states();
            let (i, added) = t.match_or_add_state(&QuantizedState { levels }, eta);
            prop_assert!(i < t.num_states());
            prop_assert_eq!(t.num_states(), before + usize::from(added));
            s = i;
        } else {
            let a = rng.random_range(0..na);
            let s2 = rng.random_range(0..t.num_states());
            let reward = RewardVector {
                throughput: rng.random_range(0..=2),
                neg_energy: -rng.random_range(0..=2),
            };
            learn(&mut t, s, a, reward, s2, &params, rng.random_bool(0.9));
            s = s2;
        }
        let n = t.num_states();
        prop_assert_eq!(t.row_counts(), (n, n, n));
        prop_assert_eq!(t.states().len(), n);
    }
    Ok(())
}

// ---- argmax invariance -----------------------------------------------------------

/// Values, weights and scale on coarse dyadic grids so every product is exact.
pub fn scaling_strategy() -> impl Strategy<Value = (Vec<(i32, i32)>, (u32, u32), u32)> {
    (
        prop::collection::vec((-128i32..=128, -128i32..=128), 1..=43),
        (0u32..=16, 0u32..=16).prop_filter("non-zero weights", |w| w.0 + w.1 > 0),
        1u32..=64,
    )
}

pub fn check_argmax_scaling(
    values: &[(i32, i32)],
    w: (u32, u32),
    c: u32,
) -> Result<(), TestCaseError> {
    let mut t = AgentTables::new(values.len(), QuantizedState::zeros(1), [0.0, 0.0]);
    for (a, &(r, p)) in values.iter().enumerate() {
        t.set_q(0, a, [f64::from(r) / 16.0, f64::from(p) / 16.0]);
    }
    let w1 = [f64::from(w.0) / 8.0, f64::from(w.1) / 8.0];
    let k = f64::from(c) / 4.0;
    let w2 = [w1[0] * k, w1[1] * k];
    prop_assert_eq!(greedy_action(&t, 0, w1), greedy_action(&t, 0, w2));
    Ok(())
}

// ---- DER bookkeeping -------------------------------------------------------------

pub fn der_strategy() -> impl Strategy<Value = (usize, Vec<Vec<Vec<bool>>>)> {
    (1usize..=8, 1usize..=3).prop_flat_map(|(n, k)| {
        (
            Just(n),
            prop::collection::vec(
                prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.15), k), n),
                1..=120,
            ),
        )
    })
}

pub fn check_der_recount(n: usize, slots: &[Vec<Vec<bool>>]) -> Result<(), TestCaseError> {
    let mut trace = RunTrace::new(n).unwrap();
    for (t, ts) in slots.iter().enumerate() {
        let flags: Vec<_> = ts
            .iter()
            .map(|f| DecisionErrorFlags { per_ue: f.clone() })
            .collect();
        trace
            .record_timeslot(&flags, &vec![RewardVector::default(); n], vec![[0.0; 2]; n])
            .unwrap();
        let upto = t + 1;
        let bad_ms: usize = slots[..upto]
            .iter()
            .map(|s| s.iter().filter(|f| f.iter().any(|&b| b)).count())
            .sum();
        let bad_ts = slots[..upto]
            .iter()
            .filter(|s| s.iter().any(|f| f.iter().any(|&b| b)))
            .count();
        let ms = trace.avg_der(DerLevel::Minislot, upto).unwrap();
        let tsd = trace.avg_der(DerLevel::Timeslot, upto).unwrap();
        prop_assert_eq!(ms, bad_ms as f64 / (n * upto) as f64);
        prop_assert_eq!(tsd, bad_ts as f64 / upto as f64);
        prop_assert!(tsd >= ms);
        let count: usize = ts.iter().map(|f| f.iter().filter(|&&b| b).count()).sum();
        prop_assert_eq!(trace.records()[t].err_count as usize, count);
    }
    Ok(())
}

// ---- exploration ---------------------------------------------------------------

/// Exploratory picks always come from the unexplored set; under the untried
/// rule an action already updated is never explored again.
pub fn check_exploration(seed: u64, rule: ExplorationRule) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = LearnParams {
        epsilon: 0.5,
        exploration: rule,
        ..LearnParams::default()
    };
    let na = 12;
    let mut t = AgentTables::new(na, QuantizedState::zeros(1), params.q0());
    for _ in 0..400 {
        let before = unexplored_actions(&t, 0, &params);
        let explored_before: Vec<bool> = (0..na).map(|a| t.is_explored(0, a)).collect();
        let sel = select_action(&t, 0, &params, params.epsilon, &mut rng);
        if !sel.greedy {
            prop_assert!(before.contains(&sel.action));
            if rule == ExplorationRule::Untried {
                prop_assert!(!explored_before[sel.action]);
            }
        } else {
            prop_assert_eq!(sel.action, greedy_action(&t, 0, params.weights()));
        }
        let reward = RewardVector {
            throughput: rng.random_range(0..=2),
            neg_energy: -rng.random_range(0..=2),
        };
        learn(&mut t, 0, sel.action, reward, 0, &params, sel.greedy);
    }
    Ok(())
}

// ---- seeded determinism ----------------------------------------------------------

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

/// Runs `preset_name` twice into fresh directories and compares every CSV
/// byte for byte.
pub fn check_seeded_determinism(
    preset_name: &str,
    horizon: u64,
    seeds: &[u64],
) -> Result<(), TestCaseError> {
    let mut cfg = preset(preset_name).unwrap();
    cfg.horizon = horizon;
    cfg.seeds = seeds.to_vec();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, a.path(), false).unwrap();
    run_experiment(&cfg, b.path(), false).unwrap();
    let fa = csv_files(a.path());
    let fb = csv_files(b.path());
    prop_assert!(!fa.is_empty());
    prop_assert_eq!(fa.len(), fb.len());
    for ((na, da), (nb, db)) in fa.iter().zip(&fb) {
        prop_assert_eq!(na, nb);
        prop_assert!(da == db, "{} differs between identical runs", na);
    }
    Ok(())
}
