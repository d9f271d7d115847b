//! Growing lookup tables of one mini-slot agent, plus their text dump.
//!
//! Rows are states discovered so far, columns are action indices of the
//! mini-slot action space. A state farther than `eta` (relative 2-norm) from
//! every stored state gets a fresh row initialized to `q0`.

use std::fmt::Write as _;

use super::quantize::QuantizedState;
use super::AgentError;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTables {
    num_actions: usize,
    q0: [f64; 2],
    states: Vec<QuantizedState>,
    table_r: Vec<f64>,
    table_p: Vec<f64>,
    visits: Vec<u32>,
    /// Running estimate of the average reward vector `[R, -P]`.
    pub avg_reward: [f64; 2],
}

impl AgentTables {
    /// Tables holding the single bootstrap state.
    pub fn new(num_actions: usize, initial: QuantizedState, q0: [f64; 2]) -> Self {
        let mut t = Self {
            num_actions,
            q0,
            states: Vec::new(),
            table_r: Vec::new(),
            table_p: Vec::new(),
            visits: Vec::new(),
            avg_reward: [0.0; 2],
        };
        t.push_state(initial);
        t
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[QuantizedState] {
        &self.states
    }

    pub fn q0(&self) -> [f64; 2] {
        self.q0
    }

    pub fn row_counts(&self) -> (usize, usize, usize) {
        let n = self.num_actions;
        (
            self.table_r.len() / n,
            self.table_p.len() / n,
            self.visits.len() / n,
        )
    }

    fn idx(&self, s: usize, a: usize) -> usize {
        debug_assert!(s < self.states.len() && a < self.num_actions);
        s * self.num_actions + a
    }

    pub fn q(&self, s: usize, a: usize) -> [f64; 2] {
        let i = self.idx(s, a);
        [self.table_r[i], self.table_p[i]]
    }

    pub fn set_q(&mut self, s: usize, a: usize, q: [f64; 2]) {
        let i = self.idx(s, a);
        self.table_r[i] = q[0];
        self.table_p[i] = q[1];
    }

    pub fn is_explored(&self, s: usize, a: usize) -> bool {
        self.visits[self.idx(s, a)] > 0
    }

    /// Number of updates applied to `q(s, a)`.
    pub fn visits(&self, s: usize, a: usize) -> u32 {
        self.visits[self.idx(s, a)]
    }

    pub fn record_visit(&mut self, s: usize, a: usize) {
        let i = self.idx(s, a);
        self.visits[i] = self.visits[i].saturating_add(1);
    }

    pub fn row_r(&self, s: usize) -> &[f64] {
        &self.table_r[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn row_p(&self, s: usize) -> &[f64] {
        &self.table_p[s * self.num_actions..(s + 1) * self.num_actions]
    }

    fn push_state(&mut self, s: QuantizedState) -> usize {
        self.states.push(s);
        self.table_r
            .extend(std::iter::repeat_n(self.q0[0], self.num_actions));
        self.table_p
            .extend(std::iter::repeat_n(self.q0[1], self.num_actions));
        self.visits.extend(std::iter::repeat_n(0, self.num_actions));
        self.states.len() - 1
    }

    /// Index of the nearest stored state within `eta`, appending `s` as a new
    /// state when none qualifies. Returns `(index, was_added)`.
    pub fn match_or_add_state(&mut self, s: &QuantizedState, eta: f64) -> (usize, bool) {
        let mut best: Option<(usize, f64)> = None;
        for (i, stored) in self.states.iter().enumerate() {
            let d = s.relative_distance(stored);
            if d <= eta && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, _)) => (i, false),
            None => (self.push_state(s.clone()), true),
        }
    }

    /// Text dump: header, states, both tables, visit counts.
    /// Floats use the shortest representation that parses back exactly.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "actions {}", self.num_actions);
        let _ = writeln!(out, "states {}", self.states.len());
        let _ = writeln!(out, "q0 {} {}", self.q0[0], self.q0[1]);
        let _ = writeln!(
            out,
            "avg_reward {} {}",
            self.avg_reward[0], self.avg_reward[1]
        );
        for s in &self.states {
            let lv: Vec<String> = s.levels.iter().map(u8::to_string).collect();
            let _ = writeln!(out, "state {}", lv.join(" "));
        }
        for (name, table) in [("table_r", &self.table_r), ("table_p", &self.table_p)] {
            let _ = writeln!(out, "{name}");
            for row in table.chunks(self.num_actions) {
                let vals: Vec<String> = row.iter().map(f64::to_string).collect();
                let _ = writeln!(out, "{}", vals.join(" "));
            }
        }
        let _ = writeln!(out, "visits");
        for row in self.visits.chunks(self.num_actions) {
            let vals: Vec<String> = row.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{}", vals.join(" "));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self, AgentError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| {
                AgentError::Dump(0, format!("unexpected end of dump, wanted {what}"))
            })
        };
        let bad = |line: usize, msg: &str| AgentError::Dump(line + 1, msg.to_string());

        let header = |(ln, l): (usize, &str), key: &str| -> Result<Vec<String>, AgentError> {
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(AgentError::Dump(ln + 1, format!("expected `{key}`")));
            }
            Ok(it.map(String::from).collect())
        };
        let num = |ln: usize, s: &str| -> Result<f64, AgentError> {
            s.parse::<f64>()
                .map_err(|_| bad(ln, &format!("bad number `{s}`")))
        };

        let (ln, l) = next("actions")?;
        let num_actions: usize = header((ln, l), "actions")?
            .first()
            .and_then(|v| v.parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| bad(ln, "bad action count"))?;
        let (ln, l) = next("states")?;
        let num_states: usize = header((ln, l), "states")?
            .first()
            .and_then(|v| v.parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| bad(ln, "bad state count"))?;
        let pair = |ln: usize, v: Vec<String>| -> Result<[f64; 2], AgentError> {
            if v.len() != 2 {
                return Err(bad(ln, "expected two values"));
            }
            Ok([num(ln, &v[0])?, num(ln, &v[1])?])
        };
        let (ln, l) = next("q0")?;
        let q0 = pair(ln, header((ln, l), "q0")?)?;
        let (ln, l) = next("avg_reward")?;
        let avg_reward = pair(ln, header((ln, l), "avg_reward")?)?;

        let mut states = Vec::with_capacity(num_states);
        for _ in 0..num_states {
            let (ln, l) = next("state")?;
            let levels = header((ln, l), "state")?
                .iter()
                .map(|v| v.parse::<u8>().map_err(|_| bad(ln, "bad state level")))
                .collect::<Result<Vec<_>, _>>()?;
            states.push(QuantizedState { levels });
        }
        let mut tables = Vec::new();
        for key in ["table_r", "table_p"] {
            let (ln, l) = next(key)?;
            header((ln, l), key)?;
            let mut t = Vec::with_capacity(num_states * num_actions);
            for _ in 0..num_states {
                let (ln, l) = next("table row")?;
                let row = l
                    .split_whitespace()
                    .map(|v| num(ln, v))
                    .collect::<Result<Vec<_>, _>>()?;
                if row.len() != num_actions {
                    return Err(bad(ln, "table row has the wrong length"));
                }
                t.extend(row);
            }
            tables.push(t);
        }
        let (ln, l) = next("visits")?;
        header((ln, l), "visits")?;
        let mut visits = Vec::with_capacity(num_states * num_actions);
        for _ in 0..num_states {
            let (ln, l) = next("visits row")?;
            let row = l
                .split_whitespace()
                .map(|v| {
                    v.parse::<u32>()
                        .map_err(|_| bad(ln, &format!("bad visit count `{v}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != num_actions {
                return Err(bad(ln, "visits row has the wrong length"));
            }
            visits.extend(row);
        }
        let table_p = tables.pop().unwrap_or_default();
        let table_r = tables.pop().unwrap_or_default();
        Ok(Self {
            num_actions,
            q0,
            states,
            table_r,
            table_p,
            visits,
            avg_reward,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(v: &[u8]) -> QuantizedState {
        QuantizedState { levels: v.to_vec() }
    }

    #[test]
    fn identical_state_is_matched() {
        let mut t = AgentTables::new(4, st(&[0, 0, 0]), [0.0, 0.0]);
        let (i, added) = t.match_or_add_state(&st(&[0, 0, 0]), 0.1);
        assert_eq!((i, added), (0, false));
        assert_eq!(t.num_states(), 1);
    }

    #[test]
    fn first_distinct_state_grows_tables() {
        let mut t = AgentTables::new(4, st(&[0, 0, 0]), [0.5, -0.5]);
        let (i, added) = t.match_or_add_state(&st(&[3, 0, 0]), 0.1);
        assert_eq!((i, added), (1, true));
        assert_eq!(t.row_counts(), (2, 2, 2));
        assert_eq!(t.q(1, 3), [0.5, -0.5]);
        assert!(!t.is_explored(1, 0));
    }

    #[test]
    fn nearest_within_eta_wins_lowest_index_on_ties() {
        let mut t = AgentTables::new(2, st(&[10, 0]), [0.0; 2]);
        t.match_or_add_state(&st(&[0, 10]), 0.0);
        t.match_or_add_state(&st(&[10, 1]), 0.0);
        // [10, 1] is exact match for index 2 even though index 0 is also within eta
        assert_eq!(t.match_or_add_state(&st(&[10, 1]), 0.5), (2, false));
        // equidistant from 0 and 2 when measured relative; lowest index kept on exact ties
        let mut u = AgentTables::new(2, st(&[4, 0]), [0.0; 2]);
        u.match_or_add_state(&st(&[0, 4]), 0.0);
        assert_eq!(u.match_or_add_state(&st(&[2, 2]), 1.0), (0, false));
    }

    #[test]
    fn dump_roundtrip_is_exact() {
        let mut t = AgentTables::new(3, st(&[0, 0]), [0.0, 0.0]);
        t.match_or_add_state(&st(&[3, 2]), 0.1);
        t.set_q(1, 2, [0.1 + 0.2, -1.0 / 3.0]);
        t.record_visit(1, 2);
        t.record_visit(1, 2);
        t.avg_reward = [1.9999999999999998, -2.0];
        let text = t.dump();
        let back = AgentTables::parse_dump(&text).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn dump_parse_reports_errors() {
        assert!(AgentTables::parse_dump("").is_err());
        assert!(AgentTables::parse_dump(
            "actions 2\nstates 1\nq0 0 0\navg_reward 0 0\nstate 0\ntable_r\n0\n"
        )
        .is_err());
    }
}
