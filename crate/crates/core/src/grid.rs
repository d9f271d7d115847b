//! Time-frequency resource grid and the per-mini-slot action space.
//!
//! An action assigns each UE at most one frequency, and no frequency to more
//! than one UE. Actions are stored compactly as one optional frequency per UE,
//! so the per-UE constraint holds by construction and only frequency
//! exclusivity needs checking.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimension `{0}` must be at least 1")]
    ZeroDimension(&'static str),
    #[error("number of UEs ({ues}) must be smaller than the number of frequencies ({freqs})")]
    TooManyUes { ues: usize, freqs: usize },
    #[error("action covers {got} UEs but the grid has {expected}")]
    UeCountMismatch { expected: usize, got: usize },
    #[error("UE {ue} is assigned frequency index {freq}, grid has {freqs} frequencies")]
    FrequencyOutOfRange {
        ue: usize,
        freq: usize,
        freqs: usize,
    },
    #[error("timeslot action has {got} mini-slot entries, expected {expected}")]
    MinislotCountMismatch { expected: usize, got: usize },
}

/// Sizes of the resource grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub num_freqs: usize,
    pub num_minislots: usize,
    pub num_ues: usize,
    pub num_interferers: usize,
}

impl GridDims {
    pub fn new(
        num_freqs: usize,
        num_minislots: usize,
        num_ues: usize,
        num_interferers: usize,
    ) -> Result<Self, GridError> {
        let dims = Self {
            num_freqs,
            num_minislots,
            num_ues,
            num_interferers,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (name, v) in [
            ("num_freqs", self.num_freqs),
            ("num_minislots", self.num_minislots),
            ("num_ues", self.num_ues),
            ("num_interferers", self.num_interferers),
        ] {
            if v == 0 {
                return Err(GridError::ZeroDimension(name));
            }
        }
        if self.num_ues >= self.num_freqs {
            return Err(GridError::TooManyUes {
                ues: self.num_ues,
                freqs: self.num_freqs,
            });
        }
        Ok(())
    }
}

impl Default for GridDims {
    fn default() -> Self {
        Self {
            num_freqs: 6,
            num_minislots: 6,
            num_ues: 2,
            num_interferers: 1,
        }
    }
}

/// Frequency assignment for every UE within one mini-slot.
///
/// `assign[i]` is the zero-based frequency used by UE `i`, or `None` when the
/// UE stays silent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceAction {
    assign: Vec<Option<usize>>,
}

impl ResourceAction {
    pub fn new(assign: Vec<Option<usize>>) -> Self {
        Self { assign }
    }

    /// Every UE silent.
    pub fn idle(num_ues: usize) -> Self {
        Self {
            assign: vec![None; num_ues],
        }
    }

    pub fn assignments(&self) -> &[Option<usize>] {
        &self.assign
    }

    pub fn num_ues(&self) -> usize {
        self.assign.len()
    }

    pub fn frequency_of(&self, ue: usize) -> Option<usize> {
        self.assign.get(ue).copied().flatten()
    }

    /// UE transmitting on `freq`, if any.
    pub fn user_of(&self, freq: usize) -> Option<usize> {
        self.assign.iter().position(|f| *f == Some(freq))
    }

    pub fn is_idle(&self) -> bool {
        self.assign.iter().all(Option::is_none)
    }

    /// Expanded `num_freqs x num_ues` 0/1 matrix, row-major by frequency.
    pub fn to_matrix(&self, num_freqs: usize) -> Vec<Vec<u8>> {
        let mut m = vec![vec![0u8; self.assign.len()]; num_freqs];
        for (ue, f) in self.assign.iter().enumerate() {
            if let Some(f) = f {
                if *f < num_freqs {
                    m[*f][ue] = 1;
                }
            }
        }
        m
    }
}

impl fmt::Display for ResourceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.assign.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match a {
                Some(m) => write!(f, "f{}", m + 1)?,
                None => write!(f, "-")?,
            }
        }
        write!(f, ")")
    }
}

/// One action per mini-slot of a timeslot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeslotAction {
    per_minislot: Vec<ResourceAction>,
}

impl TimeslotAction {
    pub fn new(dims: &GridDims, per_minislot: Vec<ResourceAction>) -> Result<Self, GridError> {
        if per_minislot.len() != dims.num_minislots {
            return Err(GridError::MinislotCountMismatch {
                expected: dims.num_minislots,
                got: per_minislot.len(),
            });
        }
        Ok(Self { per_minislot })
    }

    pub fn minislots(&self) -> &[ResourceAction] {
        &self.per_minislot
    }

    /// Total number of resource blocks used over the timeslot.
    pub fn energy(&self) -> usize {
        self.per_minislot.iter().map(action_energy).sum()
    }
}

/// Checks both occupancy constraints. Errors only when the action does not
/// fit the grid at all.
pub fn validate_action(dims: &GridDims, action: &ResourceAction) -> Result<bool, GridError> {
    if action.num_ues() != dims.num_ues {
        return Err(GridError::UeCountMismatch {
            expected: dims.num_ues,
            got: action.num_ues(),
        });
    }
    let mut used = vec![false; dims.num_freqs];
    for (ue, f) in action.assign.iter().enumerate() {
        let Some(f) = *f else { continue };
        if f >= dims.num_freqs {
            return Err(GridError::FrequencyOutOfRange {
                ue,
                freq: f,
                freqs: dims.num_freqs,
            });
        }
        if used[f] {
            return Ok(false);
        }
        used[f] = true;
    }
    Ok(true)
}

/// Number of resource blocks the action occupies.
pub fn action_energy(action: &ResourceAction) -> usize {
    action.assign.iter().filter(|f| f.is_some()).count()
}

/// All valid actions, in lexicographic order over `(UE 1, UE 2, ...)` where
/// "silent" sorts before frequency 1. Index 0 is always the idle action.
pub fn enumerate_actions(dims: &GridDims) -> Vec<ResourceAction> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(dims.num_ues);
    let mut used = vec![false; dims.num_freqs];
    extend_actions(dims, &mut current, &mut used, &mut out);
    out
}

fn extend_actions(
    dims: &GridDims,
    current: &mut Vec<Option<usize>>,
    used: &mut [bool],
    out: &mut Vec<ResourceAction>,
) {
    if current.len() == dims.num_ues {
        out.push(ResourceAction::new(current.clone()));
        return;
    }
    current.push(None);
    extend_actions(dims, current, used, out);
    current.pop();
    for f in 0..dims.num_freqs {
        if used[f] {
            continue;
        }
        used[f] = true;
        current.push(Some(f));
        extend_actions(dims, current, used, out);
        current.pop();
        used[f] = false;
    }
}

/// Enumerated actions of one mini-slot, addressed by table column index.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    dims: GridDims,
    actions: Vec<ResourceAction>,
}

impl ActionSpace {
    pub fn new(dims: GridDims) -> Self {
        let actions = enumerate_actions(&dims);
        Self { dims, actions }
    }

    pub fn dims(&self) -> &GridDims {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, idx: usize) -> &ResourceAction {
        &self.actions[idx]
    }

    pub fn actions(&self) -> &[ResourceAction] {
        &self.actions
    }

    pub fn index_of(&self, action: &ResourceAction) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }
}
