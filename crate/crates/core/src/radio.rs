//! Power-level simulation of the grant-free uplink.
//!
//! No baseband samples are generated. Each mini-slot draws channel power gains,
//! evaluates per-UE SINR against the decoding threshold, and reports the
//! expected received power per frequency as the AP's observation.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{action_energy, GridDims, ResourceAction};

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("physical parameter `{0}` must be strictly positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error("interference pattern period must be at least 1")]
    ZeroPeriod,
    #[error("pattern has {got} cells, expected period*minislots*freqs = {expected}")]
    PatternSize { expected: usize, got: usize },
    #[error("pattern shape {pattern_minislots}x{pattern_freqs} does not match grid {grid_minislots}x{grid_freqs}")]
    PatternShape {
        pattern_minislots: usize,
        pattern_freqs: usize,
        grid_minislots: usize,
        grid_freqs: usize,
    },
    #[error("pattern cell names interferer {id}, but only {max} interferer(s) exist")]
    UnknownInterferer { id: u8, max: usize },
    #[error("mini-slot {minislot} leaves {free} free frequencies, fewer than the {ues} UEs")]
    TooFewFree {
        minislot: usize,
        free: usize,
        ues: usize,
    },
    #[error("pattern file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Los,
    Rayleigh,
}

impl FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "los" => Ok(Self::Los),
            "rayleigh" => Ok(Self::Rayleigh),
            other => Err(format!(
                "unknown channel kind `{other}` (expected los or rayleigh)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub large_scale_gain: f64,
}

impl ChannelModel {
    pub fn los() -> Self {
        Self {
            kind: ChannelKind::Los,
            large_scale_gain: 1.0,
        }
    }

    pub fn rayleigh() -> Self {
        Self {
            kind: ChannelKind::Rayleigh,
            large_scale_gain: 1.0,
        }
    }

    /// Draws power gains for every (link, frequency) pair of one mini-slot.
    ///
    /// Under Rayleigh fading every gain is drawn, used or not, so RNG
    /// consumption does not depend on the action taken.
    pub fn draw<R: Rng + ?Sized>(&self, dims: &GridDims, rng: &mut R) -> ChannelGains {
        let n_ue = dims.num_ues * dims.num_freqs;
        let n_int = dims.num_interferers * dims.num_freqs;
        match self.kind {
            ChannelKind::Los => ChannelGains {
                num_freqs: dims.num_freqs,
                ue: vec![self.large_scale_gain; n_ue],
                interferer: vec![self.large_scale_gain; n_int],
            },
            ChannelKind::Rayleigh => {
                let mut draw = || self.large_scale_gain * cn01_power(rng);
                let ue = (0..n_ue).map(|_| draw()).collect();
                let interferer = (0..n_int).map(|_| draw()).collect();
                ChannelGains {
                    num_freqs: dims.num_freqs,
                    ue,
                    interferer,
                }
            }
        }
    }
}

/// `|h|^2` for `h ~ CN(0, 1)`.
fn cn01_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    0.5 * (re * re + im * im)
}

/// Squared channel magnitudes for one mini-slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    num_freqs: usize,
    ue: Vec<f64>,
    interferer: Vec<f64>,
}

impl ChannelGains {
    pub fn unit(dims: &GridDims) -> Self {
        Self {
            num_freqs: dims.num_freqs,
            ue: vec![1.0; dims.num_ues * dims.num_freqs],
            interferer: vec![1.0; dims.num_interferers * dims.num_freqs],
        }
    }

    /// Builds gains from row-major `[link][freq]` buffers.
    pub fn from_parts(num_freqs: usize, ue: Vec<f64>, interferer: Vec<f64>) -> Self {
        assert!(
            num_freqs > 0
                && ue.len().is_multiple_of(num_freqs)
                && interferer.len().is_multiple_of(num_freqs)
        );
        Self {
            num_freqs,
            ue,
            interferer,
        }
    }

    pub fn ue(&self, ue: usize, freq: usize) -> f64 {
        self.ue[ue * self.num_freqs + freq]
    }

    pub fn interferer(&self, j: usize, freq: usize) -> f64 {
        self.interferer[j * self.num_freqs + freq]
    }
}

/// Periodic interference occupation.
///
/// Each cell holds 0 when free, or the 1-based id of the interferer using it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferencePattern {
    period: usize,
    num_minislots: usize,
    num_freqs: usize,
    cells: Vec<u8>,
}

/// Occupation of one mini-slot.
#[derive(Debug, Clone, Copy)]
pub struct PatternSlice<'a> {
    cells: &'a [u8],
}

impl<'a> PatternSlice<'a> {
    pub fn new(cells: &'a [u8]) -> Self {
        Self { cells }
    }

    pub fn occupied(&self, freq: usize) -> bool {
        self.cells[freq] != 0
    }

    /// Zero-based interferer index on `freq`.
    pub fn interferer_at(&self, freq: usize) -> Option<usize> {
        match self.cells[freq] {
            0 => None,
            id => Some(id as usize - 1),
        }
    }

    pub fn num_freqs(&self) -> usize {
        self.cells.len()
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c != 0).count()
    }

    pub fn fully_occupied(&self) -> bool {
        self.cells.iter().all(|c| *c != 0)
    }
}

impl InterferencePattern {
    /// `cells` is indexed `[timeslot_in_period][minislot][freq]`.
    pub fn new(
        period: usize,
        num_minislots: usize,
        num_freqs: usize,
        cells: Vec<u8>,
    ) -> Result<Self, RadioError> {
        if period == 0 {
            return Err(RadioError::ZeroPeriod);
        }
        let expected = period * num_minislots * num_freqs;
        if cells.len() != expected {
            return Err(RadioError::PatternSize {
                expected,
                got: cells.len(),
            });
        }
        Ok(Self {
            period,
            num_minislots,
            num_freqs,
            cells,
        })
    }

    /// Pattern with every cell free.
    pub fn empty(dims: &GridDims) -> Self {
        Self {
            period: 1,
            num_minislots: dims.num_minislots,
            num_freqs: dims.num_freqs,
            cells: vec![0; dims.num_minislots * dims.num_freqs],
        }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn num_minislots(&self) -> usize {
        self.num_minislots
    }

    pub fn num_freqs(&self) -> usize {
        self.num_freqs
    }

    /// Occupation seen in mini-slot `minislot` (zero-based) of timeslot `t`.
    pub fn slice(&self, t: u64, minislot: usize) -> PatternSlice<'_> {
        let tau = (t % self.period as u64) as usize;
        let start = (tau * self.num_minislots + minislot) * self.num_freqs;
        PatternSlice::new(&self.cells[start..start + self.num_freqs])
    }

    pub fn set(&mut self, tau: usize, minislot: usize, freq: usize, interferer: u8) {
        let idx = (tau * self.num_minislots + minislot) * self.num_freqs + freq;
        self.cells[idx] = interferer;
    }

    /// Checks the pattern against the grid it will be used with.
    pub fn check(&self, dims: &GridDims) -> Result<(), RadioError> {
        if self.num_minislots != dims.num_minislots || self.num_freqs != dims.num_freqs {
            return Err(RadioError::PatternShape {
                pattern_minislots: self.num_minislots,
                pattern_freqs: self.num_freqs,
                grid_minislots: dims.num_minislots,
                grid_freqs: dims.num_freqs,
            });
        }
        if let Some(&id) = self
            .cells
            .iter()
            .find(|&&c| c as usize > dims.num_interferers)
        {
            return Err(RadioError::UnknownInterferer {
                id,
                max: dims.num_interferers,
            });
        }
        Ok(())
    }

    /// Best achievable normalized throughput per timeslot, averaged over one
    /// period, assuming every free frequency decodes.
    pub fn throughput_ceiling(&self, num_ues: usize) -> f64 {
        let mut total = 0usize;
        for tau in 0..self.period {
            for n in 0..self.num_minislots {
                let s = self.slice(tau as u64, n);
                total += num_ues.min(s.num_freqs() - s.occupied_count());
            }
        }
        total as f64 / self.period as f64
    }

    /// Parses the plain-text pattern format documented in `docs/pattern-format.md`.
    pub fn parse(text: &str) -> Result<Self, RadioError> {
        let mut period = None;
        let mut minislots = None;
        let mut freqs = None;
        let mut cells = Vec::new();
        let mut rows = 0usize;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let value: usize = value.trim().parse().map_err(|_| RadioError::Parse {
                    line: line_no,
                    msg: format!("`{}` is not a non-negative integer", value.trim()),
                })?;
                match key.trim() {
                    "period" => period = Some(value),
                    "minislots" => minislots = Some(value),
                    "freqs" => freqs = Some(value),
                    other => {
                        return Err(RadioError::Parse {
                            line: line_no,
                            msg: format!("unknown key `{other}`"),
                        })
                    }
                }
                continue;
            }
            let Some(m) = freqs else {
                return Err(RadioError::Parse {
                    line: line_no,
                    msg: "`freqs` must be declared before the first row".into(),
                });
            };
            let row: Vec<u8> = line
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as u8)
                        .ok_or_else(|| RadioError::Parse {
                            line: line_no,
                            msg: format!("unexpected character `{c}` in row"),
                        })
                })
                .collect::<Result<_, _>>()?;
            if row.len() != m {
                return Err(RadioError::Parse {
                    line: line_no,
                    msg: format!("row has {} cells, expected {m}", row.len()),
                });
            }
            cells.extend(row);
            rows += 1;
        }
        let missing = |k: &str| RadioError::Parse {
            line: 0,
            msg: format!("missing `{k}`"),
        };
        let period = period.ok_or_else(|| missing("period"))?;
        let minislots = minislots.ok_or_else(|| missing("minislots"))?;
        let freqs = freqs.ok_or_else(|| missing("freqs"))?;
        if rows != period * minislots {
            return Err(RadioError::Parse {
                line: 0,
                msg: format!(
                    "found {rows} rows, expected period*minislots = {}",
                    period * minislots
                ),
            });
        }
        Self::new(period, minislots, freqs, cells)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "period = {}", self.period);
        let _ = writeln!(out, "minislots = {}", self.num_minislots);
        let _ = writeln!(out, "freqs = {}", self.num_freqs);
        for tau in 0..self.period {
            let _ = writeln!(out, "# timeslot {}", tau + 1);
            for n in 0..self.num_minislots {
                let s = self.slice(tau as u64, n);
                let row: Vec<String> = s.cells.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }
}

/// Period-1 layout used for the reference scenario: mini-slot `n < N` has
/// only frequency `n` jammed and the last mini-slot is jammed everywhere.
pub fn default_pattern(dims: &GridDims) -> Result<InterferencePattern, RadioError> {
    let n = dims.num_minislots;
    let m = dims.num_freqs;
    let mut pattern = InterferencePattern::new(1, n, m, vec![0; n * m])?;
    for ms in 0..n {
        if ms + 1 == n {
            for f in 0..m {
                pattern.set(0, ms, f, 1);
            }
        } else {
            pattern.set(0, ms, ms % m, 1);
        }
    }
    check_capacity(&pattern, dims)?;
    Ok(pattern)
}

/// Every mini-slot that is not fully jammed must leave a free frequency for
/// each UE.
pub fn check_capacity(pattern: &InterferencePattern, dims: &GridDims) -> Result<(), RadioError> {
    for tau in 0..pattern.period() {
        for ms in 0..pattern.num_minislots() {
            let s = pattern.slice(tau as u64, ms);
            if s.fully_occupied() {
                continue;
            }
            let free = s.num_freqs() - s.occupied_count();
            if free < dims.num_ues {
                return Err(RadioError::TooFewFree {
                    minislot: ms + 1,
                    free,
                    ues: dims.num_ues,
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyParams {
    /// Transmit power of every UE, W.
    pub p_ue: f64,
    /// Transmit power of every interferer, W.
    pub p_int: f64,
    /// Receiver noise power, W.
    pub noise_power: f64,
    /// Linear SINR decoding threshold.
    pub sinr_threshold: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            p_ue: 0.1,
            p_int: 0.2,
            noise_power: 0.01,
            sinr_threshold: 1.0,
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<(), RadioError> {
        for (name, v) in [
            ("p_ue", self.p_ue),
            ("p_int", self.p_int),
            ("noise_power", self.noise_power),
            ("sinr_threshold", self.sinr_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RadioError::NonPositive(name, v));
            }
        }
        Ok(())
    }
}

/// Which interference terms enter the SINR denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrDenominator {
    /// Only interference on the UE's own frequency.
    #[default]
    Cochannel,
    /// Interference summed over every frequency of the mini-slot.
    AllFreqs,
}

/// Expected received power per frequency in one mini-slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumState {
    pub powers: Vec<f64>,
}

impl SpectrumState {
    /// Observation before anything was received: noise on every frequency.
    pub fn noise_floor(num_freqs: usize, noise_power: f64) -> Self {
        Self {
            powers: vec![noise_power; num_freqs],
        }
    }
}

/// Immediate reward of one mini-slot: successful decodes and minus the
/// number of resource blocks spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RewardVector {
    pub throughput: i32,
    pub neg_energy: i32,
}

impl RewardVector {
    pub fn as_array(&self) -> [f64; 2] {
        [self.throughput as f64, self.neg_energy as f64]
    }
}

/// Per-UE marker of transmitting on an interfered cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionErrorFlags {
    pub per_ue: Vec<bool>,
}

impl DecisionErrorFlags {
    pub fn count(&self) -> usize {
        self.per_ue.iter().filter(|e| **e).count()
    }

    pub fn any(&self) -> bool {
        self.per_ue.iter().any(|e| *e)
    }
}

/// Result of one simulated mini-slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MinislotOutcome {
    pub reward: RewardVector,
    pub observed: SpectrumState,
    pub errors: DecisionErrorFlags,
}

fn interference_on(
    freq: usize,
    gains: &ChannelGains,
    slice: &PatternSlice<'_>,
    phy: &PhyParams,
) -> f64 {
    match slice.interferer_at(freq) {
        Some(j) => gains.interferer(j, freq) * phy.p_int,
        None => 0.0,
    }
}

/// SINR of UE `ue`; zero when the UE is silent.
pub fn compute_sinr(
    ue: usize,
    action: &ResourceAction,
    gains: &ChannelGains,
    slice: &PatternSlice<'_>,
    phy: &PhyParams,
    denominator: SinrDenominator,
) -> f64 {
    let Some(freq) = action.frequency_of(ue) else {
        return 0.0;
    };
    let signal = gains.ue(ue, freq) * phy.p_ue;
    let interference = match denominator {
        SinrDenominator::Cochannel => interference_on(freq, gains, slice, phy),
        SinrDenominator::AllFreqs => (0..slice.num_freqs())
            .map(|m| interference_on(m, gains, slice, phy))
            .sum(),
    };
    signal / (interference + phy.noise_power)
}

/// Expected received power on every frequency.
pub fn observe_powers(
    action: &ResourceAction,
    gains: &ChannelGains,
    slice: &PatternSlice<'_>,
    phy: &PhyParams,
) -> SpectrumState {
    let powers = (0..slice.num_freqs())
        .map(|m| {
            let ue = action.user_of(m).map_or(0.0, |i| gains.ue(i, m) * phy.p_ue);
            ue + interference_on(m, gains, slice, phy) + phy.noise_power
        })
        .collect();
    SpectrumState { powers }
}

/// Simulates one mini-slot with already drawn gains.
pub fn evaluate_minislot(
    action: &ResourceAction,
    gains: &ChannelGains,
    slice: &PatternSlice<'_>,
    phy: &PhyParams,
    denominator: SinrDenominator,
) -> MinislotOutcome {
    let mut throughput = 0;
    let mut per_ue = vec![false; action.num_ues()];
    for (ue, err) in per_ue.iter_mut().enumerate() {
        let Some(freq) = action.frequency_of(ue) else {
            continue;
        };
        if compute_sinr(ue, action, gains, slice, phy, denominator) >= phy.sinr_threshold {
            throughput += 1;
        }
        *err = slice.occupied(freq);
    }
    MinislotOutcome {
        reward: RewardVector {
            throughput,
            neg_energy: -(action_energy(action) as i32),
        },
        observed: observe_powers(action, gains, slice, phy),
        errors: DecisionErrorFlags { per_ue },
    }
}

/// The simulated uplink: grid, channel, interference and radio parameters.
#[derive(Debug, Clone)]
pub struct RadioEnv {
    pub dims: GridDims,
    pub channel: ChannelModel,
    pub pattern: InterferencePattern,
    pub phy: PhyParams,
    pub denominator: SinrDenominator,
}

impl RadioEnv {
    pub fn new(
        dims: GridDims,
        channel: ChannelModel,
        pattern: InterferencePattern,
        phy: PhyParams,
        denominator: SinrDenominator,
    ) -> Result<Self, RadioError> {
        phy.validate()?;
        pattern.check(&dims)?;
        if channel.large_scale_gain.is_nan() || channel.large_scale_gain <= 0.0 {
            return Err(RadioError::NonPositive(
                "large_scale_gain",
                channel.large_scale_gain,
            ));
        }
        Ok(Self {
            dims,
            channel,
            pattern,
            phy,
            denominator,
        })
    }

    /// Draws gains and simulates mini-slot `minislot` (zero-based) of timeslot `t`.
    pub fn step_minislot<R: Rng + ?Sized>(
        &self,
        action: &ResourceAction,
        minislot: usize,
        t: u64,
        rng: &mut R,
    ) -> MinislotOutcome {
        let gains = self.channel.draw(&self.dims, rng);
        let slice = self.pattern.slice(t, minislot);
        evaluate_minislot(action, &gains, &slice, &self.phy, self.denominator)
    }
}
