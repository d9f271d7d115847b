//! Scenario configuration: TOML input, defaults, validation and presets.
//!
//! Every key is optional. Missing keys take the defaults of the reference
//! scenario (6 frequencies, 6 mini-slots, 2 UEs, 1 interferer, LoS,
//! `w = (1, 0.5)`). A resolved config serializes back to TOML with every
//! field spelled out, which is what gets stored next to run outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{baseline_mode, AgentError, ExplorationRule, LearnParams, QuantizerConfig};
use crate::grid::{GridDims, GridError};
use crate::radio::{
    check_capacity, default_pattern, ChannelKind, ChannelModel, InterferencePattern, PhyParams,
    RadioEnv, RadioError, SinrDenominator,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("radio: {0}")]
    Radio(#[from] RadioError),
    #[error("learning: {0}")]
    Agent(#[from] AgentError),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// Plateau rule that ends a run before the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Number of trailing timeslots inspected.
    pub window: usize,
    /// Largest allowed spread of the scalarized average reward over the window.
    pub tol: f64,
}

impl StopRule {
    pub const DEFAULT: Self = Self {
        window: 200,
        tol: 1e-4,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridDims,
    pub phy: PhyParams,
    pub sinr_denominator: SinrDenominator,
    pub channel: ChannelModel,
    pub pattern: InterferencePattern,
    pub learning: LearnParams,
    pub quantizer: QuantizerConfig,
    /// Also run the single-objective baseline on the same seeds.
    pub with_baseline: bool,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub stop: Option<StopRule>,
    /// Timeslots between checkpoints; 0 disables checkpointing.
    pub checkpoint_every: u64,
    pub out_dir: Option<PathBuf>,
}

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

pub fn default_horizon(kind: ChannelKind) -> u64 {
    match kind {
        ChannelKind::Los => 5000,
        ChannelKind::Rayleigh => 20000,
    }
}

/// Value-table step size used when the config leaves `kappa_q` unset.
///
/// LoS rewards are deterministic, so a full step makes one visit exact.
/// Faded rewards need averaging over visits.
pub fn default_kappa_q(kind: ChannelKind) -> f64 {
    match kind {
        ChannelKind::Los => 1.0,
        ChannelKind::Rayleigh => 0.1,
    }
}

// ---- file layout -----------------------------------------------------------

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    with_baseline: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    phy: PhySection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    pattern: PatternSection,
    #[serde(default)]
    learning: LearningSection,
    #[serde(default)]
    quantizer: QuantizerSection,
    #[serde(default)]
    stop: StopSection,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    num_freqs: Option<usize>,
    num_minislots: Option<usize>,
    num_ues: Option<usize>,
    num_interferers: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhySection {
    p_ue: Option<f64>,
    p_int: Option<f64>,
    noise_power: Option<f64>,
    sinr_threshold: Option<f64>,
    sinr_denominator: Option<SinrDenominator>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    kind: Option<ChannelKind>,
    large_scale_gain: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternSection {
    /// Pattern file, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<PathBuf>,
    /// Pattern in the same text format as a pattern file.
    #[serde(skip_serializing_if = "Option::is_none")]
    inline: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearningSection {
    w_r: Option<f64>,
    w_p: Option<f64>,
    kappa_q: Option<f64>,
    kappa_r: Option<f64>,
    epsilon: Option<f64>,
    epsilon_decay: Option<f64>,
    eta: Option<f64>,
    q0_r: Option<f64>,
    q0_p: Option<f64>,
    exploration: Option<ExplorationRule>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuantizerSection {
    step_db: Option<f64>,
    levels: Option<u8>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StopSection {
    enabled: Option<bool>,
    window: Option<usize>,
    tol: Option<f64>,
}

// ---- loading -----------------------------------------------------------------

/// Reads and resolves a config file. Relative pattern paths are taken from
/// the file's directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Resolves config text; `base` anchors relative pattern paths.
pub fn parse_config(text: &str, base: &Path) -> Result<ScenarioConfig, ConfigError> {
    let file: FileConfig = toml::from_str(text)?;
    resolve(file, base)
}

fn resolve(f: FileConfig, base: &Path) -> Result<ScenarioConfig, ConfigError> {
    let d = GridDims::default();
    let grid = GridDims::new(
        f.grid.num_freqs.unwrap_or(d.num_freqs),
        f.grid.num_minislots.unwrap_or(d.num_minislots),
        f.grid.num_ues.unwrap_or(d.num_ues),
        f.grid.num_interferers.unwrap_or(d.num_interferers),
    )?;
    if grid.num_interferers > usize::from(u8::MAX) {
        return Err(ConfigError::Invalid(format!(
            "at most 255 interferers supported, got {}",
            grid.num_interferers
        )));
    }

    let p = PhyParams::default();
    let phy = PhyParams {
        p_ue: f.phy.p_ue.unwrap_or(p.p_ue),
        p_int: f.phy.p_int.unwrap_or(p.p_int),
        noise_power: f.phy.noise_power.unwrap_or(p.noise_power),
        sinr_threshold: f.phy.sinr_threshold.unwrap_or(p.sinr_threshold),
    };
    phy.validate()?;

    let kind = f.channel.kind.unwrap_or(ChannelKind::Los);
    let channel = ChannelModel {
        kind,
        large_scale_gain: f.channel.large_scale_gain.unwrap_or(1.0),
    };

    let pattern = match (f.pattern.file, f.pattern.inline) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid(
                "pattern: give either `file` or `inline`, not both".into(),
            ))
        }
        (Some(file), None) => {
            let path = base.join(file);
            let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            InterferencePattern::parse(&text)?
        }
        (None, Some(text)) => InterferencePattern::parse(&text)?,
        (None, None) => default_pattern(&grid)?,
    };
    check_capacity(&pattern, &grid)?;

    let l = LearnParams::default();
    let ls = f.learning;
    let learning = LearnParams {
        w_r: ls.w_r.unwrap_or(l.w_r),
        w_p: ls.w_p.unwrap_or(l.w_p),
        kappa_q: ls.kappa_q.unwrap_or_else(|| default_kappa_q(kind)),
        kappa_r: ls.kappa_r.unwrap_or(l.kappa_r),
        epsilon: ls.epsilon.unwrap_or(l.epsilon),
        epsilon_decay: ls.epsilon_decay.unwrap_or(l.epsilon_decay),
        eta: ls.eta.unwrap_or(l.eta),
        q0_r: ls.q0_r.unwrap_or(l.q0_r),
        q0_p: ls.q0_p.unwrap_or(l.q0_p),
        exploration: ls.exploration.unwrap_or(l.exploration),
    };
    learning.validate()?;

    let q = QuantizerConfig::default();
    let quantizer = QuantizerConfig {
        step_db: f.quantizer.step_db.unwrap_or(q.step_db),
        levels: f.quantizer.levels.unwrap_or(q.levels),
    };
    quantizer.validate()?;

    let stop = if f.stop.enabled.unwrap_or(false) {
        let rule = StopRule {
            window: f.stop.window.unwrap_or(StopRule::DEFAULT.window),
            tol: f.stop.tol.unwrap_or(StopRule::DEFAULT.tol),
        };
        if rule.window == 0 || !(rule.tol >= 0.0 && rule.tol.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "stop: window must be positive and tol finite and non-negative, got {} / {}",
                rule.window, rule.tol
            )));
        }
        Some(rule)
    } else {
        None
    };

    let seeds = f.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
    if seeds.is_empty() {
        return Err(ConfigError::Invalid(
            "seeds: at least one seed is required".into(),
        ));
    }
    let horizon = f.horizon.unwrap_or_else(|| default_horizon(kind));
    if horizon == 0 {
        return Err(ConfigError::Invalid("horizon must be positive".into()));
    }

    let cfg = ScenarioConfig {
        name: f.name.unwrap_or_else(|| "custom".into()),
        grid,
        phy,
        sinr_denominator: f.phy.sinr_denominator.unwrap_or_default(),
        channel,
        pattern,
        learning,
        quantizer,
        with_baseline: f.with_baseline.unwrap_or(false),
        horizon,
        seeds,
        stop,
        checkpoint_every: f.checkpoint_every.unwrap_or(1000),
        out_dir: f.out_dir,
    };
    cfg.environment()?;
    Ok(cfg)
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        parse_config("", Path::new(".")).expect("built-in defaults are valid")
    }
}

impl ScenarioConfig {
    pub fn environment(&self) -> Result<RadioEnv, RadioError> {
        RadioEnv::new(
            self.grid,
            self.channel,
            self.pattern.clone(),
            self.phy,
            self.sinr_denominator,
        )
    }

    /// The same scenario with the energy weight removed.
    pub fn baseline(&self) -> Self {
        Self {
            learning: baseline_mode(&self.learning),
            with_baseline: false,
            ..self.clone()
        }
    }

    /// Fully expanded TOML; parsing it back gives an equal config.
    pub fn to_toml(&self) -> String {
        let file = FileConfig {
            name: Some(self.name.clone()),
            horizon: Some(self.horizon),
            seeds: Some(self.seeds.clone()),
            with_baseline: Some(self.with_baseline),
            checkpoint_every: Some(self.checkpoint_every),
            out_dir: self.out_dir.clone(),
            grid: GridSection {
                num_freqs: Some(self.grid.num_freqs),
                num_minislots: Some(self.grid.num_minislots),
                num_ues: Some(self.grid.num_ues),
                num_interferers: Some(self.grid.num_interferers),
            },
            phy: PhySection {
                p_ue: Some(self.phy.p_ue),
                p_int: Some(self.phy.p_int),
                noise_power: Some(self.phy.noise_power),
                sinr_threshold: Some(self.phy.sinr_threshold),
                sinr_denominator: Some(self.sinr_denominator),
            },
            channel: ChannelSection {
                kind: Some(self.channel.kind),
                large_scale_gain: Some(self.channel.large_scale_gain),
            },
            pattern: PatternSection {
                file: None,
                inline: Some(self.pattern.to_text()),
            },
            learning: LearningSection {
                w_r: Some(self.learning.w_r),
                w_p: Some(self.learning.w_p),
                kappa_q: Some(self.learning.kappa_q),
                kappa_r: Some(self.learning.kappa_r),
                epsilon: Some(self.learning.epsilon),
                epsilon_decay: Some(self.learning.epsilon_decay),
                eta: Some(self.learning.eta),
                q0_r: Some(self.learning.q0_r),
                q0_p: Some(self.learning.q0_p),
                exploration: Some(self.learning.exploration),
            },
            quantizer: QuantizerSection {
                step_db: Some(self.quantizer.step_db),
                levels: Some(self.quantizer.levels),
            },
            stop: StopSection {
                enabled: Some(self.stop.is_some()),
                window: self.stop.map(|s| s.window),
                tol: self.stop.map(|s| s.tol),
            },
        };
        toml::to_string(&file).expect("config serializes")
    }
}

// ---- presets -----------------------------------------------------------------

/// Figure presets, in figure order.
pub const PRESETS: [(&str, &str); 8] = [
    ("fig2a", "LoS, w = (1, 0.5): average-reward estimates"),
    ("fig2b", "LoS, w = (1, 0.93): average-reward estimates"),
    ("fig3a", "Rayleigh, w = (1, 0.5): average-reward estimates"),
    ("fig3b", "Rayleigh, w = (1, 0.93): average-reward estimates"),
    ("fig4a", "LoS, MORL: decision errors per timeslot"),
    (
        "fig4b",
        "LoS, R-learning baseline: decision errors per timeslot",
    ),
    ("fig5", "LoS: average DER, MORL against the baseline"),
    ("fig6", "Rayleigh: average DER, MORL against the baseline"),
];

/// Looks up a preset. Appending `-baseline` to any name gives the same
/// scenario run with `w_p = 0` only.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    if let Some(base) = name.strip_suffix("-baseline") {
        let mut cfg = preset(base)?.baseline();
        cfg.name = name.to_string();
        return Ok(cfg);
    }
    let (rayleigh, w_p, with_baseline) = match name {
        "fig2a" | "fig4a" => (false, 0.5, false),
        "fig2b" => (false, 0.93, false),
        "fig3a" => (true, 0.5, false),
        "fig3b" => (true, 0.93, false),
        "fig4b" => (false, 0.0, false),
        "fig5" => (false, 0.5, true),
        "fig6" => (true, 0.5, true),
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    };
    let text = format!(
        "name = \"{name}\"\nwith_baseline = {with_baseline}\n[channel]\nkind = \"{}\"\n[learning]\nw_p = {w_p:?}\n",
        if rayleigh { "rayleigh" } else { "los" }
    );
    parse_config(&text, Path::new("."))
}
