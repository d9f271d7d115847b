use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::radio::SpectrumState;

/// Uniform dB quantizer relative to the noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Width of one bin in dB.
    pub step_db: f64,
    /// Number of bins; indices are clamped to `0..levels`.
    pub levels: u8,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            step_db: 5.0,
            levels: 8,
        }
    }
}

impl QuantizerConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.step_db > 0.0 && self.step_db.is_finite()) {
            return Err(AgentError::InvalidParam("quantizer.step_db", self.step_db));
        }
        if self.levels == 0 {
            return Err(AgentError::InvalidParam("quantizer.levels", 0.0));
        }
        Ok(())
    }
}

/// Bin indices of one observed mini-slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantizedState {
    pub levels: Vec<u8>,
}

impl QuantizedState {
    pub fn zeros(len: usize) -> Self {
        Self {
            levels: vec![0; len],
        }
    }

    pub fn norm(&self) -> f64 {
        self.levels
            .iter()
            .map(|&l| f64::from(l) * f64::from(l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `|self - stored| / |stored|`. A zero-norm stored state is at distance 0
    /// from another zero state and infinitely far from anything else.
    pub fn relative_distance(&self, stored: &Self) -> f64 {
        let base = stored.norm();
        if base == 0.0 {
            if self.levels.iter().all(|&l| l == 0) {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.distance(stored) / base
        }
    }
}

/// Maps each power to `round(10 log10(p / noise) / step_db)`, clamped.
pub fn quantize(
    state: &SpectrumState,
    noise_power: f64,
    cfg: &QuantizerConfig,
) -> Result<QuantizedState, AgentError> {
    let max = f64::from(cfg.levels - 1);
    let levels = state
        .powers
        .iter()
        .map(|&p| {
            if p.is_nan() || p <= 0.0 {
                return Err(AgentError::NonPositivePower(p));
            }
            let db = 10.0 * (p / noise_power).log10();
            Ok((db / cfg.step_db).round().clamp(0.0, max) as u8)
        })
        .collect::<Result<_, _>>()?;
    Ok(QuantizedState { levels })
}
