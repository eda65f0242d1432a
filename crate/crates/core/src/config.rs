//! Run configuration loaded from a single TOML file.
//!
//! Every section is optional and falls back to its documented default, so an
//! empty file (or no file at all) yields a fully usable configuration. A
//! loaded [`RunConfig`] should be passed through [`RunConfig::validate`]
//! before use: validation enforces the cross-section constraints that serde
//! cannot express, such as frame alignment of event windows and agreement
//! between the label horizon and the projection-bin horizon.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::BinConfig;
use crate::eval::{Aggregation, TaskThresholds};
use crate::events::{EventParams, FrameParams};
use crate::synth::SynthParams;
use crate::timeline::FrameRate;
use crate::zeroshot::{BcScoring, ScoreConfig};

/// Errors raised while loading or validating a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// `[frame]` — the shared frame clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSection {
    /// Frames per second for rasterization, labeling, and event extraction.
    pub fps: u32,
}

impl Default for FrameSection {
    fn default() -> Self {
        FrameSection { fps: 100 }
    }
}

/// Which predictor produces per-frame distributions over window states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Count-based model over discretized dialog contexts.
    Markov,
    /// Label-peeking reference predictor, optionally noise-corrupted.
    Oracle,
}

/// `[predictor]` — model choice and its knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSection {
    pub kind: PredictorKind,
    /// Additive smoothing for the count-based model.
    pub smoothing_alpha: f64,
    /// Oracle corruption: probability mass moved off the true state.
    pub noise_epsilon: f64,
    /// Seed for the oracle's noise draws.
    pub oracle_seed: u64,
}

impl Default for PredictorSection {
    fn default() -> Self {
        PredictorSection {
            kind: PredictorKind::Markov,
            smoothing_alpha: 1.0,
            noise_epsilon: 0.0,
            oracle_seed: 0,
        }
    }
}

/// `[split]` — deterministic corpus partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            val_frac: 0.1,
            test_frac: 0.1,
            seed: 7,
        }
    }
}

/// `[eval]` — how per-event scores become metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// How frame scores are pooled over an evaluation span.
    pub aggregation: Aggregation,
    /// Fixed decision thresholds; when absent they are calibrated on the
    /// validation split.
    pub thresholds: Option<TaskThresholds>,
}

/// `[paths]` — optional output location hints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Directory that relative output paths are resolved against.
    pub out_dir: Option<std::path::PathBuf>,
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub frame: FrameSection,
    pub bins: BinConfig,
    pub events: EventParams,
    pub synth: SynthParams,
    pub predictor: PredictorSection,
    pub split: SplitSection,
    pub score: ScoreConfig,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

impl RunConfig {
    /// The frame clock implied by `[frame]`.
    pub fn frame_rate(&self) -> Result<FrameRate, ConfigError> {
        FrameRate::new(self.frame.fps)
            .map_err(|e| ConfigError::Invalid(format!("[frame] {e}")))
    }

    /// Check every cross-field constraint. Call once after loading.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let rate = self.frame_rate()?;

        self.bins
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("[bins] {e}")))?;
        self.bins
            .bin_frames(rate)
            .map_err(|e| ConfigError::Invalid(format!("[bins] {e}")))?;

        FrameParams::new(&self.events, rate)
            .map_err(|e| ConfigError::Invalid(format!("[events] {e}")))?;
        let horizon_ms = (self.events.label_horizon_s * 1000.0).round() as u32;
        if horizon_ms != self.bins.horizon_ms() {
            return Err(ConfigError::Invalid(format!(
                "[events] label_horizon_s spans {horizon_ms} ms but the \
                 projection bins span {} ms; the two horizons must agree",
                self.bins.horizon_ms()
            )));
        }

        self.synth
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("[synth] {e}")))?;

        if !(self.predictor.smoothing_alpha > 0.0)
            || !self.predictor.smoothing_alpha.is_finite()
        {
            return Err(ConfigError::Invalid(format!(
                "[predictor] smoothing_alpha must be positive and finite, got {}",
                self.predictor.smoothing_alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.predictor.noise_epsilon) {
            return Err(ConfigError::Invalid(format!(
                "[predictor] noise_epsilon must lie in [0, 1], got {}",
                self.predictor.noise_epsilon
            )));
        }

        for (name, frac) in [
            ("val_frac", self.split.val_frac),
            ("test_frac", self.split.test_frac),
        ] {
            if !(0.0..1.0).contains(&frac) {
                return Err(ConfigError::Invalid(format!(
                    "[split] {name} must lie in [0, 1), got {frac}"
                )));
            }
        }
        if self.split.val_frac + self.split.test_frac >= 1.0 {
            return Err(ConfigError::Invalid(format!(
                "[split] val_frac + test_frac must leave room for training \
                 data, got {} + {}",
                self.split.val_frac, self.split.test_frac
            )));
        }

        if self.score.bin_durations_ms != self.bins.bin_durations_ms {
            return Err(ConfigError::Invalid(format!(
                "[score] bin_durations_ms {:?} disagrees with [bins] {:?}",
                self.score.bin_durations_ms, self.bins.bin_durations_ms
            )));
        }
        if let BcScoring::Graded { temperature } = self.score.bc_scoring {
            if !(temperature > 0.0) || !temperature.is_finite() {
                return Err(ConfigError::Invalid(format!(
                    "[score] graded backchannel temperature must be positive \
                     and finite, got {temperature}"
                )));
            }
        }

        if let Some(t) = &self.eval.thresholds {
            for (name, value) in [
                ("s_pred", t.s_pred),
                ("bc_pred", t.bc_pred),
                ("s_l", t.s_l),
            ] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ConfigError::Invalid(format!(
                        "[eval] thresholds.{name} must lie in [0, 1], got {value}"
                    )));
                }
            }
        }

        Ok(())
    }
}

/// Load and validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    config.validate()?;
    Ok(config)
}
