//! Frame-level predictors that emit projection-window distributions.
//!
//! Two sources are provided. [`oracle_predict`] turns ground-truth labels
//! into (optionally noised) distributions — the reference signal for
//! validating the scoring and evaluation pipeline end to end. The
//! [`MarkovModel`] is a trainable count table over a small discrete context
//! ([`ContextKey`]) summarizing the recent voice activity; it stands in for
//! a learned sequence model at desk scale and is explicitly *not* an
//! attempt at one — just enough structure to beat majority-class guessing
//! on synthetic dialogs.

use crate::codec::{BinConfig, CodecError, HeadOutput, VapLabels, BINS_PER_SPEAKER, FINE_BINS,
                   FINE_BIN_MS, NUM_STATES};
use crate::codec::marginal_bins;
use crate::timeline::{va_history_at, FrameRate, Speaker, VaTimeline};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

pub const NUM_CONTEXT_KEYS: u32 = 256 * 4 * 5 * 5;

const MODEL_MAGIC: &str = "vap-markov";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("labels cover {labels} frames but the timeline has {timeline}")]
    LengthMismatch { timeline: usize, labels: usize },
    #[error("all dialogs in a training corpus must share one bin configuration and frame rate")]
    ConfigMismatch,
    #[error("oracle noise epsilon must lie in [0, 1), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("smoothing alpha must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("expected a discrete head output, got {0}")]
    ExpectedDiscrete(crate::codec::HeadKind),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("model file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Ground-truth-backed predictor settings.
///
/// `seed` is carried for interface stability; the noise mixture is a
/// deterministic function of the labels, so no randomness is consumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub noise_epsilon: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            noise_epsilon: 0.0,
            seed: 0,
        }
    }
}

/// Emit one distribution per frame: probability `1 − ε` on the frame's true
/// future state with `ε` spread uniformly over the other 255 states.
/// Frames without a valid label get uniform rows.
pub fn oracle_predict(
    tl: &VaTimeline,
    labels: &VapLabels,
    cfg: &OracleConfig,
) -> Result<HeadOutput, PredictorError> {
    let eps = cfg.noise_epsilon;
    if !(0.0..1.0).contains(&eps) {
        return Err(PredictorError::EpsilonOutOfRange(eps));
    }
    if labels.len() != tl.len() {
        return Err(PredictorError::LengthMismatch {
            timeline: tl.len(),
            labels: labels.len(),
        });
    }
    let mut rows = Vec::with_capacity(tl.len());
    for t in 0..tl.len() {
        if labels.valid_mask[t] {
            let mut row = [eps / 255.0; NUM_STATES];
            row[labels.discrete[t] as usize] = 1.0 - eps;
            rows.push(row);
        } else {
            rows.push([1.0 / NUM_STATES as f64; NUM_STATES]);
        }
    }
    Ok(HeadOutput::Discrete(rows))
}

/// Discrete summary of the dialog state at one frame, used to index the
/// count table. Four ingredients:
///
/// * `recent_pattern` — the window codec applied *backwards*: the same bin
///   durations, mirrored into the past (nearest bin first), thresholded on
///   full-bin denominators with out-of-dialog frames counted silent;
/// * `current_va` — this frame's two activity bits, `(a << 1) | b`;
/// * `silence_bucket` — length of the mutual-silence run ending at this
///   frame: none, ≤200 ms, ≤500 ms, ≤1 s, longer;
/// * `history_bucket` — the oldest long-horizon balance ratio quantized to
///   five levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextKey {
    pub recent_pattern: u8,
    pub current_va: u8,
    pub silence_bucket: u8,
    pub history_bucket: u8,
}

impl ContextKey {
    pub fn new(
        recent_pattern: u8,
        current_va: u8,
        silence_bucket: u8,
        history_bucket: u8,
    ) -> ContextKey {
        debug_assert!(current_va < 4 && silence_bucket < 5 && history_bucket < 5);
        ContextKey {
            recent_pattern,
            current_va,
            silence_bucket,
            history_bucket,
        }
    }

    /// Flat index in `0..NUM_CONTEXT_KEYS`.
    pub fn index(self) -> u32 {
        ((self.recent_pattern as u32 * 4 + self.current_va as u32) * 25)
            + self.silence_bucket as u32 * 5
            + self.history_bucket as u32
    }

    pub fn from_index(index: u32) -> Option<ContextKey> {
        if index >= NUM_CONTEXT_KEYS {
            return None;
        }
        let history = (index % 5) as u8;
        let silence = ((index / 5) % 5) as u8;
        let va = ((index / 25) % 4) as u8;
        let pattern = (index / 100) as u8;
        Some(ContextKey::new(pattern, va, silence, history))
    }
}

/// The context key at every frame of a timeline.
pub fn context_keys(tl: &VaTimeline, cfg: &BinConfig) -> Result<Vec<ContextKey>, PredictorError> {
    let bin_frames = cfg.bin_frames(tl.rate())?;
    // Cumulative offsets into the past: bin i covers [t - off[i+1], t - off[i]).
    let mut offsets = [0usize; BINS_PER_SPEAKER + 1];
    for i in 0..BINS_PER_SPEAKER {
        offsets[i + 1] = offsets[i] + bin_frames[i];
    }
    let fps = tl.rate().fps() as u64;
    let len = tl.len();

    let mut keys = Vec::with_capacity(len);
    let mut silence_run = 0u64;
    for t in 0..len {
        let mut pattern = 0u8;
        for s in Speaker::BOTH {
            for i in 0..BINS_PER_SPEAKER {
                let lo = t.saturating_sub(offsets[i + 1]);
                let hi = t.saturating_sub(offsets[i]);
                let active = tl.count_active(s, lo..hi);
                // Full-bin denominator: frames before the dialog start count
                // as silence.
                if active as f64 / bin_frames[i] as f64 >= cfg.activation_threshold {
                    let bit = if s == Speaker::A { 7 - i } else { 3 - i };
                    pattern |= 1 << bit;
                }
            }
        }

        let a = tl.active(Speaker::A, t);
        let b = tl.active(Speaker::B, t);
        let current_va = ((a as u8) << 1) | b as u8;

        silence_run = if a || b { 0 } else { silence_run + 1 };
        // Bucket edges at 200 ms / 500 ms / 1 s, compared exactly in
        // integer arithmetic: run/fps ≤ ms/1000 ⟺ run·1000 ≤ ms·fps.
        let silence_bucket = if silence_run == 0 {
            0
        } else if silence_run * 1000 <= 200 * fps {
            1
        } else if silence_run * 1000 <= 500 * fps {
            2
        } else if silence_run * 1000 <= 1000 * fps {
            3
        } else {
            4
        };

        let history = va_history_at(tl, t).expect("frame in range");
        let history_bucket = ((history.ratios[0] * 5.0).floor() as u8).min(4);

        keys.push(ContextKey::new(
            pattern,
            current_va,
            silence_bucket,
            history_bucket,
        ));
    }
    Ok(keys)
}

/// Add-α smoothed count table over [`ContextKey`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    counts: BTreeMap<u32, Box<[u64; NUM_STATES]>>,
    alpha: f64,
    bin_config: BinConfig,
    rate: FrameRate,
}

impl MarkovModel {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bin_config(&self) -> &BinConfig {
        &self.bin_config
    }

    pub fn rate(&self) -> FrameRate {
        self.rate
    }

    /// Number of context keys with at least one observation.
    pub fn observed_keys(&self) -> usize {
        self.counts.len()
    }

    pub fn total_observations(&self) -> u64 {
        self.counts
            .values()
            .map(|c| c.iter().sum::<u64>())
            .sum()
    }

    /// Same counts, different smoothing strength.
    pub fn with_alpha(mut self, alpha: f64) -> Result<MarkovModel, PredictorError> {
        if !(alpha > 0.0) {
            return Err(PredictorError::NonPositiveAlpha(alpha));
        }
        self.alpha = alpha;
        Ok(self)
    }

    /// Smoothed distribution for one context: `(count + α) / (total + 256α)`.
    /// Unseen contexts yield the uniform distribution.
    pub fn predict_row(&self, key: ContextKey) -> [f64; NUM_STATES] {
        match self.counts.get(&key.index()) {
            Some(counts) => {
                let total: u64 = counts.iter().sum();
                let denom = total as f64 + NUM_STATES as f64 * self.alpha;
                let mut row = [0.0; NUM_STATES];
                for (slot, &c) in row.iter_mut().zip(counts.iter()) {
                    *slot = (c as f64 + self.alpha) / denom;
                }
                row
            }
            None => [1.0 / NUM_STATES as f64; NUM_STATES],
        }
    }

    /// Per-frame distributions for a whole timeline.
    pub fn predict(&self, tl: &VaTimeline) -> Result<HeadOutput, PredictorError> {
        if tl.rate() != self.rate {
            log::warn!(
                "predicting at {} fps with a model trained at {} fps",
                tl.rate().fps(),
                self.rate.fps()
            );
        }
        let keys = context_keys(tl, &self.bin_config)?;
        Ok(HeadOutput::Discrete(
            keys.into_iter().map(|k| self.predict_row(k)).collect(),
        ))
    }

    /// Write the model as versioned JSON with sorted sparse count entries;
    /// byte-identical across runs for identical models.
    pub fn save(&self, path: &Path) -> Result<(), PredictorError> {
        let file = ModelFile {
            magic: MODEL_MAGIC.to_string(),
            version: MODEL_VERSION,
            smoothing_alpha: self.alpha,
            frame_rate_fps: self.rate.fps(),
            bin_config: self.bin_config.clone(),
            counts: self
                .counts
                .iter()
                .map(|(&key, counts)| CountEntry {
                    key,
                    counts: counts.to_vec(),
                })
                .collect(),
        };
        let writer = BufWriter::new(File::create(path)?);
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MarkovModel, PredictorError> {
        let bad = |reason: String| PredictorError::Format {
            path: path.display().to_string(),
            reason,
        };
        let reader = BufReader::new(File::open(path)?);
        let file: ModelFile = serde_json::from_reader(reader)?;
        if file.magic != MODEL_MAGIC {
            return Err(bad(format!("bad magic {:?}", file.magic)));
        }
        if file.version != MODEL_VERSION {
            return Err(bad(format!("unsupported version {}", file.version)));
        }
        if !(file.smoothing_alpha > 0.0) {
            return Err(bad(format!(
                "smoothing alpha must be positive, got {}",
                file.smoothing_alpha
            )));
        }
        let rate = FrameRate::new(file.frame_rate_fps)
            .map_err(|e| bad(format!("bad frame rate: {e}")))?;
        file.bin_config.validate().map_err(|e| bad(format!("bad bin config: {e}")))?;
        let mut counts = BTreeMap::new();
        for entry in file.counts {
            if entry.key >= NUM_CONTEXT_KEYS {
                return Err(bad(format!("context key {} out of range", entry.key)));
            }
            let boxed: Box<[u64; NUM_STATES]> = entry
                .counts
                .into_boxed_slice()
                .try_into()
                .map_err(|_| bad(format!("count row for key {} is not {NUM_STATES} long", entry.key)))?;
            if counts.insert(entry.key, boxed).is_some() {
                return Err(bad(format!("duplicate context key {}", entry.key)));
            }
        }
        Ok(MarkovModel {
            counts,
            alpha: file.smoothing_alpha,
            bin_config: file.bin_config,
            rate,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    version: u32,
    smoothing_alpha: f64,
    frame_rate_fps: u32,
    bin_config: BinConfig,
    counts: Vec<CountEntry>,
}

#[derive(Serialize, Deserialize)]
struct CountEntry {
    key: u32,
    counts: Vec<u64>,
}

/// Count state transitions over every valid frame of the corpus. Counts
/// commute, so dialog order cannot affect the result.
pub fn train_markov(
    corpus: &[(VaTimeline, VapLabels)],
    alpha: f64,
) -> Result<MarkovModel, PredictorError> {
    if corpus.is_empty() {
        return Err(PredictorError::EmptyCorpus);
    }
    if !(alpha > 0.0) {
        return Err(PredictorError::NonPositiveAlpha(alpha));
    }
    let bin_config = corpus[0].1.config().clone();
    let rate = corpus[0].1.rate();
    let mut counts: BTreeMap<u32, Box<[u64; NUM_STATES]>> = BTreeMap::new();
    for (tl, labels) in corpus {
        if labels.len() != tl.len() {
            return Err(PredictorError::LengthMismatch {
                timeline: tl.len(),
                labels: labels.len(),
            });
        }
        if labels.config() != &bin_config || labels.rate() != rate || tl.rate() != rate {
            return Err(PredictorError::ConfigMismatch);
        }
        let keys = context_keys(tl, &bin_config)?;
        for (t, key) in keys.into_iter().enumerate() {
            if labels.valid_mask[t] {
                let row = counts
                    .entry(key.index())
                    .or_insert_with(|| Box::new([0; NUM_STATES]));
                row[labels.discrete[t] as usize] += 1;
            }
        }
    }
    Ok(MarkovModel {
        counts,
        alpha,
        bin_config,
        rate,
    })
}

/// The three non-discrete head formats derived from discrete rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedHeads {
    pub independent4: HeadOutput,
    pub independent40: HeadOutput,
    pub comparative: HeadOutput,
}

/// Expand a discrete head into the other three formats.
///
/// Per-bin activity probabilities are exact marginals. The comparative
/// scalar duration-weights them so it matches the share-of-future-activity
/// label definition. The fine-grained head replicates each bin's marginal
/// across its constituent 50 ms slots — an approximation (the discrete
/// codec carries no sub-bin structure) that exists so the fine-grained
/// scoring path runs end to end.
pub fn derive_heads(
    output: &HeadOutput,
    cfg: &BinConfig,
) -> Result<DerivedHeads, PredictorError> {
    let rows = match output {
        HeadOutput::Discrete(rows) => rows,
        other => return Err(PredictorError::ExpectedDiscrete(other.kind())),
    };
    // The replication layout only works when the bins tile the fixed
    // fine-grained horizon exactly.
    let fine_bins = cfg.fine_bins()?;
    if fine_bins != FINE_BINS || cfg.bin_durations_ms.iter().any(|ms| ms % FINE_BIN_MS != 0) {
        return Err(PredictorError::Codec(CodecError::UnsupportedHorizon {
            horizon_ms: cfg.horizon_ms(),
        }));
    }
    let slots_per_bin = cfg.bin_durations_ms.map(|ms| (ms / FINE_BIN_MS) as usize);
    let durations_s = cfg.bin_durations_s();

    let mut independent4 = Vec::with_capacity(rows.len());
    let mut independent40 = Vec::with_capacity(rows.len());
    let mut comparative = Vec::with_capacity(rows.len());
    for row in rows {
        let marg = marginal_bins(row)?;
        independent4.push(marg);

        let mut fine = [[0.0; FINE_BINS]; 2];
        for s in 0..2 {
            let mut slot = 0;
            for (i, &n) in slots_per_bin.iter().enumerate() {
                for _ in 0..n {
                    fine[s][slot] = marg[s][i];
                    slot += 1;
                }
            }
        }
        independent40.push(fine);

        let mass = |s: usize| -> f64 {
            marg[s]
                .iter()
                .zip(durations_s)
                .map(|(&p, d)| p * d)
                .sum()
        };
        let (wa, wb) = (mass(0), mass(1));
        comparative.push(if wa + wb > 0.0 { wa / (wa + wb) } else { 0.5 });
    }
    Ok(DerivedHeads {
        independent4: HeadOutput::Independent4(independent4),
        independent40: HeadOutput::Independent40(independent40),
        comparative: HeadOutput::Comparative(comparative),
    })
}
