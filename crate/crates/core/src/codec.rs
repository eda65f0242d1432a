//! The projection-window codec.
//!
//! At every frame we summarize the next two seconds of voice activity as a
//! small discrete state. Each speaker's window is split into four bins of
//! growing duration (200/400/600/800 ms by default); a bin is *active* when
//! the speaker talks through at least half of it. The resulting eight bits —
//! speaker A in the high nibble, earliest bin in the most significant bit of
//! each nibble — index one of 256 [`VapState`]s:
//!
//! ```text
//! index = sum_i a_i * 2^(8-i)  +  sum_i b_i * 2^(4-i)      (i = 1..=4)
//! ```
//!
//! [`make_labels`] applies this codec across a whole timeline and also
//! carries three alternative per-frame label formats used by the scoring
//! pathways: independent per-bin bits, fine-grained 50 ms bits, and a scalar
//! "who owns the future" comparative value.

use crate::timeline::{FrameRate, Speaker, TimelineError, VaTimeline};
use serde::{Deserialize, Serialize};

pub const NUM_STATES: usize = 256;
pub const BINS_PER_SPEAKER: usize = 4;
/// Width of one fine-grained bin in the 40-bin label format.
pub const FINE_BIN_MS: u32 = 50;
/// Fine-grained bins per speaker under the default 2 s horizon.
pub const FINE_BINS: usize = 40;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("bin {bin} duration must be positive")]
    NonPositiveBinDuration { bin: usize },
    #[error("activation threshold must lie in (0, 1], got {0}")]
    ThresholdOutOfRange(f64),
    #[error("bin {bin} duration {ms} ms is not a whole number of frames at {fps} fps")]
    MisalignedBin { bin: usize, ms: u32, fps: u32 },
    #[error("horizon {horizon_ms} ms does not divide into {FINE_BIN_MS} ms fine bins")]
    UnsupportedHorizon { horizon_ms: u32 },
    #[error("state index {0} is out of range (0..=255)")]
    StateIndexOutOfRange(u16),
    #[error("window at frame {frame} (+{horizon_frames} frames) exceeds timeline length {len}")]
    WindowOutOfRange {
        frame: usize,
        horizon_frames: usize,
        len: usize,
    },
    #[error("discrete row has {0} entries, expected {NUM_STATES}")]
    RowLength(usize),
    #[error("discrete row entry {index} is {value}, outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("discrete row sums to {sum}, expected 1 within 1e-6")]
    Unnormalized { sum: f64 },
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

/// Window geometry: per-bin durations plus the activity ratio a bin needs to
/// count as active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinConfig {
    /// Ordered bin durations in milliseconds, nearest-future first.
    pub bin_durations_ms: [u32; BINS_PER_SPEAKER],
    /// Minimum fraction of active frames for a bin to read as active.
    pub activation_threshold: f64,
}

impl Default for BinConfig {
    fn default() -> Self {
        BinConfig {
            bin_durations_ms: [200, 400, 600, 800],
            activation_threshold: 0.5,
        }
    }
}

impl BinConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        for (i, &ms) in self.bin_durations_ms.iter().enumerate() {
            if ms == 0 {
                return Err(CodecError::NonPositiveBinDuration { bin: i + 1 });
            }
        }
        if !(self.activation_threshold > 0.0 && self.activation_threshold <= 1.0) {
            return Err(CodecError::ThresholdOutOfRange(self.activation_threshold));
        }
        Ok(())
    }

    /// Total projection horizon in milliseconds.
    pub fn horizon_ms(&self) -> u32 {
        self.bin_durations_ms.iter().sum()
    }

    pub fn horizon_frames(&self, rate: FrameRate) -> Result<usize, CodecError> {
        Ok(self.bin_frames(rate)?.iter().sum())
    }

    /// Per-bin frame counts, validated to be whole frames.
    pub fn bin_frames(&self, rate: FrameRate) -> Result<[usize; BINS_PER_SPEAKER], CodecError> {
        self.validate()?;
        let mut out = [0usize; BINS_PER_SPEAKER];
        for (i, &ms) in self.bin_durations_ms.iter().enumerate() {
            let frames = ms as u64 * rate.fps() as u64;
            if !frames.is_multiple_of(1000) {
                return Err(CodecError::MisalignedBin {
                    bin: i + 1,
                    ms,
                    fps: rate.fps(),
                });
            }
            out[i] = (frames / 1000) as usize;
        }
        Ok(out)
    }

    pub fn bin_durations_s(&self) -> [f64; BINS_PER_SPEAKER] {
        self.bin_durations_ms.map(|ms| ms as f64 / 1000.0)
    }

    /// Number of 50 ms fine bins per speaker; errors when the horizon does
    /// not divide evenly.
    pub fn fine_bins(&self) -> Result<usize, CodecError> {
        let horizon = self.horizon_ms();
        if !horizon.is_multiple_of(FINE_BIN_MS) || horizon / FINE_BIN_MS > 64 {
            return Err(CodecError::UnsupportedHorizon { horizon_ms: horizon });
        }
        Ok((horizon / FINE_BIN_MS) as usize)
    }
}

/// Eight per-bin activity bits: `bits[speaker][bin]`, earliest bin first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowBits {
    bits: [[bool; BINS_PER_SPEAKER]; 2],
}

impl WindowBits {
    pub fn new(bits: [[bool; BINS_PER_SPEAKER]; 2]) -> WindowBits {
        WindowBits { bits }
    }

    pub fn speaker(&self, s: Speaker) -> [bool; BINS_PER_SPEAKER] {
        self.bits[s.index()]
    }

    /// Bin `i` (0-based) for `s`.
    pub fn bin(&self, s: Speaker, i: usize) -> bool {
        self.bits[s.index()][i]
    }

    pub fn swap_speakers(self) -> WindowBits {
        WindowBits {
            bits: [self.bits[1], self.bits[0]],
        }
    }
}

/// One of the 256 discrete projection-window states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VapState(u8);

impl VapState {
    pub fn from_index(index: u16) -> Result<VapState, CodecError> {
        u8::try_from(index)
            .map(VapState)
            .map_err(|_| CodecError::StateIndexOutOfRange(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// All 256 states in index order.
    pub fn all() -> impl Iterator<Item = VapState> {
        (0..=255u8).map(VapState)
    }
}

/// Pack per-bin bits into a state index: A occupies the high nibble, and
/// within each nibble bin 1 is the most significant bit.
pub fn encode_state(bits: WindowBits) -> VapState {
    let mut index = 0u8;
    for i in 0..BINS_PER_SPEAKER {
        if bits.bin(Speaker::A, i) {
            index |= 1 << (7 - i);
        }
        if bits.bin(Speaker::B, i) {
            index |= 1 << (3 - i);
        }
    }
    VapState(index)
}

/// Unpack a state index back into per-bin bits (inverse of [`encode_state`]).
pub fn decode_state(state: VapState) -> WindowBits {
    let a = std::array::from_fn(|i| state.0 & (1 << (7 - i)) != 0);
    let b = std::array::from_fn(|i| state.0 & (1 << (3 - i)) != 0);
    WindowBits { bits: [a, b] }
}

/// Compute the window bits at frame `t`: bin `i` of a speaker is active when
/// their activity covers at least `activation_threshold` of the bin's frames.
/// The window `[t, t + horizon)` must fit inside the timeline.
pub fn window_bits(
    tl: &VaTimeline,
    t: usize,
    cfg: &BinConfig,
) -> Result<WindowBits, CodecError> {
    let bin_frames = cfg.bin_frames(tl.rate())?;
    let horizon: usize = bin_frames.iter().sum();
    if t + horizon > tl.len() {
        return Err(CodecError::WindowOutOfRange {
            frame: t,
            horizon_frames: horizon,
            len: tl.len(),
        });
    }
    let mut bits = [[false; BINS_PER_SPEAKER]; 2];
    for s in Speaker::BOTH {
        let mut offset = t;
        for (i, &len) in bin_frames.iter().enumerate() {
            let active = tl.count_active(s, offset..offset + len);
            bits[s.index()][i] = active as f64 / len as f64 >= cfg.activation_threshold;
            offset += len;
        }
    }
    Ok(WindowBits { bits })
}

/// Per-frame projection labels for a whole timeline, in every head format.
///
/// The final `horizon` frames of a dialog cannot see a full future window;
/// they carry `valid_mask = false` and neutral filler values that consumers
/// must never read without consulting the mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VapLabels {
    rate: FrameRate,
    cfg: BinConfig,
    fine_bins: usize,
    /// Discrete state index per frame (0 at masked frames).
    pub discrete: Vec<u8>,
    /// Speaker-A share of future activity per frame (0.5 at masked frames).
    pub comparative: Vec<f64>,
    /// False for the trailing frames whose window would overrun the dialog.
    pub valid_mask: Vec<bool>,
    /// Packed 50 ms-bin activity bits per frame, one word per speaker.
    fine: Vec<[u64; 2]>,
}

impl VapLabels {
    pub fn len(&self) -> usize {
        self.discrete.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discrete.is_empty()
    }

    pub fn rate(&self) -> FrameRate {
        self.rate
    }

    pub fn config(&self) -> &BinConfig {
        &self.cfg
    }

    pub fn state(&self, frame: usize) -> VapState {
        VapState(self.discrete[frame])
    }

    /// Per-bin bits at `frame`, identical to decoding the discrete state.
    pub fn independent4(&self, frame: usize) -> [[bool; BINS_PER_SPEAKER]; 2] {
        let bits = decode_state(VapState(self.discrete[frame]));
        [bits.speaker(Speaker::A), bits.speaker(Speaker::B)]
    }

    /// Fine-grained 50 ms bin bits at `frame` (`fine_bins` per speaker).
    pub fn independent40(&self, frame: usize) -> [Vec<bool>; 2] {
        let packed = self.fine[frame];
        let unpack = |w: u64| (0..self.fine_bins).map(|i| w & (1 << i) != 0).collect();
        [unpack(packed[0]), unpack(packed[1])]
    }

    pub fn fine_bins(&self) -> usize {
        self.fine_bins
    }
}

/// Label every frame of a timeline.
pub fn make_labels(tl: &VaTimeline, cfg: &BinConfig) -> Result<VapLabels, CodecError> {
    let bin_frames = cfg.bin_frames(tl.rate())?;
    let horizon: usize = bin_frames.iter().sum();
    let fine_bins = cfg.fine_bins()?;
    let fine_frames = {
        let f = FINE_BIN_MS as u64 * tl.rate().fps() as u64;
        if !f.is_multiple_of(1000) {
            return Err(CodecError::MisalignedBin {
                bin: 0,
                ms: FINE_BIN_MS,
                fps: tl.rate().fps(),
            });
        }
        (f / 1000) as usize
    };

    let n = tl.len();
    let mut labels = VapLabels {
        rate: tl.rate(),
        cfg: cfg.clone(),
        fine_bins,
        discrete: vec![0; n],
        comparative: vec![0.5; n],
        valid_mask: vec![false; n],
        fine: vec![[0, 0]; n],
    };

    for t in 0..n {
        // Mask every frame in the trailing horizon, including the boundary
        // frame whose window ends exactly at the dialog end.
        if t + horizon >= n {
            continue;
        }
        labels.valid_mask[t] = true;
        let bits = window_bits(tl, t, cfg)?;
        labels.discrete[t] = encode_state(bits).index();

        let a_total = tl.count_active(Speaker::A, t..t + horizon);
        let b_total = tl.count_active(Speaker::B, t..t + horizon);
        if a_total + b_total > 0 {
            labels.comparative[t] = a_total as f64 / (a_total + b_total) as f64;
        }

        let mut packed = [0u64; 2];
        for s in Speaker::BOTH {
            for i in 0..fine_bins {
                let lo = t + i * fine_frames;
                let active = tl.count_active(s, lo..lo + fine_frames);
                if active as f64 / fine_frames as f64 >= cfg.activation_threshold {
                    packed[s.index()] |= 1 << i;
                }
            }
        }
        labels.fine[t] = packed;
    }
    Ok(labels)
}

/// Per-bin activity probabilities implied by a distribution over states:
/// `result[speaker][bin]` sums the mass of every state with that bit set.
/// The row must be a probability distribution (sum 1 within 1e-6).
pub fn marginal_bins(row: &[f64]) -> Result<[[f64; BINS_PER_SPEAKER]; 2], CodecError> {
    validate_discrete_row(row)?;
    let mut out = [[0.0f64; BINS_PER_SPEAKER]; 2];
    let [a_bins, b_bins] = &mut out;
    for (idx, &p) in row.iter().enumerate() {
        for (i, (a, b)) in a_bins.iter_mut().zip(b_bins.iter_mut()).enumerate() {
            if idx & (1 << (7 - i)) != 0 {
                *a += p;
            }
            if idx & (1 << (3 - i)) != 0 {
                *b += p;
            }
        }
    }
    Ok(out)
}

/// Check that `row` is a 256-entry probability distribution.
pub fn validate_discrete_row(row: &[f64]) -> Result<(), CodecError> {
    if row.len() != NUM_STATES {
        return Err(CodecError::RowLength(row.len()));
    }
    let mut sum = 0.0;
    for (index, &value) in row.iter().enumerate() {
        if !(0.0..=1.0 + 1e-9).contains(&value) {
            return Err(CodecError::ProbabilityOutOfRange { index, value });
        }
        sum += value;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(CodecError::Unnormalized { sum });
    }
    Ok(())
}

/// The four per-frame output formats a predictor can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Discrete,
    Independent4,
    Independent40,
    Comparative,
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            HeadKind::Discrete => "discrete",
            HeadKind::Independent4 => "independent4",
            HeadKind::Independent40 => "independent40",
            HeadKind::Comparative => "comparative",
        };
        write!(f, "{name}")
    }
}

/// Per-frame predictor output for one dialog.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput {
    /// A distribution over the 256 states per frame.
    Discrete(Vec<[f64; NUM_STATES]>),
    /// Independent per-bin activity probabilities, `[speaker][bin]`.
    Independent4(Vec<[[f64; BINS_PER_SPEAKER]; 2]>),
    /// Independent 50 ms-bin probabilities, `[speaker][bin]`.
    Independent40(Vec<[[f64; FINE_BINS]; 2]>),
    /// Probability that speaker A owns the projection window.
    Comparative(Vec<f64>),
}

impl HeadOutput {
    pub fn len(&self) -> usize {
        match self {
            HeadOutput::Discrete(v) => v.len(),
            HeadOutput::Independent4(v) => v.len(),
            HeadOutput::Independent40(v) => v.len(),
            HeadOutput::Comparative(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            HeadOutput::Discrete(_) => HeadKind::Discrete,
            HeadOutput::Independent4(_) => HeadKind::Independent4,
            HeadOutput::Independent40(_) => HeadKind::Independent40,
            HeadOutput::Comparative(_) => HeadKind::Comparative,
        }
    }

    pub fn row(&self, frame: usize) -> HeadRow<'_> {
        match self {
            HeadOutput::Discrete(v) => HeadRow::Discrete(&v[frame]),
            HeadOutput::Independent4(v) => HeadRow::Independent4(&v[frame]),
            HeadOutput::Independent40(v) => HeadRow::Independent40(&v[frame]),
            HeadOutput::Comparative(v) => HeadRow::Comparative(v[frame]),
        }
    }
}

/// A borrowed single-frame view into a [`HeadOutput`].
#[derive(Debug, Clone, Copy)]
pub enum HeadRow<'a> {
    Discrete(&'a [f64; NUM_STATES]),
    Independent4(&'a [[f64; BINS_PER_SPEAKER]; 2]),
    Independent40(&'a [[f64; FINE_BINS]; 2]),
    Comparative(f64),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::{rasterize, VaSegment};
    use proptest::prelude::*;

    fn rate100() -> FrameRate {
        FrameRate::new(100).unwrap()
    }

    fn bits(a: [u8; 4], b: [u8; 4]) -> WindowBits {
        WindowBits::new([a.map(|v| v != 0), b.map(|v| v != 0)])
    }

    #[test]
    fn encode_known_states() {
        assert_eq!(encode_state(bits([0, 0, 0, 0], [0, 0, 0, 0])).index(), 0);
        assert_eq!(encode_state(bits([1, 1, 1, 1], [1, 1, 1, 1])).index(), 255);
        // A silent for 600 ms then active: bins 3 and 4 only.
        assert_eq!(encode_state(bits([0, 0, 1, 1], [0, 0, 0, 0])).index(), 48);
        // A fully active, B silent.
        assert_eq!(encode_state(bits([1, 1, 1, 1], [0, 0, 0, 0])).index(), 240);
    }

    #[test]
    fn decode_inverts_encode_for_all_states() {
        for state in VapState::all() {
            assert_eq!(encode_state(decode_state(state)), state);
        }
    }

    #[test]
    fn from_index_rejects_out_of_range() {
        assert!(matches!(
            VapState::from_index(256),
            Err(CodecError::StateIndexOutOfRange(256))
        ));
        assert_eq!(VapState::from_index(255).unwrap().index(), 255);
    }

    #[test]
    fn window_bits_all_silent() {
        let tl = rasterize(&[], rate100(), 3.0).unwrap();
        let wb = window_bits(&tl, 0, &BinConfig::default()).unwrap();
        assert_eq!(encode_state(wb).index(), 0);
    }

    #[test]
    fn window_bits_full_activity() {
        let tl = rasterize(&[VaSegment::new(Speaker::A, 0.0, 3.0)], rate100(), 3.0).unwrap();
        let wb = window_bits(&tl, 50, &BinConfig::default()).unwrap();
        assert_eq!(wb.speaker(Speaker::A), [true; 4]);
        assert_eq!(wb.speaker(Speaker::B), [false; 4]);
    }

    /// 300 ms of activity from the window start fills bin 1 (200 ms) but only
    /// a quarter of bin 2 (400 ms), so just the first bit turns on.
    #[test]
    fn window_bits_respects_activation_threshold() {
        let tl = rasterize(&[VaSegment::new(Speaker::A, 0.5, 0.8)], rate100(), 3.0).unwrap();
        let wb = window_bits(&tl, 50, &BinConfig::default()).unwrap();
        assert_eq!(wb.speaker(Speaker::A), [true, false, false, false]);
    }

    #[test]
    fn window_bits_out_of_range() {
        let tl = rasterize(&[], rate100(), 1.0).unwrap();
        assert!(matches!(
            window_bits(&tl, 0, &BinConfig::default()),
            Err(CodecError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn labels_mask_trailing_horizon() {
        let tl = rasterize(&[], rate100(), 5.0).unwrap();
        let labels = make_labels(&tl, &BinConfig::default()).unwrap();
        assert_eq!(labels.len(), 500);
        // 2 s horizon at 100 fps: the last 200 frames are masked.
        for t in 0..300 {
            assert!(labels.valid_mask[t], "frame {t} should be valid");
        }
        for t in 300..500 {
            assert!(!labels.valid_mask[t], "frame {t} should be masked");
        }
    }

    #[test]
    fn labels_constant_speaker() {
        let tl = rasterize(&[VaSegment::new(Speaker::A, 0.0, 5.0)], rate100(), 5.0).unwrap();
        let labels = make_labels(&tl, &BinConfig::default()).unwrap();
        for t in 0..300 {
            assert_eq!(labels.discrete[t], 240);
            assert_eq!(labels.comparative[t], 1.0);
            assert_eq!(labels.independent4(t)[0], [true; 4]);
            assert!(labels.independent40(t)[0].iter().all(|&b| b));
            assert!(labels.independent40(t)[1].iter().all(|&b| !b));
        }
    }

    #[test]
    fn labels_all_silent_comparative_neutral() {
        let tl = rasterize(&[], rate100(), 4.0).unwrap();
        let labels = make_labels(&tl, &BinConfig::default()).unwrap();
        assert!(labels.valid_mask[0]);
        assert_eq!(labels.discrete[0], 0);
        assert_eq!(labels.comparative[0], 0.5);
    }

    #[test]
    fn labels_independent4_matches_fresh_window_bits() {
        let tl = rasterize(
            &[
                VaSegment::new(Speaker::A, 0.0, 2.2),
                VaSegment::new(Speaker::B, 2.5, 4.4),
            ],
            rate100(),
            6.0,
        )
        .unwrap();
        let cfg = BinConfig::default();
        let labels = make_labels(&tl, &cfg).unwrap();
        for t in (0..400).step_by(7) {
            let wb = window_bits(&tl, t, &cfg).unwrap();
            let ind4 = labels.independent4(t);
            assert_eq!(ind4[0], wb.speaker(Speaker::A));
            assert_eq!(ind4[1], wb.speaker(Speaker::B));
        }
    }

    #[test]
    fn marginals_of_point_masses() {
        let mut row = vec![0.0; NUM_STATES];
        row[0] = 1.0;
        assert_eq!(marginal_bins(&row).unwrap(), [[0.0; 4]; 2]);
        let mut row = vec![0.0; NUM_STATES];
        row[255] = 1.0;
        assert_eq!(marginal_bins(&row).unwrap(), [[1.0; 4]; 2]);
    }

    #[test]
    fn marginals_of_uniform_are_half() {
        let row = vec![1.0 / 256.0; NUM_STATES];
        let m = marginal_bins(&row).unwrap();
        for bins in &m {
            for p in bins {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn marginals_reject_unnormalized_rows() {
        let row = vec![0.0; NUM_STATES];
        assert!(matches!(
            marginal_bins(&row),
            Err(CodecError::Unnormalized { .. })
        ));
        let row = vec![2.0 / 256.0; NUM_STATES];
        assert!(matches!(
            marginal_bins(&row),
            Err(CodecError::Unnormalized { .. })
        ));
        assert!(matches!(
            marginal_bins(&[1.0]),
            Err(CodecError::RowLength(1))
        ));
    }

    #[test]
    fn bin_config_validation() {
        let cfg = BinConfig {
            activation_threshold: 0.0,
            ..BinConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(CodecError::ThresholdOutOfRange(_))
        ));
        let mut cfg = BinConfig::default();
        cfg.bin_durations_ms[2] = 0;
        assert!(matches!(
            cfg.validate(),
            Err(CodecError::NonPositiveBinDuration { bin: 3 })
        ));
        // 250 ms bins are not whole frames at 30 fps.
        let cfg = BinConfig {
            bin_durations_ms: [250, 250, 250, 250],
            activation_threshold: 0.5,
        };
        assert!(matches!(
            cfg.bin_frames(FrameRate::new(30).unwrap()),
            Err(CodecError::MisalignedBin { .. })
        ));
    }

    prop_compose! {
        fn arb_bits()(raw in 0u16..256) -> WindowBits {
            decode_state(VapState::from_index(raw).unwrap())
        }
    }

    proptest! {
        /// encode/decode is a bijection over arbitrary bit patterns.
        #[test]
        fn codec_roundtrip(wb in arb_bits()) {
            prop_assert_eq!(decode_state(encode_state(wb)), wb);
        }

        /// Swapping speakers in the bits swaps the nibbles of the index.
        #[test]
        fn speaker_swap_swaps_nibbles(wb in arb_bits()) {
            let idx = encode_state(wb).index();
            let swapped = encode_state(wb.swap_speakers()).index();
            prop_assert_eq!(swapped, idx.rotate_left(4));
        }

        /// Raising the activation threshold can only clear bits, never set
        /// new ones.
        #[test]
        fn threshold_monotonicity(
            seed in 0u64..1000,
            lo in 1u32..=50,
            delta in 0u32..=50,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let frames: Vec<bool> = (0..400).map(|_| rng.gen_bool(0.5)).collect();
            let tl = VaTimeline::from_frames(rate100(), frames, vec![false; 400]).unwrap();
            let low = BinConfig { activation_threshold: lo as f64 / 100.0, ..BinConfig::default() };
            let hi_t = ((lo + delta) as f64 / 100.0).min(1.0);
            let high = BinConfig { activation_threshold: hi_t, ..BinConfig::default() };
            let wb_lo = window_bits(&tl, 0, &low).unwrap();
            let wb_hi = window_bits(&tl, 0, &high).unwrap();
            for s in Speaker::BOTH {
                for i in 0..4 {
                    prop_assert!(wb_lo.bin(s, i) || !wb_hi.bin(s, i));
                }
            }
        }

        /// marginal_bins is linear in the row: marg((p+q)/2) = (marg(p)+marg(q))/2.
        #[test]
        fn marginals_are_linear(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let mut random_row = || {
                let mut row = [0.0f64; NUM_STATES];
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = rng.gen_range(0.0..1.0);
                    sum += *v;
                }
                for v in row.iter_mut() {
                    *v /= sum;
                }
                row
            };
            let p = random_row();
            let q = random_row();
            let mix: Vec<f64> = p.iter().zip(&q).map(|(&x, &y)| 0.5 * (x + y)).collect();
            let mp = marginal_bins(&p).unwrap();
            let mq = marginal_bins(&q).unwrap();
            let mm = marginal_bins(&mix).unwrap();
            for s in 0..2 {
                for b in 0..4 {
                    prop_assert!((mm[s][b] - 0.5 * (mp[s][b] + mq[s][b])).abs() < 1e-9);
                }
            }
        }
    }
}
