//! Frame-aligned voice-activity timelines for two-party dialogs.
//!
//! Everything downstream (window labels, turn-taking events, predictors)
//! operates on a [`VaTimeline`]: two equal-length boolean frame tracks, one
//! per speaker, at a fixed frame rate. Continuous-time segments enter through
//! [`rasterize`], which applies a majority-overlap rule so that segment
//! boundaries land on the nearest sensible frame edge.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

/// One of the two dialog parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Speaker {
    A,
    B,
}

impl Speaker {
    pub const BOTH: [Speaker; 2] = [Speaker::A, Speaker::B];

    /// The opposite party.
    pub fn other(self) -> Speaker {
        match self {
            Speaker::A => Speaker::B,
            Speaker::B => Speaker::A,
        }
    }

    /// Stable array index: A = 0, B = 1.
    pub fn index(self) -> usize {
        match self {
            Speaker::A => 0,
            Speaker::B => 1,
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::A => write!(f, "A"),
            Speaker::B => write!(f, "B"),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TimelineError {
    #[error("frame rate must be at least 1 frame per second")]
    ZeroFrameRate,
    #[error("{seconds}s is not a whole number of frames at {fps} fps")]
    MisalignedDuration { seconds: f64, fps: u32 },
    #[error("duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("segment {speaker} [{start}, {end}) is malformed: start must be >= 0 and end > start")]
    MalformedSegment { speaker: Speaker, start: f64, end: f64 },
    #[error("segment {speaker} [{start}, {end}) falls outside the dialog range [0, {duration}]")]
    SegmentOutOfRange { speaker: Speaker, start: f64, end: f64, duration: f64 },
    #[error("frame {frame} is out of range for a timeline of {len} frames")]
    FrameOutOfRange { frame: usize, len: usize },
    #[error("speaker tracks differ in length ({a} vs {b} frames)")]
    TrackLengthMismatch { a: usize, b: usize },
}

/// Frames per second for a timeline. Durations handed to the library must be
/// whole numbers of frames at this rate; conversions reject anything else
/// rather than silently rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRate(u32);

impl FrameRate {
    pub fn new(fps: u32) -> Result<FrameRate, TimelineError> {
        if fps == 0 {
            return Err(TimelineError::ZeroFrameRate);
        }
        Ok(FrameRate(fps))
    }

    pub fn fps(self) -> u32 {
        self.0
    }

    /// Seconds covered by one frame.
    pub fn frame_duration_s(self) -> f64 {
        1.0 / f64::from(self.0)
    }

    /// Convert a duration in seconds to a frame count, rejecting values that
    /// do not land on a frame boundary (within a small float tolerance).
    pub fn whole_frames(self, seconds: f64) -> Result<usize, TimelineError> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(TimelineError::InvalidDuration(seconds));
        }
        let frames = seconds * f64::from(self.0);
        let rounded = frames.round();
        if (frames - rounded).abs() > 1e-6 * rounded.max(1.0) {
            return Err(TimelineError::MisalignedDuration {
                seconds,
                fps: self.0,
            });
        }
        Ok(rounded as usize)
    }
}

impl Default for FrameRate {
    /// 100 frames per second (10 ms frames).
    fn default() -> Self {
        FrameRate(100)
    }
}

/// A continuous-time voice-activity segment, half-open in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaSegment {
    pub speaker: Speaker,
    #[serde(rename = "start")]
    pub start_s: f64,
    #[serde(rename = "end")]
    pub end_s: f64,
}

impl VaSegment {
    pub fn new(speaker: Speaker, start_s: f64, end_s: f64) -> VaSegment {
        VaSegment {
            speaker,
            start_s,
            end_s,
        }
    }
}

/// Per-frame voice activity for both speakers, plus prefix sums so that
/// range counts (window ratios, history regions) are O(1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaTimeline {
    rate: FrameRate,
    tracks: [Vec<bool>; 2],
    cumulative: [Vec<u32>; 2],
}

impl VaTimeline {
    /// Build a timeline from raw frame tracks (mostly useful in tests; real
    /// corpora come through [`rasterize`]).
    pub fn from_frames(
        rate: FrameRate,
        a: Vec<bool>,
        b: Vec<bool>,
    ) -> Result<VaTimeline, TimelineError> {
        if a.len() != b.len() {
            return Err(TimelineError::TrackLengthMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        let cumulative = [prefix_sum(&a), prefix_sum(&b)];
        Ok(VaTimeline {
            rate,
            tracks: [a, b],
            cumulative,
        })
    }

    pub fn rate(&self) -> FrameRate {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.tracks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks[0].is_empty()
    }

    pub fn active(&self, speaker: Speaker, frame: usize) -> bool {
        self.tracks[speaker.index()][frame]
    }

    pub fn track(&self, speaker: Speaker) -> &[bool] {
        &self.tracks[speaker.index()]
    }

    /// Number of active frames for `speaker` within `range` (clamped to the
    /// timeline).
    pub fn count_active(&self, speaker: Speaker, range: Range<usize>) -> usize {
        let lo = range.start.min(self.len());
        let hi = range.end.min(self.len());
        if hi <= lo {
            return 0;
        }
        let cum = &self.cumulative[speaker.index()];
        (cum[hi] - cum[lo]) as usize
    }

    /// True when either speaker has an active frame in `range`.
    pub fn any_active(&self, range: Range<usize>) -> bool {
        Speaker::BOTH
            .iter()
            .any(|&s| self.count_active(s, range.clone()) > 0)
    }

    /// A copy with the two speaker tracks exchanged.
    pub fn swap_speakers(&self) -> VaTimeline {
        VaTimeline {
            rate: self.rate,
            tracks: [self.tracks[1].clone(), self.tracks[0].clone()],
            cumulative: [self.cumulative[1].clone(), self.cumulative[0].clone()],
        }
    }

    /// Maximal runs of consecutive active frames for one speaker, as
    /// half-open frame ranges.
    pub fn segments(&self, speaker: Speaker) -> Vec<Range<usize>> {
        runs(self.track(speaker), |&v| v)
    }
}

fn prefix_sum(track: &[bool]) -> Vec<u32> {
    let mut cum = Vec::with_capacity(track.len() + 1);
    cum.push(0u32);
    let mut acc = 0u32;
    for &v in track {
        acc += u32::from(v);
        cum.push(acc);
    }
    cum
}

fn runs<T>(track: &[T], mut pred: impl FnMut(&T) -> bool) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, v) in track.iter().enumerate() {
        match (pred(v), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..track.len());
    }
    out
}

/// Rasterize continuous-time segments onto a frame grid.
///
/// Frame `f` covers `[f/rate, (f+1)/rate)`. A frame is active for a speaker
/// exactly when that speaker's (merged) segments overlap it by **more than
/// half a frame**; the strict inequality keeps the rule symmetric at both
/// ends of a segment. Overlapping or touching segments of the same speaker
/// are merged before the overlap test so that abutting segments cannot lose
/// a boundary frame to two sub-half overlaps.
pub fn rasterize(
    segments: &[VaSegment],
    rate: FrameRate,
    duration_s: f64,
) -> Result<VaTimeline, TimelineError> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(TimelineError::InvalidDuration(duration_s));
    }
    let n_frames = rate.whole_frames(duration_s)?;
    let fps = f64::from(rate.fps());

    let mut per_speaker: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for seg in segments {
        if !seg.start_s.is_finite() || !seg.end_s.is_finite() || seg.start_s < 0.0 || seg.end_s <= seg.start_s {
            return Err(TimelineError::MalformedSegment {
                speaker: seg.speaker,
                start: seg.start_s,
                end: seg.end_s,
            });
        }
        if seg.end_s > duration_s + 1e-9 {
            return Err(TimelineError::SegmentOutOfRange {
                speaker: seg.speaker,
                start: seg.start_s,
                end: seg.end_s,
                duration: duration_s,
            });
        }
        per_speaker[seg.speaker.index()].push((seg.start_s, seg.end_s));
    }

    let mut tracks = [vec![false; n_frames], vec![false; n_frames]];
    for (idx, intervals) in per_speaker.iter_mut().enumerate() {
        intervals.sort_by(|x, y| x.partial_cmp(y).expect("finite interval endpoints"));
        let merged = merge_intervals(intervals);
        for (s, e) in merged {
            // Candidate frames: one beyond each end covers boundary overlap.
            let lo = ((s * fps).floor() as isize - 1).max(0) as usize;
            let hi = (((e * fps).ceil() as isize + 1) as usize).min(n_frames);
            for (f, active) in (lo..).zip(&mut tracks[idx][lo..hi]) {
                let f_start = f as f64 / fps;
                let f_end = (f + 1) as f64 / fps;
                let overlap = e.min(f_end) - s.max(f_start);
                // Strictly-more-than-half coverage activates a frame; the
                // epsilon keeps exact-half overlaps inactive despite float
                // rounding in the subtraction above.
                if overlap * fps > 0.5 + 1e-9 {
                    *active = true;
                }
            }
        }
    }

    let cumulative = [prefix_sum(&tracks[0]), prefix_sum(&tracks[1])];
    let [a, b] = tracks;
    Ok(VaTimeline {
        rate,
        tracks: [a, b],
        cumulative,
    })
}

fn merge_intervals(sorted: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for &(s, e) in sorted {
        match merged.last_mut() {
            Some((_, last_end)) if s <= *last_end => *last_end = last_end.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

/// Long-horizon dialog-dominance summary: who has been talking, per lookback
/// region, as a share of joint activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaHistory {
    /// Ratios ordered oldest-to-newest. Entry 0 covers everything older than
    /// 60 s before the query frame; entry 4 covers the final 5 s before it.
    pub ratios: [f64; 5],
}

/// Lookback region edges in seconds before the query frame, oldest first.
/// Region `i` spans `[t - EDGES[i], t - EDGES[i+1])` with an unbounded first
/// region, clipped at the start of the dialog.
const HISTORY_EDGES_S: [u32; 5] = [u32::MAX, 60, 30, 10, 5];

/// Speaker-A share of voice activity over five lookback regions ending just
/// before frame `t` (frame `t` itself is excluded; history is strictly the
/// past). Regions with no activity from either speaker report 0.5.
pub fn va_history_at(tl: &VaTimeline, t: usize) -> Result<VaHistory, TimelineError> {
    if t >= tl.len() {
        return Err(TimelineError::FrameOutOfRange {
            frame: t,
            len: tl.len(),
        });
    }
    let fps = tl.rate().fps() as usize;
    let mut ratios = [0.5f64; 5];
    for i in 0..5 {
        let lo = if HISTORY_EDGES_S[i] == u32::MAX {
            0
        } else {
            t.saturating_sub(HISTORY_EDGES_S[i] as usize * fps)
        };
        let hi = if i + 1 < 5 {
            t.saturating_sub(HISTORY_EDGES_S[i + 1] as usize * fps)
        } else {
            t
        };
        if hi <= lo {
            continue;
        }
        let a = tl.count_active(Speaker::A, lo..hi);
        let b = tl.count_active(Speaker::B, lo..hi);
        if a + b > 0 {
            ratios[i] = a as f64 / (a + b) as f64;
        }
    }
    Ok(VaHistory { ratios })
}

/// Maximal frame ranges where neither speaker is active, in order.
pub fn mutual_silences(tl: &VaTimeline) -> Vec<Range<usize>> {
    let a = tl.track(Speaker::A);
    let b = tl.track(Speaker::B);
    let joint: Vec<bool> = a.iter().zip(b).map(|(&x, &y)| x || y).collect();
    runs(&joint, |&v| !v)
}
