//! Evaluation-event extraction from voice-activity timelines.
//!
//! Four event families are mined from each dialog:
//!
//! * **shift/hold** — mutual silences with a unique speaker on each side;
//!   the label says whether the floor changed hands.
//! * **shift prediction** — spans at the end of a turn that precedes a
//!   shift (positives) versus spans deep inside uninterrupted speech
//!   (negatives).
//! * **backchannel prediction** — spans just before a short listener
//!   response (positives) versus spans far from any such response
//!   (negatives).
//! * **short/long** — utterance onsets, labeled by whether the utterance
//!   turns out to be a brief backchannel or a full turn.
//!
//! Every timing constant is configurable through [`EventParams`]; negative
//! sampling is deterministic so repeated runs agree bit-for-bit. The
//! [`reference`] submodule re-derives everything with naive frame scans and
//! serves as an executable cross-check for the optimized extractor.

use crate::timeline::{mutual_silences, FrameRate, Speaker, VaTimeline};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// The four evaluation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "shift_hold")]
    ShiftHold,
    #[serde(rename = "shift_pred")]
    ShiftPred,
    #[serde(rename = "bc_pred")]
    BackchannelPred,
    #[serde(rename = "short_long")]
    ShortLong,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::ShiftHold,
        Task::ShiftPred,
        Task::BackchannelPred,
        Task::ShortLong,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::ShiftHold => "shift_hold",
            Task::ShiftPred => "shift_pred",
            Task::BackchannelPred => "bc_pred",
            Task::ShortLong => "short_long",
        }
    }

    /// The two ground-truth classes of this task, positive class first.
    pub fn labels(self) -> [EventLabel; 2] {
        match self {
            Task::ShiftHold => [EventLabel::Shift, EventLabel::Hold],
            Task::ShiftPred | Task::BackchannelPred => {
                [EventLabel::Positive, EventLabel::Negative]
            }
            Task::ShortLong => [EventLabel::Short, EventLabel::Long],
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shift_hold" => Ok(Task::ShiftHold),
            "shift_pred" => Ok(Task::ShiftPred),
            "bc_pred" => Ok(Task::BackchannelPred),
            "short_long" => Ok(Task::ShortLong),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// Ground-truth label of one event instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventLabel {
    Shift,
    Hold,
    Positive,
    Negative,
    Short,
    Long,
}

impl EventLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EventLabel::Shift => "shift",
            EventLabel::Hold => "hold",
            EventLabel::Positive => "positive",
            EventLabel::Negative => "negative",
            EventLabel::Short => "short",
            EventLabel::Long => "long",
        }
    }

    /// Whether this is the positive class of its task (the class a high
    /// task score argues for).
    pub fn is_positive(self) -> bool {
        matches!(self, EventLabel::Shift | EventLabel::Positive | EventLabel::Short)
    }
}

impl std::fmt::Display for EventLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EventError {
    #[error("event parameter {field} must be positive, got {value}")]
    NonPositiveParam { field: &'static str, value: f64 },
    #[error("event parameter {field} = {value}s is not a whole number of frames at {fps} fps")]
    MisalignedParam {
        field: &'static str,
        value: f64,
        fps: u32,
    },
}

/// Timing constants for event extraction, in seconds. All must be positive
/// whole frame counts at the timeline's rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventParams {
    /// Single-speaker window required before a mutual silence.
    pub pre_offset_s: f64,
    /// Single-speaker window required after a mutual silence.
    pub post_onset_s: f64,
    /// Shift/hold evaluation starts this far into the silence.
    pub sh_eval_delay_s: f64,
    /// Length of the shift/hold evaluation span.
    pub sh_eval_dur_s: f64,
    /// Length of prediction spans (and their sampling stride).
    pub pred_region_s: f64,
    /// Negative spans must be clear of the competing speaker for this long.
    pub neg_min_gap_s: f64,
    /// Maximum duration of a backchannel segment.
    pub bc_max_dur_s: f64,
    /// Required own-speaker silence before a backchannel, during which the
    /// other speaker must be heard.
    pub bc_pre_silence_s: f64,
    /// Required own-speaker silence after a backchannel.
    pub bc_post_silence_s: f64,
    /// Length of short/long onset spans.
    pub sl_onset_dur_s: f64,
    /// Events must start at least this far into the dialog.
    pub min_context_s: f64,
    /// Trailing region whose frames carry no valid projection label; spans
    /// may not touch it. Keep equal to the labeling horizon.
    pub label_horizon_s: f64,
    /// Base seed for deterministic negative subsampling.
    pub negative_seed: u64,
}

impl Default for EventParams {
    fn default() -> Self {
        EventParams {
            pre_offset_s: 1.0,
            post_onset_s: 1.0,
            sh_eval_delay_s: 0.05,
            sh_eval_dur_s: 0.10,
            pred_region_s: 0.5,
            neg_min_gap_s: 2.0,
            bc_max_dur_s: 1.0,
            bc_pre_silence_s: 1.0,
            bc_post_silence_s: 2.0,
            sl_onset_dur_s: 0.2,
            min_context_s: 3.0,
            label_horizon_s: 2.0,
            negative_seed: 0x5eed_ba5e,
        }
    }
}

/// [`EventParams`] converted to frame counts for one frame rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameParams {
    pub pre_offset: usize,
    pub post_onset: usize,
    pub sh_eval_delay: usize,
    pub sh_eval_dur: usize,
    pub pred_region: usize,
    pub neg_min_gap: usize,
    pub bc_max_dur: usize,
    pub bc_pre_silence: usize,
    pub bc_post_silence: usize,
    pub sl_onset_dur: usize,
    pub min_context: usize,
    pub label_horizon: usize,
    pub negative_seed: u64,
}

impl FrameParams {
    pub fn new(p: &EventParams, rate: FrameRate) -> Result<FrameParams, EventError> {
        let field = |name: &'static str, value: f64| -> Result<usize, EventError> {
            if !(value > 0.0) {
                return Err(EventError::NonPositiveParam { field: name, value });
            }
            rate.whole_frames(value).map_err(|_| EventError::MisalignedParam {
                field: name,
                value,
                fps: rate.fps(),
            })
        };
        Ok(FrameParams {
            pre_offset: field("pre_offset_s", p.pre_offset_s)?,
            post_onset: field("post_onset_s", p.post_onset_s)?,
            sh_eval_delay: field("sh_eval_delay_s", p.sh_eval_delay_s)?,
            sh_eval_dur: field("sh_eval_dur_s", p.sh_eval_dur_s)?,
            pred_region: field("pred_region_s", p.pred_region_s)?,
            neg_min_gap: field("neg_min_gap_s", p.neg_min_gap_s)?,
            bc_max_dur: field("bc_max_dur_s", p.bc_max_dur_s)?,
            bc_pre_silence: field("bc_pre_silence_s", p.bc_pre_silence_s)?,
            bc_post_silence: field("bc_post_silence_s", p.bc_post_silence_s)?,
            sl_onset_dur: field("sl_onset_dur_s", p.sl_onset_dur_s)?,
            min_context: field("min_context_s", p.min_context_s)?,
            label_horizon: field("label_horizon_s", p.label_horizon_s)?,
            negative_seed: p.negative_seed,
        })
    }
}

/// One labeled evaluation span. `context_speaker` is the speaker holding
/// the floor as the event begins; for backchannel prediction the
/// prospective backchanneler is the *other* speaker, and for short/long
/// the onset speaker is likewise the other one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInstance {
    pub task: Task,
    pub label: EventLabel,
    #[serde(rename = "eval_start_frame")]
    pub eval_start: usize,
    #[serde(rename = "eval_end_frame")]
    pub eval_end: usize,
    pub context_speaker: Speaker,
}

impl EventInstance {
    pub fn eval_span(&self) -> Range<usize> {
        self.eval_start..self.eval_end
    }
}

/// A detected backchannel: one short, isolated segment by `speaker`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BcSegment {
    pub speaker: Speaker,
    pub start: usize,
    pub end: usize,
}

/// Why candidate events were dropped, by reason.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SkipCounters {
    /// Pre-silence window empty or contested by both speakers.
    pub sh_pre_window_unqualified: u32,
    /// Post-silence window empty or contested.
    pub sh_post_window_unqualified: u32,
    /// Silence too short to contain the shift/hold evaluation span.
    pub sh_eval_outside_silence: u32,
    /// Span would start before the minimum dialog context.
    pub before_min_context: u32,
    /// Span would touch the unlabeled trailing region.
    pub overlaps_masked_tail: u32,
    /// Span would extend past a dialog edge.
    pub span_out_of_bounds: u32,
    /// Turn-final segment shorter than the prediction span.
    pub spred_segment_too_short: u32,
    /// Negative candidates ran out before matching the positive count.
    pub negative_shortfall: u32,
}

impl SkipCounters {
    pub fn total(&self) -> u32 {
        self.sh_pre_window_unqualified
            + self.sh_post_window_unqualified
            + self.sh_eval_outside_silence
            + self.before_min_context
            + self.overlaps_masked_tail
            + self.span_out_of_bounds
            + self.spred_segment_too_short
            + self.negative_shortfall
    }
}

/// All events extracted from one dialog, grouped by task.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct EventSet {
    pub shift_hold: Vec<EventInstance>,
    pub shift_pred: Vec<EventInstance>,
    pub bc_pred: Vec<EventInstance>,
    pub short_long: Vec<EventInstance>,
    pub skips: SkipCounters,
}

impl EventSet {
    pub fn task(&self, task: Task) -> &[EventInstance] {
        match task {
            Task::ShiftHold => &self.shift_hold,
            Task::ShiftPred => &self.shift_pred,
            Task::BackchannelPred => &self.bc_pred,
            Task::ShortLong => &self.short_long,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventInstance> {
        self.shift_hold
            .iter()
            .chain(&self.shift_pred)
            .chain(&self.bc_pred)
            .chain(&self.short_long)
    }

    pub fn len(&self) -> usize {
        self.shift_hold.len() + self.shift_pred.len() + self.bc_pred.len() + self.short_long.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// ---------------------------------------------------------------------------
// Deterministic negative-sampling protocol, shared with `reference`.

const SPRED_SAMPLING_SALT: u64 = 0x7370_7265_645f_6e67;
const BCPRED_SAMPLING_SALT: u64 = 0x6263_7072_6564_5f6e;

fn fnv1a(bits: &[bool]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bits {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Sampling seed for one dialog: a salt-separated mix of the base seed and
/// a content hash that is symmetric under speaker exchange, so swapping the
/// two tracks leaves every sampling decision intact.
pub fn negative_sampling_seed(tl: &VaTimeline, base: u64, salt: u64) -> u64 {
    let content = fnv1a(tl.track(Speaker::A)) ^ fnv1a(tl.track(Speaker::B));
    splitmix64(base ^ content ^ salt)
}

/// Choose `want` of `available` candidate indices, in ascending order.
pub fn sample_candidate_indices(seed: u64, available: usize, want: usize) -> Vec<usize> {
    let take = want.min(available);
    if take == 0 {
        return Vec::new();
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, available, take).into_vec();
    chosen.sort_unstable();
    chosen
}

// ---------------------------------------------------------------------------
// Optimized extraction.

#[derive(Debug, Clone)]
struct QualifiedSilence {
    silence: Range<usize>,
    pre_speaker: Speaker,
    post_speaker: Speaker,
    /// First active frame of the post-silence speaker.
    post_onset: usize,
    eval: Range<usize>,
}

impl QualifiedSilence {
    fn is_shift(&self) -> bool {
        self.pre_speaker != self.post_speaker
    }
}

enum Presence {
    None,
    One(Speaker),
    Both,
}

fn window_presence(tl: &VaTimeline, range: Range<usize>) -> Presence {
    let a = tl.count_active(Speaker::A, range.clone()) > 0;
    let b = tl.count_active(Speaker::B, range) > 0;
    match (a, b) {
        (false, false) => Presence::None,
        (true, false) => Presence::One(Speaker::A),
        (false, true) => Presence::One(Speaker::B),
        (true, true) => Presence::Both,
    }
}

/// Mutual silences that pass every shift/hold condition, with the
/// surrounding-speaker metadata the other extractors build on.
fn qualified_silences(
    tl: &VaTimeline,
    fp: &FrameParams,
    skips: &mut SkipCounters,
) -> Vec<QualifiedSilence> {
    let len = tl.len();
    let mut out = Vec::new();
    for silence in mutual_silences(tl) {
        let pre = silence.start.saturating_sub(fp.pre_offset)..silence.start;
        let pre_speaker = match window_presence(tl, pre) {
            Presence::One(s) => s,
            _ => {
                skips.sh_pre_window_unqualified += 1;
                continue;
            }
        };
        let post = silence.end..(silence.end + fp.post_onset).min(len);
        let post_speaker = match window_presence(tl, post.clone()) {
            Presence::One(s) => s,
            _ => {
                skips.sh_post_window_unqualified += 1;
                continue;
            }
        };
        let eval = silence.start + fp.sh_eval_delay
            ..silence.start + fp.sh_eval_delay + fp.sh_eval_dur;
        if eval.end > silence.end {
            skips.sh_eval_outside_silence += 1;
            continue;
        }
        if eval.start < fp.min_context {
            skips.before_min_context += 1;
            continue;
        }
        if eval.end + fp.label_horizon > len {
            skips.overlaps_masked_tail += 1;
            continue;
        }
        let post_onset = post
            .clone()
            .find(|&t| tl.active(post_speaker, t))
            .expect("post window contains activity of its unique speaker");
        out.push(QualifiedSilence {
            silence,
            pre_speaker,
            post_speaker,
            post_onset,
            eval,
        });
    }
    out
}

fn shift_hold_instances(qualified: &[QualifiedSilence]) -> Vec<EventInstance> {
    qualified
        .iter()
        .map(|qs| EventInstance {
            task: Task::ShiftHold,
            label: if qs.is_shift() {
                EventLabel::Shift
            } else {
                EventLabel::Hold
            },
            eval_start: qs.eval.start,
            eval_end: qs.eval.end,
            context_speaker: qs.pre_speaker,
        })
        .collect()
}

/// Start of the maximal active run of `s` that ends exactly at `end`.
fn run_start_ending_at(tl: &VaTimeline, s: Speaker, end: usize) -> usize {
    let mut start = end;
    while start > 0 && tl.active(s, start - 1) {
        start -= 1;
    }
    start
}

/// Negative candidates for shift prediction: spans on a `pred_region`
/// stride where one speaker is active through the span *and* the following
/// gap, with the other speaker absent from the same stretch.
fn spred_negative_candidates(tl: &VaTimeline, fp: &FrameParams) -> Vec<(usize, Speaker)> {
    let len = tl.len();
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = start + fp.pred_region;
        let probe_end = end + fp.neg_min_gap;
        if probe_end > len {
            break;
        }
        if start >= fp.min_context && end + fp.label_horizon <= len {
            let span = start..probe_end;
            for s in Speaker::BOTH {
                if tl.count_active(s, span.clone()) == span.len()
                    && tl.count_active(s.other(), span.clone()) == 0
                {
                    out.push((start, s));
                    break;
                }
            }
        }
        start += fp.pred_region;
    }
    out
}

fn shift_pred_instances(
    tl: &VaTimeline,
    fp: &FrameParams,
    qualified: &[QualifiedSilence],
    skips: &mut SkipCounters,
) -> Vec<EventInstance> {
    let len = tl.len();
    let mut out = Vec::new();
    for qs in qualified.iter().filter(|qs| qs.is_shift()) {
        let seg_end = qs.silence.start;
        let seg_start = run_start_ending_at(tl, qs.pre_speaker, seg_end);
        if seg_end - seg_start < fp.pred_region {
            skips.spred_segment_too_short += 1;
            continue;
        }
        let start = seg_end - fp.pred_region;
        if start < fp.min_context {
            skips.before_min_context += 1;
            continue;
        }
        if seg_end + fp.label_horizon > len {
            skips.overlaps_masked_tail += 1;
            continue;
        }
        out.push(EventInstance {
            task: Task::ShiftPred,
            label: EventLabel::Positive,
            eval_start: start,
            eval_end: seg_end,
            context_speaker: qs.pre_speaker,
        });
    }

    let positives = out.len();
    let candidates = spred_negative_candidates(tl, fp);
    if candidates.len() < positives {
        skips.negative_shortfall += (positives - candidates.len()) as u32;
    }
    let seed = negative_sampling_seed(tl, fp.negative_seed, SPRED_SAMPLING_SALT);
    for i in sample_candidate_indices(seed, candidates.len(), positives) {
        let (start, ctx) = candidates[i];
        out.push(EventInstance {
            task: Task::ShiftPred,
            label: EventLabel::Negative,
            eval_start: start,
            eval_end: start + fp.pred_region,
            context_speaker: ctx,
        });
    }
    out
}

fn backchannel_segments(tl: &VaTimeline, fp: &FrameParams) -> Vec<BcSegment> {
    let len = tl.len();
    let mut out = Vec::new();
    for s in Speaker::BOTH {
        for seg in tl.segments(s) {
            if seg.end - seg.start > fp.bc_max_dur {
                continue;
            }
            let before = seg.start.saturating_sub(fp.bc_pre_silence)..seg.start;
            let after = seg.end..(seg.end + fp.bc_post_silence).min(len);
            let own_clear = tl.count_active(s, before.clone()) == 0
                && tl.count_active(s, after) == 0;
            let other_heard = tl.count_active(s.other(), before) > 0;
            if own_clear && other_heard {
                out.push(BcSegment {
                    speaker: s,
                    start: seg.start,
                    end: seg.end,
                });
            }
        }
    }
    // Segments arrive grouped by speaker; report them in time order.
    out.sort_by_key(|bc| (bc.start, bc.speaker.index()));
    out
}

/// Negative candidates for backchannel prediction: strided spans (speech or
/// silence) whose most recent speaker is unambiguous and whose prospective
/// backchanneler stays silent through the span and the following gap.
fn bcpred_negative_candidates(tl: &VaTimeline, fp: &FrameParams) -> Vec<(usize, Speaker)> {
    let len = tl.len();
    // last_any[e] = most recent frame before e where anyone was active.
    let mut last_any = vec![None; len + 1];
    let mut last = None;
    for (t, slot) in last_any.iter_mut().enumerate().take(len) {
        *slot = last;
        if tl.any_active(t..t + 1) {
            last = Some(t);
        }
    }
    last_any[len] = last;

    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = start + fp.pred_region;
        let probe_end = end + fp.neg_min_gap;
        if probe_end > len {
            break;
        }
        if start >= fp.min_context && end + fp.label_horizon <= len {
            if let Some(t) = last_any[end] {
                let a = tl.active(Speaker::A, t);
                let b = tl.active(Speaker::B, t);
                if a != b {
                    let ctx = if a { Speaker::A } else { Speaker::B };
                    if tl.count_active(ctx.other(), start..probe_end) == 0 {
                        out.push((start, ctx));
                    }
                }
            }
        }
        start += fp.pred_region;
    }
    out
}

fn bc_pred_instances(
    tl: &VaTimeline,
    fp: &FrameParams,
    bcs: &[BcSegment],
    skips: &mut SkipCounters,
) -> Vec<EventInstance> {
    let len = tl.len();
    let mut out = Vec::new();
    for bc in bcs {
        if bc.start < fp.pred_region {
            skips.span_out_of_bounds += 1;
            continue;
        }
        let start = bc.start - fp.pred_region;
        if start < fp.min_context {
            skips.before_min_context += 1;
            continue;
        }
        if bc.start + fp.label_horizon > len {
            skips.overlaps_masked_tail += 1;
            continue;
        }
        out.push(EventInstance {
            task: Task::BackchannelPred,
            label: EventLabel::Positive,
            eval_start: start,
            eval_end: bc.start,
            context_speaker: bc.speaker.other(),
        });
    }

    let positives = out.len();
    let candidates = bcpred_negative_candidates(tl, fp);
    if candidates.len() < positives {
        skips.negative_shortfall += (positives - candidates.len()) as u32;
    }
    let seed = negative_sampling_seed(tl, fp.negative_seed, BCPRED_SAMPLING_SALT);
    for i in sample_candidate_indices(seed, candidates.len(), positives) {
        let (start, ctx) = candidates[i];
        out.push(EventInstance {
            task: Task::BackchannelPred,
            label: EventLabel::Negative,
            eval_start: start,
            eval_end: start + fp.pred_region,
            context_speaker: ctx,
        });
    }
    out
}

fn short_long_instances(
    tl: &VaTimeline,
    fp: &FrameParams,
    bcs: &[BcSegment],
    qualified: &[QualifiedSilence],
    skips: &mut SkipCounters,
) -> Vec<EventInstance> {
    let len = tl.len();
    let mut out = Vec::new();
    let onset = |start: usize, onset_speaker: Speaker, label: EventLabel,
                 skips: &mut SkipCounters| {
        let end = start + fp.sl_onset_dur;
        if start < fp.min_context {
            skips.before_min_context += 1;
            return None;
        }
        if end + fp.label_horizon > len {
            skips.overlaps_masked_tail += 1;
            return None;
        }
        Some(EventInstance {
            task: Task::ShortLong,
            label,
            eval_start: start,
            eval_end: end,
            context_speaker: onset_speaker.other(),
        })
    };
    for bc in bcs {
        if let Some(inst) = onset(bc.start, bc.speaker, EventLabel::Short, skips) {
            out.push(inst);
        }
    }
    for qs in qualified.iter().filter(|qs| qs.is_shift()) {
        if let Some(inst) = onset(qs.post_onset, qs.post_speaker, EventLabel::Long, skips) {
            out.push(inst);
        }
    }
    out
}

/// Log dialogs where a backchannel segment doubles as the turn-initial
/// segment of a qualified silence — a tension between the two definitions
/// worth surfacing but not failing on.
fn warn_bc_turn_initial_overlap(bcs: &[BcSegment], qualified: &[QualifiedSilence]) {
    for qs in qualified {
        for bc in bcs {
            if bc.speaker == qs.post_speaker && bc.start == qs.post_onset {
                log::warn!(
                    "backchannel at frames {}..{} also begins the turn after the \
                     silence at {}..{}",
                    bc.start,
                    bc.end,
                    qs.silence.start,
                    qs.silence.end,
                );
            }
        }
    }
}

/// Shift/hold events: one instance per mutual silence with a unique speaker
/// on each side, labeled by whether the floor changed hands.
pub fn extract_shift_hold(
    tl: &VaTimeline,
    p: &EventParams,
) -> Result<Vec<EventInstance>, EventError> {
    let fp = FrameParams::new(p, tl.rate())?;
    let mut skips = SkipCounters::default();
    Ok(shift_hold_instances(&qualified_silences(tl, &fp, &mut skips)))
}

/// Shift-prediction events: turn-final spans before shifts (positive) plus
/// matched spans deep inside uninterrupted speech (negative).
pub fn extract_shift_pred(
    tl: &VaTimeline,
    p: &EventParams,
) -> Result<Vec<EventInstance>, EventError> {
    let fp = FrameParams::new(p, tl.rate())?;
    let mut skips = SkipCounters::default();
    let qualified = qualified_silences(tl, &fp, &mut skips);
    Ok(shift_pred_instances(tl, &fp, &qualified, &mut skips))
}

/// Short, isolated listener responses: segments no longer than
/// `bc_max_dur_s`, clear of the same speaker's activity on both sides, and
/// preceded by the other speaker's voice.
pub fn extract_backchannels(
    tl: &VaTimeline,
    p: &EventParams,
) -> Result<Vec<BcSegment>, EventError> {
    let fp = FrameParams::new(p, tl.rate())?;
    Ok(backchannel_segments(tl, &fp))
}

/// Backchannel-prediction events: spans just before a backchannel
/// (positive) plus matched spans far from any backchannel (negative).
pub fn extract_bc_pred(
    tl: &VaTimeline,
    p: &EventParams,
) -> Result<Vec<EventInstance>, EventError> {
    let fp = FrameParams::new(p, tl.rate())?;
    let mut skips = SkipCounters::default();
    let bcs = backchannel_segments(tl, &fp);
    Ok(bc_pred_instances(tl, &fp, &bcs, &mut skips))
}

/// Short/long events: onsets of backchannels (short) and of turn-initial
/// speech after shifts (long).
pub fn extract_short_long(
    tl: &VaTimeline,
    p: &EventParams,
) -> Result<Vec<EventInstance>, EventError> {
    let fp = FrameParams::new(p, tl.rate())?;
    let mut skips = SkipCounters::default();
    let qualified = qualified_silences(tl, &fp, &mut skips);
    let bcs = backchannel_segments(tl, &fp);
    Ok(short_long_instances(tl, &fp, &bcs, &qualified, &mut skips))
}

/// Extract all four event families plus the skip accounting in one pass.
pub fn extract_events(tl: &VaTimeline, p: &EventParams) -> Result<EventSet, EventError> {
    let fp = FrameParams::new(p, tl.rate())?;
    let mut skips = SkipCounters::default();
    let qualified = qualified_silences(tl, &fp, &mut skips);
    let bcs = backchannel_segments(tl, &fp);
    warn_bc_turn_initial_overlap(&bcs, &qualified);
    let shift_hold = shift_hold_instances(&qualified);
    let shift_pred = shift_pred_instances(tl, &fp, &qualified, &mut skips);
    let bc_pred = bc_pred_instances(tl, &fp, &bcs, &mut skips);
    let short_long = short_long_instances(tl, &fp, &bcs, &qualified, &mut skips);
    Ok(EventSet {
        shift_hold,
        shift_pred,
        bc_pred,
        short_long,
        skips,
    })
}

pub mod reference {
    //! A deliberately naive twin of the event extractor.
    //!
    //! Every window condition is re-derived by scanning frames one at a
    //! time — no prefix sums, no segment lists. The optimized extractor
    //! must agree with this module exactly (including skip counters); the
    //! randomized equivalence test drives both over many timelines. The
    //! negative-sampling protocol ([`super::negative_sampling_seed`] and
    //! [`super::sample_candidate_indices`]) is shared: it *is* the
    //! specification of sampling, not an optimization.

    use super::*;

    fn active(tl: &VaTimeline, s: Speaker, t: usize) -> bool {
        tl.track(s)[t]
    }

    fn naive_mutual_silences(tl: &VaTimeline) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut run_start = None;
        for t in 0..tl.len() {
            let silent = !active(tl, Speaker::A, t) && !active(tl, Speaker::B, t);
            match (silent, run_start) {
                (true, None) => run_start = Some(t),
                (false, Some(s)) => {
                    out.push(s..t);
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            out.push(s..tl.len());
        }
        out
    }

    fn presence(tl: &VaTimeline, range: Range<usize>) -> Presence {
        let mut a = false;
        let mut b = false;
        for t in range {
            a |= active(tl, Speaker::A, t);
            b |= active(tl, Speaker::B, t);
        }
        match (a, b) {
            (false, false) => Presence::None,
            (true, false) => Presence::One(Speaker::A),
            (false, true) => Presence::One(Speaker::B),
            (true, true) => Presence::Both,
        }
    }

    fn count(tl: &VaTimeline, s: Speaker, range: Range<usize>) -> usize {
        range.filter(|&t| active(tl, s, t)).count()
    }

    fn qualified_silences(
        tl: &VaTimeline,
        fp: &FrameParams,
        skips: &mut SkipCounters,
    ) -> Vec<QualifiedSilence> {
        let len = tl.len();
        let mut out = Vec::new();
        for silence in naive_mutual_silences(tl) {
            let pre = silence.start.saturating_sub(fp.pre_offset)..silence.start;
            let pre_speaker = match presence(tl, pre) {
                Presence::One(s) => s,
                _ => {
                    skips.sh_pre_window_unqualified += 1;
                    continue;
                }
            };
            let post = silence.end..(silence.end + fp.post_onset).min(len);
            let post_speaker = match presence(tl, post.clone()) {
                Presence::One(s) => s,
                _ => {
                    skips.sh_post_window_unqualified += 1;
                    continue;
                }
            };
            let eval = silence.start + fp.sh_eval_delay
                ..silence.start + fp.sh_eval_delay + fp.sh_eval_dur;
            if eval.end > silence.end {
                skips.sh_eval_outside_silence += 1;
                continue;
            }
            if eval.start < fp.min_context {
                skips.before_min_context += 1;
                continue;
            }
            if eval.end + fp.label_horizon > len {
                skips.overlaps_masked_tail += 1;
                continue;
            }
            let mut post_onset = silence.end;
            while !active(tl, post_speaker, post_onset) {
                post_onset += 1;
            }
            out.push(QualifiedSilence {
                silence,
                pre_speaker,
                post_speaker,
                post_onset,
                eval,
            });
        }
        out
    }

    fn shift_pred_instances(
        tl: &VaTimeline,
        fp: &FrameParams,
        qualified: &[QualifiedSilence],
        skips: &mut SkipCounters,
    ) -> Vec<EventInstance> {
        let len = tl.len();
        let mut out = Vec::new();
        for qs in qualified.iter().filter(|qs| qs.is_shift()) {
            let seg_end = qs.silence.start;
            let mut seg_start = seg_end;
            while seg_start > 0 && active(tl, qs.pre_speaker, seg_start - 1) {
                seg_start -= 1;
            }
            if seg_end - seg_start < fp.pred_region {
                skips.spred_segment_too_short += 1;
                continue;
            }
            let start = seg_end - fp.pred_region;
            if start < fp.min_context {
                skips.before_min_context += 1;
                continue;
            }
            if seg_end + fp.label_horizon > len {
                skips.overlaps_masked_tail += 1;
                continue;
            }
            out.push(EventInstance {
                task: Task::ShiftPred,
                label: EventLabel::Positive,
                eval_start: start,
                eval_end: seg_end,
                context_speaker: qs.pre_speaker,
            });
        }

        let mut candidates = Vec::new();
        let mut start = 0;
        loop {
            let end = start + fp.pred_region;
            let probe_end = end + fp.neg_min_gap;
            if probe_end > len {
                break;
            }
            if start >= fp.min_context && end + fp.label_horizon <= len {
                for s in Speaker::BOTH {
                    if count(tl, s, start..probe_end) == probe_end - start
                        && count(tl, s.other(), start..probe_end) == 0
                    {
                        candidates.push((start, s));
                        break;
                    }
                }
            }
            start += fp.pred_region;
        }
        let positives = out.len();
        if candidates.len() < positives {
            skips.negative_shortfall += (positives - candidates.len()) as u32;
        }
        let seed = negative_sampling_seed(tl, fp.negative_seed, SPRED_SAMPLING_SALT);
        for i in sample_candidate_indices(seed, candidates.len(), positives) {
            let (start, ctx) = candidates[i];
            out.push(EventInstance {
                task: Task::ShiftPred,
                label: EventLabel::Negative,
                eval_start: start,
                eval_end: start + fp.pred_region,
                context_speaker: ctx,
            });
        }
        out
    }

    fn backchannel_segments(tl: &VaTimeline, fp: &FrameParams) -> Vec<BcSegment> {
        let len = tl.len();
        let mut out = Vec::new();
        for s in Speaker::BOTH {
            let mut t = 0;
            while t < len {
                if !active(tl, s, t) {
                    t += 1;
                    continue;
                }
                let start = t;
                while t < len && active(tl, s, t) {
                    t += 1;
                }
                let end = t;
                if end - start > fp.bc_max_dur {
                    continue;
                }
                let before = start.saturating_sub(fp.bc_pre_silence)..start;
                let after = end..(end + fp.bc_post_silence).min(len);
                if count(tl, s, before.clone()) == 0
                    && count(tl, s, after) == 0
                    && count(tl, s.other(), before) > 0
                {
                    out.push(BcSegment {
                        speaker: s,
                        start,
                        end,
                    });
                }
            }
        }
        out.sort_by_key(|bc| (bc.start, bc.speaker.index()));
        out
    }

    fn bc_pred_instances(
        tl: &VaTimeline,
        fp: &FrameParams,
        bcs: &[BcSegment],
        skips: &mut SkipCounters,
    ) -> Vec<EventInstance> {
        let len = tl.len();
        let mut out = Vec::new();
        for bc in bcs {
            if bc.start < fp.pred_region {
                skips.span_out_of_bounds += 1;
                continue;
            }
            let start = bc.start - fp.pred_region;
            if start < fp.min_context {
                skips.before_min_context += 1;
                continue;
            }
            if bc.start + fp.label_horizon > len {
                skips.overlaps_masked_tail += 1;
                continue;
            }
            out.push(EventInstance {
                task: Task::BackchannelPred,
                label: EventLabel::Positive,
                eval_start: start,
                eval_end: bc.start,
                context_speaker: bc.speaker.other(),
            });
        }

        let mut candidates = Vec::new();
        let mut start = 0;
        loop {
            let end = start + fp.pred_region;
            let probe_end = end + fp.neg_min_gap;
            if probe_end > len {
                break;
            }
            if start >= fp.min_context && end + fp.label_horizon <= len {
                let mut last = None;
                for t in (0..end).rev() {
                    if active(tl, Speaker::A, t) || active(tl, Speaker::B, t) {
                        last = Some(t);
                        break;
                    }
                }
                if let Some(t) = last {
                    let a = active(tl, Speaker::A, t);
                    let b = active(tl, Speaker::B, t);
                    if a != b {
                        let ctx = if a { Speaker::A } else { Speaker::B };
                        if count(tl, ctx.other(), start..probe_end) == 0 {
                            candidates.push((start, ctx));
                        }
                    }
                }
            }
            start += fp.pred_region;
        }
        let positives = out.len();
        if candidates.len() < positives {
            skips.negative_shortfall += (positives - candidates.len()) as u32;
        }
        let seed = negative_sampling_seed(tl, fp.negative_seed, BCPRED_SAMPLING_SALT);
        for i in sample_candidate_indices(seed, candidates.len(), positives) {
            let (start, ctx) = candidates[i];
            out.push(EventInstance {
                task: Task::BackchannelPred,
                label: EventLabel::Negative,
                eval_start: start,
                eval_end: start + fp.pred_region,
                context_speaker: ctx,
            });
        }
        out
    }

    /// Naive counterpart of [`super::extract_events`].
    pub fn extract_events(tl: &VaTimeline, p: &EventParams) -> Result<EventSet, EventError> {
        let fp = FrameParams::new(p, tl.rate())?;
        let mut skips = SkipCounters::default();
        let qualified = qualified_silences(tl, &fp, &mut skips);
        let bcs = backchannel_segments(tl, &fp);
        let shift_hold = shift_hold_instances(&qualified);
        let shift_pred = shift_pred_instances(tl, &fp, &qualified, &mut skips);
        let bc_pred = bc_pred_instances(tl, &fp, &bcs, &mut skips);
        let short_long = short_long_instances(tl, &fp, &bcs, &qualified, &mut skips);
        Ok(EventSet {
            shift_hold,
            shift_pred,
            bc_pred,
            short_long,
            skips,
        })
    }
}
