//! Seeded synthetic two-party dialog generator.
//!
//! Dialogs are built in two passes. The first lays down a turn/silence
//! skeleton: alternating turns with lognormal lengths, lognormal gaps, a
//! coin flip per silence deciding whether the floor changes hands, and
//! optional within-turn pauses. The second pass inserts listener
//! backchannels, placed so that every one of them satisfies the detection
//! conditions (short, isolated, against audible other-speaker activity) by
//! construction, and so that none of them contaminates the single-speaker
//! windows around silences.
//!
//! Backchannel timing doubles as a learnable cue: on turns that end in a
//! floor change the backchannel sits late in the turn (inside the
//! recent-context window at the following silence), while on held turns it
//! sits early enough to have scrolled out of that window. A count-based
//! predictor can therefore beat the base rate on shift/hold.

use crate::corpus::Dialog;
use crate::events::splitmix64;
use crate::timeline::{Speaker, VaSegment};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Clearance between a backchannel (or pause) edge and the nearest
/// silence edge, slightly over the 1 s single-speaker window it protects.
const EDGE_CLEARANCE_S: f64 = 1.02;
/// Gap required between a backchannel's end and the backchanneler's own
/// next turn onset, slightly over the 2 s isolation window.
const BC_SHIFT_ONSET_CLEARANCE_S: f64 = 2.25;
/// On held turns the backchannel ends at least this long before the turn
/// does, which both isolates it and pushes it out of the recent-context
/// window at the following silence.
const BC_HOLD_TAIL_CLEARANCE_S: f64 = 2.1;
/// Clearance after a previous backchannel by the same listener.
const BC_AFTER_BC_CLEARANCE_S: f64 = 2.02;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("synthesis parameter {field} invalid: {reason}")]
    InvalidParam {
        field: &'static str,
        reason: String,
    },
}

/// Lognormal duration family: `mu`/`sigma` parameterize the underlying
/// normal (the distribution of the logarithm, in log-seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalSpec {
    /// Draw with the normal deviate clamped to ±3σ; desk-scale corpora
    /// should not contain million-second turns.
    fn draw(&self, rng: &mut StdRng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu + self.sigma * z.clamp(-3.0, 3.0)).exp()
    }

    fn check(&self, field: &'static str) -> Result<(), SynthError> {
        if !self.mu.is_finite() || !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(SynthError::InvalidParam {
                field,
                reason: format!("mu {} sigma {}", self.mu, self.sigma),
            });
        }
        Ok(())
    }
}

/// Uniform duration family over `[lo, hi]` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSpec {
    pub lo: f64,
    pub hi: f64,
}

impl UniformSpec {
    fn draw(&self, rng: &mut StdRng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..self.hi)
        } else {
            self.lo
        }
    }

    fn check(&self, field: &'static str) -> Result<(), SynthError> {
        if !(self.lo > 0.0) || self.hi < self.lo || !self.hi.is_finite() {
            return Err(SynthError::InvalidParam {
                field,
                reason: format!("lo {} hi {}", self.lo, self.hi),
            });
        }
        Ok(())
    }
}

/// Corpus-level generation controls. Generation is fully deterministic in
/// `seed`; each dialog consumes an independent seeded substream, so corpora
/// agree dialog-by-dialog across different `n_dialogs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub seed: u64,
    pub n_dialogs: usize,
    pub dialog_duration_s: f64,
    pub turn_duration: LogNormalSpec,
    pub gap_duration: LogNormalSpec,
    /// Within-turn pause lengths (the speaker resumes afterwards).
    pub pause_duration: LogNormalSpec,
    pub p_pause_within_turn: f64,
    pub p_shift_after_silence: f64,
    pub p_backchannel_per_turn: f64,
    pub bc_duration: UniformSpec,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            n_dialogs: 20,
            dialog_duration_s: 60.0,
            turn_duration: LogNormalSpec {
                mu: 1.0986,
                sigma: 0.35,
            },
            gap_duration: LogNormalSpec {
                mu: -0.9163,
                sigma: 0.25,
            },
            pause_duration: LogNormalSpec {
                mu: -1.204,
                sigma: 0.25,
            },
            p_pause_within_turn: 0.2,
            p_shift_after_silence: 0.5,
            p_backchannel_per_turn: 0.3,
            bc_duration: UniformSpec { lo: 0.1, hi: 0.8 },
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (field, p) in [
            ("p_pause_within_turn", self.p_pause_within_turn),
            ("p_shift_after_silence", self.p_shift_after_silence),
            ("p_backchannel_per_turn", self.p_backchannel_per_turn),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidParam {
                    field,
                    reason: format!("probability {p} outside [0, 1]"),
                });
            }
        }
        if !(self.dialog_duration_s > 0.0) || !self.dialog_duration_s.is_finite() {
            return Err(SynthError::InvalidParam {
                field: "dialog_duration_s",
                reason: format!("{}", self.dialog_duration_s),
            });
        }
        self.turn_duration.check("turn_duration")?;
        self.gap_duration.check("gap_duration")?;
        self.pause_duration.check("pause_duration")?;
        self.bc_duration.check("bc_duration")?;
        if self.bc_duration.hi > 1.0 {
            log::warn!(
                "bc_duration.hi = {} exceeds 1s; such backchannels will not \
                 register under default detection parameters",
                self.bc_duration.hi
            );
        }
        Ok(())
    }
}

fn round_ms(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

struct Turn {
    speaker: Speaker,
    start: f64,
    end: f64,
    pause: Option<(f64, f64)>,
    gap_after: Option<f64>,
    shift_after: bool,
}

#[derive(Default)]
struct SkipStats {
    pauses: u32,
    backchannels: u32,
}

fn generate_dialog(p: &SynthParams, index: usize, stats: &mut SkipStats) -> Dialog {
    let mut rng = StdRng::seed_from_u64(splitmix64(p.seed ^ splitmix64(index as u64 + 1)));
    let duration = p.dialog_duration_s;

    // Pass 1: the turn/silence skeleton.
    let mut turns: Vec<Turn> = Vec::new();
    let mut speaker = if rng.gen_bool(0.5) {
        Speaker::A
    } else {
        Speaker::B
    };
    let mut t = 0.0;
    while t < duration {
        let len = p.turn_duration.draw(&mut rng);
        let end = round_ms((t + len).min(duration));
        if end - t < 0.02 {
            break; // degenerate sliver at the dialog edge
        }
        let mut turn = Turn {
            speaker,
            start: t,
            end,
            pause: None,
            gap_after: None,
            shift_after: false,
        };
        if p.p_pause_within_turn > 0.0 && rng.gen_bool(p.p_pause_within_turn) {
            let plen = round_ms(p.pause_duration.draw(&mut rng)).max(0.01);
            let lo = turn.start + EDGE_CLEARANCE_S;
            let hi = turn.end - EDGE_CLEARANCE_S - plen;
            if hi > lo {
                let ps = round_ms(rng.gen_range(lo..hi));
                turn.pause = Some((ps, round_ms(ps + plen)));
            } else {
                stats.pauses += 1;
            }
        }
        if end >= duration {
            turns.push(turn);
            break;
        }
        let shift = p.p_shift_after_silence > 0.0 && rng.gen_bool(p.p_shift_after_silence);
        let gap = round_ms(p.gap_duration.draw(&mut rng)).max(0.01);
        turn.gap_after = Some(gap);
        turn.shift_after = shift;
        turns.push(turn);
        if shift {
            speaker = speaker.other();
        }
        t = round_ms(end + gap);
    }

    // Pass 2: turn bodies plus constructively valid backchannels.
    let mut segments: Vec<VaSegment> = Vec::new();
    let mut last_va_end = [f64::NEG_INFINITY; 2];
    let mut last_was_bc = [false; 2];
    for turn in &turns {
        let s = turn.speaker;
        match turn.pause {
            Some((ps, pe)) => {
                segments.push(VaSegment::new(s, turn.start, ps));
                segments.push(VaSegment::new(s, pe, turn.end));
            }
            None => segments.push(VaSegment::new(s, turn.start, turn.end)),
        }
        last_va_end[s.index()] = turn.end;
        last_was_bc[s.index()] = false;

        if p.p_backchannel_per_turn > 0.0 && rng.gen_bool(p.p_backchannel_per_turn) {
            if turn.pause.is_some() {
                // A pause and a backchannel in one turn would have to
                // share clearance budgets; keep each turn simple.
                stats.backchannels += 1;
                continue;
            }
            let o = s.other();
            let d = round_ms(p.bc_duration.draw(&mut rng));
            let pre_clear = if last_was_bc[o.index()] {
                BC_AFTER_BC_CLEARANCE_S
            } else {
                EDGE_CLEARANCE_S
            };
            let bs_min = (turn.start + EDGE_CLEARANCE_S).max(last_va_end[o.index()] + pre_clear);
            let be_max = if turn.shift_after {
                // The listener takes the floor next: late placement keeps
                // the backchannel inside the recent-context window at the
                // silence while clearing their own upcoming onset.
                let gap = turn.gap_after.unwrap_or(0.0);
                (turn.end - EDGE_CLEARANCE_S)
                    .min(turn.end + gap - BC_SHIFT_ONSET_CLEARANCE_S)
            } else {
                turn.end - BC_HOLD_TAIL_CLEARANCE_S
            };
            if bs_min + d > be_max {
                stats.backchannels += 1;
                continue;
            }
            let (bs, be) = if turn.shift_after {
                (round_ms(be_max - d), round_ms(be_max))
            } else {
                (round_ms(bs_min), round_ms(bs_min + d))
            };
            segments.push(VaSegment::new(o, bs, be));
            last_va_end[o.index()] = be;
            last_was_bc[o.index()] = true;
        }
    }

    let mut dialog = Dialog {
        id: format!("synth-{index:04}"),
        duration_s: duration,
        segments,
    };
    dialog.normalize();
    dialog
}

/// Generate the whole corpus. Infeasible pause/backchannel placements are
/// skipped with an aggregate warning; everything else is deterministic in
/// the seed.
pub fn synth_corpus(p: &SynthParams) -> Result<Vec<Dialog>, SynthError> {
    p.validate()?;
    let mut stats = SkipStats::default();
    let dialogs = (0..p.n_dialogs)
        .map(|i| generate_dialog(p, i, &mut stats))
        .collect();
    if stats.pauses > 0 || stats.backchannels > 0 {
        log::warn!(
            "synthesis skipped {} pauses and {} backchannels as infeasible",
            stats.pauses,
            stats.backchannels
        );
    }
    Ok(dialogs)
}
