//! Shared fixtures for the pipeline benchmarks: one synthetic corpus built
//! once with fixed parameters, so every benchmark measures the same data.

use vap_core::synth::{LogNormalSpec, UniformSpec};
use vap_core::{synth_corpus, Dialog, FrameRate, SynthParams, VaTimeline};

/// Frame clock used throughout the benchmarks.
pub fn rate() -> FrameRate {
    FrameRate::new(100).unwrap()
}

/// A small, fixed corpus of 60-second dialogs.
pub fn corpus(n_dialogs: usize) -> Vec<Dialog> {
    synth_corpus(&SynthParams {
        seed: 0xbe7c,
        n_dialogs,
        dialog_duration_s: 60.0,
        turn_duration: LogNormalSpec {
            mu: 5.0_f64.ln(),
            sigma: 0.25,
        },
        gap_duration: LogNormalSpec {
            mu: 0.5_f64.ln(),
            sigma: 0.25,
        },
        pause_duration: LogNormalSpec {
            mu: 0.3_f64.ln(),
            sigma: 0.2,
        },
        p_pause_within_turn: 0.15,
        p_shift_after_silence: 0.4,
        p_backchannel_per_turn: 0.5,
        bc_duration: UniformSpec { lo: 0.2, hi: 0.6 },
    })
    .expect("benchmark corpus parameters are valid")
}

/// The corpus rasterized to frame timelines.
pub fn timelines(n_dialogs: usize) -> Vec<VaTimeline> {
    corpus(n_dialogs)
        .iter()
        .map(|d| d.rasterize(rate()).expect("benchmark corpus rasterizes"))
        .collect()
}
