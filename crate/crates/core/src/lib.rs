//! Turn-taking analysis on voice-activity timelines.
//!
//! The crate models a two-party conversation as a pair of boolean
//! voice-activity tracks on a fixed frame clock and asks, at every frame,
//! what the next two seconds of activity will look like. That near future is
//! summarized by an 8-bit window code — four bins per speaker, each bin
//! active when the speaker talks through enough of it — giving a 256-way
//! discrete state space that predictors emit distributions over.
//!
//! From one end to the other:
//!
//! - [`timeline`] — speakers, segments, frame clocks, and rasterization of
//!   segment lists into per-frame activity.
//! - [`codec`] — the projection-window codec: per-frame 8-bit labels, their
//!   validity mask, and the head formats predictors can emit.
//! - [`zeroshot`] — fixed subsets of window states that answer turn-taking
//!   questions (who speaks next, is a backchannel coming, will this
//!   utterance stay short) directly from a predicted distribution, with no
//!   task-specific training.
//! - [`events`] — extraction of evaluation events from a timeline:
//!   shift/hold decisions at mutual silences, prediction windows before
//!   them, backchannel anticipation spans, and short/long onsets.
//! - [`predictor`] — a label-peeking oracle (optionally noise-corrupted)
//!   and a count-based model over discretized dialog contexts.
//! - [`eval`] — per-event scoring, threshold calibration on a validation
//!   split, and weighted-F1 reports.
//! - [`synth`] — a seeded generator for synthetic dialog corpora with
//!   controllable turn-taking statistics.
//! - [`corpus`] — JSONL persistence for dialog collections.
//! - [`config`] — one TOML file holding every knob above.
//! - [`pipeline`] — glue that runs corpus → labels → events → predictions
//!   → metrics in one deterministic pass.
//!
//! The most common types are re-exported at the crate root.

// Validation guards are written `!(x > 0.0)` rather than `x <= 0.0` so that
// NaN fails them too; the positive form would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod events;
pub mod pipeline;
pub mod predictor;
pub mod synth;
pub mod timeline;
pub mod zeroshot;

pub use codec::{make_labels, BinConfig, HeadKind, HeadOutput, VapLabels, WindowBits};
pub use config::{load_config, PredictorKind, RunConfig};
pub use corpus::{load_corpus, save_corpus, Dialog};
pub use eval::{
    calibrate_thresholds, evaluate, score_events, Aggregation, MetricReport, ScoredInstance,
    SplitSpec, TaskThresholds,
};
pub use events::{extract_events, EventInstance, EventLabel, EventParams, EventSet, Task};
pub use pipeline::{
    build_predictor, prepare_dialogs, run_evaluation, score_split, train_split, EvalRun,
    PipelineError, PredictorSource, PreparedDialog,
};
pub use predictor::{oracle_predict, train_markov, MarkovModel, OracleConfig};
pub use synth::{synth_corpus, SynthParams};
pub use timeline::{rasterize, FrameRate, Speaker, VaSegment, VaTimeline};
pub use zeroshot::{ScoreConfig, SubsetTables, ZeroShotScorer};
