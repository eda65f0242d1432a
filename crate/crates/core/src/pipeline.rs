//! End-to-end orchestration: dialogs → timelines → labels → events →
//! predictions → scores → metrics.
//!
//! The command-line tool and the integration tests both run through these
//! functions so they exercise one code path. Heads are computed one dialog
//! at a time and dropped immediately: a discrete head stores 256 floats per
//! frame, so materializing a whole split at once would cost hundreds of
//! megabytes for nothing.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::codec::{make_labels, BinConfig, CodecError, HeadKind, HeadOutput, VapLabels};
use crate::config::{PredictorKind, RunConfig};
use crate::corpus::Dialog;
use crate::eval::{
    calibrate_thresholds, evaluate, score_events, Aggregation, EvalError, MetricReport,
    ScoredInstance, SplitSpec, TaskThresholds,
};
use crate::events::{extract_events, EventError, EventParams, EventSet};
use crate::predictor::{
    derive_heads, oracle_predict, train_markov, MarkovModel, OracleConfig, PredictorError,
};
use crate::timeline::{FrameRate, TimelineError, VaTimeline};
use crate::zeroshot::ZeroShotScorer;

/// Errors raised while running the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("dialog {id:?} is not part of the prepared corpus")]
    UnknownDialog { id: String },
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A dialog with everything derived from its voice-activity timeline.
#[derive(Debug, Clone)]
pub struct PreparedDialog {
    pub id: String,
    pub timeline: VaTimeline,
    pub labels: VapLabels,
    pub events: EventSet,
}

/// Rasterize, label, and extract events for every dialog.
pub fn prepare_dialogs(
    dialogs: &[Dialog],
    rate: FrameRate,
    bins: &BinConfig,
    event_params: &EventParams,
) -> Result<Vec<PreparedDialog>, PipelineError> {
    dialogs
        .iter()
        .map(|dialog| {
            let timeline = dialog.rasterize(rate)?;
            let labels = make_labels(&timeline, bins)?;
            if !labels.valid_mask.iter().any(|&v| v) {
                log::warn!(
                    "dialog {:?}: shorter than the projection horizon; every frame is masked",
                    dialog.id
                );
            }
            let events = extract_events(&timeline, event_params)?;
            Ok(PreparedDialog {
                id: dialog.id.clone(),
                timeline,
                labels,
                events,
            })
        })
        .collect()
}

/// Where per-frame window-state distributions come from.
#[derive(Debug, Clone)]
pub enum PredictorSource {
    /// Label-peeking reference predictor.
    Oracle(OracleConfig),
    /// Trained count-based model.
    Markov(MarkovModel),
}

impl PredictorSource {
    /// Full distribution over window states for one dialog.
    pub fn discrete_head(&self, dialog: &PreparedDialog) -> Result<HeadOutput, PipelineError> {
        let head = match self {
            PredictorSource::Oracle(cfg) => {
                oracle_predict(&dialog.timeline, &dialog.labels, cfg)?
            }
            PredictorSource::Markov(model) => model.predict(&dialog.timeline)?,
        };
        Ok(head)
    }

    /// Head in the requested format, derived from the full distribution
    /// when a reduced format is asked for.
    pub fn head(
        &self,
        dialog: &PreparedDialog,
        kind: HeadKind,
        bins: &BinConfig,
    ) -> Result<HeadOutput, PipelineError> {
        let discrete = self.discrete_head(dialog)?;
        Ok(match kind {
            HeadKind::Discrete => discrete,
            reduced => {
                let derived = derive_heads(&discrete, bins)?;
                match reduced {
                    HeadKind::Independent4 => derived.independent4,
                    HeadKind::Independent40 => derived.independent40,
                    HeadKind::Comparative => derived.comparative,
                    HeadKind::Discrete => unreachable!("handled above"),
                }
            }
        })
    }
}

fn index_by_id(prepared: &[PreparedDialog]) -> BTreeMap<&str, &PreparedDialog> {
    prepared.iter().map(|d| (d.id.as_str(), d)).collect()
}

fn lookup<'a>(
    by_id: &BTreeMap<&str, &'a PreparedDialog>,
    id: &str,
) -> Result<&'a PreparedDialog, PipelineError> {
    by_id
        .get(id)
        .copied()
        .ok_or_else(|| PipelineError::UnknownDialog { id: id.to_owned() })
}

/// Train the count-based predictor on the listed dialogs.
pub fn train_split(
    prepared: &[PreparedDialog],
    train_ids: &[String],
    alpha: f64,
) -> Result<MarkovModel, PipelineError> {
    let by_id = index_by_id(prepared);
    let mut corpus = Vec::with_capacity(train_ids.len());
    for id in train_ids {
        let dialog = lookup(&by_id, id)?;
        corpus.push((dialog.timeline.clone(), dialog.labels.clone()));
    }
    Ok(train_markov(&corpus, alpha)?)
}

/// Score every event in the listed dialogs, one dialog at a time.
pub fn score_split(
    prepared: &[PreparedDialog],
    ids: &[String],
    source: &PredictorSource,
    scorer: &ZeroShotScorer,
    aggregation: Aggregation,
    head_kind: HeadKind,
    bins: &BinConfig,
) -> Result<Vec<ScoredInstance>, PipelineError> {
    let by_id = index_by_id(prepared);
    let mut scored = Vec::new();
    for id in ids {
        let dialog = lookup(&by_id, id)?;
        let head = source.head(dialog, head_kind, bins)?;
        scored.extend(score_events(&dialog.events, &head, scorer, aggregation)?);
    }
    Ok(scored)
}

/// Build the configured predictor, training it on the split when needed.
pub fn build_predictor(
    config: &RunConfig,
    prepared: &[PreparedDialog],
    split: &SplitSpec,
) -> Result<PredictorSource, PipelineError> {
    match config.predictor.kind {
        PredictorKind::Oracle => Ok(PredictorSource::Oracle(OracleConfig {
            noise_epsilon: config.predictor.noise_epsilon,
            seed: config.predictor.oracle_seed,
        })),
        PredictorKind::Markov => {
            let model = train_split(
                prepared,
                &split.train_ids,
                config.predictor.smoothing_alpha,
            )?;
            Ok(PredictorSource::Markov(model))
        }
    }
}

/// Outcome of an evaluation run on the test split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRun {
    /// Thresholds the report was produced with.
    pub thresholds: TaskThresholds,
    /// Whether the thresholds were calibrated on the validation split
    /// (`true`) or supplied by the caller (`false`).
    pub calibrated: bool,
    pub report: MetricReport,
}

/// Calibrate thresholds (unless given) and score the test split.
#[allow(clippy::too_many_arguments)]
pub fn run_evaluation(
    prepared: &[PreparedDialog],
    split: &SplitSpec,
    source: &PredictorSource,
    scorer: &ZeroShotScorer,
    aggregation: Aggregation,
    head_kind: HeadKind,
    bins: &BinConfig,
    thresholds: Option<TaskThresholds>,
) -> Result<EvalRun, PipelineError> {
    let calibrated = thresholds.is_none();
    let thresholds = match thresholds {
        Some(t) => t,
        None => {
            let val = score_split(
                prepared,
                &split.val_ids,
                source,
                scorer,
                aggregation,
                head_kind,
                bins,
            )?;
            calibrate_thresholds(&val)?
        }
    };
    let test = score_split(
        prepared,
        &split.test_ids,
        source,
        scorer,
        aggregation,
        head_kind,
        bins,
    )?;
    let report = evaluate(&test, &thresholds)?;
    Ok(EvalRun {
        thresholds,
        calibrated,
        report,
    })
}
