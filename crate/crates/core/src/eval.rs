//! Threshold calibration and weighted-F1 evaluation.
//!
//! The protocol has two phases sharing one scoring path: `calibrate` sweeps
//! a fixed threshold grid on validation instances, then `evaluate` applies
//! the chosen thresholds on test instances and reports weighted F1 per
//! task. Shift/hold needs no threshold — its two scores are complementary,
//! so the argmax decision is a fixed 0.5 comparison.

use crate::codec::HeadOutput;
use crate::events::{EventInstance, EventSet, Task};
use crate::timeline::Speaker;
use crate::zeroshot::{ScoreError, ZeroShotScorer};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("evaluation span {start}..{end} exceeds the {len} scored frames")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("no scored frames for dialog {dialog}")]
    MissingHead { dialog: String },
    #[error("cannot calibrate {task}: validation instances cover a single class")]
    SingleClassValidation { task: Task },
    #[error("no instances to evaluate")]
    EmptyInput,
    #[error("split fraction {0} is out of range")]
    SplitFraction(f64),
    #[error("dialog {id} appears in more than one split")]
    SplitOverlap { id: String },
    #[error("dialog {id} is not assigned to any split")]
    SplitIncomplete { id: String },
    #[error("split names unknown dialog {id}")]
    UnknownSplitId { id: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Disjoint train/validation/test assignment of dialog ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

impl SplitSpec {
    /// Shuffle `ids` with the seed and carve off validation and test
    /// fractions (rounded to the nearest count); the rest train.
    pub fn random(
        ids: &[String],
        val_frac: f64,
        test_frac: f64,
        seed: u64,
    ) -> Result<SplitSpec, EvalError> {
        for f in [val_frac, test_frac] {
            if !(0.0..1.0).contains(&f) {
                return Err(EvalError::SplitFraction(f));
            }
        }
        if val_frac + test_frac >= 1.0 {
            return Err(EvalError::SplitFraction(val_frac + test_frac));
        }
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = ids.to_vec();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        shuffled.shuffle(&mut rng);
        let n = shuffled.len();
        let n_val = ((n as f64) * val_frac).round() as usize;
        let n_test = ((n as f64) * test_frac).round() as usize;
        let test_ids = shuffled.split_off(n - n_test);
        let val_ids = shuffled.split_off(n - n_test - n_val);
        Ok(SplitSpec {
            train_ids: shuffled,
            val_ids,
            test_ids,
            seed,
        })
    }

    /// Check the split is a partition of exactly these dialog ids.
    pub fn validate(&self, corpus_ids: &[String]) -> Result<(), EvalError> {
        let corpus: BTreeSet<&str> = corpus_ids.iter().map(String::as_str).collect();
        let mut seen = BTreeSet::new();
        for id in self.all_ids() {
            if !corpus.contains(id) {
                return Err(EvalError::UnknownSplitId { id: id.to_string() });
            }
            if !seen.insert(id) {
                return Err(EvalError::SplitOverlap { id: id.to_string() });
            }
        }
        for id in corpus {
            if !seen.contains(id) {
                return Err(EvalError::SplitIncomplete { id: id.to_string() });
            }
        }
        Ok(())
    }

    pub fn all_ids(&self) -> impl Iterator<Item = &str> {
        self.train_ids
            .iter()
            .chain(&self.val_ids)
            .chain(&self.test_ids)
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.train_ids.len() + self.val_ids.len() + self.test_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Calibrated decision thresholds for the three thresholded tasks.
/// Shift/hold decides by argmax and carries none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskThresholds {
    pub s_pred: f64,
    pub bc_pred: f64,
    pub s_l: f64,
}

impl TaskThresholds {
    pub fn get(&self, task: Task) -> Option<f64> {
        match task {
            Task::ShiftHold => None,
            Task::ShiftPred => Some(self.s_pred),
            Task::BackchannelPred => Some(self.bc_pred),
            Task::ShortLong => Some(self.s_l),
        }
    }
}

/// How per-frame scores inside an evaluation span become one decision
/// score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Arithmetic mean of the per-frame scores.
    #[default]
    Mean,
    /// Fraction of frames whose score exceeds 0.5.
    MajorityVote,
}

/// One event instance reduced to its task, ground truth, and scalar score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredInstance {
    pub task: Task,
    pub positive: bool,
    pub score: f64,
}

/// The per-frame task score an instance aggregates: every task scores the
/// hypothesis that the *other* party relative to the context speaker acts
/// (takes the turn, backchannels, or keeps the onset short).
fn frame_score(
    scorer: &ZeroShotScorer,
    task: Task,
    row: crate::codec::HeadRow<'_>,
    context: Speaker,
) -> Result<f64, ScoreError> {
    let hypothesis = context.other();
    match task {
        Task::ShiftHold => scorer.score_sh(row, hypothesis),
        Task::ShiftPred => scorer.score_spred(row, hypothesis),
        Task::BackchannelPred => scorer.score_bc(row, hypothesis),
        Task::ShortLong => scorer.score_sl(row, hypothesis),
    }
}

/// Aggregate one instance's per-frame task scores over its evaluation span.
pub fn score_instance(
    inst: &EventInstance,
    head: &HeadOutput,
    scorer: &ZeroShotScorer,
    aggregation: Aggregation,
) -> Result<f64, EvalError> {
    let span = inst.eval_span();
    if span.end > head.len() || span.is_empty() {
        return Err(EvalError::SpanOutOfBounds {
            start: span.start,
            end: span.end,
            len: head.len(),
        });
    }
    let mut sum = 0.0;
    let mut votes = 0usize;
    for t in span.clone() {
        let s = frame_score(scorer, inst.task, head.row(t), inst.context_speaker)?;
        sum += s;
        votes += (s > 0.5) as usize;
    }
    let n = span.len() as f64;
    Ok(match aggregation {
        Aggregation::Mean => sum / n,
        Aggregation::MajorityVote => votes as f64 / n,
    })
}

/// Score every instance of one dialog's event set against its head output.
pub fn score_events(
    events: &EventSet,
    head: &HeadOutput,
    scorer: &ZeroShotScorer,
    aggregation: Aggregation,
) -> Result<Vec<ScoredInstance>, EvalError> {
    events
        .iter()
        .map(|inst| {
            Ok(ScoredInstance {
                task: inst.task,
                positive: inst.label.is_positive(),
                score: score_instance(inst, head, scorer, aggregation)?,
            })
        })
        .collect()
}

/// Per-class and support-weighted F1 for a binary task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub weighted: f64,
    /// F1 with the task's positive class as target.
    pub positive: f64,
    /// F1 with the negative class as target.
    pub negative: f64,
    pub positive_support: usize,
    pub negative_support: usize,
}

fn class_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Weighted F1 over two classes: each class's F1 weighted by its share of
/// the ground truth.
pub fn weighted_f1(truth: &[bool], pred: &[bool]) -> Result<F1Scores, EvalError> {
    if truth.is_empty() || truth.len() != pred.len() {
        return Err(EvalError::EmptyInput);
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let positive = class_f1(tp, fp, fn_);
    let negative = class_f1(tn, fn_, fp);
    let n = truth.len() as f64;
    let pos_support = tp + fn_;
    let neg_support = tn + fp;
    Ok(F1Scores {
        weighted: (pos_support as f64 * positive + neg_support as f64 * negative) / n,
        positive,
        negative,
        positive_support: pos_support,
        negative_support: neg_support,
    })
}

pub const THRESHOLD_GRID_POINTS: usize = 101;

fn threshold_grid() -> impl Iterator<Item = f64> {
    (0..THRESHOLD_GRID_POINTS).map(|i| i as f64 / 100.0)
}

fn decisions_at(scored: &[&ScoredInstance], threshold: f64) -> (Vec<bool>, Vec<bool>) {
    let truth = scored.iter().map(|s| s.positive).collect();
    let pred = scored.iter().map(|s| s.score >= threshold).collect();
    (truth, pred)
}

/// Sweep the 101-point grid {0.00, 0.01, …, 1.00} and return the threshold
/// maximizing weighted F1; ties go to the lowest threshold.
pub fn calibrate(scored: &[ScoredInstance], task: Task) -> Result<f64, EvalError> {
    let of_task: Vec<&ScoredInstance> = scored.iter().filter(|s| s.task == task).collect();
    let positives = of_task.iter().filter(|s| s.positive).count();
    if positives == 0 || positives == of_task.len() {
        return Err(EvalError::SingleClassValidation { task });
    }
    let mut best = (0.0, f64::NEG_INFINITY);
    for theta in threshold_grid() {
        let (truth, pred) = decisions_at(&of_task, theta);
        let f1 = weighted_f1(&truth, &pred)?.weighted;
        if f1 > best.1 {
            best = (theta, f1);
        }
    }
    Ok(best.0)
}

/// Calibrate all three thresholded tasks at once.
pub fn calibrate_thresholds(scored: &[ScoredInstance]) -> Result<TaskThresholds, EvalError> {
    Ok(TaskThresholds {
        s_pred: calibrate(scored, Task::ShiftPred)?,
        bc_pred: calibrate(scored, Task::BackchannelPred)?,
        s_l: calibrate(scored, Task::ShortLong)?,
    })
}

/// Evaluation results for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub instances: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Threshold applied; absent for shift/hold (argmax decision).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Absent when the task had no instances.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_f1: Option<f64>,
    /// F1 of the task's positive class (the shift class for shift/hold).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_f1: Option<f64>,
}

/// Full evaluation summary, one entry per task in fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tasks: Vec<TaskReport>,
}

impl MetricReport {
    pub fn task(&self, task: Task) -> &TaskReport {
        self.tasks
            .iter()
            .find(|t| t.task == task)
            .expect("report carries all tasks")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Two-line aligned table: weighted F1 per task, with the shift-class
    /// F1 in parentheses in the shift/hold column.
    pub fn to_table(&self) -> String {
        let headers = ["S/H (S)", "S/L", "S-pred", "BC-pred"];
        let order = [
            Task::ShiftHold,
            Task::ShortLong,
            Task::ShiftPred,
            Task::BackchannelPred,
        ];
        let cells: Vec<String> = order
            .iter()
            .map(|&task| {
                let r = self.task(task);
                match r.weighted_f1 {
                    None => "skipped (0)".to_string(),
                    Some(w) if task == Task::ShiftHold => {
                        format!("{:.3} ({:.3})", w, r.positive_f1.unwrap_or(0.0))
                    }
                    Some(w) => format!("{w:.3}"),
                }
            })
            .collect();
        let width = |i: usize| headers[i].len().max(cells[i].len()) + 3;
        let mut out = String::new();
        for (i, h) in headers.iter().enumerate() {
            let _ = write!(out, "{:<1$}", h, width(i));
        }
        out.push('\n');
        for (i, c) in cells.iter().enumerate() {
            let _ = write!(out, "{:<1$}", c, width(i));
        }
        out.push('\n');
        out
    }
}

/// Apply thresholds to scored test instances and compute per-task metrics.
/// Shift/hold decides by argmax (aggregated score above 0.5 means shift);
/// tasks without instances are reported with zero counts and no F1.
pub fn evaluate(
    scored: &[ScoredInstance],
    thresholds: &TaskThresholds,
) -> Result<MetricReport, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut tasks = Vec::with_capacity(Task::ALL.len());
    for task in Task::ALL {
        let of_task: Vec<&ScoredInstance> = scored.iter().filter(|s| s.task == task).collect();
        let positives = of_task.iter().filter(|s| s.positive).count();
        let negatives = of_task.len() - positives;
        let threshold = thresholds.get(task);
        if of_task.is_empty() {
            tasks.push(TaskReport {
                task,
                instances: 0,
                positives: 0,
                negatives: 0,
                threshold,
                weighted_f1: None,
                positive_f1: None,
                negative_f1: None,
            });
            continue;
        }
        // Argmax for shift/hold: the two class scores always sum to one,
        // so "shift wins" is exactly "score above one half".
        let (truth, pred) = match threshold {
            Some(theta) => decisions_at(&of_task, theta),
            None => (
                of_task.iter().map(|s| s.positive).collect(),
                of_task.iter().map(|s| s.score > 0.5).collect(),
            ),
        };
        let f1 = weighted_f1(&truth, &pred)?;
        tasks.push(TaskReport {
            task,
            instances: of_task.len(),
            positives,
            negatives,
            threshold,
            weighted_f1: Some(f1.weighted),
            positive_f1: Some(f1.positive),
            negative_f1: Some(f1.negative),
        });
    }
    Ok(MetricReport { tasks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{make_labels, BinConfig, NUM_STATES};
    use crate::events::{extract_events, EventLabel, EventParams};
    use crate::predictor::{oracle_predict, OracleConfig};
    use crate::timeline::{rasterize, FrameRate, VaSegment};
    use crate::zeroshot::subset_next_speaker;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn scorer() -> ZeroShotScorer {
        ZeroShotScorer::default()
    }

    fn instance(task: Task, label: EventLabel, span: std::ops::Range<usize>) -> EventInstance {
        EventInstance {
            task,
            label,
            eval_start: span.start,
            eval_end: span.end,
            context_speaker: Speaker::A,
        }
    }

    #[test]
    fn score_instance_means_constant_frames() {
        // Comparative 0.2 means A holds 20% of the projected future, so
        // the shift hypothesis (B speaks) scores 0.8 every frame.
        let head = HeadOutput::Comparative(vec![0.2; 20]);
        let inst = instance(Task::ShiftHold, EventLabel::Shift, 5..15);
        let score = score_instance(&inst, &head, &scorer(), Aggregation::Mean).unwrap();
        assert!((score - 0.8).abs() < 1e-12);
    }

    #[test]
    fn score_instance_averages_mixed_frames() {
        // Five frames scoring 0.0 and five scoring 1.0 average to 0.5.
        let mut vals = vec![1.0; 5];
        vals.extend([0.0; 5]);
        let head = HeadOutput::Comparative(vals);
        let inst = instance(Task::ShiftHold, EventLabel::Shift, 0..10);
        let score = score_instance(&inst, &head, &scorer(), Aggregation::Mean).unwrap();
        assert_eq!(score, 0.5);
    }

    #[test]
    fn majority_vote_counts_confident_frames() {
        let mut vals = vec![0.1; 4];
        vals.extend([0.9; 6]);
        let head = HeadOutput::Comparative(vals);
        // Shift score per frame = 1 − value: 0.9 for four frames, 0.1 for
        // six, so four of ten frames clear 0.5.
        let inst = instance(Task::ShiftHold, EventLabel::Shift, 0..10);
        let score = score_instance(&inst, &head, &scorer(), Aggregation::MajorityVote).unwrap();
        assert_eq!(score, 0.4);
    }

    #[test]
    fn score_instance_rejects_bad_spans() {
        let head = HeadOutput::Comparative(vec![0.5; 10]);
        let inst = instance(Task::ShiftHold, EventLabel::Shift, 5..15);
        assert!(matches!(
            score_instance(&inst, &head, &scorer(), Aggregation::Mean),
            Err(EvalError::SpanOutOfBounds { .. })
        ));
    }

    /// Composition: a clean oracle scores a real extracted shift at 1.0.
    /// The gap must stay short enough (≤650ms) that even the earliest
    /// evaluation frame already sees B filling the far projection bins.
    #[test]
    fn oracle_scores_clean_shift_perfectly() {
        let rate = FrameRate::new(100).unwrap();
        let segs = [
            VaSegment::new(Speaker::A, 0.0, 5.0),
            VaSegment::new(Speaker::B, 5.5, 10.0),
        ];
        let tl = rasterize(&segs, rate, 12.0).unwrap();
        let events = extract_events(&tl, &EventParams::default()).unwrap();
        let shift = events
            .iter()
            .find(|i| i.label == EventLabel::Shift)
            .expect("one shift");
        let labels = make_labels(&tl, &BinConfig::default()).unwrap();
        let head = oracle_predict(&tl, &labels, &OracleConfig::default()).unwrap();
        let score = score_instance(shift, &head, &scorer(), Aggregation::Mean).unwrap();
        assert_eq!(score, 1.0);
    }

    fn scored(task: Task, pairs: &[(bool, f64)]) -> Vec<ScoredInstance> {
        pairs
            .iter()
            .map(|&(positive, score)| ScoredInstance {
                task,
                positive,
                score,
            })
            .collect()
    }

    #[test]
    fn calibrate_separated_scores_returns_first_clean_cut() {
        let mut insts = scored(
            Task::ShiftPred,
            &[(false, 0.05), (false, 0.2), (false, 0.11)],
        );
        insts.extend(scored(Task::ShiftPred, &[(true, 0.8), (true, 0.95)]));
        let theta = calibrate(&insts, Task::ShiftPred).unwrap();
        assert_eq!(theta, 0.21);
        // And that threshold is perfect on the calibration data.
        let truth: Vec<bool> = insts.iter().map(|s| s.positive).collect();
        let pred: Vec<bool> = insts.iter().map(|s| s.score >= theta).collect();
        assert_eq!(weighted_f1(&truth, &pred).unwrap().weighted, 1.0);
    }

    #[test]
    fn calibrate_identical_scores_picks_majority() {
        // Three positives, seven negatives, all scoring 0.5: the best grid
        // point classifies everything as the majority (negative) class,
        // and the tie rule picks the lowest such threshold.
        let mut insts = scored(Task::BackchannelPred, &[(true, 0.5); 3]);
        insts.extend(scored(Task::BackchannelPred, &[(false, 0.5); 7]));
        let theta = calibrate(&insts, Task::BackchannelPred).unwrap();
        assert_eq!(theta, 0.51);
        assert!(insts.iter().all(|s| s.score < theta));
    }

    #[test]
    fn calibrate_rejects_single_class() {
        let insts = scored(Task::ShiftPred, &[(true, 0.9), (true, 0.8)]);
        assert!(matches!(
            calibrate(&insts, Task::ShiftPred),
            Err(EvalError::SingleClassValidation { .. })
        ));
        assert!(matches!(
            calibrate(&[], Task::ShiftPred),
            Err(EvalError::SingleClassValidation { .. })
        ));
    }

    #[test]
    fn weighted_f1_perfect_predictions() {
        let truth = [true, false, true, false];
        let f1 = weighted_f1(&truth, &truth).unwrap();
        assert_eq!(f1.weighted, 1.0);
        assert_eq!(f1.positive, 1.0);
        assert_eq!(f1.negative, 1.0);
    }

    #[test]
    fn weighted_f1_balanced_one_class_prediction() {
        // Predicting everything positive on a balanced set: the positive
        // class gets F1 = 2·0.5·1/1.5 = 2/3, the negative class 0, and
        // the support weighting halves it to one third.
        let truth = [true, true, false, false];
        let pred = [true; 4];
        let f1 = weighted_f1(&truth, &pred).unwrap();
        assert!((f1.weighted - 1.0 / 3.0).abs() < 1e-12);
        assert!((f1.positive - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f1.negative, 0.0);
    }

    #[test]
    fn weighted_f1_all_negative_truth() {
        let truth = [false; 6];
        let pred = [false; 6];
        let f1 = weighted_f1(&truth, &pred).unwrap();
        assert_eq!(f1.weighted, 1.0);
        assert_eq!(f1.positive, 0.0, "positive class has no support or hits");
        assert_eq!(f1.positive_support, 0);
    }

    #[test]
    fn weighted_f1_rejects_empty_or_mismatched() {
        assert!(matches!(weighted_f1(&[], &[]), Err(EvalError::EmptyInput)));
        assert!(matches!(
            weighted_f1(&[true], &[]),
            Err(EvalError::EmptyInput)
        ));
    }

    /// The implementation must agree exactly with a from-scratch
    /// confusion-matrix computation on a large random sample.
    #[test]
    fn weighted_f1_matches_confusion_matrix_oracle() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(0xF1);
        for _ in 0..1000 {
            let n = rng.gen_range(1..50);
            let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();

            let mut matrix = [[0usize; 2]; 2];
            for (&t, &p) in truth.iter().zip(&pred) {
                matrix[t as usize][p as usize] += 1;
            }
            let f1_for = |class: usize| -> f64 {
                let tp = matrix[class][class];
                let fp = matrix[1 - class][class];
                let fn_ = matrix[class][1 - class];
                let p = if tp + fp > 0 {
                    tp as f64 / (tp + fp) as f64
                } else {
                    0.0
                };
                let r = if tp + fn_ > 0 {
                    tp as f64 / (tp + fn_) as f64
                } else {
                    0.0
                };
                if p + r > 0.0 {
                    2.0 * p * r / (p + r)
                } else {
                    0.0
                }
            };
            let support = |class: usize| matrix[class][0] + matrix[class][1];
            let expected = (support(1) as f64 * f1_for(1) + support(0) as f64 * f1_for(0))
                / truth.len() as f64;

            let got = weighted_f1(&truth, &pred).unwrap();
            assert_eq!(got.weighted, expected);
            assert_eq!(got.positive, f1_for(1));
            assert_eq!(got.negative, f1_for(0));
        }
    }

    fn thresholds() -> TaskThresholds {
        TaskThresholds {
            s_pred: 0.5,
            bc_pred: 0.5,
            s_l: 0.5,
        }
    }

    #[test]
    fn evaluate_reports_all_tasks_and_skips_empty() {
        let mut insts = scored(Task::ShiftHold, &[(true, 0.9), (false, 0.1)]);
        insts.extend(scored(Task::ShiftPred, &[(true, 0.8), (false, 0.2)]));
        let report = evaluate(&insts, &thresholds()).unwrap();
        assert_eq!(report.tasks.len(), 4);
        assert_eq!(report.task(Task::ShiftHold).weighted_f1, Some(1.0));
        assert_eq!(report.task(Task::ShiftHold).threshold, None);
        assert_eq!(report.task(Task::ShiftPred).weighted_f1, Some(1.0));
        let bc = report.task(Task::BackchannelPred);
        assert_eq!(bc.instances, 0);
        assert_eq!(bc.weighted_f1, None);
        let table = report.to_table();
        assert!(table.contains("S/H (S)"));
        assert!(table.contains("skipped (0)"));
        // JSON round-trips.
        let parsed: MetricReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn evaluate_shift_hold_breaks_ties_toward_hold() {
        let insts = scored(Task::ShiftHold, &[(true, 0.5), (false, 0.5)]);
        let report = evaluate(&insts, &thresholds()).unwrap();
        // Both scored exactly 0.5 → both decided HOLD → one right.
        assert_eq!(report.task(Task::ShiftHold).positive_f1, Some(0.0));
        assert_eq!(report.task(Task::ShiftHold).negative_f1, Some(2.0 / 3.0));
    }

    /// Random scores against a balanced set land near chance after
    /// calibration on a disjoint half.
    #[test]
    fn random_scores_evaluate_near_half() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        let make = |rng: &mut rand::rngs::StdRng, n: usize| -> Vec<ScoredInstance> {
            (0..n)
                .map(|i| ScoredInstance {
                    task: Task::ShiftPred,
                    positive: i % 2 == 0,
                    score: rng.gen_range(0.0..1.0),
                })
                .collect()
        };
        let val = make(&mut rng, 2000);
        let test = make(&mut rng, 2000);
        let theta = calibrate(&val, Task::ShiftPred).unwrap();
        let report = evaluate(
            &test,
            &TaskThresholds {
                s_pred: theta,
                bc_pred: 0.5,
                s_l: 0.5,
            },
        )
        .unwrap();
        let f1 = report.task(Task::ShiftPred).weighted_f1.unwrap();
        assert!((f1 - 0.5).abs() < 0.05, "chance-level F1, got {f1}");
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut insts: Vec<ScoredInstance> = (0..200)
            .map(|_| ScoredInstance {
                task: if rng.gen_bool(0.5) {
                    Task::ShiftPred
                } else {
                    Task::ShortLong
                },
                positive: rng.gen_bool(0.5),
                score: rng.gen_range(0.0..1.0),
            })
            .collect();
        let before = evaluate(&insts, &thresholds()).unwrap();
        insts.reverse();
        let after = evaluate(&insts, &thresholds()).unwrap();
        assert_eq!(before, after);
        assert_eq!(before.to_json(), after.to_json());
    }

    #[test]
    fn split_random_partitions_exactly() {
        let ids: Vec<String> = (0..250).map(|i| format!("dlg{i:04}")).collect();
        let split = SplitSpec::random(&ids, 0.1, 0.1, 9).unwrap();
        assert_eq!(split.val_ids.len(), 25);
        assert_eq!(split.test_ids.len(), 25);
        assert_eq!(split.train_ids.len(), 200);
        split.validate(&ids).unwrap();
        // Deterministic in the seed.
        let again = SplitSpec::random(&ids, 0.1, 0.1, 9).unwrap();
        assert_eq!(split, again);
        let other = SplitSpec::random(&ids, 0.1, 0.1, 10).unwrap();
        assert_ne!(split, other);
    }

    #[test]
    fn split_validate_flags_violations() {
        let ids: Vec<String> = (0..4).map(|i| format!("d{i}")).collect();
        let mut split = SplitSpec::random(&ids, 0.25, 0.25, 1).unwrap();
        split.val_ids.push(split.train_ids[0].clone());
        assert!(matches!(
            split.validate(&ids),
            Err(EvalError::SplitOverlap { .. })
        ));
        let mut split = SplitSpec::random(&ids, 0.25, 0.25, 1).unwrap();
        split.train_ids.pop();
        assert!(matches!(
            split.validate(&ids),
            Err(EvalError::SplitIncomplete { .. })
        ));
        let mut split = SplitSpec::random(&ids, 0.25, 0.25, 1).unwrap();
        split.train_ids.push("ghost".into());
        assert!(matches!(
            split.validate(&ids),
            Err(EvalError::UnknownSplitId { .. })
        ));
        assert!(matches!(
            SplitSpec::random(&ids, 0.7, 0.5, 1),
            Err(EvalError::SplitFraction(_))
        ));
    }

    proptest! {
        /// All reported F1 values stay inside [0,1].
        #[test]
        fn f1_values_bounded(seed in 0u64..200) {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let n = rng.gen_range(1..40);
            let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
            let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
            let f1 = weighted_f1(&truth, &pred).unwrap();
            for v in [f1.weighted, f1.positive, f1.negative] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        /// Shift/hold decisions depend only on the ratio of the two
        /// subset masses, not their scale.
        #[test]
        fn shift_decision_invariant_under_rescaling(
            mass_a in 0.01f64..0.4,
            mass_b in 0.01f64..0.4,
            scale in 0.05f64..1.0,
        ) {
            // Place mass on one next-speaker state per side and dump the
            // remainder on a state outside both subsets.
            let a_state = subset_next_speaker(Speaker::A).states()[0].index() as usize;
            let b_state = subset_next_speaker(Speaker::B).states()[0].index() as usize;
            let filler = 0b1100_0000usize; // early A bins only: in no subset
            let build = |ma: f64, mb: f64| {
                let mut row = [0.0; NUM_STATES];
                row[a_state] = ma;
                row[b_state] = mb;
                row[filler] = 1.0 - ma - mb;
                HeadOutput::Discrete(vec![row])
            };
            let sc = scorer();
            let inst = instance(Task::ShiftHold, EventLabel::Shift, 0..1);
            let full = score_instance(&inst, &build(mass_a, mass_b), &sc, Aggregation::Mean)?;
            let scaled = score_instance(
                &inst,
                &build(mass_a * scale, mass_b * scale),
                &sc,
                Aggregation::Mean,
            )?;
            prop_assert_eq!(full > 0.5, scaled > 0.5);
            prop_assert!((full - scaled).abs() < 1e-9);
        }
    }
}
