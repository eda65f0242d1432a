//! Zero-shot task scoring on top of projection-window outputs.
//!
//! Turn-taking questions ("who speaks next?", "is this a backchannel?") are
//! answered directly from a predictor's probabilities — no task-specific
//! training. For the discrete head each task corresponds to a template
//! subset of the 256 states; scores aggregate the probability mass that
//! falls inside a subset. The independent and comparative heads use bin-mass
//! rules instead.

use crate::codec::{
    decode_state, encode_state, validate_discrete_row, CodecError, HeadKind, HeadRow, VapState,
    WindowBits, BINS_PER_SPEAKER, NUM_STATES,
};
use crate::timeline::Speaker;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("{head} head does not support {task} scoring")]
    UnsupportedTask { head: HeadKind, task: &'static str },
    #[error(transparent)]
    Row(#[from] CodecError),
}

/// Which question a state subset answers, and for which speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "task", content = "speaker", rename_all = "snake_case")]
pub enum TaskRole {
    /// `speaker` owns the turn after the current one.
    NextSpeaker(Speaker),
    /// `speaker` will own the next turn, judged before the current one ends.
    NextSpeakerPred(Speaker),
    /// `speaker` is about to produce a short backchannel.
    Backchannel(Speaker),
}

/// An immutable set of projection states satisfying one task template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSubset {
    task_role: TaskRole,
    member: [bool; NUM_STATES],
    states: Vec<VapState>,
}

impl StateSubset {
    fn from_predicate(task_role: TaskRole, pred: impl Fn(WindowBits) -> bool) -> StateSubset {
        let mut member = [false; NUM_STATES];
        let mut states = Vec::new();
        for state in VapState::all() {
            if pred(decode_state(state)) {
                member[state.index() as usize] = true;
                states.push(state);
            }
        }
        StateSubset {
            task_role,
            member,
            states,
        }
    }

    fn from_states(task_role: TaskRole, mut listed: Vec<VapState>) -> StateSubset {
        listed.sort_unstable();
        listed.dedup();
        let mut member = [false; NUM_STATES];
        for s in &listed {
            member[s.index() as usize] = true;
        }
        StateSubset {
            task_role,
            member,
            states: listed,
        }
    }

    pub fn task_role(&self) -> TaskRole {
        self.task_role
    }

    pub fn contains(&self, state: VapState) -> bool {
        self.member[state.index() as usize]
    }

    /// Member states in ascending index order.
    pub fn states(&self) -> &[VapState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Total probability the row places on this subset.
    pub fn mass(&self, row: &[f64; NUM_STATES]) -> f64 {
        self.states
            .iter()
            .map(|s| row[s.index() as usize])
            .sum()
    }

    pub fn is_disjoint(&self, other: &StateSubset) -> bool {
        self.states.iter().all(|s| !other.contains(*s))
    }

    pub fn is_subset_of(&self, other: &StateSubset) -> bool {
        self.states.iter().all(|s| other.contains(*s))
    }

    /// Audit-friendly JSON: `{"task": ..., "speaker": ..., "states": [...]}`.
    pub fn export_json(&self) -> serde_json::Value {
        let (task, speaker) = match self.task_role {
            TaskRole::NextSpeaker(s) => ("next_speaker", s),
            TaskRole::NextSpeakerPred(s) => ("next_speaker_pred", s),
            TaskRole::Backchannel(s) => ("backchannel", s),
        };
        serde_json::json!({
            "task": task,
            "speaker": speaker,
            "states": self.states.iter().map(|s| s.index()).collect::<Vec<_>>(),
        })
    }
}

/// Bin pattern defining the backchannel template. The backchanneler must
/// activate at least one `early_bins` member and stay silent elsewhere; the
/// other speaker must activate every `other_required_bins` member (their
/// remaining bins are unconstrained).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcTemplate {
    pub early_bins: Vec<usize>,
    pub other_required_bins: Vec<usize>,
}

impl Default for BcTemplate {
    fn default() -> Self {
        BcTemplate {
            early_bins: vec![0, 1],
            other_required_bins: vec![3],
        }
    }
}

impl BcTemplate {
    fn validate(&self) {
        assert!(
            !self.early_bins.is_empty()
                && self
                    .early_bins
                    .iter()
                    .chain(&self.other_required_bins)
                    .all(|&b| b < BINS_PER_SPEAKER),
            "backchannel template bins must name bins 0..4 and allow at least one early bin",
        );
    }

    fn matches(&self, bits: WindowBits, backchanneler: Speaker) -> bool {
        let bc = bits.speaker(backchanneler);
        let other = bits.speaker(backchanneler.other());
        let any_early = self.early_bins.iter().any(|&b| bc[b]);
        let silent_elsewhere = (0..BINS_PER_SPEAKER)
            .filter(|b| !self.early_bins.contains(b))
            .all(|b| !bc[b]);
        let other_ok = self.other_required_bins.iter().all(|&b| other[b]);
        any_early && silent_elsewhere && other_ok
    }
}

/// States in which `s` owns the upcoming turn: their bins 3 and 4 are active
/// (bins 1 and 2 free) while the other speaker is entirely silent.
pub fn subset_next_speaker(s: Speaker) -> StateSubset {
    let by_predicate = StateSubset::from_predicate(TaskRole::NextSpeaker(s), |bits| {
        let own = bits.speaker(s);
        let other = bits.speaker(s.other());
        own[2] && own[3] && other.iter().all(|&b| !b)
    });
    // Independent constructive route: enumerate the two free bits directly.
    let mut listed = Vec::new();
    for b1 in [false, true] {
        for b2 in [false, true] {
            let mut bits = [[false; BINS_PER_SPEAKER]; 2];
            bits[s.index()] = [b1, b2, true, true];
            listed.push(encode_state(WindowBits::new(bits)));
        }
    }
    let constructed = StateSubset::from_states(TaskRole::NextSpeaker(s), listed);
    assert_eq!(
        by_predicate.states, constructed.states,
        "next-speaker template: predicate and enumeration disagree"
    );
    by_predicate
}

/// Early-decision variant of [`subset_next_speaker`]: `s` still needs bins 3
/// and 4 active, but the other speaker only needs bins 3 and 4 silent — both
/// speakers' first two bins are free, admitting ongoing current-speaker talk.
pub fn subset_next_speaker_pred(s: Speaker) -> StateSubset {
    let by_predicate = StateSubset::from_predicate(TaskRole::NextSpeakerPred(s), |bits| {
        let own = bits.speaker(s);
        let other = bits.speaker(s.other());
        own[2] && own[3] && !other[2] && !other[3]
    });
    let mut listed = Vec::new();
    for free in 0u8..16 {
        let mut bits = [[false; BINS_PER_SPEAKER]; 2];
        bits[s.index()] = [free & 1 != 0, free & 2 != 0, true, true];
        bits[s.other().index()][0] = free & 4 != 0;
        bits[s.other().index()][1] = free & 8 != 0;
        listed.push(encode_state(WindowBits::new(bits)));
    }
    let constructed = StateSubset::from_states(TaskRole::NextSpeakerPred(s), listed);
    assert_eq!(
        by_predicate.states, constructed.states,
        "next-speaker-pred template: predicate and enumeration disagree"
    );
    by_predicate
}

/// States in which `backchanneler` emits a short listener response while the
/// other speaker keeps the turn, under the given template.
pub fn subset_backchannel_with(backchanneler: Speaker, template: &BcTemplate) -> StateSubset {
    template.validate();
    let by_predicate = StateSubset::from_predicate(TaskRole::Backchannel(backchanneler), |bits| {
        template.matches(bits, backchanneler)
    });
    // Constructive route: non-empty early-bin patterns × free other bins.
    let free_other: Vec<usize> = (0..BINS_PER_SPEAKER)
        .filter(|b| !template.other_required_bins.contains(b))
        .collect();
    let mut listed = Vec::new();
    for early in 1u32..(1 << template.early_bins.len()) {
        for freeset in 0u32..(1 << free_other.len()) {
            let mut bits = [[false; BINS_PER_SPEAKER]; 2];
            for (i, &b) in template.early_bins.iter().enumerate() {
                bits[backchanneler.index()][b] = early & (1 << i) != 0;
            }
            for &b in &template.other_required_bins {
                bits[backchanneler.other().index()][b] = true;
            }
            for (i, &b) in free_other.iter().enumerate() {
                bits[backchanneler.other().index()][b] = freeset & (1 << i) != 0;
            }
            listed.push(encode_state(WindowBits::new(bits)));
        }
    }
    let constructed = StateSubset::from_states(TaskRole::Backchannel(backchanneler), listed);
    assert_eq!(
        by_predicate.states, constructed.states,
        "backchannel template: predicate and enumeration disagree"
    );
    by_predicate
}

/// [`subset_backchannel_with`] under the default template.
pub fn subset_backchannel(backchanneler: Speaker) -> StateSubset {
    subset_backchannel_with(backchanneler, &BcTemplate::default())
}

/// Both speakers' subsets for all three templates, built once and shared.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTables {
    next_speaker: [StateSubset; 2],
    next_speaker_pred: [StateSubset; 2],
    backchannel: [StateSubset; 2],
}

impl SubsetTables {
    pub fn new(bc_template: &BcTemplate) -> SubsetTables {
        SubsetTables {
            next_speaker: [
                subset_next_speaker(Speaker::A),
                subset_next_speaker(Speaker::B),
            ],
            next_speaker_pred: [
                subset_next_speaker_pred(Speaker::A),
                subset_next_speaker_pred(Speaker::B),
            ],
            backchannel: [
                subset_backchannel_with(Speaker::A, bc_template),
                subset_backchannel_with(Speaker::B, bc_template),
            ],
        }
    }

    pub fn next_speaker(&self, s: Speaker) -> &StateSubset {
        &self.next_speaker[s.index()]
    }

    pub fn next_speaker_pred(&self, s: Speaker) -> &StateSubset {
        &self.next_speaker_pred[s.index()]
    }

    pub fn backchannel(&self, s: Speaker) -> &StateSubset {
        &self.backchannel[s.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateSubset> {
        self.next_speaker
            .iter()
            .chain(self.next_speaker_pred.iter())
            .chain(self.backchannel.iter())
    }

    /// All six subsets as a JSON array for audit or cross-checking.
    pub fn export_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.iter().map(StateSubset::export_json).collect())
    }
}

impl Default for SubsetTables {
    fn default() -> Self {
        SubsetTables::new(&BcTemplate::default())
    }
}

/// Shared default tables; templates are immutable so one copy serves all.
pub static DEFAULT_TABLES: Lazy<SubsetTables> = Lazy::new(SubsetTables::default);

/// How the independent heads turn the backchannel bin rule into a score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BcScoring {
    /// 1.0 when the bin comparisons hold strictly, else 0.0.
    #[default]
    Literal,
    /// Product of sigmoid margins — a soft version of the same comparisons,
    /// useful when thresholds must be calibrated on the score.
    Graded { temperature: f64 },
}

/// Scoring knobs for the independent heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub bc_scoring: BcScoring,
    /// Weight the four-bin speaker masses by bin duration instead of
    /// counting each bin equally.
    pub sh_duration_weighted: bool,
    /// Bin durations used when `sh_duration_weighted` is set.
    pub bin_durations_ms: [u32; BINS_PER_SPEAKER],
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            bc_scoring: BcScoring::default(),
            sh_duration_weighted: false,
            bin_durations_ms: [200, 400, 600, 800],
        }
    }
}

/// Zero-shot scorer: subset tables plus independent-head scoring options.
#[derive(Debug, Clone, Default)]
pub struct ZeroShotScorer {
    tables: SubsetTables,
    config: ScoreConfig,
}

impl ZeroShotScorer {
    pub fn new(tables: SubsetTables, config: ScoreConfig) -> ZeroShotScorer {
        ZeroShotScorer { tables, config }
    }

    pub fn tables(&self) -> &SubsetTables {
        &self.tables
    }

    pub fn config(&self) -> &ScoreConfig {
        &self.config
    }

    /// Probability-like score that `hypothesis` speaks next.
    ///
    /// Discrete rows compare the two next-speaker subset masses; independent
    /// rows compare summed bin probabilities; comparative rows are already
    /// this quantity for speaker A. A score above 0.5 favors the hypothesis;
    /// exactly 0.5 is a tie (resolved toward HOLD by [`Self::shift_decision`]).
    pub fn score_sh(&self, row: HeadRow<'_>, hypothesis: Speaker) -> Result<f64, ScoreError> {
        match row {
            HeadRow::Discrete(probs) => {
                validate_discrete_row(probs)?;
                let own = self.tables.next_speaker(hypothesis).mass(probs);
                let other = self.tables.next_speaker(hypothesis.other()).mass(probs);
                Ok(normalized_pair(own, other))
            }
            HeadRow::Independent4(bins) => {
                validate_independent(bins.iter().flatten())?;
                let mass = |s: Speaker| self.speaker_mass4(&bins[s.index()], 0);
                Ok(normalized_pair(mass(hypothesis), mass(hypothesis.other())))
            }
            HeadRow::Independent40(bins) => {
                validate_independent(bins.iter().flatten())?;
                let mass = |s: Speaker| bins[s.index()].iter().sum::<f64>();
                Ok(normalized_pair(mass(hypothesis), mass(hypothesis.other())))
            }
            HeadRow::Comparative(p) => {
                validate_probability(p)?;
                Ok(match hypothesis {
                    Speaker::A => p,
                    Speaker::B => 1.0 - p,
                })
            }
        }
    }

    /// Score that `hypothesis` takes over, judged while the current speaker
    /// may still be talking: near-future bins are ignored so lingering
    /// current-turn activity cannot mask the upcoming change.
    pub fn score_spred(&self, row: HeadRow<'_>, hypothesis: Speaker) -> Result<f64, ScoreError> {
        match row {
            HeadRow::Discrete(probs) => {
                validate_discrete_row(probs)?;
                let own = self.tables.next_speaker_pred(hypothesis).mass(probs);
                let other = self
                    .tables
                    .next_speaker_pred(hypothesis.other())
                    .mass(probs);
                Ok(normalized_pair(own, other))
            }
            HeadRow::Independent4(bins) => {
                validate_independent(bins.iter().flatten())?;
                // Skip the first two bins (600 ms of near future).
                let mass = |s: Speaker| self.speaker_mass4(&bins[s.index()], 2);
                Ok(normalized_pair(mass(hypothesis), mass(hypothesis.other())))
            }
            HeadRow::Independent40(bins) => {
                validate_independent(bins.iter().flatten())?;
                // Skip the first twelve 50 ms bins (the same 600 ms).
                let mass = |s: Speaker| bins[s.index()][12..].iter().sum::<f64>();
                Ok(normalized_pair(mass(hypothesis), mass(hypothesis.other())))
            }
            HeadRow::Comparative(p) => {
                validate_probability(p)?;
                Ok(match hypothesis {
                    Speaker::A => p,
                    Speaker::B => 1.0 - p,
                })
            }
        }
    }

    /// Score that `backchanneler` is about to emit a short listener response.
    ///
    /// Discrete rows report the (unnormalized) backchannel-subset mass. The
    /// independent heads compare bins: the other speaker's final bin must
    /// beat the backchanneler's final bin, and some earlier backchanneler
    /// bin must beat it too. Comparative rows cannot express this.
    pub fn score_bc(&self, row: HeadRow<'_>, backchanneler: Speaker) -> Result<f64, ScoreError> {
        self.bc_like(row, backchanneler, "backchannel-prediction")
    }

    /// Score that the utterance just started by `onset_speaker` will be
    /// short. The bin comparisons are identical to [`Self::score_bc`] with
    /// the onset speaker as backchanneler; high scores mean SHORT.
    pub fn score_sl(&self, row: HeadRow<'_>, onset_speaker: Speaker) -> Result<f64, ScoreError> {
        self.bc_like(row, onset_speaker, "short-long")
    }

    /// SHIFT/HOLD decision given the current turn holder: SHIFT exactly when
    /// the other speaker's score exceeds 0.5 (ties resolve to HOLD, the
    /// majority class).
    pub fn shift_decision(
        &self,
        row: HeadRow<'_>,
        context_speaker: Speaker,
    ) -> Result<bool, ScoreError> {
        Ok(self.score_sh(row, context_speaker.other())? > 0.5)
    }

    fn bc_like(
        &self,
        row: HeadRow<'_>,
        backchanneler: Speaker,
        task: &'static str,
    ) -> Result<f64, ScoreError> {
        match row {
            HeadRow::Discrete(probs) => {
                validate_discrete_row(probs)?;
                Ok(self.tables.backchannel(backchanneler).mass(probs))
            }
            HeadRow::Independent4(bins) => {
                validate_independent(bins.iter().flatten())?;
                Ok(self.bc_bin_rule(&bins[backchanneler.index()], &bins[backchanneler.other().index()]))
            }
            HeadRow::Independent40(bins) => {
                validate_independent(bins.iter().flatten())?;
                Ok(self.bc_bin_rule(&bins[backchanneler.index()], &bins[backchanneler.other().index()]))
            }
            HeadRow::Comparative(_) => Err(ScoreError::UnsupportedTask {
                head: HeadKind::Comparative,
                task,
            }),
        }
    }

    /// The backchanneler plays the non-active role: the active speaker must
    /// dominate the far future while the backchanneler's energy sits in the
    /// earlier bins.
    fn bc_bin_rule(&self, nonactive: &[f64], active: &[f64]) -> f64 {
        let last = nonactive.len() - 1;
        let na_last = nonactive[last];
        let act_last = active[last];
        let max_earlier = nonactive[..last]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        match self.config.bc_scoring {
            BcScoring::Literal => {
                if act_last > na_last && max_earlier > na_last {
                    1.0
                } else {
                    0.0
                }
            }
            BcScoring::Graded { temperature } => {
                sigmoid((act_last - na_last) / temperature)
                    * sigmoid((max_earlier - na_last) / temperature)
            }
        }
    }

    fn speaker_mass4(&self, bins: &[f64; BINS_PER_SPEAKER], skip: usize) -> f64 {
        if self.config.sh_duration_weighted {
            bins.iter()
                .zip(self.config.bin_durations_ms)
                .skip(skip)
                .map(|(&p, ms)| p * ms as f64 / 1000.0)
                .sum()
        } else {
            bins.iter().skip(skip).sum()
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `own / (own + other)`, with the symmetric 0.5 fallback when neither side
/// carries any mass.
fn normalized_pair(own: f64, other: f64) -> f64 {
    if own + other > 0.0 {
        own / (own + other)
    } else {
        0.5
    }
}

fn validate_probability(p: f64) -> Result<(), CodecError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CodecError::ProbabilityOutOfRange { index: 0, value: p });
    }
    Ok(())
}

fn validate_independent<'a>(values: impl Iterator<Item = &'a f64>) -> Result<(), CodecError> {
    for (index, &value) in values.enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(CodecError::ProbabilityOutOfRange { index, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{marginal_bins, FINE_BINS};
    use proptest::prelude::*;

    fn point_mass(index: usize) -> Vec<f64> {
        let mut row = vec![0.0; NUM_STATES];
        row[index] = 1.0;
        row
    }

    fn discrete_row(row: &[f64]) -> HeadRow<'_> {
        HeadRow::Discrete(row.try_into().expect("row of 256"))
    }

    fn scorer() -> ZeroShotScorer {
        ZeroShotScorer::default()
    }

    #[test]
    fn next_speaker_subsets_enumerated() {
        let a = subset_next_speaker(Speaker::A);
        let b = subset_next_speaker(Speaker::B);
        let idx = |s: &StateSubset| s.states().iter().map(|v| v.index()).collect::<Vec<_>>();
        assert_eq!(idx(&a), vec![48, 112, 176, 240]);
        assert_eq!(idx(&b), vec![3, 7, 11, 15]);
        assert!(a.is_disjoint(&b));
    }

    #[test]
    fn pred_subsets_relax_the_other_speaker() {
        for s in Speaker::BOTH {
            let tight = subset_next_speaker(s);
            let pred = subset_next_speaker_pred(s);
            assert_eq!(tight.len(), 4);
            assert_eq!(pred.len(), 16);
            assert!(tight.is_subset_of(&pred));
        }
        assert!(subset_next_speaker_pred(Speaker::A)
            .is_disjoint(&subset_next_speaker_pred(Speaker::B)));
    }

    #[test]
    fn backchannel_subset_members() {
        let bc_a = subset_backchannel(Speaker::A);
        assert_eq!(bc_a.len(), 24);
        // Backchanneler bits (1,0,0,0), other speaker fully active.
        let member = VapState::from_index(128 + 15).unwrap();
        assert!(bc_a.contains(member));
        assert!(bc_a.is_disjoint(&subset_next_speaker(Speaker::A)));
        assert_eq!(subset_backchannel(Speaker::B).len(), 24);
    }

    #[test]
    fn custom_bc_template_changes_membership() {
        // Allow only bin 1 as the early bin: 1 pattern × 8 free combos.
        let tpl = BcTemplate {
            early_bins: vec![0],
            other_required_bins: vec![3],
        };
        let subset = subset_backchannel_with(Speaker::A, &tpl);
        assert_eq!(subset.len(), 8);
    }

    #[test]
    fn subset_json_export_shape() {
        let json = DEFAULT_TABLES.export_json();
        let arr = json.as_array().unwrap();
        assert_eq!(arr.len(), 6);
        assert_eq!(arr[0]["task"], "next_speaker");
        assert_eq!(arr[0]["speaker"], "A");
        assert_eq!(arr[0]["states"][0], 48);
    }

    #[test]
    fn sh_point_mass_on_next_speaker_state() {
        let row = point_mass(48);
        let s = scorer();
        assert_eq!(s.score_sh(discrete_row(&row), Speaker::A).unwrap(), 1.0);
        assert_eq!(s.score_sh(discrete_row(&row), Speaker::B).unwrap(), 0.0);
        assert!(s.shift_decision(discrete_row(&row), Speaker::B).unwrap());
        assert!(!s.shift_decision(discrete_row(&row), Speaker::A).unwrap());
    }

    #[test]
    fn sh_neutral_when_mass_outside_both_subsets() {
        // All mass on the silent state: neither subset sees it.
        let row = point_mass(0);
        let s = scorer();
        assert_eq!(s.score_sh(discrete_row(&row), Speaker::A).unwrap(), 0.5);
        // The tie resolves to HOLD for either context speaker.
        assert!(!s.shift_decision(discrete_row(&row), Speaker::A).unwrap());
        assert!(!s.shift_decision(discrete_row(&row), Speaker::B).unwrap());
    }

    #[test]
    fn sh_comparative_and_independent() {
        let s = scorer();
        assert_eq!(
            s.score_sh(HeadRow::Comparative(0.5), Speaker::A).unwrap(),
            0.5
        );
        let b_view = s.score_sh(HeadRow::Comparative(0.8), Speaker::B).unwrap();
        assert!((b_view - 0.2).abs() < 1e-12);
        let bins = [[1.0; 4], [0.0; 4]];
        assert_eq!(
            s.score_sh(HeadRow::Independent4(&bins), Speaker::A).unwrap(),
            1.0
        );
        let fine = [[1.0; FINE_BINS], [1.0; FINE_BINS]];
        assert_eq!(
            s.score_sh(HeadRow::Independent40(&fine), Speaker::A).unwrap(),
            0.5
        );
    }

    #[test]
    fn sh_duration_weighting_changes_unequal_bins() {
        let tables = SubsetTables::default();
        let weighted = ZeroShotScorer::new(
            tables.clone(),
            ScoreConfig {
                sh_duration_weighted: true,
                ..ScoreConfig::default()
            },
        );
        let unweighted = ZeroShotScorer::new(tables, ScoreConfig::default());
        // A's mass sits in the short early bin, B's in the long late bin.
        let bins = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let row = HeadRow::Independent4(&bins);
        assert_eq!(unweighted.score_sh(row, Speaker::A).unwrap(), 0.5);
        let w = weighted.score_sh(row, Speaker::A).unwrap();
        assert!((w - 0.2).abs() < 1e-12, "200/(200+800) = 0.2, got {w}");
    }

    #[test]
    fn spred_uniform_over_pred_subset() {
        let subset = subset_next_speaker_pred(Speaker::A);
        let mut row = vec![0.0; NUM_STATES];
        for st in subset.states() {
            row[st.index() as usize] = 1.0 / subset.len() as f64;
        }
        let s = scorer();
        assert_eq!(s.score_spred(discrete_row(&row), Speaker::A).unwrap(), 1.0);
    }

    #[test]
    fn spred_independent_ignores_near_future() {
        let s = scorer();
        let bins = [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]];
        assert_eq!(
            s.score_spred(HeadRow::Independent4(&bins), Speaker::A).unwrap(),
            0.0
        );
        let fine = [[0.5; FINE_BINS], [0.5; FINE_BINS]];
        assert_eq!(
            s.score_spred(HeadRow::Independent40(&fine), Speaker::A).unwrap(),
            0.5
        );
    }

    #[test]
    fn spred_ind40_skips_exactly_twelve_bins() {
        // All of A's mass inside the skipped 600 ms, B's just outside it.
        let mut a = [0.0; FINE_BINS];
        for slot in a.iter_mut().take(12) {
            *slot = 1.0;
        }
        let mut b = [0.0; FINE_BINS];
        b[12] = 1.0;
        let bins = [a, b];
        let s = scorer();
        assert_eq!(
            s.score_spred(HeadRow::Independent40(&bins), Speaker::B).unwrap(),
            1.0
        );
    }

    #[test]
    fn bc_discrete_masses() {
        let s = scorer();
        let member = point_mass(128 + 15);
        assert_eq!(s.score_bc(discrete_row(&member), Speaker::A).unwrap(), 1.0);
        let uniform = vec![1.0 / NUM_STATES as f64; NUM_STATES];
        let val = s.score_bc(discrete_row(&uniform), Speaker::A).unwrap();
        assert!((val - 24.0 / 256.0).abs() < 1e-12);
    }

    #[test]
    fn bc_independent_literal_rule() {
        let s = scorer();
        let bins = [[0.8, 0.1, 0.1, 0.1], [0.9, 0.9, 0.9, 0.9]];
        assert_eq!(s.score_bc(HeadRow::Independent4(&bins), Speaker::A).unwrap(), 1.0);
        // Flat bins fail the strict earlier-bin comparison.
        let flat = [[0.5; 4], [0.9; 4]];
        assert_eq!(s.score_bc(HeadRow::Independent4(&flat), Speaker::A).unwrap(), 0.0);
    }

    #[test]
    fn bc_graded_variant_is_soft() {
        let graded = ZeroShotScorer::new(
            SubsetTables::default(),
            ScoreConfig {
                bc_scoring: BcScoring::Graded { temperature: 0.1 },
                ..ScoreConfig::default()
            },
        );
        let strong = [[0.8, 0.1, 0.1, 0.1], [0.9, 0.9, 0.9, 0.9]];
        let weak = [[0.55, 0.45, 0.45, 0.45], [0.55, 0.5, 0.5, 0.5]];
        let hi = graded.score_bc(HeadRow::Independent4(&strong), Speaker::A).unwrap();
        let lo = graded.score_bc(HeadRow::Independent4(&weak), Speaker::A).unwrap();
        assert!(hi > 0.9, "strong pattern should approach 1, got {hi}");
        assert!(lo < hi && lo > 0.0, "weak pattern should sit between, got {lo}");
    }

    #[test]
    fn sl_delegates_to_bc_comparisons() {
        let s = scorer();
        // Mass on a next-speaker state is outside the backchannel subset.
        let row = point_mass(48);
        assert_eq!(s.score_sl(discrete_row(&row), Speaker::A).unwrap(), 0.0);
        let uniform = vec![1.0 / NUM_STATES as f64; NUM_STATES];
        let val = s.score_sl(discrete_row(&uniform), Speaker::B).unwrap();
        assert!((val - 24.0 / 256.0).abs() < 1e-12);
    }

    #[test]
    fn comparative_rejects_bc_and_sl() {
        let s = scorer();
        assert!(matches!(
            s.score_bc(HeadRow::Comparative(0.4), Speaker::A),
            Err(ScoreError::UnsupportedTask { head: HeadKind::Comparative, .. })
        ));
        assert!(matches!(
            s.score_sl(HeadRow::Comparative(0.4), Speaker::A),
            Err(ScoreError::UnsupportedTask { head: HeadKind::Comparative, .. })
        ));
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let s = scorer();
        let unnormalized = vec![0.0; NUM_STATES];
        assert!(matches!(
            s.score_sh(discrete_row(&unnormalized), Speaker::A),
            Err(ScoreError::Row(CodecError::Unnormalized { .. }))
        ));
        let bad_bins = [[1.5, 0.0, 0.0, 0.0], [0.0; 4]];
        assert!(matches!(
            s.score_sh(HeadRow::Independent4(&bad_bins), Speaker::A),
            Err(ScoreError::Row(CodecError::ProbabilityOutOfRange { .. }))
        ));
        assert!(s.score_sh(HeadRow::Comparative(1.2), Speaker::A).is_err());
    }

    fn random_discrete_row(seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut row = vec![0.0f64; NUM_STATES];
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        row
    }

    proptest! {
        /// Complementary hypotheses always split the normalized score.
        #[test]
        fn sh_scores_sum_to_one(seed in 0u64..500) {
            let row = random_discrete_row(seed);
            let s = scorer();
            let a = s.score_sh(discrete_row(&row), Speaker::A).unwrap();
            let b = s.score_sh(discrete_row(&row), Speaker::B).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-9);
            let pa = s.score_spred(discrete_row(&row), Speaker::A).unwrap();
            let pb = s.score_spred(discrete_row(&row), Speaker::B).unwrap();
            prop_assert!((pa + pb - 1.0).abs() < 1e-9);
        }

        /// A point mass on any next-speaker state names that speaker under
        /// every head format derivable from the row.
        #[test]
        fn point_mass_consistency_across_heads(which in 0usize..4, b_side in proptest::bool::ANY) {
            let hyp = if b_side { Speaker::B } else { Speaker::A };
            let subset = subset_next_speaker(hyp);
            let state = subset.states()[which];
            let row = point_mass(state.index() as usize);
            let s = scorer();

            let discrete = s.score_sh(discrete_row(&row), hyp).unwrap();
            prop_assert_eq!(discrete, 1.0);

            let marg = marginal_bins(&row).unwrap();
            let ind = s.score_sh(HeadRow::Independent4(&marg), hyp).unwrap();
            prop_assert!(ind > 0.5);

            // The comparative value implied by the bits: the hypothesized
            // speaker holds all future activity.
            let p_a = if hyp == Speaker::A { 1.0 } else { 0.0 };
            let comp = s.score_sh(HeadRow::Comparative(p_a), hyp).unwrap();
            prop_assert_eq!(comp, 1.0);
        }

        /// Moving mass into the backchannel subset never lowers the score.
        #[test]
        fn bc_mass_monotonicity(seed in 0u64..200, frac in 0.01f64..0.99) {
            let row = random_discrete_row(seed);
            let s = scorer();
            let before = s.score_bc(discrete_row(&row), Speaker::A).unwrap();
            // Shift `frac` of every non-member state's mass onto a member.
            let subset = subset_backchannel(Speaker::A);
            let target = subset.states()[0].index() as usize;
            let mut shifted = row.clone();
            let mut moved = 0.0;
            for (i, v) in shifted.iter_mut().enumerate() {
                if !subset.contains(VapState::from_index(i as u16).unwrap()) {
                    moved += *v * frac;
                    *v *= 1.0 - frac;
                }
            }
            shifted[target] += moved;
            let after = s.score_bc(discrete_row(&shifted), Speaker::A).unwrap();
            prop_assert!(after >= before - 1e-12);
        }

        /// Swapping speakers mirrors every score.
        #[test]
        fn scores_mirror_under_speaker_swap(seed in 0u64..200) {
            let row = random_discrete_row(seed);
            let mut swapped = vec![0.0; NUM_STATES];
            for (i, &v) in row.iter().enumerate() {
                let j = ((i << 4) | (i >> 4)) & 0xff;
                swapped[j] = v;
            }
            let s = scorer();
            type ScoreFn<'a> = Box<dyn Fn(HeadRow, Speaker) -> Result<f64, ScoreError> + 'a>;
            let fns: [(&str, ScoreFn); 3] = [
                ("sh", Box::new(|r, h| s.score_sh(r, h))),
                ("spred", Box::new(|r, h| s.score_spred(r, h))),
                ("bc", Box::new(|r, h| s.score_bc(r, h))),
            ];
            for (name, f) in &fns {
                let orig = f(discrete_row(&row), Speaker::A).unwrap();
                let mirror = f(discrete_row(&swapped), Speaker::B).unwrap();
                prop_assert!((orig - mirror).abs() < 1e-9, "{} not mirrored", name);
            }
        }
    }
}
