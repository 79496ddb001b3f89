//! Competition data model: target/decoy pairing, sorting, prefix counts and
//! ground-truth FDP.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Observed (target) and null (decoy or knockoff) score of one hypothesis.
///
/// The target score may be `-inf`, which marks a spectrum whose generating
/// peptide is absent from the target database. The decoy score is always
/// finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScorePair {
    pub target_score: f64,
    pub decoy_score: f64,
}

/// Outcome of a single competition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Target,
    Decoy,
}

impl Label {
    /// Parses the `+1 / -1` encoding.
    pub fn from_int(v: i64) -> Result<Label> {
        match v {
            1 => Ok(Label::Target),
            -1 => Ok(Label::Decoy),
            _ => domain(format!("label must be +1 or -1, got {v}")),
        }
    }

    pub fn as_int(self) -> i8 {
        match self {
            Label::Target => 1,
            Label::Decoy => -1,
        }
    }

    pub fn is_target(self) -> bool {
        self == Label::Target
    }
}

/// A hypothesis after competition: winning score, label and the index of
/// the input record it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledHypothesis {
    pub score: f64,
    pub label: Label,
    pub source: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Exact ties are labeled by a fair coin.
    #[default]
    RandomBreak,
    /// Exact ties are removed.
    Drop,
}

/// Runs the target/decoy competition on every pair.
///
/// Each pair yields `W = max(Z, Z~)` labeled `Target` when `Z > Z~` and
/// `Decoy` when `Z < Z~`; ties follow `tie_policy`. The `source` field of
/// each output records the index of its pair.
pub fn compete<R: Rng + ?Sized>(
    pairs: &[ScorePair],
    tie_policy: TiePolicy,
    rng: &mut R,
) -> Result<Vec<LabeledHypothesis>> {
    if pairs.is_empty() {
        return domain("no score pairs to compete");
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (source, p) in pairs.iter().enumerate() {
        if !p.decoy_score.is_finite() {
            return domain(format!("decoy score of record {source} is not finite"));
        }
        if p.target_score.is_nan() || p.target_score == f64::INFINITY {
            return domain(format!("target score of record {source} must be finite or -inf"));
        }
        let score = p.target_score.max(p.decoy_score);
        let label = if p.target_score > p.decoy_score {
            Label::Target
        } else if p.target_score < p.decoy_score {
            Label::Decoy
        } else {
            match tie_policy {
                TiePolicy::Drop => continue,
                TiePolicy::RandomBreak => {
                    if rng.gen::<bool>() {
                        Label::Target
                    } else {
                        Label::Decoy
                    }
                }
            }
        };
        out.push(LabeledHypothesis { score, label, source });
    }
    Ok(out)
}

/// Hypotheses sorted by non-increasing score with prefix decoy and target
/// counts.
///
/// `decoys[i]` and `targets[i]` hold `D_i` and `T_i` for `i = 0..=m`, so
/// `decoys[i] + targets[i] == i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompetitionSequence {
    hypotheses: Vec<LabeledHypothesis>,
    decoys: Vec<u32>,
    targets: Vec<u32>,
}

/// Sorts hypotheses by decreasing score.
///
/// Equal scores are put in uniformly random order, independent of labels:
/// the list is shuffled before a stable sort.
pub fn build_sequence<R: Rng + ?Sized>(
    labeled: &[LabeledHypothesis],
    rng: &mut R,
) -> Result<CompetitionSequence> {
    if let Some(h) = labeled.iter().find(|h| h.score.is_nan()) {
        return domain(format!("score of record {} is NaN", h.source));
    }
    let mut hypotheses = labeled.to_vec();
    hypotheses.shuffle(rng);
    hypotheses.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(CompetitionSequence::from_sorted(hypotheses))
}

impl CompetitionSequence {
    /// Wraps hypotheses that are already in their final order.
    pub fn from_sorted(hypotheses: Vec<LabeledHypothesis>) -> Self {
        let m = hypotheses.len();
        let mut decoys = Vec::with_capacity(m + 1);
        let mut targets = Vec::with_capacity(m + 1);
        decoys.push(0u32);
        targets.push(0u32);
        let (mut d, mut t) = (0u32, 0u32);
        for h in &hypotheses {
            match h.label {
                Label::Target => t += 1,
                Label::Decoy => d += 1,
            }
            decoys.push(d);
            targets.push(t);
        }
        CompetitionSequence { hypotheses, decoys, targets }
    }

    /// A sequence with the given labels in order, scores `m, m-1, ..., 1`.
    pub fn from_labels(labels: &[Label]) -> Self {
        let m = labels.len();
        let hypotheses = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| LabeledHypothesis { score: (m - i) as f64, label, source: i })
            .collect();
        Self::from_sorted(hypotheses)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[LabeledHypothesis] {
        &self.hypotheses
    }

    /// `D_i`, the number of decoy wins among the top `i` scores.
    pub fn decoys_at(&self, i: usize) -> u32 {
        self.decoys[i]
    }

    /// `T_i`, the number of target wins among the top `i` scores.
    pub fn targets_at(&self, i: usize) -> u32 {
        self.targets[i]
    }

    pub fn decoy_counts(&self) -> &[u32] {
        &self.decoys
    }

    pub fn target_counts(&self) -> &[u32] {
        &self.targets
    }

    /// Builds the report for rejection threshold `k`.
    pub fn report(&self, k: usize, procedure: ProcedureId, alpha: f64, gamma: Option<f64>) -> DiscoveryReport {
        assert!(k <= self.len(), "threshold {k} beyond sequence length {}", self.len());
        let mut reported_indices = Vec::new();
        let mut reported_sources = Vec::new();
        for (pos, h) in self.hypotheses[..k].iter().enumerate() {
            if h.label.is_target() {
                reported_indices.push(pos + 1);
                reported_sources.push(h.source);
            }
        }
        DiscoveryReport {
            procedure,
            alpha,
            gamma,
            m: self.len(),
            k,
            num_targets: self.targets[k] as usize,
            num_decoys: self.decoys[k] as usize,
            reported_indices,
            reported_sources,
            bound: None,
            fdp: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureId {
    Tdc,
    FdpSd,
    FdpSdRandomized,
    FdpUb,
    FdpSb,
    FdpKrb,
}

impl ProcedureId {
    pub const ALL: [ProcedureId; 6] = [
        ProcedureId::Tdc,
        ProcedureId::FdpSd,
        ProcedureId::FdpSdRandomized,
        ProcedureId::FdpUb,
        ProcedureId::FdpSb,
        ProcedureId::FdpKrb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcedureId::Tdc => "tdc",
            ProcedureId::FdpSd => "fdp-sd",
            ProcedureId::FdpSdRandomized => "fdp-sd-randomized",
            ProcedureId::FdpUb => "fdp-ub",
            ProcedureId::FdpSb => "fdp-sb",
            ProcedureId::FdpKrb => "fdp-krb",
        }
    }
}

impl std::str::FromStr for ProcedureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProcedureId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown procedure id '{s}'")))
    }
}

/// The discoveries of one procedure run: all target wins among the top `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub procedure: ProcedureId,
    pub alpha: f64,
    pub gamma: Option<f64>,
    pub m: usize,
    /// Rejection threshold; 0 means no discoveries.
    pub k: usize,
    /// `T_k`.
    pub num_targets: usize,
    /// `D_k`.
    pub num_decoys: usize,
    /// 1-based positions in the sorted sequence of the reported target wins.
    pub reported_indices: Vec<usize>,
    /// Input record indices of the reported target wins.
    pub reported_sources: Vec<usize>,
    /// Upper prediction bound on the FDP of this list, when computed.
    pub bound: Option<f64>,
    /// Ground-truth FDP, when known.
    pub fdp: Option<f64>,
}

/// Per-hypothesis ground truth, indexed by input record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationTruth {
    pub is_true_null: Vec<bool>,
}

impl SimulationTruth {
    pub fn len(&self) -> usize {
        self.is_true_null.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_true_null.is_empty()
    }
}

/// Counts of true-null and false-null discoveries in a report.
pub fn discovery_counts(report: &DiscoveryReport, truth: &SimulationTruth) -> Result<(usize, usize)> {
    let mut false_disc = 0;
    for &s in &report.reported_sources {
        match truth.is_true_null.get(s) {
            Some(true) => false_disc += 1,
            Some(false) => {}
            None => return domain(format!("reported record {s} outside truth of length {}", truth.len())),
        }
    }
    Ok((false_disc, report.reported_sources.len() - false_disc))
}

/// The realized FDP of a report: false discoveries over `max(T_k, 1)`.
pub fn true_fdp(report: &DiscoveryReport, truth: &SimulationTruth) -> Result<f64> {
    if report.k == 0 {
        return Ok(0.0);
    }
    let (false_disc, _) = discovery_counts(report, truth)?;
    Ok(false_disc as f64 / report.num_targets.max(1) as f64)
}
