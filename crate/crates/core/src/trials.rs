//! Verification trial generation and scoring.
//!
//! A trial compares two groups of utterances ("sides"). Same-speaker trials
//! pair disjoint chunks of one speaker's utterances; different-speaker
//! trials pair a chunk from each of two speakers.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::corpus::{Corpus, UttIdx};
use crate::error::{Error, Result};
use crate::metrics::{rate_distance, rho2, CosineOperand, MetricConfig, MetricKind};
use crate::rng;
use crate::stats::{speech_rate, DurationProfile, ExpectedDurations};

/// Utterances on one side of a trial, sorted ascending.
pub type Side = SmallVec<[UttIdx; 4]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialLabel {
    Same,
    Different,
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialLabel::Same => "same",
            TrialLabel::Different => "different",
        })
    }
}

impl FromStr for TrialLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "same" => Ok(TrialLabel::Same),
            "different" => Ok(TrialLabel::Different),
            _ => Err(Error::invalid(format!("bad trial label `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trial {
    pub side_a: Side,
    pub side_b: Side,
    pub label: TrialLabel,
}

impl Trial {
    fn new(mut side_a: Side, mut side_b: Side, label: TrialLabel) -> Self {
        side_a.sort_unstable();
        side_b.sort_unstable();
        Trial {
            side_a,
            side_b,
            label,
        }
    }

    /// Checks the structural invariants against a corpus: non-empty disjoint
    /// sides, single speaker per side, and speakers consistent with the label.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("trial: {msg}")));
        if self.side_a.is_empty() || self.side_b.is_empty() {
            return bad("empty side");
        }
        if let Some(&i) = self
            .side_a
            .iter()
            .chain(&self.side_b)
            .find(|&&i| i as usize >= corpus.len())
        {
            return bad(&format!("utterance index {i} out of range"));
        }
        if self.side_a.iter().any(|u| self.side_b.contains(u)) {
            return bad("utterance on both sides");
        }
        let speaker = |side: &Side| -> Option<&str> {
            let first = corpus.utterance(side[0]).speaker_id.as_str();
            side.iter()
                .all(|&u| corpus.utterance(u).speaker_id == first)
                .then_some(first)
        };
        let (Some(a), Some(b)) = (speaker(&self.side_a), speaker(&self.side_b)) else {
            return bad("side mixes speakers");
        };
        match (self.label, a == b) {
            (TrialLabel::Same, false) => bad("same-speaker trial spans two speakers"),
            (TrialLabel::Different, true) => bad("different-speaker trial has one speaker"),
            _ => Ok(()),
        }
    }
}

/// All trials generated for one average side size `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub m: usize,
    pub seed: u64,
}

impl TrialSet {
    /// Same-speaker trials followed by different-speaker trials.
    pub fn generate(corpus: &Corpus, m: usize, k_per_speaker: usize, seed: u64) -> Result<Self> {
        let mut trials = gen_same_speaker(corpus, m, seed)?;
        trials.extend(gen_diff_speaker(corpus, m, k_per_speaker, seed)?);
        Ok(TrialSet { trials, m, seed })
    }

    pub fn count(&self, label: TrialLabel) -> usize {
        self.trials.iter().filter(|t| t.label == label).count()
    }

    pub fn mean_side_size(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        let total: usize = self
            .trials
            .iter()
            .map(|t| t.side_a.len() + t.side_b.len())
            .sum();
        total as f64 / (2 * self.trials.len()) as f64
    }
}

/// Seeded disjoint chunks of `m` utterances per speaker; every unordered
/// pair of chunks of the same speaker becomes one trial. Trailing partial
/// chunks are dropped, so speakers with fewer than `2m` utterances yield nothing.
pub fn gen_same_speaker(corpus: &Corpus, m: usize, seed: u64) -> Result<Vec<Trial>> {
    if m == 0 {
        return Err(Error::invalid("utterances per side must be at least 1"));
    }
    let per_speaker: Vec<Vec<Trial>> = corpus
        .speakers()
        .par_iter()
        .map(|(speaker, utts)| {
            let mut order = utts.clone();
            order.shuffle(&mut rng::stream(seed, "same", speaker));
            let chunks: Vec<Side> = order.chunks_exact(m).map(Side::from_slice).collect();
            let mut out = Vec::with_capacity(chunks.len() * chunks.len().saturating_sub(1) / 2);
            for i in 0..chunks.len() {
                for j in i + 1..chunks.len() {
                    out.push(Trial::new(
                        chunks[i].clone(),
                        chunks[j].clone(),
                        TrialLabel::Same,
                    ));
                }
            }
            out
        })
        .collect();
    Ok(per_speaker.into_iter().flatten().collect())
}

fn random_chunk<R: rand::Rng>(utts: &[UttIdx], m: usize, rng: &mut R) -> Side {
    if utts.len() <= m {
        return Side::from_slice(utts);
    }
    index::sample(rng, utts.len(), m)
        .into_iter()
        .map(|i| utts[i])
        .collect()
}

/// For each speaker, `k_per_speaker` impostors are drawn without replacement
/// and one trial is formed per (speaker, impostor) from a random chunk of
/// `m` utterances on each side.
pub fn gen_diff_speaker(
    corpus: &Corpus,
    m: usize,
    k_per_speaker: usize,
    seed: u64,
) -> Result<Vec<Trial>> {
    if m == 0 {
        return Err(Error::invalid("utterances per side must be at least 1"));
    }
    if k_per_speaker == 0 {
        return Err(Error::invalid("k_per_speaker must be at least 1"));
    }
    let speakers: Vec<(&String, &Vec<UttIdx>)> = corpus.speakers().iter().collect();
    if k_per_speaker >= speakers.len() {
        return Err(Error::invalid(format!(
            "k_per_speaker={k_per_speaker} needs more than {} speakers",
            speakers.len()
        )));
    }
    let per_speaker: Vec<Vec<Trial>> = (0..speakers.len())
        .into_par_iter()
        .map(|s| {
            let (name, utts) = speakers[s];
            let mut rng = rng::stream(seed, "diff", name);
            let others = index::sample(&mut rng, speakers.len() - 1, k_per_speaker);
            others
                .into_iter()
                .map(|o| {
                    let o = if o >= s { o + 1 } else { o };
                    let own = random_chunk(utts, m, &mut rng);
                    let imp = random_chunk(speakers[o].1, m, &mut rng);
                    Trial::new(own, imp, TrialLabel::Different)
                })
                .collect()
        })
        .collect();
    Ok(per_speaker.into_iter().flatten().collect())
}

#[derive(Clone, Copy, Debug)]
pub struct ScoredTrial<'a> {
    pub trial: &'a Trial,
    pub score: f64,
}

/// Scores in input order, minus trials whose profiles were degenerate.
#[derive(Debug)]
pub struct ScoreReport<'a> {
    pub scored: Vec<ScoredTrial<'a>>,
    /// Input positions of excluded trials with the reason.
    pub excluded: Vec<(usize, Error)>,
}

impl ScoreReport<'_> {
    /// Scores split by label: (same, different).
    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut same = Vec::new();
        let mut diff = Vec::new();
        for s in &self.scored {
            match s.trial.label {
                TrialLabel::Same => same.push(s.score),
                TrialLabel::Different => diff.push(s.score),
            }
        }
        (same, diff)
    }
}

enum SideFeature {
    Profile(Vec<f64>),
    Cosine(CosineOperand),
    Rate(f64),
}

fn side_feature(
    corpus: &Corpus,
    side: &[UttIdx],
    config: &MetricConfig,
    rates: &[f64],
) -> Result<SideFeature> {
    match config.kind {
        MetricKind::Rate => {
            let mut ordered = side.to_vec();
            ordered.sort_unstable();
            let sum: f64 = ordered.iter().map(|&u| rates[u as usize]).sum();
            Ok(SideFeature::Rate(sum / ordered.len() as f64))
        }
        MetricKind::Rho1 => {
            let p = DurationProfile::from_group(corpus, side, config.min_instances)?;
            Ok(SideFeature::Cosine(CosineOperand::new(&p.mu, config.norm)?))
        }
        MetricKind::Rho2 => {
            let p = DurationProfile::from_group(corpus, side, config.min_instances)?;
            Ok(SideFeature::Profile(p.mu))
        }
    }
}

fn distance(a: &SideFeature, b: &SideFeature) -> Result<f64> {
    match (a, b) {
        (SideFeature::Profile(x), SideFeature::Profile(y)) => rho2(x, y),
        (SideFeature::Cosine(x), SideFeature::Cosine(y)) => x.distance(y),
        (SideFeature::Rate(x), SideFeature::Rate(y)) => rate_distance(*x, *y),
        _ => unreachable!("both sides use one metric"),
    }
}

/// Scores every trial with `config`. Each distinct side is profiled once.
///
/// `expected` is required for the rate metric. Degenerate profiles exclude
/// the trial and are reported in [`ScoreReport::excluded`]; any other error
/// aborts scoring.
pub fn score_trials<'a>(
    corpus: &Corpus,
    trials: &'a [Trial],
    config: &MetricConfig,
    expected: Option<&ExpectedDurations>,
) -> Result<ScoreReport<'a>> {
    for t in trials {
        if let Some(&i) = t
            .side_a
            .iter()
            .chain(&t.side_b)
            .find(|&&i| i as usize >= corpus.len())
        {
            return Err(Error::invalid(format!("utterance index {i} out of range")));
        }
    }
    let rates: Vec<f64> = match (config.kind, expected) {
        (MetricKind::Rate, Some(e)) => {
            let aligned = e.aligned_to(corpus.inventory());
            corpus
                .utterances()
                .par_iter()
                .map(|u| speech_rate(u, &aligned))
                .collect::<Result<_>>()?
        }
        (MetricKind::Rate, None) => {
            return Err(Error::invalid("rate metric needs expected durations"));
        }
        _ => Vec::new(),
    };

    let mut side_ids: HashMap<&[UttIdx], usize> = HashMap::new();
    let mut sides: Vec<&[UttIdx]> = Vec::new();
    let mut pairs = Vec::with_capacity(trials.len());
    for t in trials {
        let mut id = |s: &'a Side| {
            *side_ids.entry(s.as_slice()).or_insert_with(|| {
                sides.push(s.as_slice());
                sides.len() - 1
            })
        };
        pairs.push((id(&t.side_a), id(&t.side_b)));
    }

    let features: Vec<Result<SideFeature>> = sides
        .par_iter()
        .map(|s| side_feature(corpus, s, config, &rates))
        .collect();

    let outcomes: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(a, b)| match (&features[a], &features[b]) {
            (Ok(x), Ok(y)) => distance(x, y),
            (Err(e), _) | (_, Err(e)) => Err(match e {
                Error::DegenerateProfile => Error::DegenerateProfile,
                Error::EmptyGroup => Error::EmptyGroup,
                other => Error::invalid(other.to_string()),
            }),
        })
        .collect();

    let mut report = ScoreReport {
        scored: Vec::with_capacity(trials.len()),
        excluded: Vec::new(),
    };
    for (i, (t, outcome)) in trials.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(score) => report.scored.push(ScoredTrial { trial: t, score }),
            Err(Error::DegenerateProfile) => report.excluded.push((i, Error::DegenerateProfile)),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn join_side(corpus: &Corpus, side: &Side) -> String {
    let ids: Vec<&str> = side
        .iter()
        .map(|&u| corpus.utterance(u).id.as_str())
        .collect();
    ids.join(",")
}

/// Writes `<label>\t<side a ids>\t<side b ids>` lines.
pub fn write_trials<W: Write>(corpus: &Corpus, trials: &[Trial], mut w: W) -> Result<()> {
    for t in trials {
        writeln!(
            w,
            "{}\t{}\t{}",
            t.label,
            join_side(corpus, &t.side_a),
            join_side(corpus, &t.side_b)
        )?;
    }
    Ok(())
}

/// Writes trial lines with the score appended as a fourth column.
pub fn write_scores<W: Write>(corpus: &Corpus, scored: &[ScoredTrial<'_>], mut w: W) -> Result<()> {
    for s in scored {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            s.trial.label,
            join_side(corpus, &s.trial.side_a),
            join_side(corpus, &s.trial.side_b),
            s.score
        )?;
    }
    Ok(())
}

/// Reads a trial list, resolving utterance ids against `corpus`. A fourth
/// score column, if present, is ignored.
pub fn read_trials<R: BufRead>(corpus: &Corpus, r: R) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 && f.len() != 4 {
            return Err(Error::parse(lineno, "expected label, side a, side b"));
        }
        let label: TrialLabel = f[0]
            .parse()
            .map_err(|_| Error::parse(lineno, "bad label"))?;
        let side = |s: &str| -> Result<Side> {
            s.split(',')
                .map(|id| {
                    corpus
                        .lookup(id)
                        .ok_or_else(|| Error::UnknownUtterance(id.to_string()))
                })
                .collect()
        };
        let t = Trial::new(side(f[1])?, side(f[2])?, label);
        t.validate(corpus)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        out.push(t);
    }
    Ok(out)
}
