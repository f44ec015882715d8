//! Duration statistics: per-group mean phone-duration profiles, corpus
//! expected durations, speech rate and global speech-rate normalization.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Phone, UttIdx, Utterance, UtteranceSummary};
use crate::error::{Error, Result};
use crate::inventory::PhonemeInventory;

/// Mean phone durations of one utterance group.
///
/// Classes observed fewer than `min_instances` times take the group's
/// global mean duration instead, and are flagged in `filled`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationProfile {
    pub mu: Vec<f64>,
    pub counts: Vec<u32>,
    pub sums: Vec<f64>,
    pub global_mean: f64,
    pub filled: Vec<bool>,
}

struct ProfileAccumulator {
    counts: Vec<u32>,
    sums: Vec<f64>,
}

impl ProfileAccumulator {
    fn new(n: usize) -> Self {
        ProfileAccumulator {
            counts: vec![0; n],
            sums: vec![0.0; n],
        }
    }

    fn add(&mut self, s: &UtteranceSummary) {
        for &(class, n, sum) in &s.classes {
            self.counts[class as usize] += n;
            self.sums[class as usize] += sum;
        }
    }

    fn finish(self, min_instances: u32) -> Result<DurationProfile> {
        if min_instances == 0 {
            return Err(Error::invalid("min_instances must be at least 1"));
        }
        let total_count: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if total_count == 0 {
            return Err(Error::EmptyGroup);
        }
        let total: f64 = self.sums.iter().sum();
        let global_mean = total / total_count as f64;
        let mut mu = Vec::with_capacity(self.counts.len());
        let mut filled = Vec::with_capacity(self.counts.len());
        for (&n, &s) in self.counts.iter().zip(&self.sums) {
            if n >= min_instances {
                mu.push(s / n as f64);
                filled.push(false);
            } else {
                mu.push(global_mean);
                filled.push(true);
            }
        }
        Ok(DurationProfile {
            mu,
            counts: self.counts,
            sums: self.sums,
            global_mean,
            filled,
        })
    }
}

impl DurationProfile {
    /// Profile of a group of corpus utterances.
    pub fn from_group(corpus: &Corpus, group: &[UttIdx], min_instances: u32) -> Result<Self> {
        let mut order: Vec<UttIdx> = group.to_vec();
        // Index order is id order; a fixed order makes the sums permutation invariant.
        order.sort_unstable();
        let mut acc = ProfileAccumulator::new(corpus.n_classes());
        for &i in &order {
            if i as usize >= corpus.len() {
                return Err(Error::invalid(format!("utterance index {i} out of range")));
            }
            acc.add(corpus.summary(i));
        }
        acc.finish(min_instances)
    }

    /// Profile of arbitrary utterances over an inventory of `n_classes`.
    pub fn from_utterances<'a, I>(
        utterances: I,
        n_classes: usize,
        min_instances: u32,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Utterance>,
    {
        let mut utts: Vec<&Utterance> = utterances.into_iter().collect();
        utts.sort_by(|a, b| a.id.cmp(&b.id));
        let mut acc = ProfileAccumulator::new(n_classes);
        for u in utts {
            if u.phones.iter().any(|p| p.class as usize >= n_classes) {
                return Err(Error::InvalidUtterance {
                    utterance: u.id.clone(),
                    msg: "phone class outside inventory".into(),
                });
            }
            acc.add(&UtteranceSummary::of(u));
        }
        acc.finish(min_instances)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Writes `class<TAB>mean<TAB>count` rows.
    pub fn write_tsv<W: Write>(&self, inventory: &PhonemeInventory, mut w: W) -> Result<()> {
        for (label, (m, c)) in inventory
            .labels()
            .iter()
            .zip(self.mu.iter().zip(&self.counts))
        {
            writeln!(w, "{label}\t{m}\t{c}")?;
        }
        Ok(())
    }
}

/// Subtracts the arithmetic mean of the components.
pub fn mean_center(mu: &[f64]) -> Vec<f64> {
    if mu.is_empty() {
        return Vec::new();
    }
    let mean = mu.iter().sum::<f64>() / mu.len() as f64;
    mu.iter().map(|v| v - mean).collect()
}

/// Per-class mean durations over a reference corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDurations {
    pub labels: Vec<String>,
    /// `None` for classes never observed in the reference corpus.
    pub lbar: Vec<Option<f64>>,
    pub counts: Vec<u64>,
    /// Mean of per-utterance speech rates over the reference corpus.
    pub overall_rate_mean: f64,
}

pub fn expected_durations(corpus: &Corpus) -> Result<ExpectedDurations> {
    if corpus.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    let n = corpus.n_classes();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0u64; n];
    for u in corpus.utterances() {
        for p in &u.phones {
            sums[p.class as usize] += p.duration;
            counts[p.class as usize] += 1;
        }
    }
    let lbar = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let mut expected = ExpectedDurations {
        labels: corpus.inventory().labels(),
        lbar,
        counts,
        overall_rate_mean: f64::NAN,
    };
    let mut rate_sum = 0.0;
    for u in corpus.utterances() {
        rate_sum += speech_rate(u, &expected)?;
    }
    expected.overall_rate_mean = rate_sum / corpus.len() as f64;
    Ok(expected)
}

impl ExpectedDurations {
    /// Reindexes the table onto another inventory by class label.
    pub fn aligned_to(&self, inventory: &PhonemeInventory) -> ExpectedDurations {
        let labels = inventory.labels();
        let mut lbar = Vec::with_capacity(labels.len());
        let mut counts = Vec::with_capacity(labels.len());
        for l in &labels {
            match self.labels.iter().position(|x| x == l) {
                Some(i) => {
                    lbar.push(self.lbar[i]);
                    counts.push(self.counts[i]);
                }
                None => {
                    lbar.push(None);
                    counts.push(0);
                }
            }
        }
        ExpectedDurations {
            labels,
            lbar,
            counts,
            overall_rate_mean: self.overall_rate_mean,
        }
    }

    fn matches(&self, inventory: &PhonemeInventory) -> bool {
        self.labels.len() == inventory.len()
            && self
                .labels
                .iter()
                .zip(inventory.classes())
                .all(|(l, c)| *l == c.label())
    }

    /// Writes a `# overall_rate_mean` header and `class<TAB>mean<TAB>count` rows.
    /// Unobserved classes are written with mean `nan`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# overall_rate_mean\t{}", self.overall_rate_mean)?;
        for ((l, m), c) in self.labels.iter().zip(&self.lbar).zip(&self.counts) {
            match m {
                Some(m) => writeln!(w, "{l}\t{m}\t{c}")?,
                None => writeln!(w, "{l}\tnan\t{c}")?,
            }
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<ExpectedDurations> {
        let mut out = ExpectedDurations {
            labels: Vec::new(),
            lbar: Vec::new(),
            counts: Vec::new(),
            overall_rate_mean: f64::NAN,
        };
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix("# overall_rate_mean\t") {
                out.overall_rate_mean = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad overall_rate_mean"))?;
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(lineno, "expected class, mean, count"));
            }
            let mean: f64 = f[1].parse().map_err(|_| Error::parse(lineno, "bad mean"))?;
            let count: u64 = f[2]
                .parse()
                .map_err(|_| Error::parse(lineno, "bad count"))?;
            out.labels.push(f[0].to_string());
            out.lbar
                .push((mean.is_finite() && mean > 0.0).then_some(mean));
            out.counts.push(count);
        }
        if out.overall_rate_mean.is_nan() || out.overall_rate_mean <= 0.0 {
            return Err(Error::parse(1, "missing `# overall_rate_mean` header"));
        }
        Ok(out)
    }
}

/// Ratio of expected to actual total phone duration of an utterance.
/// Values above 1 mean faster than the reference average.
pub fn speech_rate(utterance: &Utterance, expected: &ExpectedDurations) -> Result<f64> {
    let mut expected_total = 0.0;
    let mut actual_total = 0.0;
    for p in &utterance.phones {
        let lbar = expected
            .lbar
            .get(p.class as usize)
            .copied()
            .flatten()
            .ok_or_else(|| {
                Error::UndefinedExpected(
                    expected
                        .labels
                        .get(p.class as usize)
                        .cloned()
                        .unwrap_or_else(|| format!("#{}", p.class)),
                )
            })?;
        expected_total += lbar;
        actual_total += p.duration;
    }
    if actual_total <= 0.0 {
        return Err(Error::InvalidUtterance {
            utterance: utterance.id.clone(),
            msg: "no phone duration".into(),
        });
    }
    Ok(expected_total / actual_total)
}

/// Rescales every utterance by a constant factor so its speech rate equals
/// `target` (default: `expected.overall_rate_mean`). Phone starts are
/// rescaled about the utterance's first phone so segments stay contiguous.
pub fn normalize_rate(
    corpus: &Corpus,
    expected: &ExpectedDurations,
    target: Option<f64>,
) -> Result<Corpus> {
    let aligned;
    let expected = if expected.matches(corpus.inventory()) {
        expected
    } else {
        aligned = expected.aligned_to(corpus.inventory());
        &aligned
    };
    let target = target.unwrap_or(expected.overall_rate_mean);
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::invalid(format!(
            "rate target must be positive, got {target}"
        )));
    }
    let mut out = Vec::with_capacity(corpus.len());
    for u in corpus.utterances() {
        let factor = speech_rate(u, expected)? / target;
        let origin = u.phones[0].start;
        let phones = u
            .phones
            .iter()
            .map(|p| Phone {
                class: p.class,
                start: origin + (p.start - origin) * factor,
                duration: p.duration * factor,
            })
            .collect();
        out.push(Utterance {
            id: u.id.clone(),
            speaker_id: u.speaker_id.clone(),
            phones,
        });
    }
    Corpus::new(corpus.inventory().clone(), out)
}
