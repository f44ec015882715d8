//! Seeded synthetic alignment corpora with controllable speaker duration
//! signatures, plus duration-level surrogates of two anonymization styles:
//! one that keeps phone durations and one that resynthesizes them.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Phone, Utterance};
use crate::error::{Error, Result};
use crate::inventory::{InventoryMode, PhonemeInventory};
use crate::rng;

/// Log-scale standard deviation of per-speaker median offsets at
/// `signature_strength = 1`.
pub const SIGNATURE_SPREAD: f64 = 0.3;

const MEDIAN_RANGE: (f64, f64) = (0.05, 0.15);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub phones_per_utt: usize,
    /// Scales the inter-speaker spread of per-class medians; 0 makes all
    /// speakers identical.
    pub signature_strength: f64,
    /// Within-speaker log-std of every phone duration.
    pub log_std: f64,
    /// Log-std of the per-speaker rate factor; 0 gives every speaker rate 1.
    pub rate_spread: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 20,
            utts_per_speaker: 40,
            phones_per_utt: 50,
            signature_strength: 0.5,
            log_std: 0.25,
            rate_spread: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_speakers == 0 || self.utts_per_speaker == 0 || self.phones_per_utt == 0 {
            return Err(Error::invalid("synthetic corpus counts must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.signature_strength) {
            return Err(Error::invalid("signature_strength must lie in [0, 1]"));
        }
        if !(self.log_std >= 0.0 && self.log_std.is_finite())
            || !(self.rate_spread >= 0.0 && self.rate_spread.is_finite())
        {
            return Err(Error::invalid(
                "log_std and rate_spread must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Generative duration model of one speaker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerModel {
    pub speaker_id: String,
    /// Median duration per class before the rate factor, seconds.
    pub medians: Vec<f64>,
    pub log_std: Vec<f64>,
    pub rate_factor: f64,
    /// Phone usage distribution, shared by all speakers.
    pub usage: Vec<f64>,
}

impl SpeakerModel {
    /// Mean duration of class `k`: median * rate * exp(sigma^2 / 2).
    pub fn mean_duration(&self, k: usize) -> f64 {
        self.medians[k] * self.rate_factor * (0.5 * self.log_std[k] * self.log_std[k]).exp()
    }

    fn sample_duration<R: Rng>(&self, k: usize, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.medians[k] * self.rate_factor * (self.log_std[k] * z).exp()
    }
}

fn speaker_name(s: usize) -> String {
    format!("spk{s:04}")
}

/// Builds the generating model of every speaker for `config`.
pub fn speaker_models(config: &SynthConfig, n_classes: usize) -> Result<Vec<SpeakerModel>> {
    config.validate()?;
    let mut pop = rng::stream(config.seed, "population", "");
    let base: Vec<f64> = (0..n_classes)
        .map(|_| pop.random_range(MEDIAN_RANGE.0..MEDIAN_RANGE.1))
        .collect();
    let mut ranks: Vec<usize> = (0..n_classes).collect();
    ranks.shuffle(&mut pop);
    let usage_raw: Vec<f64> = ranks.iter().map(|&r| 1.0 / (r as f64 + 1.0)).collect();
    let total: f64 = usage_raw.iter().sum();
    let usage: Vec<f64> = usage_raw.iter().map(|u| u / total).collect();

    Ok((0..config.n_speakers)
        .map(|s| {
            let id = speaker_name(s);
            let mut r = rng::stream(config.seed, "speaker", &id);
            let medians = base
                .iter()
                .map(|&b| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    b * (config.signature_strength * SIGNATURE_SPREAD * z).exp()
                })
                .collect();
            let z: f64 = StandardNormal.sample(&mut r);
            SpeakerModel {
                speaker_id: id,
                medians,
                log_std: vec![config.log_std; n_classes],
                rate_factor: (config.rate_spread * z).exp(),
                usage: usage.clone(),
            }
        })
        .collect())
}

fn lay_out(id: String, speaker_id: String, classes_durs: Vec<(u16, f64)>) -> Utterance {
    let mut t = 0.0;
    let phones = classes_durs
        .into_iter()
        .map(|(class, duration)| {
            let p = Phone {
                class,
                start: t,
                duration,
            };
            t += duration;
            p
        })
        .collect();
    Utterance {
        id,
        speaker_id,
        phones,
    }
}

/// Generates a corpus over the stock base ARPAbet inventory.
///
/// When `phones_per_utt` is at least the inventory size, each utterance
/// contains every class once before the remaining phones are drawn from the
/// shared usage distribution; the phone order is then shuffled.
pub fn gen_corpus(config: &SynthConfig) -> Result<Corpus> {
    let inventory = PhonemeInventory::arpabet(InventoryMode::Base);
    let n = inventory.len();
    let models = speaker_models(config, n)?;
    let usage = WeightedIndex::new(&models[0].usage).map_err(|e| Error::invalid(e.to_string()))?;
    let utterances: Vec<Utterance> = models
        .par_iter()
        .flat_map_iter(|model| {
            let usage = &usage;
            (0..config.utts_per_speaker).map(move |u| {
                let id = format!("{}-utt{u:04}", model.speaker_id);
                let mut r = rng::stream(config.seed, "utterance", &id);
                let mut classes: Vec<usize> = Vec::with_capacity(config.phones_per_utt);
                if config.phones_per_utt >= n {
                    classes.extend(0..n);
                }
                while classes.len() < config.phones_per_utt {
                    classes.push(usage.sample(&mut r));
                }
                classes.shuffle(&mut r);
                let durs = classes
                    .into_iter()
                    .map(|k| (k as u16, model.sample_duration(k, &mut r)))
                    .collect();
                lay_out(id, model.speaker_id.clone(), durs)
            })
        })
        .collect();

    let mut observed = vec![false; n];
    for u in &utterances {
        for p in &u.phones {
            observed[p.class as usize] = true;
        }
    }
    let (restricted, remap) = inventory.restrict(&observed);
    let utterances = utterances
        .into_iter()
        .map(|mut u| {
            for p in &mut u.phones {
                p.class = remap[p.class as usize].expect("observed");
            }
            u
        })
        .collect();
    Corpus::new(restricted, utterances)
}

/// Surrogate for an anonymizer that keeps phone durations: timing is left
/// bit-identical and utterance ids get an order-preserving prefix.
pub fn apply_sas1_surrogate(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let prefix = format!("a1-{seed:016x}-");
    corpus.map_utterances(|u| Utterance {
        id: format!("{prefix}{}", u.id),
        ..u.clone()
    })
}

/// Surrogate for an anonymizer that resynthesizes timing.
///
/// Each duration is replaced by `exp(r ln d + (1 - r) ln d_shared)`, where
/// `d_shared` is drawn from a per-class log-normal fitted to the whole
/// corpus and therefore carries no speaker information. `r = 1` returns the
/// corpus unchanged.
pub fn apply_sas2_surrogate(corpus: &Corpus, residual_strength: f64, seed: u64) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&residual_strength) {
        return Err(Error::invalid("residual_strength must lie in [0, 1]"));
    }
    if residual_strength == 1.0 {
        return Ok(corpus.clone());
    }
    let n = corpus.n_classes();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut count = vec![0usize; n];
    for u in corpus.utterances() {
        for p in &u.phones {
            let l = p.duration.ln();
            let k = p.class as usize;
            sum[k] += l;
            sum_sq[k] += l * l;
            count[k] += 1;
        }
    }
    let shared: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            if count[k] == 0 {
                return (0.0, 0.0);
            }
            let mean = sum[k] / count[k] as f64;
            let var = (sum_sq[k] / count[k] as f64 - mean * mean).max(0.0);
            (mean, var.sqrt())
        })
        .collect();

    let utterances: Vec<Utterance> = corpus
        .utterances()
        .par_iter()
        .map(|u| {
            let mut r = rng::stream(seed, "sas2", &u.id);
            let durs = u
                .phones
                .iter()
                .map(|p| {
                    let (mean, sd) = shared[p.class as usize];
                    let z: f64 = StandardNormal.sample(&mut r);
                    let shared_log = mean + sd * z;
                    let blended = residual_strength * p.duration.ln()
                        + (1.0 - residual_strength) * shared_log;
                    (p.class, blended.exp())
                })
                .collect::<Vec<_>>();
            let mut out = lay_out(u.id.clone(), u.speaker_id.clone(), durs);
            let origin = u.phones[0].start;
            for p in &mut out.phones {
                p.start += origin;
            }
            out
        })
        .collect();
    Corpus::new(corpus.inventory().clone(), utterances)
}
