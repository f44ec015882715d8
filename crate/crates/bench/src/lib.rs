//! Shared fixtures for the benchmarks.

use durleak_core::{gen_corpus, ingest, Corpus, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus(n_speakers: usize, utts_per_speaker: usize) -> Corpus {
    gen_corpus(&SynthConfig {
        n_speakers,
        utts_per_speaker,
        seed: 7,
        ..SynthConfig::default()
    })
    .expect("synthetic corpus")
}

pub fn ctm_bytes(corpus: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    ingest::write_ctm(corpus, &mut buf).expect("write ctm");
    buf
}

/// Two overlapping score populations, `n` each.
pub fn scores(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let same = (0..n).map(|_| rng.random::<f64>() * 0.8).collect();
    let diff = (0..n).map(|_| 0.2 + rng.random::<f64>() * 0.8).collect();
    (same, diff)
}
