//! Reference implementations used as test oracles. They follow the textbook
//! formulas directly and share no code with the library.
#![allow(dead_code)]

use durleak_core::{
    compute_eer, gen_corpus, score_trials, MetricConfig, MetricKind, SynthConfig, TrialSet,
};

/// 1 - cosine after the requested normalization, evaluated term by term.
pub fn rho1_oracle(a: &[f64], b: &[f64], norm: &str) -> f64 {
    let f = |v: &[f64]| -> Vec<f64> {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        match norm {
            "center" => v.iter().map(|x| x - mean).collect(),
            "divide-by-mean" => v.iter().map(|x| x / mean).collect(),
            _ => v.to_vec(),
        }
    };
    let (x, y) = (f(a), f(b));
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for i in 0..x.len() {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    1.0 - dot / (nx.sqrt() * ny.sqrt())
}

/// 1 - (1/N) sum min(a/b, b/a).
pub fn rho2_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let s: f64 = a.iter().zip(b).map(|(x, y)| f64::min(x / y, y / x)).sum();
    1.0 - s / n
}

fn far_frr(same: &[f64], diff: &[f64], t: f64) -> (f64, f64) {
    let fa = diff.iter().filter(|&&d| d < t).count() as f64 / diff.len() as f64;
    let fr = same.iter().filter(|&&s| s >= t).count() as f64 / same.len() as f64;
    (fa, fr)
}

/// O(n^2) sweep: every distinct score and +inf is tried as a threshold, each
/// operating point counted from scratch. The EER is where the ROC polyline
/// first meets FAR = FRR.
pub fn eer_oracle(same: &[f64], diff: &[f64]) -> f64 {
    let mut ts: Vec<f64> = same.iter().chain(diff).copied().collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    ts.push(f64::INFINITY);
    let points: Vec<(f64, f64)> = ts.iter().map(|&t| far_frr(same, diff, t)).collect();
    for w in points.windows(2) {
        let (f0, r0) = w[0];
        let (f1, r1) = w[1];
        let g0 = f0 - r0;
        let g1 = f1 - r1;
        if g1 >= 0.0 {
            if g0 >= 0.0 {
                return (f0 + r0) / 2.0;
            }
            let lambda = -g0 / (g1 - g0);
            let far = f0 + lambda * (f1 - f0);
            let frr = r0 + lambda * (r1 - r0);
            return (far + frr) / 2.0;
        }
    }
    unreachable!("FAR reaches 1 and FRR reaches 0 at +inf")
}

/// Fixed-step threshold sweep: (FAR + FRR) / 2 at the grid threshold that
/// minimizes |FAR - FRR|.
pub fn eer_grid_sweep(same: &[f64], diff: &[f64], step: f64) -> f64 {
    let lo = same
        .iter()
        .chain(diff)
        .cloned()
        .fold(f64::INFINITY, f64::min)
        - step;
    let hi = same
        .iter()
        .chain(diff)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        + 2.0 * step;
    let n = ((hi - lo) / step).ceil() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let (fa, fr) = far_frr(same, diff, lo + i as f64 * step);
        let gap = (fa - fr).abs();
        if gap < best.0 {
            best = (gap, (fa + fr) / 2.0);
        }
    }
    best.1
}

pub fn n_choose_2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Desk-scale synthetic corpus: 20 speakers x 40 utterances x 50 phones.
pub fn desk_config(seed: u64) -> SynthConfig {
    SynthConfig {
        n_speakers: 20,
        utts_per_speaker: 40,
        phones_per_utt: 50,
        seed,
        ..SynthConfig::default()
    }
}

/// Full pipeline EER for one synthetic corpus, all impostors used (k = S - 1).
pub fn pipeline_eer(cfg: &SynthConfig, m: usize, kind: MetricKind, min_instances: u32) -> f64 {
    let corpus = gen_corpus(cfg).unwrap();
    corpus_eer(&corpus, m, kind, min_instances, cfg.seed)
}

pub fn corpus_eer(
    corpus: &durleak_core::Corpus,
    m: usize,
    kind: MetricKind,
    min_instances: u32,
    seed: u64,
) -> f64 {
    let k = corpus.speakers().len() - 1;
    let set = TrialSet::generate(corpus, m, k, seed).unwrap();
    let metric = MetricConfig::new(kind).with_min_instances(min_instances);
    let report = score_trials(corpus, &set.trials, &metric, None).unwrap();
    let (same, diff) = report.split();
    compute_eer(&same, &diff).unwrap().eer
}
