//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned below.

mod common;

use std::fs::File;
use std::io::BufReader;
use std::time::{Duration, Instant};

use common::*;
use durleak_core::{
    apply_sas1_surrogate, apply_sas2_surrogate, build_grid, compute_eer, expected_durations,
    gen_corpus, normalize_rate, rate_distance, rho1, rho2, speech_rate,
    trials::{gen_diff_speaker, gen_same_speaker},
    Corpus, GridSpec, MetricConfig, MetricKind, Normalization, SynthConfig, TrialLabel, TrialSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const METRIC_TOL: f64 = 1e-12;
const METRIC_CASES: usize = 10_000;
const METRIC_BUDGET: Duration = Duration::from_secs(10);

const EER_TOL: f64 = 1e-9;
const EER_SETS: usize = 500;
const EER_MAX_SCORES: usize = 1000;
const EER_SWEEP_STEP: f64 = 1e-4;
const EER_SWEEP_TOL: f64 = 1e-6;
const EER_BUDGET: Duration = Duration::from_secs(60);

const SEEDS: u64 = 20;
const CHANCE: f64 = 0.5;
const CHANCE_TOL: f64 = 0.05;
const SYNTH_BUDGET: Duration = Duration::from_secs(120);

/// Signature strength used as the "intermediate" setting.
const TREND_STRENGTH: f64 = 0.2;
const TREND_MIN_DROP: f64 = 0.10;

/// Between-speaker log-std of the speech-rate factor for the rate-only corpus.
const RATE_SPREAD: f64 = 0.4;
const RATE_M: usize = 5;
const RATE_RAW_MAX: f64 = 0.15;
const RATE_TARGET_TOL: f64 = 1e-9;

const SAS_STRENGTH: f64 = 0.5;
const SAS_M: usize = 5;
const SAS_RESIDUAL: f64 = 0.3;

const LIBRI_ENV: &str = "DURLEAK_LIBRISPEECH_CORPUS";
const LIBRI_TARGET: f64 = 0.025;
const LIBRI_TOL: f64 = 0.005;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn within_budget(v: Verdict, took: Duration, budget: Duration) -> Verdict {
    match v {
        Verdict::Pass(d) if took > budget => {
            Verdict::Fail(format!("{d}; took {took:.1?}, budget {budget:?}"))
        }
        v => v,
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn metric_suite() -> Verdict {
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if !close(got, want, METRIC_TOL) {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    };
    let c = Normalization::Center;
    expect(
        "rho1 opposite",
        rho1(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0], c).unwrap(),
        2.0,
    );
    let (a, b) = ([1.0, 2.0, 3.0, 2.0], [2.0, 1.0, 2.0, 3.0]);
    expect(
        "rho1 oracle",
        rho1(&a, &b, c).unwrap(),
        rho1_oracle(&a, &b, "center"),
    );
    expect(
        "rho1 sym",
        rho1(&b, &a, c).unwrap(),
        rho1(&a, &b, c).unwrap(),
    );
    expect("rho2 swap", rho2(&[0.1, 0.2], &[0.2, 0.1]).unwrap(), 0.5);
    expect("rho2 N=1", rho2(&[0.1], &[0.05]).unwrap(), 0.5);
    expect("rate 1/0.5", rate_distance(1.0, 0.5).unwrap(), 0.5);
    expect("rate 0.9/1.2", rate_distance(0.9, 1.2).unwrap(), 0.25);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let norms = [
        (Normalization::Center, "center"),
        (Normalization::DivideByMean, "divide-by-mean"),
        (Normalization::None, "none"),
    ];
    for case in 0..METRIC_CASES {
        let n = rng.random_range(2..60);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.4)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.4)).collect();
        let (ra, rb) = (rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));

        let r2 = rho2(&a, &b).unwrap();
        if r2.to_bits() != rho2(&b, &a).unwrap().to_bits() || !(0.0..1.0).contains(&r2) {
            failures.push(format!("case {case}: rho2 symmetry/range {r2}"));
        }
        if !close(r2, rho2_oracle(&a, &b), METRIC_TOL) {
            failures.push(format!("case {case}: rho2 {r2} vs oracle"));
        }
        let scale = rng.random_range(0.1..10.0);
        let sa: Vec<f64> = a.iter().map(|x| x * scale).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * scale).collect();
        if !close(rho2(&sa, &sb).unwrap(), r2, METRIC_TOL) {
            failures.push(format!("case {case}: rho2 joint scaling"));
        }
        if rho2(&a, &a).unwrap() != 0.0 {
            failures.push(format!("case {case}: rho2 identity"));
        }

        let (norm, name) = norms[case % norms.len()];
        let r1 = rho1(&a, &b, norm).unwrap();
        if r1.to_bits() != rho1(&b, &a, norm).unwrap().to_bits() || !(0.0..=2.0).contains(&r1) {
            failures.push(format!("case {case}: rho1 symmetry/range {r1}"));
        }
        if !close(r1, rho1_oracle(&a, &b, name), METRIC_TOL) {
            failures.push(format!("case {case}: rho1 {r1} vs oracle"));
        }
        if norm == Normalization::Center {
            let shift = rng.random_range(-0.005..0.5);
            let ta: Vec<f64> = a.iter().map(|x| x * scale + shift).collect();
            let tb: Vec<f64> = b.iter().map(|x| x * scale + shift).collect();
            if !close(rho1(&ta, &tb, norm).unwrap(), r1, 1e-9) {
                failures.push(format!("case {case}: rho1 affine invariance"));
            }
        }

        let rd = rate_distance(ra, rb).unwrap();
        if rd.to_bits() != rate_distance(rb, ra).unwrap().to_bits()
            || !(0.0..1.0).contains(&rd)
            || !close(rd, 1.0 - f64::min(ra / rb, rb / ra), METRIC_TOL)
        {
            failures.push(format!("case {case}: rate_distance {rd}"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("7 hand values and {METRIC_CASES} random cases within {METRIC_TOL:e}")
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    )
}

fn eer_oracle_equivalence() -> Verdict {
    let worst = (0..EER_SETS as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let ns = rng.random_range(1..=EER_MAX_SCORES / 2);
            let nd = rng.random_range(1..=EER_MAX_SCORES / 2);
            let shift: f64 = rng.random_range(-0.3..0.5);
            // A third of the sets are coarsely quantized to force ties.
            let quant = if i % 3 == 0 { 50.0 } else { 0.0 };
            let mut draw = |off: f64| {
                let x: f64 = rng.random::<f64>() + off;
                if quant > 0.0 {
                    (x * quant).round() / quant
                } else {
                    x
                }
            };
            let same: Vec<f64> = (0..ns).map(|_| draw(0.0)).collect();
            let diff: Vec<f64> = (0..nd).map(|_| draw(shift)).collect();
            (compute_eer(&same, &diff).unwrap().eer - eer_oracle(&same, &diff)).abs()
        })
        .reduce(|| 0.0, f64::max);

    let same = [0.1, 0.4, 0.35];
    let diff = [0.3, 0.5, 0.9];
    let got = compute_eer(&same, &diff).unwrap().eer;
    let sweep = eer_grid_sweep(&same, &diff, EER_SWEEP_STEP);
    let example_ok = (got - sweep).abs() <= EER_SWEEP_TOL && close(got, 1.0 / 3.0, 1e-15);
    check(
        worst <= EER_TOL && example_ok,
        format!(
            "{EER_SETS} sets, max |diff| {worst:.2e} (tol {EER_TOL:e}); worked example {got:.6} vs sweep {sweep:.6}"
        ),
    )
}

fn mean_over_seeds<F>(f: F) -> f64
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    (0..SEEDS).into_par_iter().map(f).sum::<f64>() / SEEDS as f64
}

fn chance_and_separability() -> Verdict {
    let chance: Vec<(usize, f64)> = [1usize, 5]
        .iter()
        .map(|&m| {
            let mean = mean_over_seeds(|seed| {
                let cfg = SynthConfig {
                    signature_strength: 0.0,
                    ..desk_config(seed)
                };
                pipeline_eer(&cfg, m, MetricKind::Rho2, 1)
            });
            (m, mean)
        })
        .collect();
    let chance_ok = chance.iter().all(|(_, e)| (e - CHANCE).abs() <= CHANCE_TOL);

    let worst_separable = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let cfg = SynthConfig {
                signature_strength: 1.0,
                log_std: 0.0,
                ..desk_config(seed)
            };
            let corpus = gen_corpus(&cfg).unwrap();
            let mut worst: f64 = 0.0;
            for m in [1, 5, 20] {
                for kind in [MetricKind::Rho1, MetricKind::Rho2] {
                    worst = worst.max(corpus_eer(&corpus, m, kind, 1, seed));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    check(
        chance_ok && worst_separable == 0.0,
        format!(
            "strength 0: mean EER {} (want {CHANCE} +- {CHANCE_TOL}); deterministic signatures: max EER {worst_separable}",
            chance
                .iter()
                .map(|(m, e)| format!("m={m} {e:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn trend() -> Verdict {
    let ms = [1usize, 5, 20];
    let means: Vec<f64> = ms
        .iter()
        .map(|&m| {
            mean_over_seeds(|seed| {
                let cfg = SynthConfig {
                    signature_strength: TREND_STRENGTH,
                    ..desk_config(seed)
                };
                pipeline_eer(&cfg, m, MetricKind::Rho2, 1)
            })
        })
        .collect();
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let drop = means[0] - means[2];
    check(
        decreasing && drop >= TREND_MIN_DROP,
        format!(
            "strength {TREND_STRENGTH}: mean EER m=1 {:.1}%, m=5 {:.1}%, m=20 {:.1}%; drop {:.1} points (need >= {:.0})",
            100.0 * means[0],
            100.0 * means[1],
            100.0 * means[2],
            100.0 * drop,
            100.0 * TREND_MIN_DROP
        ),
    )
}

fn rate_normalization() -> Verdict {
    let results: Vec<(f64, f64, f64)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let cfg = SynthConfig {
                signature_strength: 0.0,
                rate_spread: RATE_SPREAD,
                ..desk_config(seed)
            };
            let corpus = gen_corpus(&cfg).unwrap();
            let raw = corpus_eer(&corpus, RATE_M, MetricKind::Rho2, 1, seed);
            let expected = expected_durations(&corpus).unwrap();
            let normed = normalize_rate(&corpus, &expected, None).unwrap();
            let target = expected.overall_rate_mean;
            let worst_rate = normed
                .utterances()
                .iter()
                .map(|u| (speech_rate(u, &expected).unwrap() - target).abs() / target)
                .fold(0.0, f64::max);
            let norm = corpus_eer(&normed, RATE_M, MetricKind::Rho2, 1, seed);
            (raw, norm, worst_rate)
        })
        .collect();
    let n = results.len() as f64;
    let raw = results.iter().map(|r| r.0).sum::<f64>() / n;
    let norm = results.iter().map(|r| r.1).sum::<f64>() / n;
    let worst_rate = results.iter().map(|r| r.2).fold(0.0, f64::max);
    check(
        raw < RATE_RAW_MAX && (norm - CHANCE).abs() <= CHANCE_TOL && worst_rate <= RATE_TARGET_TOL,
        format!(
            "rate spread {RATE_SPREAD}, m={RATE_M}: raw EER {raw:.3} (< {RATE_RAW_MAX}), normalized {norm:.3} ({CHANCE} +- {CHANCE_TOL}); max rate error {worst_rate:.1e}"
        ),
    )
}

fn sas_surrogates() -> Verdict {
    let results: Vec<(bool, f64, f64, f64, f64)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let cfg = SynthConfig {
                signature_strength: SAS_STRENGTH,
                ..desk_config(seed)
            };
            let corpus = gen_corpus(&cfg).unwrap();
            let spec = GridSpec {
                metric: MetricConfig::new(MetricKind::Rho2),
                m_values: vec![1, SAS_M],
                min_instance_values: vec![1, 3],
                k_per_speaker: 19,
                seed,
            };
            let grid = build_grid(&corpus, &spec, None).unwrap();
            let sas1 = apply_sas1_surrogate(&corpus, seed).unwrap();
            let grid1 = build_grid(&sas1, &spec, None).unwrap();
            let identical = grid
                .cells
                .iter()
                .zip(&grid1.cells)
                .all(|(a, b)| a.result == b.result && a.result.is_some());

            let at = |r: f64| {
                let c = apply_sas2_surrogate(&corpus, r, seed ^ 0x5a5).unwrap();
                corpus_eer(&c, SAS_M, MetricKind::Rho2, 1, seed)
            };
            let orig = grid.eer(SAS_M, 1).unwrap();
            (identical, orig, at(0.0), at(SAS_RESIDUAL), at(1.0))
        })
        .collect();
    let n = results.len() as f64;
    let mean = |f: fn(&(bool, f64, f64, f64, f64)) -> f64| results.iter().map(f).sum::<f64>() / n;
    let sas1_ok = results.iter().all(|r| r.0);
    let identity_ok = results.iter().all(|r| r.4.to_bits() == r.1.to_bits());
    let (orig, chance, mid) = (mean(|r| r.1), mean(|r| r.2), mean(|r| r.3));
    check(
        sas1_ok && identity_ok && chance > mid && mid > orig,
        format!(
            "sas1 grid unchanged: {sas1_ok}; sas2 r=1 identical: {identity_ok}; mean EER r=0 {:.1}% > r={SAS_RESIDUAL} {:.1}% > original {:.1}%",
            100.0 * chance,
            100.0 * mid,
            100.0 * orig
        ),
    )
}

fn uneven_corpus(n_speakers: usize) -> Corpus {
    let full = gen_corpus(&SynthConfig {
        n_speakers,
        utts_per_speaker: 7,
        phones_per_utt: 8,
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    // Speaker s keeps 1 + s % 7 utterances.
    let kept: Vec<_> = full
        .speakers()
        .values()
        .enumerate()
        .flat_map(|(s, idx)| idx[..1 + s % 7].to_vec())
        .map(|i| full.utterance(i).clone())
        .collect();
    Corpus::new(full.inventory().clone(), kept).unwrap()
}

fn trial_counts() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for (speakers, want) in [(2338usize, 233_800usize), (921, 92_100)] {
        let corpus = gen_corpus(&SynthConfig {
            n_speakers: speakers,
            utts_per_speaker: 2,
            phones_per_utt: 3,
            seed: 1,
            ..SynthConfig::default()
        })
        .unwrap();
        let diff = gen_diff_speaker(&corpus, 1, 100, 9).unwrap();
        let cross = diff.iter().all(|t| {
            corpus.utterance(t.side_a[0]).speaker_id != corpus.utterance(t.side_b[0]).speaker_id
        });
        ok &= diff.len() == want && cross;
        notes.push(format!(
            "{speakers} speakers -> {} (expected {want})",
            diff.len()
        ));
    }

    let corpus = uneven_corpus(140);
    let utts = corpus.utterances();
    let mut pairs = 0;
    for i in 0..utts.len() {
        for j in i + 1..utts.len() {
            if utts[i].speaker_id == utts[j].speaker_id {
                pairs += 1;
            }
        }
    }
    let same = gen_same_speaker(&corpus, 1, 4).unwrap();
    let diff = gen_diff_speaker(&corpus, 1, 100, 4).unwrap();
    ok &= same.len() == pairs && diff.len() == 100 * 140;
    let chunk_pairs: usize = corpus
        .speakers()
        .values()
        .map(|v| n_choose_2(v.len() / 2))
        .sum();
    let set = TrialSet::generate(&corpus, 2, 100, 4).unwrap();
    ok &= set.count(TrialLabel::Same) == chunk_pairs;
    notes.push(format!(
        "uneven 140 speakers: same m=1 {} (pair oracle {pairs}), m=2 {} (chunk oracle {chunk_pairs}), diff {}",
        same.len(),
        set.count(TrialLabel::Same),
        diff.len()
    ));
    check(ok, notes.join("; "))
}

fn librispeech() -> Verdict {
    let Ok(path) = std::env::var(LIBRI_ENV) else {
        return Verdict::Skip(format!(
            "integration-scale; set {LIBRI_ENV} to a corpus cache built from LibriSpeech alignments"
        ));
    };
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) => return Verdict::Fail(format!("{path}: {e}")),
    };
    let corpus = match Corpus::read_cache(BufReader::new(file)) {
        Ok((c, _)) => c,
        Err(e) => return Verdict::Fail(format!("{path}: {e}")),
    };
    let spec = GridSpec {
        metric: MetricConfig::new(MetricKind::Rho2),
        m_values: vec![60],
        min_instance_values: vec![20],
        k_per_speaker: 100,
        seed: 0,
    };
    match build_grid(&corpus, &spec, None) {
        Ok(g) => {
            let eer = g.eer(60, 20).unwrap();
            check(
                (eer - LIBRI_TARGET).abs() <= LIBRI_TOL,
                format!(
                    "N={} m=60 min=20: EER {:.2}% (target {:.1}% +- {:.1})",
                    corpus.n_classes(),
                    100.0 * eer,
                    100.0 * LIBRI_TARGET,
                    100.0 * LIBRI_TOL
                ),
            )
        }
        Err(e) => Verdict::Fail(e.to_string()),
    }
}

type Criterion = (&'static str, fn() -> Verdict, Option<Duration>);

fn main() {
    let criteria: [Criterion; 8] = [
        ("metric unit suite", metric_suite, Some(METRIC_BUDGET)),
        (
            "EER oracle equivalence",
            eer_oracle_equivalence,
            Some(EER_BUDGET),
        ),
        (
            "chance and separability extremes",
            chance_and_separability,
            Some(SYNTH_BUDGET),
        ),
        ("EER decreases with utterances per trial", trend, None),
        ("rate normalization", rate_normalization, Some(SYNTH_BUDGET)),
        ("SAS surrogate ordering", sas_surrogates, None),
        ("trial counts", trial_counts, None),
        (
            "LibriSpeech rho2 grid cell (m=60, min=20)",
            librispeech,
            None,
        ),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let verdict = run();
        let took = start.elapsed();
        let verdict = match budget {
            Some(b) => within_budget(verdict, took, b),
            None => verdict,
        };
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} {name}: {detail} [{:.2}s]", took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
