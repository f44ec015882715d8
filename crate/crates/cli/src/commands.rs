use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use durleak_core::{
    apply_sas1_surrogate, apply_sas2_surrogate, build_corpus, build_grid, expected_durations,
    gen_corpus, ingest, normalize_rate, parse_ctm, parse_textgrid, parse_utt2spk, speech_rate,
    Corpus, DurationProfile, EerGrid, Error, ExpectedDurations, GridSpec, MetricConfig, MetricKind,
    PhonemeInventory, Segment, TrialLabel, TrialSet,
};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Anonymize, Format, RunConfig};

pub enum Failure {
    /// Bad configuration or arguments (exit 1).
    Usage(anyhow::Error),
    /// Unreadable or inconsistent data (exit 2).
    Data(anyhow::Error),
}

type Outcome<T = ()> = Result<T, Failure>;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Failure::Usage(e.into()),
            e => Failure::Data(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

/// Output directory held for the duration of one command.
struct RunDir {
    path: PathBuf,
    lock: PathBuf,
    header: String,
}

impl RunDir {
    fn open(cfg: &RunConfig) -> Outcome<RunDir> {
        let path = cfg.out.clone();
        fs::create_dir_all(&path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(Failure::Data)?;
        let lock = path.join(".durleak.lock");
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(usage(format!(
                    "{} is in use by another run (remove {} if it is stale)",
                    path.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(e.into()),
        }
        let dir = RunDir {
            path,
            lock,
            header: format!(
                "durleak {} config={} seed={}",
                env!("CARGO_PKG_VERSION"),
                cfg.hash(),
                cfg.seed
            ),
        };
        fs::write(dir.file("run.conf"), cfg.render())?;
        Ok(dir)
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    fn create(&self, name: &str) -> Outcome<BufWriter<File>> {
        let p = self.file(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        let f = File::create(&p)
            .with_context(|| format!("creating {}", p.display()))
            .map_err(Failure::Data)?;
        Ok(BufWriter::new(f))
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::Data)
}

fn load_inventory(cfg: &RunConfig) -> Outcome<PhonemeInventory> {
    match &cfg.inventory {
        None => Ok(PhonemeInventory::arpabet(cfg.mode)),
        Some(p) => PhonemeInventory::from_reader(open(p)?, cfg.mode)
            .with_context(|| format!("reading inventory {}", p.display()))
            .map_err(Failure::Data),
    }
}

fn files_with_ext(dir: &Path, ext: &str) -> Outcome<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        let matches = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case(ext));
        if p.is_file() && matches {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn read_segments(cfg: &RunConfig) -> Outcome<Vec<Segment>> {
    let mut ctm_files = Vec::new();
    for p in &cfg.ctm {
        if p.is_dir() {
            ctm_files.extend(files_with_ext(p, "ctm")?);
        } else {
            ctm_files.push(p.clone());
        }
    }
    let grids = match &cfg.textgrid_dir {
        Some(d) => files_with_ext(d, "TextGrid")?,
        None => Vec::new(),
    };
    if ctm_files.is_empty() && grids.is_empty() {
        return Err(usage("no alignment files found"));
    }

    let parsed_ctm: Vec<Vec<Segment>> = ctm_files
        .par_iter()
        .map(|p| {
            parse_ctm(open(p)?)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(Failure::Data)
        })
        .collect::<Outcome<_>>()?;
    let parsed_grids: Vec<Vec<Segment>> = grids
        .par_iter()
        .map(|p| {
            let utt = p
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| usage(format!("bad file name {}", p.display())))?;
            parse_textgrid(open(p)?, utt, &cfg.tier)
                .with_context(|| format!("parsing {}", p.display()))
                .map_err(Failure::Data)
        })
        .collect::<Outcome<_>>()?;
    info!(
        "read {} CTM and {} TextGrid files",
        ctm_files.len(),
        grids.len()
    );
    Ok(parsed_ctm
        .into_iter()
        .chain(parsed_grids)
        .flatten()
        .collect())
}

fn ingest_inputs(cfg: &RunConfig) -> Outcome<Corpus> {
    let inventory = load_inventory(cfg)?;
    let segments = read_segments(cfg)?;
    let u2s_path = cfg
        .utt2spk
        .as_ref()
        .ok_or_else(|| usage("utt2spk is required to ingest alignments"))?;
    let utt2spk: BTreeMap<String, String> = parse_utt2spk(open(u2s_path)?)
        .with_context(|| format!("parsing {}", u2s_path.display()))
        .map_err(Failure::Data)?;
    let (corpus, report) = build_corpus(&segments, &utt2spk, &inventory)?;
    info!(
        "{} utterances, {} speakers, {} classes; {} segments mapped, {} excluded, {} utterances dropped",
        corpus.len(),
        corpus.speakers().len(),
        corpus.n_classes(),
        report.mapped,
        report.excluded,
        report.dropped_utterances
    );
    let idle = ingest::speakers_without_data(&corpus, &utt2spk);
    if !idle.is_empty() {
        warn!("{} speakers in utt2spk have no alignments", idle.len());
    }
    Ok(corpus)
}

/// Reads the configured cache, falling back to the alignment inputs when the
/// cache is absent or was written by another format version.
fn load_corpus(cfg: &RunConfig) -> Outcome<Corpus> {
    if let Some(path) = &cfg.corpus {
        if path.exists() {
            match Corpus::read_cache(open(path)?) {
                Ok((c, _)) => return Ok(c),
                Err(Error::CacheVersion { found, expected }) if cfg.has_alignment_inputs() => {
                    warn!(
                        "{} has cache version {found}, expected {expected}; re-ingesting",
                        path.display()
                    );
                }
                Err(e) => {
                    return Err(Failure::Data(
                        anyhow::Error::new(e).context(format!("reading {}", path.display())),
                    ))
                }
            }
        }
    }
    if cfg.has_alignment_inputs() {
        ingest_inputs(cfg)
    } else {
        Err(usage(
            "no corpus: set `corpus`, or `ctm`/`textgrid_dir` together with `utt2spk`",
        ))
    }
}

/// Reference expected durations: the configured table, else estimated from `corpus`.
fn reference(cfg: &RunConfig, corpus: &Corpus) -> Outcome<ExpectedDurations> {
    match &cfg.expected {
        Some(p) => ExpectedDurations::read_tsv(open(p)?)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(Failure::Data),
        None => Ok(expected_durations(corpus)?),
    }
}

fn write_cache(dir: &RunDir, name: &str, corpus: &Corpus) -> Outcome {
    let mut w = dir.create(name)?;
    corpus.write_cache(&mut w, &dir.header)?;
    w.flush()?;
    Ok(())
}

fn write_ctm(dir: &RunDir, name: &str, corpus: &Corpus) -> Outcome {
    let mut w = dir.create(name)?;
    writeln!(w, ";; {}", dir.header)?;
    ingest::write_ctm(corpus, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn ingest(cfg: &RunConfig) -> Outcome {
    if !cfg.has_alignment_inputs() {
        return Err(usage("ingest needs `ctm` or `textgrid_dir`, and `utt2spk`"));
    }
    let dir = RunDir::open(cfg)?;
    let corpus = ingest_inputs(cfg)?;
    write_cache(&dir, "corpus.bin", &corpus)?;
    info!("wrote {}", dir.file("corpus.bin").display());
    Ok(())
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn stats(cfg: &RunConfig) -> Outcome {
    let dir = RunDir::open(cfg)?;
    let corpus = load_corpus(cfg)?;
    let own = expected_durations(&corpus)?;
    let mut w = dir.create("expected.tsv")?;
    writeln!(w, "# {}", dir.header)?;
    own.write_tsv(&mut w)?;
    w.flush()?;

    let reference = match &cfg.expected {
        Some(_) => reference(cfg, &corpus)?,
        None => own,
    };
    let min_instances = cfg.min_instances[0];
    let inv = corpus.inventory();
    let mut summary = dir.create("speakers.tsv")?;
    writeln!(summary, "# {}", dir.header)?;
    writeln!(
        summary,
        "speaker\tutterances\tphones\tmean_rate\tfallback_classes"
    )?;
    for (spk, idx) in corpus.speakers() {
        let profile = DurationProfile::from_group(&corpus, idx, min_instances)?;
        let mut w = dir.create(&format!("profiles/{}.tsv", file_safe(spk)))?;
        writeln!(w, "# {} min_instances={min_instances}", dir.header)?;
        profile.write_tsv(inv, &mut w)?;
        w.flush()?;

        let phones: usize = idx.iter().map(|&i| corpus.utterance(i).phones.len()).sum();
        let mut rate = 0.0;
        for &i in idx {
            rate += speech_rate(corpus.utterance(i), &reference)?;
        }
        rate /= idx.len() as f64;
        let fallback = profile.filled.iter().filter(|&&f| f).count();
        writeln!(
            summary,
            "{spk}\t{}\t{phones}\t{rate:.6}\t{fallback}",
            idx.len()
        )?;
    }
    summary.flush()?;
    info!(
        "wrote stats for {} speakers to {}",
        corpus.speakers().len(),
        dir.path.display()
    );
    Ok(())
}

pub fn trials(cfg: &RunConfig) -> Outcome {
    let dir = RunDir::open(cfg)?;
    let corpus = load_corpus(cfg)?;
    for &m in &cfg.m_values {
        let set = TrialSet::generate(&corpus, m, cfg.k_per_speaker, cfg.seed)?;
        let name = format!("trials_m{m}.tsv");
        let mut w = dir.create(&name)?;
        writeln!(w, "# {} m={m}", dir.header)?;
        durleak_core::trials::write_trials(&corpus, &set.trials, &mut w)?;
        w.flush()?;
        info!(
            "m={m}: {} same-speaker, {} different-speaker trials",
            set.count(TrialLabel::Same),
            set.count(TrialLabel::Different)
        );
    }
    Ok(())
}

fn grid_json(cfg: &RunConfig, dir: &RunDir, grid: &EerGrid) -> serde_json::Value {
    let cells: Vec<_> = grid
        .cells
        .iter()
        .map(|c| {
            json!({
                "m": c.m,
                "min_instances": c.min_instances,
                "eer": c.result.map(|r| r.eer),
                "threshold": c.result.map(|r| r.threshold),
                "n_same": c.result.map(|r| r.n_same),
                "n_diff": c.result.map(|r| r.n_diff),
                "excluded": c.excluded,
            })
        })
        .collect();
    json!({
        "meta": {
            "tool": dir.header,
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "k_per_speaker": cfg.k_per_speaker,
            "rate_norm": cfg.rate_norm,
        },
        "metric": grid.metric.kind.to_string(),
        "norm": grid.metric.norm.to_string(),
        "rows": grid.rows,
        "cols": grid.cols,
        "cells": cells,
    })
}

pub fn grid(cfg: &RunConfig) -> Outcome {
    let dir = RunDir::open(cfg)?;
    let mut corpus = load_corpus(cfg)?;
    let needs_reference = cfg.rate_norm || cfg.metric == MetricKind::Rate;
    let reference = if needs_reference {
        Some(reference(cfg, &corpus)?)
    } else {
        None
    };
    if cfg.rate_norm {
        if let Some(r) = &reference {
            corpus = normalize_rate(&corpus, r, cfg.rate_target)?;
        }
    }
    // The rate metric has no per-class statistics, so the column axis collapses.
    let cols = if cfg.metric == MetricKind::Rate {
        vec![cfg.min_instances[0]]
    } else {
        cfg.min_instances.clone()
    };
    let mut metric = MetricConfig::new(cfg.metric);
    metric.norm = cfg.norm;
    let spec = GridSpec {
        metric,
        m_values: cfg.m_values.clone(),
        min_instance_values: cols,
        k_per_speaker: cfg.k_per_speaker,
        seed: cfg.seed,
    };
    let grid = build_grid(&corpus, &spec, reference.as_ref())?;

    let mut name = format!("grid_{}_{}", cfg.metric, corpus.inventory().mode());
    if cfg.rate_norm {
        name.push_str("_ratenorm");
    }
    name.push('.');
    name.push_str(cfg.format.ext());
    let mut w = dir.create(&name)?;
    match cfg.format {
        Format::Tsv => {
            writeln!(w, "# {} metric={}", dir.header, cfg.metric)?;
            grid.write_tsv(&mut w)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &grid_json(cfg, &dir, &grid))
                .map_err(|e| Failure::Data(e.into()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;

    let mut table = Vec::new();
    grid.write_tsv(&mut table)?;
    print!("{}", String::from_utf8_lossy(&table));
    let excluded: usize = grid.cells.iter().map(|c| c.excluded).sum();
    if excluded > 0 {
        warn!("{excluded} trials excluded for degenerate profiles");
    }
    info!("wrote {}", dir.file(&name).display());
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Outcome {
    let dir = RunDir::open(cfg)?;
    let mut corpus = gen_corpus(&cfg.synth_config())?;
    corpus = match cfg.anonymize {
        Anonymize::None => corpus,
        Anonymize::Sas1 => apply_sas1_surrogate(&corpus, cfg.seed)?,
        Anonymize::Sas2 => apply_sas2_surrogate(&corpus, cfg.sas2_residual, cfg.seed)?,
    };
    write_ctm(&dir, "corpus.ctm", &corpus)?;
    let mut w = dir.create("utt2spk")?;
    writeln!(w, ";; {}", dir.header)?;
    ingest::write_utt2spk(&corpus, &mut w)?;
    w.flush()?;
    info!(
        "wrote {} utterances from {} speakers to {}",
        corpus.len(),
        corpus.speakers().len(),
        dir.path.display()
    );
    Ok(())
}

pub fn rate_norm(cfg: &RunConfig) -> Outcome {
    let dir = RunDir::open(cfg)?;
    let corpus = load_corpus(cfg)?;
    let reference = reference(cfg, &corpus)?;
    let normalized = normalize_rate(&corpus, &reference, cfg.rate_target)?;
    write_cache(&dir, "corpus_ratenorm.bin", &normalized)?;
    write_ctm(&dir, "corpus_ratenorm.ctm", &normalized)?;
    info!(
        "normalized {} utterances to rate {}",
        normalized.len(),
        cfg.rate_target.unwrap_or(reference.overall_rate_mean)
    );
    Ok(())
}
