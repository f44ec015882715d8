//! Alignment ingestion: CTM and utt2spk parsing, corpus assembly and CTM export.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::corpus::{Corpus, Phone, Utterance};
use crate::error::{Error, Result};
use crate::inventory::{LabelMapping, PhonemeInventory};

/// Tolerance for boundary overlap between consecutive segments, in seconds.
const OVERLAP_TOLERANCE: f64 = 1e-6;

/// One aligned phone before class mapping.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub utterance_id: String,
    pub phone_raw: String,
    pub start: f64,
    pub duration: f64,
}

/// Parses `<utt-id> <channel> <start> <duration> <phone>` lines. Lines
/// starting with `;;` and blank lines are skipped.
pub fn parse_ctm<R: BufRead>(reader: R) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        // Some aligners append a confidence column.
        if fields.len() != 5 && fields.len() != 6 {
            return Err(Error::parse(
                lineno,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("bad {what} `{s}`")))
        };
        let start = num(fields[2], "start")?;
        let duration = num(fields[3], "duration")?;
        if start < 0.0 {
            return Err(Error::parse(lineno, "negative start time"));
        }
        if duration <= 0.0 {
            return Err(Error::parse(lineno, "duration must be positive"));
        }
        out.push(Segment {
            utterance_id: fields[0].to_string(),
            phone_raw: fields[4].to_string(),
            start,
            duration,
        });
    }
    Ok(out)
}

/// Parses `<utt-id> <spk-id>` lines into a map. `;;` comment lines are skipped.
pub fn parse_utt2spk<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let (Some(utt), Some(spk), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::parse(lineno, "expected `<utt-id> <spk-id>`"));
        };
        if let Some(prev) = map.get(utt) {
            if prev != spk {
                return Err(Error::ConflictingSpeaker {
                    utterance: utt.to_string(),
                    first: prev.clone(),
                    second: spk.to_string(),
                });
            }
            continue;
        }
        map.insert(utt.to_string(), spk.to_string());
    }
    Ok(map)
}

/// Label accounting for one [`build_corpus`] run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub mapped: usize,
    pub excluded: usize,
    /// Utterances dropped because every segment was excluded.
    pub dropped_utterances: usize,
}

/// Groups segments into utterances, maps labels and attaches speakers.
///
/// The result does not depend on the order of `segments`. The corpus
/// inventory keeps only the classes that occur in the data, so `N` is
/// data-driven.
pub fn build_corpus(
    segments: &[Segment],
    utt2spk: &BTreeMap<String, String>,
    inventory: &PhonemeInventory,
) -> Result<(Corpus, BuildReport)> {
    let mut by_utt: BTreeMap<&str, Vec<&Segment>> = BTreeMap::new();
    for s in segments {
        by_utt.entry(s.utterance_id.as_str()).or_default().push(s);
    }
    let missing: Vec<String> = by_utt
        .keys()
        .filter(|u| !utt2spk.contains_key(**u))
        .map(|u| u.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSpeakers(missing));
    }

    let mut report = BuildReport::default();
    let mut observed = vec![false; inventory.len()];
    let mut utterances = Vec::with_capacity(by_utt.len());
    for (utt_id, mut segs) in by_utt {
        segs.sort_by(|a, b| {
            a.start
                .total_cmp(&b.start)
                .then(a.duration.total_cmp(&b.duration))
                .then(a.phone_raw.cmp(&b.phone_raw))
        });
        for w in segs.windows(2) {
            if w[0].start + w[0].duration > w[1].start + OVERLAP_TOLERANCE {
                return Err(Error::InvalidUtterance {
                    utterance: utt_id.to_string(),
                    msg: format!(
                        "segments overlap at {:.6}s ({} and {})",
                        w[1].start, w[0].phone_raw, w[1].phone_raw
                    ),
                });
            }
        }
        let mut phones = Vec::with_capacity(segs.len());
        for s in segs {
            match inventory.map_label(&s.phone_raw)? {
                LabelMapping::Excluded => report.excluded += 1,
                LabelMapping::Class(class) => {
                    report.mapped += 1;
                    observed[class as usize] = true;
                    phones.push(Phone {
                        class,
                        start: s.start,
                        duration: s.duration,
                    });
                }
            }
        }
        if phones.is_empty() {
            report.dropped_utterances += 1;
            continue;
        }
        utterances.push(Utterance {
            id: utt_id.to_string(),
            speaker_id: utt2spk[utt_id].clone(),
            phones,
        });
    }

    let (restricted, remap) = inventory.restrict(&observed);
    for u in &mut utterances {
        for p in &mut u.phones {
            p.class = remap[p.class as usize].expect("observed class survives restriction");
        }
    }
    Ok((Corpus::new(restricted, utterances)?, report))
}

/// Writes the corpus as CTM using canonical class labels, channel `1`.
pub fn write_ctm<W: Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    let labels = corpus.inventory().labels();
    for u in corpus.utterances() {
        for p in &u.phones {
            writeln!(
                w,
                "{} 1 {} {} {}",
                u.id, p.start, p.duration, labels[p.class as usize]
            )?;
        }
    }
    Ok(())
}

pub fn write_utt2spk<W: Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    for u in corpus.utterances() {
        writeln!(w, "{} {}", u.id, u.speaker_id)?;
    }
    Ok(())
}

/// Speakers referenced by `utt2spk` that have no surviving utterance.
pub fn speakers_without_data(
    corpus: &Corpus,
    utt2spk: &BTreeMap<String, String>,
) -> BTreeSet<String> {
    utt2spk
        .values()
        .filter(|s| !corpus.speakers().contains_key(*s))
        .cloned()
        .collect()
}
