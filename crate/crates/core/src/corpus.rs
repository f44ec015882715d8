use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inventory::{ClassId, PhonemeInventory};

/// Index of an utterance inside a [`Corpus`]. Utterances are stored sorted
/// by id, so index order and id order coincide.
pub type UttIdx = u32;

const CACHE_MAGIC: &[u8; 8] = b"DLCORPUS";
pub const CACHE_VERSION: u32 = 1;

/// A class-mapped phone segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phone {
    pub class: ClassId,
    pub start: f64,
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub speaker_id: String,
    pub phones: Vec<Phone>,
}

/// Per-class duration totals of one utterance.
#[derive(Clone, Debug, Default)]
pub(crate) struct UtteranceSummary {
    /// (class, count, summed duration), sorted by class.
    pub(crate) classes: Vec<(ClassId, u32, f64)>,
}

impl UtteranceSummary {
    pub(crate) fn of(utt: &Utterance) -> Self {
        let mut acc: BTreeMap<ClassId, (u32, f64)> = BTreeMap::new();
        for p in &utt.phones {
            let e = acc.entry(p.class).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += p.duration;
        }
        UtteranceSummary {
            classes: acc.into_iter().map(|(c, (n, s))| (c, n, s)).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusData {
    meta: String,
    inventory: PhonemeInventory,
    utterances: Vec<Utterance>,
}

/// Immutable collection of speaker-labelled utterances over one inventory.
#[derive(Clone, Debug)]
pub struct Corpus {
    inventory: PhonemeInventory,
    utterances: Vec<Utterance>,
    speakers: BTreeMap<String, Vec<UttIdx>>,
    index: HashMap<String, UttIdx>,
    summaries: Vec<UtteranceSummary>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.inventory == other.inventory && self.utterances == other.utterances
    }
}

impl Corpus {
    /// Validates and indexes a set of utterances. Utterances are sorted by id;
    /// phones inside each utterance are sorted by start time.
    pub fn new(inventory: PhonemeInventory, mut utterances: Vec<Utterance>) -> Result<Self> {
        let n_classes = inventory.len();
        utterances.sort_by(|a, b| a.id.cmp(&b.id));
        for w in utterances.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateUtterance(w[0].id.clone()));
            }
        }
        if utterances.len() > UttIdx::MAX as usize {
            return Err(Error::invalid("too many utterances"));
        }
        let mut speakers: BTreeMap<String, Vec<UttIdx>> = BTreeMap::new();
        let mut index = HashMap::with_capacity(utterances.len());
        for (i, u) in utterances.iter_mut().enumerate() {
            let bad = |msg: &str| Error::InvalidUtterance {
                utterance: u.id.clone(),
                msg: msg.to_string(),
            };
            if u.speaker_id.is_empty() {
                return Err(bad("empty speaker id"));
            }
            if u.phones.is_empty() {
                return Err(bad("no mapped phone segments"));
            }
            for p in &u.phones {
                if p.class as usize >= n_classes {
                    return Err(bad("phone class outside inventory"));
                }
                if !(p.duration > 0.0 && p.duration.is_finite()) {
                    return Err(bad("phone duration must be positive"));
                }
                if !(p.start >= 0.0 && p.start.is_finite()) {
                    return Err(bad("phone start must be non-negative"));
                }
            }
            u.phones.sort_by(|a, b| a.start.total_cmp(&b.start));
            speakers
                .entry(u.speaker_id.clone())
                .or_default()
                .push(i as UttIdx);
            index.insert(u.id.clone(), i as UttIdx);
        }
        let summaries = utterances.iter().map(UtteranceSummary::of).collect();
        Ok(Corpus {
            inventory,
            utterances,
            speakers,
            index,
            summaries,
        })
    }

    pub fn inventory(&self) -> &PhonemeInventory {
        &self.inventory
    }

    pub fn n_classes(&self) -> usize {
        self.inventory.len()
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn utterance(&self, idx: UttIdx) -> &Utterance {
        &self.utterances[idx as usize]
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Speaker id -> indices of that speaker's utterances (ascending).
    pub fn speakers(&self) -> &BTreeMap<String, Vec<UttIdx>> {
        &self.speakers
    }

    pub fn speaker_utterance_ids(&self, speaker: &str) -> Option<Vec<&str>> {
        self.speakers
            .get(speaker)
            .map(|ix| ix.iter().map(|&i| self.utterance(i).id.as_str()).collect())
    }

    pub fn lookup(&self, utterance_id: &str) -> Option<UttIdx> {
        self.index.get(utterance_id).copied()
    }

    pub(crate) fn summary(&self, idx: UttIdx) -> &UtteranceSummary {
        &self.summaries[idx as usize]
    }

    /// Returns a corpus with the same inventory whose utterances are rewritten by `f`.
    pub fn map_utterances<F>(&self, f: F) -> Result<Corpus>
    where
        F: FnMut(&Utterance) -> Utterance,
    {
        Corpus::new(
            self.inventory.clone(),
            self.utterances.iter().map(f).collect(),
        )
    }

    /// Writes the versioned binary cache. `meta` is free-form provenance text
    /// stored alongside the data.
    pub fn write_cache<W: Write>(&self, mut w: W, meta: &str) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        let data = CorpusData {
            meta: meta.to_string(),
            inventory: self.inventory.clone(),
            utterances: self.utterances.clone(),
        };
        bincode::serialize_into(&mut w, &data).map_err(|e| Error::Cache(e.to_string()))?;
        Ok(())
    }

    /// Reads a cache written by [`Corpus::write_cache`], returning the corpus
    /// and its provenance text.
    pub fn read_cache<R: Read>(mut r: R) -> Result<(Corpus, String)> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache("not a corpus cache file".into()));
        }
        let mut ver = [0u8; 4];
        r.read_exact(&mut ver)?;
        let found = u32::from_le_bytes(ver);
        if found != CACHE_VERSION {
            return Err(Error::CacheVersion {
                found,
                expected: CACHE_VERSION,
            });
        }
        let data: CorpusData =
            bincode::deserialize_from(r).map_err(|e| Error::Cache(e.to_string()))?;
        Ok((Corpus::new(data.inventory, data.utterances)?, data.meta))
    }
}
