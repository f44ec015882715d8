//! Phoneme class inventories and raw-label mapping.
//!
//! Two granularities are supported. In [`InventoryMode::Base`] every raw
//! aligner label is reduced to its ARPAbet base symbol (`AH0_B` -> `AH`). In
//! [`InventoryMode::Extended`] lexical stress and word position are kept, so
//! `AH0_B`, `AH1_B` and `AH0_E` are distinct classes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a phone class inside an inventory.
pub type ClassId = u16;

const STOCK_ARPABET: &str = include_str!("../data/arpabet.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InventoryMode {
    Base,
    Extended,
}

impl FromStr for InventoryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(InventoryMode::Base),
            "extended" => Ok(InventoryMode::Extended),
            other => Err(Error::invalid(format!(
                "inventory mode must be `base` or `extended`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for InventoryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InventoryMode::Base => "base",
            InventoryMode::Extended => "extended",
        })
    }
}

/// Lexical stress marker carried by ARPAbet vowels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stress {
    Unstressed,
    Primary,
    Secondary,
}

impl Stress {
    fn from_digit(c: char) -> Option<Self> {
        match c {
            '0' => Some(Stress::Unstressed),
            '1' => Some(Stress::Primary),
            '2' => Some(Stress::Secondary),
            _ => None,
        }
    }

    fn digit(self) -> char {
        match self {
            Stress::Unstressed => '0',
            Stress::Primary => '1',
            Stress::Secondary => '2',
        }
    }
}

/// Position of a phone inside its word, as encoded by Kaldi's `_B/_I/_E/_S` suffixes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordPosition {
    Begin,
    Internal,
    End,
    Singleton,
}

impl WordPosition {
    pub const ALL: [WordPosition; 4] = [
        WordPosition::Begin,
        WordPosition::Internal,
        WordPosition::End,
        WordPosition::Singleton,
    ];

    fn from_suffix(c: char) -> Option<Self> {
        match c {
            'B' => Some(WordPosition::Begin),
            'I' => Some(WordPosition::Internal),
            'E' => Some(WordPosition::End),
            'S' => Some(WordPosition::Singleton),
            _ => None,
        }
    }

    fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "B" | "begin" => Some(WordPosition::Begin),
            "I" | "internal" => Some(WordPosition::Internal),
            "E" | "end" => Some(WordPosition::End),
            "S" | "singleton" => Some(WordPosition::Singleton),
            _ => None,
        }
    }

    fn suffix(self) -> char {
        match self {
            WordPosition::Begin => 'B',
            WordPosition::Internal => 'I',
            WordPosition::End => 'E',
            WordPosition::Singleton => 'S',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeClass {
    pub id: ClassId,
    pub base_label: String,
    pub stress: Option<Stress>,
    pub word_position: Option<WordPosition>,
}

impl PhonemeClass {
    /// Kaldi-style label for this class, e.g. `AH`, `AH0_B` or `K_E`.
    pub fn label(&self) -> String {
        class_label(&self.base_label, self.stress, self.word_position)
    }
}

fn class_label(base: &str, stress: Option<Stress>, pos: Option<WordPosition>) -> String {
    let mut s = String::with_capacity(base.len() + 3);
    s.push_str(base);
    if let Some(st) = stress {
        s.push(st.digit());
    }
    if let Some(p) = pos {
        s.push('_');
        s.push(p.suffix());
    }
    s
}

/// Outcome of mapping one raw label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMapping {
    Class(ClassId),
    Excluded,
}

/// Splits a raw label into (base, stress, position). `AH0_B` -> (`AH`, 0, B).
fn split_label(raw: &str) -> (&str, Option<Stress>, Option<WordPosition>) {
    let (rest, pos) = strip_position(raw);
    let mut chars = rest.chars();
    match chars.next_back().and_then(Stress::from_digit) {
        Some(st) if !chars.as_str().is_empty() => (chars.as_str(), Some(st), pos),
        _ => (rest, None, pos),
    }
}

fn strip_position(raw: &str) -> (&str, Option<WordPosition>) {
    if let Some((head, tail)) = raw.rsplit_once('_') {
        let mut cs = tail.chars();
        if let (Some(c), None) = (cs.next(), cs.next()) {
            if let Some(p) = WordPosition::from_suffix(c) {
                if !head.is_empty() {
                    return (head, Some(p));
                }
            }
        }
    }
    (raw, None)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhonemeInventory {
    mode: InventoryMode,
    classes: Vec<PhonemeClass>,
    label_map: BTreeMap<String, ClassId>,
    excluded: BTreeSet<String>,
}

impl PartialEq for PhonemeInventory {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.classes == other.classes && self.excluded == other.excluded
    }
}

impl PhonemeInventory {
    /// The bundled 39-phoneme ARPAbet inventory with silence and noise excluded.
    pub fn arpabet(mode: InventoryMode) -> Self {
        Self::from_reader(STOCK_ARPABET.as_bytes(), mode).expect("bundled inventory is valid")
    }

    /// Reads an inventory file: one class per line as `<base> [stress] [position]`,
    /// `!exclude <label>` directives and `#` comments.
    ///
    /// In base mode every line contributes its base symbol once. In extended
    /// mode a line without a position expands over all four word positions.
    pub fn from_reader<R: BufRead>(reader: R, mode: InventoryMode) -> Result<Self> {
        let mut specs: Vec<(String, Option<Stress>, Option<WordPosition>)> = Vec::new();
        let mut excluded = BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut toks = line.split_whitespace();
            let first = toks.next().expect("non-empty line");
            if first == "!exclude" {
                let label = toks
                    .next()
                    .ok_or_else(|| Error::parse(lineno, "`!exclude` needs a label"))?;
                if toks.next().is_some() {
                    return Err(Error::parse(lineno, "`!exclude` takes one label"));
                }
                excluded.insert(label.to_string());
                continue;
            }
            if first.starts_with('!') {
                return Err(Error::parse(lineno, format!("unknown directive `{first}`")));
            }
            let mut stress = None;
            let mut pos = None;
            for tok in toks {
                let mut cs = tok.chars();
                let digit = match (cs.next(), cs.next()) {
                    (Some(c), None) => Stress::from_digit(c),
                    _ => None,
                };
                if let Some(st) = digit {
                    if stress.replace(st).is_some() {
                        return Err(Error::parse(lineno, "stress given twice"));
                    }
                } else if let Some(p) = WordPosition::from_token(tok) {
                    if pos.replace(p).is_some() {
                        return Err(Error::parse(lineno, "position given twice"));
                    }
                } else {
                    return Err(Error::parse(lineno, format!("bad token `{tok}`")));
                }
            }
            specs.push((first.to_string(), stress, pos));
        }

        let mut inv = PhonemeInventory {
            mode,
            classes: Vec::new(),
            label_map: BTreeMap::new(),
            excluded,
        };
        for (base, stress, pos) in specs {
            match mode {
                InventoryMode::Base => inv.push_class(&base, None, None)?,
                InventoryMode::Extended => match pos {
                    Some(p) => inv.push_class(&base, stress, Some(p))?,
                    None => {
                        for p in WordPosition::ALL {
                            inv.push_class(&base, stress, Some(p))?;
                        }
                    }
                },
            }
        }
        if inv.classes.is_empty() {
            return Err(Error::invalid("inventory has no classes"));
        }
        Ok(inv)
    }

    fn push_class(
        &mut self,
        base: &str,
        stress: Option<Stress>,
        pos: Option<WordPosition>,
    ) -> Result<()> {
        let label = class_label(base, stress, pos);
        if self.label_map.contains_key(&label) {
            // Base mode collapses stress variants onto one class.
            return Ok(());
        }
        let id = ClassId::try_from(self.classes.len())
            .map_err(|_| Error::invalid("too many phone classes"))?;
        self.label_map.insert(label, id);
        self.classes.push(PhonemeClass {
            id,
            base_label: base.to_string(),
            stress,
            word_position: pos,
        });
        Ok(())
    }

    pub fn mode(&self) -> InventoryMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[PhonemeClass] {
        &self.classes
    }

    pub fn class(&self, id: ClassId) -> &PhonemeClass {
        &self.classes[id as usize]
    }

    pub fn excluded_labels(&self) -> &BTreeSet<String> {
        &self.excluded
    }

    /// Looks up a class by its canonical label (`AH`, `AH0_B`, ...).
    pub fn class_by_label(&self, label: &str) -> Option<ClassId> {
        self.label_map.get(label).copied()
    }

    /// Maps a raw aligner label onto this inventory.
    ///
    /// Excluded labels match either verbatim or with the position suffix
    /// removed, so excluding `SIL` also excludes `SIL_B`.
    pub fn map_label(&self, raw: &str) -> Result<LabelMapping> {
        let (unpositioned, _) = strip_position(raw);
        if self.excluded.contains(raw) || self.excluded.contains(unpositioned) {
            return Ok(LabelMapping::Excluded);
        }
        let id = match self.mode {
            InventoryMode::Base => {
                let (base, _, _) = split_label(raw);
                self.label_map.get(base)
            }
            InventoryMode::Extended => self.label_map.get(raw),
        };
        id.map(|&id| LabelMapping::Class(id))
            .ok_or_else(|| Error::UnknownLabel(raw.to_string()))
    }

    /// Keeps only the classes flagged in `keep`, renumbering them densely.
    ///
    /// Returns the restricted inventory and, for each old id, its new id.
    pub fn restrict(&self, keep: &[bool]) -> (PhonemeInventory, Vec<Option<ClassId>>) {
        assert_eq!(keep.len(), self.classes.len());
        let mut remap = vec![None; self.classes.len()];
        let mut out = PhonemeInventory {
            mode: self.mode,
            classes: Vec::new(),
            label_map: BTreeMap::new(),
            excluded: self.excluded.clone(),
        };
        for (class, &k) in self.classes.iter().zip(keep) {
            if !k {
                continue;
            }
            let id = out.classes.len() as ClassId;
            remap[class.id as usize] = Some(id);
            out.label_map.insert(class.label(), id);
            out.classes.push(PhonemeClass {
                id,
                ..class.clone()
            });
        }
        (out, remap)
    }

    /// Canonical class labels in id order.
    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(PhonemeClass::label).collect()
    }
}
