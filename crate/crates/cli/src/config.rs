//! Run configuration: a versioned `key = value` file, overridden by flags.
//! The canonical rendering of the effective configuration is what gets
//! hashed and persisted next to every run's outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use durleak_core::{InventoryMode, MetricKind, Normalization, SynthConfig};
use sha2::{Digest, Sha256};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anonymize {
    None,
    Sas1,
    Sas2,
}

impl FromStr for Anonymize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Anonymize::None),
            "sas1" => Ok(Anonymize::Sas1),
            "sas2" => Ok(Anonymize::Sas2),
            _ => Err(format!("anonymize must be none, sas1 or sas2, got `{s}`")),
        }
    }
}

impl Anonymize {
    fn as_str(self) -> &'static str {
        match self {
            Anonymize::None => "none",
            Anonymize::Sas1 => "sas1",
            Anonymize::Sas2 => "sas2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Tsv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tsv" => Ok(Format::Tsv),
            "json" => Ok(Format::Json),
            _ => Err(format!("format must be tsv or json, got `{s}`")),
        }
    }
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Tsv => "tsv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// `None` selects the bundled ARPAbet inventory.
    pub inventory: Option<PathBuf>,
    pub mode: InventoryMode,
    pub ctm: Vec<PathBuf>,
    pub textgrid_dir: Option<PathBuf>,
    pub tier: String,
    pub utt2spk: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub metric: MetricKind,
    pub norm: Normalization,
    pub m_values: Vec<usize>,
    pub min_instances: Vec<u32>,
    pub k_per_speaker: usize,
    pub seed: u64,
    pub rate_norm: bool,
    pub rate_target: Option<f64>,
    pub expected: Option<PathBuf>,
    pub out: PathBuf,
    pub format: Format,
    pub synth_speakers: usize,
    pub synth_utts: usize,
    pub synth_phones: usize,
    pub synth_strength: f64,
    pub synth_log_std: f64,
    pub synth_rate_spread: f64,
    pub anonymize: Anonymize,
    pub sas2_residual: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        RunConfig {
            inventory: None,
            mode: InventoryMode::Base,
            ctm: Vec::new(),
            textgrid_dir: None,
            tier: "phones".into(),
            utt2spk: None,
            corpus: None,
            metric: MetricKind::Rho2,
            norm: Normalization::Center,
            m_values: vec![1, 3, 5, 10, 20, 40, 60],
            min_instances: vec![1, 3, 5, 10, 20],
            k_per_speaker: 100,
            seed: 0,
            rate_norm: false,
            rate_target: None,
            expected: None,
            out: PathBuf::from("out"),
            format: Format::Tsv,
            synth_speakers: synth.n_speakers,
            synth_utts: synth.utts_per_speaker,
            synth_phones: synth.phones_per_utt,
            synth_strength: synth.signature_strength,
            synth_log_std: synth.log_std,
            synth_rate_spread: synth.rate_spread,
            anonymize: Anonymize::None,
            sas2_residual: 0.3,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("bad value `{value}` for `{key}`"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(format!("`{key}` needs at least one value"));
    }
    Ok(items)
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    /// Sets one key. Keys use `snake_case`; flags use the same names with dashes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "version" => {
                let v: u32 = parse(key, value)?;
                if v != CONFIG_VERSION {
                    return Err(format!(
                        "config version {v} is not supported (expected {CONFIG_VERSION})"
                    ));
                }
            }
            "inventory" => {
                self.inventory = match value {
                    "" | "stock" => None,
                    p => Some(PathBuf::from(p)),
                }
            }
            "mode" => self.mode = value.parse().map_err(|e| format!("{e}"))?,
            "ctm" => {
                self.ctm = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "textgrid_dir" => self.textgrid_dir = opt_path(value),
            "tier" => self.tier = value.to_string(),
            "utt2spk" => self.utt2spk = opt_path(value),
            "corpus" => self.corpus = opt_path(value),
            "metric" => self.metric = value.parse().map_err(|e| format!("{e}"))?,
            "norm" => self.norm = value.parse().map_err(|e| format!("{e}"))?,
            "m_values" => self.m_values = parse_list(key, value)?,
            "min_instances" => self.min_instances = parse_list(key, value)?,
            "k_per_speaker" => self.k_per_speaker = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "rate_norm" => self.rate_norm = parse(key, value)?,
            "rate_target" => {
                self.rate_target = match value {
                    "" | "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "expected" => self.expected = opt_path(value),
            "out" => self.out = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            "synth_speakers" => self.synth_speakers = parse(key, value)?,
            "synth_utts" => self.synth_utts = parse(key, value)?,
            "synth_phones" => self.synth_phones = parse(key, value)?,
            "synth_strength" => self.synth_strength = parse(key, value)?,
            "synth_log_std" => self.synth_log_std = parse(key, value)?,
            "synth_rate_spread" => self.synth_rate_spread = parse(key, value)?,
            "anonymize" => self.anonymize = value.parse()?,
            "sas2_residual" => self.sas2_residual = parse(key, value)?,
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Applies a `key = value` file. `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            self.set(k.trim(), v)
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    /// Canonical rendering, one key per line in a fixed order.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("version", CONFIG_VERSION.to_string());
        kv(
            "inventory",
            self.inventory
                .as_ref()
                .map_or("stock".into(), |p| p.display().to_string()),
        );
        kv("mode", self.mode.to_string());
        kv(
            "ctm",
            self.ctm
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("textgrid_dir", path_str(&self.textgrid_dir));
        kv("tier", self.tier.clone());
        kv("utt2spk", path_str(&self.utt2spk));
        kv("corpus", path_str(&self.corpus));
        kv("metric", self.metric.to_string());
        kv("norm", self.norm.to_string());
        kv("m_values", join(&self.m_values));
        kv("min_instances", join(&self.min_instances));
        kv("k_per_speaker", self.k_per_speaker.to_string());
        kv("seed", self.seed.to_string());
        kv("rate_norm", self.rate_norm.to_string());
        kv(
            "rate_target",
            self.rate_target.map_or("auto".into(), |t| t.to_string()),
        );
        kv("expected", path_str(&self.expected));
        kv("out", self.out.display().to_string());
        kv("format", self.format.ext().to_string());
        kv("synth_speakers", self.synth_speakers.to_string());
        kv("synth_utts", self.synth_utts.to_string());
        kv("synth_phones", self.synth_phones.to_string());
        kv("synth_strength", self.synth_strength.to_string());
        kv("synth_log_std", self.synth_log_std.to_string());
        kv("synth_rate_spread", self.synth_rate_spread.to_string());
        kv("anonymize", self.anonymize.as_str().to_string());
        kv("sas2_residual", self.sas2_residual.to_string());
        s
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::render`], leaving
    /// out `out` so the same experiment hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let text: String = self
            .render()
            .lines()
            .filter(|l| !l.starts_with("out = "))
            .map(|l| format!("{l}\n"))
            .collect();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_speakers: self.synth_speakers,
            utts_per_speaker: self.synth_utts,
            phones_per_utt: self.synth_phones,
            signature_strength: self.synth_strength,
            log_std: self.synth_log_std,
            rate_spread: self.synth_rate_spread,
            seed: self.seed,
        }
    }

    pub fn has_alignment_inputs(&self) -> bool {
        (!self.ctm.is_empty() || self.textgrid_dir.is_some()) && self.utt2spk.is_some()
    }

    /// Every configured input path must exist.
    pub fn check_paths(&self) -> Result<(), String> {
        let mut paths: Vec<&Path> = self.ctm.iter().map(PathBuf::as_path).collect();
        paths.extend(
            [
                &self.inventory,
                &self.textgrid_dir,
                &self.utt2spk,
                &self.expected,
            ]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path),
        );
        // A corpus cache may be missing if it can be rebuilt from alignments.
        if let Some(c) = &self.corpus {
            if !self.has_alignment_inputs() {
                paths.push(c);
            }
        }
        for p in paths {
            if !p.exists() {
                return Err(format!("path does not exist: {}", p.display()));
            }
        }
        if self.m_values.contains(&0) {
            return Err("m_values must be at least 1".into());
        }
        if self.min_instances.contains(&0) {
            return Err("min_instances must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nmetric = rho1\nm_values = 1, 5,20\nseed=9\nrate_target = 1.25\n")
            .unwrap();
        assert_eq!(c.metric, MetricKind::Rho1);
        assert_eq!(c.m_values, vec![1, 5, 20]);
        let mut back = RunConfig::default();
        back.apply_text(&c.render()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn hash_tracks_seed() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.set("seed", "1").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert!(a.render().contains("seed = 0"));
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::default();
        assert!(c.set("colour", "blue").is_err());
        assert!(c.set("metric", "cosine").is_err());
        assert!(c.set("version", "2").is_err());
        assert!(c.set("m_values", "").is_err());
        assert!(c.apply_text("seed 4").is_err());
    }

    #[test]
    fn missing_paths_are_reported() {
        let mut c = RunConfig::default();
        c.set("utt2spk", "/definitely/not/here").unwrap();
        assert!(c.check_paths().is_err());
    }
}
