mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::config::RunConfig;

/// Speaker leakage through phoneme durations: alignment ingestion,
/// duration profiles, verification trials and EER grids.
#[derive(Parser, Debug)]
#[command(name = "durleak", version)]
struct Cli {
    /// `key = value` run configuration; flags override it.
    #[arg(long, env = "DURLEAK_CONFIG", global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Parse alignments and write the binary corpus cache.
    Ingest,
    /// Write expected durations and per-speaker duration profiles.
    Stats,
    /// Write trial lists for every m value.
    Trials,
    /// Score trials and write the EER grid.
    Grid,
    /// Generate a synthetic corpus as CTM + utt2spk.
    Synth,
    /// Normalize every utterance to a common speech rate.
    RateNorm,
}

macro_rules! overrides {
    ($($field:ident : $help:literal),* $(,)?) => {
        #[derive(Args, Debug, Default)]
        struct Overrides {
            $(
                #[arg(long, global = true, value_name = "VALUE", help = $help)]
                $field: Option<String>,
            )*
        }

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push((stringify!($field), x.as_str()));
                    }
                )*
                v
            }
        }
    };
}

overrides! {
    inventory: "Inventory file, or `stock` for the bundled ARPAbet set",
    mode: "Phone classes: base or extended",
    ctm: "Comma-separated CTM files or directories",
    textgrid_dir: "Directory of TextGrid files, one utterance each",
    tier: "TextGrid tier holding phones",
    utt2spk: "Utterance-to-speaker map",
    corpus: "Binary corpus cache to read",
    metric: "rho1, rho2 or rate",
    norm: "rho1 normalization: center, divide-by-mean or none",
    m_values: "Comma-separated utterances per trial side",
    min_instances: "Comma-separated minimum phone counts",
    k_per_speaker: "Different-speaker trials per speaker",
    seed: "Random seed",
    rate_norm: "Normalize speech rate before scoring (true/false)",
    rate_target: "Target speech rate, or `auto` for the corpus mean",
    expected: "Expected-duration table from a reference corpus",
    out: "Output directory",
    format: "Grid output format: tsv or json",
    synth_speakers: "Synthetic speakers",
    synth_utts: "Synthetic utterances per speaker",
    synth_phones: "Synthetic phones per utterance",
    synth_strength: "Synthetic speaker signature strength",
    synth_log_std: "Synthetic within-speaker log-duration spread",
    synth_rate_spread: "Synthetic between-speaker speech-rate spread",
    anonymize: "Surrogate applied to synthetic output: none, sas1 or sas2",
    sas2_residual: "Fraction of speaker signature kept by sas2",
}

fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("reading {}: {e}", path.display()))?;
        cfg.apply_text(&text)
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    for (k, v) in cli.overrides.pairs() {
        cfg.set(k, v)
            .map_err(|e| format!("--{}: {e}", k.replace('_', "-")))?;
    }
    cfg.check_paths()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Stats => commands::stats(&cfg),
        Command::Trials => commands::trials(&cfg),
        Command::Grid => commands::grid(&cfg),
        Command::Synth => commands::synth(&cfg),
        Command::RateNorm => commands::rate_norm(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
