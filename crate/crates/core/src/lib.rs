//! Speaker verification from phoneme duration dynamics.
//!
//! The pipeline reads forced alignments ([`ingest`], [`textgrid`]) into a
//! [`Corpus`], summarizes utterance groups as mean phone-duration profiles
//! ([`stats`]), compares profiles with distance metrics ([`metrics`]), builds
//! and scores verification trials ([`trials`]) and reports equal error rates
//! over grids of side sizes and minimum phone counts ([`eer`]). The [`synth`]
//! module generates corpora with known speaker signatures for testing the
//! whole chain.

pub mod corpus;
pub mod eer;
pub mod error;
pub mod ingest;
pub mod inventory;
pub mod metrics;
mod rng;
pub mod stats;
pub mod synth;
pub mod textgrid;
pub mod trials;

pub use corpus::{Corpus, Phone, UttIdx, Utterance};
pub use eer::{build_grid, compute_eer, EerCell, EerGrid, EerResult, GridSpec};
pub use error::{Error, Result};
pub use ingest::{build_corpus, parse_ctm, parse_utt2spk, BuildReport, Segment};
pub use inventory::{ClassId, InventoryMode, LabelMapping, PhonemeClass, PhonemeInventory};
pub use metrics::{rate_distance, rho1, rho2, MetricConfig, MetricKind, Normalization};
pub use stats::{
    expected_durations, mean_center, normalize_rate, speech_rate, DurationProfile,
    ExpectedDurations,
};
pub use synth::{
    apply_sas1_surrogate, apply_sas2_surrogate, gen_corpus, SpeakerModel, SynthConfig,
};
pub use textgrid::parse_textgrid;
pub use trials::{
    gen_diff_speaker, gen_same_speaker, score_trials, ScoreReport, ScoredTrial, Trial, TrialLabel,
    TrialSet,
};
