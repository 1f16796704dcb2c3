//! Campaign driver: configuration, mutation, the fuzzing loop and reports.

pub mod bench;
mod campaign;
mod config;
mod mutate;

pub use campaign::{
    detection_counts, fuzz_pool, report_case, run_campaign, seed_corpus, CampaignReport,
    CoverageSample, CoverageTotals, Detection, ReportCall, VirtualClock,
};
pub use config::{CampaignConfig, CampaignSetup, ConfigError, InvariantDef};
pub use mutate::{
    MutationKind, Mutator, DICTIONARY, MAX_DELTA, P_INSERT, P_MUTATE_INPUT, P_REMOVE, P_REPLACE,
    P_SEQ_INSERT, P_ZERO_VALUE,
};
