//! Learning agents: prioritized sweeping with and without the need
//! term, the six cliffwalk replay schemes, and need-modulated PER.

mod cliffwalk_run;
mod core;
mod per_sr;
mod sweeping;

pub use self::cliffwalk_run::{
    cliffwalk_run, BucketedBuffer, CliffwalkConfig, CliffwalkOutcome, CliffwalkScheme,
};
pub use self::core::{epsilon_greedy, DeterministicModel, LinearQ, QTable, TieBreak};
pub use self::per_sr::{toy_chain_run, PerSrAgent, PerSrConfig, ReplayReport, ToyOutcome};
pub use self::sweeping::{all_ones_sr, EpisodeRecord, SweepingAgent, SweepingConfig};
