//! Training loops: the alternating base schedule and classifier-only
//! incremental sessions.

mod base;
mod incremental;
mod log;

pub use base::{train_base, HyperBase};
pub use incremental::{
    r_new, r_old, run_incremental_session, IncrementalHyper, NovelInit, ObjectiveTerms, Penalty, PenaltyStep,
    SessionObjective, SessionOutcome, WeightSnapshot,
};
pub use log::{write_ndjson, LogRecord};

#[cfg(test)]
mod tests;
