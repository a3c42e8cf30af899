//! Stopping times, explosion classification, the L1 ledger and the
//! lemma-level audits.

mod audit;
mod bounds;
mod explosion;
mod ledger;
mod moments;
mod stopping;
mod tripling;

pub use audit::{tripling_probability_audit, window_check, CountSummary, LevelFrequency, TriplingAudit, WindowCheck, WindowRow};
pub use bounds::{doob_bound, doob_bound_check, drift_bound_check, drift_bound_check_a, DoobCase, DoobInputs, DoobRow, DriftBoundReport};
pub use explosion::{classify_explosion, run_classified, ClassifiedPath, ExplosionVerdict};
pub use ledger::{ledger_build, SemimartingaleLedger};
pub use moments::{moment_scaling_probe, MomentProbeReport, MomentRow};
pub use stopping::{update_stopping, Classification, Hit, LevelHit, StoppingParams, StoppingRecord};
pub use tripling::{count_triplings, tripling_sequence, Direction, RhoEvent, TriplingTracker};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("parameter error: {0}")]
    Parameter(String),
}
