//! Trial scheduling, parallel execution, reporting and named comparisons.

mod compare;
mod manifest;
mod report;
mod runner;
mod schedule;

pub use compare::{compare, write_curves, CompareBase, CurveSeries, NAMED_HIDDEN_UNITS};
pub use manifest::{report, run, run_with_data, GridSource, RunManifest, RunReport, MANIFEST_FILE};
pub use report::{summarize, write_reports, ArmSummary, BestConfig, DistributionStats, RunSummary, TRIAL_COLUMNS};
pub use runner::{
    read_results, results_path, run_schedule, LedgerEntry, LedgerStatus, RunOptions, RunOutcome, TrialRecord,
    ARCHIVE_DIR, LEDGER_FILE, RESULTS_FILE,
};
pub use schedule::{build_schedule, Mode, Schedule, TrialKey, TrialKind, TrialNode};
