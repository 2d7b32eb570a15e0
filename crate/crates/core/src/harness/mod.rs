//! Experiment runner: configuration, pass simulation, slip sweeps, noise
//! checks, bound scans and CSV output.

pub mod bounds;
pub mod config;
pub mod link_budget;
pub mod noise;
pub mod output;
pub mod pass;
pub mod sweep;

pub use bounds::{verify_bounds, BoundRow};
pub use config::{DopplerMode, ExperimentConfig, GainPolicy, TrackerKind};
pub use link_budget::{sigma2_from_snr_db, LinkBudget};
pub use noise::{noise_identity_check, VarianceCheck};
pub use output::{to_csv_string, write_csv, write_csv_file};
pub use pass::{run_pass, PassRow, PassRun, PassSummary, SinrSample, SlipInjection};
pub use sweep::{msl_sweep, SlipRecord, SweepPoint, SweepResult};
