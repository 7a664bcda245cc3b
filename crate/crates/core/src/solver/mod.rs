//! Time integration of u_tt − Δu = J^α(|u|^p) on a periodic box.

pub mod blowup;
pub mod config;
pub mod ledger;
pub mod local;
pub mod picard;
pub mod run;
pub mod stepper;

pub use blowup::{detect_blowup, BlowupEstimate};
pub use config::{
    Adaptivity, CosineMode, ForcingModel, GridSpec, InitialData, PicardSettings, Profile, RunConfig, Scheme,
    Thresholds,
};
pub use ledger::MemoryLedger;
pub use picard::{picard_window, PicardWindow};
pub use run::{run, run_with_observer, RunResult, SchemeAgreement, SeriesRow, Snapshot, Verdict};
pub use stepper::{step_leapfrog, Problem, ALPHA_FLOOR};
