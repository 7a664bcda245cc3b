//! Batch harness around `memwave-core`: single runs, sweeps, amplitude
//! bisection, exponent tables and certificate reports.
//!
//! Every command returns an exit code; see [`exit`] for the mapping.

pub mod commands;
pub mod input;
pub mod store;
pub mod svg;

use std::fmt;

use memwave_core::Verdict;

pub use commands::{cmd_bisect, cmd_certify, cmd_exponents, cmd_run, cmd_sweep, BisectArgs, CertifyArgs, ExponentsArgs};

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const NOT_BRACKETING: i32 = 2;
    pub const MISSING_SNAPSHOTS: i32 = 3;
    /// I/O or solver failures that are not configuration problems.
    pub const FAILURE: i32 = 4;
    pub const BLOWUP: i32 = 10;
    pub const HORIZON: i32 = 20;
    pub const RESOLUTION: i32 = 30;
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Completed => exit::OK,
        Verdict::BlowupDetected => exit::BLOWUP,
        Verdict::HorizonReached => exit::HORIZON,
        Verdict::ResolutionFailure => exit::RESOLUTION,
    }
}

/// A command that stopped early, with the code the process should exit with.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(exit::CONFIG, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<memwave_core::Error> for Failure {
    fn from(e: memwave_core::Error) -> Self {
        use memwave_core::Error as E;
        let code = match e {
            E::Configuration(_) | E::Domain(_) | E::Resource(_) => exit::CONFIG,
            _ => exit::FAILURE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(exit::FAILURE, format!("i/o error: {e}"))
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;
