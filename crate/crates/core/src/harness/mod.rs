//! Scenario files, reports and the four commands behind the `superloc` binary.

mod model;
pub mod report;
pub mod run;
pub mod scenario;

use thiserror::Error;

pub use report::{CheckRecord, PointRecord, Report, Status, Timing, Totals};
pub use run::{run, run_brst_check, run_compare, run_localize, run_oracle, Command};
pub use scenario::{AdhmParams, AdhmSpec, Model, OracleChartSpec, Patch, QSpec, Real, Scenario, StokesCase, Tolerances};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILED_CHECKS: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("computation error: {0}")]
    Computation(crate::error::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Schema(_) => EXIT_SCHEMA,
            HarnessError::Computation(_) => EXIT_COMPUTATION,
        }
    }
}

impl From<crate::error::Error> for HarnessError {
    fn from(e: crate::error::Error) -> Self {
        use crate::error::Error::*;
        match e {
            Schema(m) => HarnessError::Schema(m),
            e @ (Parse { .. } | UnboundSymbol(_) | DimensionMismatch(_) | ShapeMismatch(_) | NotTautological { .. } | NotSymmetric(..)) => {
                HarnessError::Schema(e.to_string())
            }
            e => HarnessError::Computation(e),
        }
    }
}

impl From<crate::linalg::LinalgError> for HarnessError {
    fn from(e: crate::linalg::LinalgError) -> Self {
        HarnessError::Computation(e.into())
    }
}
