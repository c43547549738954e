//! Experiment configuration, end-to-end runs, property suites and artifacts.

pub mod checks;
pub mod config;
pub mod definition;
pub mod experiment;
pub mod io;

use crate::error::QrcError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Process exit status for an error.
pub fn exit_code(e: &QrcError) -> i32 {
    match e {
        QrcError::Config { .. } | QrcError::Parse { .. } | QrcError::Io(_) | QrcError::Csv(_) | QrcError::Json(_) => {
            EXIT_CONFIG
        }
        QrcError::Dimension(_)
        | QrcError::Contract(_)
        | QrcError::InputDomain(_)
        | QrcError::IndexOutOfRange { .. }
        | QrcError::UndefinedMetric(_) => EXIT_NUMERIC,
    }
}
