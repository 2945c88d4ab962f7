//! Batch runner: TOML experiment configs in, CSV tables and a JSON summary
//! out.

pub mod config;
pub mod output;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, Plan, PlanSpec};
pub use output::{Cell, Check, Comparison, Summary, Table};
pub use report::{collect, render, ReportRow};
pub use run::{execute, median, run, Outcome};

use crate::error::Error;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "DAMPWAVE_WORKERS";

pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNRESOLVED: i32 = 3;

/// Process exit status for an error escaping a subcommand.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => EXIT_CONFIG,
        Error::Unresolved(_) => EXIT_UNRESOLVED,
        _ => EXIT_FAILED,
    }
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>, Error> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{WORKERS_ENV}={v}: expected a positive integer"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Unresolved("x".into())), 3);
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), 1);
    }
}
