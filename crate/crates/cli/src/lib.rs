//! Command-line front end for the `unlearn-core` toolkit.

pub mod commands;
pub mod config;

use unlearn_core::Error as CoreError;

/// Bad flags, bad config or an impossible request.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Maps an error chain onto the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::NonConvergence { .. } | CoreError::Factorization => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}
