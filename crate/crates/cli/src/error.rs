use std::path::PathBuf;

use thiserror::Error;
use watchlab_core::Error as CoreError;

/// Problems with the configuration or the files it points at. These exit
/// with status 2; everything else exits with 1.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Parse(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("{0}")]
    Invalid(String),

    #[error("{what} not found at {path}")]
    MissingInput { what: &'static str, path: PathBuf },

    #[error("WATCHLAB_THREADS must be a positive integer, got `{0}`")]
    Threads(String),
}

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

fn core_is_validation(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::MalformedRow { .. }
            | CoreError::MissingColumn(_)
            | CoreError::MissingTimestamps
            | CoreError::InvalidFractions(_)
            | CoreError::InvalidConfig(_)
            | CoreError::CurveOrderViolation { .. }
            | CoreError::OutOfRangeDuration { .. }
            | CoreError::MissingGroundTruth(_)
    )
}

/// Process exit status for an error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return if core_is_validation(e) {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            };
        }
    }
    EXIT_RUNTIME
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let e = anyhow::Error::new(ConfigError::Invalid("x".into()));
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(CoreError::CurveOrderViolation {
            d: 5,
            w_plus: 1.0,
            w_minus: 2.0,
        })
        .context("generating");
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(CoreError::NonFiniteLoss { epoch: 1, step: 0 });
        assert_eq!(exit_code(&e), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), 1);
    }
}
