//! Process exit statuses.

use thiserror::Error;

pub const OK: u8 = 0;
pub const FAILURE: u8 = 1;
pub const VALIDATION: u8 = 2;
pub const PROPERTY_FAILURE: u8 = 3;
pub const IO: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{failed} of {checked} properties failed")]
    PropertyFailure { failed: usize, checked: usize },
}

fn core_status(e: &cfaug::Error) -> u8 {
    use cfaug::Error as E;
    match e {
        E::Io(_) | E::Csv(_) | E::Json(_) | E::Format(_) => IO,
        E::NonFiniteLoss { .. } | E::NoMatch { .. } | E::AbductionMismatch { .. } => FAILURE,
        _ => VALIDATION,
    }
}

/// The exit status for an error, taken from the first typed cause in its chain.
pub fn status_of(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Validation(_) => VALIDATION,
                CliError::PropertyFailure { .. } => PROPERTY_FAILURE,
            };
        }
        if let Some(e) = cause.downcast_ref::<cfaug::Error>() {
            return core_status(e);
        }
        if cause.downcast_ref::<clap::Error>().is_some() {
            return VALIDATION;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return IO;
        }
    }
    FAILURE
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn statuses_follow_the_root_cause() {
        let io: anyhow::Error = std::io::Error::new(std::io::ErrorKind::NotFound, "gone").into();
        assert_eq!(status_of(&io.context("writing")), IO);
        let bad = Err::<(), _>(cfaug::Error::InvalidArgument("r".into())).context("gen").unwrap_err();
        assert_eq!(status_of(&bad), VALIDATION);
        let prop = anyhow::Error::new(CliError::PropertyFailure { failed: 1, checked: 9 });
        assert_eq!(status_of(&prop), PROPERTY_FAILURE);
        let core_io = anyhow::Error::new(cfaug::Error::Format("short record".into()));
        assert_eq!(status_of(&core_io), IO);
        assert_eq!(status_of(&anyhow::anyhow!("plain")), FAILURE);
    }
}
