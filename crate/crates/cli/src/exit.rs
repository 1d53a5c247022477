use std::fmt;

use aai_core::Error;

use crate::config::ConfigError;

pub const SUCCESS: u8 = 0;
pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const NUMERIC: u8 = 3;

/// Bad invocation that is not a config-file problem.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Process exit status for an error: 1 usage/config, 2 data or format, 3 numeric.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<UsageError>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::Parameter(_) => USAGE,
                Error::Numeric(_) | Error::DegenerateBatch => NUMERIC,
                _ => DATA,
            };
        }
    }
    DATA
}
