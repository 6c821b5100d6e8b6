//! Process-level failures and their exit codes.

use std::fmt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ggdpotts::Error> for CliError {
    fn from(e: ggdpotts::Error) -> Self {
        use ggdpotts::Error as E;
        let code = match e {
            E::Numeric(_) | E::Degenerate(_) => EXIT_NUMERIC,
            E::InvalidParameter(_)
            | E::RegionOutOfBounds
            | E::RegionTooSmall(_)
            | E::DimensionMismatch { .. } => EXIT_USAGE,
            _ => EXIT_IO,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}
