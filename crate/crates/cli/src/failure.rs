//! Exit-code classification attached to error chains.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Certificate,
    Verification,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Config => 2,
            Kind::Certificate => 3,
            Kind::Verification => 4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Failure {
    pub kind: Kind,
    /// Stable snake_case identifier printed in the error record.
    pub reason: &'static str,
}

impl Failure {
    pub fn new(kind: Kind, reason: &'static str) -> Self {
        Self { kind, reason }
    }

    pub fn wrap(kind: Kind, reason: &'static str, err: anyhow::Error) -> anyhow::Error {
        err.context(Self::new(kind, reason))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.reason)
    }
}

impl std::error::Error for Failure {}
