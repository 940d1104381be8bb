use std::fmt;

/// Command failure, mapped to the process exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// A self-test or embedded expectation did not hold.
    Verification(String),
    /// Unreadable or malformed input.
    Input(String),
    /// Well-formed input that breaks a data constraint, such as a duplicate coordinate.
    Constraint(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::Constraint(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verification(m) | Failure::Input(m) | Failure::Constraint(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}
