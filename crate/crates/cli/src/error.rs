//! CLI error wrapper mapping every failure to a stable exit code:
//!
//! | code | meaning                                            |
//! |------|----------------------------------------------------|
//! | 0    | success                                            |
//! | 1    | unexpected internal or I/O failure                 |
//! | 2    | bad configuration, flag, or file format            |
//! | 3    | missing prerequisite artifact                      |
//! | 4    | input data violates a contract                     |
//! | 5    | numerical failure or diverged training             |

use std::fmt;
use std::path::PathBuf;

use aee_core::Error as CoreError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    /// Config file or flag problem, with enough context to fix it.
    Config(String),
    /// A required input artifact does not exist yet; `producer` is the
    /// command that writes it.
    Prereq { artifact: PathBuf, producer: String },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Prereq { artifact, producer } => write!(
                f,
                "missing artifact {}: produce it with `aee {producer}`",
                artifact.display()
            ),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Prereq { .. } => 3,
            CliError::Core(e) => match e {
                CoreError::Parameter(_) | CoreError::Parse(_) => 2,
                CoreError::UnsupportedVersion { .. } => 2,
                CoreError::Data(_) | CoreError::Dimension(_) => 4,
                CoreError::Numerical(_) | CoreError::TrainingDiverged { .. } => 5,
                CoreError::State(_) | CoreError::Io(_) => 1,
            },
        }
    }
}
