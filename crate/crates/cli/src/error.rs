use std::fmt;

/// Failure classes of a command, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, flags or input data (exit 2).
    Input(String),
    /// Training or a numerical routine failed (exit 3).
    Numerical(String),
    /// A stored artifact could not be read back (exit 4).
    Corrupt(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Corrupt(_) => 4,
        }
    }

    /// Classifies an error raised while running a wrapped operation: shape
    /// and configuration problems trace back to the input, the rest are
    /// numerical.
    pub fn from_run(e: wahkon::Error) -> Self {
        use wahkon::Error as E;
        match e {
            E::DimensionMismatch { .. }
            | E::InvalidConfig(_)
            | E::InsufficientData(_)
            | E::InsufficientDraws { .. }
            | E::MalformedData { .. }
            | E::Empty(_)
            | E::Csv(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }

    pub fn io(context: impl fmt::Display, e: std::io::Error) -> Self {
        CliError::Input(format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "training failed: {m}"),
            CliError::Corrupt(m) => write!(f, "corrupt artifact: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
