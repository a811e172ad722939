use std::fmt;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    /// A verified property failed, or every suite arm failed.
    Failure = 1,
    /// Malformed input, config or arguments.
    Input = 2,
    /// Input well-formed but degenerate (e.g. a constant column).
    Degenerate = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Input, message)
    }

    pub fn io(context: &str, e: impl fmt::Display) -> Self {
        Self::new(ExitCode::Input, format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<gmc_core::Error> for CliError {
    fn from(e: gmc_core::Error) -> Self {
        let code = match e {
            gmc_core::Error::Degenerate(_) => ExitCode::Degenerate,
            _ => ExitCode::Input,
        };
        Self::new(code, e.to_string())
    }
}
