use std::fmt;

/// Failure of a CLI command. `reason()` is a stable machine-parsable tag.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    InputNotFound(String),
    MalformedInput(String),
    MalformedTrace(String),
    Io(String),
    Solver(scomp::Error),
}

impl CliError {
    pub fn reason(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::InputNotFound(_) => "input-not-found",
            CliError::MalformedInput(_) => "malformed-input",
            CliError::MalformedTrace(_) => "malformed-trace",
            CliError::Io(_) => "io",
            CliError::Solver(_) => "solver",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail = match self {
            CliError::Usage(s)
            | CliError::InputNotFound(s)
            | CliError::MalformedInput(s)
            | CliError::MalformedTrace(s)
            | CliError::Io(s) => s.clone(),
            CliError::Solver(e) => e.to_string(),
        };
        // keep it on one line
        write!(f, "error: {}: {}", self.reason(), detail.replace('\n', " "))
    }
}

impl From<scomp::Error> for CliError {
    fn from(e: scomp::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
