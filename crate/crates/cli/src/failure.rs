use std::fmt;
use std::process::ExitCode;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad or conflicting arguments. Exit 1.
    Usage(anyhow::Error),
    /// An input file or value failed validation. Exit 2.
    Input(anyhow::Error),
    /// Anything that went wrong while running. Exit 3.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, e) = match self {
            Failure::Usage(e) => ("usage", e),
            Failure::Input(e) => ("invalid input", e),
            Failure::Runtime(e) => ("error", e),
        };
        write!(f, "{kind}: {e:#}")
    }
}

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn input(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}
