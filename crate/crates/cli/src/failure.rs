use std::fmt;
use std::process::ExitCode;

/// Error category, reported on stderr and mapped to the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Numeric,
}

impl Category {
    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Numeric => 4,
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Numeric => "numeric",
        })
    }
}

#[derive(Debug)]
pub struct Failure {
    pub category: Category,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(msg: impl fmt::Display) -> Self {
        Failure {
            category: Category::Config,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Failure {
            category: Category::Numeric,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {:#}", self.category, self.error)
    }
}

impl From<ultralif::Error> for Failure {
    fn from(e: ultralif::Error) -> Self {
        use ultralif::Error as E;
        let category = match &e {
            E::Config(_) | E::Parameter(_) | E::Input(_) | E::Contract(_) => Category::Config,
            E::Io(_) | E::Format(_) => Category::Io,
            E::Shape { .. } => Category::Numeric,
        };
        Failure {
            category,
            error: e.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            category: Category::Io,
            error: e.into(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        let category = if e.is_io() {
            Category::Io
        } else {
            Category::Config
        };
        Failure {
            category,
            error: e.into(),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;
