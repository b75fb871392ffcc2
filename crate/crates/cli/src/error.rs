use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A config line or command-line value that cannot be used.
    #[error("{message}")]
    Usage { key: Option<String>, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: densfts::Error,
    },

    #[error(transparent)]
    Core(#[from] densfts::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn usage(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Usage {
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage { .. } => "usage",
            CliError::Io { .. } => "io",
            CliError::Data { .. } | CliError::Csv(_) => "data",
            CliError::Core(e) => match e.root() {
                densfts::Error::Parse { .. }
                | densfts::Error::DuplicateRow { .. }
                | densfts::Error::NotRectangular { .. } => "data",
                densfts::Error::NotEnoughData(_) => "insufficient_data",
                densfts::Error::Numerical(_) => "numerical",
                _ => "domain",
            },
            CliError::Json(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            _ => 1,
        }
    }

    /// One line: `error kind=<kind> [key=<key>] message="<text>"`.
    pub fn machine_line(&self) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ").replace('"', "'");
        match self {
            CliError::Usage { key: Some(key), .. } => {
                format!("error kind={} key={key} message=\"{message}\"", self.kind())
            }
            _ => format!("error kind={} message=\"{message}\"", self.kind()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
