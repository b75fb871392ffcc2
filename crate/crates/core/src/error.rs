use crate::panel::PanelKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A field of the input table could not be parsed.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// The same (state, gender, year, age) appears more than once.
    #[error("duplicate row {row} for {key} age {age}")]
    DuplicateRow { row: usize, key: PanelKey, age: f64 },

    /// Some (state, gender, year) cells are absent.
    #[error("panel is not rectangular, missing cells: {}", format_keys(.missing))]
    NotRectangular { missing: Vec<PanelKey> },

    /// An argument falls outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes of two inputs do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numerical routine failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Not enough observations for the requested operation.
    #[error("not enough data: {0}")]
    NotEnoughData(String),

    /// An inner error with the panel cell or step it came from.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Wrap `self` with a context label such as `state=CA gender=F`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

fn format_keys(keys: &[PanelKey]) -> String {
    const SHOWN: usize = 20;
    let mut out = keys
        .iter()
        .take(SHOWN)
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if keys.len() > SHOWN {
        out.push_str(&format!(" (and {} more)", keys.len() - SHOWN));
    }
    out
}
