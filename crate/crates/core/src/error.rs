use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid parameter `{param}`: {message}")]
    InvalidParams { param: String, message: String },

    /// A document (XML, CSV, JSON) could not be read.
    #[error("{what} parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        what: String,
        line: Option<usize>,
        message: String,
    },

    #[error("network has no usable roads: {0}")]
    EmptyNetwork(String),

    #[error("demand cannot be routed: {message}")]
    Unroutable {
        message: String,
        pairs: Vec<(String, String)>,
    },

    /// Inputs are individually valid but do not fit together.
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(param: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParams {
            param: param.into(),
            message: message.into(),
        }
    }

    pub fn parse(what: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            line,
            message: message.into(),
        }
    }

    /// The parameter name this error points at, if any.
    pub fn param(&self) -> Option<&str> {
        match self {
            Error::InvalidParams { param, .. } => Some(param),
            _ => None,
        }
    }
}
