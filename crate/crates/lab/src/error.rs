use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{0}")]
    Core(#[from] feller_core::Error),

    #[error("io: {0}")]
    Io(String),

    #[error("refusing to write empty output {0}")]
    EmptyOutput(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
