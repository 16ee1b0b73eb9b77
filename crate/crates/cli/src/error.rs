//! Exit codes and error classification.

use std::fmt;

use codevault::dataset::DatasetError;
use codevault::graphquery::GraphError;
use codevault::ingest::IngestError;
use codevault::remote::RemoteError;
use codevault::swhid::SwhidError;
use codevault::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Generic = 1,
    Usage = 2,
    Parse = 3,
    NotFound = 4,
    TypeMismatch = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> CliError {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> CliError {
        CliError::new(ExitCode::Usage, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn store_code(e: &StoreError) -> ExitCode {
    match e {
        e if e.is_not_found() => ExitCode::NotFound,
        StoreError::NotAStore(..) => ExitCode::Usage,
        StoreError::Model(_) => ExitCode::Parse,
        _ => ExitCode::Generic,
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::new(store_code(&e), e.to_string())
    }
}

impl From<SwhidError> for CliError {
    fn from(e: SwhidError) -> Self {
        CliError::new(ExitCode::Parse, e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let code = match &e {
            IngestError::Parse(_)
            | IngestError::MarkType { .. }
            | IngestError::UnknownRef(_)
            | IngestError::PathNotFound(_)
            | IngestError::BadPath(_)
            | IngestError::NoRefs
            | IngestError::Model(_) => ExitCode::Parse,
            IngestError::Io { .. } | IngestError::NotADirectory(_) => ExitCode::Usage,
            IngestError::Store(s) => store_code(s),
        };
        CliError::new(code, e.to_string())
    }
}

fn graph_code(e: &GraphError) -> ExitCode {
    match e {
        GraphError::UnknownNode(_) | GraphError::NoRevision(_) => ExitCode::NotFound,
        GraphError::Sidecar { .. } => ExitCode::Parse,
        GraphError::Store(s) => store_code(s),
        GraphError::UndefinedFit(_) => ExitCode::Generic,
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::new(graph_code(&e), e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let code = match &e {
            DatasetError::Malformed { .. }
            | DatasetError::Referential { .. }
            | DatasetError::IdMismatch { .. }
            | DatasetError::Model(_) => ExitCode::Parse,
            DatasetError::Io { .. } => ExitCode::Usage,
            DatasetError::Store(s) => store_code(s),
            DatasetError::Graph(g) => graph_code(g),
        };
        CliError::new(code, e.to_string())
    }
}

impl From<RemoteError> for CliError {
    fn from(e: RemoteError) -> Self {
        let code = match &e {
            RemoteError::Swhid(_) | RemoteError::Decode { .. } => ExitCode::Parse,
            RemoteError::NotFound { .. } => ExitCode::NotFound,
            RemoteError::Endpoint(_) => ExitCode::Usage,
            RemoteError::Store(s) => store_code(s),
            _ => ExitCode::Generic,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ExitCode::Generic, e.to_string())
    }
}
