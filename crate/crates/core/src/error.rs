use std::path::PathBuf;

use thiserror::Error;

use crate::datalog::ClosureTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("syntax error at column {column}: {msg}\n  {text}\n  {caret:>width$}", caret = "^", width = column)]
    Syntax {
        text: String,
        column: usize,
        msg: String,
    },

    #[error("{0}")]
    Rule(String),

    #[error("schema error in {path}: {msg}")]
    Schema { path: String, msg: String },

    #[error("unknown {kind} `{name}`{}", fmt_suggestions(.suggestions))]
    Unknown {
        kind: &'static str,
        name: String,
        suggestions: Vec<String>,
    },

    #[error("relationships reference unknown person ids: {}", .0.join(", "))]
    UnknownPersons(Vec<String>),

    #[error("self-loop parent edge for `{0}`")]
    SelfLoop(String),

    #[error("no fixpoint after {max_iters} iterations ({} iterations recorded)", .trace.new_edges.len())]
    NonConvergence { max_iters: usize, trace: ClosureTrace },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("need {needed} qualifying paths, found {found}")]
    InsufficientPaths { needed: usize, found: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input (arguments, config, files
    /// that fail validation) rather than by a failure while running.
    /// Labels `self` with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn is_validation(&self) -> bool {
        if let Error::Stage { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::Config(_)
                | Error::Io { .. }
                | Error::Parse { .. }
                | Error::Syntax { .. }
                | Error::Rule(_)
                | Error::Schema { .. }
                | Error::Unknown { .. }
                | Error::UnknownPersons(_)
                | Error::SelfLoop(_)
                | Error::Json { .. }
                | Error::Csv { .. }
                | Error::Checkpoint(_)
        )
    }
}

fn fmt_suggestions(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!(" (did you mean: {}?)", s.join(", "))
    }
}
