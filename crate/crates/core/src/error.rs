use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("field format error: {0}")]
    Format(String),

    #[error("solver `{solver}` did not converge after {iterations} iterations (last residual {last_residual:e}){}", note.as_deref().map(|n| format!(": {n}")).unwrap_or_default())]
    Divergence {
        solver: &'static str,
        iterations: usize,
        last_residual: f64,
        /// Residual after every sweep or step, oldest first.
        history: Vec<f64>,
        note: Option<String>,
    },

    #[error("solver `{solver}` failed: {reason}")]
    Solver { solver: &'static str, reason: String },

    #[error("monte carlo budget exhausted: {hit} of {paths} paths hit the target, {alive} still alive at t = {horizon}")]
    Budget {
        paths: usize,
        hit: usize,
        alive: usize,
        horizon: f64,
    },

    #[error("{what} is out of range: {reason}")]
    Range { what: &'static str, reason: String },

    #[error("bracket [{lo}, {hi}] does not isolate a threshold: {reason}")]
    Bracket { lo: f64, hi: f64, reason: String },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("while processing {context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a description of the job that produced it.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self.root(), Error::Divergence { .. })
    }
}
