use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed data: wrong shapes, non-finite entries, too few rows.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Indices or parameters outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A constrained l1 problem has no feasible point at the requested level.
    #[error("infeasible: constraint {constraint} cannot be met at level {level:.6e} (feasible only down to {boundary:.6e})")]
    Infeasible {
        constraint: usize,
        level: f64,
        boundary: f64,
    },

    /// A CLIME row problem is infeasible.
    #[error("CLIME row {row} infeasible: {source}")]
    InfeasibleRow {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An error raised while processing one change point.
    #[error("change point #{index} ({stage}): {source}")]
    Stage {
        index: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_stage(self, index: usize, stage: &'static str) -> Self {
        Error::Stage {
            index,
            stage,
            source: Box::new(self),
        }
    }

    /// True if the error stems from a numerical problem (infeasibility,
    /// non-PSD input, solver breakdown) rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Infeasible { .. } | Error::InfeasibleRow { .. } | Error::Numerical(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            Error::InvalidInput(_) | Error::Domain(_) => false,
        }
    }
}
