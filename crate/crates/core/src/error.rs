use thiserror::Error;

use crate::automaton::ValidationReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("trace {0} is not in the generated language")]
    PrefixNotInLanguage(String),

    #[error("observation {0} leaves the diagnoser's transition function")]
    UndefinedObservation(String),

    #[error("locally unobservable class traps probability at site {site} (from state {state})")]
    DivergentUnobservableMass { site: String, state: String },

    #[error("automaton failed validation:\n{0}")]
    ValidationFailed(ValidationReport),

    #[error("codiagnoser state {0} was not constructed")]
    UnreachableState(usize),

    #[error("horizon {requested} exceeds enumeration bound {bound}")]
    HorizonTooLarge { requested: usize, bound: usize },

    #[error("unknown event `{0}`")]
    UnknownEvent(String),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown failure class `{0}`")]
    UnknownFailureClass(String),

    #[error("site {site} out of range (automaton has {sites} sites)")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("seed {0} does not end in a failure event of the queried class")]
    NotAFailureSeed(String),

    #[error("{line}:{column}: parse error: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{line}: {message}")]
    Semantic { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
