use thiserror::Error;

use crate::domain::Predicate;
use crate::trace::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the planning core and the pipeline phases built on it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("unsupported domain format version {0}")]
    UnsupportedVersion(u32),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),

    #[error("unknown object type `{0}`")]
    UnknownType(String),

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("unknown goal set `{0}`")]
    UnknownGoal(String),

    #[error("`{name}` takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },

    #[error("`{object}` has type `{actual}` but `{context}` expects `{expected}`")]
    TypeMismatch {
        object: String,
        actual: String,
        expected: String,
        context: String,
    },

    #[error("{action} is not applicable: missing {}", fmt_atoms(.missing))]
    Inapplicable { action: String, missing: Vec<Predicate> },

    #[error("plan step {index} ({action}) is not applicable: missing {}", fmt_atoms(.missing))]
    Simulation {
        index: usize,
        action: String,
        missing: Vec<Predicate>,
    },

    #[error("search budget of {budget} node expansions exhausted")]
    Budget { budget: usize },

    #[error("trace step {index} cannot be reached by the planner")]
    Unsolvable { index: usize },

    #[error("priority group {priority} cannot be planned")]
    GroupUnsolvable { priority: u32 },

    #[error("unknown step id {0}")]
    UnknownStep(u32),

    #[error("{0} has no postconditions to abstract to")]
    EmptyGoal(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    #[error("oracle refuses traces longer than {limit} steps (got {len})")]
    OracleLimit { limit: usize, len: usize },

    #[error("no admissible placement found in any of {trials} trial(s)")]
    PerturbationExhausted { trials: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("phase {phase} cannot be submitted before phase {cursor}")]
    PhaseOrder { phase: u8, cursor: u8 },

    #[error("invalid steps: {0}")]
    InvalidSteps(ValidationReport),

    #[error("invalid payload: {0}")]
    InvalidPayload(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::UnsupportedVersion(_) => "unsupported-version",
            Error::InvalidDomain(_) => "invalid-domain",
            Error::UndeclaredPredicate(_) => "undeclared-predicate",
            Error::UnknownType(_) => "unknown-type",
            Error::UnknownObject(_) => "unknown-object",
            Error::UnknownAction(_) => "unknown-action",
            Error::UnknownGoal(_) => "unknown-goal",
            Error::Arity { .. } => "arity",
            Error::TypeMismatch { .. } => "type-mismatch",
            Error::Inapplicable { .. } => "inapplicable",
            Error::Simulation { .. } => "simulation",
            Error::Budget { .. } => "budget",
            Error::Unsolvable { .. } => "unsolvable",
            Error::GroupUnsolvable { .. } => "group-unsolvable",
            Error::UnknownStep(_) => "unknown-step",
            Error::EmptyGoal(_) => "empty-goal",
            Error::InvalidTrace(_) => "invalid-trace",
            Error::InvalidGrouping(_) => "invalid-grouping",
            Error::OracleLimit { .. } => "oracle-limit",
            Error::PerturbationExhausted { .. } => "perturbation-exhausted",
            Error::Config(_) => "config",
            Error::UnknownDomain(_) => "unknown-domain",
            Error::UnknownSession(_) => "unknown-session",
            Error::PhaseOrder { .. } => "phase-order",
            Error::InvalidSteps(_) => "invalid-steps",
            Error::InvalidPayload(_) => "invalid-payload",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Trace positions the error is about, for highlighting in a client.
    pub fn step_indices(&self) -> Vec<usize> {
        match self {
            Error::InvalidSteps(report) => report.step_indices(),
            Error::Unsolvable { index } => vec![*index],
            _ => Vec::new(),
        }
    }
}

pub(crate) fn fmt_atoms(atoms: &[Predicate]) -> String {
    let parts: Vec<String> = atoms.iter().map(ToString::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}
