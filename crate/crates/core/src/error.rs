use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped so front ends can map them onto stable exit codes
/// through [`Error::category`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("rule is not range-restricted: variable {variable} in `{clause}` does not occur in a positive body literal")]
    RangeRestriction { variable: String, clause: String },
    #[error("predicate {0} is both probabilistic and derived")]
    PredicateOverlap(String),
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("conflicting evidence for {0}")]
    ConflictingEvidence(String),
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("evidence atom {0} does not occur in the Herbrand base")]
    UnknownEvidenceAtom(String),
    #[error("learnable parameter {0} has no value")]
    UnboundParameter(usize),
    #[error("example {example} is not fully observable: {atom} is unobserved (use EM instead)")]
    NotFullyObservable { example: usize, atom: String },
    #[error("program is not sound: well-founded model leaves {} undefined", .undefined.join(", "))]
    Unsound { undefined: Vec<String> },
    #[error("not locally stratified under this converter: loop through negation involving {0}")]
    NotStratified(String),
    #[error("evidence has probability zero: {evidence}")]
    ZeroProbability { evidence: String },
    #[error("KL divergence is infinite: learned parameter {index} is {learned} while the true value is {truth}")]
    InfiniteDivergence {
        index: usize,
        truth: f64,
        learned: f64,
    },
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

/// Coarse classification used by the command line for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Input,
    Unsound,
    ZeroProbability,
    Resource,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Unsound { .. } | Error::NotStratified(_) => Category::Unsound,
            Error::ZeroProbability { .. } | Error::InfiniteDivergence { .. } => {
                Category::ZeroProbability
            }
            Error::ResourceLimit(_) => Category::Resource,
            _ => Category::Input,
        }
    }
}
