use thiserror::Error;

/// Errors surfaced by the symbolic engine.
///
/// Mathematical check *failures* (nonzero residuals, failed identities) are not
/// errors; they are reported through [`crate::report::Report`]. Errors are for
/// ill-formed inputs: chart mismatches, grading violations, incomplete maps.
#[derive(Debug, Error)]
pub enum Error {
    #[error("chart mismatch: operand charts `{0}` and `{1}` differ")]
    ChartMismatch(String, String),

    #[error("unknown coordinate `{0}` in chart `{1}`")]
    UnknownCoordinate(String, String),

    #[error("duplicate coordinate name `{0}`")]
    DuplicateCoordinate(String),

    #[error("grading violation for `{name}`: expected {expected}, got {got}")]
    GradingViolation {
        name: String,
        expected: String,
        got: String,
    },

    #[error("expression is not homogeneous: term `{term_a}` has grade {grade_a}, term `{term_b}` has grade {grade_b}")]
    Inhomogeneous {
        term_a: String,
        grade_a: String,
        term_b: String,
        grade_b: String,
    },

    #[error("grade of zero expression is undefined")]
    GradeOfZero,

    #[error("incomplete map: no assignment for coordinate `{0}`")]
    IncompleteMap(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("construction rejected: {0}")]
    Construction(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("parse error at {line}:{col}: {msg} (expected {expected})")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
        expected: String,
    },

    #[error("semantic error at {line}:{col}: {msg}")]
    Semantic { line: usize, col: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
