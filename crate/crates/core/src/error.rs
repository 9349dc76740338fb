use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("arm {0} has no subjects")]
    EmptyArm(u8),
    #[error("subject {subject}: arm value {value} is not 0 or 1")]
    InvalidArm { subject: String, value: u8 },
    #[error("subject {subject}, endpoint {endpoint}: negative time {time}")]
    NegativeTime {
        subject: String,
        endpoint: String,
        time: f64,
    },
    #[error("subject {subject}, endpoint {endpoint}: time is not finite")]
    NonFiniteTime { subject: String, endpoint: String },
    #[error("subject {subject}, endpoint {endpoint}: status {value} is not 0 or 1")]
    UnknownStatus {
        subject: String,
        endpoint: String,
        value: u8,
    },
    #[error("subject {subject} has {found} endpoint values, expected {expected}")]
    RaggedEndpoints {
        subject: String,
        found: usize,
        expected: usize,
    },
    #[error("duplicate endpoint name {0}")]
    DuplicateEndpoint(String),
    #[error("dataset needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(String),
    #[error("endpoint {0} has no events")]
    NoEvents(String),
    #[error("endpoint {0}: log-rank variance is zero")]
    ZeroVariance(String),
    #[error("endpoint {0}: influence column has zero variance")]
    ZeroDenominator(String),
    #[error("correlation matrix is not positive semidefinite")]
    NotPsd,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("copula parameter {theta} is outside the admissible range for {copula}")]
    BadTheta { copula: &'static str, theta: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("only {found} primary events occurred, {needed} needed to stop the trial")]
    InsufficientEvents { needed: usize, found: usize },
}
