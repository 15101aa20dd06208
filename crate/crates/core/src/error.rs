use std::fmt;

use crate::geometry::Point;

/// One problem found while reading a scenario file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { point: Point, min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vector field is not divergence free: |div| = {residual:e} at {point:?}")]
    NotDivergenceFree { residual: f64, point: Point },

    #[error("non-finite value in cell {cell} at step {step}")]
    NonFinite { step: usize, cell: usize },

    #[error("time step {dt:e} exceeds the monotone limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("characteristic exits branch: foot point {foot}, s = {s}")]
    BranchExit { foot: f64, s: f64 },

    #[error("characteristics cross before t = {t} (estimated crossing time {crossing:e})")]
    CharacteristicsCross { t: f64, crossing: f64 },

    #[error("r = {r} lies inside the horizon r <= 2m = {two_m}")]
    InsideHorizon { r: f64, two_m: f64 },

    #[error("loss of hyperbolicity: d/du f^0 = {value:e} at x = {x}")]
    NotHyperbolic { value: f64, x: f64 },

    #[error("mismatched runs: {0}")]
    Mismatch(String),

    #[error("{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("malformed data in {path}: {message}")]
    Data { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    lines.join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
