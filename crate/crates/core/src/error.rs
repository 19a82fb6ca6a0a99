use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("{path}: line {line}: {message}")]
    BadRow { path: String, line: u64, message: String },

    #[error("{path}: malformed csv: {message}")]
    Csv { path: String, message: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("export table has no positive entry")]
    AllZeroTable,

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },

    #[error("inconsistent dimensions: {0}")]
    Dimension(String),

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("need at least {needed} usable values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("{value} lies outside the support ({lo}, {hi}]")]
    OutOfSupport { value: f64, lo: f64, hi: f64 },

    #[error("k_c0-k_c1 diagram is degenerate: {0}")]
    DegenerateDiagram(&'static str),

    #[error("R-squared and KS regions do not intersect ({r2_cells} cells in R-squared region, {ks_cells} in KS region)")]
    EmptyIntersection { r2_cells: usize, ks_cells: usize },

    #[error("missing artifact `{0}`")]
    MissingArtifact(String),

    #[error("every distribution fit failed")]
    AllFitsFailed,
}

impl Error {
    /// True for errors caused by bad input or parameters rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::NoConvergence { .. } | Error::EmptyIntersection { .. } | Error::AllFitsFailed
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingColumn { .. } => "missing_column",
            Error::BadRow { .. } => "bad_row",
            Error::Csv { .. } => "csv",
            Error::Empty(_) => "empty_input",
            Error::AllZeroTable => "all_zero_table",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Dimension(_) => "dimension",
            Error::DuplicateLabel(_) => "duplicate_label",
            Error::ZeroVariance => "zero_variance",
            Error::TooFewValues { .. } => "too_few_values",
            Error::NoConvergence { .. } => "no_convergence",
            Error::OutOfSupport { .. } => "out_of_support",
            Error::DegenerateDiagram(_) => "degenerate_diagram",
            Error::EmptyIntersection { .. } => "empty_intersection",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::AllFitsFailed => "all_fits_failed",
        }
    }

    pub(crate) fn invalid(name: &'static str, value: impl Into<f64>, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value: value.into(), reason }
    }
}
