use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Diagnostics from an ARMA likelihood search that failed to converge.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub sum_of_squares: f64,
    pub last_relative_change: f64,
    pub damping: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("timestamp error at row {row}: {reason}")]
    Timestamp { row: usize, reason: String },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("rank-deficient Fourier design: column {column} ({label}) is linearly dependent on earlier columns")]
    RankDeficient { column: usize, label: String },

    #[error("ARMA likelihood maximization did not converge after {} iterations (sse={}, rel. change={})", .0.iterations, .0.sum_of_squares, .0.last_relative_change)]
    NotConverged(FitDiagnostics),

    #[error("fitted AR polynomial is not stationary (largest inverse root modulus {max_inverse_root:.6})")]
    NonStationary { max_inverse_root: f64 },

    #[error("site {site} with {capacity_mwe} MWe cannot host the minimum {floor_mwe} MWe synfuel process")]
    InfeasibleSite {
        site: String,
        capacity_mwe: f64,
        floor_mwe: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("dispatch infeasible at hour {hour}: {reason}")]
    DispatchInfeasible { hour: usize, reason: String },

    #[error("oracle refused: {0}")]
    OracleTooLarge(String),

    #[error("unsupported MACRS class life {0} years")]
    UnsupportedClassLife(u32),

    #[error("change in profitability undefined: reference NPV equals baseline NPV")]
    UndefinedReference,

    #[error("CO2 demand {requested_tpy:.1} t/yr exceeds supply curve extent {extent_tpy:.1} t/yr")]
    BeyondSupplyCurve { requested_tpy: f64, extent_tpy: f64 },

    #[error("CO2 sources cover {available_tpy:.1} t/yr, short of the {required_tpy:.1} t/yr bound by {deficit_tpy:.1} t/yr")]
    SupplyShortfall {
        available_tpy: f64,
        required_tpy: f64,
        deficit_tpy: f64,
    },

    #[error("unknown CO2 source kind `{0}`")]
    UnknownSourceKind(String),

    #[error("fuel price track for {region} does not cover year {year}")]
    TrackSpan { region: String, year: i32 },

    #[error("no feasible scenario results to choose from")]
    NoFeasibleResult,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in the CLI's JSON error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NonFinite { .. } => "non_finite",
            Error::Timestamp { .. } => "timestamp",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NotConverged(_) => "not_converged",
            Error::NonStationary { .. } => "non_stationary",
            Error::InfeasibleSite { .. } => "infeasible_site",
            Error::InvalidConfiguration(_) => "invalid_configuration",
            Error::DispatchInfeasible { .. } => "dispatch_infeasible",
            Error::OracleTooLarge(_) => "oracle_too_large",
            Error::UnsupportedClassLife(_) => "unsupported_class_life",
            Error::UndefinedReference => "undefined_reference",
            Error::BeyondSupplyCurve { .. } => "beyond_supply_curve",
            Error::SupplyShortfall { .. } => "supply_shortfall",
            Error::UnknownSourceKind(_) => "unknown_source_kind",
            Error::TrackSpan { .. } => "track_span",
            Error::NoFeasibleResult => "no_feasible_result",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::Json { .. } => "json",
        }
    }
}
