use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid life table: {0}")]
    InvalidTable(String),

    #[error("invalid savings: {0}")]
    InvalidSavings(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time {t} is at or beyond the limiting age (horizon {horizon} years)")]
    BeyondLimitingAge { t: u32, horizon: u32 },

    #[error("member {0} is already dead")]
    AlreadyDead(usize),

    #[error("member index {index} out of range for a pool of {len}")]
    MemberOutOfRange { index: usize, len: usize },

    #[error("one-year survival probability is zero")]
    ZeroSurvival,

    #[error("the (1 - beta) quantile is undefined for {replications} replications at beta = {beta}")]
    QuantileUndefined { replications: usize, beta: f64 },

    #[error("exhaustive search space of {size} subgroups exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("savings are not beneficial")]
    NotBeneficial,
}

impl Error {
    /// Errors that come from valid input hitting a numerical boundary, as
    /// opposed to malformed input. The CLI maps these to exit code 3.
    pub fn is_numerical_domain(&self) -> bool {
        matches!(
            self,
            Error::BeyondLimitingAge { .. }
                | Error::ZeroSurvival
                | Error::QuantileUndefined { .. }
                | Error::SearchSpaceTooLarge { .. }
        )
    }
}
