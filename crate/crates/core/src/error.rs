// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the detection, simulation and null-distribution routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The variance used for standardization is zero (e.g. a constant
    /// pre-change segment).
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error(
        "insufficient post-change data: n = {n}, but at least n >= {required} is needed \
         to form one length-{k} window after block {eta}"
    )]
    InsufficientPostChangeData {
        n: usize,
        k: usize,
        eta: usize,
        required: usize,
    },

    #[error("quantile cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// `true` for errors caused by the statistical content of the data rather
    /// than by usage or I/O.
    pub fn is_degenerate_input(&self) -> bool {
        matches!(
            self,
            Error::DegenerateVariance(_) | Error::InsufficientPostChangeData { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
