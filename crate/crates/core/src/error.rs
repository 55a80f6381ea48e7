//! Crate-wide error type wrapping each module's error.

use thiserror::Error;

use crate::copula::CopulaError;
use crate::data::DataError;
use crate::dcc::DccError;
use crate::garch::GarchError;
use crate::gof::GofError;
use crate::mathcore::MathError;
use crate::report::ReportError;
use crate::risk::RiskError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Garch(#[from] GarchError),
    #[error(transparent)]
    Dcc(#[from] DccError),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error(transparent)]
    Gof(#[from] GofError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
