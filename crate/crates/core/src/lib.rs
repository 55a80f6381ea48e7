//! Dependence and tail-risk modelling for daily equity returns.
//!
//! The pipeline loads price series, filters each asset with a GARCH(1,1)
//! model, fits dynamic conditional correlation and a set of copula families
//! to the standardized residuals, compares the families by likelihood,
//! information criteria and energy score, and estimates VaR, CVaR and CoVaR
//! by Monte Carlo simulation from the fitted joint model.

pub mod copula;
pub mod data;
pub mod dcc;
pub mod error;
pub mod garch;
pub mod gof;
pub mod mathcore;
pub mod report;
pub mod risk;

pub use error::{Error, Result};
