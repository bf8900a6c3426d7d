//! Information content and information-based prices of financial
//! transformations in a Gaussian one-factor model.
//!
//! Every asset return `X_i` carries a side-information variable `Y_i` (its
//! *barcode*):
//!
//! ```text
//! X_i = mu + xi_i + a*xi_0 + J*Y_i
//! Y_i = eta_i + c*eta_0
//! ```
//!
//! Pooling `n` such assets into `X = sum X_i` (or a tranche paying
//! `theta(X - n*mu - k)`) destroys part of the information the barcodes carry.
//! The crate computes how much, in nats or bits, and what mean-variance
//! investors would pay to see the barcode `Y = sum Y_i` before the return is
//! realised.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`model`] | parameters, exact moments, reproducible joint sampling |
//! | [`mi`] | closed-form mutual information and information loss |
//! | [`tranche`] | default probabilities, tranche MI, tranche grids |
//! | [`pricing`] | mean-variance prices, barcode prices, incentive balances |
//! | [`oracle`] | brute-force Monte Carlo estimators with standard errors |
//!
//! Closed forms never depend on [`oracle`], and [`oracle`] only uses the
//! sampler and the normal CDF, so each check compares two independent routes.

pub mod error;
pub mod mi;
pub mod model;
pub mod normal;
pub mod oracle;
pub mod pricing;
pub mod quadrature;
pub mod rng;
pub mod tranche;
pub mod units;

pub use error::{Error, Result};
pub use mi::{MiReport, PortfolioLimit};
pub use model::{ModelParams, Moments, SampleBatch};
pub use normal::{inv_norm_cdf, norm_cdf};
pub use oracle::{EstimateWithError, EstimatorKind};
pub use pricing::{Asset, PriceQuote, RiskPreferences};
pub use quadrature::QuadratureSettings;
pub use tranche::TrancheSpec;
pub use units::Unit;
