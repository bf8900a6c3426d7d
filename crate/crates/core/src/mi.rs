//! Closed-form mutual information between returns and barcodes.
//!
//! All values are in nats. [`MiReport::in_unit`] converts at the reporting
//! boundary.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Moments};
use crate::units::Unit;

/// `I(X_i, Y_i) = 1/2 ln(1 + J^2 (1 + c^2) / (1 + a^2))`.
pub fn mi_asset_barcode(p: &ModelParams) -> f64 {
    let j2 = p.j * p.j;
    0.5 * (j2 * (1.0 + p.c * p.c) / (1.0 + p.a * p.a)).ln_1p()
}

/// `I(X_vec, Y_vec)`: `(n-1)/2 ln(1 + J^2)` from the `n - 1` idiosyncratic
/// directions plus the common-direction term, which equals [`mi_portfolio`].
pub fn mi_total(p: &ModelParams) -> f64 {
    idiosyncratic_information(p) + mi_portfolio(p)
}

/// `I(X_vec, Y_vec) = 1/2 ln(det Cov(X) / det Cov(X | Y_vec))`, evaluated from
/// the eigenvalues of the two equicorrelated covariance matrices.
///
/// `Cov(X)` has diagonal `1 + a^2 + J^2 (1 + c^2)` and off-diagonal
/// `a^2 + J^2 c^2`; `Cov(X | Y_vec) = I + a^2 11^T`. An `n x n` matrix with
/// diagonal `d` and off-diagonal `o` has eigenvalue `d - o` with multiplicity
/// `n - 1` and `d + (n - 1) o` once.
pub fn mi_total_determinant(p: &ModelParams) -> f64 {
    let n = p.n as f64;
    let m = Moments::of(p);
    let cond_diag = 1.0 + p.a * p.a;
    let cond_off = p.a * p.a;

    let x_spread = m.var_xi - m.cov_xi_xj;
    let x_common = m.var_xi + (n - 1.0) * m.cov_xi_xj;
    let c_spread = cond_diag - cond_off;
    let c_common = cond_diag + (n - 1.0) * cond_off;

    0.5 * ((n - 1.0) * (x_spread / c_spread).ln() + (x_common / c_common).ln())
}

/// `I(X, Y) = 1/2 ln(1 + J^2 (1 + n c^2) / (1 + n a^2))`.
pub fn mi_portfolio(p: &ModelParams) -> f64 {
    let n = p.n as f64;
    let j2 = p.j * p.j;
    0.5 * (j2 * (1.0 + n * p.c * p.c) / (1.0 + n * p.a * p.a)).ln_1p()
}

/// `I(X, Y) = 1/2 ln(V(X) / V(X | Y))` from the moments.
pub fn mi_portfolio_from_moments(p: &ModelParams) -> f64 {
    let m = Moments::of(p);
    0.5 * (m.var_x_total / m.var_x_given_y).ln()
}

/// Limit of [`mi_portfolio`] as the pool grows without bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum PortfolioLimit {
    Finite(f64),
    /// `a = 0 < c` with `J > 0`: the barcode pins down the common factor
    /// exactly while idiosyncratic noise averages away.
    Divergent,
}

impl PortfolioLimit {
    pub fn finite(self) -> Option<f64> {
        match self {
            PortfolioLimit::Finite(v) => Some(v),
            PortfolioLimit::Divergent => None,
        }
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            PortfolioLimit::Finite(v) => PortfolioLimit::Finite(f(v)),
            PortfolioLimit::Divergent => PortfolioLimit::Divergent,
        }
    }
}

/// `lim_{n -> inf} I(X, Y)`.
///
/// * `a > 0`: `1/2 ln(1 + J^2 c^2 / a^2)`, which is 0 when `c = 0`.
/// * `a = 0 < c`: divergent (finite 0 if `J = 0`).
/// * `a = c = 0`: the ratio `(1 + n c^2) / (1 + n a^2)` is 1 for every `n`, so
///   the limit is `1/2 ln(1 + J^2)`.
pub fn mi_portfolio_limit(p: &ModelParams) -> PortfolioLimit {
    let j2 = p.j * p.j;
    if p.j == 0.0 {
        PortfolioLimit::Finite(0.0)
    } else if p.a > 0.0 {
        PortfolioLimit::Finite(0.5 * (j2 * (p.c / p.a).powi(2)).ln_1p())
    } else if p.c > 0.0 {
        PortfolioLimit::Divergent
    } else {
        PortfolioLimit::Finite(0.5 * j2.ln_1p())
    }
}

/// Cross information `I(X_i, Y_j)`, `i != j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossInformation {
    /// From `Cov(X_i, Y_j) = J c^2`: squared correlation
    /// `J^2 c^4 / ((1 + c^2)(1 + a^2 + J^2 (1 + c^2)))`.
    pub derived: f64,
    /// Same expression with `J^2 c^2` in the numerator, as it appears in the
    /// literature this model comes from. Agrees with `derived` only at
    /// `c in {0, 1}` or `J = 0`.
    pub printed: f64,
}

impl CrossInformation {
    pub fn discrepancy(&self) -> f64 {
        self.printed - self.derived
    }
}

pub fn mi_cross(p: &ModelParams) -> Result<CrossInformation> {
    if p.n < 2 {
        return Err(Error::BadCount(p.n));
    }
    let (a2, c2, j2) = (p.a * p.a, p.c * p.c, p.j * p.j);
    let denom = (1.0 + c2) * (1.0 + a2 + j2 * (1.0 + c2));
    let info = |rho2: f64| -0.5 * (-rho2).ln_1p();
    Ok(CrossInformation {
        derived: info(j2 * c2 * c2 / denom),
        printed: info(j2 * c2 / denom),
    })
}

/// Information destroyed by pooling, `I(X_vec, Y_vec) - I(X, Y)`.
///
/// Evaluated as the determinant route minus the portfolio closed form, so
/// comparing against [`idiosyncratic_information`] checks two independent
/// computations.
pub fn info_loss(p: &ModelParams) -> f64 {
    mi_total_determinant(p) - mi_portfolio(p)
}

/// `(n - 1)/2 ln(1 + J^2)`.
pub fn idiosyncratic_information(p: &ModelParams) -> f64 {
    0.5 * (p.n as f64 - 1.0) * (p.j * p.j).ln_1p()
}

/// Every closed-form information quantity for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiReport {
    pub params: ModelParams,
    pub unit: Unit,
    pub mi_asset: f64,
    pub mi_total: f64,
    pub mi_portfolio: f64,
    /// `None` for a single asset.
    pub mi_cross: Option<f64>,
    pub mi_cross_printed: Option<f64>,
    pub info_loss: f64,
    pub mi_portfolio_limit: PortfolioLimit,
}

impl MiReport {
    pub fn new(params: &ModelParams) -> Self {
        let cross = mi_cross(params).ok();
        MiReport {
            params: *params,
            unit: Unit::Nats,
            mi_asset: mi_asset_barcode(params),
            mi_total: mi_total(params),
            mi_portfolio: mi_portfolio(params),
            mi_cross: cross.map(|c| c.derived),
            mi_cross_printed: cross.map(|c| c.printed),
            info_loss: info_loss(params),
            mi_portfolio_limit: mi_portfolio_limit(params),
        }
    }

    pub fn in_unit(&self, unit: Unit) -> Self {
        let convert = |v: f64| unit.from_nats(self.unit.to_nats(v));
        MiReport {
            params: self.params,
            unit,
            mi_asset: convert(self.mi_asset),
            mi_total: convert(self.mi_total),
            mi_portfolio: convert(self.mi_portfolio),
            mi_cross: self.mi_cross.map(convert),
            mi_cross_printed: self.mi_cross_printed.map(convert),
            info_loss: convert(self.info_loss),
            mi_portfolio_limit: self.mi_portfolio_limit.map(convert),
        }
    }
}
