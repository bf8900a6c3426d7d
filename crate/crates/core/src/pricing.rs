//! Mean-variance prices with and without barcodes.
//!
//! An asset `Z` is quoted at `p_Z = E[Z] - alpha V(Z)`; with the barcode
//! revealed it is quoted at `p_{Z|y} = E[Z | Y = y] - alpha V(Z | Y = y)`.
//! The barcode price is the expected uplift
//! `dp_Z = E[p_{Z|Y}] - p_Z = alpha V(E[Z | Y])`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Moments};
use crate::normal::norm_cdf;
use crate::quadrature::{integrate_stable, QuadratureSettings};
use crate::tranche::{conditional_default_moments, default_prob, tranche_sharpness, TrancheSpec};

/// Risk aversion of the mean-variance quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPreferences {
    pub alpha: f64,
}

impl Default for RiskPreferences {
    fn default() -> Self {
        RiskPreferences { alpha: 1.0 }
    }
}

impl RiskPreferences {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Domain {
                what: "risk aversion alpha",
                value: alpha,
            });
        }
        Ok(RiskPreferences { alpha })
    }

    /// Preferences of a CRRA investor putting a fraction `epsilon` of wealth
    /// into the asset.
    pub fn from_crra(epsilon: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha_from_crra(epsilon, gamma)?)
    }
}

/// `alpha = -epsilon U''(W) W / (2 U'(W))`, which for CRRA utility with
/// relative risk aversion `gamma` is `epsilon gamma / 2`.
pub fn alpha_from_crra(epsilon: f64, gamma: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain {
            what: "investment fraction epsilon",
            value: epsilon,
        });
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Domain {
            what: "CRRA coefficient gamma",
            value: gamma,
        });
    }
    Ok(epsilon * gamma / 2.0)
}

/// What is being priced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Asset {
    /// One asset `X_i`, with its own barcode `Y_i`.
    SingleAsset,
    /// `X / n`, with barcode `Y`.
    PortfolioMean,
    /// `X`, with barcode `Y`.
    PortfolioTotal,
    /// `X / m`, with barcode `Y`.
    PortfolioShare { m: usize },
    /// `f theta(X - n mu - k)`, with barcode `Y`.
    Tranche { k: f64, f: f64 },
}

impl Asset {
    fn validate(self) -> Result<Self> {
        match self {
            Asset::PortfolioShare { m: 0 } => {
                Err(Error::BadAsset("share count must be positive".into()))
            }
            Asset::Tranche { k, f } if !(k.is_finite() && f.is_finite() && f > 0.0) => {
                Err(Error::BadAsset(format!(
                    "tranche needs finite k and positive f, got k={k}, f={f}"
                )))
            }
            other => Ok(other),
        }
    }

    /// Divisor `m` for the linear claims `X / m` on the pool.
    fn pool_divisor(self, n: usize) -> Option<f64> {
        match self {
            Asset::PortfolioMean => Some(n as f64),
            Asset::PortfolioTotal => Some(1.0),
            Asset::PortfolioShare { m } => Some(m as f64),
            _ => None,
        }
    }
}

/// First and second moments of a linear claim, unconditional and given its
/// barcode. The conditional mean is `intercept + slope * y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearMoments {
    pub mean: f64,
    pub variance: f64,
    pub cond_intercept: f64,
    pub cond_slope: f64,
    pub cond_variance: f64,
    /// Variance of the barcode the claim is conditioned on.
    pub barcode_variance: f64,
}

pub fn linear_moments(asset: Asset, params: &ModelParams) -> Option<LinearMoments> {
    let m = Moments::of(params);
    if asset == Asset::SingleAsset {
        return Some(LinearMoments {
            mean: params.mu,
            variance: m.var_xi,
            cond_intercept: params.mu,
            cond_slope: params.j,
            cond_variance: 1.0 + params.a * params.a,
            barcode_variance: m.var_yi,
        });
    }
    let d = asset.pool_divisor(params.n)?;
    Some(LinearMoments {
        mean: m.mean_x / d,
        variance: m.var_x_total / (d * d),
        cond_intercept: m.mean_x / d,
        cond_slope: m.cond_mean_slope / d,
        cond_variance: m.var_x_given_y / (d * d),
        barcode_variance: m.var_y_total,
    })
}

/// `E[Z] - alpha V(Z)`.
pub fn price_unconditional(
    asset: Asset,
    params: &ModelParams,
    prefs: &RiskPreferences,
) -> Result<f64> {
    let asset = asset.validate()?;
    if let Some(lm) = linear_moments(asset, params) {
        return Ok(lm.mean - prefs.alpha * lm.variance);
    }
    let Asset::Tranche { k, f } = asset else {
        unreachable!()
    };
    let p_bar = default_prob(params, k);
    let survive = norm_cdf(-k / Moments::of(params).var_x_total.sqrt());
    Ok(f * survive - prefs.alpha * f * f * p_bar * survive)
}

/// `E[Z | Y = y] - alpha V(Z | Y = y)`; `y` is the value of the asset's own
/// barcode (`Y_i` for a single asset, `Y` otherwise).
pub fn price_conditional(
    asset: Asset,
    params: &ModelParams,
    prefs: &RiskPreferences,
    y: f64,
) -> Result<f64> {
    let asset = asset.validate()?;
    if let Some(lm) = linear_moments(asset, params) {
        return Ok(lm.cond_intercept + lm.cond_slope * y - prefs.alpha * lm.cond_variance);
    }
    let Asset::Tranche { k, f } = asset else {
        unreachable!()
    };
    let sd = Moments::of(params).var_x_given_y.sqrt();
    let s = (k - params.j * y) / sd;
    let (p, q) = (norm_cdf(s), norm_cdf(-s));
    Ok(f * q - prefs.alpha * f * f * p * q)
}

/// `dp_Z = alpha V(E[Z | Y])`.
///
/// Closed forms for linear claims: `alpha J^2 (1 + c^2)` for one asset,
/// `alpha J^2 (1/n + c^2)` for the mean, `alpha J^2 n (1 + n c^2) / m^2` for
/// `X / m`. Tranches integrate `V_Y(p_d(Y))` by quadrature.
pub fn barcode_price(
    asset: Asset,
    params: &ModelParams,
    prefs: &RiskPreferences,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let asset = asset.validate()?;
    let j2 = params.j * params.j;
    let (n, c2) = (params.n as f64, params.c * params.c);
    let variance = match asset {
        Asset::SingleAsset => j2 * (1.0 + c2),
        Asset::PortfolioMean => j2 * (1.0 / n + c2),
        Asset::PortfolioTotal => j2 * n * (1.0 + n * c2),
        Asset::PortfolioShare { m } => j2 * n * (1.0 + n * c2) / (m as f64).powi(2),
        Asset::Tranche { k, f } => {
            f * f * conditional_default_moments(params, k, settings)?.variance
        }
    };
    Ok(prefs.alpha * variance)
}

/// `alpha (V(Z) - E[V(Z | Y)])`, the variance-reduction route to the barcode
/// price.
pub fn barcode_price_by_variance_reduction(
    asset: Asset,
    params: &ModelParams,
    prefs: &RiskPreferences,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let asset = asset.validate()?;
    if let Some(lm) = linear_moments(asset, params) {
        return Ok(prefs.alpha * (lm.variance - lm.cond_variance));
    }
    let Asset::Tranche { k, f } = asset else {
        unreachable!()
    };
    let p_bar = default_prob(params, k);
    let moments = conditional_default_moments(params, k, settings)?;
    Ok(prefs.alpha * f * f * (p_bar * (1.0 - p_bar) - moments.mean_bernoulli_variance))
}

/// `E_Y[p_{Z|Y}]` by quadrature over the asset's barcode law.
pub fn expected_conditional_price(
    asset: Asset,
    params: &ModelParams,
    prefs: &RiskPreferences,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let asset = asset.validate()?;
    let barcode_var = match linear_moments(asset, params) {
        Some(lm) => lm.barcode_variance,
        None => Moments::of(params).var_y_total,
    };
    let sharpness = if matches!(asset, Asset::Tranche { .. }) {
        tranche_sharpness(params)
    } else {
        0.0
    };
    let out = integrate_stable(settings, sharpness, |rule| {
        vec![rule.expect_normal(barcode_var, |y| {
            price_conditional(asset, params, prefs, y).expect("asset validated above")
        })]
    })?;
    Ok(out.value[0])
}

/// How the conditional quote depends on the barcode value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ConditionalPrice {
    /// `intercept + slope * y`.
    Affine { intercept: f64, slope: f64 },
    /// `f (1 - p(y)) - alpha f^2 p(y) (1 - p(y))` with
    /// `p(y) = H((k - J y) / sd_given_y)`.
    Tranche {
        k: f64,
        f: f64,
        j: f64,
        sd_given_y: f64,
        alpha: f64,
    },
}

impl ConditionalPrice {
    pub fn at(&self, y: f64) -> f64 {
        match *self {
            ConditionalPrice::Affine { intercept, slope } => intercept + slope * y,
            ConditionalPrice::Tranche {
                k,
                f,
                j,
                sd_given_y,
                alpha,
            } => {
                let s = (k - j * y) / sd_given_y;
                let (p, q) = (norm_cdf(s), norm_cdf(-s));
                f * q - alpha * f * f * p * q
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceQuote {
    pub asset: Asset,
    pub price_unconditional: f64,
    pub conditional: ConditionalPrice,
    pub barcode_price: f64,
}

pub fn quote(
    asset: Asset,
    params: &ModelParams,
    prefs: &RiskPreferences,
    settings: &QuadratureSettings,
) -> Result<PriceQuote> {
    let asset = asset.validate()?;
    let conditional = match linear_moments(asset, params) {
        Some(lm) => ConditionalPrice::Affine {
            intercept: lm.cond_intercept - prefs.alpha * lm.cond_variance,
            slope: lm.cond_slope,
        },
        None => {
            let Asset::Tranche { k, f } = asset else {
                unreachable!()
            };
            ConditionalPrice::Tranche {
                k,
                f,
                j: params.j,
                sd_given_y: Moments::of(params).var_x_given_y.sqrt(),
                alpha: prefs.alpha,
            }
        }
    };
    Ok(PriceQuote {
        asset,
        price_unconditional: price_unconditional(asset, params, prefs)?,
        conditional,
        barcode_price: barcode_price(asset, params, prefs, settings)?,
    })
}

/// Revenue from selling barcoded claims minus the cost of the per-asset
/// barcodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncentiveBalance {
    /// `n dp_{X/n} - sum_i dp_{X_i}`.
    pub mean_shares: f64,
    /// `-alpha (n - 1) J^2`.
    pub mean_shares_expected: f64,
    /// `dp_X - sum_i dp_{X_i}`.
    pub whole_portfolio: f64,
    /// `alpha n (n - 1) J^2 c^2`.
    pub whole_portfolio_expected: f64,
    /// Selling `n` mean shares does not pay for the information.
    pub mean_shares_deficit: bool,
    /// Selling the whole pool does.
    pub whole_portfolio_surplus: bool,
}

pub fn incentive_balance(
    params: &ModelParams,
    prefs: &RiskPreferences,
) -> Result<IncentiveBalance> {
    let q = QuadratureSettings::default();
    let n = params.n as f64;
    let per_asset = barcode_price(Asset::SingleAsset, params, prefs, &q)?;
    let cost: f64 = std::iter::repeat_n(per_asset, params.n).sum();
    let mean_shares = n * barcode_price(Asset::PortfolioMean, params, prefs, &q)? - cost;
    let whole_portfolio = barcode_price(Asset::PortfolioTotal, params, prefs, &q)? - cost;
    let j2 = params.j * params.j;
    Ok(IncentiveBalance {
        mean_shares,
        mean_shares_expected: -prefs.alpha * (n - 1.0) * j2,
        whole_portfolio,
        whole_portfolio_expected: prefs.alpha * n * (n - 1.0) * j2 * params.c * params.c,
        mean_shares_deficit: mean_shares < 0.0,
        whole_portfolio_surplus: whole_portfolio > 0.0,
    })
}

/// Bounds on the number `m` of shares `X / m` for which
/// `m dp_{X/m} - n dp_{X_i} >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShareSizeBounds {
    /// `(1 + J^2 (1 + n c^2)) / (1 + J^2 (1 + c^2))` as published.
    pub printed_bound: f64,
    /// `(1 + n c^2) / (1 + c^2)`, which follows from the barcode prices here.
    pub derived_bound: f64,
    /// Largest `m` in `1..=n` passing the inequality, found by scanning the
    /// barcode prices of the shares.
    pub largest_viable_m: usize,
}

pub fn min_share_size(params: &ModelParams) -> Result<ShareSizeBounds> {
    let (n, c2, j2) = (params.n as f64, params.c * params.c, params.j * params.j);
    let prefs = RiskPreferences::default();
    let q = QuadratureSettings::default();
    let cost = n * barcode_price(Asset::SingleAsset, params, &prefs, &q)?;
    let mut largest = 0;
    for m in 1..=params.n {
        let revenue = m as f64 * barcode_price(Asset::PortfolioShare { m }, params, &prefs, &q)?;
        // relative slack absorbs rounding at exact ties (c = 0 gives m = 1)
        if revenue - cost >= -1e-12 * cost.max(revenue) {
            largest = m;
        }
    }
    Ok(ShareSizeBounds {
        printed_bound: (1.0 + j2 * (1.0 + n * c2)) / (1.0 + j2 * (1.0 + c2)),
        derived_bound: (1.0 + n * c2) / (1.0 + c2),
        largest_viable_m: largest,
    })
}

/// Value lost by selling a tranche decomposition piece by piece.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranchePriceGap {
    /// `dp` of the whole staircase `sum_j f_j F_{k_j}`.
    pub staircase_price: f64,
    /// `sum_j dp_{f_j F_{k_j}}`.
    pub sum_of_tranche_prices: f64,
    /// `staircase_price - sum_of_tranche_prices`.
    pub gap: f64,
    /// `Cov_Y(E[F_{k_i} | Y], E[F_{k_j} | Y])`, row-major `m x m`.
    pub conditional_mean_covariance: Vec<f64>,
    pub nodes: usize,
}

impl TranchePriceGap {
    pub fn smallest_cross_covariance(&self) -> Option<f64> {
        let m = (self.conditional_mean_covariance.len() as f64).sqrt() as usize;
        (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.conditional_mean_covariance[i * m + j])
            .reduce(f64::min)
    }
}

/// `dp` of the staircase minus the sum of the tranche `dp`s, which equals
/// `alpha sum_{i != j} f_i f_j Cov(E[F_i | Y], E[F_j | Y])`.
pub fn tranche_price_gap(
    params: &ModelParams,
    prefs: &RiskPreferences,
    spec: &TrancheSpec,
    settings: &QuadratureSettings,
) -> Result<TranchePriceGap> {
    let m = spec.len();
    let moments = Moments::of(params);
    let sd = moments.var_x_given_y.sqrt();
    let var_y = moments.var_y_total;
    let survival = |k: f64, y: f64| norm_cdf((params.j * y - k) / sd);

    if params.j == 0.0 {
        // conditional means are constants; skip the rounding noise of the rule
        return Ok(TranchePriceGap {
            staircase_price: 0.0,
            sum_of_tranche_prices: 0.0,
            gap: 0.0,
            conditional_mean_covariance: vec![0.0; m * m],
            nodes: 0,
        });
    }
    let out = integrate_stable(settings, tranche_sharpness(params), |rule| {
        let means: Vec<f64> = spec
            .thresholds
            .iter()
            .map(|&k| rule.expect_normal(var_y, |y| survival(k, y)))
            .collect();
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let (ki, kj) = (spec.thresholds[i], spec.thresholds[j]);
                let v = rule.expect_normal(var_y, |y| {
                    (survival(ki, y) - means[i]) * (survival(kj, y) - means[j])
                });
                cov[i * m + j] = v;
                cov[j * m + i] = v;
            }
        }
        cov
    })?;
    let cov = out.value;
    let f = &spec.weights;
    let mut staircase = 0.0;
    let mut diagonal = 0.0;
    for i in 0..m {
        for j in 0..m {
            staircase += f[i] * f[j] * cov[i * m + j];
        }
        diagonal += f[i] * f[i] * cov[i * m + i];
    }
    let mut cross = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                cross += f[i] * f[j] * cov[i * m + j];
            }
        }
    }
    Ok(TranchePriceGap {
        staircase_price: prefs.alpha * staircase,
        sum_of_tranche_prices: prefs.alpha * diagonal,
        gap: prefs.alpha * cross,
        conditional_mean_covariance: cov,
        nodes: out.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tranche::{build_tranche_grid_from_default_probs, threshold_from_default_prob};
    use proptest::prelude::*;

    fn params(mu: f64, a: f64, c: f64, j: f64, n: usize) -> ModelParams {
        ModelParams { mu, a, c, j, n }
    }

    fn q() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn unit() -> RiskPreferences {
        RiskPreferences::default()
    }

    #[test]
    fn crra_alpha() {
        assert_eq!(alpha_from_crra(0.5, 0.0).unwrap(), 0.0);
        // log utility: U = ln W, -U'' W / U' = (1/W^2) W / (1/W) = 1
        assert!((alpha_from_crra(0.1, 1.0).unwrap() - 0.05).abs() < 1e-15);
        // U = -1/W: U' = 1/W^2, U'' = -2/W^3, -U'' W / U' = 2
        assert!((alpha_from_crra(0.01, 2.0).unwrap() - 0.01).abs() < 1e-15);
        assert!(alpha_from_crra(0.0, 1.0).is_err());
        assert!(alpha_from_crra(1.5, 1.0).is_err());
        assert!(alpha_from_crra(0.5, -1.0).is_err());
        assert!(RiskPreferences::new(-0.1).is_err());
        assert_eq!(RiskPreferences::from_crra(0.1, 1.0).unwrap().alpha, 0.05);
    }

    #[test]
    fn crra_alpha_matches_finite_difference_curvature() {
        // -eps U''(W) W / (2 U'(W)) with U(W) = W^(1-gamma)/(1-gamma)
        for (eps, gamma) in [(0.1, 0.5), (0.3, 3.0), (1.0, 2.0)] {
            let u = |w: f64| -> f64 { w.powf(1.0 - gamma) / (1.0 - gamma) };
            let (w, h) = (2.0f64, 1e-4);
            let d1 = (u(w + h) - u(w - h)) / (2.0 * h);
            let d2 = (u(w + h) - 2.0 * u(w) + u(w - h)) / (h * h);
            let alpha = -eps * d2 * w / (2.0 * d1);
            assert!((alpha - alpha_from_crra(eps, gamma).unwrap()).abs() < 1e-5);
        }
    }

    #[test]
    fn unconditional_examples() {
        let p = params(0.1, 0.3, 0.5, 0.5, 10);
        let neutral = RiskPreferences::new(0.0).unwrap();
        assert_eq!(
            price_unconditional(Asset::SingleAsset, &p, &neutral).unwrap(),
            0.1
        );
        assert!(
            (price_unconditional(Asset::PortfolioTotal, &p, &neutral).unwrap() - 1.0).abs() < 1e-12
        );
        let single = price_unconditional(Asset::SingleAsset, &p, &unit()).unwrap();
        assert!((single - (-1.3025)).abs() < 1e-12);
        let mean = price_unconditional(Asset::PortfolioMean, &p, &unit()).unwrap();
        assert!((mean - (0.1 - 27.75 / 100.0)).abs() < 1e-12);
        let tranche = price_unconditional(Asset::Tranche { k: 0.0, f: 1.0 }, &p, &unit()).unwrap();
        assert!((tranche - 0.25).abs() < 1e-15);
    }

    #[test]
    fn conditional_examples() {
        let flat = params(0.1, 0.3, 0.5, 0.0, 10);
        for asset in [
            Asset::SingleAsset,
            Asset::PortfolioMean,
            Asset::PortfolioTotal,
            Asset::PortfolioShare { m: 3 },
        ] {
            let u = price_unconditional(asset, &flat, &unit()).unwrap();
            for y in [-2.0, 0.0, 3.0] {
                assert!((price_conditional(asset, &flat, &unit(), y).unwrap() - u).abs() < 1e-12);
            }
        }
        let p = params(0.0, 0.3, 0.5, 0.5, 10);
        let v = price_conditional(Asset::PortfolioTotal, &p, &unit(), 1.0).unwrap();
        assert!((v - (-18.5)).abs() < 1e-12);
    }

    #[test]
    fn barcode_price_examples() {
        let p = params(0.0, 0.3, 0.5, 0.5, 10);
        assert!(
            (barcode_price(Asset::SingleAsset, &p, &unit(), &q()).unwrap() - 0.3125).abs() < 1e-15
        );
        assert!(
            (barcode_price(Asset::PortfolioMean, &p, &unit(), &q()).unwrap() - 0.0875).abs()
                < 1e-15
        );
        assert!(
            (barcode_price(Asset::PortfolioTotal, &p, &unit(), &q()).unwrap() - 8.75).abs() < 1e-12
        );
        let zero = RiskPreferences::new(0.0).unwrap();
        assert_eq!(
            barcode_price(Asset::PortfolioTotal, &p, &zero, &q()).unwrap(),
            0.0
        );
        let silent = params(0.0, 0.3, 0.5, 0.0, 10);
        let flat =
            barcode_price(Asset::Tranche { k: 0.0, f: 1.0 }, &silent, &unit(), &q()).unwrap();
        assert!((0.0..1e-15).contains(&flat));
        assert!(barcode_price(Asset::PortfolioShare { m: 0 }, &p, &unit(), &q()).is_err());
        assert!(barcode_price(Asset::Tranche { k: 0.0, f: -1.0 }, &p, &unit(), &q()).is_err());
    }

    #[test]
    fn expected_conditional_price_identity() {
        let p = params(0.2, 0.3, 0.5, 0.5, 10);
        let prefs = RiskPreferences::new(0.7).unwrap();
        let k = threshold_from_default_prob(&p, 0.05).unwrap();
        for asset in [
            Asset::SingleAsset,
            Asset::PortfolioMean,
            Asset::PortfolioTotal,
            Asset::PortfolioShare { m: 4 },
            Asset::Tranche { k, f: 1.0 },
            Asset::Tranche { k: 0.0, f: 2.0 },
        ] {
            let uplift = expected_conditional_price(asset, &p, &prefs, &q()).unwrap()
                - price_unconditional(asset, &p, &prefs).unwrap();
            let dp = barcode_price(asset, &p, &prefs, &q()).unwrap();
            let tol = if matches!(asset, Asset::Tranche { .. }) {
                1e-9
            } else {
                1e-12
            };
            assert!(
                (uplift - dp).abs() <= tol * dp.abs().max(1.0),
                "{asset:?}: {uplift} vs {dp}"
            );
        }
    }

    #[test]
    fn quote_matches_pointwise_prices() {
        let p = params(0.2, 0.3, 0.5, 0.5, 10);
        for asset in [
            Asset::SingleAsset,
            Asset::PortfolioShare { m: 3 },
            Asset::Tranche { k: -1.0, f: 0.5 },
        ] {
            let qt = quote(asset, &p, &unit(), &q()).unwrap();
            for y in [-1.0, 0.0, 2.5] {
                let direct = price_conditional(asset, &p, &unit(), y).unwrap();
                assert!((qt.conditional.at(y) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incentive_examples() {
        let b = incentive_balance(&params(0.0, 0.3, 0.5, 0.5, 10), &unit()).unwrap();
        assert!((b.mean_shares - (-2.25)).abs() < 1e-12);
        assert!((b.whole_portfolio - 5.625).abs() < 1e-12);
        assert!(b.mean_shares_deficit && b.whole_portfolio_surplus);
        let single = incentive_balance(&params(0.0, 0.3, 0.5, 0.5, 1), &unit()).unwrap();
        assert!(single.mean_shares.abs() < 1e-15 && single.whole_portfolio.abs() < 1e-15);
        let independent = incentive_balance(&params(0.0, 0.3, 0.0, 0.5, 10), &unit()).unwrap();
        assert!(independent.whole_portfolio.abs() < 1e-12);
    }

    #[test]
    fn share_size_examples() {
        let none = min_share_size(&params(0.0, 0.3, 0.0, 0.5, 50)).unwrap();
        assert_eq!(
            (
                none.printed_bound,
                none.derived_bound,
                none.largest_viable_m
            ),
            (1.0, 1.0, 1)
        );
        let b = min_share_size(&params(0.0, 0.3, 0.5, 0.5, 100)).unwrap();
        assert!((b.printed_bound - 7.5 / 1.3125).abs() < 1e-12);
        assert!((b.derived_bound - 20.8).abs() < 1e-12);
        assert_eq!(b.largest_viable_m, 20);
        let one = min_share_size(&params(0.0, 0.3, 0.5, 0.5, 1)).unwrap();
        assert_eq!(
            (one.printed_bound, one.derived_bound, one.largest_viable_m),
            (1.0, 1.0, 1)
        );
    }

    #[test]
    fn tranche_gap_cases() {
        let p = params(0.0, 0.3, 0.5, 0.5, 10);
        let grid = build_tranche_grid_from_default_probs(&p, 0.01, 0.5, 5).unwrap();
        let g = tranche_price_gap(&p, &unit(), &grid, &q()).unwrap();
        assert!(g.gap > 0.0);
        assert!(g.smallest_cross_covariance().unwrap() > 0.0);
        assert!((g.staircase_price - g.sum_of_tranche_prices - g.gap).abs() < 1e-15);

        let silent = params(0.0, 0.3, 0.5, 0.0, 10);
        let grid0 = build_tranche_grid_from_default_probs(&silent, 0.01, 0.5, 5).unwrap();
        assert_eq!(
            tranche_price_gap(&silent, &unit(), &grid0, &q())
                .unwrap()
                .gap,
            0.0
        );

        let single = TrancheSpec::new(vec![-1.0], vec![2.0]).unwrap();
        let g1 = tranche_price_gap(&p, &unit(), &single, &q()).unwrap();
        assert_eq!(g1.gap, 0.0);
        assert!(g1.staircase_price > 0.0);
    }

    proptest! {
        #[test]
        fn linear_variance_reduction_identity(a in 0.0f64..2.0, c in 0.0f64..2.0, j in 0.0f64..2.0,
                                               n in 1usize..200, m in 1usize..50, alpha in 0.0f64..3.0) {
            let p = params(0.1, a, c, j, n);
            let prefs = RiskPreferences::new(alpha).unwrap();
            for asset in [Asset::SingleAsset, Asset::PortfolioMean, Asset::PortfolioTotal, Asset::PortfolioShare { m }] {
                let direct = barcode_price(asset, &p, &prefs, &q()).unwrap();
                let reduction = barcode_price_by_variance_reduction(asset, &p, &prefs, &q()).unwrap();
                prop_assert!(direct >= 0.0);
                prop_assert!((direct - reduction).abs() <= 1e-12 * direct.max(1.0) * (1.0 + n as f64));
            }
        }

        #[test]
        fn budget_balance_identities(a in 0.0f64..2.0, c in 0.0f64..2.0, j in 0.0f64..2.0,
                                     n in 1usize..200, alpha in 0.0f64..3.0) {
            let b = incentive_balance(&params(0.0, a, c, j, n), &RiskPreferences::new(alpha).unwrap()).unwrap();
            let scale = |x: f64| 1e-12 * x.abs().max(1.0);
            prop_assert!((b.mean_shares - b.mean_shares_expected).abs() <= scale(b.mean_shares_expected) * n as f64);
            prop_assert!((b.whole_portfolio - b.whole_portfolio_expected).abs() <= scale(b.whole_portfolio_expected) * n as f64);
        }
    }
}
