//! The `mi`, `sweep`, `price` and `tranche` subcommands.

use std::path::PathBuf;

use barcodelab_core::mi::{self, MiReport};
use barcodelab_core::oracle::{self, EstimateWithError};
use barcodelab_core::pricing::{self, IncentiveBalance, ShareSizeBounds, TranchePriceGap};
use barcodelab_core::rng::derive_seed;
use barcodelab_core::tranche::{self, build_tranche_grid, build_tranche_grid_from_default_probs};
use barcodelab_core::{Asset, ModelParams, QuadratureSettings, RiskPreferences, TrancheSpec, Unit};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, TrancheBlock};
use crate::error::{CliError, CliResult};
use crate::format::{sig12, write_csv, write_json};

/// Bins for the tranche information oracle, capped at `sqrt(N)`.
pub const ORACLE_BINS: usize = 1000;

pub fn oracle_bins(samples: usize) -> usize {
    ORACLE_BINS.min((samples as f64).sqrt() as usize)
}

pub fn run_mi(config: &RunConfig) -> CliResult<(MiReport, PathBuf)> {
    let report = MiReport::new(&config.model()?).in_unit(config.unit());
    let path = write_json(&config.output_dir(), "mi.json", &report)?;
    Ok((report, path))
}

/// One pool size of the information sweep, in nats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub mi_asset: f64,
    pub mi_total: f64,
    pub mi_portfolio: f64,
    /// Same for every row; `inf` when divergent.
    pub mi_portfolio_limit: f64,
    pub info_loss: f64,
    /// One entry per requested default probability.
    pub mi_tranche: Vec<f64>,
}

pub fn sweep_rows(
    base: &ModelParams,
    n_values: &[usize],
    p_d: &[f64],
    q: &QuadratureSettings,
) -> CliResult<Vec<SweepRow>> {
    n_values
        .par_iter()
        .map(|&n| {
            let p = base.with_n(n).validate()?;
            let mi_tranche = p_d
                .iter()
                .map(|&pd| tranche::mi_tranche_at_default_prob(&p, pd, q))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SweepRow {
                n,
                mi_asset: mi::mi_asset_barcode(&p),
                mi_total: mi::mi_total(&p),
                mi_portfolio: mi::mi_portfolio(&p),
                mi_portfolio_limit: mi::mi_portfolio_limit(&p).finite().unwrap_or(f64::INFINITY),
                info_loss: mi::info_loss(&p),
                mi_tranche,
            })
        })
        .collect()
}

pub fn sweep_header(p_d: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = [
        "n",
        "mi_asset",
        "mi_total",
        "mi_portfolio",
        "mi_portfolio_limit",
        "info_loss",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(p_d.iter().map(|pd| format!("mi_tranche_pd_{pd}")));
    h
}

pub fn sweep_cells(row: &SweepRow, unit: Unit) -> Vec<String> {
    let mut cells = vec![row.n.to_string()];
    for v in [
        row.mi_asset,
        row.mi_total,
        row.mi_portfolio,
        row.mi_portfolio_limit,
        row.info_loss,
    ] {
        cells.push(sig12(unit.from_nats(v)));
    }
    cells.extend(row.mi_tranche.iter().map(|&v| sig12(unit.from_nats(v))));
    cells
}

pub fn run_sweep(config: &RunConfig) -> CliResult<(Vec<SweepRow>, PathBuf)> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("`sweep` needs a `sweep` block".into()))?;
    let n_values = sweep.n_values()?;
    let p_d = config.tranche().p_d;
    let rows = sweep_rows(&config.model()?, &n_values, &p_d, &config.quadrature()?)?;
    let unit = config.unit();
    let cells: Vec<Vec<String>> = rows.iter().map(|r| sweep_cells(r, unit)).collect();
    let path = write_csv(
        &config.output_dir(),
        "sweep.csv",
        &sweep_header(&p_d),
        &cells,
    )?;
    Ok((rows, path))
}

/// Oracle estimate attached to a closed-form entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEntry {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    /// `|oracle - closed form|` in standard errors.
    pub z_score: f64,
}

impl OracleEntry {
    pub fn new(est: EstimateWithError, closed_form: f64) -> Self {
        OracleEntry {
            value: est.value,
            std_error: est.std_error,
            samples: est.sample_count,
            z_score: est.z_score(closed_form),
        }
    }

    fn scaled(est: EstimateWithError, factor: f64, closed_form: f64) -> Self {
        let e = EstimateWithError {
            value: est.value * factor,
            std_error: est.std_error * factor.abs(),
            ..est
        };
        Self::new(e, closed_form)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricedAsset {
    pub asset: Asset,
    pub price_unconditional: f64,
    pub barcode_price: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranchePrice {
    pub p_d: f64,
    pub k: f64,
    #[serde(flatten)]
    pub priced: PricedAsset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceOracle {
    pub mean_shares: OracleEntry,
    pub whole_portfolio: OracleEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceReport {
    pub params: ModelParams,
    pub alpha: f64,
    pub single_asset: PricedAsset,
    pub portfolio_mean: PricedAsset,
    pub portfolio_total: PricedAsset,
    /// `X / m` for `m = 1..=n`.
    pub shares: Vec<PricedAsset>,
    pub tranches: Vec<TranchePrice>,
    pub incentive_balance: IncentiveBalance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incentive_balance_oracle: Option<BalanceOracle>,
    pub min_share_size: ShareSizeBounds,
    /// Largest viable `m` when every barcode price is replaced by its
    /// oracle estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_viable_m_oracle: Option<usize>,
}

/// Seed labels, so that each oracle draws from its own stream family.
mod label {
    pub const SINGLE: u64 = 1;
    pub const POOLED: u64 = 2;
    pub const TRANCHE: u64 = 100;
}

pub fn price_report(
    params: &ModelParams,
    prefs: &RiskPreferences,
    p_d: &[f64],
    q: &QuadratureSettings,
    mc: Option<(usize, u64)>,
) -> CliResult<PriceReport> {
    let alpha = prefs.alpha;
    let priced = |asset: Asset, oracle: Option<OracleEntry>| -> CliResult<PricedAsset> {
        Ok(PricedAsset {
            asset,
            price_unconditional: pricing::price_unconditional(asset, params, prefs)?,
            barcode_price: pricing::barcode_price(asset, params, prefs, q)?,
            oracle,
        })
    };

    // V(E[X_i | Y_i]) and V(E[X | Y]); every linear claim's oracle is one of
    // these scaled by alpha / m^2.
    let (single_mc, pooled_mc) = match mc {
        Some((samples, seed)) => (
            Some(oracle::mc_conditional_mean_variance(
                Asset::SingleAsset,
                params,
                samples,
                derive_seed(seed, label::SINGLE),
            )?),
            Some(oracle::mc_conditional_mean_variance(
                Asset::PortfolioTotal,
                params,
                samples,
                derive_seed(seed, label::POOLED),
            )?),
        ),
        None => (None, None),
    };
    let n = params.n as f64;
    let linear =
        |asset: Asset, base: Option<EstimateWithError>, divisor: f64| -> CliResult<PricedAsset> {
            let dp = pricing::barcode_price(asset, params, prefs, q)?;
            priced(
                asset,
                base.map(|e| OracleEntry::scaled(e, alpha / (divisor * divisor), dp)),
            )
        };

    let single_asset = linear(Asset::SingleAsset, single_mc, 1.0)?;
    let portfolio_mean = linear(Asset::PortfolioMean, pooled_mc, n)?;
    let portfolio_total = linear(Asset::PortfolioTotal, pooled_mc, 1.0)?;
    let shares = (1..=params.n)
        .map(|m| linear(Asset::PortfolioShare { m }, pooled_mc, m as f64))
        .collect::<CliResult<Vec<_>>>()?;

    let mut tranches = Vec::with_capacity(p_d.len());
    for (i, &pd) in p_d.iter().enumerate() {
        let k = tranche::threshold_from_default_prob(params, pd)?;
        let asset = Asset::Tranche { k, f: 1.0 };
        let dp = pricing::barcode_price(asset, params, prefs, q)?;
        let oracle = match mc {
            Some((samples, seed)) => {
                let est = oracle::mc_conditional_mean_variance(
                    asset,
                    params,
                    samples,
                    derive_seed(seed, label::TRANCHE + i as u64),
                )?;
                Some(OracleEntry::scaled(est, alpha, dp))
            }
            None => None,
        };
        tranches.push(TranchePrice {
            p_d: pd,
            k,
            priced: priced(asset, oracle)?,
        });
    }

    let balance = pricing::incentive_balance(params, prefs)?;
    let bounds = pricing::min_share_size(params)?;
    let (incentive_balance_oracle, largest_viable_m_oracle) = match (single_mc, pooled_mc) {
        (Some(s), Some(p)) => {
            let combine = |a: f64, sa: f64, b: f64, sb: f64, target: f64| {
                let est = EstimateWithError {
                    value: a - b,
                    std_error: sa.hypot(sb),
                    ..s
                };
                OracleEntry::new(est, target)
            };
            let cost = n * alpha * s.value;
            let cost_se = n * alpha * s.std_error;
            let oracle = BalanceOracle {
                mean_shares: combine(
                    alpha * p.value / n,
                    alpha * p.std_error / n,
                    cost,
                    cost_se,
                    balance.mean_shares,
                ),
                whole_portfolio: combine(
                    alpha * p.value,
                    alpha * p.std_error,
                    cost,
                    cost_se,
                    balance.whole_portfolio,
                ),
            };
            let largest = (1..=params.n)
                .filter(|&m| alpha * p.value / m as f64 >= cost)
                .max()
                .unwrap_or(0);
            (Some(oracle), Some(largest))
        }
        _ => (None, None),
    };

    Ok(PriceReport {
        params: *params,
        alpha,
        single_asset,
        portfolio_mean,
        portfolio_total,
        shares,
        tranches,
        incentive_balance: balance,
        incentive_balance_oracle,
        min_share_size: bounds,
        largest_viable_m_oracle,
    })
}

pub fn run_price_report(config: &RunConfig) -> CliResult<(PriceReport, PathBuf)> {
    let mc = config.mc.map(|m| (m.samples, m.seed));
    let report = price_report(
        &config.model()?,
        &config.prefs()?,
        &config.tranche().p_d,
        &config.quadrature()?,
        mc,
    )?;
    let path = write_json(&config.output_dir(), "price.json", &report)?;
    Ok((report, path))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrancheRow {
    pub p_d: f64,
    pub k: f64,
    pub mi_tranche: f64,
    pub mi_portfolio: f64,
    /// `mi_portfolio / mi_tranche`.
    pub ratio: f64,
    pub barcode_price: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mi_oracle: Option<OracleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub spec: TrancheSpec,
    pub gap: TranchePriceGap,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_oracle: Option<OracleEntry>,
    /// Mean `|staircase - clamped target|`, bounded by the step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub staircase_error_oracle: Option<EstimateWithError>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrancheReport {
    pub params: ModelParams,
    pub unit: Unit,
    pub alpha: f64,
    pub tranches: Vec<TrancheRow>,
    pub grid: GridReport,
}

pub fn build_grid(params: &ModelParams, block: &TrancheBlock) -> CliResult<TrancheSpec> {
    Ok(match block.k_range {
        Some([lo, hi]) => build_tranche_grid(params, lo, hi, block.grid_m)?,
        None => build_tranche_grid_from_default_probs(
            params,
            block.p_d_range[0],
            block.p_d_range[1],
            block.grid_m,
        )?,
    })
}

pub fn tranche_report(
    params: &ModelParams,
    prefs: &RiskPreferences,
    block: &TrancheBlock,
    q: &QuadratureSettings,
    unit: Unit,
    mc: Option<(usize, usize, u64)>,
) -> CliResult<TrancheReport> {
    let mi_portfolio = mi::mi_portfolio(params);
    let mut rows = Vec::with_capacity(block.p_d.len());
    for (i, &pd) in block.p_d.iter().enumerate() {
        let k = tranche::threshold_from_default_prob(params, pd)?;
        let mi_tranche = tranche::mi_tranche(params, k, q)?;
        let dp = pricing::barcode_price(Asset::Tranche { k, f: 1.0 }, params, prefs, q)?;
        let mi_oracle = match mc {
            Some((_, large, seed)) => {
                let (f, y) = oracle::sample_default_indicators(
                    params,
                    k,
                    large,
                    derive_seed(seed, 200 + i as u64),
                )?;
                let est = oracle::binned_mi_binary_continuous(&f, &y, oracle_bins(large))?;
                Some(OracleEntry::scaled(
                    est,
                    unit.from_nats(1.0),
                    unit.from_nats(mi_tranche),
                ))
            }
            None => None,
        };
        rows.push(TrancheRow {
            p_d: pd,
            k,
            mi_tranche: unit.from_nats(mi_tranche),
            mi_portfolio: unit.from_nats(mi_portfolio),
            ratio: mi_portfolio / mi_tranche,
            barcode_price: dp,
            mi_oracle,
        });
    }

    let spec = build_grid(params, block)?;
    let gap = pricing::tranche_price_gap(params, prefs, &spec, q)?;
    let (gap_oracle, staircase_error_oracle) = match mc {
        Some((samples, _, seed)) => {
            let g = oracle::mc_tranche_gap(params, &spec, samples, derive_seed(seed, 300))?;
            let err = spec
                .step
                .map(|_| oracle::mc_staircase_error(params, &spec, samples, derive_seed(seed, 301)))
                .transpose()?;
            (Some(OracleEntry::scaled(g.gap, prefs.alpha, gap.gap)), err)
        }
        None => (None, None),
    };
    Ok(TrancheReport {
        params: *params,
        unit,
        alpha: prefs.alpha,
        tranches: rows,
        grid: GridReport {
            spec,
            gap,
            gap_oracle,
            staircase_error_oracle,
        },
    })
}

pub fn run_tranche(config: &RunConfig) -> CliResult<(TrancheReport, Vec<PathBuf>)> {
    let mc = config.mc.map(|m| (m.samples, m.large_samples, m.seed));
    let unit = config.unit();
    let report = tranche_report(
        &config.model()?,
        &config.prefs()?,
        &config.tranche(),
        &config.quadrature()?,
        unit,
        mc,
    )?;
    let dir = config.output_dir();
    let header: Vec<String> = [
        "p_d",
        "k",
        "mi_tranche",
        "mi_portfolio",
        "ratio",
        "barcode_price",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let cells: Vec<Vec<String>> = report
        .tranches
        .iter()
        .map(|r| {
            [
                r.p_d,
                r.k,
                r.mi_tranche,
                r.mi_portfolio,
                r.ratio,
                r.barcode_price,
            ]
            .iter()
            .map(|&v| sig12(v))
            .collect()
        })
        .collect();
    let csv = write_csv(&dir, "tranche.csv", &header, &cells)?;
    let json = write_json(&dir, "tranche.json", &report)?;
    Ok((report, vec![csv, json]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ModelParams {
        ModelParams {
            mu: 0.0,
            a: 0.3,
            c: 0.5,
            j: 0.5,
            n: 10,
        }
    }

    #[test]
    fn sweep_rows_match_library() {
        let q = QuadratureSettings::default();
        let rows = sweep_rows(&base(), &[1, 10, 100], &[0.05], &q).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.n).collect::<Vec<_>>(),
            vec![1, 10, 100]
        );
        let p = base().with_n(100);
        assert_eq!(rows[2].mi_portfolio, mi::mi_portfolio(&p));
        assert_eq!(
            rows[2].mi_tranche[0],
            tranche::mi_tranche_at_default_prob(&p, 0.05, &q).unwrap()
        );
        let cells = sweep_cells(&rows[0], Unit::Nats);
        assert_eq!(cells.len(), sweep_header(&[0.05]).len());
    }

    #[test]
    fn price_report_balances() {
        let r = price_report(
            &base(),
            &RiskPreferences::default(),
            &[0.5],
            &QuadratureSettings::default(),
            None,
        )
        .unwrap();
        assert!((r.incentive_balance.mean_shares + 2.25).abs() < 1e-12);
        assert!((r.incentive_balance.whole_portfolio - 5.625).abs() < 1e-12);
        assert_eq!(r.shares.len(), 10);
        assert!(r.incentive_balance_oracle.is_none());

        let zero = RiskPreferences::new(0.0).unwrap();
        let r0 =
            price_report(&base(), &zero, &[0.5], &QuadratureSettings::default(), None).unwrap();
        assert!(r0
            .shares
            .iter()
            .chain([&r0.single_asset, &r0.portfolio_total])
            .all(|a| a.barcode_price == 0.0));
        assert!(r0.tranches.iter().all(|t| t.priced.barcode_price == 0.0));
    }

    #[test]
    fn price_report_with_oracle() {
        let r = price_report(
            &base(),
            &RiskPreferences::default(),
            &[0.5],
            &QuadratureSettings::default(),
            Some((40_000, 3)),
        )
        .unwrap();
        let o = r.portfolio_total.oracle.unwrap();
        assert!(o.z_score < 4.0, "{o:?}");
        assert!(r.incentive_balance_oracle.unwrap().whole_portfolio.z_score < 4.0);
        assert_eq!(r.largest_viable_m_oracle, Some(2));
    }
}
