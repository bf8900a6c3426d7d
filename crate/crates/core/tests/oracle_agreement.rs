//! Closed forms against sampling oracles at a handful of parameter points.
//! Seeds are fixed; agreement is required within 4 standard errors.

use barcodelab_core::model::{sample_aggregates, sample_joint};
use barcodelab_core::oracle::{self, BinnedSample, EstimateWithError, SampleView};
use barcodelab_core::pricing::{self, tranche_price_gap};
use barcodelab_core::tranche::{self, build_tranche_grid_from_default_probs};
use barcodelab_core::{mi, Asset, ModelParams, Moments, QuadratureSettings, RiskPreferences};

const K: f64 = 4.0;

fn params(a: f64, c: f64, j: f64, n: usize) -> ModelParams {
    ModelParams::new(0.0, a, c, j, n).unwrap()
}

fn assert_agrees(label: &str, est: &EstimateWithError, target: f64) {
    assert!(
        est.agrees_with(target, K),
        "{label}: oracle {} +- {} vs closed form {target} (z = {:.2})",
        est.value,
        est.std_error,
        est.z_score(target)
    );
}

#[test]
fn joint_sample_second_moments() {
    for (i, p) in [
        params(0.3, 0.5, 0.5, 4),
        params(1.0, 0.0, 1.0, 3),
        params(0.0, 1.0, 0.5, 2),
    ]
    .iter()
    .enumerate()
    {
        let m = Moments::of(p);
        let s = sample_joint(p, 200_000, 11 + i as u64).unwrap();
        let (x0, x1, y0, y1) = (s.x_column(0), s.x_column(1), s.y_column(0), s.y_column(1));
        let cov = |u: &[f64], v: &[f64]| oracle::covariance_estimate(u, v).unwrap();
        assert_agrees("var_xi", &cov(&x0, &x0), m.var_xi);
        assert_agrees("cov_xi_xj", &cov(&x0, &x1), m.cov_xi_xj);
        assert_agrees("cov_xi_yi", &cov(&x1, &y1), m.cov_xi_yi);
        assert_agrees("cov_xi_yj", &cov(&x0, &y1), m.cov_xi_yj);
        assert_agrees("var_yi", &cov(&y0, &y0), m.var_yi);
        assert_agrees("cov_yi_yj", &cov(&y0, &y1), m.cov_yi_yj);
        assert_agrees(
            "var_x_total",
            &oracle::variance_estimate(&s.x_total).unwrap(),
            m.var_x_total,
        );
        assert_agrees(
            "var_y_total",
            &oracle::variance_estimate(&s.y_total).unwrap(),
            m.var_y_total,
        );
    }
}

#[test]
fn aggregate_sampler_regression() {
    let p = ModelParams::new(0.2, 0.3, 0.5, 0.5, 50).unwrap();
    let m = Moments::of(&p);
    let agg = sample_aggregates(&p, 400_000, 5).unwrap();
    let fit = oracle::regression_estimate(&agg.x_total, &agg.y_total).unwrap();
    assert_agrees("slope", &fit.slope, m.cond_mean_slope);
    assert_agrees("intercept", &fit.intercept, m.mean_x);
    assert_agrees("residual", &fit.residual_variance, m.var_x_given_y);
    assert_agrees(
        "mean",
        &oracle::mean_estimate(&agg.x_total).unwrap(),
        m.mean_x,
    );
}

#[test]
fn gaussian_information_quantities() {
    for (i, p) in [
        params(0.3, 0.5, 0.5, 5),
        params(0.0, 0.3, 1.0, 3),
        params(1.0, 1.0, 0.5, 2),
    ]
    .iter()
    .enumerate()
    {
        let s = sample_joint(p, 200_000, 100 + i as u64).unwrap();
        let (x0, y0, y1) = (s.x_column(0), s.y_column(0), s.y_column(1));
        let asset =
            oracle::gaussian_mi_from_samples(SampleView::scalar(&x0), SampleView::scalar(&y0))
                .unwrap();
        assert_agrees("mi_asset", &asset, mi::mi_asset_barcode(p));
        let pooled = oracle::gaussian_mi_from_samples(
            SampleView::scalar(&s.x_total),
            SampleView::scalar(&s.y_total),
        )
        .unwrap();
        assert_agrees("mi_portfolio", &pooled, mi::mi_portfolio(p));
        let total = oracle::gaussian_mi_from_samples(
            SampleView::new(&s.x, p.n),
            SampleView::new(&s.y, p.n),
        )
        .unwrap();
        assert_agrees("mi_total", &total, mi::mi_total(p));
        let cross =
            oracle::gaussian_mi_from_samples(SampleView::scalar(&x0), SampleView::scalar(&y1))
                .unwrap();
        assert_agrees("mi_cross", &cross, mi::mi_cross(p).unwrap().derived);
    }
}

#[test]
fn tranche_information_by_binning() {
    let p = params(0.3, 0.5, 1.0, 10);
    let q = QuadratureSettings::default();
    let agg = sample_aggregates(&p, 1_000_000, 21).unwrap();
    let binned = BinnedSample::new(&agg.y_total, 500).unwrap();
    for p_d in [0.5, 0.1] {
        let k = tranche::threshold_from_default_prob(&p, p_d).unwrap();
        let est = binned
            .mutual_information(&oracle::default_indicators(&p, &agg.x_total, k))
            .unwrap();
        assert_agrees("mi_tranche", &est, tranche::mi_tranche(&p, k, &q).unwrap());
    }
}

#[test]
fn barcode_prices() {
    let p = params(0.3, 0.5, 0.5, 10);
    let prefs = RiskPreferences::new(0.8).unwrap();
    let q = QuadratureSettings::default();
    let k = tranche::threshold_from_default_prob(&p, 0.1).unwrap();
    let assets = [
        Asset::SingleAsset,
        Asset::PortfolioMean,
        Asset::PortfolioTotal,
        Asset::PortfolioShare { m: 3 },
        Asset::Tranche { k, f: 2.0 },
    ];
    for (i, asset) in assets.into_iter().enumerate() {
        let est = oracle::mc_conditional_mean_variance(asset, &p, 200_000, 300 + i as u64).unwrap();
        let scaled = EstimateWithError {
            value: prefs.alpha * est.value,
            std_error: prefs.alpha * est.std_error,
            ..est
        };
        assert_agrees(
            &format!("{asset:?}"),
            &scaled,
            pricing::barcode_price(asset, &p, &prefs, &q).unwrap(),
        );
    }
}

#[test]
fn tranche_gap_by_sampling() {
    let p = params(0.3, 0.5, 0.5, 10);
    let prefs = RiskPreferences::default();
    let q = QuadratureSettings::default();
    let spec = build_tranche_grid_from_default_probs(&p, 0.01, 0.5, 5).unwrap();
    let gap = tranche_price_gap(&p, &prefs, &spec, &q).unwrap();
    let est = oracle::mc_tranche_gap(&p, &spec, 400_000, 41).unwrap();
    assert_agrees("gap", &est.gap, gap.gap);
    assert_agrees("staircase", &est.staircase_variance, gap.staircase_price);
    assert_agrees("sum", &est.sum_of_variances, gap.sum_of_tranche_prices);
}
