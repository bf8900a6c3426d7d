//! Brute-force Monte Carlo estimators.
//!
//! Every estimator returns a value computed on the full sample together with
//! a batch-means standard error: the sample is cut into [`BATCHES`]
//! contiguous batches, the estimator is rerun on each, and the error is the
//! spread of the batch values divided by `sqrt(BATCHES)`.
//!
//! Nothing here calls the closed forms in [`crate::mi`], [`crate::tranche`]
//! or [`crate::pricing`]; conditional laws are rebuilt from the factor
//! structure of the model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_aggregates, ModelParams};
use crate::normal::norm_cdf;
use crate::pricing::Asset;
use crate::tranche::TrancheSpec;

pub const BATCHES: usize = 20;
pub const MIN_GAUSSIAN_SAMPLES: usize = 10_000;
pub const MIN_BINNED_SAMPLES: usize = 1_000_000;
pub const MIN_BINS: usize = 50;
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    CovPlugin,
    BinnedMi,
    McVar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub sample_count: usize,
    pub method: EstimatorKind,
}

impl EstimateWithError {
    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    /// `|value - target| <= k * std_error`, with a 1e-12 absolute floor for
    /// estimates whose batches agree exactly.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error + 1e-12
    }
}

/// Batch-means wrapper: `estimate` maps a half-open row range to a value.
fn batch_means<F>(count: usize, method: EstimatorKind, estimate: F) -> Result<EstimateWithError>
where
    F: Fn(std::ops::Range<usize>) -> Result<f64>,
{
    let value = estimate(0..count)?;
    let mut batch = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        batch.push(estimate(b * count / BATCHES..(b + 1) * count / BATCHES)?);
    }
    let (_, var) = mean_and_variance(&batch);
    Ok(EstimateWithError {
        value,
        std_error: (var / BATCHES as f64).sqrt(),
        sample_count: count,
        method,
    })
}

/// Mean and unbiased variance, two-pass.
fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (
        mean,
        if values.len() > 1 {
            ss / (n - 1.0)
        } else {
            0.0
        },
    )
}

/// Row-major `count x dim` block of samples.
#[derive(Debug, Clone, Copy)]
pub struct SampleView<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> SampleView<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(
            dim > 0 && data.len().is_multiple_of(dim),
            "data length must be a multiple of dim"
        );
        SampleView { data, dim }
    }

    pub fn scalar(data: &'a [f64]) -> Self {
        SampleView { data, dim: 1 }
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }
}

/// Sample covariance of the concatenated rows `(u_r, v_r)` over `rows`.
fn joint_covariance(u: &SampleView, v: &SampleView, rows: std::ops::Range<usize>) -> DMatrix<f64> {
    let d = u.dim + v.dim;
    let len = rows.len();
    // shift by the first row to limit cancellation
    let mut shift = Vec::with_capacity(d);
    shift.extend_from_slice(u.row(rows.start));
    shift.extend_from_slice(v.row(rows.start));
    let mut sum = vec![0.0; d];
    let mut cross = vec![0.0; d * d];
    let mut z = vec![0.0; d];
    for r in rows {
        for (k, val) in u.row(r).iter().chain(v.row(r)).enumerate() {
            z[k] = val - shift[k];
        }
        for i in 0..d {
            sum[i] += z[i];
            let zi = z[i];
            for j in 0..=i {
                cross[i * d + j] += zi * z[j];
            }
        }
    }
    let n = len as f64;
    DMatrix::from_fn(d, d, |i, j| {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        (cross[i * d + j] - sum[i] * sum[j] / n) / (n - 1.0)
    })
}

/// Log-determinant of a symmetric positive definite matrix, rejecting
/// matrices whose condition number exceeds [`MAX_CONDITION`].
pub fn log_det_checked(m: &DMatrix<f64>) -> Result<f64> {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_nan() || min <= 0.0 || max / min > MAX_CONDITION {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::SingularCovariance { condition });
    }
    Ok(eig.iter().map(|l| l.ln()).sum())
}

fn gaussian_mi_rows(u: &SampleView, v: &SampleView, rows: std::ops::Range<usize>) -> Result<f64> {
    let cov = joint_covariance(u, v, rows);
    let du = u.dim;
    let dv = v.dim;
    let cu = cov.view((0, 0), (du, du)).into_owned();
    let cv = cov.view((du, du), (dv, dv)).into_owned();
    Ok(0.5 * (log_det_checked(&cu)? + log_det_checked(&cv)? - log_det_checked(&cov)?))
}

/// Plug-in Gaussian mutual information
/// `1/2 ln(det S_U det S_V / det S_UV)` from paired samples, in nats.
///
/// The plug-in estimate is biased upwards by about `dim_u dim_v / (2N)`;
/// no correction is applied.
pub fn gaussian_mi_from_samples(u: SampleView, v: SampleView) -> Result<EstimateWithError> {
    let count = u.count();
    if v.count() != count {
        return Err(Error::InsufficientSamples {
            got: v.count().min(count),
            needed: v.count().max(count),
        });
    }
    if count < MIN_GAUSSIAN_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: count,
            needed: MIN_GAUSSIAN_SAMPLES,
        });
    }
    batch_means(count, EstimatorKind::CovPlugin, |rows| {
        gaussian_mi_rows(&u, &v, rows)
    })
}

/// Bin edges splitting `y` into `bins` equiprobable cells.
fn quantile_edges(y: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    (1..bins).map(|b| sorted[b * sorted.len() / bins]).collect()
}

fn binned_mi_rows(cells: &[u32], f: &[bool], bins: usize, rows: std::ops::Range<usize>) -> f64 {
    let mut table = vec![[0u64; 2]; bins];
    for r in rows.clone() {
        table[cells[r] as usize][f[r] as usize] += 1;
    }
    let n = rows.len() as f64;
    let ones: u64 = table.iter().map(|t| t[1]).sum();
    let col = [rows.len() as u64 - ones, ones];
    let xlogx = |k: u64| {
        if k == 0 {
            0.0
        } else {
            k as f64 * (k as f64).ln()
        }
    };
    // H(F) + H(Y) - H(F,Y) in count form
    let mut joint = 0.0;
    let mut row_term = 0.0;
    let mut occupied_rows = 0usize;
    let mut occupied_cells = 0usize;
    for t in &table {
        joint += xlogx(t[0]) + xlogx(t[1]);
        let row = t[0] + t[1];
        row_term += xlogx(row);
        occupied_rows += (row > 0) as usize;
        occupied_cells += (t[0] > 0) as usize + (t[1] > 0) as usize;
    }
    let occupied_cols = col.iter().filter(|&&k| k > 0).count();
    let plug_in = (joint - row_term - xlogx(col[0]) - xlogx(col[1])) / n + n.ln();
    let miller_madow = (occupied_cols + occupied_rows) as f64 - occupied_cells as f64 - 1.0;
    plug_in + miller_madow / (2.0 * n)
}

/// A continuous sample assigned to equiprobable bins, reusable across
/// several binary samples paired with it.
#[derive(Debug, Clone)]
pub struct BinnedSample {
    cells: Vec<u32>,
    bins: usize,
}

impl BinnedSample {
    /// Cuts `y` at its empirical quantiles; needs `50 <= bins <= sqrt(N)`
    /// and at least [`MIN_BINNED_SAMPLES`] values.
    pub fn new(y: &[f64], bins: usize) -> Result<Self> {
        let count = y.len();
        if count < MIN_BINNED_SAMPLES {
            return Err(Error::InsufficientSamples {
                got: count,
                needed: MIN_BINNED_SAMPLES,
            });
        }
        if bins < MIN_BINS || bins.saturating_mul(bins) > count {
            return Err(Error::Domain {
                what: "bin count (needs 50 <= B <= sqrt(N))",
                value: bins as f64,
            });
        }
        let edges = quantile_edges(y, bins);
        let cells = y
            .iter()
            .map(|v| edges.partition_point(|e| e <= v) as u32)
            .collect();
        Ok(BinnedSample { cells, bins })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Miller-Madow corrected mutual information with the binary sample `f`.
    pub fn mutual_information(&self, f: &[bool]) -> Result<EstimateWithError> {
        if f.len() != self.len() {
            return Err(Error::InsufficientSamples {
                got: f.len().min(self.len()),
                needed: f.len().max(self.len()),
            });
        }
        if f.iter().all(|&b| b) || f.iter().all(|&b| !b) {
            return Err(Error::DegenerateMarginal);
        }
        batch_means(self.len(), EstimatorKind::BinnedMi, |rows| {
            Ok(binned_mi_rows(&self.cells, f, self.bins, rows))
        })
    }
}

/// Mutual information between a binary and a continuous sample over `bins`
/// equiprobable cells of `y`, with the Miller-Madow correction applied to
/// each of the three entropies.
pub fn binned_mi_binary_continuous(
    f: &[bool],
    y: &[f64],
    bins: usize,
) -> Result<EstimateWithError> {
    if f.len() != y.len() {
        return Err(Error::InsufficientSamples {
            got: f.len().min(y.len()),
            needed: f.len().max(y.len()),
        });
    }
    if f.iter().all(|&b| b) || f.iter().all(|&b| !b) {
        return Err(Error::DegenerateMarginal);
    }
    BinnedSample::new(y, bins)?.mutual_information(f)
}

/// Sample variance with batch-means error.
pub fn variance_estimate(values: &[f64]) -> Result<EstimateWithError> {
    if values.len() < 2 * BATCHES {
        return Err(Error::InsufficientSamples {
            got: values.len(),
            needed: 2 * BATCHES,
        });
    }
    batch_means(values.len(), EstimatorKind::McVar, |rows| {
        Ok(mean_and_variance(&values[rows]).1)
    })
}

/// Sample mean with batch-means error.
pub fn mean_estimate(values: &[f64]) -> Result<EstimateWithError> {
    if values.len() < 2 * BATCHES {
        return Err(Error::InsufficientSamples {
            got: values.len(),
            needed: 2 * BATCHES,
        });
    }
    batch_means(values.len(), EstimatorKind::McVar, |rows| {
        Ok(mean_and_variance(&values[rows]).0)
    })
}

/// Sample covariance of paired values with batch-means error.
pub fn covariance_estimate(u: &[f64], v: &[f64]) -> Result<EstimateWithError> {
    let count = u.len().min(v.len());
    if count < 2 * BATCHES {
        return Err(Error::InsufficientSamples {
            got: count,
            needed: 2 * BATCHES,
        });
    }
    batch_means(count, EstimatorKind::McVar, |rows| {
        Ok(sample_cov(&u[rows.clone()], &v[rows]))
    })
}

fn sample_cov(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - mu) * (b - mv))
        .sum::<f64>()
        / (n - 1.0)
}

/// Least-squares fit `x ~ intercept + slope * y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionEstimate {
    pub intercept: EstimateWithError,
    pub slope: EstimateWithError,
    /// Unbiased residual variance.
    pub residual_variance: EstimateWithError,
}

/// Regression of `x` on `y`; the residual variance estimates `V(X | Y)` and
/// the fitted line `E[X | Y]` when the pair is jointly Gaussian.
pub fn regression_estimate(x: &[f64], y: &[f64]) -> Result<RegressionEstimate> {
    let count = x.len().min(y.len());
    if count < 2 * BATCHES + 1 {
        return Err(Error::InsufficientSamples {
            got: count,
            needed: 2 * BATCHES + 1,
        });
    }
    let fit = |rows: std::ops::Range<usize>| {
        let (xs, ys) = (&x[rows.clone()], &y[rows]);
        let n = xs.len() as f64;
        let (mx, vy) = (xs.iter().sum::<f64>() / n, mean_and_variance(ys));
        let slope = sample_cov(xs, ys) / vy.1;
        let intercept = mx - slope * vy.0;
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(a, b)| (a - intercept - slope * b).powi(2))
            .sum();
        (intercept, slope, rss / (n - 2.0))
    };
    Ok(RegressionEstimate {
        intercept: batch_means(count, EstimatorKind::McVar, |r| Ok(fit(r).0))?,
        slope: batch_means(count, EstimatorKind::McVar, |r| Ok(fit(r).1))?,
        residual_variance: batch_means(count, EstimatorKind::McVar, |r| Ok(fit(r).2))?,
    })
}

/// Conditional expectation of a claim given its barcode value, rebuilt from
/// the factor structure: given `Y`, the pool's return is normal with mean
/// `n mu + J Y` and variance `n + (n a)^2` (the idiosyncratic sum plus the
/// common factor), and an asset's own return has mean `mu + J Y_i`.
fn conditional_mean(asset: Asset, params: &ModelParams) -> Box<dyn Fn(f64) -> f64 + Sync + '_> {
    let n = params.n as f64;
    let residual_sd = (n + (n * params.a).powi(2)).sqrt();
    match asset {
        Asset::SingleAsset => Box::new(move |y| params.mu + params.j * y),
        Asset::PortfolioMean => Box::new(move |y| (n * params.mu + params.j * y) / n),
        Asset::PortfolioTotal => Box::new(move |y| n * params.mu + params.j * y),
        Asset::PortfolioShare { m } => Box::new(move |y| (n * params.mu + params.j * y) / m as f64),
        Asset::Tranche { k, f } => {
            Box::new(move |y| f * norm_cdf((params.j * y - k) / residual_sd))
        }
    }
}

/// Barcode draws for `asset`: the asset's own `Y_i` for a single asset,
/// the pooled `Y` otherwise.
pub fn sample_barcodes(
    asset: Asset,
    params: &ModelParams,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let law = if asset == Asset::SingleAsset {
        params.with_n(1)
    } else {
        *params
    };
    Ok(sample_aggregates(&law, count, seed)?.y_total)
}

/// `V_Y(E[Z | Y])` by sampling `Y` and evaluating the conditional mean at
/// each draw.
pub fn mc_conditional_mean_variance(
    asset: Asset,
    params: &ModelParams,
    count: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    if let Asset::PortfolioShare { m: 0 } = asset {
        return Err(Error::BadAsset("share count must be positive".into()));
    }
    let ys = sample_barcodes(asset, params, count, seed)?;
    let mean = conditional_mean(asset, params);
    let values: Vec<f64> = ys.iter().map(|&y| mean(y)).collect();
    variance_estimate(&values)
}

/// Monte Carlo counterpart of the tranche price gap, at unit risk aversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrancheGapEstimate {
    /// `V_Y(E[staircase | Y])`.
    pub staircase_variance: EstimateWithError,
    /// `sum_j f_j^2 V_Y(E[F_j | Y])`.
    pub sum_of_variances: EstimateWithError,
    /// Difference of the two, estimated batch by batch.
    pub gap: EstimateWithError,
}

pub fn mc_tranche_gap(
    params: &ModelParams,
    spec: &TrancheSpec,
    count: usize,
    seed: u64,
) -> Result<TrancheGapEstimate> {
    if count < 2 * BATCHES {
        return Err(Error::InsufficientSamples {
            got: count,
            needed: 2 * BATCHES,
        });
    }
    let ys = sample_aggregates(params, count, seed)?.y_total;
    let m = spec.len();
    let means: Vec<Box<dyn Fn(f64) -> f64 + Sync + '_>> = spec
        .thresholds
        .iter()
        .zip(&spec.weights)
        .map(|(&k, &f)| conditional_mean(Asset::Tranche { k, f }, params))
        .collect();
    // columns: weighted conditional means, then their sum
    let mut cols = vec![vec![0.0; count]; m + 1];
    for (r, &y) in ys.iter().enumerate() {
        let mut total = 0.0;
        for j in 0..m {
            let v = means[j](y);
            cols[j][r] = v;
            total += v;
        }
        cols[m][r] = total;
    }
    let parts = |rows: std::ops::Range<usize>| {
        let whole = mean_and_variance(&cols[m][rows.clone()]).1;
        let pieces: f64 = (0..m)
            .map(|j| mean_and_variance(&cols[j][rows.clone()]).1)
            .sum();
        (whole, pieces)
    };
    Ok(TrancheGapEstimate {
        staircase_variance: batch_means(count, EstimatorKind::McVar, |r| Ok(parts(r).0))?,
        sum_of_variances: batch_means(count, EstimatorKind::McVar, |r| Ok(parts(r).1))?,
        gap: batch_means(count, EstimatorKind::McVar, |r| {
            let (w, p) = parts(r);
            Ok(w - p)
        })?,
    })
}

/// Mean `|staircase(X - n mu) - clamped target|` of a uniform grid.
pub fn mc_staircase_error(
    params: &ModelParams,
    spec: &TrancheSpec,
    count: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    if spec.step.is_none() {
        return Err(Error::BadGrid(
            "staircase error needs a uniform grid".into(),
        ));
    }
    let batch = sample_aggregates(params, count, seed)?;
    let shift = params.n as f64 * params.mu;
    let errors: Vec<f64> = batch
        .x_total
        .iter()
        .map(|&x| {
            let centred = x - shift;
            let target = spec.clamped_target(centred).expect("uniform grid");
            (spec.staircase(centred) - target).abs()
        })
        .collect();
    mean_estimate(&errors)
}

/// Tranche indicators `F = 1{X - n mu <= k}` and pooled barcodes, ready for
/// [`binned_mi_binary_continuous`].
pub fn sample_default_indicators(
    params: &ModelParams,
    k: f64,
    count: usize,
    seed: u64,
) -> Result<(Vec<bool>, Vec<f64>)> {
    let batch = sample_aggregates(params, count, seed)?;
    Ok((default_indicators(params, &batch.x_total, k), batch.y_total))
}

/// `1{x - n mu <= k}` for each pooled return.
pub fn default_indicators(params: &ModelParams, x_total: &[f64], k: f64) -> Vec<bool> {
    let shift = params.n as f64 * params.mu;
    x_total.iter().map(|&x| x - shift <= k).collect()
}
