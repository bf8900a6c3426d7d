//! The one-factor generative model.
//!
//! Returns and barcodes are built from independent standard normals:
//!
//! ```text
//! Y_i = eta_i + c * eta_0
//! X_i = mu + xi_i + a * xi_0 + J * Y_i          i = 1..n
//! ```
//!
//! so every asset is exchangeable and the pooled quantities are
//! `X = sum X_i`, `Y = sum Y_i`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// Parameters of the one-factor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean log-return of a single asset.
    #[serde(default)]
    pub mu: f64,
    /// Loading of returns on the common return factor `xi_0`.
    pub a: f64,
    /// Loading of barcodes on the common barcode factor `eta_0`.
    pub c: f64,
    /// Coupling of an asset's return to its own barcode.
    #[serde(rename = "J")]
    pub j: f64,
    /// Number of pooled assets.
    pub n: usize,
}

impl ModelParams {
    pub fn new(mu: f64, a: f64, c: f64, j: f64, n: usize) -> Result<Self> {
        ModelParams { mu, a, c, j, n }.validate()
    }

    /// Returns the parameters unchanged if they describe a valid model.
    pub fn validate(self) -> Result<Self> {
        for (field, value) in [("mu", self.mu), ("a", self.a), ("c", self.c), ("J", self.j)] {
            if !value.is_finite() {
                return Err(Error::NonFinite { field, value });
            }
        }
        for (field, value) in [("a", self.a), ("c", self.c), ("J", self.j)] {
            if value < 0.0 {
                return Err(Error::NegativeLoading { field, value });
            }
        }
        if self.n < 1 {
            return Err(Error::BadCount(self.n));
        }
        Ok(self)
    }

    pub fn with_n(self, n: usize) -> Self {
        ModelParams { n, ..self }
    }

    pub(crate) fn n_f64(&self) -> f64 {
        self.n as f64
    }
}

/// Free-standing form of [`ModelParams::validate`].
pub fn validate_params(raw: ModelParams) -> Result<ModelParams> {
    raw.validate()
}

/// Exact second-order structure of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    /// `V(X) = n + n^2 a^2 + J^2 V(Y)`
    pub var_x_total: f64,
    /// `V(Y) = n + n^2 c^2`
    pub var_y_total: f64,
    /// `V(X | Y) = n (1 + n a^2)`
    pub var_x_given_y: f64,
    /// `E[X] = n mu`
    pub mean_x: f64,
    /// `E[X | Y = y] = n mu + J y`
    pub cond_mean_slope: f64,
    pub var_xi: f64,
    pub cov_xi_xj: f64,
    pub cov_xi_yi: f64,
    pub cov_xi_yj: f64,
    pub var_yi: f64,
    pub cov_yi_yj: f64,
}

impl Moments {
    pub fn of(params: &ModelParams) -> Self {
        let n = params.n_f64();
        let (a2, c2, j2) = (
            params.a * params.a,
            params.c * params.c,
            params.j * params.j,
        );
        let var_y_total = n + n * n * c2;
        let var_x_given_y = n * (1.0 + n * a2);
        Moments {
            var_x_total: var_x_given_y + j2 * var_y_total,
            var_y_total,
            var_x_given_y,
            mean_x: n * params.mu,
            cond_mean_slope: params.j,
            var_xi: 1.0 + a2 + j2 * (1.0 + c2),
            cov_xi_xj: a2 + j2 * c2,
            cov_xi_yi: params.j * (1.0 + c2),
            cov_xi_yj: params.j * c2,
            var_yi: 1.0 + c2,
            cov_yi_yj: c2,
        }
    }

    /// Covariance matrix of the stacked vector `(X_1..X_n, Y_1..Y_n)`, row-major.
    pub fn joint_covariance(&self, n: usize) -> Vec<f64> {
        let d = 2 * n;
        let mut cov = vec![0.0; d * d];
        for r in 0..d {
            for s in 0..d {
                let same = r % n == s % n;
                cov[r * d + s] = match (r < n, s < n) {
                    (true, true) if same => self.var_xi,
                    (true, true) => self.cov_xi_xj,
                    (false, false) if same => self.var_yi,
                    (false, false) => self.cov_yi_yj,
                    _ if same => self.cov_xi_yi,
                    _ => self.cov_xi_yj,
                };
            }
        }
        cov
    }

    /// Conditional mean of the pooled return given the pooled barcode.
    pub fn cond_mean_x(&self, y: f64) -> f64 {
        self.mean_x + self.cond_mean_slope * y
    }
}

pub fn moments(params: &ModelParams) -> Moments {
    Moments::of(params)
}

/// Upper bound on the number of `f64` cells a single sample may hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryBudget {
    pub max_cells: usize,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        // 2^26 cells per matrix: 512 MiB for each of X and Y.
        MemoryBudget { max_cells: 1 << 26 }
    }
}

/// `count` joint realisations of the model.
///
/// Realisation `r` is drawn from substream `r` of the master seed, in the
/// order `xi_0, eta_0, (eta_i, xi_i) for i in 1..=n`, so the batch does not
/// depend on how the work is split across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub count: usize,
    pub n: usize,
    pub seed: u64,
    /// Row-major `count x n` asset returns.
    pub x: Vec<f64>,
    /// Row-major `count x n` asset barcodes.
    pub y: Vec<f64>,
    /// Row sums of `x`.
    pub x_total: Vec<f64>,
    /// Row sums of `y`.
    pub y_total: Vec<f64>,
}

impl SampleBatch {
    pub fn x_row(&self, r: usize) -> &[f64] {
        &self.x[r * self.n..(r + 1) * self.n]
    }

    pub fn y_row(&self, r: usize) -> &[f64] {
        &self.y[r * self.n..(r + 1) * self.n]
    }

    /// Column `i` of the returns.
    pub fn x_column(&self, i: usize) -> Vec<f64> {
        self.x.iter().skip(i).step_by(self.n).copied().collect()
    }

    pub fn y_column(&self, i: usize) -> Vec<f64> {
        self.y.iter().skip(i).step_by(self.n).copied().collect()
    }
}

pub fn sample_joint(params: &ModelParams, count: usize, seed: u64) -> Result<SampleBatch> {
    sample_joint_with_budget(params, count, seed, MemoryBudget::default())
}

pub fn sample_joint_with_budget(
    params: &ModelParams,
    count: usize,
    seed: u64,
    budget: MemoryBudget,
) -> Result<SampleBatch> {
    if count < 1 {
        return Err(Error::InsufficientSamples { got: 0, needed: 1 });
    }
    let n = params.n;
    let cells = count.saturating_mul(n);
    if cells > budget.max_cells {
        return Err(Error::AllocationTooLarge {
            cells,
            budget: budget.max_cells,
        });
    }

    let mut x = vec![0.0; cells];
    let mut y = vec![0.0; cells];
    let mut x_total = vec![0.0; count];
    let mut y_total = vec![0.0; count];

    x.par_chunks_mut(n)
        .zip(y.par_chunks_mut(n))
        .zip(x_total.par_iter_mut().zip(y_total.par_iter_mut()))
        .enumerate()
        .for_each(|(r, ((xs, ys), (xt, yt)))| {
            let mut rng = substream(seed, Stream::Joint, r as u64);
            let xi0: f64 = rng.sample(StandardNormal);
            let eta0: f64 = rng.sample(StandardNormal);
            for (xi, yi) in xs.iter_mut().zip(ys.iter_mut()) {
                let eta: f64 = rng.sample(StandardNormal);
                let xi_own: f64 = rng.sample(StandardNormal);
                *yi = eta + params.c * eta0;
                *xi = params.mu + xi_own + params.a * xi0 + params.j * *yi;
            }
            *xt = xs.iter().sum();
            *yt = ys.iter().sum();
        });

    Ok(SampleBatch {
        count,
        n,
        seed,
        x,
        y,
        x_total,
        y_total,
    })
}

/// Pooled realisations `(X, Y)` without the per-asset columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateBatch {
    pub count: usize,
    pub seed: u64,
    pub x_total: Vec<f64>,
    pub y_total: Vec<f64>,
}

/// Draws `(X, Y)` directly from the model's factor structure.
///
/// The sum of `n` independent unit normals is drawn as `sqrt(n) * z`, which
/// has the same law; this keeps very large pools (`n = 10^5`) and very long
/// runs (`10^7` draws) within memory. Each realisation uses four normals
/// `(z_xi, xi_0, z_eta, eta_0)` from its own substream.
pub fn sample_aggregates(params: &ModelParams, count: usize, seed: u64) -> Result<AggregateBatch> {
    if count < 1 {
        return Err(Error::InsufficientSamples { got: 0, needed: 1 });
    }
    let n = params.n_f64();
    let root_n = n.sqrt();
    let mut x_total = vec![0.0; count];
    let mut y_total = vec![0.0; count];
    x_total
        .par_iter_mut()
        .zip(y_total.par_iter_mut())
        .enumerate()
        .for_each(|(r, (xt, yt))| {
            let mut rng = substream(seed, Stream::Aggregate, r as u64);
            let z_xi: f64 = rng.sample(StandardNormal);
            let xi0: f64 = rng.sample(StandardNormal);
            let z_eta: f64 = rng.sample(StandardNormal);
            let eta0: f64 = rng.sample(StandardNormal);
            *yt = root_n * z_eta + n * params.c * eta0;
            *xt = n * params.mu + root_n * z_xi + n * params.a * xi0 + params.j * *yt;
        });
    Ok(AggregateBatch {
        count,
        seed,
        x_total,
        y_total,
    })
}
