//! Tranche analytics.
//!
//! A tranche with threshold `k` pays `F_k(X) = theta(X - n mu - k)`: one unit
//! unless the pooled return falls below its mean by more than `-k`.
//! Thresholds are offsets from `n mu`, so default probabilities do not depend
//! on `mu`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Moments};
use crate::quadrature::{integrate_stable, integrate_stable_scalar, QuadratureSettings};

pub use crate::normal::{inv_norm_cdf, norm_cdf};

/// Default probabilities closer than this to 0 or 1 are rejected by
/// [`mi_tranche`].
pub const DEFAULT_PROB_EPSILON: f64 = 1e-12;

/// `p_d^k = P(X < n mu + k) = H(k / sqrt(V(X)))`.
pub fn default_prob(params: &ModelParams, k: f64) -> f64 {
    norm_cdf(k / Moments::of(params).var_x_total.sqrt())
}

/// Inverse of [`default_prob`] in `k`.
pub fn threshold_from_default_prob(params: &ModelParams, p_d: f64) -> Result<f64> {
    if !(p_d > 0.0 && p_d < 1.0) {
        return Err(Error::Domain {
            what: "default probability",
            value: p_d,
        });
    }
    Ok(inv_norm_cdf(p_d)? * Moments::of(params).var_x_total.sqrt())
}

/// `p_d^k(y) = H((k - J y) / sqrt(V(X | Y)))`.
pub fn conditional_default_prob(params: &ModelParams, k: f64, y: f64) -> f64 {
    norm_cdf((k - params.j * y) / Moments::of(params).var_x_given_y.sqrt())
}

/// `1 - p_d^k(y)`, evaluated without cancellation.
pub fn conditional_survival_prob(params: &ModelParams, k: f64, y: f64) -> f64 {
    norm_cdf((params.j * y - k) / Moments::of(params).var_x_given_y.sqrt())
}

/// Squared ratio of the barcode's pull on the default boundary to the
/// residual noise, `J^2 V(Y) / V(X | Y)`. Large values mean `p_d^k(Y)` is
/// close to a step function of `Y`.
pub fn tranche_sharpness(params: &ModelParams) -> f64 {
    let m = Moments::of(params);
    params.j * params.j * m.var_y_total / m.var_x_given_y
}

/// `x ln(x / y)` with `0 ln 0 = 0`.
fn xlogx_over(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Kullback–Leibler divergence between Bernoulli laws, given both
/// complementary probabilities of each so tails keep their precision.
pub fn bernoulli_divergence(p: f64, one_minus_p: f64, q: f64, one_minus_q: f64) -> f64 {
    xlogx_over(p, q) + xlogx_over(one_minus_p, one_minus_q)
}

/// Entropy in nats of a Bernoulli(`p`) variable.
pub fn binary_entropy(p: f64) -> f64 {
    -xlogx_over(p, 1.0) - xlogx_over(1.0 - p, 1.0)
}

/// Closure pieces shared by the quadrature routines.
struct Conditional {
    j: f64,
    k: f64,
    sd_given_y: f64,
    var_y: f64,
}

impl Conditional {
    fn new(params: &ModelParams, k: f64) -> Self {
        let m = Moments::of(params);
        Conditional {
            j: params.j,
            k,
            sd_given_y: m.var_x_given_y.sqrt(),
            var_y: m.var_y_total,
        }
    }

    /// `(p_d(y), 1 - p_d(y))`.
    fn probs(&self, y: f64) -> (f64, f64) {
        let s = (self.k - self.j * y) / self.sd_given_y;
        (norm_cdf(s), norm_cdf(-s))
    }
}

/// `I(F_k, Y) = E_Y[ KL(Bernoulli(p_d^k(Y)) || Bernoulli(p_d^k)) ]`, in nats.
///
/// Integrated by Gauss–Hermite over `Y ~ N(0, V(Y))`, refining until the
/// value is stable to `1e-9` relative.
pub fn mi_tranche(params: &ModelParams, k: f64, settings: &QuadratureSettings) -> Result<f64> {
    let sd_x = Moments::of(params).var_x_total.sqrt();
    let p_bar = norm_cdf(k / sd_x);
    let q_bar = norm_cdf(-k / sd_x);
    if !(p_bar > DEFAULT_PROB_EPSILON && q_bar > DEFAULT_PROB_EPSILON) {
        return Err(Error::Domain {
            what: "tranche default probability",
            value: p_bar,
        });
    }
    let cond = Conditional::new(params, k);
    let out = integrate_stable_scalar(settings, tranche_sharpness(params), |rule| {
        rule.expect_normal(cond.var_y, |y| {
            let (p, q) = cond.probs(y);
            bernoulli_divergence(p, q, p_bar, q_bar)
        })
    })?;
    Ok(out.value.max(0.0))
}

/// [`mi_tranche`] at the threshold whose default probability is `p_d`.
pub fn mi_tranche_at_default_prob(
    params: &ModelParams,
    p_d: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    mi_tranche(params, threshold_from_default_prob(params, p_d)?, settings)
}

/// Quadrature moments of the conditional default probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalDefaultMoments {
    /// `E_Y[p_d(Y)]`; equals the unconditional default probability.
    pub mean: f64,
    /// `V_Y(p_d(Y))`.
    pub variance: f64,
    /// `E_Y[p_d(Y) (1 - p_d(Y))]`, the expected conditional variance of `F_k`.
    pub mean_bernoulli_variance: f64,
    pub nodes: usize,
}

pub fn conditional_default_moments(
    params: &ModelParams,
    k: f64,
    settings: &QuadratureSettings,
) -> Result<ConditionalDefaultMoments> {
    let cond = Conditional::new(params, k);
    let out = integrate_stable(settings, tranche_sharpness(params), |rule| {
        let mean = rule.expect_normal(cond.var_y, |y| cond.probs(y).0);
        let variance = rule.expect_normal(cond.var_y, |y| (cond.probs(y).0 - mean).powi(2));
        let bernoulli = rule.expect_normal(cond.var_y, |y| {
            let (p, q) = cond.probs(y);
            p * q
        });
        vec![mean, variance, bernoulli]
    })?;
    Ok(ConditionalDefaultMoments {
        mean: out.value[0],
        variance: out.value[1],
        mean_bernoulli_variance: out.value[2],
        nodes: out.nodes,
    })
}

/// A set of step payoffs `sum_j f_j theta(X - n mu - k_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrancheSpec {
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
    /// Default probability of each threshold, when known.
    pub target_default_probs: Option<Vec<f64>>,
    /// Uniform spacing when built by [`build_tranche_grid`]; it bounds the
    /// mean staircase reconstruction error.
    pub step: Option<f64>,
}

impl TrancheSpec {
    pub fn new(thresholds: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::BadGrid("no thresholds".into()));
        }
        if thresholds.len() != weights.len() {
            return Err(Error::BadGrid(format!(
                "{} thresholds but {} weights",
                thresholds.len(),
                weights.len()
            )));
        }
        if thresholds.iter().any(|k| !k.is_finite()) || thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::BadGrid(
                "thresholds must be finite and strictly increasing".into(),
            ));
        }
        if weights.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::BadGrid("weights must be positive".into()));
        }
        Ok(TrancheSpec {
            thresholds,
            weights,
            target_default_probs: None,
            step: None,
        })
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Payoff of the weighted staircase at centred return `x - n mu`.
    pub fn staircase(&self, centred: f64) -> f64 {
        self.thresholds
            .iter()
            .zip(&self.weights)
            .filter(|(k, _)| centred >= **k)
            .map(|(_, f)| f)
            .sum()
    }

    /// `clamp(x - n mu, k_1, k_m + step) - k_1`, the payoff the grid
    /// approximates. `None` unless the grid is uniform.
    pub fn clamped_target(&self, centred: f64) -> Option<f64> {
        let step = self.step?;
        let lo = self.thresholds[0];
        let hi = self.thresholds[self.len() - 1] + step;
        Some(centred.clamp(lo, hi) - lo)
    }
}

/// Uniform decomposition of `clamp(X - n mu, k_min, k_max) - k_min` into `m`
/// steps of width `(k_max - k_min) / m`, starting at `k_min`.
///
/// Pointwise the staircase exceeds its target by at most one step, so the
/// expected reconstruction error is bounded by `step`.
pub fn build_tranche_grid(
    params: &ModelParams,
    k_min: f64,
    k_max: f64,
    m: usize,
) -> Result<TrancheSpec> {
    if !(k_min.is_finite() && k_max.is_finite() && k_min < k_max) {
        return Err(Error::BadGrid(format!(
            "need k_min < k_max, got [{k_min}, {k_max}]"
        )));
    }
    if m < 2 {
        return Err(Error::BadGrid(format!("need at least 2 tranches, got {m}")));
    }
    let step = (k_max - k_min) / m as f64;
    let thresholds: Vec<f64> = (0..m).map(|j| k_min + j as f64 * step).collect();
    let targets = thresholds
        .iter()
        .map(|&k| default_prob(params, k))
        .collect();
    let mut spec = TrancheSpec::new(thresholds, vec![step; m])?;
    spec.target_default_probs = Some(targets);
    spec.step = Some(step);
    Ok(spec)
}

/// [`build_tranche_grid`] with the range given as default probabilities.
pub fn build_tranche_grid_from_default_probs(
    params: &ModelParams,
    p_low: f64,
    p_high: f64,
    m: usize,
) -> Result<TrancheSpec> {
    let k_min = threshold_from_default_prob(params, p_low)?;
    let k_max = threshold_from_default_prob(params, p_high)?;
    build_tranche_grid(params, k_min, k_max, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(a: f64, c: f64, j: f64, n: usize) -> ModelParams {
        ModelParams {
            mu: 0.0,
            a,
            c,
            j,
            n,
        }
    }

    fn q() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn default_probability_examples() {
        let p = params(0.3, 0.5, 0.5, 50);
        assert_eq!(default_prob(&p, 0.0), 0.5);
        let sd = Moments::of(&p).var_x_total.sqrt();
        assert!((default_prob(&p, -1.644_853_626_951_472_7 * sd) - 0.05).abs() < 1e-12);
        let tail = default_prob(&p, -40.0 * sd);
        assert!((0.0..1e-300).contains(&tail));
        // mu does not move default probabilities
        assert_eq!(
            default_prob(&ModelParams { mu: 3.0, ..p }, 1.0),
            default_prob(&p, 1.0)
        );
    }

    #[test]
    fn threshold_round_trip() {
        let p = params(0.3, 0.5, 0.5, 50);
        assert_eq!(threshold_from_default_prob(&p, 0.5).unwrap(), 0.0);
        let sd = Moments::of(&p).var_x_total.sqrt();
        let k = threshold_from_default_prob(&p, 0.05).unwrap();
        assert!((k - (-1.644_853_626_951_472_7 * sd)).abs() < 1e-9);
        for pd in [1e-6, 0.01, 0.3] {
            let k = threshold_from_default_prob(&p, pd).unwrap();
            assert!((default_prob(&p, k) - pd).abs() < 1e-9);
        }
        for bad in [0.0, 1.0, -1.0] {
            assert!(matches!(
                threshold_from_default_prob(&p, bad),
                Err(Error::Domain { .. })
            ));
        }
    }

    #[test]
    fn conditional_default_examples() {
        let flat = params(0.3, 0.5, 0.0, 10);
        let sd = Moments::of(&flat).var_x_given_y.sqrt();
        for y in [-3.0, 0.0, 5.0] {
            assert_eq!(conditional_default_prob(&flat, 1.5, y), norm_cdf(1.5 / sd));
        }
        let p = params(0.3, 0.5, 0.5, 10);
        assert_eq!(conditional_default_prob(&p, 0.0, 0.0), 0.5);
        assert!(conditional_default_prob(&p, 0.0, 1.0) < conditional_default_prob(&p, 0.0, 0.0));
        let s = conditional_survival_prob(&p, -2.0, 0.7) + conditional_default_prob(&p, -2.0, 0.7);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tower_property() {
        for (a, c, j, n) in [
            (0.3, 0.5, 0.5, 10),
            (0.0, 1.0, 1.0, 100),
            (1.0, 0.0, 0.5, 2),
        ] {
            let p = params(a, c, j, n);
            for pd in [0.5, 0.05, 0.005] {
                let k = threshold_from_default_prob(&p, pd).unwrap();
                let m = conditional_default_moments(&p, k, &q()).unwrap();
                assert!(
                    (m.mean - pd).abs() < 1e-9,
                    "{a} {c} {j} {n} {pd}: {}",
                    m.mean
                );
                // law of total variance for the Bernoulli payoff
                let total = pd * (1.0 - pd);
                assert!((m.variance + m.mean_bernoulli_variance - total).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mi_tranche_examples() {
        let silent = params(0.3, 0.5, 0.0, 50);
        assert_eq!(
            mi_tranche_at_default_prob(&silent, 0.05, &q()).unwrap(),
            0.0
        );
        let p = params(0.3, 0.5, 0.5, 50);
        let v = mi_tranche_at_default_prob(&p, 0.05, &q()).unwrap();
        assert!(v > 0.0 && v < crate::mi::mi_portfolio(&p));
        assert!(v <= binary_entropy(0.05));
    }

    #[test]
    fn mi_tranche_rejects_degenerate_thresholds() {
        let p = params(0.3, 0.5, 0.5, 10);
        let sd = Moments::of(&p).var_x_total.sqrt();
        assert!(matches!(
            mi_tranche(&p, -10.0 * sd, &q()),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            mi_tranche(&p, 10.0 * sd, &q()),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn mi_tranche_converges_in_sharp_case() {
        // J^2 V(Y) / V(X|Y) = 101
        let p = params(0.0, 1.0, 1.0, 100);
        for pd in [0.5, 0.05, 0.005] {
            let v = mi_tranche_at_default_prob(&p, pd, &q()).unwrap();
            assert!(v > 0.0 && v < crate::mi::mi_portfolio(&p));
        }
    }

    #[test]
    fn senior_tranches_carry_less_information() {
        let p = params(0.3, 0.5, 0.5, 10);
        let values: Vec<f64> = [0.5, 0.2, 0.05, 0.01, 0.001]
            .iter()
            .map(|&pd| mi_tranche_at_default_prob(&p, pd, &q()).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn grid_construction() {
        let p = params(0.3, 0.5, 0.5, 10);
        let g = build_tranche_grid(&p, 0.0, 2.0, 2).unwrap();
        assert_eq!(g.thresholds, vec![0.0, 1.0]);
        assert_eq!(g.weights, vec![1.0, 1.0]);
        assert_eq!(g.step, Some(1.0));
        assert_eq!(g.target_default_probs.as_ref().unwrap()[0], 0.5);
        assert!(matches!(
            build_tranche_grid(&p, 1.0, 1.0, 4),
            Err(Error::BadGrid(_))
        ));
        assert!(matches!(
            build_tranche_grid(&p, 0.0, 1.0, 1),
            Err(Error::BadGrid(_))
        ));
        assert!(matches!(
            TrancheSpec::new(vec![1.0, 0.0], vec![1.0, 1.0]),
            Err(Error::BadGrid(_))
        ));
        assert!(matches!(
            TrancheSpec::new(vec![0.0], vec![-1.0]),
            Err(Error::BadGrid(_))
        ));
        assert!(matches!(
            TrancheSpec::new(vec![0.0, 1.0], vec![1.0]),
            Err(Error::BadGrid(_))
        ));
    }

    #[test]
    fn staircase_payoff() {
        let g = build_tranche_grid(&params(0.3, 0.5, 0.5, 10), 0.0, 2.0, 2).unwrap();
        assert_eq!(g.staircase(-0.1), 0.0);
        assert_eq!(g.staircase(0.0), 1.0);
        assert_eq!(g.staircase(1.5), 2.0);
        assert_eq!(g.staircase(9.0), 2.0);
        assert_eq!(g.clamped_target(9.0), Some(2.0));
        assert_eq!(g.clamped_target(-9.0), Some(0.0));
    }

    proptest! {
        #[test]
        fn staircase_error_within_one_step(x in -5.0f64..5.0, m in 2usize..50) {
            let g = build_tranche_grid(&params(0.3, 0.5, 0.5, 10), -2.0, 3.0, m).unwrap();
            let gap = g.staircase(x) - g.clamped_target(x).unwrap();
            prop_assert!(gap >= -1e-12 && gap <= g.step.unwrap() + 1e-12);
        }

        #[test]
        fn mi_tranche_symmetric_in_default_prob(pd in 0.001f64..0.5, a in 0.0f64..1.0, c in 0.0f64..1.0) {
            let p = params(a, c, 0.5, 10);
            let lo = mi_tranche_at_default_prob(&p, pd, &q()).unwrap();
            let hi = mi_tranche_at_default_prob(&p, 1.0 - pd, &q()).unwrap();
            prop_assert!((lo - hi).abs() <= 1e-9 * lo.max(hi) + 1e-14);
        }

        #[test]
        fn default_prob_monotone(k in -20.0f64..20.0, dk in 1e-3f64..5.0) {
            let p = params(0.3, 0.5, 0.5, 10);
            prop_assert!(default_prob(&p, k + dk) > default_prob(&p, k));
        }
    }
}
