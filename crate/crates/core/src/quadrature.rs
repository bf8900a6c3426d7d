//! Gauss–Hermite quadrature for expectations over a normal variable.
//!
//! Rules are built for the probabilists' weight (the standard normal
//! density), so `rule.expect(f)` approximates `E[f(Z)]` for `Z ~ N(0, 1)`.
//! Nodes and weights come from the Golub–Welsch eigenproblem of the Jacobi
//! matrix, solved with implicit QL while tracking only the first row of the
//! eigenvector matrix, which keeps the cost at `O(N^2)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative stability required between successive node counts.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;
/// Absolute slack below which changes are treated as rounding noise.
pub const ABSOLUTE_FLOOR: f64 = 1e-15;
pub const MAX_DOUBLINGS: usize = 3;
/// Starting node count is never raised above this by the sharpness heuristic.
pub const MAX_START_NODES: usize = 4097;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    pub node_count: usize,
    pub mc_fallback_samples: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            node_count: 201,
            mc_fallback_samples: 1_000_000,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(self) -> Result<Self> {
        if self.node_count < 11 || self.node_count.is_multiple_of(2) {
            return Err(Error::BadQuadrature(format!(
                "node_count must be odd and at least 11, got {}",
                self.node_count
            )));
        }
        Ok(self)
    }

    /// Node count to start from for an integrand whose transition width, in
    /// units of the integration variable's standard deviation, is
    /// `1 / sqrt(sharpness)`.
    pub fn starting_nodes(&self, sharpness: f64) -> usize {
        let scaled = if sharpness.is_finite() {
            (8.0 * sharpness).ceil() as usize
        } else {
            MAX_START_NODES
        };
        let scaled = scaled.min(MAX_START_NODES) | 1;
        self.node_count.max(scaled)
    }
}

/// A Gauss–Hermite rule for `E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(count: usize) -> Self {
        assert!(count >= 1, "a quadrature rule needs at least one node");
        let mut diag = vec![0.0; count];
        // off[i] couples i and i+1: sqrt(i+1) for probabilists' Hermite
        let mut off: Vec<f64> = (1..=count).map(|k| (k as f64).sqrt()).collect();
        off[count - 1] = 0.0;
        let mut first_row = vec![0.0; count];
        first_row[0] = 1.0;
        implicit_ql(&mut diag, &mut off, &mut first_row);

        let mut pairs: Vec<(f64, f64)> = diag
            .into_iter()
            .zip(first_row.into_iter().map(|v| v * v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // The exact rule is symmetric about zero; impose it on the numerics.
        let mut nodes = vec![0.0; count];
        let mut weights = vec![0.0; count];
        for i in 0..count {
            let j = count - 1 - i;
            nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
        }
        let total = pairwise_sum(&weights);
        weights.iter_mut().for_each(|w| *w /= total);
        GaussHermite { nodes, weights }
    }

    /// Shared, lazily built rule of the given size.
    pub fn cached(count: usize) -> Arc<GaussHermite> {
        static RULES: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let rules = RULES.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = rules.lock().unwrap().get(&count) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(GaussHermite::new(count));
        rules.lock().unwrap().entry(count).or_insert(rule).clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(Z)]` with a fixed-order pairwise reduction.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .collect();
        pairwise_sum(&terms)
    }

    /// `E[f(Y)]` for `Y ~ N(0, variance)`.
    pub fn expect_normal<F: Fn(f64) -> f64>(&self, variance: f64, f: F) -> f64 {
        let sd = variance.sqrt();
        self.expect(|x| f(sd * x))
    }
}

/// Result of an integration that was repeated with more nodes until stable.
#[derive(Debug, Clone, PartialEq)]
pub struct Converged<T> {
    pub value: T,
    pub nodes: usize,
}

/// Evaluates `eval` on rules of increasing size (`N -> 2N - 1`, staying odd)
/// until every component changes by less than [`RELATIVE_TOLERANCE`].
pub fn integrate_stable<F>(
    settings: &QuadratureSettings,
    sharpness: f64,
    eval: F,
) -> Result<Converged<Vec<f64>>>
where
    F: Fn(&GaussHermite) -> Vec<f64>,
{
    let settings = settings.validate()?;
    let mut nodes = settings.starting_nodes(sharpness);
    let mut previous = eval(&GaussHermite::cached(nodes));
    let mut change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        nodes = 2 * nodes - 1;
        let current = eval(&GaussHermite::cached(nodes));
        change = max_relative_change(&previous, &current);
        if current.iter().zip(&previous).all(|(c, p)| stable(*p, *c)) {
            return Ok(Converged {
                value: current,
                nodes,
            });
        }
        previous = current;
    }
    Err(Error::QuadratureUnconverged {
        nodes,
        relative_change: change,
    })
}

/// Scalar form of [`integrate_stable`].
pub fn integrate_stable_scalar<F>(
    settings: &QuadratureSettings,
    sharpness: f64,
    eval: F,
) -> Result<Converged<f64>>
where
    F: Fn(&GaussHermite) -> f64,
{
    let out = integrate_stable(settings, sharpness, |rule| vec![eval(rule)])?;
    Ok(Converged {
        value: out.value[0],
        nodes: out.nodes,
    })
}

fn stable(old: f64, new: f64) -> bool {
    (new - old).abs() <= RELATIVE_TOLERANCE * new.abs().max(old.abs()) + ABSOLUTE_FLOOR
}

fn max_relative_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(o, n)| {
            let scale = o.abs().max(n.abs());
            if scale == 0.0 {
                0.0
            } else {
                (n - o).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Recursive pairwise summation; the association order depends only on the
/// length of the slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `diag` receives the eigenvalues. `off[i]` is the coupling between rows `i`
/// and `i + 1` (the last entry is ignored). `first_row` must hold the first
/// row of the starting basis and receives the first components of the
/// eigenvectors.
fn implicit_ql(diag: &mut [f64], off: &mut [f64], first_row: &mut [f64]) {
    let n = diag.len();
    if n < 2 {
        return;
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations <= 60, "implicit QL failed to converge");

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;

                let f = first_row[i + 1];
                first_row[i + 1] = s * first_row[i] + c * f;
                first_row[i] = c * first_row[i] - s * f;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_rule_is_exact() {
        // nodes 0, +-sqrt(3); weights 2/3, 1/6, 1/6
        let rule = GaussHermite::new(3);
        let s3 = 3f64.sqrt();
        assert!((rule.nodes()[0] + s3).abs() < 1e-14);
        assert_eq!(rule.nodes()[1], 0.0);
        assert!((rule.weights()[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((rule.weights()[0] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_normal_moments() {
        // E[Z^(2k)] = (2k-1)!!
        for count in [11, 201, 401, 1601] {
            let rule = GaussHermite::new(count);
            assert_eq!(rule.len(), count);
            assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-13);
            assert!(rule.expect(|x| x).abs() < 1e-13);
            assert!((rule.expect(|x| x * x) - 1.0).abs() < 1e-12);
            assert!((rule.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
            assert!((rule.expect(|x| x.powi(6)) - 15.0).abs() < 1e-10);
        }
    }

    #[test]
    fn integrates_smooth_functions() {
        // E[cos Z] = exp(-1/2); E[exp(Z)] = exp(1/2)
        let rule = GaussHermite::cached(201);
        assert!((rule.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-14);
        assert!((rule.expect(f64::exp) - 0.5f64.exp()).abs() < 1e-13);
        assert!((rule.expect_normal(4.0, |y| y * y) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rule_is_symmetric() {
        let rule = GaussHermite::new(201);
        for i in 0..201 {
            assert_eq!(rule.nodes()[i], -rule.nodes()[200 - i]);
            assert_eq!(rule.weights()[i], rule.weights()[200 - i]);
        }
    }

    #[test]
    fn settings_validation() {
        assert!(QuadratureSettings::default().validate().is_ok());
        for bad in [9, 10, 202] {
            let s = QuadratureSettings {
                node_count: bad,
                ..Default::default()
            };
            assert!(matches!(s.validate(), Err(Error::BadQuadrature(_))));
        }
    }

    #[test]
    fn starting_nodes_scale_with_sharpness() {
        let s = QuadratureSettings::default();
        assert_eq!(s.starting_nodes(0.0), 201);
        assert_eq!(s.starting_nodes(25.0), 201);
        assert_eq!(s.starting_nodes(101.0), 809);
        assert_eq!(s.starting_nodes(1e9), MAX_START_NODES);
        assert_eq!(s.starting_nodes(f64::INFINITY), MAX_START_NODES);
    }

    #[test]
    fn stable_integration_reports_failure() {
        let s = QuadratureSettings::default();
        let ok = integrate_stable_scalar(&s, 0.0, |r| r.expect(|x| x * x)).unwrap();
        assert!((ok.value - 1.0).abs() < 1e-12);
        assert_eq!(ok.nodes, 401);
        // a result that keeps moving with the node count never stabilises
        let err = integrate_stable_scalar(&s, 0.0, |r| r.len() as f64).unwrap_err();
        assert!(matches!(
            err,
            Error::QuadratureUnconverged { nodes: 1601, .. }
        ));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
