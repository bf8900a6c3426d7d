//! Run configuration, read from a single JSON document.
//!
//! ```json
//! {
//!   "model": { "mu": 0.0, "a": 0.3, "c": 0.5, "J": 0.5, "n": 10 },
//!   "prefs": { "alpha": 1.0 },
//!   "sweep": { "n_values": [1, 10, 100] },
//!   "tranche": { "p_d": [0.5, 0.05, 0.005], "grid_m": 5, "p_d_range": [0.01, 0.5] },
//!   "mc": { "samples": 1000000, "seed": 42 },
//!   "output": { "directory": "out", "unit": "bits" }
//! }
//! ```
//!
//! Every block is optional in the file; each subcommand checks for the
//! blocks it needs.

use std::path::{Path, PathBuf};

use barcodelab_core::{ModelParams, QuadratureSettings, RiskPreferences, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const OUT_ENV: &str = "BARCODELAB_OUT";
pub const DEFAULT_OUT_DIR: &str = "barcodelab-out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub prefs: Option<PrefsBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub tranche: Option<TrancheBlock>,
    #[serde(default)]
    pub mc: Option<McBlock>,
    #[serde(default)]
    pub output: Option<OutputBlock>,
    #[serde(default)]
    pub quadrature: Option<QuadratureSettings>,
    #[serde(default)]
    pub validate: Option<ValidateBlock>,
}

/// Either `alpha` directly or the CRRA pair `epsilon`, `gamma`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefsBlock {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
}

impl PrefsBlock {
    pub fn resolve(&self) -> CliResult<RiskPreferences> {
        match (self.alpha, self.epsilon, self.gamma) {
            (Some(alpha), None, None) => Ok(RiskPreferences::new(alpha)?),
            (None, Some(eps), Some(gamma)) => Ok(RiskPreferences::from_crra(eps, gamma)?),
            (None, None, None) => Ok(RiskPreferences::default()),
            _ => Err(CliError::Config(
                "prefs: give either `alpha` or both `epsilon` and `gamma`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NRange {
    pub start: usize,
    pub end: usize,
    /// Number of points, spaced evenly in `log n` and rounded.
    pub points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub n_values: Option<Vec<usize>>,
    pub range: Option<NRange>,
}

impl SweepBlock {
    /// Sorted, deduplicated pool sizes.
    pub fn n_values(&self) -> CliResult<Vec<usize>> {
        let mut out = match (&self.n_values, &self.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => log_spaced(r.start, r.end, r.points)?,
            _ => {
                return Err(CliError::Config(
                    "sweep: give exactly one of `n_values` or `range`".into(),
                ))
            }
        };
        out.sort_unstable();
        out.dedup();
        if out.is_empty() || out[0] == 0 {
            return Err(CliError::Config(
                "sweep: pool sizes must be positive".into(),
            ));
        }
        Ok(out)
    }
}

/// `points` values between `start` and `end`, evenly spaced in `log n`.
pub fn log_spaced(start: usize, end: usize, points: usize) -> CliResult<Vec<usize>> {
    if start == 0 || end < start || points < 2 {
        return Err(CliError::Config(format!(
            "sweep range needs 1 <= start <= end and points >= 2, got {start}..{end} x {points}"
        )));
    }
    let (lo, hi) = ((start as f64).ln(), (end as f64).ln());
    let mut v: Vec<usize> = (0..points)
        .map(|i| {
            (lo + (hi - lo) * i as f64 / (points - 1) as f64)
                .exp()
                .round() as usize
        })
        .collect();
    v.dedup();
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrancheBlock {
    /// Default probabilities of the single tranches to analyse.
    #[serde(default = "default_p_d")]
    pub p_d: Vec<f64>,
    /// Number of steps in the decomposition grid.
    #[serde(default = "default_grid_m")]
    pub grid_m: usize,
    /// Grid range as thresholds `[k_min, k_max]`, offsets from `n mu`.
    #[serde(default)]
    pub k_range: Option<[f64; 2]>,
    /// Grid range as default probabilities; used when `k_range` is absent.
    #[serde(default = "default_p_d_range")]
    pub p_d_range: [f64; 2],
}

impl Default for TrancheBlock {
    fn default() -> Self {
        TrancheBlock {
            p_d: default_p_d(),
            grid_m: default_grid_m(),
            k_range: None,
            p_d_range: default_p_d_range(),
        }
    }
}

fn default_p_d() -> Vec<f64> {
    vec![0.5, 0.05, 0.005]
}

fn default_grid_m() -> usize {
    5
}

fn default_p_d_range() -> [f64; 2] {
    [0.01, 0.5]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Draw count for the oracles that need more (cross information, tranche
    /// information, the tranche gap example).
    #[serde(default = "default_large_samples")]
    pub large_samples: usize,
    pub seed: u64,
}

fn default_samples() -> usize {
    1_000_000
}

fn default_large_samples() -> usize {
    10_000_000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    pub unit: Option<Unit>,
}

/// Size of the validation grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSize {
    #[default]
    Full,
    Reduced,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {
    #[serde(default)]
    pub grid: GridSize,
}

/// The parameter set used when a config has no `model` block.
pub fn default_model() -> ModelParams {
    ModelParams {
        mu: 0.0,
        a: 0.3,
        c: 0.5,
        j: 0.5,
        n: 10,
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self) -> CliResult<ModelParams> {
        Ok(self.model.unwrap_or_else(default_model).validate()?)
    }

    pub fn prefs(&self) -> CliResult<RiskPreferences> {
        self.prefs.unwrap_or_default().resolve()
    }

    pub fn quadrature(&self) -> CliResult<QuadratureSettings> {
        Ok(self.quadrature.unwrap_or_default().validate()?)
    }

    pub fn unit(&self) -> Unit {
        self.output
            .as_ref()
            .and_then(|o| o.unit)
            .unwrap_or_default()
    }

    pub fn tranche(&self) -> TrancheBlock {
        self.tranche.clone().unwrap_or_default()
    }

    pub fn mc_required(&self, command: &str) -> CliResult<McBlock> {
        self.mc
            .ok_or_else(|| CliError::Config(format!("`{command}` needs an `mc` block with a seed")))
    }

    /// Applies command-line overrides.
    pub fn with_overrides(
        mut self,
        out: Option<PathBuf>,
        unit: Option<Unit>,
        seed: Option<u64>,
    ) -> Self {
        if out.is_some() || unit.is_some() {
            let block = self.output.get_or_insert_with(OutputBlock::default);
            if out.is_some() {
                block.directory = out;
            }
            if unit.is_some() {
                block.unit = unit;
            }
        }
        if let Some(seed) = seed {
            match self.mc.as_mut() {
                Some(mc) => mc.seed = seed,
                None => {
                    self.mc = Some(McBlock {
                        samples: default_samples(),
                        large_samples: default_large_samples(),
                        seed,
                    })
                }
            }
        }
        self
    }

    /// Output directory: config (after overrides), then `BARCODELAB_OUT`, then
    /// [`DEFAULT_OUT_DIR`].
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .as_ref()
            .and_then(|o| o.directory.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
