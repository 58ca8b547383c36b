//! TOML config schema. Every field is optional; command-line flags
//! override file values, and defaults fill whatever remains. Keys are
//! kebab-case. Unknown keys are rejected so typos fail loudly instead of
//! silently running a default.

use std::path::{Path, PathBuf};

use hwlab::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub experiment: Option<ExperimentSection>,
    pub matrix: Option<MatrixSection>,
    pub sampler: Option<SamplerSection>,
    pub family: Option<FamilySection>,
    pub envelope: Option<EnvelopeSection>,
    pub covest: Option<CovestSection>,
    pub verify: Option<VerifySection>,
    pub lemmas: Option<LemmasSection>,
    #[serde(default)]
    pub bound: Vec<BoundSection>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn first_bound(&self) -> Option<&BoundSection> {
        self.bound.first()
    }
}

/// A grid is either an expression string `"start:stop:step"` (inclusive
/// endpoints), a comma list in a string, or an explicit TOML array.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Expr(String),
    List(Vec<f64>),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentSection {
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub confidence: Option<f64>,
    pub t_grid: Option<GridSpec>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MatrixSection {
    /// Named shorthand such as `identity16`.
    pub name: Option<String>,
    /// Matrix text file: first line `rows cols`, one row per line.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SamplerSection {
    /// `standard-gaussian` (alias `gaussian`), `gaussian-with-cov`,
    /// `rademacher-product` (alias `rademacher`), `bounded-product`
    /// (alias `bounded`), `sampling-without-replacement` (alias `swor`).
    pub kind: Option<String>,
    pub dim: Option<usize>,
    /// Concentration constant override.
    pub constant: Option<f64>,
    pub cov_file: Option<PathBuf>,
    pub half_width: Option<f64>,
    pub population_file: Option<PathBuf>,
    pub draws: Option<usize>,
    /// Force the empirical-calibration centering path.
    pub unknown_covariance: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FamilySection {
    pub dir: Option<PathBuf>,
    /// Manifest file name inside `dir`; lines are `filename` or
    /// `filename center`.
    pub manifest: Option<String>,
    /// Monte Carlo draws for the family-norm estimate.
    pub family_norm_samples: Option<usize>,
    /// Draws for the calibration run when centers are not analytic.
    pub calibration_samples: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EnvelopeSection {
    pub weights_file: Option<PathBuf>,
    pub radius: Option<f64>,
    /// Tail parameter for the moment-based radius.
    pub t: Option<f64>,
    pub second_moments_file: Option<PathBuf>,
    pub point_file: Option<PathBuf>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CovestSection {
    pub basis_file: Option<PathBuf>,
    /// Named shorthand such as `identity20`.
    pub basis: Option<String>,
    /// `euclidean` or `sup`.
    pub geometry: Option<String>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub t_values: Option<GridSpec>,
    pub constant: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifySection {
    pub n_functions: Option<usize>,
    pub n_samples: Option<usize>,
    pub t_grid: Option<GridSpec>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct LemmasSection {
    /// Whitespace-separated scalar samples; mutually exclusive with the
    /// sampler path.
    pub samples_file: Option<PathBuf>,
    pub n_samples: Option<usize>,
    /// Concentration constant for the quantile lower bound.
    pub k: Option<f64>,
    pub p_grid: Option<GridSpec>,
    /// Mixed-tail parameters; both or neither (fitted when absent).
    pub a: Option<f64>,
    pub b: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundSection {
    pub kind: Option<String>,
    pub hs: Option<f64>,
    pub op: Option<f64>,
    pub k: Option<f64>,
    pub covnorm: Option<f64>,
    pub c: Option<f64>,
    /// Fit the constant from the data even when `c` is given.
    pub fit: Option<bool>,
    pub dim: Option<usize>,
    pub family_norm: Option<f64>,
    pub sup_op: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub sigma_norm: Option<f64>,
    pub effective_rank: Option<f64>,
    pub n: Option<usize>,
}
