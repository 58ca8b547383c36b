//! A numerical laboratory for Hanson-Wright-type concentration
//! inequalities: closed-form tail bounds for quadratic forms in random
//! vectors, deterministic Monte Carlo machinery to compare those bounds
//! against empirical survival curves with distribution-free confidence
//! bands, convex envelope and Lipschitz extension constructions used in
//! the proofs, and covariance-operator deviation experiments in
//! finite-dimensional Banach geometries.
//!
//! Everything downstream of a seed is reproducible bit-for-bit: sampling
//! uses a counter-based generator indexed by `(seed, stream, counter)`,
//! parallel loops assign work by index rather than by scheduling order,
//! and the linear algebra avoids reductions whose result depends on the
//! thread count. Two runs with the same seed produce byte-identical
//! reports on any machine with IEEE-754 doubles, at any `--threads`
//! setting.
//!
//! The main entry points, bottom up:
//!
//! - [`linalg`]: dense symmetric matrices, a cyclic Jacobi eigensolver
//!   with an exact positive/negative spectral split, power iteration.
//! - [`rng`], [`special`]: the counter RNG and the special functions
//!   (inverse normal CDF, regularized incomplete gamma) behind the
//!   samplers and the chi-square oracle.
//! - [`distributions`]: seeded samplers (standard Gaussian, affine
//!   images, sampling without replacement), DKW confidence bands, and a
//!   Gaussian-concentration verifier.
//! - [`quadform`]: centered quadratic forms `x^T A x - E` for single
//!   matrices and suprema over finite families.
//! - [`bounds`]: the bound evaluators (classic, convex-concentration,
//!   projection, uniform-family, mixed-tail, quantile and median-mean
//!   inequalities, covariance deviation thresholds).
//! - [`montecarlo`]: empirical tail curves, constant fitting on a dyadic
//!   grid, the chi-square closed form, and quantile/median-gap checks.
//! - [`envelope`]: truncated quadratics, their concave tangent-plane
//!   envelopes solved via KKT bisection, McShane-Whitney extensions from
//!   witness sets, and a property verifier.
//! - [`covest`]: Karhunen-Loeve sampling, empirical covariance
//!   operators, effective rank, Gordon-Chevet expectation bounds, and
//!   the deviation-quantile experiment.
//! - [`report`]: 17-significant-digit float formatting, CSV assembly,
//!   atomic file writes.

pub mod bounds;
pub mod covest;
pub mod distributions;
pub mod envelope;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod quadform;
pub mod report;
pub mod rng;
pub mod special;

pub use bounds::BoundSpec;
pub use covest::{CovExperiment, DeviationReport, Geometry, KlBasis};
pub use distributions::Sampler;
pub use envelope::{LipschitzWitnessSet, TruncationSet, WeightedQuadratic};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use montecarlo::{CenterMode, TailConfig, TailCurve, TailReport, TailTarget};
pub use quadform::MatrixFamily;

// Compiles and runs every code block in the README and the guide under
// `cargo test`, so neither can drift from the library it documents.
#[cfg(doctest)]
mod book_snippets {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/matrices.md")]
    mod matrices {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/quadratic-forms.md")]
    mod quadratic_forms {}
    #[doc = include_str!("../../../book/src/tail-bounds.md")]
    mod tail_bounds {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/envelope.md")]
    mod envelope {}
    #[doc = include_str!("../../../book/src/covariance.md")]
    mod covariance {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
