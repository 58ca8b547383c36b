//! Samplers for random vectors that satisfy a concentration property, plus
//! empirical checks of that property.
//!
//! A [`Sampler`] bundles the distribution itself with the metadata the rest
//! of the crate needs: the concentration constant `K`, whether concentration
//! is known for all Lipschitz functions or only convex ones, the mean, and
//! the covariance when it is known in closed form.
//!
//! Sampling is counter-based: entry `(i, j)` of the sample matrix is a pure
//! function of `(seed, stream, i, j)`, so results are bit-identical no matter
//! how the rows are scheduled across threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, euclidean_norm, sym_sqrt_psd, Matrix};
use crate::rng::{streams, CounterRng};
use crate::special::normal_sf;

/// Which class of Lipschitz test functions the concentration constant covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConcentrationFlavor {
    /// Concentration holds for every 1-Lipschitz function.
    FullLipschitz,
    /// Concentration is only known for convex 1-Lipschitz functions.
    ConvexOnly,
}

impl ConcentrationFlavor {
    pub fn name(&self) -> &'static str {
        match self {
            ConcentrationFlavor::FullLipschitz => "full-lipschitz",
            ConcentrationFlavor::ConvexOnly => "convex-only",
        }
    }
}

/// Covariance metadata carried by a sampler.
#[derive(Clone, Debug)]
pub enum CovarianceInfo {
    /// Closed-form covariance matrix.
    Known(Matrix),
    /// No analytic covariance; consumers must calibrate empirically.
    Unknown,
}

impl CovarianceInfo {
    pub fn known(&self) -> Option<&Matrix> {
        match self {
            CovarianceInfo::Known(m) => Some(m),
            CovarianceInfo::Unknown => None,
        }
    }
}

/// Default concentration constant for the product-type samplers. It can be
/// overridden per sampler with [`Sampler::with_constant`].
pub const DEFAULT_PRODUCT_CONSTANT: f64 = 4.0;

#[derive(Clone, Debug)]
enum SamplerKind {
    StandardGaussian,
    GaussianWithCov { sqrt_cov: Matrix },
    RademacherProduct,
    BoundedProduct { half_width: f64 },
    SamplingWithoutReplacement { population: Vec<f64>, draws: usize },
    Affine {
        base: Box<Sampler>,
        map: Matrix,
        shift: Vec<f64>,
    },
}

/// A distribution over `R^dim` together with its concentration metadata.
#[derive(Clone, Debug)]
pub struct Sampler {
    kind: SamplerKind,
    dim: usize,
    constant: f64,
    flavor: ConcentrationFlavor,
    mean: Vec<f64>,
    covariance: CovarianceInfo,
}

impl Sampler {
    /// Standard Gaussian on `R^dim`; concentrates for all 1-Lipschitz
    /// functions with constant `sqrt(2)`.
    pub fn standard_gaussian(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Sampler {
            kind: SamplerKind::StandardGaussian,
            dim,
            constant: 2f64.sqrt(),
            flavor: ConcentrationFlavor::FullLipschitz,
            mean: vec![0.0; dim],
            covariance: CovarianceInfo::Known(Matrix::identity(dim)),
        })
    }

    /// Centered Gaussian with the given covariance (symmetric PSD).
    /// A Lipschitz image of the standard Gaussian, so the constant scales
    /// with the square root of the covariance operator norm.
    pub fn gaussian_with_cov(cov: Matrix) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                cov.rows(),
                cov.cols()
            )));
        }
        let dim = cov.rows();
        let sqrt_cov = sym_sqrt_psd(&cov)?;
        let top = crate::linalg::eigh(&cov, 1e-12)?
            .eigenvalues
            .first()
            .copied()
            .unwrap_or(0.0)
            .max(0.0);
        Ok(Sampler {
            kind: SamplerKind::GaussianWithCov { sqrt_cov },
            dim,
            constant: (2.0 * top).sqrt().max(f64::MIN_POSITIVE),
            flavor: ConcentrationFlavor::FullLipschitz,
            mean: vec![0.0; dim],
            covariance: CovarianceInfo::Known(cov),
        })
    }

    /// Independent +/-1 coordinates; convex concentration only.
    pub fn rademacher_product(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Sampler {
            kind: SamplerKind::RademacherProduct,
            dim,
            constant: DEFAULT_PRODUCT_CONSTANT,
            flavor: ConcentrationFlavor::ConvexOnly,
            mean: vec![0.0; dim],
            covariance: CovarianceInfo::Known(Matrix::identity(dim)),
        })
    }

    /// Independent coordinates uniform on `[-half_width, half_width]`;
    /// convex concentration only.
    pub fn bounded_product(dim: usize, half_width: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        let var = half_width * half_width / 3.0;
        Ok(Sampler {
            kind: SamplerKind::BoundedProduct { half_width },
            dim,
            constant: DEFAULT_PRODUCT_CONSTANT,
            flavor: ConcentrationFlavor::ConvexOnly,
            mean: vec![0.0; dim],
            covariance: CovarianceInfo::Known(Matrix::identity(dim).scale(var)),
        })
    }

    /// `draws` values sampled uniformly without replacement from a fixed
    /// population, in draw order; convex concentration only.
    ///
    /// Mean and covariance follow the classical simple-random-sampling
    /// formulas: each coordinate has the population mean and variance, and
    /// distinct coordinates have covariance `-var / (len - 1)`.
    pub fn sampling_without_replacement(population: Vec<f64>, draws: usize) -> Result<Self> {
        if population.len() < 2 {
            return Err(Error::InvalidParams(
                "population needs at least two values".into(),
            ));
        }
        if let Some(bad) = population.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "population values must be finite, found {bad}"
            )));
        }
        if draws == 0 || draws > population.len() {
            return Err(Error::InvalidParams(format!(
                "draw count must be in 1..={}, got {draws}",
                population.len()
            )));
        }
        let n = population.len() as f64;
        let pop_mean = population.iter().sum::<f64>() / n;
        let pop_var = population
            .iter()
            .map(|v| (v - pop_mean) * (v - pop_mean))
            .sum::<f64>()
            / n;
        let off = -pop_var / (n - 1.0);
        let mut cov = Matrix::zeros(draws, draws);
        for i in 0..draws {
            for j in 0..draws {
                cov.set(i, j, if i == j { pop_var } else { off });
            }
        }
        Ok(Sampler {
            kind: SamplerKind::SamplingWithoutReplacement { population, draws },
            dim: draws,
            constant: DEFAULT_PRODUCT_CONSTANT,
            flavor: ConcentrationFlavor::ConvexOnly,
            mean: vec![pop_mean; draws],
            covariance: CovarianceInfo::Known(cov),
        })
    }

    /// `U X + b` for an orthogonal `U`. Orthogonal maps are 1-Lipschitz
    /// bijections and shifts are exact, so the constant, flavor, and
    /// concentration class carry over unchanged.
    pub fn affine(base: Sampler, map: Matrix, shift: Vec<f64>) -> Result<Self> {
        if !map.is_square() || map.rows() != base.dim {
            return Err(Error::DimensionMismatch(format!(
                "map must be {0}x{0} to match the base sampler, got {1}x{2}",
                base.dim,
                map.rows(),
                map.cols()
            )));
        }
        if shift.len() != base.dim {
            return Err(Error::DimensionMismatch(format!(
                "shift length {} does not match dimension {}",
                shift.len(),
                base.dim
            )));
        }
        if let Some(bad) = shift.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "shift entries must be finite, found {bad}"
            )));
        }
        // orthogonality check: max |U^T U - I| <= 1e-10
        let n = base.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let mut d = 0.0;
                for k in 0..n {
                    d += map.get(k, i) * map.get(k, j);
                }
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - want).abs());
            }
        }
        if worst > 1e-10 {
            return Err(Error::InvalidParams(format!(
                "map is not orthogonal: max |U^T U - I| = {worst:e}"
            )));
        }
        let mean: Vec<f64> = map
            .matvec(&base.mean)
            .iter()
            .zip(&shift)
            .map(|(m, s)| m + s)
            .collect();
        let covariance = match &base.covariance {
            CovarianceInfo::Known(c) => {
                let uc = map.matmul(c)?;
                CovarianceInfo::Known(uc.matmul(&map.transpose())?)
            }
            CovarianceInfo::Unknown => CovarianceInfo::Unknown,
        };
        Ok(Sampler {
            dim: base.dim,
            constant: base.constant,
            flavor: base.flavor,
            mean,
            covariance,
            kind: SamplerKind::Affine {
                base: Box::new(base),
                map,
                shift,
            },
        })
    }

    /// Replaces the declared concentration constant. Useful for stress
    /// testing the verifier with a constant that is too small, or for
    /// supplying a sharper constant than the default.
    pub fn with_constant(mut self, constant: f64) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "concentration constant must be positive and finite, got {constant}"
            )));
        }
        self.constant = constant;
        Ok(self)
    }

    /// Drops the analytic covariance, forcing consumers onto their
    /// calibration paths. Intended for tests and experiments.
    pub fn with_unknown_covariance(mut self) -> Self {
        self.covariance = CovarianceInfo::Unknown;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn flavor(&self) -> ConcentrationFlavor {
        self.flavor
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &CovarianceInfo {
        &self.covariance
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            SamplerKind::StandardGaussian => "standard-gaussian",
            SamplerKind::GaussianWithCov { .. } => "gaussian-with-cov",
            SamplerKind::RademacherProduct => "rademacher-product",
            SamplerKind::BoundedProduct { .. } => "bounded-product",
            SamplerKind::SamplingWithoutReplacement { .. } => "sampling-without-replacement",
            SamplerKind::Affine { .. } => "affine",
        }
    }

    /// JSON description for report sidecars.
    pub fn describe(&self) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "kind": self.kind_name(),
            "dimension": self.dim,
            "constant": self.constant,
            "flavor": self.flavor.name(),
        });
        let extra = match &self.kind {
            SamplerKind::BoundedProduct { half_width } => {
                serde_json::json!({ "half_width": half_width })
            }
            SamplerKind::SamplingWithoutReplacement { population, draws } => {
                serde_json::json!({ "population_size": population.len(), "draws": draws })
            }
            SamplerKind::Affine { base, .. } => serde_json::json!({ "base": base.describe() }),
            _ => serde_json::Value::Null,
        };
        if let serde_json::Value::Object(map) = &mut obj {
            if !extra.is_null() {
                if let serde_json::Value::Object(e) = extra {
                    for (k, v) in e {
                        map.insert(k, v);
                    }
                }
            }
        }
        obj
    }

    /// Counters consumed per sample row; rows use disjoint counter blocks so
    /// any row can be generated independently of the others.
    fn counters_per_row(&self) -> u64 {
        match &self.kind {
            SamplerKind::StandardGaussian
            | SamplerKind::GaussianWithCov { .. }
            | SamplerKind::RademacherProduct
            | SamplerKind::BoundedProduct { .. } => self.dim as u64,
            SamplerKind::SamplingWithoutReplacement { population, .. } => population.len() as u64,
            SamplerKind::Affine { base, .. } => base.counters_per_row(),
        }
    }

    fn fill_row(&self, rng: &CounterRng, base_counter: u64, out: &mut [f64]) {
        match &self.kind {
            SamplerKind::StandardGaussian => {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = rng.normal_at(base_counter + j as u64);
                }
            }
            SamplerKind::GaussianWithCov { sqrt_cov } => {
                let g: Vec<f64> = (0..self.dim)
                    .map(|j| rng.normal_at(base_counter + j as u64))
                    .collect();
                let y = sqrt_cov.matvec(&g);
                out.copy_from_slice(&y);
            }
            SamplerKind::RademacherProduct => {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = rng.sign_at(base_counter + j as u64);
                }
            }
            SamplerKind::BoundedProduct { half_width } => {
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot = half_width * (2.0 * rng.uniform_at(base_counter + j as u64) - 1.0);
                }
            }
            SamplerKind::SamplingWithoutReplacement { population, draws } => {
                // partial Fisher-Yates over population indices
                let mut idx: Vec<u32> = (0..population.len() as u32).collect();
                for k in 0..*draws {
                    let remaining = (population.len() - k) as u64;
                    let r = k + rng.index_at(base_counter + k as u64, remaining) as usize;
                    idx.swap(k, r);
                    out[k] = population[idx[k] as usize];
                }
            }
            SamplerKind::Affine { base, map, shift } => {
                let mut x = vec![0.0; base.dim];
                base.fill_row(rng, base_counter, &mut x);
                let y = map.matvec(&x);
                for (slot, (v, s)) in out.iter_mut().zip(y.iter().zip(shift)) {
                    *slot = v + s;
                }
            }
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParams("dimension must be positive".into()));
    }
    Ok(())
}

/// Draws `count` samples as the rows of a `count x dim` matrix, using the
/// primary sample stream.
pub fn sample(s: &Sampler, seed: u64, count: usize) -> Matrix {
    sample_stream(s, seed, streams::SAMPLES, count)
}

/// Like [`sample`] but on an explicit substream. Row `i` depends only on
/// `(seed, stream, i)`, so output is bit-identical for any thread count.
pub fn sample_stream(s: &Sampler, seed: u64, stream: u64, count: usize) -> Matrix {
    assert!(count > 0, "sample count must be positive");
    let rng = CounterRng::new(seed, stream);
    let stride = s.counters_per_row();
    let dim = s.dim();
    let mut data = vec![0.0; count * dim];
    data.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
        s.fill_row(&rng, i as u64 * stride, row);
    });
    Matrix::new(count, dim, data).expect("sampled entries are finite")
}

/// One random convex 1-Lipschitz test function.
enum TestFunction {
    /// `x -> <u, x>` for a unit vector `u`.
    Linear(Vec<f64>),
    /// `x -> max_k <u_k, x>`, each `u_k` a unit vector.
    MaxLinear(Vec<Vec<f64>>),
    /// `x -> |x - p|`.
    DistanceTo(Vec<f64>),
}

impl TestFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Linear(u) => dot(u, x),
            TestFunction::MaxLinear(us) => us
                .iter()
                .map(|u| dot(u, x))
                .fold(f64::NEG_INFINITY, f64::max),
            TestFunction::DistanceTo(p) => {
                let mut s = 0.0;
                for i in 0..x.len() {
                    let d = x[i] - p[i];
                    s += d * d;
                }
                s.sqrt()
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            TestFunction::Linear(_) => "linear-form".into(),
            TestFunction::MaxLinear(us) => format!("max-of-{}-linear-forms", us.len()),
            TestFunction::DistanceTo(_) => "distance-to-point".into(),
        }
    }
}

/// Counters per test function inside the TEST_FUNCTIONS stream: up to 8 unit
/// vectors of `dim` normals plus one selector word.
fn function_counter_block(dim: usize) -> u64 {
    8 * dim as u64 + 1
}

fn build_test_function(rng: &CounterRng, index: usize, dim: usize) -> TestFunction {
    let base = index as u64 * function_counter_block(dim);
    let unit = |offset: u64| -> Vec<f64> {
        let mut u: Vec<f64> = (0..dim)
            .map(|j| rng.normal_at(base + offset + j as u64))
            .collect();
        let n = euclidean_norm(&u);
        if n == 0.0 {
            u[0] = 1.0;
        } else {
            for v in u.iter_mut() {
                *v /= n;
            }
        }
        u
    };
    match index % 3 {
        0 => TestFunction::Linear(unit(1)),
        1 => {
            // 2..=8 forms; the max of 1-Lipschitz functions is 1-Lipschitz
            // and convex
            let count = 2 + (rng.u64_at(base) % 7) as usize;
            let us = (0..count)
                .map(|k| unit(1 + (k * dim) as u64))
                .collect();
            TestFunction::MaxLinear(us)
        }
        _ => {
            // a fixed reference point a couple of standard deviations out
            let p = (0..dim)
                .map(|j| 2.0 * rng.normal_at(base + 1 + j as u64))
                .collect();
            TestFunction::DistanceTo(p)
        }
    }
}

/// A test function whose empirical tail exceeded the declared concentration
/// bound at some threshold by more than sampling error can explain.
#[derive(Clone, Debug)]
pub struct ConcentrationViolation {
    pub function: String,
    pub function_index: usize,
    pub threshold: f64,
    /// Empirical survival probability at the threshold.
    pub empirical_survival: f64,
    /// DKW lower confidence bound on the true survival (`survival - band`).
    pub certified_lower: f64,
    /// The declared bound `2 exp(-t^2 / K^2)`.
    pub declared_bound: f64,
}

/// Outcome of [`verify_concentration`].
#[derive(Clone, Debug)]
pub struct ConcentrationReport {
    pub violations: Vec<ConcentrationViolation>,
    pub functions_checked: usize,
    pub n_samples: usize,
    pub constant: f64,
    pub band_halfwidth: f64,
}

impl ConcentrationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

const VERIFY_CONFIDENCE: f64 = 0.99;

/// Tests the declared concentration property against random convex
/// 1-Lipschitz functions.
///
/// For each function `f`, the empirical survival of `|f(X) - mean f(X)|` is
/// compared at every `t` in `t_grid` against `2 exp(-t^2 / K^2)`. A
/// violation is reported when the survival exceeds the declared bound by
/// more than the 99% DKW band halfwidth, i.e. when the data certify the
/// excess rather than merely suggest it. A clean report is evidence, not
/// proof; an undersized `K` shows up as a nonempty report.
pub fn verify_concentration(
    s: &Sampler,
    n_functions: usize,
    n_samples: usize,
    seed: u64,
    t_grid: &[f64],
) -> Result<ConcentrationReport> {
    if n_functions == 0 {
        return Err(Error::InvalidParams(
            "need at least one test function".into(),
        ));
    }
    if n_samples < 100 {
        return Err(Error::InsufficientSamples {
            need: 100,
            got: n_samples,
        });
    }
    validate_grid(t_grid)?;
    let draws = sample_stream(s, seed, streams::SAMPLES, n_samples);
    let fn_rng = CounterRng::new(seed, streams::TEST_FUNCTIONS);
    let dim = s.dim();
    let band = dkw_halfwidth(VERIFY_CONFIDENCE, n_samples);
    let k2 = s.constant() * s.constant();

    let per_function: Vec<Vec<ConcentrationViolation>> = (0..n_functions)
        .into_par_iter()
        .map(|fi| {
            let f = build_test_function(&fn_rng, fi, dim);
            let mut vals: Vec<f64> = (0..n_samples).map(|i| f.eval(draws.row(i))).collect();
            let mean = vals.iter().sum::<f64>() / n_samples as f64;
            for v in vals.iter_mut() {
                *v = (*v - mean).abs();
            }
            vals.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
            let mut out = Vec::new();
            for &t in t_grid {
                let below = vals.partition_point(|&w| w < t);
                let survival = (n_samples - below) as f64 / n_samples as f64;
                let declared = 2.0 * (-t * t / k2).exp();
                if survival - band > declared {
                    out.push(ConcentrationViolation {
                        function: f.describe(),
                        function_index: fi,
                        threshold: t,
                        empirical_survival: survival,
                        certified_lower: survival - band,
                        declared_bound: declared,
                    });
                }
            }
            out
        })
        .collect();

    Ok(ConcentrationReport {
        violations: per_function.into_iter().flatten().collect(),
        functions_checked: n_functions,
        n_samples,
        constant: s.constant(),
        band_halfwidth: band,
    })
}

/// Result of the covariance operator-norm sanity check.
#[derive(Clone, Debug)]
pub struct CovNormCheck {
    /// Largest eigenvalue of the empirical covariance.
    pub estimate: f64,
    /// The theoretical ceiling `2 K^2`.
    pub bound: f64,
    /// Standard error of the top-direction variance estimate.
    pub std_error: f64,
    pub pass: bool,
}

/// Estimates the covariance operator norm empirically and checks it against
/// the ceiling `2 K^2` implied by the concentration property, allowing three
/// standard errors of slack.
pub fn cov_opnorm_check(s: &Sampler, n_samples: usize, seed: u64) -> Result<CovNormCheck> {
    if n_samples < 100 {
        return Err(Error::InsufficientSamples {
            need: 100,
            got: n_samples,
        });
    }
    let draws = sample_stream(s, seed, streams::COV_CHECK, n_samples);
    let dim = s.dim();
    let mean = s.mean();
    let mut cov = Matrix::zeros(dim, dim);
    for i in 0..n_samples {
        let row = draws.row(i);
        for p in 0..dim {
            let cp = row[p] - mean[p];
            for q in p..dim {
                let v = cov.get(p, q) + cp * (row[q] - mean[q]);
                cov.set(p, q, v);
            }
        }
    }
    let inv_n = 1.0 / n_samples as f64;
    for p in 0..dim {
        for q in p..dim {
            let v = cov.get(p, q) * inv_n;
            cov.set(p, q, v);
            cov.set(q, p, v);
        }
    }
    let split = crate::linalg::eigh(&cov, 1e-12)?;
    let estimate = split.eigenvalues[0].max(0.0);
    // standard error of the variance along the top eigendirection
    let v: Vec<f64> = (0..dim).map(|i| split.vectors.get(i, 0)).collect();
    let proj_sq: Vec<f64> = (0..n_samples)
        .map(|i| {
            let row = draws.row(i);
            let mut d = 0.0;
            for j in 0..dim {
                d += v[j] * (row[j] - mean[j]);
            }
            d * d
        })
        .collect();
    let m = proj_sq.iter().sum::<f64>() * inv_n;
    let var = proj_sq.iter().map(|x| (x - m) * (x - m)).sum::<f64>() * inv_n;
    let std_error = (var * inv_n).sqrt();
    let bound = 2.0 * s.constant() * s.constant();
    Ok(CovNormCheck {
        estimate,
        bound,
        std_error,
        pass: estimate <= bound + 3.0 * std_error,
    })
}

/// DKW band halfwidth `sqrt(ln(2 / (1 - confidence)) / (2 n))`.
pub fn dkw_halfwidth(confidence: f64, n_samples: usize) -> f64 {
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "confidence must be in (0, 1)"
    );
    assert!(n_samples > 0, "need at least one sample");
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * n_samples as f64)).sqrt()
}

pub(crate) fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParams("threshold grid is empty".into()));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParams(
                "threshold grid must be strictly increasing".into(),
            ));
        }
    }
    if !t_grid.iter().all(|t| t.is_finite() && *t >= 0.0) {
        return Err(Error::InvalidParams(
            "thresholds must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Exact survival `P(|<u, G>| >= t)` for a standard Gaussian and unit `u`,
/// used as an oracle in tests.
pub fn gaussian_linear_form_survival(t: f64) -> f64 {
    2.0 * normal_sf(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_is_deterministic_and_thread_independent() {
        let s = Sampler::standard_gaussian(5).unwrap();
        let a = sample(&s, 3, 100);
        let b = sample(&s, 3, 100);
        assert_eq!(a, b);
        // a smaller pool must not change values
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| sample(&s, 3, 100));
        assert_eq!(a, c);
        let d = sample(&s, 4, 100);
        assert_ne!(a, d);
    }

    #[test]
    fn prefix_rows_do_not_depend_on_count() {
        let s = Sampler::standard_gaussian(3).unwrap();
        let a = sample(&s, 9, 10);
        let b = sample(&s, 9, 50);
        for i in 0..10 {
            assert_eq!(a.row(i), b.row(i), "row {i}");
        }
    }

    #[test]
    fn standard_gaussian_metadata() {
        let s = Sampler::standard_gaussian(4).unwrap();
        assert_eq!(s.constant(), 2f64.sqrt());
        assert_eq!(s.flavor(), ConcentrationFlavor::FullLipschitz);
        assert_eq!(s.mean(), &[0.0; 4]);
        let cov = s.covariance().known().unwrap();
        assert_eq!(cov, &Matrix::identity(4));
    }

    #[test]
    fn gaussian_with_cov_matches_target_covariance() {
        let cov = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = Sampler::gaussian_with_cov(cov.clone()).unwrap();
        let n = 200_000;
        let draws = sample(&s, 1, n);
        let mut emp = [[0.0f64; 2]; 2];
        for i in 0..n {
            let r = draws.row(i);
            for p in 0..2 {
                for q in 0..2 {
                    emp[p][q] += r[p] * r[q];
                }
            }
        }
        for p in 0..2 {
            for q in 0..2 {
                let e = emp[p][q] / n as f64;
                assert!(
                    (e - cov.get(p, q)).abs() < 0.03,
                    "cov[{p}][{q}] = {e}, want {}",
                    cov.get(p, q)
                );
            }
        }
        // K = sqrt(2 * opnorm(cov)); top eigenvalue of [[2,.5],[.5,1]] is
        // (3 + sqrt(2)) / 2
        let top = (3.0 + 2f64.sqrt()) / 2.0;
        assert!((s.constant() - (2.0 * top).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rademacher_rows_are_signs() {
        let s = Sampler::rademacher_product(8).unwrap();
        let draws = sample(&s, 0, 500);
        for i in 0..500 {
            for &v in draws.row(i) {
                assert!(v == 1.0 || v == -1.0);
            }
        }
        assert_eq!(s.flavor(), ConcentrationFlavor::ConvexOnly);
        assert_eq!(s.constant(), DEFAULT_PRODUCT_CONSTANT);
    }

    #[test]
    fn bounded_product_stays_in_box_and_has_uniform_variance() {
        let h = 2.5;
        let s = Sampler::bounded_product(3, h).unwrap();
        let n = 100_000;
        let draws = sample(&s, 7, n);
        let mut sumsq = 0.0;
        for i in 0..n {
            for &v in draws.row(i) {
                assert!(v.abs() <= h);
                sumsq += v * v;
            }
        }
        let var = sumsq / (3 * n) as f64;
        let want = h * h / 3.0;
        assert!((var - want).abs() < 0.02 * want, "var {var}, want {want}");
    }

    #[test]
    fn swor_rows_draw_distinct_population_values() {
        let pop: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s = Sampler::sampling_without_replacement(pop.clone(), 4).unwrap();
        let draws = sample(&s, 5, 1000);
        for i in 0..1000 {
            let mut seen = std::collections::HashSet::new();
            for &v in draws.row(i) {
                assert!(pop.contains(&v));
                assert!(seen.insert(v as i64), "row {i} repeats {v}");
            }
        }
        // analytic mean 4.5, variance 8.25, off-diagonal -8.25/9
        assert_eq!(s.mean(), &[4.5; 4]);
        let cov = s.covariance().known().unwrap();
        assert!((cov.get(0, 0) - 8.25).abs() < 1e-12);
        assert!((cov.get(0, 1) + 8.25 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn swor_empirical_moments_match_analytic() {
        let pop: Vec<f64> = vec![-2.0, -1.0, 0.0, 1.0, 2.0, 5.0];
        let s = Sampler::sampling_without_replacement(pop, 3).unwrap();
        let n = 200_000;
        let draws = sample(&s, 11, n);
        let mean = s.mean()[0];
        let cov = s.covariance().known().unwrap();
        let mut m0 = 0.0;
        let mut v00 = 0.0;
        let mut v01 = 0.0;
        for i in 0..n {
            let r = draws.row(i);
            m0 += r[0];
            v00 += (r[0] - mean) * (r[0] - mean);
            v01 += (r[0] - mean) * (r[1] - mean);
        }
        m0 /= n as f64;
        v00 /= n as f64;
        v01 /= n as f64;
        assert!((m0 - mean).abs() < 0.03, "mean {m0} want {mean}");
        assert!((v00 - cov.get(0, 0)).abs() < 0.1, "var {v00}");
        assert!((v01 - cov.get(0, 1)).abs() < 0.1, "cov {v01}");
    }

    #[test]
    fn affine_preserves_constant_and_transports_moments() {
        let base = Sampler::standard_gaussian(2).unwrap();
        // rotation by 30 degrees plus shift
        let (c, s) = (0.75f64.sqrt(), 0.5);
        let map = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let shift = vec![1.0, -2.0];
        let aff = Sampler::affine(base, map.clone(), shift.clone()).unwrap();
        assert_eq!(aff.constant(), 2f64.sqrt());
        assert_eq!(aff.flavor(), ConcentrationFlavor::FullLipschitz);
        assert_eq!(aff.mean(), &shift[..]);
        // covariance of a rotated standard Gaussian stays the identity
        let cov = aff.covariance().known().unwrap();
        assert!(cov.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-12);

        let draws = sample(&aff, 2, 50_000);
        let mut m = [0.0f64; 2];
        for i in 0..50_000 {
            m[0] += draws.row(i)[0];
            m[1] += draws.row(i)[1];
        }
        assert!((m[0] / 5e4 - 1.0).abs() < 0.03);
        assert!((m[1] / 5e4 + 2.0).abs() < 0.03);
    }

    #[test]
    fn affine_rejects_non_orthogonal_map() {
        let base = Sampler::standard_gaussian(2).unwrap();
        let map = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(Sampler::affine(base, map, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn with_constant_validates() {
        let s = Sampler::rademacher_product(2).unwrap();
        assert!(s.clone().with_constant(0.0).is_err());
        assert!(s.clone().with_constant(f64::INFINITY).is_err());
        assert_eq!(s.with_constant(1.5).unwrap().constant(), 1.5);
    }

    #[test]
    fn verify_concentration_accepts_honest_gaussian() {
        let s = Sampler::standard_gaussian(8).unwrap();
        let report = verify_concentration(&s, 12, 20_000, 0, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(
            report.is_clean(),
            "unexpected violations: {:?}",
            report.violations
        );
        assert_eq!(report.functions_checked, 12);
    }

    #[test]
    fn verify_concentration_flags_undersized_constant() {
        let s = Sampler::standard_gaussian(8)
            .unwrap()
            .with_constant(0.1)
            .unwrap();
        let report = verify_concentration(&s, 6, 5_000, 0, &[0.5, 1.0, 2.0]).unwrap();
        assert!(!report.is_clean());
    }

    #[test]
    fn verify_concentration_empty_at_extreme_threshold() {
        // both the bound and the empirical tail are zero far out; sampling
        // error alone must not create a violation
        let s = Sampler::rademacher_product(4).unwrap();
        let t = 1e6 * s.constant();
        let report = verify_concentration(&s, 6, 1_000, 0, &[t]).unwrap();
        assert!(report.is_clean());
    }

    #[test]
    fn verify_concentration_validates_inputs() {
        let s = Sampler::standard_gaussian(2).unwrap();
        assert!(matches!(
            verify_concentration(&s, 0, 1000, 0, &[1.0]),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            verify_concentration(&s, 3, 50, 0, &[1.0]),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(verify_concentration(&s, 3, 1000, 0, &[2.0, 1.0]).is_err());
        assert!(verify_concentration(&s, 3, 1000, 0, &[]).is_err());
    }

    #[test]
    fn dkw_halfwidth_matches_hand_value() {
        // sqrt(ln(200) / 40000)
        let eps = dkw_halfwidth(0.99, 20_000);
        assert!((eps - 0.011509037065006824).abs() < 1e-15, "got {eps}");
    }

    #[test]
    fn cov_check_passes_for_shipped_samplers() {
        for s in [
            Sampler::standard_gaussian(4).unwrap(),
            Sampler::rademacher_product(4).unwrap(),
            Sampler::bounded_product(4, 1.0).unwrap(),
        ] {
            let check = cov_opnorm_check(&s, 20_000, 0).unwrap();
            assert!(
                check.pass,
                "{}: estimate {} vs bound {}",
                s.kind_name(),
                check.estimate,
                check.bound
            );
        }
    }

    #[test]
    fn cov_check_fails_when_constant_is_too_small() {
        // identity covariance but declared K = 0.1 means ceiling 0.02
        let s = Sampler::standard_gaussian(4)
            .unwrap()
            .with_constant(0.1)
            .unwrap();
        let check = cov_opnorm_check(&s, 20_000, 0).unwrap();
        assert!(!check.pass);
    }

    #[test]
    fn gaussian_linear_survival_is_exact() {
        // 2 * (1 - Phi(1.959963984540054)) = 0.05
        assert!((gaussian_linear_form_survival(1.959963984540054) - 0.05).abs() < 1e-12);
    }
}
