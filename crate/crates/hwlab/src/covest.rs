//! Covariance estimation in finite-dimensional Banach geometries:
//! Karhunen-Loeve Gaussian sampling, empirical covariance operators,
//! operator-norm deviations over a dual ball, effective rank, the
//! Gordon-Chevet expectation bound, and the deviation experiment that
//! checks the exponential tail of `||Sigma_hat - Sigma||` around its
//! mean.
//!
//! The sampled vector is `G = sum_j x_j g_j` with i.i.d. standard
//! Gaussian coefficients, so its covariance is `Sigma = sum_j x_j x_j^T`
//! by construction. Geometries are limited to the two whose dual-ball
//! operator norm is computable exactly: Euclidean (spectral norm) and the
//! sup norm (maximum absolute entry, attained at the extreme points
//! `+-e_i` of the dual l1 ball).

use rayon::prelude::*;
use serde_json::json;

use crate::bounds::kl_deviation;
use crate::error::{Error, Result};
use crate::linalg::{eigh, Matrix};
use crate::montecarlo::{constant_grid, empirical_quantile};
use crate::report::{csv_line, fmt17};
use crate::rng::{streams, CounterRng};

/// Monte Carlo draws used for the mean-norm estimate inside
/// [`deviation_experiment`]; the minimum [`effective_rank`] accepts.
const RANK_MC: usize = 10_000;

/// Symmetry tolerance relative to the largest entry, matching the
/// eigensolver's own check.
const SYMMETRY_TOL: f64 = 1e-12;

/// Replications per quantile level below which the estimate is flagged
/// as under-resolved.
const QUANTILE_SUPPORT_MIN: f64 = 20.0;

/// A finite Karhunen-Loeve expansion: vectors `x_j` whose Gaussian
/// combination `G = sum_j x_j g_j` has covariance `sum_j x_j x_j^T`.
#[derive(Clone, Debug)]
pub struct KlBasis {
    vectors: Vec<Vec<f64>>,
    ambient_dim: usize,
}

impl KlBasis {
    /// At least one vector; all the same length; all entries finite.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidParams("basis needs at least one vector".into()));
        }
        let ambient_dim = vectors[0].len();
        if ambient_dim == 0 {
            return Err(Error::InvalidParams("basis vectors must be nonempty".into()));
        }
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch(format!(
                    "basis vector {j} has length {}, expected {ambient_dim}",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "basis vector {j} has a non-finite entry"
                )));
            }
        }
        Ok(KlBasis {
            vectors,
            ambient_dim,
        })
    }

    /// The standard basis of `R^d`; the induced covariance is the
    /// identity.
    pub fn standard(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        let vectors = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                v
            })
            .collect();
        KlBasis::new(vectors)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Every basis vector multiplied by `c`; the covariance scales by
    /// `c^2`.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParams(format!(
                "scale factor must be finite, got {c}"
            )));
        }
        KlBasis::new(
            self.vectors
                .iter()
                .map(|v| v.iter().map(|x| c * x).collect())
                .collect(),
        )
    }

    /// `Sigma = sum_j x_j x_j^T`, built exactly symmetric.
    pub fn covariance(&self) -> Matrix {
        let d = self.ambient_dim;
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for k in i..d {
                let mut acc = 0.0;
                for v in &self.vectors {
                    acc += v[i] * v[k];
                }
                out.set(i, k, acc);
                out.set(k, i, acc);
            }
        }
        out
    }
}

/// The two norms whose dual-ball operator norm is exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// `|v|_2`; dual ball is the Euclidean ball, operator norm is
    /// spectral.
    Euclidean,
    /// `max_i |v_i|`; dual ball is the l1 ball, operator norm is the
    /// largest absolute entry.
    Sup,
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Euclidean => "euclidean",
            Geometry::Sup => "sup",
        }
    }

    pub fn vector_norm(&self, v: &[f64]) -> f64 {
        match self {
            Geometry::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Geometry::Sup => v.iter().fold(0.0, |acc, x| acc.max(x.abs())),
        }
    }
}

/// Draws `n` rows `G_i = sum_j x_j g_ij` on the primary sample stream.
pub fn kl_sample(basis: &KlBasis, n: usize, seed: u64) -> Matrix {
    kl_sample_stream(basis, n, seed, streams::SAMPLES)
}

/// Like [`kl_sample`] on an explicit stream. Row `i` depends only on
/// `(seed, stream, i)`, so output is bit-identical for any thread count.
pub fn kl_sample_stream(basis: &KlBasis, n: usize, seed: u64, stream: u64) -> Matrix {
    assert!(n >= 1, "sample count must be positive");
    let d = basis.ambient_dim;
    let m = basis.vectors.len() as u64;
    let rng = CounterRng::new(seed, stream);
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        let base = i as u64 * m;
        for (j, v) in basis.vectors.iter().enumerate() {
            let g = rng.normal_at(base + j as u64);
            for (ri, xi) in row.iter_mut().zip(v) {
                *ri += xi * g;
            }
        }
    });
    Matrix::new(n, d, data).expect("finite rows")
}

/// `(1/n) sum_k G_k G_k^T`, built exactly symmetric.
pub fn empirical_cov(samples: &Matrix) -> Result<Matrix> {
    let n = samples.rows();
    if n == 0 {
        return Err(Error::InvalidParams("need at least one sample row".into()));
    }
    let d = samples.cols();
    let nf = n as f64;
    let mut out = Matrix::zeros(d, d);
    for i in 0..d {
        for k in i..d {
            let mut acc = 0.0;
            for r in 0..n {
                let row = samples.row(r);
                acc += row[i] * row[k];
            }
            let value = acc / nf;
            out.set(i, k, value);
            out.set(k, i, value);
        }
    }
    Ok(out)
}

fn check_symmetric(a: &Matrix, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let tol = SYMMETRY_TOL * a.max_abs().max(1.0);
    for i in 0..a.rows() {
        for j in (i + 1)..a.cols() {
            if (a.get(i, j) - a.get(j, i)).abs() > tol {
                return Err(Error::NotSymmetric(format!(
                    "{what} entry ({i},{j}) differs from ({j},{i})"
                )));
            }
        }
    }
    Ok(())
}

/// Operator norm of `sig_hat - sig` over the geometry's dual ball:
/// spectral norm (largest absolute eigenvalue) for Euclidean, largest
/// absolute entry for Sup. Exact in both cases because the suprema are
/// attained at known extreme points.
pub fn op_distance(sig_hat: &Matrix, sig: &Matrix, geom: Geometry) -> Result<f64> {
    if sig_hat.rows() != sig.rows() || sig_hat.cols() != sig.cols() {
        return Err(Error::DimensionMismatch(format!(
            "operands are {}x{} and {}x{}",
            sig_hat.rows(),
            sig_hat.cols(),
            sig.rows(),
            sig.cols()
        )));
    }
    check_symmetric(sig_hat, "first operand")?;
    check_symmetric(sig, "second operand")?;
    let diff = sig_hat.sub(sig)?;
    match geom {
        Geometry::Euclidean => {
            let split = eigh(&diff, 1e-12)?;
            let top = split.eigenvalues.first().copied().unwrap_or(0.0);
            let bottom = split.eigenvalues.last().copied().unwrap_or(0.0);
            Ok(top.abs().max(bottom.abs()))
        }
        Geometry::Sup => Ok(diff.max_abs()),
    }
}

/// Exact `||Sigma||` in the geometry: top eigenvalue for Euclidean (the
/// matrix is PSD); largest diagonal entry for Sup (PSD implies
/// `|Sigma_ij| <= sqrt(Sigma_ii Sigma_jj)`).
fn psd_operator_norm(sigma: &Matrix, geom: Geometry) -> Result<f64> {
    match geom {
        Geometry::Euclidean => {
            let split = eigh(sigma, 1e-12)?;
            Ok(split.eigenvalues.first().copied().unwrap_or(0.0).max(0.0))
        }
        Geometry::Sup => {
            let mut top = 0.0f64;
            for i in 0..sigma.rows() {
                top = top.max(sigma.get(i, i));
            }
            Ok(top)
        }
    }
}

/// Monte Carlo mean and standard error of `||G||` in the geometry.
fn norm_stats(basis: &KlBasis, geom: Geometry, n_mc: usize, seed: u64) -> (f64, f64) {
    let draws = kl_sample_stream(basis, n_mc, seed, streams::RANK);
    let norms: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|i| geom.vector_norm(draws.row(i)))
        .collect();
    let nf = n_mc as f64;
    let mean = norms.iter().sum::<f64>() / nf;
    let var = norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Effective rank `r(Sigma) = (E||G||)^2 / ||Sigma||` with the mean norm
/// estimated by Monte Carlo and the operator norm computed exactly.
#[derive(Clone, Copy, Debug)]
pub struct EffectiveRank {
    pub effective_rank: f64,
    /// Monte Carlo estimate of `E||G||`.
    pub mean_norm: f64,
    /// Exact `||Sigma||` in the geometry.
    pub sigma_norm: f64,
    /// Standard error of `mean_norm`.
    pub std_error: f64,
}

/// Estimates the effective rank; dimension-free bounds are phrased in
/// terms of it. Scaling the basis leaves the result unchanged.
pub fn effective_rank(
    basis: &KlBasis,
    geom: Geometry,
    n_mc: usize,
    seed: u64,
) -> Result<EffectiveRank> {
    if n_mc < RANK_MC {
        return Err(Error::InvalidParams(format!(
            "need at least {RANK_MC} draws for the mean norm, got {n_mc}"
        )));
    }
    let sigma = basis.covariance();
    let sigma_norm = psd_operator_norm(&sigma, geom)?;
    if sigma_norm == 0.0 {
        return Err(Error::DegenerateCovariance);
    }
    let (mean_norm, std_error) = norm_stats(basis, geom, n_mc, seed);
    Ok(EffectiveRank {
        effective_rank: mean_norm * mean_norm / sigma_norm,
        mean_norm,
        sigma_norm,
        std_error,
    })
}

/// The specialized Gordon-Chevet right-hand side
/// `||Sigma||^(1/2) sqrt(n) + E||G||`, an upper bound for the expected
/// operator norm of the `n x d` Gaussian sample matrix from the dual
/// ball to `l2^n`. Euclidean geometry throughout, matching the
/// `l2`-factor in that computation. `E||G||` is estimated by Monte Carlo
/// with `n_mc` draws on the dedicated stream.
pub fn gordon_chevet_rhs(basis: &KlBasis, n: usize, n_mc: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    if n_mc < RANK_MC {
        return Err(Error::InvalidParams(format!(
            "need at least {RANK_MC} draws for the mean norm, got {n_mc}"
        )));
    }
    let sigma = basis.covariance();
    let sigma_norm = psd_operator_norm(&sigma, Geometry::Euclidean)?;
    if sigma_norm == 0.0 {
        // G is almost surely zero, so both terms vanish.
        return Ok(0.0);
    }
    let (mean_norm, _) = norm_stats(basis, Geometry::Euclidean, n_mc, seed);
    Ok(sigma_norm.sqrt() * (n as f64).sqrt() + mean_norm)
}

/// Configuration of the covariance deviation experiment.
#[derive(Clone, Debug)]
pub struct CovExperiment {
    pub basis: KlBasis,
    pub geometry: Geometry,
    /// Samples per replication.
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    /// Tail parameters, each at least 1.
    pub t_values: Vec<f64>,
    /// Fixed constant for the threshold; fitted from the grid when
    /// absent.
    pub constant: Option<f64>,
}

/// One tail level of the deviation experiment.
#[derive(Clone, Copy, Debug)]
pub struct DeviationRow {
    pub t: f64,
    /// Empirical `(1 - e^-t)`-quantile of `|D_r - mean|`.
    pub empirical_quantile: f64,
    /// Deviation threshold at this `t` and the resolved constant.
    pub threshold: f64,
    pub constant_c: f64,
    pub pass: bool,
    /// False when fewer than 20 replications resolve the quantile level
    /// (`R e^-t < 20`).
    pub resolved: bool,
}

/// Output of [`deviation_experiment`].
#[derive(Clone, Debug)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
    /// `D_r = ||Sigma_hat_r - Sigma||` ordered by replication index.
    pub distances: Vec<f64>,
    pub mean_distance: f64,
    /// Standard error of the replication mean, folded into the pass
    /// allowance.
    pub std_error: f64,
    pub sigma_norm: f64,
    pub effective_rank: f64,
    pub geometry: Geometry,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    /// Whether the constant was fitted (true) or supplied (false).
    pub fitted: bool,
    /// All rows pass at the resolved constant.
    pub feasible: bool,
}

impl DeviationReport {
    /// CSV with header `t,empirical_quantile,threshold,constant_c,pass`;
    /// floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = csv_line(&[
            "t".into(),
            "empirical_quantile".into(),
            "threshold".into(),
            "constant_c".into(),
            "pass".into(),
        ]);
        for row in &self.rows {
            out.push_str(&csv_line(&[
                fmt17(row.t),
                fmt17(row.empirical_quantile),
                fmt17(row.threshold),
                fmt17(row.constant_c),
                row.pass.to_string(),
            ]));
        }
        out
    }

    /// Metadata sidecar with the experiment summary; floats assembled
    /// here are 17-significant-digit strings.
    pub fn metadata_json(&self, build_info: &str) -> serde_json::Value {
        json!({
            "geometry": self.geometry.name(),
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "sigma_norm": fmt17(self.sigma_norm),
            "effective_rank": fmt17(self.effective_rank),
            "mean_distance": fmt17(self.mean_distance),
            "std_error": fmt17(self.std_error),
            "fitted": self.fitted,
            "feasible": self.feasible,
            "distances": self.distances.iter().map(|d| fmt17(*d)).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| json!({
                "t": fmt17(r.t),
                "empirical_quantile": fmt17(r.empirical_quantile),
                "threshold": fmt17(r.threshold),
                "constant_c": fmt17(r.constant_c),
                "pass": r.pass,
                "resolved": r.resolved,
            })).collect::<Vec<_>>(),
            "build": build_info,
        })
    }

    /// Pretty-printed metadata with a trailing newline.
    pub fn metadata_string(&self, build_info: &str) -> String {
        let mut s = serde_json::to_string_pretty(&self.metadata_json(build_info))
            .expect("metadata serializes");
        s.push('\n');
        s
    }
}

fn validate_experiment(cfg: &CovExperiment) -> Result<()> {
    if cfg.n < 2 {
        return Err(Error::InvalidParams(format!(
            "need at least 2 samples per replication, got {}",
            cfg.n
        )));
    }
    if cfg.replications < 50 {
        return Err(Error::InvalidParams(format!(
            "need at least 50 replications for quantile estimation, got {}",
            cfg.replications
        )));
    }
    if cfg.t_values.is_empty() {
        return Err(Error::InvalidParams("tail parameter list is empty".into()));
    }
    for &t in &cfg.t_values {
        if !(t.is_finite() && t >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "tail parameters must be finite and at least 1, got {t}"
            )));
        }
    }
    if let Some(c) = cfg.constant {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParams(format!(
                "constant must be finite and positive, got {c}"
            )));
        }
    }
    Ok(())
}

/// Runs the deviation experiment: `R` independent replications of an
/// `n`-sample empirical covariance, distances `D_r` to the true operator
/// in the chosen geometry, and for each `t` a comparison of the
/// empirical `(1 - e^-t)`-quantile of `|D_r - mean|` against the
/// deviation threshold at the user's constant or the smallest feasible
/// grid constant.
///
/// The mean substitutes for the unavailable exact expectation, so three
/// standard errors of it are added to the pass allowance. Replication
/// `r` draws from its own stream; the report ordering is by replication
/// index, independent of scheduling.
pub fn deviation_experiment(cfg: &CovExperiment) -> Result<DeviationReport> {
    validate_experiment(cfg)?;
    let sigma = cfg.basis.covariance();
    let sigma_norm = psd_operator_norm(&sigma, cfg.geometry)?;
    let rank = if sigma_norm == 0.0 {
        0.0
    } else {
        effective_rank(&cfg.basis, cfg.geometry, RANK_MC, cfg.seed)?.effective_rank
    };

    let distances: Vec<f64> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let samples = kl_sample_stream(
                &cfg.basis,
                cfg.n,
                cfg.seed,
                streams::COVEST_REPS + rep as u64,
            );
            let cov = empirical_cov(&samples)?;
            op_distance(&cov, &sigma, cfg.geometry)
        })
        .collect::<Result<Vec<f64>>>()?;

    let rf = cfg.replications as f64;
    let mean_distance = distances.iter().sum::<f64>() / rf;
    let var = distances
        .iter()
        .map(|d| (d - mean_distance) * (d - mean_distance))
        .sum::<f64>()
        / (rf - 1.0);
    let std_error = (var / rf).sqrt();

    let mut deviations: Vec<f64> = distances.iter().map(|d| (d - mean_distance).abs()).collect();
    deviations.sort_unstable_by(f64::total_cmp);

    let quantiles: Vec<f64> = cfg
        .t_values
        .iter()
        .map(|&t| empirical_quantile(&deviations, 1.0 - (-t).exp()))
        .collect();
    let allowance = 3.0 * std_error;

    let rows_at = |c: f64| -> Result<Vec<DeviationRow>> {
        cfg.t_values
            .iter()
            .zip(&quantiles)
            .map(|(&t, &q)| {
                let threshold = kl_deviation(t, sigma_norm, rank, cfg.n, c)?;
                Ok(DeviationRow {
                    t,
                    empirical_quantile: q,
                    threshold,
                    constant_c: c,
                    pass: q <= threshold + allowance,
                    resolved: rf * (-t).exp() >= QUANTILE_SUPPORT_MIN,
                })
            })
            .collect()
    };

    let (rows, fitted) = match cfg.constant {
        Some(c) => (rows_at(c)?, false),
        None => {
            let grid = constant_grid();
            let mut chosen = None;
            for &c in &grid {
                let rows = rows_at(c)?;
                if rows.iter().all(|r| r.pass) {
                    chosen = Some(rows);
                    break;
                }
            }
            let rows = match chosen {
                Some(rows) => rows,
                None => rows_at(*grid.last().expect("grid is nonempty"))?,
            };
            (rows, true)
        }
    };
    let feasible = rows.iter().all(|r| r.pass);

    Ok(DeviationReport {
        rows,
        distances,
        mean_distance,
        std_error,
        sigma_norm,
        effective_rank: rank,
        geometry: cfg.geometry,
        n: cfg.n,
        replications: cfg.replications,
        seed: cfg.seed,
        fitted,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hs_norm;

    #[test]
    fn standard_basis_rows_behave_like_standard_gaussians() {
        let basis = KlBasis::standard(4).unwrap();
        let samples = kl_sample(&basis, 100_000, 3);
        let cov = empirical_cov(&samples).unwrap();
        // Entry standard errors: sqrt(2/n) on the diagonal, sqrt(1/n) off.
        let n = 100_000f64;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                let se = if i == j { (2.0 / n).sqrt() } else { (1.0 / n).sqrt() };
                let got = cov.get(i, j);
                assert!(
                    (got - want).abs() <= 3.0 * se,
                    "cov[{i}][{j}] = {got}, want {want} +- {}",
                    3.0 * se
                );
            }
        }
    }

    #[test]
    fn single_vector_basis_concentrates_on_its_span() {
        let basis = KlBasis::new(vec![vec![3.0, 0.0]]).unwrap();
        let samples = kl_sample(&basis, 10_000, 1);
        let mut var0 = 0.0;
        for i in 0..samples.rows() {
            assert_eq!(samples.get(i, 1), 0.0);
            var0 += samples.get(i, 0) * samples.get(i, 0);
        }
        var0 /= samples.rows() as f64;
        assert!((var0 - 9.0).abs() < 0.5);
    }

    #[test]
    fn general_basis_covariance_converges_to_the_dressed_sum() {
        let basis = KlBasis::new(vec![
            vec![1.0, 0.5, 0.0],
            vec![0.0, 1.0, -0.5],
            vec![0.2, 0.0, 0.3],
        ])
        .unwrap();
        let sigma = basis.covariance();
        let samples = kl_sample(&basis, 100_000, 9);
        let cov = empirical_cov(&samples).unwrap();
        let n = 100_000f64;
        for i in 0..3 {
            for j in 0..3 {
                // Gaussian fourth-moment variance of a covariance entry.
                let se = ((sigma.get(i, i) * sigma.get(j, j) + sigma.get(i, j).powi(2)) / n)
                    .sqrt();
                assert!(
                    (cov.get(i, j) - sigma.get(i, j)).abs() <= 3.0 * se,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn kl_sampling_is_deterministic_and_stream_separated() {
        let basis = KlBasis::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let a = kl_sample_stream(&basis, 50, 5, streams::COVEST_REPS);
        let b = kl_sample_stream(&basis, 50, 5, streams::COVEST_REPS);
        assert_eq!(a.as_slice(), b.as_slice());
        let c = kl_sample_stream(&basis, 50, 5, streams::COVEST_REPS + 1);
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn basis_construction_validates() {
        assert!(KlBasis::new(vec![]).is_err());
        assert!(KlBasis::new(vec![vec![]]).is_err());
        assert!(KlBasis::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(KlBasis::new(vec![vec![f64::NAN]]).is_err());
        assert!(KlBasis::standard(0).is_err());
        let b = KlBasis::standard(3).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.ambient_dim(), 3);
    }

    #[test]
    fn empirical_cov_small_identities() {
        let g = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let cov = empirical_cov(&g).unwrap();
        assert_eq!(cov.get(0, 0), 1.0);
        assert_eq!(cov.get(0, 1), 2.0);
        assert_eq!(cov.get(1, 0), 2.0);
        assert_eq!(cov.get(1, 1), 4.0);

        let n = 3;
        let scaled = Matrix::identity(n).scale((n as f64).sqrt());
        let cov = empirical_cov(&scaled).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cov.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empirical_cov_is_symmetric_psd() {
        let basis = KlBasis::new(vec![vec![1.0, -1.0, 0.5], vec![0.3, 0.3, 0.3]]).unwrap();
        let samples = kl_sample(&basis, 200, 11);
        let cov = empirical_cov(&samples).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cov.get(i, j), cov.get(j, i), "exact symmetry");
            }
        }
        let split = eigh(&cov, 1e-12).unwrap();
        let scale = split.eigenvalues[0].abs().max(1.0);
        for &l in &split.eigenvalues {
            assert!(l >= -1e-10 * scale, "eigenvalue {l} below the PSD floor");
        }
    }

    #[test]
    fn op_distance_hand_cases() {
        let zero = Matrix::zeros(2, 2);
        assert_eq!(op_distance(&zero, &zero, Geometry::Euclidean).unwrap(), 0.0);
        assert_eq!(op_distance(&zero, &zero, Geometry::Sup).unwrap(), 0.0);

        let diag = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -5.0]]).unwrap();
        assert!((op_distance(&diag, &zero, Geometry::Euclidean).unwrap() - 5.0).abs() < 1e-12);

        let m = Matrix::from_rows(&[vec![1.0, -7.0], vec![-7.0, 2.0]]).unwrap();
        assert_eq!(op_distance(&m, &zero, Geometry::Sup).unwrap(), 7.0);

        let rect = Matrix::zeros(2, 3);
        assert!(op_distance(&rect, &rect, Geometry::Sup).is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(matches!(
            op_distance(&asym, &zero, Geometry::Euclidean),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn euclidean_distance_is_dominated_by_the_hilbert_schmidt_norm() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, -1.0, 0.5], vec![0.0, 0.5, 3.0]])
            .unwrap();
        let b = Matrix::identity(3);
        let diff = a.sub(&b).unwrap();
        let spectral = op_distance(&a, &b, Geometry::Euclidean).unwrap();
        assert!(spectral <= hs_norm(&diff) + 1e-12);
        assert!(spectral > 0.0);
    }

    #[test]
    fn sup_distance_matches_brute_force_over_the_dual_ball() {
        // sup_{u,v in l1 ball} u^T D v sampled on a fine boundary grid
        // must approach the extreme-point value max_ij |D_ij|.
        let d = Matrix::from_rows(&[
            vec![1.0, -4.0, 2.0],
            vec![-4.0, 0.5, -1.0],
            vec![2.0, -1.0, 3.0],
        ])
        .unwrap();
        let zero = Matrix::zeros(3, 3);
        let exact = op_distance(&d, &zero, Geometry::Sup).unwrap();
        assert_eq!(exact, 4.0);

        // Boundary of the l1 ball in R^3: |a| + |b| + |c| = 1.
        let steps = 60;
        let mut brute = 0.0f64;
        let mut pts = Vec::new();
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let a = i as f64 / steps as f64;
                let b = j as f64 / steps as f64;
                let c = 1.0 - a - b;
                for sa in [-1.0, 1.0] {
                    for sb in [-1.0, 1.0] {
                        for sc in [-1.0, 1.0] {
                            pts.push([sa * a, sb * b, sc * c]);
                        }
                    }
                }
            }
        }
        for u in &pts {
            for v in &pts {
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        acc += u[i] * d.get(i, j) * v[j];
                    }
                }
                brute = brute.max(acc.abs());
            }
        }
        assert!((brute - exact).abs() <= 1e-6, "brute {brute} vs exact {exact}");
    }

    #[test]
    fn effective_rank_of_standard_basis_is_near_dimension() {
        let d = 6;
        let basis = KlBasis::standard(d).unwrap();
        let er = effective_rank(&basis, Geometry::Euclidean, 20_000, 2).unwrap();
        assert_eq!(er.sigma_norm, 1.0);
        // Chi-distribution mean bounds: sqrt(d-1) <= E|G| <= sqrt(d).
        let slack = 3.0 * 2.0 * er.mean_norm * er.std_error;
        assert!(er.effective_rank >= (d - 1) as f64 - slack);
        assert!(er.effective_rank <= d as f64 + slack);
    }

    #[test]
    fn effective_rank_single_direction_is_two_over_pi() {
        let basis = KlBasis::new(vec![vec![1.0]]).unwrap();
        for geom in [Geometry::Euclidean, Geometry::Sup] {
            let er = effective_rank(&basis, geom, 100_000, 7).unwrap();
            let want = 2.0 / std::f64::consts::PI;
            let slack = 3.0 * 2.0 * er.mean_norm * er.std_error;
            assert!(
                (er.effective_rank - want).abs() <= slack,
                "{}: {} vs {want}",
                geom.name(),
                er.effective_rank
            );
        }
    }

    #[test]
    fn effective_rank_is_scale_invariant_bitwise() {
        let basis = KlBasis::new(vec![vec![1.0, 0.25, 0.0], vec![0.0, 0.5, -1.5]]).unwrap();
        let scaled = basis.scale(2.0).unwrap();
        for geom in [Geometry::Euclidean, Geometry::Sup] {
            let a = effective_rank(&basis, geom, RANK_MC, 5).unwrap();
            let b = effective_rank(&scaled, geom, RANK_MC, 5).unwrap();
            assert_eq!(a.effective_rank, b.effective_rank, "{}", geom.name());
            assert_eq!(4.0 * a.sigma_norm, b.sigma_norm);
            assert_eq!(2.0 * a.mean_norm, b.mean_norm);
        }
    }

    #[test]
    fn effective_rank_respects_the_trace_bound() {
        // Jensen: (E|G|)^2 <= E|G|^2 = tr Sigma in Euclidean geometry.
        let basis = KlBasis::new(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 0.1],
        ])
        .unwrap();
        let sigma = basis.covariance();
        let trace: f64 = (0..4).map(|i| sigma.get(i, i)).sum();
        let er = effective_rank(&basis, Geometry::Euclidean, 50_000, 3).unwrap();
        let allowance = 3.0 * 2.0 * er.mean_norm * er.std_error / er.sigma_norm;
        assert!(er.effective_rank <= trace / er.sigma_norm + allowance);
    }

    #[test]
    fn effective_rank_rejects_degenerate_and_undersized_input() {
        let basis = KlBasis::new(vec![vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            effective_rank(&basis, Geometry::Euclidean, RANK_MC, 0),
            Err(Error::DegenerateCovariance)
        ));
        let ok = KlBasis::standard(2).unwrap();
        assert!(effective_rank(&ok, Geometry::Euclidean, 9_999, 0).is_err());
    }

    #[test]
    fn gordon_chevet_bound_brackets_for_the_standard_basis() {
        let d = 5;
        let n = 9;
        let basis = KlBasis::standard(d).unwrap();
        let rhs = gordon_chevet_rhs(&basis, n, 50_000, 1).unwrap();
        let lo = (n as f64).sqrt() + ((d - 1) as f64).sqrt();
        let hi = (n as f64).sqrt() + (d as f64).sqrt();
        assert!(rhs >= lo - 0.05 && rhs <= hi + 0.05, "rhs {rhs} not in [{lo}, {hi}]");

        let at_one = gordon_chevet_rhs(&basis, 1, 50_000, 1).unwrap();
        assert!((at_one - (1.0 + (rhs - (n as f64).sqrt()))).abs() < 1e-12);

        let zero = KlBasis::new(vec![vec![0.0, 0.0]]).unwrap();
        assert_eq!(gordon_chevet_rhs(&zero, 4, RANK_MC, 0).unwrap(), 0.0);
        assert!(gordon_chevet_rhs(&basis, 0, RANK_MC, 0).is_err());
    }

    #[test]
    fn expected_operator_norm_stays_below_the_gordon_chevet_rhs() {
        let d = 4;
        let n = 6;
        let basis = KlBasis::standard(d).unwrap();
        let rhs = gordon_chevet_rhs(&basis, n, 50_000, 2).unwrap();
        let reps = 100;
        let norms: Vec<f64> = (0..reps)
            .map(|rep| {
                let g = kl_sample_stream(&basis, n, 2, streams::COVEST_REPS + rep);
                crate::linalg::op_norm(&g, 1e-10).unwrap()
            })
            .collect();
        let mean = norms.iter().sum::<f64>() / reps as f64;
        let var = norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!(
            mean <= rhs + 3.0 * se,
            "E||Gamma|| estimate {mean} exceeds RHS {rhs} + 3 SE"
        );
    }

    fn small_experiment(basis: KlBasis, geometry: Geometry, seed: u64) -> CovExperiment {
        CovExperiment {
            basis,
            geometry,
            n: 30,
            replications: 50,
            seed,
            t_values: vec![1.0, 2.0],
            constant: None,
        }
    }

    #[test]
    fn zero_covariance_experiment_passes_trivially() {
        let basis = KlBasis::new(vec![vec![0.0, 0.0]]).unwrap();
        let report = deviation_experiment(&small_experiment(basis, Geometry::Euclidean, 0)).unwrap();
        assert!(report.distances.iter().all(|&d| d == 0.0));
        assert!(report.feasible);
        assert_eq!(report.sigma_norm, 0.0);
        for row in &report.rows {
            assert_eq!(row.empirical_quantile, 0.0);
            assert_eq!(row.threshold, 0.0);
            assert!(row.pass);
        }
    }

    #[test]
    fn identity_basis_experiment_fits_a_feasible_constant() {
        let basis = KlBasis::standard(6).unwrap();
        let cfg = CovExperiment {
            basis,
            geometry: Geometry::Euclidean,
            n: 50,
            replications: 60,
            seed: 4,
            t_values: vec![1.0, 2.0, 3.0],
            constant: None,
        };
        let report = deviation_experiment(&cfg).unwrap();
        assert!(report.fitted);
        assert!(report.feasible, "rows: {:?}", report.rows);
        // Quantiles of |D - mean| grow with the level.
        assert!(report.rows[0].empirical_quantile <= report.rows[2].empirical_quantile);
        assert!(report.rows[0].resolved);
        assert!(!report.rows[2].resolved, "60 reps cannot resolve e^-3");
        assert_eq!(report.distances.len(), 60);
        assert!(report.mean_distance > 0.0);
    }

    #[test]
    fn supplied_constant_is_used_verbatim() {
        let basis = KlBasis::standard(3).unwrap();
        let mut cfg = small_experiment(basis, Geometry::Sup, 8);
        cfg.constant = Some(64.0);
        let report = deviation_experiment(&cfg).unwrap();
        assert!(!report.fitted);
        for row in &report.rows {
            assert_eq!(row.constant_c, 64.0);
        }
    }

    #[test]
    fn experiment_validates_config() {
        let basis = KlBasis::standard(2).unwrap();
        let mut cfg = small_experiment(basis.clone(), Geometry::Euclidean, 0);
        cfg.n = 1;
        assert!(deviation_experiment(&cfg).is_err());
        let mut cfg = small_experiment(basis.clone(), Geometry::Euclidean, 0);
        cfg.replications = 49;
        assert!(deviation_experiment(&cfg).is_err());
        let mut cfg = small_experiment(basis.clone(), Geometry::Euclidean, 0);
        cfg.t_values = vec![0.5];
        assert!(deviation_experiment(&cfg).is_err());
        let mut cfg = small_experiment(basis, Geometry::Euclidean, 0);
        cfg.constant = Some(0.0);
        assert!(deviation_experiment(&cfg).is_err());
    }

    #[test]
    fn scaling_the_basis_scales_distances_and_thresholds_exactly() {
        let basis = KlBasis::new(vec![vec![1.0, 0.5, 0.0], vec![0.0, 0.75, -0.25]]).unwrap();
        let scaled = basis.scale(2.0).unwrap();
        for geometry in [Geometry::Euclidean, Geometry::Sup] {
            let r1 = deviation_experiment(&small_experiment(basis.clone(), geometry, 3)).unwrap();
            let r2 = deviation_experiment(&small_experiment(scaled.clone(), geometry, 3)).unwrap();
            for (a, b) in r1.distances.iter().zip(&r2.distances) {
                assert_eq!(4.0 * a, *b, "{}", geometry.name());
            }
            assert_eq!(4.0 * r1.mean_distance, r2.mean_distance);
            for (ra, rb) in r1.rows.iter().zip(&r2.rows) {
                assert_eq!(4.0 * ra.empirical_quantile, rb.empirical_quantile);
                assert_eq!(ra.pass, rb.pass, "pass mask must match under scaling");
                if ra.constant_c == rb.constant_c {
                    assert_eq!(4.0 * ra.threshold, rb.threshold);
                }
            }
        }
    }

    #[test]
    fn report_serialization_is_deterministic() {
        let basis = KlBasis::standard(3).unwrap();
        let cfg = small_experiment(basis, Geometry::Euclidean, 11);
        let a = deviation_experiment(&cfg).unwrap();
        let b = deviation_experiment(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.metadata_string("x"), b.metadata_string("x"));
        let csv = a.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,empirical_quantile,threshold,constant_c,pass");
        assert_eq!(lines.len(), 1 + cfg.t_values.len());

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| deviation_experiment(&cfg).unwrap());
        assert_eq!(a.to_csv(), c.to_csv());
    }
}
