//! Quadratic forms `x^T A x`, centered quadratic-form statistics, suprema
//! over finite matrix families, and the family norm
//! `E sup_A |(A + A^T) X|`.
//!
//! Families are finite by design: the uniform deviation results reduce to
//! finite sets of matrices, and everything here follows that reduction.

use std::path::Path;

use rayon::prelude::*;

use crate::distributions::{sample_stream, CovarianceInfo, Sampler};
use crate::error::{Error, Result};
use crate::linalg::{dot, euclidean_norm, op_norm, Matrix};
use crate::rng::streams;

/// A finite family of square matrices with their quadratic-form centers
/// `a_k = E X^T A_k X` for some sampler.
#[derive(Clone, Debug)]
pub struct MatrixFamily {
    members: Vec<Matrix>,
    centers: Vec<f64>,
    /// `A_k + A_k^T`, cached for gradients and the family norm.
    doubled: Vec<Matrix>,
    dim: usize,
}

impl MatrixFamily {
    /// Builds a family from members and explicit centers.
    pub fn new(members: Vec<Matrix>, centers: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParams(
                "matrix family needs at least one member".into(),
            ));
        }
        let dim = members[0].rows();
        for (k, m) in members.iter().enumerate() {
            if !m.is_square() {
                return Err(Error::DimensionMismatch(format!(
                    "family member {k} is {}x{}, expected square",
                    m.rows(),
                    m.cols()
                )));
            }
            if m.rows() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "family member {k} is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        if centers.len() != members.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} centers for {} members",
                centers.len(),
                members.len()
            )));
        }
        if let Some(bad) = centers.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "centers must be finite, found {bad}"
            )));
        }
        let doubled = members
            .iter()
            .map(|m| m.add(&m.transpose()).expect("square member"))
            .collect();
        Ok(MatrixFamily {
            members,
            centers,
            doubled,
            dim,
        })
    }

    /// Builds a family with centers computed for `s`: the analytic trace
    /// formula when the covariance is known, else `InvalidConfig` (use
    /// [`MatrixFamily::with_calibrated_centers`] for that case).
    pub fn with_analytic_centers(members: Vec<Matrix>, s: &Sampler) -> Result<Self> {
        let centers = members
            .iter()
            .map(|m| analytic_center(m, s))
            .collect::<Result<Vec<f64>>>()?;
        let fam = MatrixFamily::new(members, centers)?;
        fam.check_dim_against(s)?;
        Ok(fam)
    }

    /// Builds a family with centers estimated from an independent
    /// calibration run on a disjoint RNG stream.
    pub fn with_calibrated_centers(
        members: Vec<Matrix>,
        s: &Sampler,
        n_calibration: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_calibration < 100 {
            return Err(Error::InsufficientSamples {
                need: 100,
                got: n_calibration,
            });
        }
        if members.is_empty() {
            return Err(Error::InvalidParams(
                "matrix family needs at least one member".into(),
            ));
        }
        if members[0].rows() != s.dim() {
            return Err(Error::DimensionMismatch(format!(
                "family dimension {} does not match sampler dimension {}",
                members[0].rows(),
                s.dim()
            )));
        }
        let draws = sample_stream(s, seed, streams::CALIBRATION, n_calibration);
        let centers = members
            .iter()
            .map(|m| {
                let mut sum = 0.0;
                for i in 0..n_calibration {
                    sum += qform_unchecked(m, draws.row(i));
                }
                sum / n_calibration as f64
            })
            .collect();
        MatrixFamily::new(members, centers)
    }

    fn check_dim_against(&self, s: &Sampler) -> Result<()> {
        if self.dim != s.dim() {
            return Err(Error::DimensionMismatch(format!(
                "family dimension {} does not match sampler dimension {}",
                self.dim,
                s.dim()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn members(&self) -> &[Matrix] {
        &self.members
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn doubled(&self) -> &[Matrix] {
        &self.doubled
    }

    /// Largest member operator norm.
    pub fn sup_opnorm(&self, tol: f64) -> Result<f64> {
        let mut sup = 0.0f64;
        for m in &self.members {
            sup = sup.max(op_norm(m, tol)?);
        }
        Ok(sup)
    }
}

/// `E X^T A X = tr(A Cov) + mean^T A mean` for a sampler with known
/// covariance.
pub fn analytic_center(a: &Matrix, s: &Sampler) -> Result<f64> {
    if !a.is_square() || a.rows() != s.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, sampler dimension is {}",
            a.rows(),
            a.cols(),
            s.dim()
        )));
    }
    let cov = match s.covariance() {
        CovarianceInfo::Known(c) => c,
        CovarianceInfo::Unknown => {
            return Err(Error::InvalidConfig(
                "sampler covariance is unknown; calibrate the center from samples instead"
                    .into(),
            ))
        }
    };
    let n = s.dim();
    let mut trace = 0.0;
    for i in 0..n {
        trace += dot(a.row(i), cov.row(i));
    }
    // tr(A C) = sum_ij a_ij c_ji = sum_i <a_i, c_i> since C is symmetric
    let m = s.mean();
    Ok(trace + qform_unchecked(a, m))
}

#[inline]
fn qform_unchecked(a: &Matrix, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        total += x[i] * dot(a.row(i), x);
    }
    total
}

/// The quadratic form `x^T A x`.
pub fn qform(a: &Matrix, x: &[f64]) -> Result<f64> {
    if !a.is_square() || a.rows() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, vector has length {}",
            a.rows(),
            a.cols(),
            x.len()
        )));
    }
    Ok(qform_unchecked(a, x))
}

/// Draws `n_samples` values of `Z = X^T A X - E X^T A X`.
///
/// The center is the analytic trace formula when the sampler's covariance
/// is known; otherwise it is estimated from an independent calibration run
/// of equal size on a disjoint RNG stream.
pub fn centered_qform_samples(
    a: &Matrix,
    s: &Sampler,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !a.is_square() || a.rows() != s.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, sampler dimension is {}",
            a.rows(),
            a.cols(),
            s.dim()
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    let center = match s.covariance() {
        CovarianceInfo::Known(_) => analytic_center(a, s)?,
        CovarianceInfo::Unknown => {
            let cal = sample_stream(s, seed, streams::CALIBRATION, n_samples);
            let mut sum = 0.0;
            for i in 0..n_samples {
                sum += qform_unchecked(a, cal.row(i));
            }
            sum / n_samples as f64
        }
    };
    let draws = sample_stream(s, seed, streams::SAMPLES, n_samples);
    Ok((0..n_samples)
        .into_par_iter()
        .map(|i| qform_unchecked(a, draws.row(i)) - center)
        .collect())
}

/// `max_k (x^T A_k x - a_k)`.
pub fn sup_qform(fam: &MatrixFamily, x: &[f64]) -> Result<f64> {
    if x.len() != fam.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, family dimension is {}",
            x.len(),
            fam.dim()
        )));
    }
    Ok(fam
        .members
        .iter()
        .zip(&fam.centers)
        .map(|(m, c)| qform_unchecked(m, x) - c)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Gradient `(A_k* + A_k*^T) x` of the active (maximizing) member at `x`,
/// ties broken by lowest index.
pub fn active_gradient(fam: &MatrixFamily, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != fam.dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {}, family dimension is {}",
            x.len(),
            fam.dim()
        )));
    }
    let mut best_k = 0;
    let mut best = f64::NEG_INFINITY;
    for (k, (m, c)) in fam.members.iter().zip(&fam.centers).enumerate() {
        let v = qform_unchecked(m, x) - c;
        if v > best {
            best = v;
            best_k = k;
        }
    }
    Ok(fam.doubled[best_k].matvec(x))
}

/// Monte Carlo estimate of the family norm `E sup_A |(A + A^T) X|`,
/// returned with its standard error.
pub fn family_norm(
    fam: &MatrixFamily,
    s: &Sampler,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    fam.check_dim_against(s)?;
    if n_samples < 100 {
        return Err(Error::InsufficientSamples {
            need: 100,
            got: n_samples,
        });
    }
    let draws = sample_stream(s, seed, streams::FAMILY_NORM, n_samples);
    let sups: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let x = draws.row(i);
            fam.doubled
                .iter()
                .map(|d| euclidean_norm(&d.matvec(x)))
                .fold(0.0f64, f64::max)
        })
        .collect();
    let mean = sups.iter().sum::<f64>() / n_samples as f64;
    let var = sups.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_samples as f64;
    let std_error = (var / n_samples as f64).sqrt();
    Ok((mean, std_error))
}

/// Loads family members from a directory: the manifest names one matrix
/// text file per line, optionally followed by an explicit center value.
///
/// Lines are `filename` or `filename center`; blank lines and lines starting
/// with `#` are skipped. Returns the matrices and the per-member optional
/// centers in manifest order.
pub fn load_family_dir(dir: &Path, manifest: &str) -> Result<(Vec<Matrix>, Vec<Option<f64>>)> {
    let manifest_path = dir.join(manifest);
    let text = std::fs::read_to_string(&manifest_path)?;
    let mut members = Vec::new();
    let mut centers = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let name = parts.next().expect("nonempty line");
        let center = match parts.next() {
            None => None,
            Some(tok) => {
                let v: f64 = tok.parse().map_err(|e| {
                    Error::Parse(format!(
                        "{}:{}: bad center {tok:?}: {e}",
                        manifest_path.display(),
                        lineno + 1
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse(format!(
                        "{}:{}: center must be finite",
                        manifest_path.display(),
                        lineno + 1
                    )));
                }
                Some(v)
            }
        };
        if parts.next().is_some() {
            return Err(Error::Parse(format!(
                "{}:{}: expected `filename [center]`",
                manifest_path.display(),
                lineno + 1
            )));
        }
        members.push(Matrix::from_text_file(&dir.join(name))?);
        centers.push(center);
    }
    if members.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "manifest {} lists no matrices",
            manifest_path.display()
        )));
    }
    Ok((members, centers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetrize;
    use crate::rng::CounterRng;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn qform_hand_cases() {
        let x = vec![1.0, 1.0];
        assert_eq!(qform(&Matrix::identity(2), &x).unwrap(), 2.0);
        assert_eq!(qform(&Matrix::zeros(2, 2), &x).unwrap(), 0.0);
        // 1 + 2 + 3 + 4
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(qform(&a, &x).unwrap(), 10.0);
        assert!(qform(&a, &[1.0]).is_err());
    }

    #[test]
    fn qform_agrees_with_symmetrized_matrix() {
        let rng = CounterRng::new(21, 0);
        for trial in 0..1000u64 {
            let n = 4;
            let mut data = Vec::with_capacity(n * n);
            for j in 0..(n * n) as u64 {
                data.push(rng.normal_at(trial * 100 + j));
            }
            let a = Matrix::new(n, n, data).unwrap();
            let x: Vec<f64> = (0..n as u64)
                .map(|j| rng.normal_at(trial * 100 + 50 + j))
                .collect();
            let qa = qform(&a, &x).unwrap();
            let qs = qform(&symmetrize(&a).unwrap(), &x).unwrap();
            assert!(
                (qa - qs).abs() <= 1e-12 * qa.abs().max(1.0),
                "trial {trial}: {qa} vs {qs}"
            );
        }
    }

    #[test]
    fn analytic_center_identity_gaussian_is_dimension() {
        let s = Sampler::standard_gaussian(3).unwrap();
        let c = analytic_center(&Matrix::identity(3), &s).unwrap();
        assert_eq!(c, 3.0);
    }

    #[test]
    fn analytic_center_includes_mean_term() {
        // shifted standard Gaussian: E X^T A X = tr(A) + m^T A m
        let base = Sampler::standard_gaussian(2).unwrap();
        let s = Sampler::affine(base, Matrix::identity(2), vec![1.0, 2.0]).unwrap();
        let a = mat(&[&[1.0, 0.0], &[0.0, 3.0]]);
        let c = analytic_center(&a, &s).unwrap();
        // tr = 4, m^T A m = 1 + 12 = 13
        assert!((c - 17.0).abs() < 1e-12);
    }

    #[test]
    fn centered_samples_have_small_mean() {
        let n = 100_000;
        for s in [
            Sampler::standard_gaussian(4).unwrap(),
            Sampler::rademacher_product(4).unwrap(),
            Sampler::bounded_product(4, 1.5).unwrap(),
            Sampler::sampling_without_replacement(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 4)
                .unwrap(),
        ] {
            let a = mat(&[
                &[1.0, 0.5, 0.0, 0.0],
                &[0.5, 2.0, 0.3, 0.0],
                &[0.0, 0.3, 1.0, 0.1],
                &[0.0, 0.0, 0.1, 0.5],
            ]);
            let z = centered_qform_samples(&a, &s, n, 7).unwrap();
            let mean = z.iter().sum::<f64>() / n as f64;
            let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!(
                mean.abs() <= 4.0 * se,
                "{}: mean {mean}, se {se}",
                s.kind_name()
            );
        }
    }

    #[test]
    fn centered_samples_zero_matrix_is_identically_zero() {
        let s = Sampler::rademacher_product(3).unwrap();
        let z = centered_qform_samples(&Matrix::zeros(3, 3), &s, 500, 0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn calibrated_center_path_matches_analytic_approximately() {
        let a = mat(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let known = Sampler::standard_gaussian(2).unwrap();
        let unknown = known.clone().with_unknown_covariance();
        let za = centered_qform_samples(&a, &known, 50_000, 3).unwrap();
        let zc = centered_qform_samples(&a, &unknown, 50_000, 3).unwrap();
        // same draws, centers differ by the calibration error ~ sd/sqrt(N)
        let shift = za[0] - zc[0];
        assert!(shift.abs() < 0.2, "calibration shift {shift}");
        for i in 1..za.len() {
            assert!((za[i] - zc[i] - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn sup_qform_hand_cases() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let single = MatrixFamily::new(vec![a.clone()], vec![1.5]).unwrap();
        let x = vec![1.0, 1.0];
        assert_eq!(sup_qform(&single, &x).unwrap(), 8.5);
        let dup = MatrixFamily::new(vec![a.clone(), a.clone()], vec![1.5, 1.5]).unwrap();
        assert_eq!(sup_qform(&dup, &x).unwrap(), 8.5);
    }

    #[test]
    fn sup_qform_of_plus_minus_identity_is_abs_deviation() {
        let n = 3;
        let fam = MatrixFamily::new(
            vec![Matrix::identity(n), Matrix::identity(n).scale(-1.0)],
            vec![n as f64, -(n as f64)],
        )
        .unwrap();
        let s = Sampler::standard_gaussian(n).unwrap();
        let draws = crate::distributions::sample(&s, 5, 200);
        for i in 0..200 {
            let x = draws.row(i);
            let norm_sq: f64 = x.iter().map(|v| v * v).sum();
            let want = (norm_sq - n as f64).abs();
            let got = sup_qform(&fam, x).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_qform_invariant_under_member_permutation() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = mat(&[&[0.0, 1.0], &[1.0, -1.0]]);
        let c = Matrix::identity(2);
        let f1 = MatrixFamily::new(
            vec![a.clone(), b.clone(), c.clone()],
            vec![0.1, -0.2, 0.3],
        )
        .unwrap();
        let f2 = MatrixFamily::new(vec![c, b, a], vec![0.3, -0.2, 0.1]).unwrap();
        let rng = CounterRng::new(2, 2);
        for t in 0..200u64 {
            let x = [rng.normal_at(2 * t), rng.normal_at(2 * t + 1)];
            assert_eq!(
                sup_qform(&f1, &x).unwrap(),
                sup_qform(&f2, &x).unwrap()
            );
        }
    }

    #[test]
    fn active_gradient_hand_cases() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let single = MatrixFamily::new(vec![a.clone()], vec![0.0]).unwrap();
        let x = vec![1.0, -1.0];
        // (A + A^T) x with A + A^T = [[2,5],[5,8]]
        assert_eq!(active_gradient(&single, &x).unwrap(), vec![-3.0, -3.0]);

        let sym = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let single_sym = MatrixFamily::new(vec![sym.clone()], vec![0.0]).unwrap();
        let g = active_gradient(&single_sym, &x).unwrap();
        let want = sym.matvec(&x).iter().map(|v| 2.0 * v).collect::<Vec<_>>();
        assert_eq!(g, want);

        // {I, 2I}: member 2I dominates for x != 0, gradient 4x
        let fam = MatrixFamily::new(
            vec![Matrix::identity(2), Matrix::identity(2).scale(2.0)],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(active_gradient(&fam, &x).unwrap(), vec![4.0, -4.0]);
    }

    #[test]
    fn active_gradient_ties_break_low_index() {
        let fam = MatrixFamily::new(
            vec![Matrix::identity(2), Matrix::identity(2).scale(-1.0)],
            vec![0.0, 0.0],
        )
        .unwrap();
        // at x = 0 every member attains the sup; member 0 wins the tie
        assert_eq!(active_gradient(&fam, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let dup = MatrixFamily::new(
            vec![
                mat(&[&[1.0, 0.0], &[0.0, 1.0]]),
                mat(&[&[1.0, 0.0], &[0.0, 1.0]]),
            ],
            vec![0.0, 0.0],
        )
        .unwrap();
        let g = active_gradient(&dup, &[3.0, 4.0]).unwrap();
        assert_eq!(g, vec![6.0, 8.0]);
    }

    #[test]
    fn active_gradient_norm_is_bounded_by_family_sup() {
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = mat(&[&[0.0, -1.0], &[2.0, 1.0]]);
        let fam = MatrixFamily::new(vec![a, b], vec![0.5, -0.5]).unwrap();
        let rng = CounterRng::new(4, 4);
        for t in 0..10_000u64 {
            let x = [rng.normal_at(2 * t), rng.normal_at(2 * t + 1)];
            let g = active_gradient(&fam, &x).unwrap();
            let sup = fam
                .doubled()
                .iter()
                .map(|d| euclidean_norm(&d.matvec(&x)))
                .fold(0.0f64, f64::max);
            assert!(euclidean_norm(&g) <= sup * (1.0 + 1e-15));
        }
    }

    #[test]
    fn family_norm_zero_family_is_exactly_zero() {
        let fam = MatrixFamily::new(
            vec![Matrix::zeros(3, 3), Matrix::zeros(3, 3)],
            vec![0.0, 0.0],
        )
        .unwrap();
        let s = Sampler::standard_gaussian(3).unwrap();
        let (est, se) = family_norm(&fam, &s, 500, 0).unwrap();
        assert_eq!(est, 0.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn family_norm_singleton_respects_hs_ceiling() {
        // ||X||_A <= 2 hs(A) sqrt(cov opnorm) = 2 hs(A) for standard Gaussian
        let a = mat(&[&[1.0, 0.5], &[-0.3, 2.0]]);
        let fam = MatrixFamily::new(vec![a.clone()], vec![0.0]).unwrap();
        let s = Sampler::standard_gaussian(2).unwrap();
        let (est, se) = family_norm(&fam, &s, 20_000, 1).unwrap();
        let ceiling = 2.0 * crate::linalg::hs_norm(&a);
        assert!(
            est <= ceiling + 3.0 * se,
            "estimate {est} exceeds ceiling {ceiling} (se {se})"
        );
    }

    #[test]
    fn family_norm_identity_matches_chi_mean_band() {
        // singleton {I} in R^16: estimate = 2 E|X|, and E|X| lies in
        // [sqrt(15), 4] for a 16-dimensional standard Gaussian
        let n = 16;
        let fam = MatrixFamily::new(vec![Matrix::identity(n)], vec![n as f64]).unwrap();
        let s = Sampler::standard_gaussian(n).unwrap();
        let (est, se) = family_norm(&fam, &s, 50_000, 2).unwrap();
        assert!(
            est + 3.0 * se >= 2.0 * 15f64.sqrt() && est - 3.0 * se <= 8.0,
            "estimate {est}, se {se}"
        );
    }

    #[test]
    fn sup_opnorm_takes_the_max() {
        let fam = MatrixFamily::new(
            vec![Matrix::identity(2), Matrix::identity(2).scale(3.0)],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert!((fam.sup_opnorm(1e-9).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn family_construction_validates() {
        assert!(MatrixFamily::new(vec![], vec![]).is_err());
        assert!(MatrixFamily::new(vec![Matrix::zeros(2, 3)], vec![0.0]).is_err());
        assert!(MatrixFamily::new(
            vec![Matrix::identity(2), Matrix::identity(3)],
            vec![0.0, 0.0]
        )
        .is_err());
        assert!(MatrixFamily::new(vec![Matrix::identity(2)], vec![]).is_err());
        assert!(MatrixFamily::new(vec![Matrix::identity(2)], vec![f64::NAN]).is_err());
        let unknown = Sampler::standard_gaussian(2).unwrap().with_unknown_covariance();
        assert!(matches!(
            MatrixFamily::with_analytic_centers(vec![Matrix::identity(2)], &unknown),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn load_family_dir_reads_manifest() {
        let dir = std::env::temp_dir().join(format!("hwlab-fam-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.mat"), Matrix::identity(2).to_text()).unwrap();
        std::fs::write(
            dir.join("b.mat"),
            Matrix::identity(2).scale(2.0).to_text(),
        )
        .unwrap();
        std::fs::write(
            dir.join("manifest.txt"),
            "# family\na.mat 2.0\n\nb.mat\n",
        )
        .unwrap();
        let (members, centers) = load_family_dir(&dir, "manifest.txt").unwrap();
        assert_eq!(members.len(), 2);
        assert_eq!(members[1].get(0, 0), 2.0);
        assert_eq!(centers, vec![Some(2.0), None]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
