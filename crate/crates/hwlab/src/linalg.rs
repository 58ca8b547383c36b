//! Dense row-major matrices over `f64` and the few decompositions the crate
//! needs: Hilbert-Schmidt and operator norms, symmetrization, and a cyclic
//! Jacobi eigensolver for symmetric matrices.
//!
//! Everything is written against plain `Vec<f64>` storage with deterministic,
//! platform-independent arithmetic. The Jacobi sweep uses only scale-relative
//! thresholds, so multiplying a matrix by a power of two scales its
//! eigenvalues bitwise-exactly.
//!
//! # Text format
//!
//! A matrix serializes as a header line `rows cols` followed by one line per
//! row of whitespace-separated entries. Entries are written with shortest
//! round-trip formatting, so parse(write(A)) == A bitwise.

use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};

/// Dense row-major matrix. All entries are finite; constructors enforce it.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Errors if the element count does
    /// not match the shape or any entry is non-finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParams("matrix shape must be nonzero".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "matrix entries must be finite, found {bad}"
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be nonzero");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParams("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `A x` for a vector of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec length mismatch");
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `A^T y` for a vector of length `rows`, without materializing the
    /// transpose.
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_matvec length mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            let row = self.row(i);
            for j in 0..self.cols {
                out[j] += yi * row[j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for j in 0..other.cols {
                    out_row[j] += aik * orow[j];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Serializes to the `rows cols` header plus one line per row, with
    /// shortest round-trip float formatting.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{} {}\n", self.rows, self.cols));
        for i in 0..self.rows {
            let mut first = true;
            for v in self.row(i) {
                if !first {
                    s.push(' ');
                }
                s.push_str(&format!("{v}"));
                first = false;
            }
            s.push('\n');
        }
        s
    }

    /// Parses the text format produced by [`Matrix::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix text".into()))?;
        let mut hdr = header.split_whitespace();
        let rows: usize = hdr
            .next()
            .ok_or_else(|| Error::Parse("missing row count".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad row count: {e}")))?;
        let cols: usize = hdr
            .next()
            .ok_or_else(|| Error::Parse("missing column count".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad column count: {e}")))?;
        if hdr.next().is_some() {
            return Err(Error::Parse("header has trailing tokens".into()));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad entry {tok:?} in row {i}: {e}")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, expected {cols}",
                    data.len() - before
                )));
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing content after last row".into()));
        }
        Matrix::new(rows, cols, data)
    }

    pub fn from_text_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Matrix::from_text(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Parses a headerless whitespace-separated list of finite floats.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|e| Error::Parse(format!("bad vector entry {tok:?}: {e}")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!(
                "vector entries must be finite, found {v}"
            )));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse("vector text has no entries".into()));
    }
    Ok(out)
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(a: &Matrix) -> f64 {
    dot(a.as_slice(), a.as_slice()).sqrt()
}

const OP_NORM_MAX_ITERS: usize = 10_000;

/// Spectral norm via power iteration on `A^T A`.
///
/// `tol` is the relative accuracy of the returned value and must lie in
/// `(0, 1e-2]`. Convergence is certified through the eigenvalue residual
/// `|A^T A v - lambda v|` for the unit iterate `v`. A start vector that lands
/// in the null space triggers one deterministic restart; failure to converge
/// within 10^4 iterations is reported as `NonConvergence`.
pub fn op_norm(a: &Matrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::InvalidParams(format!(
            "op_norm tolerance must be in (0, 1e-2], got {tol}"
        )));
    }
    if a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let n = a.cols();
    'attempt: for attempt in 0..2u64 {
        let rng = CounterRng::new(attempt, streams::OP_NORM_INIT);
        let mut v: Vec<f64> = (0..n).map(|j| rng.normal_at(j as u64)).collect();
        let nv = euclidean_norm(&v);
        // a nonzero Gaussian vector; exact zero cannot happen with the open
        // interval uniform source
        for x in v.iter_mut() {
            *x /= nv;
        }
        for _ in 0..OP_NORM_MAX_ITERS {
            let av = a.matvec(&v);
            let u = a.tr_matvec(&av); // u = A^T A v
            let lambda = dot(&v, &u);
            let mut resid_sq = 0.0;
            for i in 0..n {
                let r = u[i] - lambda * v[i];
                resid_sq += r * r;
            }
            if resid_sq.sqrt() <= 0.25 * tol * lambda {
                return Ok(lambda.sqrt());
            }
            let nu = euclidean_norm(&u);
            if nu == 0.0 {
                // v is exactly in the null space; retry from a fresh start
                continue 'attempt;
            }
            for i in 0..n {
                v[i] = u[i] / nu;
            }
        }
        return Err(Error::NonConvergence(format!(
            "power iteration did not reach tolerance {tol} in {OP_NORM_MAX_ITERS} iterations"
        )));
    }
    Err(Error::NonConvergence(
        "power iteration stalled on the null space twice".into(),
    ))
}

/// `(A + A^T) / 2`. Errors unless `A` is square.
pub fn symmetrize(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cannot symmetrize a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, 0.5 * (a.get(i, j) + a.get(j, i)));
        }
    }
    Ok(out)
}

/// Eigendecomposition of a symmetric matrix with the spectrum split into
/// positive and negative parts.
///
/// Eigenvalues are sorted descending (ties keep the order the sweep produced
/// them in); column `j` of `vectors` is the eigenvector for `eigenvalues[j]`.
/// `mu_plus[j] = max(eigenvalues[j], 0)` and `mu_minus[j] =
/// max(-eigenvalues[j], 0)`, so `eigenvalues = mu_plus - mu_minus`.
#[derive(Clone, Debug)]
pub struct SpectrumSplit {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
}

impl SpectrumSplit {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest absolute eigenvalue (the spectral norm of the input).
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `U diag(eigenvalues) U^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lam = self.eigenvalues[k];
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                let uik = self.vectors.get(i, k);
                if uik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + lam * uik * self.vectors.get(j, k);
                    out.set(i, j, v);
                }
            }
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Cyclic Jacobi eigendecomposition for symmetric matrices.
///
/// The input must be symmetric to within `1e-12` of its largest entry, else
/// `NotSymmetric`. `tol` (relative, in `(0, 1)`) controls sweep termination;
/// in practice the sweep drives every off-diagonal entry to exactly zero.
/// All thresholds are scale-relative: scaling the input by a power of two
/// scales the eigenvalues exactly and leaves the eigenvectors bit-identical.
pub fn eigh(a: &Matrix, tol: f64) -> Result<SpectrumSplit> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigh needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParams(format!(
            "eigh tolerance must be in (0, 1), got {tol}"
        )));
    }
    let n = a.rows();
    let scale = a.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.get(i, j) - a.get(j, i)).abs() > SYMMETRY_REL_TOL * scale {
                return Err(Error::NotSymmetric(format!(
                    "entries ({i},{j}) and ({j},{i}) differ by {}",
                    (a.get(i, j) - a.get(j, i)).abs()
                )));
            }
        }
    }

    // exact symmetric working copy: averaging keeps power-of-two scaling exact
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m.set(i, i, a.get(i, i));
        for j in (i + 1)..n {
            let v = 0.5 * (a.get(i, j) + a.get(j, i));
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    let mut u = Matrix::identity(n);

    if scale == 0.0 {
        return Ok(split_sorted(vec![0.0; n], u));
    }

    let mut converged = false;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off_sum += m.get(i, j).abs();
            }
        }
        if off_sum == 0.0 || off_sum <= tol * scale * 1e-3 {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let g = 100.0 * apq.abs();
                // after a few sweeps, annihilate entries too small to affect
                // the diagonal; this is what drives off_sum to exactly zero
                if sweep > 3
                    && m.get(p, p).abs() + g == m.get(p, p).abs()
                    && m.get(q, q).abs() + g == m.get(q, q).abs()
                {
                    m.set(p, q, 0.0);
                    m.set(q, p, 0.0);
                    continue;
                }
                if apq == 0.0 {
                    continue;
                }
                let h = m.get(q, q) - m.get(p, p);
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                m.set(p, p, app - t * apq);
                m.set(q, q, aqq + t * apq);
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = m.get(i, p);
                    let aiq = m.get(i, q);
                    let nip = aip - s * (aiq + tau * aip);
                    let niq = aiq + s * (aip - tau * aiq);
                    m.set(i, p, nip);
                    m.set(p, i, nip);
                    m.set(i, q, niq);
                    m.set(q, i, niq);
                }
                for i in 0..n {
                    let uip = u.get(i, p);
                    let uiq = u.get(i, q);
                    u.set(i, p, uip - s * (uiq + tau * uip));
                    u.set(i, q, uiq + s * (uip - tau * uiq));
                }
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "Jacobi sweep did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    Ok(split_sorted(eigenvalues, u))
}

fn split_sorted(eigenvalues: Vec<f64>, u: Matrix) -> SpectrumSplit {
    let n = eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort: equal eigenvalues keep their producing order
    order.sort_by(|&i, &j| {
        eigenvalues[j]
            .partial_cmp(&eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let sorted: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_col, u.get(i, old_col));
        }
    }
    let mu_plus: Vec<f64> = sorted.iter().map(|&l| l.max(0.0)).collect();
    let mu_minus: Vec<f64> = sorted.iter().map(|&l| (-l).max(0.0)).collect();
    SpectrumSplit {
        eigenvalues: sorted,
        vectors,
        mu_plus,
        mu_minus,
    }
}

/// Symmetric square root of a positive semidefinite matrix.
///
/// Small negative eigenvalues (down to `-1e-9` relative to the largest) are
/// clipped to zero; anything more negative is rejected as not PSD.
pub fn sym_sqrt_psd(a: &Matrix) -> Result<Matrix> {
    let split = eigh(a, 1e-12)?;
    let top = split.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let floor = -1e-9 * top.max(f64::MIN_POSITIVE);
    if let Some(bad) = split.eigenvalues.iter().find(|&&l| l < floor) {
        return Err(Error::InvalidParams(format!(
            "matrix is not positive semidefinite: eigenvalue {bad}"
        )));
    }
    let n = split.dim();
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let s = split.eigenvalues[k].max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            let uik = split.vectors.get(i, k);
            if uik == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = out.get(i, j) + s * uik * split.vectors.get(j, k);
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hs_norm_matches_hand_value() {
        // sqrt(1 + 4 + 9 + 16) = sqrt(30)
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!((hs_norm(&a) - 30f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn op_norm_of_nilpotent_shift_is_one() {
        let a = mat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let s = op_norm(&a, 1e-10).unwrap();
        assert!((s - 1.0).abs() < 1e-9, "got {s}");
    }

    #[test]
    fn op_norm_matches_eigh_on_random_symmetric() {
        let rng = CounterRng::new(99, 0);
        for trial in 0..5u64 {
            let n = 10;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.normal_at(trial * 1000 + (i * n + j) as u64);
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
            }
            let via_power = op_norm(&a, 1e-9).unwrap();
            let via_eigh = eigh(&a, 1e-12).unwrap().spectral_norm();
            assert!(
                (via_power - via_eigh).abs() <= 1e-7 * via_eigh,
                "power {via_power} vs eigh {via_eigh}"
            );
        }
    }

    #[test]
    fn op_norm_rejects_bad_tolerance() {
        let a = Matrix::identity(2);
        assert!(matches!(op_norm(&a, 0.0), Err(Error::InvalidParams(_))));
        assert!(matches!(op_norm(&a, 0.5), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn op_norm_of_zero_matrix_is_zero() {
        let a = Matrix::zeros(3, 4);
        assert_eq!(op_norm(&a, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn symmetrize_averages_and_checks_shape() {
        let a = mat(&[&[1.0, 3.0], &[1.0, 2.0]]);
        let s = symmetrize(&a).unwrap();
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 2.0);
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(
            symmetrize(&rect),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn eigh_two_by_two_hand_case() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let split = eigh(&a, 1e-12).unwrap();
        assert!((split.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((split.eigenvalues[1] - 1.0).abs() < 1e-12);
        assert_eq!(split.mu_plus, split.eigenvalues);
        assert_eq!(split.mu_minus, vec![0.0, 0.0]);
    }

    #[test]
    fn eigh_splits_signs() {
        let a = mat(&[&[1.0, 0.0], &[0.0, -2.0]]);
        let split = eigh(&a, 1e-12).unwrap();
        assert_eq!(split.eigenvalues, vec![1.0, -2.0]);
        assert_eq!(split.mu_plus, vec![1.0, 0.0]);
        assert_eq!(split.mu_minus, vec![0.0, 2.0]);
    }

    #[test]
    fn eigh_rejects_asymmetric_input() {
        let a = mat(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(eigh(&a, 1e-12), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn eigh_reconstructs_random_symmetric() {
        let rng = CounterRng::new(5, 1);
        for trial in 0..4u64 {
            let n = 16;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.normal_at(trial * 4096 + (i * n + j) as u64);
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
            }
            let split = eigh(&a, 1e-12).unwrap();
            let back = split.reconstruct();
            let err = back.sub(&a).unwrap().max_abs();
            assert!(err <= 1e-12 * a.max_abs().max(1.0), "reconstruction {err}");
            // columns orthonormal
            for p in 0..n {
                for q in p..n {
                    let mut d = 0.0;
                    for i in 0..n {
                        d += split.vectors.get(i, p) * split.vectors.get(i, q);
                    }
                    let want = if p == q { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10, "col {p} . col {q} = {d}");
                }
            }
            // descending order
            for k in 1..n {
                assert!(split.eigenvalues[k - 1] >= split.eigenvalues[k]);
            }
        }
    }

    #[test]
    fn eigh_scales_exactly_under_powers_of_two() {
        let rng = CounterRng::new(17, 2);
        let n = 8;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.normal_at((i * n + j) as u64);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let s1 = eigh(&a, 1e-12).unwrap();
        let s4 = eigh(&a.scale(4.0), 1e-12).unwrap();
        for k in 0..n {
            assert_eq!(4.0 * s1.eigenvalues[k], s4.eigenvalues[k], "eigenvalue {k}");
        }
        assert_eq!(s1.vectors, s4.vectors);
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let r = sym_sqrt_psd(&a).unwrap();
        let back = r.matmul(&r).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() < 1e-12);
        let neg = mat(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        assert!(sym_sqrt_psd(&neg).is_err());
    }

    #[test]
    fn text_format_roundtrips_bitwise() {
        let a = mat(&[
            &[1.0, 2.5, -3.0],
            &[0.1, 1e-9, 7.25],
        ]);
        let text = a.to_text();
        assert!(text.starts_with("2 3\n"));
        let b = Matrix::from_text(&text).unwrap();
        assert_eq!(a, b);
        // irrational entries survive exactly through shortest round-trip
        let c = mat(&[&[std::f64::consts::PI, 2f64.sqrt()], &[1.0 / 3.0, 30f64.sqrt()]]);
        assert_eq!(Matrix::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn text_format_rejects_malformed_input() {
        assert!(Matrix::from_text("").is_err());
        assert!(Matrix::from_text("2 2\n1 2\n3").is_err());
        assert!(Matrix::from_text("2 2\n1 2\n3 4\n5 6").is_err());
        assert!(Matrix::from_text("1 2\n1 nan").is_err());
        assert!(Matrix::from_text("1 2\n1 inf").is_err());
        assert!(Matrix::from_text("x 2\n1 2").is_err());
    }

    #[test]
    fn parse_vector_reads_whitespace_separated_floats() {
        let v = parse_vector("1 2.5\n-3e2\t4").unwrap();
        assert_eq!(v, vec![1.0, 2.5, -300.0, 4.0]);
        assert!(parse_vector("").is_err());
        assert!(parse_vector("1 two").is_err());
        assert!(parse_vector("1 inf").is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
