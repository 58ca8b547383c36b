//! Closed-form tail bound evaluators and the quantile/median conversion
//! utilities, with the absolute constant `C` always caller-supplied.
//!
//! All two-sided bounds share the shape `2 exp(-min(t^2/s1, t/s2) / C)` for
//! kind-specific scale parameters. Degenerate scales follow one convention:
//! a zero denominator makes that branch `+inf` so the min selects the other;
//! when both branches are degenerate the bound is the vacuous constant 2
//! (a zero matrix deviates by exactly 0, so any bound is true).
//!
//! Raw values live in `[0, 2]` and are what the constant-fitting code
//! consumes; [`BoundSpec::eval_prob`] clamps to `[0, 1]` for reporting.

use crate::error::{Error, Result};

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

#[inline]
fn two_sided(c: f64, e1: f64, e2: f64) -> f64 {
    let m = e1.min(e2);
    if m.is_infinite() {
        return 2.0;
    }
    2.0 * (-m / c).exp()
}

fn check_nonneg(value: f64, name: &str) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "{name} must be nonnegative and finite, got {value}"
        )));
    }
    Ok(())
}

fn check_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    check_nonneg(t, "threshold t")
}

/// Classic Hanson-Wright bound
/// `2 exp(-min(t^2 / (C K^4 hs^2), t / (C K^2 op)))`.
///
/// Requires `op <= hs` (up to 1e-9 relative), which holds for any matrix.
pub fn classic_hw(t: f64, hs: f64, op: f64, k: f64, c: f64) -> Result<f64> {
    check_t(t)?;
    validate_classic(hs, op, k, c)?;
    Ok(eval_classic(t, hs, op, k, c))
}

fn validate_classic(hs: f64, op: f64, k: f64, c: f64) -> Result<()> {
    check_nonneg(hs, "Hilbert-Schmidt norm")?;
    check_nonneg(op, "operator norm")?;
    check_positive(k, "concentration constant K")?;
    check_positive(c, "constant C")?;
    if op > hs * (1.0 + 1e-9) {
        return Err(Error::InvalidParams(format!(
            "operator norm {op} exceeds Hilbert-Schmidt norm {hs}"
        )));
    }
    Ok(())
}

fn eval_classic(t: f64, hs: f64, op: f64, k: f64, c: f64) -> f64 {
    two_sided(
        c,
        ratio(t * t, k.powi(4) * hs * hs),
        ratio(t, k * k * op),
    )
}

/// Dimension-dependent comparison bound
/// `C ln(n) exp(-min(t^2 / (hs^2 ln n), t / op) / (C K^2))`.
pub fn vu_wang(t: f64, hs: f64, op: f64, k: f64, n: usize, c: f64) -> Result<f64> {
    check_t(t)?;
    validate_vu_wang(hs, op, k, n, c)?;
    Ok(eval_vu_wang(t, hs, op, k, n, c))
}

fn validate_vu_wang(hs: f64, op: f64, k: f64, n: usize, c: f64) -> Result<()> {
    check_nonneg(hs, "Hilbert-Schmidt norm")?;
    check_nonneg(op, "operator norm")?;
    check_positive(k, "concentration constant K")?;
    check_positive(c, "constant C")?;
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    Ok(())
}

fn eval_vu_wang(t: f64, hs: f64, op: f64, k: f64, n: usize, c: f64) -> f64 {
    let ln_n = (n as f64).ln();
    let e1 = ratio(t * t, hs * hs * ln_n);
    let e2 = ratio(t, op);
    let m = e1.min(e2);
    if m.is_infinite() {
        // degenerate matrix: keep the vacuous two-sided ceiling
        return 2.0;
    }
    c * ln_n * (-m / (c * k * k)).exp()
}

/// Hanson-Wright under convex concentration
/// `2 exp(-min(t^2 / (K^2 hs^2 covnorm), t / (K^2 op)) / C)`.
pub fn convex_hw(t: f64, hs: f64, op: f64, k: f64, covnorm: f64, c: f64) -> Result<f64> {
    check_t(t)?;
    validate_convex(hs, op, k, covnorm, c)?;
    Ok(eval_convex(t, hs, op, k, covnorm, c))
}

fn validate_convex(hs: f64, op: f64, k: f64, covnorm: f64, c: f64) -> Result<()> {
    check_nonneg(hs, "Hilbert-Schmidt norm")?;
    check_nonneg(op, "operator norm")?;
    check_nonneg(covnorm, "covariance operator norm")?;
    check_positive(k, "concentration constant K")?;
    check_positive(c, "constant C")?;
    Ok(())
}

fn eval_convex(t: f64, hs: f64, op: f64, k: f64, covnorm: f64, c: f64) -> f64 {
    two_sided(
        c,
        ratio(t * t, k * k * hs * hs * covnorm),
        ratio(t, k * k * op),
    )
}

/// Uniform Hanson-Wright over a matrix family
/// `2 exp(-min(t^2 / (K^2 fam^2), t / (K^2 sup_op)) / C)` where `fam` is the
/// family norm `E sup_A |(A + A^T) X|`.
pub fn uniform_hw(t: f64, family_norm: f64, sup_op: f64, k: f64, c: f64) -> Result<f64> {
    check_t(t)?;
    validate_uniform(family_norm, sup_op, k, c)?;
    Ok(eval_uniform(t, family_norm, sup_op, k, c))
}

fn validate_uniform(family_norm: f64, sup_op: f64, k: f64, c: f64) -> Result<()> {
    check_nonneg(family_norm, "family norm")?;
    check_nonneg(sup_op, "sup operator norm")?;
    check_positive(k, "concentration constant K")?;
    check_positive(c, "constant C")?;
    Ok(())
}

fn eval_uniform(t: f64, family_norm: f64, sup_op: f64, k: f64, c: f64) -> f64 {
    two_sided(
        c,
        ratio(t * t, k * k * family_norm * family_norm),
        ratio(t, k * k * sup_op),
    )
}

/// Two-regime tail `2 exp(-min(t^2 / a^2, t / b) / C)` with Gaussian part
/// `a` and exponential part `b`; the regimes cross at `t = a^2 / b`.
pub fn mixed_tail(t: f64, a: f64, b: f64, c: f64) -> Result<f64> {
    check_t(t)?;
    validate_mixed(a, b, c)?;
    Ok(eval_mixed(t, a, b, c))
}

fn validate_mixed(a: f64, b: f64, c: f64) -> Result<()> {
    check_positive(a, "Gaussian scale a")?;
    check_positive(b, "exponential scale b")?;
    check_positive(c, "constant C")?;
    Ok(())
}

fn eval_mixed(t: f64, a: f64, b: f64, c: f64) -> f64 {
    two_sided(c, t * t / (a * a), t / b)
}

/// Covariance estimation deviation threshold
/// `C sigma (1 + sqrt(r/n)) sqrt(t/n) + sigma t / n`, valid with probability
/// at least `1 - exp(-t)` for `t >= 1`.
///
/// This is a deviation magnitude, not a probability.
pub fn kl_deviation(t: f64, sigma_norm: f64, r: f64, n: usize, c: f64) -> Result<f64> {
    validate_kl(sigma_norm, r, n, c)?;
    if !(t >= 1.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "deviation threshold needs t >= 1, got {t}"
        )));
    }
    Ok(eval_kl(t, sigma_norm, r, n, c))
}

fn validate_kl(sigma_norm: f64, r: f64, n: usize, c: f64) -> Result<()> {
    check_nonneg(sigma_norm, "covariance operator norm")?;
    check_nonneg(r, "effective rank")?;
    check_positive(c, "constant C")?;
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    Ok(())
}

fn eval_kl(t: f64, sigma_norm: f64, r: f64, n: usize, c: f64) -> f64 {
    let nf = n as f64;
    c * sigma_norm * (1.0 + (r / nf).sqrt()) * (t / nf).sqrt() + sigma_norm * t / nf
}

/// Lower bound on the `p`-th quantile: `mean - K sqrt(log(2/p))`.
pub fn quantile_lower_bound(mean: f64, k: f64, p: f64) -> Result<f64> {
    if !mean.is_finite() {
        return Err(Error::InvalidParams(format!(
            "mean must be finite, got {mean}"
        )));
    }
    check_positive(k, "concentration constant K")?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParams(format!(
            "quantile level must be in (0, 1), got {p}"
        )));
    }
    Ok(mean - k * (2.0 / p).ln().sqrt())
}

/// Bound on the gap between mean and median of a variable with mixed tail
/// scales `(a, b)`: `sqrt(pi) a + 2 b`.
pub fn median_mean_gap(a: f64, b: f64) -> Result<f64> {
    check_nonneg(a, "Gaussian scale a")?;
    check_nonneg(b, "exponential scale b")?;
    Ok(std::f64::consts::PI.sqrt() * a + 2.0 * b)
}

/// A tail bound with its parameters and constant bundled, ready to evaluate
/// on a grid or hand to the constant-fitting code.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundSpec {
    ClassicHw { hs: f64, op: f64, k: f64, c: f64 },
    VuWang { hs: f64, op: f64, k: f64, dim: usize, c: f64 },
    ConvexHw { hs: f64, op: f64, k: f64, covnorm: f64, c: f64 },
    UniformHw { family_norm: f64, sup_op: f64, k: f64, c: f64 },
    MixedTail { a: f64, b: f64, c: f64 },
    KlDeviation { sigma_norm: f64, effective_rank: f64, n_samples: usize, c: f64 },
}

impl BoundSpec {
    /// Validates parameters, consuming the same checks as the free
    /// evaluator functions.
    pub fn validated(self) -> Result<Self> {
        match &self {
            BoundSpec::ClassicHw { hs, op, k, c } => validate_classic(*hs, *op, *k, *c)?,
            BoundSpec::VuWang { hs, op, k, dim, c } => validate_vu_wang(*hs, *op, *k, *dim, *c)?,
            BoundSpec::ConvexHw { hs, op, k, covnorm, c } => {
                validate_convex(*hs, *op, *k, *covnorm, *c)?
            }
            BoundSpec::UniformHw { family_norm, sup_op, k, c } => {
                validate_uniform(*family_norm, *sup_op, *k, *c)?
            }
            BoundSpec::MixedTail { a, b, c } => validate_mixed(*a, *b, *c)?,
            BoundSpec::KlDeviation { sigma_norm, effective_rank, n_samples, c } => {
                validate_kl(*sigma_norm, *effective_rank, *n_samples, *c)?
            }
        }
        Ok(self)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BoundSpec::ClassicHw { .. } => "classic-hw",
            BoundSpec::VuWang { .. } => "vu-wang",
            BoundSpec::ConvexHw { .. } => "convex-hw",
            BoundSpec::UniformHw { .. } => "uniform-hw",
            BoundSpec::MixedTail { .. } => "mixed-tail",
            BoundSpec::KlDeviation { .. } => "kl-deviation",
        }
    }

    pub fn constant(&self) -> f64 {
        match self {
            BoundSpec::ClassicHw { c, .. }
            | BoundSpec::VuWang { c, .. }
            | BoundSpec::ConvexHw { c, .. }
            | BoundSpec::UniformHw { c, .. }
            | BoundSpec::MixedTail { c, .. }
            | BoundSpec::KlDeviation { c, .. } => *c,
        }
    }

    /// The same bound with a different constant. Every kind is pointwise
    /// nondecreasing in `C`, which is what makes grid fitting meaningful.
    pub fn with_constant(&self, constant: f64) -> Result<Self> {
        check_positive(constant, "constant C")?;
        let mut out = self.clone();
        match &mut out {
            BoundSpec::ClassicHw { c, .. }
            | BoundSpec::VuWang { c, .. }
            | BoundSpec::ConvexHw { c, .. }
            | BoundSpec::UniformHw { c, .. }
            | BoundSpec::MixedTail { c, .. }
            | BoundSpec::KlDeviation { c, .. } => *c = constant,
        }
        Ok(out)
    }

    /// True for kinds whose value is a tail probability (everything except
    /// `KlDeviation`, which evaluates to a deviation magnitude).
    pub fn is_probability(&self) -> bool {
        !matches!(self, BoundSpec::KlDeviation { .. })
    }

    /// Raw bound value: in `[0, 2]` for probability kinds, a magnitude for
    /// `KlDeviation`. The spec must have been validated; `t` must be
    /// nonnegative (and at least 1 for `KlDeviation`).
    pub fn eval_raw(&self, t: f64) -> f64 {
        assert!(t >= 0.0 && t.is_finite(), "threshold must be finite and >= 0");
        match self {
            BoundSpec::ClassicHw { hs, op, k, c } => eval_classic(t, *hs, *op, *k, *c),
            BoundSpec::VuWang { hs, op, k, dim, c } => eval_vu_wang(t, *hs, *op, *k, *dim, *c),
            BoundSpec::ConvexHw { hs, op, k, covnorm, c } => {
                eval_convex(t, *hs, *op, *k, *covnorm, *c)
            }
            BoundSpec::UniformHw { family_norm, sup_op, k, c } => {
                eval_uniform(t, *family_norm, *sup_op, *k, *c)
            }
            BoundSpec::MixedTail { a, b, c } => eval_mixed(t, *a, *b, *c),
            BoundSpec::KlDeviation { sigma_norm, effective_rank, n_samples, c } => {
                assert!(t >= 1.0, "deviation threshold needs t >= 1");
                eval_kl(t, *sigma_norm, *effective_rank, *n_samples, *c)
            }
        }
    }

    /// The bound as a probability, clamped to `[0, 1]`. Panics for
    /// `KlDeviation`, which is not a probability.
    pub fn eval_prob(&self, t: f64) -> f64 {
        assert!(
            self.is_probability(),
            "kl-deviation evaluates to a magnitude, not a probability"
        );
        self.eval_raw(t).min(1.0)
    }

    /// JSON description for report sidecars.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            BoundSpec::ClassicHw { hs, op, k, c } => serde_json::json!({
                "kind": self.kind_name(), "hs": hs, "op": op, "k": k, "c": c,
            }),
            BoundSpec::VuWang { hs, op, k, dim, c } => serde_json::json!({
                "kind": self.kind_name(), "hs": hs, "op": op, "k": k, "dim": dim, "c": c,
            }),
            BoundSpec::ConvexHw { hs, op, k, covnorm, c } => serde_json::json!({
                "kind": self.kind_name(), "hs": hs, "op": op, "k": k, "covnorm": covnorm, "c": c,
            }),
            BoundSpec::UniformHw { family_norm, sup_op, k, c } => serde_json::json!({
                "kind": self.kind_name(), "family_norm": family_norm, "sup_op": sup_op,
                "k": k, "c": c,
            }),
            BoundSpec::MixedTail { a, b, c } => serde_json::json!({
                "kind": self.kind_name(), "a": a, "b": b, "c": c,
            }),
            BoundSpec::KlDeviation { sigma_norm, effective_rank, n_samples, c } => {
                serde_json::json!({
                    "kind": self.kind_name(), "sigma_norm": sigma_norm,
                    "effective_rank": effective_rank, "n_samples": n_samples, "c": c,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_hw_basics() {
        // t = 0 gives the vacuous two-sided value
        assert_eq!(classic_hw(0.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 2.0);
        // rank-one direction: hs = op, exponent min(t^2/(CK^4 hs^2), t/(CK^2 hs))
        let t = 3.0;
        let (hs, k, c): (f64, f64, f64) = (2.0, 1.5, 2.0);
        let want = 2.0
            * (-(t * t / (c * k.powi(4) * hs * hs)).min(t / (c * k * k * hs))).exp();
        assert!((classic_hw(t, hs, hs, k, c).unwrap() - want).abs() < 1e-15);
        // op > hs rejected
        assert!(classic_hw(1.0, 1.0, 1.1, 1.0, 1.0).is_err());
        // op == hs * (1 + tiny slack) accepted
        assert!(classic_hw(1.0, 1.0, 1.0 + 1e-10, 1.0, 1.0).is_ok());
    }

    #[test]
    fn classic_hw_zero_matrix_is_vacuous() {
        assert_eq!(classic_hw(5.0, 0.0, 0.0, 1.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn vu_wang_comparison_dominates_convex_hw() {
        // same C >= 2, n >= 3, covnorm = 1: vu_wang >= convex_hw pointwise
        let (hs, op, k, c) = (3.0, 1.2, 2f64.sqrt(), 2.0);
        for n in [3usize, 8, 64, 512] {
            for i in 0..1000 {
                let t = i as f64 * 0.1;
                let vw = vu_wang(t, hs, op, k, n, c).unwrap();
                let cx = convex_hw(t, hs, op, k, 1.0, c).unwrap();
                assert!(
                    vw >= cx,
                    "n={n}, t={t}: vu_wang {vw} < convex_hw {cx}"
                );
            }
        }
    }

    #[test]
    fn vu_wang_nondecreasing_in_dimension() {
        let (t, hs, op, k, c) = (2.5, 1.0, 0.5, 1.0, 2.0);
        let mut prev = 0.0;
        for n in [2usize, 3, 10, 100, 10_000] {
            let v = vu_wang(t, hs, op, k, n, c).unwrap();
            assert!(v >= prev, "n={n}: {v} < {prev}");
            prev = v;
        }
        assert!(vu_wang(1.0, 1.0, 1.0, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn convex_hw_second_display_identity() {
        // replacing covnorm by 2K^2 reproduces
        // 2 exp(-min(t^2/(2 K^4 hs^2), t/(K^2 op)) / C)
        let (hs, op, k, c) = (2.0, 0.7, 1.3, 3.0);
        for i in 0..200 {
            let t = i as f64 * 0.25;
            let got = convex_hw(t, hs, op, k, 2.0 * k * k, c).unwrap();
            let e1 = t * t / (2.0 * k.powi(4) * hs * hs);
            let e2 = t / (k * k * op);
            let want = 2.0 * (-e1.min(e2) / c).exp();
            let err = (got - want).abs() / want.max(1e-300);
            assert!(err < 1e-14, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn uniform_hw_degenerate_family_norm_keeps_exponential_branch() {
        let (t, sup_op, k, c) = (4.0, 1.5, 1.0, 2.0);
        let got = uniform_hw(t, 0.0, sup_op, k, c).unwrap();
        let want = 2.0 * (-t / (c * k * k * sup_op)).exp();
        assert!((got - want).abs() < 1e-15);
        // both degenerate: vacuous
        assert_eq!(uniform_hw(3.0, 0.0, 0.0, 1.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn uniform_hw_monotone_in_k() {
        let (t, fam, sup) = (3.0, 2.0, 1.0);
        let lo = uniform_hw(t, fam, sup, 1.0, 2.0).unwrap();
        let hi = uniform_hw(t, fam, sup, 2.0, 2.0).unwrap();
        assert!(hi >= lo);
    }

    #[test]
    fn mixed_tail_regimes_and_crossover() {
        let (a, b, c) = (2.0, 0.5, 1.5);
        let cross = a * a / b; // 8
        // Gaussian regime below the crossover
        let t = 0.5 * cross;
        let got = mixed_tail(t, a, b, c).unwrap();
        assert!((got - 2.0 * (-t * t / (a * a) / c).exp()).abs() < 1e-15);
        // exponential regime above
        let t = 2.0 * cross;
        let got = mixed_tail(t, a, b, c).unwrap();
        assert!((got - 2.0 * (-t / b / c).exp()).abs() < 1e-15);
        // continuity at the crossover
        let left = 2.0 * (-cross * cross / (a * a) / c).exp();
        let right = 2.0 * (-cross / b / c).exp();
        assert!((left - right).abs() <= 1e-14 * left);
        assert!(mixed_tail(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn kl_deviation_formula_and_limits() {
        // r = 0: C sigma sqrt(t/n) + sigma t/n
        let (sigma, c) = (3.0, 2.0);
        let got = kl_deviation(4.0, sigma, 0.0, 100, c).unwrap();
        let want = c * sigma * 0.2 + sigma * 0.04;
        assert!((got - want).abs() < 1e-14);
        // linear in sigma
        let a = kl_deviation(2.0, 1.0, 5.0, 50, c).unwrap();
        let b = kl_deviation(2.0, 7.0, 5.0, 50, c).unwrap();
        assert!((b - 7.0 * a).abs() < 1e-12);
        // shrinks with n
        let big = kl_deviation(2.0, 1.0, 5.0, 1_000_000, c).unwrap();
        assert!(big < 1e-2 * a);
        assert!(kl_deviation(0.5, 1.0, 1.0, 10, 1.0).is_err());
        assert!(kl_deviation(1.0, 1.0, 1.0, 0, 1.0).is_err());
    }

    #[test]
    fn quantile_lower_bound_hand_values() {
        // p = 2/e: log(2/p) = 1
        let v = quantile_lower_bound(5.0, 2.0, 2.0 / std::f64::consts::E).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        // standard normal with K = sqrt(2), p = 1/2: mean - sqrt(2 log 4),
        // which must undershoot the true median 0
        let v = quantile_lower_bound(0.0, 2f64.sqrt(), 0.5).unwrap();
        assert!((v + (2.0 * 4f64.ln()).sqrt()).abs() < 1e-12);
        assert!(v <= 0.0);
        assert!(quantile_lower_bound(0.0, 1.0, 0.0).is_err());
        assert!(quantile_lower_bound(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn median_mean_gap_hand_values() {
        assert_eq!(median_mean_gap(0.0, 0.0).unwrap(), 0.0);
        assert!((median_mean_gap(1.0, 0.0).unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((median_mean_gap(0.0, 1.5).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_probability_bounds_nonincreasing_in_t() {
        let specs = [
            BoundSpec::ClassicHw { hs: 2.0, op: 1.0, k: 1.2, c: 1.7 },
            BoundSpec::VuWang { hs: 2.0, op: 1.0, k: 1.2, dim: 16, c: 1.7 },
            BoundSpec::ConvexHw { hs: 2.0, op: 1.0, k: 1.2, covnorm: 0.8, c: 1.7 },
            BoundSpec::UniformHw { family_norm: 3.0, sup_op: 1.0, k: 1.2, c: 1.7 },
            BoundSpec::MixedTail { a: 2.0, b: 0.3, c: 1.7 },
        ];
        for spec in specs {
            let spec = spec.validated().unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..500 {
                let t = i as f64 * 0.05;
                let v = spec.eval_raw(t);
                assert!(v <= prev + 1e-15, "{}: t={t}", spec.kind_name());
                assert!((0.0..=2.0).contains(&v) || spec.kind_name() == "vu-wang");
                prev = v;
            }
        }
    }

    #[test]
    fn raw_values_can_exceed_one_but_probabilities_cannot() {
        let spec = BoundSpec::ClassicHw { hs: 1.0, op: 1.0, k: 1.0, c: 1.0 }
            .validated()
            .unwrap();
        assert_eq!(spec.eval_raw(0.0), 2.0);
        assert_eq!(spec.eval_prob(0.0), 1.0);
    }

    #[test]
    fn with_constant_weakens_every_kind() {
        let specs = [
            BoundSpec::ClassicHw { hs: 2.0, op: 1.0, k: 1.2, c: 1.0 },
            BoundSpec::VuWang { hs: 2.0, op: 1.0, k: 1.2, dim: 16, c: 1.0 },
            BoundSpec::ConvexHw { hs: 2.0, op: 1.0, k: 1.2, covnorm: 0.8, c: 1.0 },
            BoundSpec::UniformHw { family_norm: 3.0, sup_op: 1.0, k: 1.2, c: 1.0 },
            BoundSpec::MixedTail { a: 2.0, b: 0.3, c: 1.0 },
            BoundSpec::KlDeviation {
                sigma_norm: 1.0,
                effective_rank: 4.0,
                n_samples: 100,
                c: 1.0,
            },
        ];
        for spec in specs {
            let spec = spec.validated().unwrap();
            let bigger = spec.with_constant(4.0).unwrap();
            for i in 0..100 {
                let t = 1.0 + i as f64 * 0.37;
                assert!(
                    bigger.eval_raw(t) >= spec.eval_raw(t) - 1e-15,
                    "{} not monotone in C at t={t}",
                    spec.kind_name()
                );
            }
        }
    }
}
