//! Executable versions of the proof constructions behind the convex
//! concentration argument: the weighted quadratic `phi`, the truncation
//! set `B`, the tangent-plane convex envelope `f`, and the Lipschitz
//! extension `g` - each with numerical verification of the properties the
//! argument needs.
//!
//! With nonnegative weights `mu_i` and `phi(y) = sum mu_i y_i^2`, the
//! gradient norm is `|grad phi(y)| = 2 sqrt(sum mu_i^2 y_i^2)`. The
//! truncation set bounds that gradient norm: `B` is the ellipsoid
//! `sqrt(sum mu_i^2 y_i^2) <= R`, so `sup_B |grad phi| = 2R`. The envelope
//! `f(y) = max_{x in B} (<grad phi(x), y - x> + phi(x))` agrees with `phi`
//! on `B`, never exceeds it, is convex as a maximum of affine functions,
//! and is `2R`-Lipschitz. The extension `g` carries `f`'s values from a
//! finite witness set to all of space without increasing the Lipschitz
//! constant.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{streams, CounterRng};

/// Iteration cap for the projected-gradient cross-check.
const PGD_MAX_ITERS: usize = 10_000;

/// Counter offsets separating the point classes inside the envelope
/// verification stream.
const OUTER_COUNTER_BASE: u64 = 1 << 40;
const PAIR_COUNTER_BASE: u64 = 1 << 41;

/// The diagonal quadratic `phi(y) = sum mu_i y_i^2` with nonnegative
/// weights.
#[derive(Clone, Debug)]
pub struct WeightedQuadratic {
    weights: Vec<f64>,
}

impl WeightedQuadratic {
    /// Weights must be finite and nonnegative; the argument reduces to
    /// this case.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParams("weight vector is empty".into()));
        }
        if !weights.iter().all(|m| m.is_finite() && *m >= 0.0) {
            return Err(Error::InvalidParams(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(WeightedQuadratic { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// `phi(y) = sum mu_i y_i^2`.
pub fn phi(w: &WeightedQuadratic, y: &[f64]) -> Result<f64> {
    if y.len() != w.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, weights have length {}",
            y.len(),
            w.dim()
        )));
    }
    Ok(w
        .weights
        .iter()
        .zip(y)
        .map(|(m, yi)| m * yi * yi)
        .sum())
}

/// The ellipsoid `B = { y : sqrt(sum mu_i^2 y_i^2) <= R }` on which the
/// gradient norm of `phi` stays below `2R`.
///
/// The defining inequality is a gradient-norm bound: membership is
/// equivalent to `|grad phi(y)| <= 2R`.
#[derive(Clone, Debug)]
pub struct TruncationSet {
    weights: Vec<f64>,
    radius: f64,
    /// `(sum mu_i^2 E Y_i^2, t)` when the radius was formed from moments.
    provenance: Option<(f64, f64)>,
}

impl TruncationSet {
    /// Radius from moment data: `R = sqrt(sum mu_i^2 E Y_i^2)
    /// + sqrt(t max mu_i) / 2`. The aggregated moment and `t` are kept as
    /// provenance.
    pub fn from_moments(w: &WeightedQuadratic, second_moments: &[f64], t: f64) -> Result<Self> {
        if second_moments.len() != w.dim() {
            return Err(Error::DimensionMismatch(format!(
                "moment vector has length {}, weights have length {}",
                second_moments.len(),
                w.dim()
            )));
        }
        if !second_moments.iter().all(|m| m.is_finite() && *m >= 0.0) {
            return Err(Error::InvalidParams(
                "second moments must be finite and nonnegative".into(),
            ));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "threshold must be finite and nonnegative, got {t}"
            )));
        }
        let sum = w
            .weights
            .iter()
            .zip(second_moments)
            .map(|(m, e)| m * m * e)
            .sum::<f64>();
        let radius = sum.sqrt() + 0.5 * (t * w.max_weight()).sqrt();
        Ok(TruncationSet {
            weights: w.weights.clone(),
            radius,
            provenance: Some((sum, t)),
        })
    }

    /// Explicit radius, no provenance.
    pub fn with_radius(w: &WeightedQuadratic, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(TruncationSet {
            weights: w.weights.clone(),
            radius,
            provenance: None,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> Option<(f64, f64)> {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `sqrt(sum mu_i^2 y_i^2)`, half the gradient norm of `phi` at `y`.
    pub fn weighted_norm(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has length {}, set dimension is {}",
                y.len(),
                self.dim()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(y)
            .map(|(m, yi)| (m * yi) * (m * yi))
            .sum::<f64>()
            .sqrt())
    }

    /// Exact membership test `weighted_norm(y) <= R`.
    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        Ok(self.weighted_norm(y)? <= self.radius)
    }

    /// Lipschitz constant of the envelope built over this set:
    /// `sup_B |grad phi| = 2R`.
    pub fn lipschitz_constant(&self) -> f64 {
        2.0 * self.radius
    }
}

fn check_same_weights(w: &WeightedQuadratic, b: &TruncationSet) -> Result<()> {
    if w.weights != b.weights {
        return Err(Error::InvalidParams(
            "truncation set was built over different weights".into(),
        ));
    }
    Ok(())
}

fn check_envelope_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::InvalidParams(format!(
            "tolerance must be in (0, 1e-4], got {tol}"
        )));
    }
    Ok(())
}

/// Tangent value `h(x) = 2 sum mu_i x_i y_i - sum mu_i x_i^2` of the plane
/// touching `phi` at `x`, evaluated at `y`.
fn tangent_value(weights: &[f64], x: &[f64], y: &[f64]) -> f64 {
    weights
        .iter()
        .zip(x.iter().zip(y))
        .map(|(m, (xi, yi))| m * xi * (2.0 * yi - xi))
        .sum()
}

/// Constrained maximizer coordinates `x_i(nu) = y_i / (1 + nu mu_i)`.
fn dual_point(weights: &[f64], y: &[f64], nu: f64) -> Vec<f64> {
    weights
        .iter()
        .zip(y)
        .map(|(m, yi)| yi / (1.0 + nu * m))
        .collect()
}

/// The tangent-plane envelope
/// `f(y) = max_{x in B} (<grad phi(x), y - x> + phi(x))`.
///
/// If `y` is in `B` the unconstrained maximizer `x = y` is feasible and
/// `f(y) = phi(y)` exactly. Otherwise the maximizer solves a
/// one-dimensional dual problem: `x_i(nu) = y_i / (1 + nu mu_i)` with
/// `nu > 0` the unique root of `weighted_norm(x(nu)) = R`, found by
/// bisection until the constraint residual drops below `tol * R`.
/// Coordinates with `mu_i = 0` follow `x_i = y_i` and affect neither the
/// objective nor the constraint.
pub fn envelope_f(w: &WeightedQuadratic, b: &TruncationSet, y: &[f64], tol: f64) -> Result<f64> {
    envelope_f_with_multiplier(w, b, y, tol).map(|(value, _)| value)
}

/// Like [`envelope_f`] but also returns the active dual multiplier
/// `nu*`: zero when `y` is in `B` (the constraint is slack and
/// `f(y) = phi(y)`), positive when the touching point lies on the
/// boundary.
pub fn envelope_f_with_multiplier(
    w: &WeightedQuadratic,
    b: &TruncationSet,
    y: &[f64],
    tol: f64,
) -> Result<(f64, f64)> {
    check_same_weights(w, b)?;
    check_envelope_tol(tol)?;
    let norm = b.weighted_norm(y)?;
    if norm <= b.radius {
        return phi(w, y).map(|v| (v, 0.0));
    }
    // Outside a degenerate set every tangent plane is flat on the
    // positive-weight coordinates, so the maximum is 0.
    if b.radius == 0.0 {
        return Ok((0.0, f64::INFINITY));
    }
    let r = b.radius;
    let residual = |nu: f64| -> f64 {
        let x = dual_point(&w.weights, y, nu);
        b.weighted_norm(&x).expect("dimension already checked") - r
    };
    // residual(0) = norm - R > 0 and residual decreases to -R, so a sign
    // change exists; 200 doublings cover any finite input.
    let mut hi = 1.0;
    let mut doublings = 0;
    while residual(hi) >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::BisectionFailure(
                "no sign change within 200 bracket doublings".into(),
            ));
        }
    }
    let mut lo = if hi == 1.0 { 0.0 } else { hi / 2.0 };
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let res = residual(mid);
        if res.abs() <= tol * r {
            let x = dual_point(&w.weights, y, mid);
            return Ok((tangent_value(&w.weights, &x, y), mid));
        }
        if res > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionFailure(format!(
        "constraint residual did not reach {tol} * R within 2000 bisection steps"
    )))
}

/// Euclidean projection onto `B`: for points outside, `x_i = z_i /
/// (1 + lambda mu_i^2)` with `lambda > 0` chosen so the constraint is
/// active.
fn project_onto(b: &TruncationSet, z: &[f64]) -> Vec<f64> {
    let norm = b.weighted_norm(z).expect("lengths match");
    if norm <= b.radius {
        return z.to_vec();
    }
    if b.radius == 0.0 {
        return b
            .weights
            .iter()
            .zip(z)
            .map(|(m, zi)| if *m > 0.0 { 0.0 } else { *zi })
            .collect();
    }
    let point = |lambda: f64| -> Vec<f64> {
        b.weights
            .iter()
            .zip(z)
            .map(|(m, zi)| zi / (1.0 + lambda * m * m))
            .collect()
    };
    let residual = |lambda: f64| -> f64 {
        b.weighted_norm(&point(lambda)).expect("lengths match") - b.radius
    };
    let mut hi = 1.0;
    while residual(hi) >= 0.0 {
        hi *= 2.0;
    }
    let mut lo = if hi == 1.0 { 0.0 } else { hi / 2.0 };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    point(0.5 * (lo + hi))
}

/// Projected-gradient-ascent evaluation of the envelope, used solely to
/// cross-validate the bisection path. Maximizes the concave tangent value
/// over `B` with step `1 / (2 max mu)` (the gradient's Lipschitz
/// constant) and a 10^4 iteration cap.
pub fn envelope_f_projected_gradient(
    w: &WeightedQuadratic,
    b: &TruncationSet,
    y: &[f64],
) -> Result<f64> {
    check_same_weights(w, b)?;
    let norm = b.weighted_norm(y)?;
    if norm <= b.radius {
        return phi(w, y);
    }
    let max_mu = w.max_weight();
    if max_mu == 0.0 {
        return Ok(0.0);
    }
    let step = 1.0 / (2.0 * max_mu);
    let mut x = project_onto(b, y);
    for _ in 0..PGD_MAX_ITERS {
        let moved: Vec<f64> = x
            .iter()
            .zip(w.weights.iter().zip(y))
            .map(|(xi, (m, yi))| xi + step * 2.0 * m * (yi - xi))
            .collect();
        let next = project_onto(b, &moved);
        let delta = next
            .iter()
            .zip(&x)
            .map(|(a, c)| (a - c).abs())
            .fold(0.0f64, f64::max);
        let scale = x.iter().map(|v| v.abs()).fold(1.0f64, f64::max);
        x = next;
        if delta <= 1e-15 * scale {
            break;
        }
    }
    Ok(tangent_value(&w.weights, &x, y))
}

/// Finite set of points inside `B` with envelope values, carrying the
/// Lipschitz constant the extension must respect.
#[derive(Clone, Debug)]
pub struct LipschitzWitnessSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    lipschitz_m: f64,
}

impl LipschitzWitnessSet {
    /// Builds a witness set over `b` with `M = b.lipschitz_constant()`,
    /// checking membership of every point and pairwise Lipschitz
    /// consistency of the values.
    pub fn new(b: &TruncationSet, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        Self::with_lipschitz(b, points, values, b.lipschitz_constant())
    }

    /// Same as [`LipschitzWitnessSet::new`] with an explicit constant.
    /// Construction fails unless the values are `M`-Lipschitz across the
    /// witness pairs; the extension can only reproduce values that are.
    pub fn with_lipschitz(
        b: &TruncationSet,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        lipschitz_m: f64,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyWitnessSet);
        }
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if !(lipschitz_m.is_finite() && lipschitz_m >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "Lipschitz constant must be finite and nonnegative, got {lipschitz_m}"
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("witness values must be finite".into()));
        }
        for p in &points {
            if !b.contains(p)? {
                return Err(Error::InvalidParams(
                    "witness point lies outside the truncation set".into(),
                ));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let dist = euclidean_distance(&points[i], &points[j]);
                let gap = (values[i] - values[j]).abs();
                if gap > lipschitz_m * dist * (1.0 + 1e-12) {
                    return Err(Error::InvalidParams(format!(
                        "witness values are not {lipschitz_m}-Lipschitz: gap {gap} over distance {dist}"
                    )));
                }
            }
        }
        Ok(LipschitzWitnessSet {
            points,
            values,
            lipschitz_m,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lipschitz_m(&self) -> f64 {
        self.lipschitz_m
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn euclidean_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Lipschitz extension by infimal convolution:
/// `g(y) = min_x (f(x) + M |y - x|)` over the witness set.
///
/// The output is `M`-Lipschitz by the triangle inequality and reproduces
/// the witness values exactly because construction verified they are
/// `M`-Lipschitz among themselves.
pub fn mcshane_extend(witnesses: &LipschitzWitnessSet, y: &[f64]) -> Result<f64> {
    let dim = witnesses.points[0].len();
    if y.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "point has length {}, witnesses have length {dim}",
            y.len()
        )));
    }
    Ok(witnesses
        .points
        .iter()
        .zip(&witnesses.values)
        .map(|(x, fx)| fx + witnesses.lipschitz_m * euclidean_distance(y, x))
        .fold(f64::INFINITY, f64::min))
}

/// Which property a violation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeCheck {
    /// `f = phi` on the truncation set.
    CoincidenceOnSet,
    /// `f <= phi` everywhere.
    TangentDomination,
    /// `|f(u) - f(v)| <= M |u - v|`.
    Lipschitz,
    /// `f((u+v)/2) <= (f(u) + f(v)) / 2`.
    MidpointConvexity,
}

impl EnvelopeCheck {
    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeCheck::CoincidenceOnSet => "coincidence-on-set",
            EnvelopeCheck::TangentDomination => "tangent-domination",
            EnvelopeCheck::Lipschitz => "lipschitz",
            EnvelopeCheck::MidpointConvexity => "midpoint-convexity",
        }
    }
}

/// One failed check with the witnessing points and the two sides of the
/// violated inequality.
#[derive(Clone, Debug)]
pub struct EnvelopeViolation {
    pub check: EnvelopeCheck,
    pub points: Vec<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of [`verify_envelope`].
#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub n_inner: usize,
    pub n_outer: usize,
    pub n_pairs: usize,
    pub violations: Vec<EnvelopeViolation>,
}

impl PropertyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Counters consumed per sampled point: one Gaussian per coordinate plus
/// slots for the radial and scale variates.
fn point_counter_block(dim: usize) -> u64 {
    dim as u64 + 4
}

/// Draws one point whose positive-weight coordinates lie on the ellipsoid
/// `weighted_norm = scale * R` (exactly uniform direction), with standard
/// Gaussian coordinates where the weight is zero.
fn scaled_boundary_point(
    b: &TruncationSet,
    rng: &CounterRng,
    base: u64,
    scale: f64,
) -> Vec<f64> {
    let dim = b.dim();
    let mut g = vec![0.0; dim];
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = rng.normal_at(base + i as u64);
    }
    let mut dir_norm = 0.0;
    for (m, gi) in b.weights.iter().zip(&g) {
        if *m > 0.0 {
            dir_norm += gi * gi;
        }
    }
    let dir_norm = dir_norm.sqrt();
    let mut y = vec![0.0; dim];
    for i in 0..dim {
        let m = b.weights[i];
        if m > 0.0 {
            // A zero direction has probability zero; fall back to the
            // first positive coordinate deterministically.
            let unit = if dir_norm > 0.0 { g[i] / dir_norm } else { 1.0 };
            y[i] = scale * b.radius * unit / m;
        } else {
            y[i] = g[i];
        }
    }
    y
}

/// Samples the envelope's claimed properties and reports every violation
/// with its witnessing points.
///
/// Interior points are drawn exactly uniformly in the ellipsoid: a
/// uniform direction in the weight-scaled ball of radius `R` with the
/// radial factor `u^(1/d)`, mapped back through the weights (zero-weight
/// coordinates are standard Gaussian; membership does not depend on
/// them). Rejection sampling against the bounding box would almost never
/// accept in high dimension, so it is not used. Exterior points sit on
/// scaled ellipsoids with scale in (1.1, 3.1); Lipschitz and midpoint
/// pairs use scales in (0, 2.5) to straddle the boundary.
///
/// Checks, each to the given tolerance (relative where a scale exists):
/// `f = phi` on the set, `f <= phi` outside, `|f(u) - f(v)| <= M |u - v|`
/// with `M = 2R`, and midpoint convexity.
pub fn verify_envelope(
    w: &WeightedQuadratic,
    b: &TruncationSet,
    n_inner: usize,
    n_outer: usize,
    n_pairs: usize,
    seed: u64,
    tol: f64,
) -> Result<PropertyReport> {
    check_same_weights(w, b)?;
    check_envelope_tol(tol)?;
    for (name, count) in [("inner", n_inner), ("outer", n_outer), ("pair", n_pairs)] {
        if count < 100 {
            return Err(Error::InvalidParams(format!(
                "need at least 100 {name} samples, got {count}"
            )));
        }
    }
    let rng = CounterRng::new(seed, streams::ENVELOPE_POINTS);
    let dim = w.dim();
    let block = point_counter_block(dim);
    let solver_tol = 1e-10;
    let positive_dims = w.weights.iter().filter(|m| **m > 0.0).count().max(1);

    let inner_violations: Vec<EnvelopeViolation> = (0..n_inner)
        .into_par_iter()
        .filter_map(|j| {
            let base = j as u64 * block;
            let u = rng.uniform_at(base + dim as u64);
            let radial = u.powf(1.0 / positive_dims as f64);
            let y = scaled_boundary_point(b, &rng, base, radial);
            let fy = envelope_f(w, b, &y, solver_tol).expect("validated inputs");
            let py = phi(w, &y).expect("validated inputs");
            if (fy - py).abs() > tol * py.abs().max(1.0) {
                Some(EnvelopeViolation {
                    check: EnvelopeCheck::CoincidenceOnSet,
                    points: vec![y],
                    lhs: fy,
                    rhs: py,
                })
            } else {
                None
            }
        })
        .collect();

    let outer_violations: Vec<EnvelopeViolation> = (0..n_outer)
        .into_par_iter()
        .filter_map(|j| {
            let base = OUTER_COUNTER_BASE + j as u64 * block;
            let scale = 1.1 + 2.0 * rng.uniform_at(base + dim as u64 + 1);
            let mut y = scaled_boundary_point(b, &rng, base, scale);
            if b.radius == 0.0 {
                // Scaling cannot leave a degenerate set; any nonzero
                // positive-weight coordinate is outside it.
                for i in 0..dim {
                    if b.weights[i] > 0.0 {
                        y[i] = rng.normal_at(base + i as u64);
                    }
                }
            }
            let fy = envelope_f(w, b, &y, solver_tol).expect("validated inputs");
            let py = phi(w, &y).expect("validated inputs");
            if fy > py + tol * py.abs().max(1.0) {
                Some(EnvelopeViolation {
                    check: EnvelopeCheck::TangentDomination,
                    points: vec![y],
                    lhs: fy,
                    rhs: py,
                })
            } else {
                None
            }
        })
        .collect();

    let m = b.lipschitz_constant();
    let pair_violations: Vec<EnvelopeViolation> = (0..n_pairs)
        .into_par_iter()
        .flat_map_iter(|j| {
            let base = PAIR_COUNTER_BASE + j as u64 * 2 * block;
            let scale_u = 2.5 * rng.uniform_at(base + dim as u64 + 1);
            let scale_v = 2.5 * rng.uniform_at(base + block + dim as u64 + 1);
            let u = scaled_boundary_point(b, &rng, base, scale_u);
            let v = scaled_boundary_point(b, &rng, base + block, scale_v);
            let fu = envelope_f(w, b, &u, solver_tol).expect("validated inputs");
            let fv = envelope_f(w, b, &v, solver_tol).expect("validated inputs");
            let mut found = Vec::new();
            let dist = euclidean_distance(&u, &v);
            if (fu - fv).abs() > m * dist * (1.0 + tol) {
                found.push(EnvelopeViolation {
                    check: EnvelopeCheck::Lipschitz,
                    points: vec![u.clone(), v.clone()],
                    lhs: (fu - fv).abs(),
                    rhs: m * dist,
                });
            }
            let mid: Vec<f64> = u.iter().zip(&v).map(|(a, c)| 0.5 * (a + c)).collect();
            let fmid = envelope_f(w, b, &mid, solver_tol).expect("validated inputs");
            let avg = 0.5 * (fu + fv);
            let conv_scale = fu.abs().max(fv.abs()).max(fmid.abs()).max(1.0);
            if fmid > avg + tol * conv_scale {
                found.push(EnvelopeViolation {
                    check: EnvelopeCheck::MidpointConvexity,
                    points: vec![u, v],
                    lhs: fmid,
                    rhs: avg,
                });
            }
            found
        })
        .collect();

    let mut violations = inner_violations;
    violations.extend(outer_violations);
    violations.extend(pair_violations);
    Ok(PropertyReport {
        n_inner,
        n_outer,
        n_pairs,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wq(weights: &[f64]) -> WeightedQuadratic {
        WeightedQuadratic::new(weights.to_vec()).unwrap()
    }

    #[test]
    fn phi_evaluates_the_weighted_square_sum() {
        let w = wq(&[0.0, 0.0, 0.0]);
        assert_eq!(phi(&w, &[5.0, -2.0, 7.0]).unwrap(), 0.0);

        let w = wq(&[1.0, 1.0]);
        assert_eq!(phi(&w, &[3.0, 4.0]).unwrap(), 25.0);

        let w = wq(&[2.0, 3.0]);
        assert_eq!(phi(&w, &[1.0, -1.0]).unwrap(), 5.0);

        assert!(phi(&w, &[1.0]).is_err());
    }

    #[test]
    fn weighted_quadratic_rejects_bad_weights() {
        assert!(WeightedQuadratic::new(vec![]).is_err());
        assert!(WeightedQuadratic::new(vec![1.0, -0.5]).is_err());
        assert!(WeightedQuadratic::new(vec![f64::NAN]).is_err());
        assert!(WeightedQuadratic::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn moment_radius_matches_closed_form_and_keeps_provenance() {
        let w = wq(&[1.0, 2.0]);
        let b = TruncationSet::from_moments(&w, &[1.0, 1.0], 4.0).unwrap();
        // sum mu^2 E Y^2 = 1 + 4 = 5; max mu = 2.
        assert_eq!(b.radius(), 5f64.sqrt() + 0.5 * 8f64.sqrt());
        assert_eq!(b.provenance(), Some((5.0, 4.0)));
        assert_eq!(b.lipschitz_constant(), 2.0 * b.radius());

        assert!(TruncationSet::from_moments(&w, &[1.0], 1.0).is_err());
        assert!(TruncationSet::from_moments(&w, &[-1.0, 1.0], 1.0).is_err());
        assert!(TruncationSet::from_moments(&w, &[1.0, 1.0], -1.0).is_err());
        assert!(TruncationSet::with_radius(&w, -0.1).is_err());
    }

    #[test]
    fn membership_test_is_exact_at_the_boundary() {
        let w = wq(&[2.0]);
        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        assert!(b.contains(&[0.5]).unwrap());
        assert!(!b.contains(&[0.5000001]).unwrap());
        assert_eq!(b.weighted_norm(&[0.5]).unwrap(), 1.0);
    }

    #[test]
    fn multiplier_is_zero_inside_and_activates_the_constraint_outside() {
        let w = wq(&[1.0, 2.0]);
        let b = TruncationSet::with_radius(&w, 1.5).unwrap();
        let tol = 1e-10;

        let (value, nu) = envelope_f_with_multiplier(&w, &b, &[0.3, 0.2], tol).unwrap();
        assert_eq!(nu, 0.0);
        assert_eq!(value, phi(&w, &[0.3, 0.2]).unwrap());

        let y = [2.0, -3.0];
        let (value, nu) = envelope_f_with_multiplier(&w, &b, &y, tol).unwrap();
        assert!(nu > 0.0);
        // The returned multiplier reproduces both the value and the
        // active constraint.
        let x: Vec<f64> = w
            .weights()
            .iter()
            .zip(&y)
            .map(|(m, yi)| yi / (1.0 + nu * m))
            .collect();
        assert!((b.weighted_norm(&x).unwrap() - b.radius()).abs() <= tol * b.radius());
        assert_eq!(value, envelope_f(&w, &b, &y, tol).unwrap());
    }

    #[test]
    fn envelope_agrees_with_phi_inside_the_set() {
        let w = wq(&[1.0, 3.0, 0.0]);
        let b = TruncationSet::with_radius(&w, 2.0).unwrap();
        let points = [
            vec![0.0, 0.0, 0.0],
            vec![0.5, 0.3, 9.0],
            vec![-1.0, 0.5, -4.0],
        ];
        for y in &points {
            assert!(b.contains(y).unwrap());
            assert_eq!(
                envelope_f(&w, &b, y, 1e-9).unwrap(),
                phi(&w, y).unwrap(),
                "exact branch must return phi bitwise"
            );
        }
    }

    #[test]
    fn one_dimensional_envelope_matches_grid_search() {
        // max_{|x| <= 1} (2xy - x^2) at y = 2 is 3, below phi(2) = 4.
        let w = wq(&[1.0]);
        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        let f = envelope_f(&w, &b, &[2.0], 1e-9).unwrap();
        assert!((f - 3.0).abs() < 1e-8);
        assert!(f < phi(&w, &[2.0]).unwrap());

        let mut brute = f64::NEG_INFINITY;
        let steps = 2_000_000;
        for i in 0..=steps {
            let x = -1.0 + 2.0 * i as f64 / steps as f64;
            brute = brute.max(2.0 * x * 2.0 - x * x);
        }
        assert!((f - brute).abs() < 1e-6);
    }

    #[test]
    fn isotropic_envelope_has_closed_form() {
        // With unit weights B is the Euclidean ball: f(y) = R(2|y| - R)
        // for |y| > R.
        let dim = 5;
        let w = wq(&vec![1.0; dim]);
        let r = 1.75;
        let b = TruncationSet::with_radius(&w, r).unwrap();
        let rng = CounterRng::new(5, 990);
        for j in 0..50u64 {
            let y: Vec<f64> = (0..dim as u64)
                .map(|i| 2.0 * rng.normal_at(j * 16 + i))
                .collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= r {
                continue;
            }
            let f = envelope_f(&w, &b, &y, 1e-9).unwrap();
            let closed = r * (2.0 * norm - r);
            assert!(
                (f - closed).abs() <= 1e-9 * closed.max(1.0),
                "norm {norm}:f {f} vs closed form {closed}"
            );
        }
    }

    #[test]
    fn envelope_never_exceeds_phi() {
        let w = wq(&[0.3, 1.2, 2.0, 0.0]);
        let b = TruncationSet::with_radius(&w, 0.8).unwrap();
        let rng = CounterRng::new(17, 991);
        for j in 0..200u64 {
            let y: Vec<f64> = (0..4u64).map(|i| 3.0 * rng.normal_at(j * 8 + i)).collect();
            let f = envelope_f(&w, &b, &y, 1e-9).unwrap();
            let p = phi(&w, &y).unwrap();
            assert!(f <= p + 1e-9 * p.max(1.0), "f {f} > phi {p}");
            if b.weighted_norm(&y).unwrap() > b.radius() * (1.0 + 1e-6) {
                assert!(f < p, "strictly outside must be strictly below");
            }
        }
    }

    #[test]
    fn envelope_grows_with_the_radius() {
        let w = wq(&[1.0, 0.5, 2.5]);
        let y = [3.0, -4.0, 1.5];
        let mut prev = f64::NEG_INFINITY;
        for r in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let b = TruncationSet::with_radius(&w, r).unwrap();
            let f = envelope_f(&w, &b, &y, 1e-9).unwrap();
            assert!(
                f >= prev - 1e-12 * f.abs().max(1.0),
                "radius {r}: {f} < {prev}"
            );
            prev = f;
        }
    }

    #[test]
    fn degenerate_radius_yields_zero_envelope() {
        let w = wq(&[1.0, 0.0]);
        let b = TruncationSet::with_radius(&w, 0.0).unwrap();
        assert_eq!(envelope_f(&w, &b, &[3.0, 7.0], 1e-9).unwrap(), 0.0);
        // Inside the degenerate set only the zero-weight coordinate moves.
        assert_eq!(envelope_f(&w, &b, &[0.0, 7.0], 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn envelope_validates_inputs() {
        let w = wq(&[1.0, 2.0]);
        let other = wq(&[1.0, 2.1]);
        let b = TruncationSet::with_radius(&other, 1.0).unwrap();
        assert!(envelope_f(&w, &b, &[0.0, 0.0], 1e-9).is_err());

        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        assert!(envelope_f(&w, &b, &[0.0], 1e-9).is_err());
        assert!(envelope_f(&w, &b, &[0.0, 0.0], 0.0).is_err());
        assert!(envelope_f(&w, &b, &[0.0, 0.0], 1e-3).is_err());
    }

    #[test]
    fn projected_gradient_cross_validates_the_bisection_path() {
        let rng = CounterRng::new(23, 992);
        let dim = 6;
        for instance in 0..10u64 {
            let weights: Vec<f64> = (0..dim as u64)
                .map(|i| 0.2 + 1.8 * rng.uniform_at(instance * 64 + i))
                .collect();
            let w = WeightedQuadratic::new(weights).unwrap();
            let r = 0.5 + 2.0 * rng.uniform_at(instance * 64 + 20);
            let b = TruncationSet::with_radius(&w, r).unwrap();
            for point in 0..20u64 {
                let y: Vec<f64> = (0..dim as u64)
                    .map(|i| 4.0 * rng.normal_at(instance * 64 + 24 + point * 8 + i))
                    .collect();
                let kkt = envelope_f(&w, &b, &y, 1e-10).unwrap();
                let pgd = envelope_f_projected_gradient(&w, &b, &y).unwrap();
                assert!(
                    (kkt - pgd).abs() <= 1e-8 * kkt.abs().max(1.0),
                    "instance {instance}, point {point}: kkt {kkt} vs pgd {pgd}"
                );
            }
        }
    }

    #[test]
    fn gradient_norm_identity_holds_against_finite_differences() {
        // |grad phi(y)| = 2 sqrt(sum mu_i^2 y_i^2), central differences
        // with step 1e-5 and relative tolerance 1e-6.
        let w = wq(&[0.5, 1.5, 2.0, 0.0]);
        let rng = CounterRng::new(3, 993);
        let step = 1e-5;
        for j in 0..100u64 {
            let y: Vec<f64> = (0..4u64).map(|i| 2.0 * rng.normal_at(j * 8 + i)).collect();
            let mut grad_sq = 0.0;
            for i in 0..4 {
                let mut hi = y.clone();
                let mut lo = y.clone();
                hi[i] += step;
                lo[i] -= step;
                let d = (phi(&w, &hi).unwrap() - phi(&w, &lo).unwrap()) / (2.0 * step);
                grad_sq += d * d;
            }
            let numeric = grad_sq.sqrt();
            let closed = 2.0
                * w.weights()
                    .iter()
                    .zip(&y)
                    .map(|(m, yi)| (m * yi) * (m * yi))
                    .sum::<f64>()
                    .sqrt();
            assert!(
                (numeric - closed).abs() <= 1e-6 * closed.max(1.0),
                "numeric {numeric} vs closed {closed}"
            );
        }
    }

    #[test]
    fn single_witness_extension_is_a_cone() {
        let w = wq(&[1.0, 1.0]);
        let b = TruncationSet::with_radius(&w, 2.0).unwrap();
        let x0 = vec![0.5, -0.5];
        let f0 = phi(&w, &x0).unwrap();
        let ws = LipschitzWitnessSet::new(&b, vec![x0.clone()], vec![f0]).unwrap();
        let y = [3.0, 1.0];
        let want = f0 + b.lipschitz_constant() * euclidean_distance(&y, &x0);
        assert_eq!(mcshane_extend(&ws, &y).unwrap(), want);
        assert_eq!(mcshane_extend(&ws, &x0).unwrap(), f0);
    }

    #[test]
    fn extension_reproduces_witness_values_and_stays_lipschitz() {
        let dim = 4;
        let w = wq(&[1.0, 0.7, 1.3, 0.4]);
        let b = TruncationSet::with_radius(&w, 1.5).unwrap();
        let rng = CounterRng::new(7, 994);
        let mut points = Vec::new();
        let mut values = Vec::new();
        let positive = dim;
        for j in 0..40u64 {
            let base = j * 16;
            let u = rng.uniform_at(base + dim as u64);
            let radial = u.powf(1.0 / positive as f64);
            let p = scaled_boundary_point(&b, &rng, base, radial);
            assert!(b.contains(&p).unwrap());
            values.push(phi(&w, &p).unwrap());
            points.push(p);
        }
        let ws = LipschitzWitnessSet::new(&b, points.clone(), values.clone()).unwrap();
        for (p, v) in points.iter().zip(&values) {
            let g = mcshane_extend(&ws, p).unwrap();
            assert!(
                (g - v).abs() <= 1e-12 * v.abs().max(1.0),
                "witness value {v} reproduced as {g}"
            );
        }
        let m = ws.lipschitz_m();
        for j in 0..500u64 {
            let u: Vec<f64> = (0..dim as u64)
                .map(|i| 3.0 * rng.normal_at(1_000_000 + j * 16 + i))
                .collect();
            let v: Vec<f64> = (0..dim as u64)
                .map(|i| 3.0 * rng.normal_at(2_000_000 + j * 16 + i))
                .collect();
            let gap = (mcshane_extend(&ws, &u).unwrap() - mcshane_extend(&ws, &v).unwrap()).abs();
            let dist = euclidean_distance(&u, &v);
            assert!(
                gap <= m * dist * (1.0 + 1e-12),
                "gap {gap} exceeds {m} * {dist}"
            );
        }
    }

    #[test]
    fn two_witnesses_on_a_line_give_the_piecewise_interpolant() {
        let w = wq(&[1.0]);
        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        let points = vec![vec![-0.5], vec![0.5]];
        let values = vec![phi(&w, &[-0.5]).unwrap(), phi(&w, &[0.5]).unwrap()];
        let ws = LipschitzWitnessSet::new(&b, points, values).unwrap();
        let m = ws.lipschitz_m();
        for i in 0..400 {
            let y = -2.0 + 4.0 * i as f64 / 399.0;
            let direct = (0.25 + m * (y + 0.5).abs()).min(0.25 + m * (y - 0.5).abs());
            assert!((mcshane_extend(&ws, &[y]).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn construction_rejects_values_steeper_than_the_constant() {
        // phi climbs with slope approaching 2R near the boundary, so the
        // radius alone is not a valid Lipschitz constant for the envelope.
        let w = wq(&[1.0]);
        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        let points = vec![vec![0.9], vec![1.0]];
        let values = vec![phi(&w, &[0.9]).unwrap(), phi(&w, &[1.0]).unwrap()];
        assert!(LipschitzWitnessSet::with_lipschitz(
            &b,
            points.clone(),
            values.clone(),
            b.radius()
        )
        .is_err());
        assert!(LipschitzWitnessSet::new(&b, points, values).is_ok());
    }

    #[test]
    fn witness_set_validates_inputs() {
        let w = wq(&[1.0]);
        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        assert!(matches!(
            LipschitzWitnessSet::new(&b, vec![], vec![]),
            Err(Error::EmptyWitnessSet)
        ));
        assert!(LipschitzWitnessSet::new(&b, vec![vec![0.0]], vec![0.0, 1.0]).is_err());
        assert!(LipschitzWitnessSet::new(&b, vec![vec![2.0]], vec![0.0]).is_err());
        assert!(LipschitzWitnessSet::new(&b, vec![vec![0.0]], vec![f64::NAN]).is_err());
        let ws = LipschitzWitnessSet::new(&b, vec![vec![0.5]], vec![0.25]).unwrap();
        assert!(mcshane_extend(&ws, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn verification_is_clean_on_random_instances() {
        let rng = CounterRng::new(41, 995);
        for instance in 0..2u64 {
            let dim = 8;
            let weights: Vec<f64> = (0..dim as u64)
                .map(|i| {
                    if i == 3 {
                        0.0
                    } else {
                        0.3 + 1.5 * rng.uniform_at(instance * 32 + i)
                    }
                })
                .collect();
            let w = WeightedQuadratic::new(weights).unwrap();
            let b = TruncationSet::with_radius(&w, 1.0 + instance as f64).unwrap();
            let report = verify_envelope(&w, &b, 200, 200, 200, instance, 1e-8).unwrap();
            assert!(
                report.is_clean(),
                "instance {instance}: {:?}",
                report.violations.first().map(|v| (v.check, v.lhs, v.rhs))
            );
            assert_eq!(report.n_inner, 200);
        }
    }

    #[test]
    fn verification_handles_all_zero_weights() {
        let w = wq(&[0.0, 0.0]);
        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        let report = verify_envelope(&w, &b, 100, 100, 100, 0, 1e-8).unwrap();
        assert!(report.is_clean());
    }

    #[test]
    fn verification_validates_counts_and_weights() {
        let w = wq(&[1.0]);
        let b = TruncationSet::with_radius(&w, 1.0).unwrap();
        assert!(verify_envelope(&w, &b, 99, 100, 100, 0, 1e-8).is_err());
        assert!(verify_envelope(&w, &b, 100, 100, 100, 0, 1e-3).is_err());
        let other = wq(&[2.0]);
        let b2 = TruncationSet::with_radius(&other, 1.0).unwrap();
        assert!(verify_envelope(&w, &b2, 100, 100, 100, 0, 1e-8).is_err());
    }

    #[test]
    fn verification_is_deterministic_across_thread_counts() {
        let w = wq(&[1.0, 0.5, 2.0]);
        let b = TruncationSet::with_radius(&w, 1.2).unwrap();
        let r1 = verify_envelope(&w, &b, 150, 150, 150, 9, 1e-8).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let r2 = pool.install(|| verify_envelope(&w, &b, 150, 150, 150, 9, 1e-8).unwrap());
        assert_eq!(r1.violations.len(), r2.violations.len());
        assert!(r1.is_clean() && r2.is_clean());
    }
}
