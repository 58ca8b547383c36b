//! Empirical tail estimation with distribution-free confidence bands,
//! constant fitting, oracle distributions, and the experiment runner that
//! ties samplers, quadratic forms, and tail bounds together.
//!
//! The central object is the [`TailCurve`]: the empirical survival function
//! of `|Z - center|` over a threshold grid, wrapped in a
//! Dvoretzky-Kiefer-Wolfowitz band. Everything downstream consumes curves:
//! [`fit_constant`] calibrates a bound's constant against one,
//! [`fit_mixed_tail`] extracts two-regime tail scales from one, and
//! [`run_tail_experiment`] produces one from a matrix (or matrix family)
//! plus a sampler and emits a machine-readable report.
//!
//! Deviations are two-sided (`|Z - center|`) throughout. The center is the
//! analytic mean when the sampler's covariance is known (the upstream
//! pipeline subtracts it and the curve uses [`CenterMode::Zero`]), the
//! sample mean otherwise, and the sample median for median-deviation
//! checks.

use rayon::prelude::*;
use serde_json::json;

use crate::bounds::{median_mean_gap, quantile_lower_bound, BoundSpec};
use crate::distributions::{dkw_halfwidth, sample_stream, validate_grid, Sampler};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quadform::{centered_qform_samples, sup_qform, MatrixFamily};
use crate::report::{csv_line, fmt17};
use crate::rng::streams;
use crate::special::{reg_lower_gamma, reg_upper_gamma};

/// Confidence level used by [`lemma_checks`] for its internal band.
const LEMMA_CONFIDENCE: f64 = 0.99;

/// Minimum sample count for an empirical tail curve.
const MIN_TAIL_SAMPLES: usize = 100;

/// How the deviation `|Z - center|` is centered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CenterMode {
    /// Center at the sample mean.
    Mean,
    /// Center at the sample median.
    Median,
    /// Samples were centered upstream (analytic expectation subtracted);
    /// the center is zero by construction.
    Zero,
}

impl CenterMode {
    /// Stable lowercase name for serialization.
    pub fn name(&self) -> &'static str {
        match self {
            CenterMode::Mean => "mean",
            CenterMode::Median => "median",
            CenterMode::Zero => "zero",
        }
    }
}

/// Empirical survival function of `|Z - center|` over a threshold grid,
/// with a distribution-free confidence band.
///
/// `survival[i]` estimates `P(|Z - center| >= t_grid[i])`; the DKW
/// inequality puts the true curve within `band_halfwidth` of the empirical
/// one simultaneously at every threshold, with probability at least
/// `confidence`.
#[derive(Clone, Debug)]
pub struct TailCurve {
    pub t_grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub band_halfwidth: f64,
    pub n_samples: usize,
    pub confidence: f64,
    pub center_mode: CenterMode,
    /// The center value actually subtracted (0 for [`CenterMode::Zero`]).
    pub center: f64,
}

impl TailCurve {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// Lower band edge at grid index `i`, clipped to `[0, 1]`.
    pub fn band_lo(&self, i: usize) -> f64 {
        (self.survival[i] - self.band_halfwidth).max(0.0)
    }

    /// Upper band edge at grid index `i`, clipped to `[0, 1]`.
    pub fn band_hi(&self, i: usize) -> f64 {
        (self.survival[i] + self.band_halfwidth).min(1.0)
    }

    /// Unclipped upper band edge `survival + band_halfwidth`; this is what
    /// a bound must dominate to be declared feasible.
    pub fn upper(&self, i: usize) -> f64 {
        self.survival[i] + self.band_halfwidth
    }
}

/// Builds the empirical tail curve of `|z - center| >= t` over `t_grid`.
///
/// The center is the sample mean, the sample median, or zero, per
/// `center_mode`. The survival estimates come from one sort of the
/// absolute deviations, so they are exactly nonincreasing along the grid.
pub fn empirical_tail(
    samples: &[f64],
    t_grid: &[f64],
    confidence: f64,
    center_mode: CenterMode,
) -> Result<TailCurve> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientSamples {
            need: MIN_TAIL_SAMPLES,
            got: samples.len(),
        });
    }
    if !samples.iter().all(|z| z.is_finite()) {
        return Err(Error::InvalidParams("samples must be finite".into()));
    }
    validate_grid(t_grid)?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParams(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    let n = samples.len();
    let center = match center_mode {
        CenterMode::Mean => samples.iter().sum::<f64>() / n as f64,
        CenterMode::Median => sample_median(samples),
        CenterMode::Zero => 0.0,
    };
    let mut dev: Vec<f64> = samples.iter().map(|z| (z - center).abs()).collect();
    dev.sort_unstable_by(f64::total_cmp);
    let survival: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let below = dev.partition_point(|&w| w < t);
            (n - below) as f64 / n as f64
        })
        .collect();
    for w in survival.windows(2) {
        assert!(w[1] <= w[0], "survival must be nonincreasing");
    }
    Ok(TailCurve {
        t_grid: t_grid.to_vec(),
        survival,
        band_halfwidth: dkw_halfwidth(confidence, n),
        n_samples: n,
        confidence,
        center_mode,
        center,
    })
}

fn sample_median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Smallest `p`-th quantile of the empirical distribution: the least
/// sample value `x` with `F_hat(x) >= p`. `p` is clamped to the range the
/// sample can resolve. The input must be sorted ascending.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = ((p * n as f64).ceil() as isize - 1).clamp(0, n as isize - 1);
    sorted[idx as usize]
}

/// The logarithmic constant grid `{2^(k/4) : k = -8..40}` used by
/// [`fit_constant`]: quarter-octave resolution from 1/4 to 1024.
pub fn constant_grid() -> Vec<f64> {
    (-8..=40).map(|k| (k as f64 * 0.25).exp2()).collect()
}

/// Outcome of calibrating a bound's constant against a tail curve.
#[derive(Clone, Copy, Debug)]
pub struct FitResult {
    /// Smallest feasible grid constant, or the largest grid constant when
    /// nothing on the grid is feasible.
    pub constant_c: f64,
    pub feasible: bool,
    /// Minimum over the grid of `bound(t) - (survival(t) + band_halfwidth)`
    /// at `constant_c`; nonnegative exactly when feasible.
    pub margin: f64,
}

fn min_slack(curve: &TailCurve, spec: &BoundSpec) -> f64 {
    (0..curve.len())
        .map(|i| spec.eval_raw(curve.t_grid[i]) - curve.upper(i))
        .fold(f64::INFINITY, f64::min)
}

/// Returns the smallest constant on [`constant_grid`] making the bound
/// dominate the curve's unclipped upper band at every grid threshold.
///
/// Domination uses the raw bound value (which may exceed 1 near `t = 0`),
/// so a threshold where the whole band sits at probability 1 is still
/// coverable. The reported constant is grid-quantized by design. Deviation
/// bounds that are not tail probabilities cannot be fitted this way.
pub fn fit_constant(curve: &TailCurve, spec: &BoundSpec) -> Result<FitResult> {
    if !spec.is_probability() {
        return Err(Error::InvalidConfig(format!(
            "cannot fit a {} bound against a tail curve: it bounds a deviation magnitude, not a probability",
            spec.kind_name()
        )));
    }
    let grid = constant_grid();
    for &c in &grid {
        let cand = spec.with_constant(c)?;
        let margin = min_slack(curve, &cand);
        if margin >= 0.0 {
            return Ok(FitResult {
                constant_c: c,
                feasible: true,
                margin,
            });
        }
    }
    let last = *grid.last().expect("grid is nonempty");
    let cand = spec.with_constant(last)?;
    Ok(FitResult {
        constant_c: last,
        feasible: false,
        margin: min_slack(curve, &cand),
    })
}

/// Exact two-sided tail `P(|Q - k| >= t)` of a chi-square variable `Q`
/// with `k` degrees of freedom, via the regularized incomplete gamma
/// function. Ground truth for quadratic forms `X^T I X` under the standard
/// Gaussian.
///
/// For `t <= 0` the probability is 1; the lower-tail term vanishes once
/// `t >= k` because `Q` is nonnegative.
pub fn chi_square_oracle(k: u32, t: f64) -> f64 {
    assert!(k >= 1, "degrees of freedom must be at least 1");
    assert!(!t.is_nan(), "threshold must not be NaN");
    if t <= 0.0 {
        return 1.0;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    let kf = f64::from(k);
    let a = 0.5 * kf;
    let upper = reg_upper_gamma(a, 0.5 * (kf + t));
    let lower = if t < kf {
        reg_lower_gamma(a, 0.5 * (kf - t))
    } else {
        0.0
    };
    (upper + lower).min(1.0)
}

/// Fits two-regime tail scales `(a, b)` so that
/// `2 exp(-min(t^2/a^2, t/b))` dominates the curve's upper band at every
/// grid threshold, minimizing the implied mean-median gap bound
/// `sqrt(pi) a + 2 b`.
///
/// A grid point is covered when `a >= t/sqrt(L)` or `b >= t/L` with
/// `L = ln(2/(survival + band_halfwidth))`, so an optimal `a` is either 0
/// or one of the per-point requirements; for each candidate the minimal
/// companion `b` is the largest requirement among points `a` leaves
/// uncovered. Intended for median-centered curves; the caller picks the
/// centering.
pub fn fit_mixed_tail(curve: &TailCurve) -> Result<(f64, f64)> {
    const FLOOR: f64 = f64::MIN_POSITIVE;
    let mut reqs: Vec<(f64, f64)> = Vec::new();
    for i in 0..curve.len() {
        let t = curve.t_grid[i];
        if t == 0.0 {
            continue;
        }
        // upper is in (0, 1 + halfwidth], so l > ln(2/2) = 0.
        let l = (2.0 / curve.upper(i)).ln();
        reqs.push((t / l.sqrt(), t / l));
    }
    if reqs.is_empty() {
        return Ok((FLOOR, FLOOR));
    }
    let mut cands: Vec<f64> = reqs.iter().map(|r| r.0).collect();
    cands.push(0.0);
    cands.sort_unstable_by(f64::total_cmp);
    let mut best: Option<(f64, f64, f64)> = None;
    for &a in &cands {
        let b = reqs
            .iter()
            .filter(|r| r.0 > a)
            .map(|r| r.1)
            .fold(0.0f64, f64::max);
        let aa = a.max(FLOOR);
        let bb = b.max(FLOOR);
        let obj = std::f64::consts::PI.sqrt() * aa + 2.0 * bb;
        match best {
            Some((o, _, _)) if obj >= o => {}
            _ => best = Some((obj, aa, bb)),
        }
    }
    let (_, a, b) = best.expect("candidate list is nonempty");
    Ok((a, b))
}

/// One quantile lower-bound check: is the empirical `p`-th quantile at
/// least `mean - K sqrt(log(2/p))`, up to the Monte Carlo allowance?
#[derive(Clone, Debug)]
pub struct QuantileCheck {
    pub p: f64,
    pub empirical_quantile: f64,
    pub lower_bound: f64,
    /// One DKW halfwidth pushed through the empirical quantile map: how
    /// far the true quantile may sit above the empirical one.
    pub allowance: f64,
    pub pass: bool,
}

/// Mean-median gap check against `sqrt(pi) a + 2 b`.
#[derive(Clone, Debug)]
pub struct GapCheck {
    pub mean: f64,
    pub median: f64,
    pub gap: f64,
    pub limit: f64,
    /// Quantile-map width of one DKW band around the median plus three
    /// standard errors of the mean.
    pub allowance: f64,
    pub pass: bool,
}

/// Results of the quantile and mean-median-gap checks.
#[derive(Clone, Debug)]
pub struct LemmaCheckReport {
    pub quantile_checks: Vec<QuantileCheck>,
    pub gap_check: GapCheck,
    pub n_samples: usize,
    pub band_halfwidth: f64,
}

impl LemmaCheckReport {
    pub fn is_clean(&self) -> bool {
        self.gap_check.pass && self.quantile_checks.iter().all(|q| q.pass)
    }
}

/// Checks two structural consequences of a mixed Gaussian-exponential
/// tail on a sample:
///
/// 1. for each `p` in `p_grid`, the empirical `p`-th quantile is at least
///    `mean - K sqrt(log(2/p))` minus a small-sample allowance;
/// 2. the sample mean and median differ by at most `sqrt(pi) a + 2 b`
///    plus an allowance.
///
/// The allowances convert one DKW band halfwidth (at confidence 0.99)
/// through the empirical quantile map, plus three standard errors of the
/// mean for the gap check; they are tolerances against Monte Carlo noise,
/// not part of the claims being checked. Only violations the band can
/// certify are flagged.
pub fn lemma_checks(
    samples: &[f64],
    k: f64,
    p_grid: &[f64],
    a: f64,
    b: f64,
) -> Result<LemmaCheckReport> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientSamples {
            need: MIN_TAIL_SAMPLES,
            got: samples.len(),
        });
    }
    if !samples.iter().all(|z| z.is_finite()) {
        return Err(Error::InvalidParams("samples must be finite".into()));
    }
    if p_grid.is_empty() {
        return Err(Error::InvalidParams("quantile grid is empty".into()));
    }
    let n = samples.len();
    let nf = n as f64;
    let eps = dkw_halfwidth(LEMMA_CONFIDENCE, n);

    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mean = samples.iter().sum::<f64>() / nf;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    let mut quantile_checks = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let lower_bound = quantile_lower_bound(mean, k, p)?;
        let q = empirical_quantile(&sorted, p);
        let allowance = empirical_quantile(&sorted, (p + eps).min(1.0)) - q;
        quantile_checks.push(QuantileCheck {
            p,
            empirical_quantile: q,
            lower_bound,
            allowance,
            pass: q >= lower_bound - allowance,
        });
    }

    let limit = median_mean_gap(a, b)?;
    let var = samples.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (nf - 1.0);
    let q_width = empirical_quantile(&sorted, (0.5 + eps).min(1.0))
        - empirical_quantile(&sorted, (0.5 - eps).max(0.0));
    let allowance = q_width + 3.0 * (var / nf).sqrt();
    let gap = (mean - median).abs();
    let gap_check = GapCheck {
        mean,
        median,
        gap,
        limit,
        allowance,
        pass: gap <= limit + allowance,
    };

    Ok(LemmaCheckReport {
        quantile_checks,
        gap_check,
        n_samples: n,
        band_halfwidth: eps,
    })
}

/// What the deviation variable `Z` is built from: one quadratic form or
/// the supremum over a family.
#[derive(Clone, Debug)]
pub enum TailTarget {
    /// `Z = X^T A X`, centered analytically when the sampler's covariance
    /// is known and by an independent calibration run otherwise.
    Single(Matrix),
    /// `Z = max_k (X^T A_k X - a_k)`, centered at the sample mean.
    Family(MatrixFamily),
}

impl TailTarget {
    pub fn dim(&self) -> usize {
        match self {
            TailTarget::Single(a) => a.rows(),
            TailTarget::Family(f) => f.dim(),
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            TailTarget::Single(a) => json!({
                "kind": "single",
                "dim": a.rows(),
            }),
            TailTarget::Family(f) => json!({
                "kind": "family",
                "dim": f.dim(),
                "members": f.len(),
            }),
        }
    }
}

/// A tail bound to evaluate against the curve, either at its stored
/// constant or with the constant fitted from the data.
#[derive(Clone, Debug)]
pub struct BoundRequest {
    pub spec: BoundSpec,
    pub fit: bool,
}

/// Full configuration of one tail experiment.
#[derive(Clone, Debug)]
pub struct TailConfig {
    pub target: TailTarget,
    pub sampler: Sampler,
    pub n_samples: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub confidence: f64,
    pub bounds: Vec<BoundRequest>,
}

/// A bound after resolution: the spec carries the constant actually used
/// (fitted or as requested), and the fit result records feasibility.
#[derive(Clone, Debug)]
pub struct BoundOutcome {
    pub spec: BoundSpec,
    pub fitted: bool,
    pub result: FitResult,
}

/// Output of [`run_tail_experiment`]: the curve, the resolved bounds, and
/// enough configuration echo to reproduce the run.
#[derive(Clone, Debug)]
pub struct TailReport {
    pub curve: TailCurve,
    pub outcomes: Vec<BoundOutcome>,
    pub seed: u64,
    config_echo: serde_json::Value,
}

impl TailReport {
    /// CSV with header `t,survival,band_lo,band_hi,bound_1..bound_m`.
    /// Band edges are clipped to `[0, 1]` and bound columns are clamped
    /// probabilities. All floats carry 17 significant digits and lines
    /// end with `\n`, so equal reports compare byte-equal.
    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = ["t", "survival", "band_lo", "band_hi"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for j in 1..=self.outcomes.len() {
            header.push(format!("bound_{j}"));
        }
        let mut out = csv_line(&header);
        for i in 0..self.curve.len() {
            let t = self.curve.t_grid[i];
            let mut cells = vec![
                fmt17(t),
                fmt17(self.curve.survival[i]),
                fmt17(self.curve.band_lo(i)),
                fmt17(self.curve.band_hi(i)),
            ];
            for o in &self.outcomes {
                cells.push(fmt17(o.spec.eval_prob(t)));
            }
            out.push_str(&csv_line(&cells));
        }
        out
    }

    /// Metadata sidecar: configuration echo, resolved bounds with fitted
    /// constants, curve summary, seed, and the build identifier. Floats
    /// assembled here are 17-significant-digit strings so the file
    /// byte-compares across runs.
    pub fn metadata_json(&self, build_info: &str) -> serde_json::Value {
        json!({
            "config": self.config_echo,
            "bounds": self.outcomes.iter().map(|o| json!({
                "spec": o.spec.describe(),
                "fitted": o.fitted,
                "feasible": o.result.feasible,
                "constant_c": fmt17(o.result.constant_c),
                "margin": fmt17(o.result.margin),
            })).collect::<Vec<_>>(),
            "curve": {
                "n_samples": self.curve.n_samples,
                "confidence": fmt17(self.curve.confidence),
                "band_halfwidth": fmt17(self.curve.band_halfwidth),
                "center_mode": self.curve.center_mode.name(),
                "center": fmt17(self.curve.center),
            },
            "seed": self.seed,
            "build": build_info,
        })
    }

    /// Pretty-printed metadata with a trailing newline; key order is
    /// deterministic (sorted).
    pub fn metadata_string(&self, build_info: &str) -> String {
        let mut s = serde_json::to_string_pretty(&self.metadata_json(build_info))
            .expect("metadata serializes");
        s.push('\n');
        s
    }
}

/// Runs one tail experiment: draws `Z` samples from the target and
/// sampler, builds the empirical curve, and resolves every requested
/// bound against it.
///
/// Deterministic for a fixed configuration: the same `(config, seed)`
/// yields a byte-identical report regardless of thread count.
pub fn run_tail_experiment(config: &TailConfig) -> Result<TailReport> {
    if config.target.dim() != config.sampler.dim() {
        return Err(Error::DimensionMismatch(format!(
            "target dimension {} does not match sampler dimension {}",
            config.target.dim(),
            config.sampler.dim()
        )));
    }
    for req in &config.bounds {
        if !req.spec.is_probability() {
            return Err(Error::InvalidConfig(format!(
                "a {} bound is a deviation magnitude, not a tail probability; it cannot join a tail report",
                req.spec.kind_name()
            )));
        }
    }

    let (z, mode) = match &config.target {
        TailTarget::Single(a) => {
            let z = centered_qform_samples(a, &config.sampler, config.n_samples, config.seed)?;
            (z, CenterMode::Zero)
        }
        TailTarget::Family(fam) => {
            let draws = sample_stream(
                &config.sampler,
                config.seed,
                streams::SAMPLES,
                config.n_samples,
            );
            let z = (0..config.n_samples)
                .into_par_iter()
                .map(|i| sup_qform(fam, draws.row(i)))
                .collect::<Result<Vec<f64>>>()?;
            (z, CenterMode::Mean)
        }
    };
    let curve = empirical_tail(&z, &config.t_grid, config.confidence, mode)?;

    let mut outcomes = Vec::with_capacity(config.bounds.len());
    for req in &config.bounds {
        let outcome = if req.fit {
            let result = fit_constant(&curve, &req.spec)?;
            BoundOutcome {
                spec: req.spec.with_constant(result.constant_c)?,
                fitted: true,
                result,
            }
        } else {
            let spec = req.spec.clone().validated()?;
            let margin = min_slack(&curve, &spec);
            BoundOutcome {
                result: FitResult {
                    constant_c: spec.constant(),
                    feasible: margin >= 0.0,
                    margin,
                },
                spec,
                fitted: false,
            }
        };
        outcomes.push(outcome);
    }

    let config_echo = json!({
        "target": config.target.describe(),
        "sampler": config.sampler.describe(),
        "n_samples": config.n_samples,
        "seed": config.seed,
        "t_grid": config.t_grid.iter().map(|t| fmt17(*t)).collect::<Vec<_>>(),
        "confidence": fmt17(config.confidence),
    });

    Ok(TailReport {
        curve,
        outcomes,
        seed: config.seed,
        config_echo,
    })
}
