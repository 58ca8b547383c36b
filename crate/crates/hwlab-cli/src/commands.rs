//! One runner per subcommand. Each resolves its inputs (flags override
//! file values, defaults fill the rest), runs the library, and emits a
//! report plus sidecar. Runners return the process exit code; returning
//! `Err` means exit 2 or 3 depending on the error kind.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use hwlab::covest::{self, CovExperiment, Geometry, KlBasis};
use hwlab::distributions::{verify_concentration, CovarianceInfo};
use hwlab::envelope::{envelope_f_with_multiplier, phi, TruncationSet, WeightedQuadratic};
use hwlab::linalg::{eigh, hs_norm, op_norm, Matrix};
use hwlab::montecarlo::{
    empirical_tail, fit_mixed_tail, lemma_checks, run_tail_experiment, CenterMode, TailConfig,
    TailTarget,
};
use hwlab::quadform::{family_norm, load_family_dir, MatrixFamily};
use hwlab::report::{csv_line, fmt17};
use hwlab::Result;

use crate::configfile::{
    BoundSection, CovestSection, ExperimentSection, FileConfig, LemmasSection, SamplerSection,
    VerifySection,
};
use crate::output::{emit, Format};
use crate::resolve::{
    build_bound_request, build_sampler, invalid, read_vector, resolve_grid, resolve_matrix,
    BoundContext,
};

pub struct RunContext {
    pub file: FileConfig,
    pub seed_flag: Option<u64>,
    pub output_dir: PathBuf,
    pub format: Format,
    pub build_info: &'static str,
}

impl RunContext {
    fn seed(&self) -> u64 {
        self.seed_flag
            .or(self.experiment().seed)
            .unwrap_or(0)
    }

    fn experiment(&self) -> ExperimentSection {
        self.file.experiment.clone().unwrap_or_default()
    }
}

/// Sampler flags shared by the subcommands that draw samples.
#[derive(Args, Clone, Default)]
pub struct SamplerFlags {
    /// Sampler kind (default standard-gaussian).
    #[arg(long)]
    pub sampler: Option<String>,
    /// Sampler dimension (defaults to the target's when determined).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Concentration constant override.
    #[arg(long = "K")]
    pub constant: Option<f64>,
    /// Covariance matrix text file (gaussian-with-cov).
    #[arg(long)]
    pub cov_file: Option<PathBuf>,
    /// Coordinate half-width (bounded-product).
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Population values file (sampling-without-replacement).
    #[arg(long)]
    pub population_file: Option<PathBuf>,
    /// Draws per sample (sampling-without-replacement).
    #[arg(long)]
    pub draws: Option<usize>,
    /// Ignore the analytic covariance and calibrate empirically.
    #[arg(long)]
    pub unknown_covariance: bool,
}

impl SamplerFlags {
    /// Flags override the `[sampler]` section.
    fn merged(&self, file: Option<&SamplerSection>) -> SamplerSection {
        let base = file.cloned().unwrap_or_default();
        SamplerSection {
            kind: self.sampler.clone().or(base.kind),
            dim: self.dim.or(base.dim),
            constant: self.constant.or(base.constant),
            cov_file: self.cov_file.clone().or(base.cov_file),
            half_width: self.half_width.or(base.half_width),
            population_file: self.population_file.clone().or(base.population_file),
            draws: self.draws.or(base.draws),
            unknown_covariance: if self.unknown_covariance {
                Some(true)
            } else {
                base.unknown_covariance
            },
        }
    }
}

/// Single-bound flags; they override the first `[[bound]]` section.
#[derive(Args, Clone, Default)]
pub struct BoundFlags {
    /// Bound kind: classic-hw, vu-wang, convex-hw, uniform-hw,
    /// mixed-tail, kl-deviation.
    #[arg(long)]
    pub kind: Option<String>,
    /// Hilbert-Schmidt norm parameter.
    #[arg(long)]
    pub hs: Option<f64>,
    /// Operator norm parameter.
    #[arg(long)]
    pub op: Option<f64>,
    /// Covariance operator-norm parameter (convex-hw).
    #[arg(long)]
    pub covnorm: Option<f64>,
    /// Constant C; omitted means fit from the data where data exist.
    #[arg(long = "C")]
    pub c: Option<f64>,
    /// Fit the constant even when C is given.
    #[arg(long)]
    pub fit: bool,
    /// Family norm parameter (uniform-hw).
    #[arg(long)]
    pub family_norm: Option<f64>,
    /// Supremum of member operator norms (uniform-hw).
    #[arg(long)]
    pub sup_op: Option<f64>,
    /// Gaussian-regime scale (mixed-tail).
    #[arg(long)]
    pub a: Option<f64>,
    /// Exponential-regime scale (mixed-tail).
    #[arg(long)]
    pub b: Option<f64>,
    /// Covariance operator norm (kl-deviation).
    #[arg(long)]
    pub sigma_norm: Option<f64>,
    /// Effective rank (kl-deviation).
    #[arg(long)]
    pub effective_rank: Option<f64>,
    /// Samples per covariance estimate (kl-deviation).
    #[arg(long)]
    pub n: Option<usize>,
}

impl BoundFlags {
    fn is_empty(&self) -> bool {
        self.kind.is_none()
            && self.hs.is_none()
            && self.op.is_none()
            && self.covnorm.is_none()
            && self.c.is_none()
            && !self.fit
            && self.family_norm.is_none()
            && self.sup_op.is_none()
            && self.a.is_none()
            && self.b.is_none()
            && self.sigma_norm.is_none()
            && self.effective_rank.is_none()
            && self.n.is_none()
    }

    fn merged(&self, file: Option<&BoundSection>) -> BoundSection {
        let base = file.cloned().unwrap_or_default();
        BoundSection {
            kind: self.kind.clone().or(base.kind),
            hs: self.hs.or(base.hs),
            op: self.op.or(base.op),
            k: base.k,
            covnorm: self.covnorm.or(base.covnorm),
            c: self.c.or(base.c),
            fit: if self.fit { Some(true) } else { base.fit },
            dim: base.dim,
            family_norm: self.family_norm.or(base.family_norm),
            sup_op: self.sup_op.or(base.sup_op),
            a: self.a.or(base.a),
            b: self.b.or(base.b),
            sigma_norm: self.sigma_norm.or(base.sigma_norm),
            effective_rank: self.effective_rank.or(base.effective_rank),
            n: self.n.or(base.n),
        }
    }
}

// ---------------------------------------------------------------- bound

#[derive(Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub bound: BoundFlags,
    /// Bound-specific concentration constant K.
    #[arg(long = "K")]
    pub k: Option<f64>,
    /// Matrix dimension (vu-wang).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Threshold grid: start:stop:step or a comma list.
    #[arg(long)]
    pub t_grid: Option<String>,
}

pub fn run_bound(ctx: &RunContext, args: &BoundArgs) -> Result<i32> {
    let mut section = args.bound.merged(ctx.file.first_bound());
    section.k = args.k.or(section.k);
    section.dim = args.dim.or(section.dim);
    let request = build_bound_request(&section, &BoundContext::default())?;
    let spec = request.spec;

    let t_grid = resolve_grid(
        args.t_grid.as_deref(),
        ctx.experiment().t_grid.as_ref(),
        "0:10:0.1",
    )?;
    if t_grid.is_empty() {
        return Err(invalid("t-grid is empty"));
    }
    if !spec.is_probability() {
        if let Some(&bad) = t_grid.iter().find(|&&t| t < 1.0) {
            return Err(invalid(format!(
                "kl-deviation is defined for t >= 1, grid has {bad}"
            )));
        }
    }

    let mut csv = csv_line(&["t".into(), "bound".into()]);
    for &t in &t_grid {
        csv.push_str(&csv_line(&[fmt17(t), fmt17(spec.eval_raw(t))]));
    }
    let sidecar = json!({
        "subcommand": "bound",
        "spec": spec.describe(),
        "t_grid": t_grid.iter().map(|t| fmt17(*t)).collect::<Vec<_>>(),
        "build": ctx.build_info,
    });
    let path = emit(&ctx.output_dir, "bound", ctx.format, &csv, &sidecar)?;
    println!("wrote {}", path.display());
    Ok(0)
}

// ----------------------------------------------------------------- tail

#[derive(Args)]
pub struct TailArgs {
    /// Named matrix, e.g. identity16.
    #[arg(long)]
    pub matrix: Option<String>,
    /// Matrix text file (first line "rows cols", one row per line).
    #[arg(long)]
    pub matrix_file: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// Number of samples.
    #[arg(long = "N", visible_alias = "n-samples")]
    pub n_samples: Option<usize>,
    /// DKW band confidence (default 0.99).
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Threshold grid: start:stop:step or a comma list.
    #[arg(long)]
    pub t_grid: Option<String>,
    #[command(flatten)]
    pub bound: BoundFlags,
}

fn covnorm_from(sampler: &hwlab::distributions::Sampler) -> Result<Option<f64>> {
    match sampler.covariance() {
        CovarianceInfo::Known(cov) => {
            let split = eigh(cov, 1e-12)?;
            Ok(Some(split.eigenvalues.first().copied().unwrap_or(0.0).max(0.0)))
        }
        CovarianceInfo::Unknown => Ok(None),
    }
}

pub fn run_tail(ctx: &RunContext, args: &TailArgs) -> Result<i32> {
    let matrix_section = ctx.file.matrix.clone().unwrap_or_default();
    let matrix = resolve_matrix(
        args.matrix.as_deref().or(matrix_section.name.as_deref()),
        args.matrix_file
            .as_deref()
            .or(matrix_section.file.as_deref()),
    )?;
    let sampler = build_sampler(
        &args.sampler.merged(ctx.file.sampler.as_ref()),
        Some(matrix.rows()),
    )?;

    let experiment = ctx.experiment();
    let n_samples = args.n_samples.or(experiment.n_samples).unwrap_or(100_000);
    let confidence = args.confidence.or(experiment.confidence).unwrap_or(0.99);
    let t_grid = resolve_grid(
        args.t_grid.as_deref(),
        experiment.t_grid.as_ref(),
        "0:40:0.5",
    )?;

    let bound_ctx = BoundContext {
        hs: Some(hs_norm(&matrix)),
        op: Some(op_norm(&matrix, 1e-10)?),
        dim: Some(matrix.rows()),
        k: Some(sampler.constant()),
        covnorm: covnorm_from(&sampler)?,
        ..Default::default()
    };
    let mut sections: Vec<BoundSection> = ctx.file.bound.clone();
    if !args.bound.is_empty() {
        let merged = args.bound.merged(None);
        if sections.is_empty() {
            sections.push(merged);
        } else {
            sections[0] = args.bound.merged(Some(&sections[0]));
        }
    }
    let bounds = sections
        .iter()
        .map(|sec| build_bound_request(sec, &bound_ctx))
        .collect::<Result<Vec<_>>>()?;

    let config = TailConfig {
        target: TailTarget::Single(matrix),
        sampler,
        n_samples,
        seed: ctx.seed(),
        t_grid,
        confidence,
        bounds,
    };
    let report = run_tail_experiment(&config)?;
    let sidecar = report.metadata_json(ctx.build_info);
    let path = emit(
        &ctx.output_dir,
        "tail",
        ctx.format,
        &report.to_csv(),
        &sidecar,
    )?;
    println!("wrote {}", path.display());
    Ok(0)
}

// ---------------------------------------------------------- uniform-tail

#[derive(Args)]
pub struct UniformTailArgs {
    /// Directory holding the family's matrix text files.
    #[arg(long)]
    pub family_dir: Option<PathBuf>,
    /// Manifest file name inside the family directory.
    #[arg(long)]
    pub manifest: Option<String>,
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// Number of samples for the tail curve.
    #[arg(long = "N", visible_alias = "n-samples")]
    pub n_samples: Option<usize>,
    /// DKW band confidence (default 0.99).
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Threshold grid: start:stop:step or a comma list.
    #[arg(long)]
    pub t_grid: Option<String>,
    /// Monte Carlo draws for the family-norm estimate.
    #[arg(long)]
    pub family_norm_samples: Option<usize>,
    #[command(flatten)]
    pub bound: BoundFlags,
}

pub fn run_uniform_tail(ctx: &RunContext, args: &UniformTailArgs) -> Result<i32> {
    let family_section = ctx.file.family.clone().unwrap_or_default();
    let dir = args
        .family_dir
        .clone()
        .or(family_section.dir)
        .ok_or_else(|| invalid("a family directory is required (--family-dir)"))?;
    let manifest = args
        .manifest
        .clone()
        .or(family_section.manifest)
        .unwrap_or_else(|| "manifest.txt".to_string());
    let (members, explicit_centers) = load_family_dir(&dir, &manifest)?;
    let dim = members[0].rows();
    let member_count = members.len();

    let sampler = build_sampler(&args.sampler.merged(ctx.file.sampler.as_ref()), Some(dim))?;
    let seed = ctx.seed();

    let given = explicit_centers.iter().filter(|c| c.is_some()).count();
    let mut centering = "explicit";
    let family = if given == explicit_centers.len() {
        MatrixFamily::new(members, explicit_centers.into_iter().flatten().collect())?
    } else if given > 0 {
        return Err(invalid(
            "manifest centers must be given for all members or none",
        ));
    } else if matches!(sampler.covariance(), CovarianceInfo::Known(_)) {
        centering = "analytic";
        MatrixFamily::with_analytic_centers(members, &sampler)?
    } else {
        centering = "calibrated";
        let n_cal = family_section.calibration_samples.unwrap_or(10_000);
        MatrixFamily::with_calibrated_centers(members, &sampler, n_cal, seed)?
    };

    let (fnorm, fnorm_se) = match args.bound.family_norm {
        Some(v) => (v, None),
        None => {
            let n_mc = args
                .family_norm_samples
                .or(family_section.family_norm_samples)
                .unwrap_or(100_000);
            let (est, se) = family_norm(&family, &sampler, n_mc, seed)?;
            (est, Some(se))
        }
    };
    let sup_op = match args.bound.sup_op {
        Some(v) => v,
        None => family.sup_opnorm(1e-10)?,
    };

    let bound_ctx = BoundContext {
        k: Some(sampler.constant()),
        family_norm: Some(fnorm),
        sup_op: Some(sup_op),
        dim: Some(dim),
        ..Default::default()
    };
    let mut sections: Vec<BoundSection> = ctx.file.bound.clone();
    if sections.is_empty() {
        let mut sec = args.bound.merged(None);
        sec.kind = sec.kind.or(Some("uniform-hw".to_string()));
        sections.push(sec);
    } else if !args.bound.is_empty() {
        sections[0] = args.bound.merged(Some(&sections[0]));
    }
    let bounds = sections
        .iter()
        .map(|sec| build_bound_request(sec, &bound_ctx))
        .collect::<Result<Vec<_>>>()?;

    let experiment = ctx.experiment();
    let config = TailConfig {
        target: TailTarget::Family(family),
        sampler,
        n_samples: args.n_samples.or(experiment.n_samples).unwrap_or(100_000),
        seed,
        t_grid: resolve_grid(
            args.t_grid.as_deref(),
            experiment.t_grid.as_ref(),
            "0:40:0.5",
        )?,
        confidence: args.confidence.or(experiment.confidence).unwrap_or(0.99),
        bounds,
    };
    let report = run_tail_experiment(&config)?;

    let mut sidecar = report.metadata_json(ctx.build_info);
    sidecar.as_object_mut().expect("metadata is an object").insert(
        "family".to_string(),
        json!({
            "dir": dir.display().to_string(),
            "manifest": manifest,
            "members": member_count,
            "centering": centering,
            "family_norm": fmt17(fnorm),
            "family_norm_std_error": fnorm_se.map(fmt17),
            "sup_opnorm": fmt17(sup_op),
        }),
    );
    let path = emit(
        &ctx.output_dir,
        "uniform-tail",
        ctx.format,
        &report.to_csv(),
        &sidecar,
    )?;
    println!("wrote {}", path.display());
    Ok(0)
}

// -------------------------------------------------------------- envelope

#[derive(Args)]
pub struct EnvelopeArgs {
    /// Weight vector file (whitespace-separated nonnegative floats).
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
    /// Truncation radius R.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Tail parameter for the moment-based radius.
    #[arg(long)]
    pub t: Option<f64>,
    /// Second-moment vector file for the moment-based radius.
    #[arg(long)]
    pub second_moments_file: Option<PathBuf>,
    /// Evaluation point file.
    #[arg(long)]
    pub point_file: Option<PathBuf>,
    /// Constraint residual tolerance, relative to R.
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn run_envelope(ctx: &RunContext, args: &EnvelopeArgs) -> Result<i32> {
    let section = ctx.file.envelope.clone().unwrap_or_default();
    let weights_path = args
        .weights_file
        .clone()
        .or(section.weights_file)
        .ok_or_else(|| invalid("a weight vector is required (--weights-file)"))?;
    let point_path = args
        .point_file
        .clone()
        .or(section.point_file)
        .ok_or_else(|| invalid("an evaluation point is required (--point-file)"))?;
    let weights = WeightedQuadratic::new(read_vector(&weights_path)?)?;
    let y = read_vector(&point_path)?;

    let radius = args.radius.or(section.radius);
    let t = args.t.or(section.t);
    let moments_path = args
        .second_moments_file
        .clone()
        .or(section.second_moments_file);
    let set = match (radius, t, &moments_path) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(invalid(
                "give either --radius or (--t and --second-moments-file), not both",
            ))
        }
        (Some(r), None, None) => TruncationSet::with_radius(&weights, r)?,
        (None, Some(t), Some(path)) => {
            TruncationSet::from_moments(&weights, &read_vector(path)?, t)?
        }
        (None, _, _) => {
            return Err(invalid(
                "a truncation set is required: --radius R, or --t T with --second-moments-file",
            ))
        }
    };

    let tol = args.tol.or(section.tol).unwrap_or(1e-10);
    let phi_value = phi(&weights, &y)?;
    let inside = set.contains(&y)?;
    let (f_value, nu) = envelope_f_with_multiplier(&weights, &set, &y, tol)?;

    println!("phi = {}", fmt17(phi_value));
    println!("f = {}", fmt17(f_value));
    println!("inside = {inside}");
    println!("nu = {}", fmt17(nu));

    let mut csv = csv_line(&["phi".into(), "f".into(), "inside".into(), "nu".into()]);
    csv.push_str(&csv_line(&[
        fmt17(phi_value),
        fmt17(f_value),
        inside.to_string(),
        fmt17(nu),
    ]));
    let sidecar = json!({
        "subcommand": "envelope",
        "weights": weights.weights().iter().map(|w| fmt17(*w)).collect::<Vec<_>>(),
        "radius": fmt17(set.radius()),
        "radius_provenance": set.provenance().map(|(sum, t)| json!({
            "weighted_second_moment_sum": fmt17(sum),
            "t": fmt17(t),
        })),
        "lipschitz_constant": fmt17(set.lipschitz_constant()),
        "point": y.iter().map(|v| fmt17(*v)).collect::<Vec<_>>(),
        "tol": fmt17(tol),
        "phi": fmt17(phi_value),
        "f": fmt17(f_value),
        "inside": inside,
        "nu": fmt17(nu),
        "build": ctx.build_info,
    });
    let path = emit(&ctx.output_dir, "envelope", ctx.format, &csv, &sidecar)?;
    println!("wrote {}", path.display());
    Ok(0)
}

// ---------------------------------------------------------------- covest

#[derive(Args)]
pub struct CovestArgs {
    /// Basis matrix text file; rows are the expansion vectors.
    #[arg(long)]
    pub basis_file: Option<PathBuf>,
    /// Named basis, e.g. identity20 (standard basis of R^20).
    #[arg(long)]
    pub basis: Option<String>,
    /// Geometry: euclidean or sup.
    #[arg(long)]
    pub geometry: Option<String>,
    /// Samples per covariance estimate.
    #[arg(long)]
    pub n: Option<usize>,
    /// Independent replications.
    #[arg(long = "R", visible_alias = "replications")]
    pub replications: Option<usize>,
    /// Tail parameters (comma list), each at least 1.
    #[arg(long)]
    pub t_values: Option<String>,
    /// Fixed constant C; omitted means fit from the grid.
    #[arg(long = "C")]
    pub constant: Option<f64>,
}

fn parse_geometry(name: &str) -> Result<Geometry> {
    match name {
        "euclidean" => Ok(Geometry::Euclidean),
        "sup" => Ok(Geometry::Sup),
        other => Err(invalid(format!(
            "unknown geometry {other:?} (euclidean, sup)"
        ))),
    }
}

pub fn run_covest(ctx: &RunContext, args: &CovestArgs) -> Result<i32> {
    let section: CovestSection = ctx.file.covest.clone().unwrap_or_default();
    let basis_name = args.basis.as_deref().or(section.basis.as_deref());
    let basis_file = args.basis_file.as_deref().or(section.basis_file.as_deref());
    let (basis, basis_echo) = match (basis_name, basis_file) {
        (Some(_), Some(_)) => {
            return Err(invalid("give a basis name or a basis file, not both"))
        }
        (Some(name), None) => {
            let d: usize = name
                .strip_prefix("identity")
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| invalid(format!("unknown basis name {name:?} (identityN)")))?;
            (KlBasis::standard(d)?, json!({ "name": name }))
        }
        (None, Some(path)) => {
            let m = Matrix::from_text_file(path)?;
            let vectors = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
            (
                KlBasis::new(vectors)?,
                json!({ "file": path.display().to_string() }),
            )
        }
        (None, None) => {
            return Err(invalid(
                "a basis is required: --basis identityN or --basis-file FILE",
            ))
        }
    };

    let geometry = parse_geometry(
        args.geometry
            .as_deref()
            .or(section.geometry.as_deref())
            .unwrap_or("euclidean"),
    )?;
    let config = CovExperiment {
        basis,
        geometry,
        n: args
            .n
            .or(section.n)
            .ok_or_else(|| invalid("covest needs n (samples per estimate)"))?,
        replications: args.replications.or(section.replications).unwrap_or(200),
        seed: ctx.seed(),
        t_values: resolve_grid(args.t_values.as_deref(), section.t_values.as_ref(), "1,2,3")?,
        constant: args.constant.or(section.constant),
    };
    for &t in &config.t_values {
        if (config.replications as f64) * (-t).exp() < 20.0 {
            eprintln!(
                "warning: t = {t} is under-resolved at R = {}; the quantile row is marked unresolved",
                config.replications
            );
        }
    }
    let report = covest::deviation_experiment(&config)?;
    let mut sidecar = report.metadata_json(ctx.build_info);
    sidecar
        .as_object_mut()
        .expect("metadata is an object")
        .insert("basis".to_string(), basis_echo);
    let path = emit(
        &ctx.output_dir,
        "covest",
        ctx.format,
        &report.to_csv(),
        &sidecar,
    )?;
    println!("wrote {}", path.display());
    Ok(0)
}

// --------------------------------------------------- verify-concentration

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// Random convex 1-Lipschitz test functions to draw.
    #[arg(long)]
    pub n_functions: Option<usize>,
    /// Number of samples.
    #[arg(long = "N", visible_alias = "n-samples")]
    pub n_samples: Option<usize>,
    /// Threshold grid: start:stop:step or a comma list.
    #[arg(long)]
    pub t_grid: Option<String>,
}

pub fn run_verify(ctx: &RunContext, args: &VerifyArgs) -> Result<i32> {
    let section: VerifySection = ctx.file.verify.clone().unwrap_or_default();
    let sampler = build_sampler(&args.sampler.merged(ctx.file.sampler.as_ref()), None)?;
    let n_functions = args.n_functions.or(section.n_functions).unwrap_or(200);
    let n_samples = args.n_samples.or(section.n_samples).unwrap_or(10_000);
    let t_grid = resolve_grid(args.t_grid.as_deref(), section.t_grid.as_ref(), "0:8:0.25")?;
    let seed = ctx.seed();

    let report = verify_concentration(&sampler, n_functions, n_samples, seed, &t_grid)?;

    let mut csv = csv_line(&[
        "function_index".into(),
        "threshold".into(),
        "empirical_survival".into(),
        "certified_lower".into(),
        "declared_bound".into(),
    ]);
    for v in &report.violations {
        csv.push_str(&csv_line(&[
            v.function_index.to_string(),
            fmt17(v.threshold),
            fmt17(v.empirical_survival),
            fmt17(v.certified_lower),
            fmt17(v.declared_bound),
        ]));
    }
    let sidecar = json!({
        "subcommand": "verify-concentration",
        "sampler": sampler.describe(),
        "n_functions": report.functions_checked,
        "n_samples": report.n_samples,
        "seed": seed,
        "constant": fmt17(report.constant),
        "band_halfwidth": fmt17(report.band_halfwidth),
        "t_grid": t_grid.iter().map(|t| fmt17(*t)).collect::<Vec<_>>(),
        "clean": report.is_clean(),
        "violations": report.violations.iter().map(|v| json!({
            "function": v.function,
            "function_index": v.function_index,
            "threshold": fmt17(v.threshold),
            "empirical_survival": fmt17(v.empirical_survival),
            "certified_lower": fmt17(v.certified_lower),
            "declared_bound": fmt17(v.declared_bound),
        })).collect::<Vec<_>>(),
        "build": ctx.build_info,
    });
    let path = emit(
        &ctx.output_dir,
        "verify-concentration",
        ctx.format,
        &csv,
        &sidecar,
    )?;
    println!("wrote {}", path.display());
    if report.is_clean() {
        Ok(0)
    } else {
        eprintln!(
            "concentration violation: {} certified excess(es) over the declared bound",
            report.violations.len()
        );
        Ok(4)
    }
}

// ---------------------------------------------------------------- lemmas

#[derive(Args)]
pub struct LemmasArgs {
    /// Scalar samples file; mutually exclusive with the sampler flags.
    #[arg(long)]
    pub samples_file: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerFlags,
    /// Number of samples when drawing from a sampler.
    #[arg(long = "N", visible_alias = "n-samples")]
    pub n_samples: Option<usize>,
    /// Probability grid for the quantile checks (comma list).
    #[arg(long)]
    pub p_grid: Option<String>,
    /// Gaussian-regime scale; fitted together with b when both absent.
    #[arg(long)]
    pub a: Option<f64>,
    /// Exponential-regime scale; fitted together with a when both absent.
    #[arg(long)]
    pub b: Option<f64>,
}

pub fn run_lemmas(ctx: &RunContext, args: &LemmasArgs) -> Result<i32> {
    let section: LemmasSection = ctx.file.lemmas.clone().unwrap_or_default();
    let samples_path = args.samples_file.clone().or(section.samples_file);
    let seed = ctx.seed();

    let (samples, k, source_echo) = match samples_path {
        Some(path) => {
            let samples = read_vector(&path)?;
            let k = args
                .sampler
                .constant
                .or(section.k)
                .ok_or_else(|| invalid("--K is required with --samples-file"))?;
            (
                samples,
                k,
                json!({ "samples_file": path.display().to_string() }),
            )
        }
        None => {
            let sampler = build_sampler(&args.sampler.merged(ctx.file.sampler.as_ref()), None)?;
            let n = args.n_samples.or(section.n_samples).unwrap_or(100_000);
            let draws = hwlab::distributions::sample(&sampler, seed, n);
            // The scalar under test is the first coordinate, a 1-Lipschitz
            // functional of the sampled vector.
            let samples: Vec<f64> = (0..n).map(|i| draws.get(i, 0)).collect();
            let k = section.k.unwrap_or(sampler.constant());
            (
                samples,
                k,
                json!({
                    "sampler": sampler.describe(),
                    "n_samples": n,
                    "seed": seed,
                    "coordinate": 0,
                }),
            )
        }
    };

    let p_grid = resolve_grid(
        args.p_grid.as_deref(),
        section.p_grid.as_ref(),
        "0.01,0.05,0.1,0.25,0.5",
    )?;

    let (a, b, fitted) = match (args.a.or(section.a), args.b.or(section.b)) {
        (Some(a), Some(b)) => (a, b, false),
        (None, None) => {
            let nf = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / nf;
            let max_dev = samples
                .iter()
                .map(|x| (x - mean).abs())
                .fold(0.0f64, f64::max);
            let grid: Vec<f64> = if max_dev > 0.0 {
                (0..=80).map(|i| i as f64 * max_dev / 80.0).collect()
            } else {
                vec![0.0]
            };
            let curve = empirical_tail(&samples, &grid, 0.99, CenterMode::Mean)?;
            let (a, b) = fit_mixed_tail(&curve)?;
            (a, b, true)
        }
        _ => return Err(invalid("give both --a and --b, or neither (fitted)")),
    };

    let report = lemma_checks(&samples, k, &p_grid, a, b)?;

    let mut csv = csv_line(&[
        "check".into(),
        "param".into(),
        "empirical".into(),
        "bound".into(),
        "allowance".into(),
        "pass".into(),
    ]);
    for q in &report.quantile_checks {
        csv.push_str(&csv_line(&[
            "quantile".into(),
            fmt17(q.p),
            fmt17(q.empirical_quantile),
            fmt17(q.lower_bound),
            fmt17(q.allowance),
            q.pass.to_string(),
        ]));
    }
    let g = &report.gap_check;
    csv.push_str(&csv_line(&[
        "gap".into(),
        fmt17(0.5),
        fmt17(g.gap),
        fmt17(g.limit),
        fmt17(g.allowance),
        g.pass.to_string(),
    ]));

    let sidecar = json!({
        "subcommand": "lemmas",
        "source": source_echo,
        "n_samples": report.n_samples,
        "k": fmt17(k),
        "a": fmt17(a),
        "b": fmt17(b),
        "fitted_mixed_tail": fitted,
        "band_halfwidth": fmt17(report.band_halfwidth),
        "p_grid": p_grid.iter().map(|p| fmt17(*p)).collect::<Vec<_>>(),
        "mean": fmt17(g.mean),
        "median": fmt17(g.median),
        "clean": report.is_clean(),
        "build": ctx.build_info,
    });
    let path = emit(&ctx.output_dir, "lemmas", ctx.format, &csv, &sidecar)?;
    println!("wrote {}", path.display());
    if report.is_clean() {
        Ok(0)
    } else {
        eprintln!("lemma check violation: a certified failure is recorded in the report");
        Ok(4)
    }
}
