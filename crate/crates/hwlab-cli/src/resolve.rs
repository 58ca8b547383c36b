//! Turns merged config values into library objects: grids, matrices,
//! samplers, and bound specs.

use std::path::Path;

use hwlab::bounds::BoundSpec;
use hwlab::distributions::Sampler;
use hwlab::linalg::{self, Matrix};
use hwlab::montecarlo::BoundRequest;
use hwlab::{Error, Result};

use crate::configfile::{BoundSection, GridSpec, SamplerSection};

pub fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

/// Grid cardinality guard; a step mistake should error, not allocate
/// gigabytes.
const MAX_GRID_POINTS: usize = 10_000_000;

/// Parses `"start:stop:step"` (inclusive endpoints, within one part in
/// 1e9 of a step) or a comma-separated list.
pub fn parse_grid_expr(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!(
                "grid expression must be start:stop:step, got {s:?}"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad number {p:?} in grid {s:?}")))
            })
            .collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("grid step must be positive, got {step}")));
        }
        if !(stop >= start) {
            return Err(invalid(format!(
                "grid stop {stop} must not precede start {start}"
            )));
        }
        let count = ((stop - start) / step).floor() as usize + 2;
        if count > MAX_GRID_POINTS {
            return Err(invalid(format!("grid would hold over {MAX_GRID_POINTS} points")));
        }
        let mut grid = Vec::new();
        for k in 0..count {
            let t = start + k as f64 * step;
            if t > stop + step * 1e-9 {
                break;
            }
            grid.push(t);
        }
        Ok(grid)
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad number {p:?} in grid list")))
            })
            .collect()
    }
}

pub fn resolve_grid(flag: Option<&str>, file: Option<&GridSpec>, default: &str) -> Result<Vec<f64>> {
    if let Some(expr) = flag {
        return parse_grid_expr(expr);
    }
    match file {
        Some(GridSpec::Expr(expr)) => parse_grid_expr(expr),
        Some(GridSpec::List(v)) => Ok(v.clone()),
        None => parse_grid_expr(default),
    }
}

/// `identityN` is the only named matrix; everything else comes from
/// files.
pub fn named_matrix(name: &str) -> Result<Matrix> {
    if let Some(d) = name.strip_prefix("identity") {
        let d: usize = d
            .parse()
            .map_err(|_| invalid(format!("bad dimension in matrix name {name:?}")))?;
        if d == 0 {
            return Err(invalid("matrix dimension must be positive"));
        }
        return Ok(Matrix::identity(d));
    }
    Err(invalid(format!(
        "unknown matrix name {name:?} (named matrices: identityN)"
    )))
}

pub fn resolve_matrix(name: Option<&str>, file: Option<&Path>) -> Result<Matrix> {
    match (name, file) {
        (Some(_), Some(_)) => Err(invalid("give a matrix name or a matrix file, not both")),
        (Some(n), None) => named_matrix(n),
        (None, Some(p)) => Matrix::from_text_file(p),
        (None, None) => Err(invalid(
            "a matrix is required: --matrix identityN or --matrix-file FILE",
        )),
    }
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    linalg::parse_vector(&text)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Builds a sampler from the merged section. `dim_hint` supplies the
/// dimension when the experiment's target already determines it.
pub fn build_sampler(sec: &SamplerSection, dim_hint: Option<usize>) -> Result<Sampler> {
    let kind = sec.kind.as_deref().unwrap_or("standard-gaussian");
    let need_dim = || {
        sec.dim
            .or(dim_hint)
            .ok_or_else(|| invalid("sampler needs a dimension (--dim)"))
    };
    let sampler = match kind {
        "standard-gaussian" | "gaussian" => Sampler::standard_gaussian(need_dim()?)?,
        "gaussian-with-cov" => {
            let path = sec
                .cov_file
                .as_ref()
                .ok_or_else(|| invalid("gaussian-with-cov needs --cov-file"))?;
            Sampler::gaussian_with_cov(Matrix::from_text_file(path)?)?
        }
        "rademacher-product" | "rademacher" => Sampler::rademacher_product(need_dim()?)?,
        "bounded-product" | "bounded" => {
            let hw = sec
                .half_width
                .ok_or_else(|| invalid("bounded-product needs --half-width"))?;
            Sampler::bounded_product(need_dim()?, hw)?
        }
        "sampling-without-replacement" | "swor" => {
            let path = sec
                .population_file
                .as_ref()
                .ok_or_else(|| invalid("sampling-without-replacement needs --population-file"))?;
            let population = read_vector(path)?;
            let draws = sec
                .draws
                .or(sec.dim)
                .or(dim_hint)
                .ok_or_else(|| invalid("sampling-without-replacement needs --draws"))?;
            Sampler::sampling_without_replacement(population, draws)?
        }
        other => {
            return Err(invalid(format!(
                "unknown sampler kind {other:?} (standard-gaussian, gaussian-with-cov, \
                 rademacher-product, bounded-product, sampling-without-replacement)"
            )))
        }
    };
    let sampler = match sec.constant {
        Some(k) => sampler.with_constant(k)?,
        None => sampler,
    };
    Ok(if sec.unknown_covariance == Some(true) {
        sampler.with_unknown_covariance()
    } else {
        sampler
    })
}

/// Context-supplied defaults for bound parameters the experiment can
/// compute itself.
#[derive(Default)]
pub struct BoundContext {
    pub hs: Option<f64>,
    pub op: Option<f64>,
    pub dim: Option<usize>,
    pub k: Option<f64>,
    pub covnorm: Option<f64>,
    pub family_norm: Option<f64>,
    pub sup_op: Option<f64>,
}

/// Builds one bound request; `c` absent means fit from the data.
pub fn build_bound_request(sec: &BoundSection, ctx: &BoundContext) -> Result<BoundRequest> {
    let kind = sec
        .kind
        .as_deref()
        .ok_or_else(|| invalid("bound needs a kind"))?;
    let pick = |given: Option<f64>, fallback: Option<f64>, what: &str| {
        given
            .or(fallback)
            .ok_or_else(|| invalid(format!("bound kind {kind:?} needs {what}")))
    };
    let (c, fit) = match sec.c {
        Some(c) => (c, sec.fit.unwrap_or(false)),
        None => (1.0, true),
    };
    let spec = match kind {
        "classic-hw" => BoundSpec::ClassicHw {
            hs: pick(sec.hs, ctx.hs, "hs")?,
            op: pick(sec.op, ctx.op, "op")?,
            k: pick(sec.k, ctx.k, "K")?,
            c,
        },
        "vu-wang" => BoundSpec::VuWang {
            hs: pick(sec.hs, ctx.hs, "hs")?,
            op: pick(sec.op, ctx.op, "op")?,
            k: pick(sec.k, ctx.k, "K")?,
            dim: sec
                .dim
                .or(ctx.dim)
                .ok_or_else(|| invalid("vu-wang needs dim"))?,
            c,
        },
        "convex-hw" => BoundSpec::ConvexHw {
            hs: pick(sec.hs, ctx.hs, "hs")?,
            op: pick(sec.op, ctx.op, "op")?,
            k: pick(sec.k, ctx.k, "K")?,
            covnorm: pick(sec.covnorm, ctx.covnorm, "covnorm")?,
            c,
        },
        "uniform-hw" => BoundSpec::UniformHw {
            family_norm: pick(sec.family_norm, ctx.family_norm, "family-norm")?,
            sup_op: pick(sec.sup_op, ctx.sup_op, "sup-op")?,
            k: pick(sec.k, ctx.k, "K")?,
            c,
        },
        "mixed-tail" => BoundSpec::MixedTail {
            a: pick(sec.a, None, "a")?,
            b: pick(sec.b, None, "b")?,
            c,
        },
        "kl-deviation" => BoundSpec::KlDeviation {
            sigma_norm: pick(sec.sigma_norm, None, "sigma-norm")?,
            effective_rank: pick(sec.effective_rank, None, "effective-rank")?,
            n_samples: sec
                .n
                .ok_or_else(|| invalid("kl-deviation needs n (samples per estimate)"))?,
            c,
        },
        other => {
            return Err(invalid(format!(
                "unknown bound kind {other:?} (classic-hw, vu-wang, convex-hw, uniform-hw, \
                 mixed-tail, kl-deviation)"
            )))
        }
    };
    Ok(BoundRequest {
        spec: spec.validated()?,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expressions_cover_both_forms() {
        let g = parse_grid_expr("0:2:0.5").unwrap();
        assert_eq!(g, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let g = parse_grid_expr("1,2,3.5").unwrap();
        assert_eq!(g, vec![1.0, 2.0, 3.5]);
        let g = parse_grid_expr("0:40:0.5").unwrap();
        assert_eq!(g.len(), 81);
        assert_eq!(*g.last().unwrap(), 40.0);
        assert!(parse_grid_expr("0:1:0").is_err());
        assert!(parse_grid_expr("3:1:0.5").is_err());
        assert!(parse_grid_expr("0:1").is_err());
        assert!(parse_grid_expr("a,b").is_err());
    }

    #[test]
    fn named_matrices_are_identities() {
        let m = named_matrix("identity3").unwrap();
        assert_eq!(m.rows(), 3);
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert!(named_matrix("identity0").is_err());
        assert!(named_matrix("hilbert4").is_err());
    }

    #[test]
    fn sampler_kinds_resolve_with_aliases() {
        let sec = SamplerSection {
            kind: Some("gaussian".into()),
            ..Default::default()
        };
        let s = build_sampler(&sec, Some(4)).unwrap();
        assert_eq!(s.kind_name(), "standard-gaussian");
        assert_eq!(s.dim(), 4);

        let sec = SamplerSection {
            kind: Some("bounded".into()),
            dim: Some(2),
            half_width: Some(0.5),
            constant: Some(3.0),
            ..Default::default()
        };
        let s = build_sampler(&sec, None).unwrap();
        assert_eq!(s.kind_name(), "bounded-product");
        assert_eq!(s.constant(), 3.0);

        let sec = SamplerSection {
            kind: Some("nope".into()),
            ..Default::default()
        };
        assert!(build_sampler(&sec, Some(2)).is_err());
    }

    #[test]
    fn bound_requests_fill_from_context_and_default_to_fitting() {
        let sec = BoundSection {
            kind: Some("convex-hw".into()),
            ..Default::default()
        };
        let ctx = BoundContext {
            hs: Some(4.0),
            op: Some(1.0),
            k: Some(2f64.sqrt()),
            covnorm: Some(1.0),
            ..Default::default()
        };
        let req = build_bound_request(&sec, &ctx).unwrap();
        assert!(req.fit);
        assert_eq!(req.spec.kind_name(), "convex-hw");

        let sec = BoundSection {
            kind: Some("convex-hw".into()),
            c: Some(8.0),
            ..Default::default()
        };
        let req = build_bound_request(&sec, &ctx).unwrap();
        assert!(!req.fit);
        assert_eq!(req.spec.constant(), 8.0);

        let sec = BoundSection {
            kind: Some("classic-hw".into()),
            ..Default::default()
        };
        assert!(build_bound_request(&sec, &BoundContext::default()).is_err());
    }
}
