//! Randomized structural invariants. Each property here must hold for
//! every valid input, not just for tuned examples: monotonicity of the
//! bounds in the threshold and in the constant, exact behavior under
//! power-of-two rescaling (which is lossless in binary floating point),
//! bit-exact text round-trips, and shape constraints on empirical tail
//! curves. Counterexamples shrink to minimal failing inputs.

use hwlab::bounds::{kl_deviation, median_mean_gap, quantile_lower_bound};
use hwlab::montecarlo::{constant_grid, empirical_tail, fit_constant, CenterMode};
use hwlab::rng::CounterRng;
use hwlab::{BoundSpec, Matrix};
use proptest::prelude::*;

/// Any f64 bit pattern, with non-finite exponents masked down to the
/// subnormal range so every value is finite (sign and mantissa survive).
fn finite_f64() -> impl Strategy<Value = f64> {
    any::<u64>().prop_map(|bits| {
        let v = f64::from_bits(bits);
        if v.is_finite() {
            v
        } else {
            f64::from_bits(bits & !0x7ff0_0000_0000_0000)
        }
    })
}

/// A probability-valued bound spec with parameters in a range where no
/// intermediate under- or overflows.
fn prob_bound_spec() -> impl Strategy<Value = BoundSpec> {
    let scale = 1e-2f64..1e2;
    let kr = 0.1f64..4.0;
    let cr = 0.25f64..64.0;
    prop_oneof![
        (scale.clone(), 0.0f64..1.0, kr.clone(), cr.clone()).prop_map(|(hs, frac, k, c)| {
            BoundSpec::ClassicHw { hs, op: hs * frac.max(1e-3), k, c }
        }),
        (scale.clone(), scale.clone(), kr.clone(), 2usize..1000, cr.clone())
            .prop_map(|(hs, op, k, dim, c)| BoundSpec::VuWang { hs, op, k, dim, c }),
        (scale.clone(), scale.clone(), kr.clone(), 1e-2f64..1e2, cr.clone())
            .prop_map(|(hs, op, k, covnorm, c)| BoundSpec::ConvexHw { hs, op, k, covnorm, c }),
        (scale.clone(), scale.clone(), kr.clone(), cr.clone()).prop_map(
            |(family_norm, sup_op, k, c)| BoundSpec::UniformHw { family_norm, sup_op, k, c }
        ),
        (scale.clone(), scale, cr).prop_map(|(a, b, c)| BoundSpec::MixedTail { a, b, c }),
    ]
}

proptest! {
    /// Probability bounds start at their prefactor, never go negative,
    /// and never rise as the threshold grows.
    #[test]
    fn bounds_decay_from_the_prefactor(
        spec in prob_bound_spec(),
        t1 in 0.0f64..1e3,
        t2 in 0.0f64..1e3,
    ) {
        let spec = spec.validated().unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let at_zero = spec.eval_raw(0.0);
        let prefactor = match &spec {
            BoundSpec::VuWang { dim, c, .. } => c * (*dim as f64).ln(),
            _ => 2.0,
        };
        prop_assert!((at_zero - prefactor).abs() <= 1e-12 * prefactor);
        let (v_lo, v_hi) = (spec.eval_raw(lo), spec.eval_raw(hi));
        prop_assert!(v_lo >= 0.0 && v_hi >= 0.0);
        // The exponent pipeline is monotone operation by operation; the
        // final exp is allowed one rounding step.
        prop_assert!(
            v_hi <= v_lo * (1.0 + 1e-15) + 1e-320,
            "bound rose from {v_lo} to {v_hi} between t={lo} and t={hi}"
        );
        prop_assert!(v_lo <= at_zero);
    }

    /// A larger constant always weakens (raises) the bound.
    #[test]
    fn bounds_are_nondecreasing_in_the_constant(
        spec in prob_bound_spec(),
        t in 0.0f64..1e3,
        c1 in 0.25f64..64.0,
        c2 in 0.25f64..64.0,
    ) {
        let spec = spec.validated().unwrap();
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let tight = spec.with_constant(lo).unwrap().eval_raw(t);
        let loose = spec.with_constant(hi).unwrap().eval_raw(t);
        prop_assert!(tight <= loose * (1.0 + 1e-15));
    }

    /// With matched constants, unit covariance norm, and at least three
    /// dimensions, the convex-concentration bound is dominated by the
    /// dimension-penalized one everywhere.
    #[test]
    fn convex_bound_stays_below_vu_wang(
        hs in 1e-2f64..1e2,
        op_frac in 1e-3f64..1.0,
        k in 0.1f64..4.0,
        c in 2.0f64..64.0,
        dim in 3usize..2000,
        t in 0.0f64..1e3,
    ) {
        let op = hs * op_frac;
        let cx = BoundSpec::ConvexHw { hs, op, k, covnorm: 1.0, c }.validated().unwrap();
        let vw = BoundSpec::VuWang { hs, op, k, dim, c }.validated().unwrap();
        // Domination carries a prefactor margin of at least ln(3); the
        // allowance only absorbs rounding where both sides are subnormal.
        prop_assert!(cx.eval_raw(t) <= vw.eval_raw(t) * (1.0 + 1e-12) + 1e-300);
    }

    /// Rescaling threshold and both scale parameters by one power of two
    /// leaves the mixed-tail value bit-identical: binary scaling cancels
    /// exactly in both regime ratios.
    #[test]
    fn mixed_tail_is_invariant_under_binary_rescaling(
        a in 1e-2f64..1e2,
        b in 1e-2f64..1e2,
        c in 0.25f64..64.0,
        t in 0.0f64..1e3,
        exp in -8i32..=8,
    ) {
        let s = (exp as f64).exp2();
        let base = BoundSpec::MixedTail { a, b, c }.validated().unwrap();
        let scaled = BoundSpec::MixedTail { a: s * a, b: s * b, c }.validated().unwrap();
        prop_assert_eq!(base.eval_raw(t).to_bits(), scaled.eval_raw(s * t).to_bits());
    }

    /// The deviation threshold is exactly linear in the noise scale for
    /// power-of-two multipliers, grows with the tail parameter, and
    /// shrinks with the sample count.
    #[test]
    fn kl_deviation_scaling_and_monotonicity(
        sigma in 1e-2f64..1e2,
        r in 0.5f64..1e3,
        n in 2usize..100_000,
        t1 in 1.0f64..1e3,
        t2 in 1.0f64..1e3,
        c in 0.25f64..64.0,
        exp in -8i32..=8,
    ) {
        let s = (exp as f64).exp2();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let d_lo = kl_deviation(lo, sigma, r, n, c).unwrap();
        let d_hi = kl_deviation(hi, sigma, r, n, c).unwrap();
        prop_assert!(d_lo <= d_hi);
        let scaled = kl_deviation(lo, s * sigma, r, n, c).unwrap();
        prop_assert_eq!(scaled.to_bits(), (s * d_lo).to_bits());
        let more = kl_deviation(lo, sigma, r, n.saturating_mul(4), c).unwrap();
        prop_assert!(more <= d_lo);
    }

    /// The quantile floor rises with the quantile level, never exceeds
    /// the mean, and the median-mean gap limit is exactly linear under
    /// binary rescaling of its scales.
    #[test]
    fn scalar_lemma_formulas(
        mean in -1e3f64..1e3,
        k in 0.1f64..10.0,
        p1 in 1e-6f64..1.0,
        p2 in 1e-6f64..1.0,
        a in 1e-2f64..1e2,
        b in 1e-2f64..1e2,
        exp in -8i32..=8,
    ) {
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let q_lo = quantile_lower_bound(mean, k, lo).unwrap();
        let q_hi = quantile_lower_bound(mean, k, hi).unwrap();
        prop_assert!(q_lo <= q_hi);
        prop_assert!(q_hi <= mean);
        let s = (exp as f64).exp2();
        let gap = median_mean_gap(a, b).unwrap();
        let scaled = median_mean_gap(s * a, s * b).unwrap();
        prop_assert_eq!(scaled.to_bits(), (s * gap).to_bits());
    }

    /// The text format recovers every finite matrix bit for bit,
    /// including negative zero and subnormals.
    #[test]
    fn matrix_text_round_trip_is_bitwise(
        rows in 1usize..6,
        cols in 1usize..6,
        seed in proptest::collection::vec(finite_f64(), 36),
    ) {
        let data: Vec<f64> = seed.into_iter().take(rows * cols).collect();
        let a = Matrix::new(rows, cols, data).unwrap();
        let b = Matrix::from_text(&a.to_text()).unwrap();
        prop_assert_eq!((b.rows(), b.cols()), (rows, cols));
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    /// The counter generator is a pure function of (seed, stream,
    /// counter) with uniforms in the open unit interval, unit signs, and
    /// in-range indices.
    #[test]
    fn counter_rng_outputs_are_pure_and_in_range(
        seed in any::<u64>(),
        stream in any::<u64>(),
        counter in any::<u64>(),
        bound in 1u64..1_000_000,
    ) {
        let rng = CounterRng::new(seed, stream);
        let again = CounterRng::new(seed, stream);
        prop_assert_eq!(rng.u64_at(counter), again.u64_at(counter));
        let u = rng.uniform_at(counter);
        prop_assert!(0.0 < u && u < 1.0);
        prop_assert!(rng.normal_at(counter).is_finite());
        prop_assert!(rng.sign_at(counter).abs() == 1.0);
        prop_assert!(rng.index_at(counter, bound) < bound);
    }

    /// Empirical tail curves are survival functions: values in [0, 1],
    /// nonincreasing along the grid, with a correctly ordered band.
    #[test]
    fn empirical_tail_is_a_monotone_survival_curve(
        samples in proptest::collection::vec(-1e6f64..1e6, 100..300),
        grid_steps in proptest::collection::vec(1e-3f64..10.0, 1..40),
        confidence in 0.5f64..0.999,
    ) {
        let mut t = 0.0;
        let mut grid = Vec::with_capacity(grid_steps.len());
        for step in grid_steps {
            grid.push(t);
            t += step;
        }
        let curve = empirical_tail(&samples, &grid, confidence, CenterMode::Mean).unwrap();
        for i in 0..curve.len() {
            let s = curve.survival[i];
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(curve.band_lo(i) <= s && s <= curve.band_hi(i));
            if i > 0 {
                prop_assert!(s <= curve.survival[i - 1]);
            }
        }
    }

    /// The fitted constant is minimal on the grid: it dominates the
    /// curve's upper band everywhere, and the next smaller grid constant
    /// fails somewhere.
    #[test]
    fn fitted_constant_is_grid_minimal(
        samples in proptest::collection::vec(-10.0f64..10.0, 100..200),
        a in 0.1f64..10.0,
        b in 0.1f64..10.0,
    ) {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64).collect();
        let curve = empirical_tail(&samples, &grid, 0.99, CenterMode::Mean).unwrap();
        let spec = BoundSpec::MixedTail { a, b, c: 1.0 }.validated().unwrap();
        let fit = fit_constant(&curve, &spec).unwrap();
        let ladder = constant_grid();
        let pos = ladder.iter().position(|&c| c == fit.constant_c).unwrap();
        let dominates = |c: f64| -> bool {
            let s = spec.with_constant(c).unwrap();
            (0..curve.len()).all(|i| s.eval_raw(curve.t_grid[i]) >= curve.upper(i))
        };
        if fit.feasible {
            prop_assert!(dominates(fit.constant_c));
            if pos > 0 {
                prop_assert!(!dominates(ladder[pos - 1]));
            }
        } else {
            prop_assert_eq!(fit.constant_c, *ladder.last().unwrap());
            prop_assert!(!dominates(fit.constant_c));
        }
    }
}
