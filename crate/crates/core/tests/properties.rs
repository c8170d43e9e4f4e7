//! Property tests of invariants that hold for every input.

use std::sync::Arc;

use malliavin::banach::{gamma_norm, BanachSpaceSpec, GammaMode, GammaOperator};
use malliavin::chaos::{divergence_with, malliavin_derivative, ChaosExpansion, ChaosFamily, DivergenceRule, MultiIndex};
use malliavin::clark_ocone::TruncationLadder;
use malliavin::cylindrical::Expr;
use malliavin::harness::{fmt, Gen, Sizes};
use malliavin::time::{orthonormalize, sample_path_stream, StepFunction, TimeGrid};
use proptest::prelude::*;

const SIZES: Sizes = Sizes {
    max_degree: 3,
    max_n: 6,
    max_m: 3,
    max_terms: 3,
};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn grid() -> impl Strategy<Value = TimeGrid> {
    prop::collection::vec(0.01f64..0.99, 1..6).prop_map(|mut v| {
        v.push(1.0);
        v.push(0.0);
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        TimeGrid::new(v).unwrap()
    })
}

fn step(dim: usize) -> impl Strategy<Value = StepFunction> {
    grid().prop_flat_map(move |g| {
        let n = g.len() * dim;
        prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| StepFunction::from_flat(g.clone(), dim, v).unwrap())
    })
}

fn expr(depth: u32) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![(-2.0f64..2.0).prop_map(Expr::constant), (0usize..2).prop_map(Expr::var)];
    leaf.prop_recursive(depth, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.logistic()),
            (inner, 1u32..4).prop_map(|(a, n)| a.pow(n)),
        ]
    })
    .boxed()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn union_refines_both(a in grid(), b in grid()) {
        let u = a.union(&b).unwrap();
        prop_assert!(u.refines(&a) && u.refines(&b));
    }

    #[test]
    fn refinement_keeps_inner_products(f in step(2), g in step(2), extra in grid()) {
        let fine = f.grid().union(g.grid()).unwrap().union(&extra).unwrap();
        let a = f.inner(&g).unwrap();
        let b = f.refine(&fine).unwrap().inner(&g.refine(&fine).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn restriction_splits_the_norm(f in step(1), t in 0.0f64..1.0) {
        let before = f.restrict_before(t).unwrap();
        let after = f.restrict_after(t).unwrap();
        let total = before.norm().powi(2) + after.norm().powi(2);
        prop_assert!((total - f.norm().powi(2)).abs() <= 1e-10 * (1.0 + total));
    }

    #[test]
    fn wiener_integral_is_linear(f in step(1), g in step(1), a in -2.0f64..2.0, seed in any::<u64>()) {
        let sum = f.scale(a).add(&g).unwrap();
        let path = sample_path_stream(sum.grid(), 1, seed, 0);
        let lhs = path.evaluate_w(&sum).unwrap();
        let rhs = a * path.evaluate_w(&f).unwrap() + path.evaluate_w(&g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn expressions_round_trip_through_json(e in expr(3)) {
        let s = serde_json::to_string(&e).unwrap();
        let back: Expr = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn report_floats_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn ladders_round_trip(start in 0.1f64..5.0, n in 2usize..8) {
        let l = TruncationLadder::geometric(start, n).unwrap();
        let back: TruncationLadder = serde_json::from_str(&serde_json::to_string(&l).unwrap()).unwrap();
        prop_assert_eq!(back, l);
    }

    #[test]
    fn hermite_basis_is_orthogonal(a in 0u32..4, b in 0u32..4, c in 0u32..4, n in 1usize..4) {
        let fam = Arc::new(ChaosFamily::canonical(&TimeGrid::uniform(1.0, n).unwrap(), 1).unwrap());
        let x = ChaosExpansion::hermite(fam.clone(), MultiIndex::from_pairs(&[(0, a), (n - 1, c)].iter().copied().filter(|p| p.1 > 0).collect::<Vec<_>>())).unwrap();
        let y = ChaosExpansion::hermite(fam, MultiIndex::from_pairs(&[(0, b)].iter().copied().filter(|p| p.1 > 0).collect::<Vec<_>>())).unwrap();
        let p = x.l2_pairing(&y).unwrap();
        let same = if n == 1 { a + c == b } else { a == b && c == 0 };
        if same {
            prop_assert!(p > 0.0);
        } else {
            prop_assert_eq!(p, 0.0);
        }
    }

    #[test]
    fn chaos_product_commutes(seed in any::<u64>()) {
        let mut g = Gen::new(seed, 0, SIZES);
        let fam = g.family(1);
        let one = BanachSpaceSpec::hilbert(1);
        let a = g.chaos(&fam, one).unwrap();
        let b = g.chaos(&fam, one).unwrap();
        let d = a.multiply(&b).unwrap().max_abs_diff(&b.multiply(&a).unwrap()).unwrap();
        prop_assert!(d <= 1e-10);
    }

    #[test]
    fn number_operator_on_pure_chaos(seed in any::<u64>(), n in 1u32..4) {
        let mut g = Gen::new(seed, 1, SIZES);
        let fam = g.family(1);
        let cod = g.space();
        let f = g.pure_chaos(&fam, cod, n).unwrap();
        let lhs = divergence_with(&malliavin_derivative(&f), DivergenceRule::Standard, None).unwrap();
        prop_assert!(lhs.max_abs_diff(&f.scale(n as f64)).unwrap() <= 1e-10);
    }

    #[test]
    fn conditional_expectation_endpoints(seed in any::<u64>()) {
        let mut g = Gen::new(seed, 2, SIZES);
        let fam = g.family(1);
        let cod = g.space();
        let f = g.chaos(&fam, cod).unwrap();
        prop_assert!(f.conditional_expectation(1.0).unwrap().max_abs_diff(&f).unwrap() <= 1e-12);
        let at_zero = f.conditional_expectation(0.0).unwrap();
        prop_assert_eq!(at_zero.degree(), 0);
        let e = f.expectation();
        for (a, b) in at_zero.expectation().iter().zip(&e) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gamma_norm_is_a_norm(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut g = Gen::new(seed, 3, SIZES);
        let n = g.int(1, 4);
        let basis = orthonormalize(&TimeGrid::uniform(1.0, n).unwrap(), 1).unwrap();
        let cod = g.space();
        let r = g.gamma_operator(&basis, cod).unwrap();
        let s = g.gamma_operator(&basis, cod).unwrap();
        let sum = GammaOperator::linear_combination(&[1.0, 1.0], &[&r, &s]).unwrap();
        let nr = gamma_norm(&r, GammaMode::Exact).unwrap().value;
        let ns = gamma_norm(&s, GammaMode::Exact).unwrap().value;
        let nsum = gamma_norm(&sum, GammaMode::Exact).unwrap().value;
        prop_assert!(nsum <= nr + ns + 1e-12);
        let scaled = gamma_norm(&r.scale(c), GammaMode::Exact).unwrap().value;
        prop_assert!((scaled - c.abs() * nr).abs() <= 1e-12 * (1.0 + nr));
        prop_assert!((nr - r.frobenius()).abs() <= 1e-12 * (1.0 + nr));
    }
}
