use super::*;
use crate::banach::BanachSpaceSpec;
use crate::chaos::{malliavin_derivative, MultiIndex};
use crate::error::Error;
use crate::time::{sample_path, sample_path_stream, BrownianPath, StepFunction, TimeGrid};

fn ind(a: f64, b: f64) -> StepFunction {
    StepFunction::indicator(1.0, a, b).unwrap()
}

fn v(i: usize) -> Expr {
    Expr::var(i)
}

fn path_with(points: &[f64], increments: &[f64]) -> BrownianPath {
    BrownianPath::from_increments(TimeGrid::new(points.to_vec()).unwrap(), 1, increments.to_vec()).unwrap()
}

#[test]
fn evaluate_examples() {
    let e2 = BanachSpaceSpec::hilbert(2);
    let f = CylindricalRV::wiener(&ind(0.0, 1.0), &[1.0, -2.0], e2).unwrap();
    let p = path_with(&[0.0, 1.0], &[0.7]);
    assert_eq!(f.evaluate(&p).unwrap(), vec![0.7, -1.4]);
    let c = CylindricalRV::constant(&[3.0, 4.0], e2).unwrap();
    for s in 0..5 {
        let p = sample_path(&TimeGrid::uniform(1.0, 4).unwrap(), 1, s);
        assert_eq!(c.evaluate(&p).unwrap(), vec![3.0, 4.0]);
    }
}

#[test]
fn characteristic_function_by_sampling() {
    let h = ind(0.0, 0.5).scale(1.5);
    let f = CylindricalRV::scalar(v(0).cos(), vec![h.clone()]).unwrap();
    let grid = TimeGrid::uniform(1.0, 2).unwrap();
    let compiled = f.compile(&grid).unwrap();
    let vals: Vec<f64> = (0..20_000)
        .map(|s| compiled.evaluate(sample_path_stream(&grid, 1, 11, s).increments())[0])
        .collect();
    let est = crate::stats::estimate(&vals, 11);
    let target = (-0.5 * h.norm().powi(2)).exp();
    assert!(est.covers(target, 3.0), "{est:?} vs {target}");
}

#[test]
fn derivative_examples() {
    let e1 = BanachSpaceSpec::hilbert(1);
    let h = ind(0.0, 1.0);
    let p = path_with(&[0.0, 0.5, 1.0], &[0.3, 0.6]);
    let id = CylindricalRV::wiener(&h, &[2.0], e1).unwrap();
    let d = id.malliavin_derivative();
    assert_eq!(d.rank_bound(), 1);
    assert!((d.apply(&h, &p).unwrap()[0] - 2.0).abs() < 1e-15);
    let sq = CylindricalRV::scalar(v(0).pow(2), vec![h.clone()]).unwrap();
    let op = sq.malliavin_derivative().evaluate(&p).unwrap();
    // 2 W(h) ⊗ h with W(h) = 0.9
    assert!((op.apply(&h).unwrap()[0] - 1.8).abs() < 1e-14);
    assert!((op.apply(&ind(0.0, 0.5)).unwrap()[0] - 0.9).abs() < 1e-14);
}

#[test]
fn derivative_matches_finite_differences() {
    let (h1, h2) = (ind(0.0, 1.0), ind(0.0, 0.5));
    let f = CylindricalRV::scalar(v(0).sin() * v(1).cos(), vec![h1.clone(), h2.clone()])
        .unwrap()
        .tensor(&[1.0, 0.5], BanachSpaceSpec::lp(2, 3.0).unwrap())
        .unwrap();
    let d = f.malliavin_derivative();
    for s in 0..10 {
        let p = sample_path(&TimeGrid::uniform(1.0, 4).unwrap(), 1, s);
        let exact = d.apply(&h1, &p).unwrap();
        let fd = finite_difference_derivative(&f, &h1, &p, 1e-5).unwrap();
        for (a, b) in exact.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn product_rules_hold_pathwise() {
    let (h1, h2, h3) = (ind(0.0, 1.0), ind(0.25, 0.75), ind(0.5, 1.0));
    let e2 = BanachSpaceSpec::hilbert(2);
    let f = CylindricalRV::scalar(v(0).sin() + v(1).logistic() * v(0), vec![h1.clone(), h2.clone()]).unwrap();
    let g = CylindricalRV::scalar(v(0).cos() * v(1), vec![h3.clone(), h1.clone()])
        .unwrap()
        .tensor(&[1.0, -0.5], e2)
        .unwrap();
    let gs = CylindricalRV::scalar(v(0).pow(3), vec![h2.clone()])
        .unwrap()
        .tensor(&[0.2, 0.7], e2)
        .unwrap();
    let fe = f.tensor(&[0.3, 1.1], e2).unwrap();
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    for s in 0..8 {
        let p = sample_path(&grid, 1, s);
        for h in [&h1, &h2, &ind(0.0, 0.25)] {
            // D(F G) = F DG + DF ⊗ G
            let lhs = f.multiply(&g).unwrap().malliavin_derivative().apply(h, &p).unwrap();
            let fv = f.evaluate(&p).unwrap()[0];
            let dfh = f.malliavin_derivative().apply(h, &p).unwrap()[0];
            let dgh = g.malliavin_derivative().apply(h, &p).unwrap();
            let gv = g.evaluate(&p).unwrap();
            for r in 0..2 {
                assert!((lhs[r] - (fv * dgh[r] + dfh * gv[r])).abs() < 1e-10);
            }
            // D⟨F, G⟩ = ⟨DF, G⟩ + ⟨F, DG⟩
            let lhs = fe.dot(&gs).unwrap().malliavin_derivative().apply(h, &p).unwrap()[0];
            let dfe = fe.malliavin_derivative().apply(h, &p).unwrap();
            let dgs = gs.malliavin_derivative().apply(h, &p).unwrap();
            let (fv, gv) = (fe.evaluate(&p).unwrap(), gs.evaluate(&p).unwrap());
            let rhs: f64 = (0..2).map(|r| dfe[r] * gv[r] + fv[r] * dgs[r]).sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}

#[test]
fn conditional_expectation_examples() {
    let h = ind(0.0, 1.0);
    let p = path_with(&[0.0, 0.5, 1.0], &[0.8, -0.3]);
    let sq = CylindricalRV::scalar(v(0).pow(2), vec![h.clone()]).unwrap();
    let c = conditional_expectation(&sq, 0.5, &p, &ConditionalSettings::quadrature(2)).unwrap();
    assert!((c.value[0] - (0.64 + 0.5)).abs() < 1e-14);
    assert_eq!(c.method, Method::Quadrature { order: 2, max_dim: 1 });
    let full = conditional_expectation(&sq, 1.0, &p, &ConditionalSettings::default()).unwrap();
    assert!((full.value[0] - sq.evaluate(&p).unwrap()[0]).abs() < 1e-14);
    assert_eq!(full.method, Method::Measurable);
    let cos = CylindricalRV::scalar(v(0).cos(), vec![h]).unwrap();
    let c = conditional_expectation(&cos, 0.5, &p, &ConditionalSettings::quadrature(20)).unwrap();
    assert!((c.value[0] - 0.8f64.cos() * (-0.25f64).exp()).abs() < 1e-10);
}

#[test]
fn tower_property_for_polynomials() {
    let f = CylindricalRV::scalar(
        v(0).pow(3) * v(1) + v(1).pow(2),
        vec![ind(0.0, 1.0), ind(0.25, 0.75)],
    )
    .unwrap();
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let settings = ConditionalSettings::quadrature(6);
    for s in 0..5 {
        let p = sample_path(&grid, 1, s);
        let direct = conditional_expectation(&f, 0.25, &p, &settings).unwrap().value[0];
        // E[E[F|F_{3/4}] | F_{1/4}] via quadrature over the increments in (1/4, 3/4]
        let inner = ConditionalPlan::new(&f, 0.75, &settings).unwrap();
        let rule = crate::quadrature::rule(6).unwrap();
        let mut acc = 0.0;
        for (z1, w1) in rule.nodes.iter().zip(&rule.weights) {
            for (z2, w2) in rule.nodes.iter().zip(&rule.weights) {
                let mut inc = p.increments().to_vec();
                inc[1] = z1 * 0.5;
                inc[2] = z2 * 0.5;
                let q = BrownianPath::from_increments(grid.clone(), 1, inc).unwrap();
                acc += w1 * w2 * inner.expectation(&q).unwrap().value[0];
            }
        }
        assert!((acc - direct).abs() < 1e-10, "{acc} vs {direct}");
    }
}

#[test]
fn monte_carlo_fallback_beyond_the_cap() {
    let dirs: Vec<StepFunction> = (0..5).map(|k| ind(0.2 * k as f64, 0.2 * (k + 1) as f64)).collect();
    let f = CylindricalRV::scalar(Expr::Add((0..5).map(|k| v(k).pow(2)).collect()), dirs).unwrap();
    let p = sample_path(&TimeGrid::uniform(1.0, 5).unwrap(), 1, 3);
    assert!(matches!(
        conditional_expectation(&f, 0.0, &p, &ConditionalSettings::quadrature(4)),
        Err(Error::QuadratureCap { dim: 5, cap: 4 })
    ));
    let c = conditional_expectation(&f, 0.0, &p, &ConditionalSettings::default()).unwrap();
    assert_eq!(c.method, Method::MonteCarlo { samples: DEFAULT_MC_SAMPLES });
    assert!((c.value[0] - 1.0).abs() < 3.0 * c.std_error, "{c:?}");
}

#[test]
fn exponential_growth_needs_an_assertion() {
    let h = ind(0.0, 1.0);
    let e = (Expr::constant(0.25) * v(0).pow(2)).exp();
    let term = CylindricalTerm::new(e, vec![h.clone()], vec![1.0]).unwrap();
    assert!(matches!(
        CylindricalRV::new(vec![term.clone()], BanachSpaceSpec::hilbert(1), false),
        Err(Error::NotIntegrable(_))
    ));
    assert!(CylindricalRV::new(vec![term], BanachSpaceSpec::hilbert(1), true).is_ok());
    let bounded = CylindricalRV::scalar((Expr::constant(-1.0) * v(0).pow(2)).exp(), vec![h]).unwrap();
    assert!(bounded.is_bounded());
}

#[test]
fn to_chaos_examples() {
    let h = ind(0.0, 1.0);
    let e2 = BanachSpaceSpec::hilbert(2);
    let f = CylindricalRV::wiener(&h, &[1.0, 2.0], e2).unwrap().to_chaos().unwrap();
    assert_eq!(f.coefficient(&MultiIndex::single(0, 1)).unwrap(), &[1.0, 2.0]);
    assert_eq!(f.len(), 1);
    let sq = CylindricalRV::scalar(v(0).pow(2), vec![h.clone()]).unwrap().to_chaos().unwrap();
    assert!((sq.coefficient(&MultiIndex::single(0, 2)).unwrap()[0] - 1.0).abs() < 1e-14);
    assert!((sq.expectation()[0] - 1.0).abs() < 1e-14);
    assert!(CylindricalRV::scalar(v(0).sin(), vec![h]).unwrap().to_chaos().is_err());
}

#[test]
fn to_chaos_agrees_pathwise_with_non_orthogonal_directions() {
    // ⟨h1, h2⟩ = 1/2
    let (h1, h2) = (ind(0.0, 1.0), ind(0.0, 0.5));
    assert!((h1.inner(&h2).unwrap() - 0.5).abs() < 1e-15);
    let f = CylindricalRV::scalar((v(0) + v(1)).pow(2), vec![h1, h2]).unwrap();
    let c = f.to_chaos().unwrap();
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    for s in 0..100 {
        let p = sample_path(&grid, 1, s);
        let a = f.evaluate(&p).unwrap()[0];
        let b = c.evaluate_path(&p).unwrap()[0];
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn chaos_commutes_with_the_derivative() {
    let (h1, h2) = (ind(0.0, 0.75), ind(0.5, 1.0));
    let f = CylindricalRV::scalar(
        v(0).pow(3) - Expr::constant(2.0) * v(0) * v(1) + Expr::poly(vec![1.0, 0.0, 3.0], v(1)),
        vec![h1, h2],
    )
    .unwrap()
    .tensor(&[1.0, -1.0, 0.5], BanachSpaceSpec::hilbert(3))
    .unwrap();
    let family = f.natural_family().unwrap();
    let lhs = f.malliavin_derivative().to_chaos_on(family.clone()).unwrap();
    let rhs = malliavin_derivative(&f.to_chaos_on(family).unwrap());
    assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
}

#[test]
fn json_round_trip() {
    let f = CylindricalRV::scalar(v(0).sin() * v(1), vec![ind(0.0, 1.0), ind(0.0, 0.5)]).unwrap();
    let s = serde_json::to_string(&f).unwrap();
    assert_eq!(serde_json::from_str::<CylindricalRV>(&s).unwrap(), f);
}
