//! Acceptance criteria, one test each. Every test prints a single
//! `criterion <k>: PASS|FAIL ...` line before asserting.

use std::time::{Duration, Instant};

use malliavin::banach::BanachSpaceSpec;
use malliavin::clark_ocone::{
    clark_ocone_convergence, clark_ocone_l1, hedge_report, hedging_delta, martingale_identity_check, replication_study, Market,
    Payoff, TruncationLadder,
};
use malliavin::cylindrical::{ConditionalSettings, CylindricalRV, Expr};
use malliavin::harness::{
    convergence_comparisons, execute, gamma_constants, run_experiment, run_property_suite_filtered, Check, ExperimentConfig,
    ExperimentKind, Gen, Kind, Profile, Sizes, SuiteReport, SLOPE_BAND,
};
use malliavin::stats::normal_cdf;
use malliavin::time::{StepFunction, TimeGrid};

const SEED: u64 = 20_261_015;
const PATHS: usize = 100_000;
const LADDER: [usize; 5] = [4, 8, 16, 32, 64];

fn verdict(k: u32, pass: bool, detail: String) {
    println!("criterion {k}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {k}: {detail}");
}

fn failing(r: &SuiteReport) -> Vec<String> {
    r.records.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect()
}

fn suite_criterion(k: u32, kind: Kind, budget: Duration) {
    let start = Instant::now();
    let r = run_property_suite_filtered(SEED, Profile::Full, None, &|c: &Check| c.kind == kind);
    let elapsed = start.elapsed();
    let min_instances = r.records.iter().map(|r| r.instances).min().unwrap_or(0);
    let pass = r.all_passed() && elapsed < budget;
    verdict(
        k,
        pass,
        format!(
            "{} {} checks, {}/{} passed, >= {min_instances} instances each, {:.1}s (budget {}s), failing {:?}",
            r.summary.total,
            kind.name(),
            r.summary.passed,
            r.summary.total,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            failing(&r)
        ),
    );
}

#[test]
fn criterion_1_exact_identity_suite() {
    suite_criterion(1, Kind::Chaos, Duration::from_secs(60));
}

#[test]
fn criterion_2_monte_carlo_identity_suite() {
    suite_criterion(2, Kind::MonteCarlo, Duration::from_secs(600));
}

fn indicator(a: f64, b: f64) -> StepFunction {
    StepFunction::indicator(1.0, a, b).unwrap()
}

fn scalar(f: Expr, dirs: Vec<StepFunction>) -> CylindricalRV {
    CylindricalRV::scalar(f, dirs).unwrap()
}

#[test]
fn criterion_3_clark_ocone_convergence() {
    let grids: Vec<TimeGrid> = LADDER.iter().map(|&n| TimeGrid::uniform(1.0, n).unwrap()).collect();
    let settings = ConditionalSettings::quadrature(16);
    let w = || vec![indicator(0.0, 1.0)];
    let cases = [
        ("W(h)^2", scalar(Expr::var(0).pow(2), w())),
        ("W(h)^3", scalar(Expr::var(0).pow(3), w())),
        ("cos W(h)", scalar(Expr::var(0).cos(), w())),
        (
            "sin W(h1) cos W(h2)",
            scalar(Expr::var(0).sin() * Expr::var(1).cos(), vec![indicator(0.0, 0.5), indicator(0.25, 1.0)]),
        ),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, (name, f)) in cases.iter().enumerate() {
        let t = clark_ocone_convergence(f, &grids, 2.0, PATHS, &settings, SEED + i as u64).unwrap();
        let ok = t.violations <= 1 && t.slope >= SLOPE_BAND.0 && t.slope <= SLOPE_BAND.1;
        pass &= ok && convergence_comparisons(&t).iter().all(|(_, c)| c.pass);
        let errs: Vec<String> = t.rows.iter().map(|r| format!("{:.4}", r.err)).collect();
        detail.push(format!("{name}: slope {:.3}, violations {}, err [{}]", t.slope, t.violations, errs.join(" ")));
    }
    let h = indicator(0.25, 0.75).scale(3.0);
    let first = CylindricalRV::wiener(&h, &[1.0, -2.0, 0.5], BanachSpaceSpec::hilbert(3)).unwrap();
    let t = clark_ocone_convergence(&first, &grids, 2.0, PATHS, &settings, SEED).unwrap();
    let worst = t.rows.iter().map(|r| r.err).fold(0.0, f64::max);
    pass &= worst <= 1e-12;
    detail.push(format!("first chaos: max err {worst:.2e} (<= 1e-12)"));
    verdict(3, pass, detail.join("; "));
}

#[test]
fn criterion_4_martingale_identity_for_quadratics() {
    let sizes = Sizes {
        max_degree: 2,
        max_n: 8,
        max_m: 3,
        max_terms: 4,
    };
    let mut worst = 0.0f64;
    let mut pass = true;
    for i in 0..20u64 {
        let mut g = Gen::new(SEED, i, sizes);
        let d = g.int(1, 2);
        let cod = g.space();
        let f = g.quadratic_rv(d, cod).unwrap();
        let grid = g.grid();
        let r = martingale_identity_check(&f, &grid, 10, SEED + i).unwrap();
        worst = worst.max(r.max_discrepancy);
        pass &= r.pass && r.tolerance <= 1e-10;
    }
    verdict(4, pass, format!("20 quadratics, worst discrepancy {worst:.2e} (tolerance 1e-10)"));
}

#[test]
fn criterion_5_hedging_oracle() {
    let market = Market::new(100.0, 0.2, 1.0).unwrap();
    let call = Payoff::Call {
        strike: 100.0,
        smoothing: Some(0.01),
    };
    let settings = ConditionalSettings::quadrature(256);
    let strategy = hedging_delta(&call, &market, &TimeGrid::uniform(1.0, 4).unwrap(), &settings).unwrap();
    let h0 = hedge_report(&strategy, 100, SEED).unwrap().ratio_at_zero();
    let oracle = normal_cdf(0.1);
    let grids: Vec<TimeGrid> = LADDER.iter().map(|&n| TimeGrid::uniform(1.0, n).unwrap()).collect();
    let t = replication_study(&call, &market, &grids, PATHS, &settings, SEED).unwrap();
    let delta_ok = (h0 - oracle).abs() <= 5e-3;
    let slope_ok = (t.slope - 0.5).abs() <= 0.15;
    let errs: Vec<String> = t.rows.iter().map(|r| format!("{:.4}", r.err)).collect();
    verdict(
        5,
        delta_ok && slope_ok,
        format!(
            "H_0 {h0:.5} vs Phi(0.1) {oracle:.5} (|diff| {:.2e} <= 5e-3, order 256, width 1e-2); replication slope {:.3} (0.5 +- 0.15), err [{}]",
            (h0 - oracle).abs(),
            t.slope,
            errs.join(" ")
        ),
    );
}

#[test]
fn criterion_6_gamma_machinery() {
    let results = gamma_constants(BanachSpaceSpec::hilbert(3), 100, PATHS, SEED).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, cs) in &results {
        let failed = cs.iter().filter(|c| !c.pass).count();
        pass &= failed == 0;
        detail.push(format!("{name}: {}/{} hold", cs.len() - failed, cs.len()));
    }
    let umd = &results.iter().find(|r| r.0 == "umd-ratio").unwrap().1[0];
    detail.push(format!("UMD ratio {:?}", umd.lhs));
    verdict(6, pass, detail.join(", "));
}

#[test]
fn criterion_7_l1_extension() {
    let f = scalar(Expr::var(0).pow(2), vec![indicator(0.0, 1.0)]);
    let ladder = TruncationLadder::geometric(2.0, 5).unwrap();
    let grid = TimeGrid::uniform(1.0, 8).unwrap();
    let r = clark_ocone_l1(&f, &ladder, &grid, 10_000, &ConditionalSettings::quadrature(12), SEED, true).unwrap();
    let dists: Vec<String> = r.successive.iter().map(|d| format!("{:.2e}", d.value)).collect();
    let c = r.direct_comparison.unwrap();
    verdict(
        7,
        r.pass(),
        format!(
            "levels {:?}, successive d [{}], violations {}, top vs direct diff {:.2e} (3 sigma {:.2e})",
            r.levels,
            dists.join(" "),
            r.violations,
            c.diff,
            c.tolerance
        ),
    );
}

fn artifacts(kind: ExperimentKind, paths: usize, dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut c = ExperimentConfig::default_for(kind);
    c.seed = SEED;
    if kind != ExperimentKind::VerifyIdentities {
        c.budgets.paths = Some(paths);
    }
    if kind == ExperimentKind::GammaConstants {
        c.budgets.trials = Some(10);
    }
    c.output.dir = Some(dir.to_path_buf());
    run_experiment(&c, std::path::Path::new(".")).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_8_determinism() {
    let kinds = [
        ExperimentKind::VerifyIdentities,
        ExperimentKind::ClarkOconeConvergence,
        ExperimentKind::Hedging,
        ExperimentKind::GammaConstants,
        ExperimentKind::L1Extension,
    ];
    let mut pass = true;
    let mut count = 0;
    for kind in kinds {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = artifacts(kind, 2000, a.path());
        let fb = artifacts(kind, 2000, b.path());
        pass &= fa == fb;
        count += fa.len();
    }
    let full_a = run_property_suite_filtered(SEED, Profile::Full, None, &|c: &Check| c.kind != Kind::MonteCarlo);
    let full_b = run_property_suite_filtered(SEED, Profile::Full, None, &|c: &Check| c.kind != Kind::MonteCarlo);
    pass &= full_a.to_json().unwrap() == full_b.to_json().unwrap();
    let plan = ExperimentConfig::default_for(ExperimentKind::VerifyIdentities)
        .validate(std::path::Path::new("."))
        .unwrap();
    pass &= execute(&plan).unwrap().report.to_json().unwrap() == execute(&plan).unwrap().report.to_json().unwrap();
    verdict(8, pass, format!("{count} artifacts across 5 experiment kinds and the full suite byte-identical on rerun"));
}
