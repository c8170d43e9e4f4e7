use super::*;

#[test]
fn quick_suite_passes() {
    let r = run_property_suite(7, Profile::Quick, None);
    let failed: Vec<_> = r.records.iter().filter(|r| !r.pass).map(|r| (&r.name, &r.error)).collect();
    assert!(r.all_passed(), "{failed:?}");
    assert!(r.records.len() >= 25);
}

#[test]
fn flipped_correction_is_caught() {
    let r = run_property_suite(7, Profile::Quick, Some(Mutation::FlippedCorrection));
    for name in ["divergence.duality", "divergence.formula-vs-duality", "divergence.number-operator"] {
        assert!(!r.record(name).unwrap().pass, "{name}");
    }
    assert!(r.record("integral.ito-isometry-chaos").unwrap().pass);
    assert_eq!(r.suite, "property-suite+flipped-correction");
}

#[test]
fn replay_reproduces_a_record() {
    let r = run_property_suite(11, Profile::Quick, Some(Mutation::FlippedCorrection));
    let rec = r.record("divergence.duality").unwrap();
    let again = replay(&rec.replay).unwrap();
    assert_eq!(&again, rec);
}

#[test]
fn replay_rejects_unknown_check() {
    let r = Replay {
        check: "nope".into(),
        seed: 0,
        profile: "quick".into(),
        mutation: None,
    };
    assert!(matches!(replay(&r), Err(crate::Error::Config { .. })));
}

#[test]
fn report_is_deterministic() {
    let only_mc = |c: &Check| c.kind == Kind::MonteCarlo;
    let a = run_property_suite_filtered(3, Profile::Quick, None, &only_mc);
    let b = run_property_suite_filtered(3, Profile::Quick, None, &only_mc);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = run_property_suite_filtered(4, Profile::Quick, None, &only_mc);
    assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
}

#[test]
fn report_schema_is_stable() {
    let r = run_property_suite_filtered(1, Profile::Quick, None, &|c| c.name == "conditional.tower");
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys, ["fingerprint", "profile", "records", "schema", "seed", "suite", "summary"]);
    assert_eq!(v["schema"], "malliavin-report/1");
    let rec: Vec<&str> = v["records"][0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(
        rec,
        ["anchor", "diff", "instances", "kind", "lhs", "name", "pass", "replay", "rhs", "seed", "tolerance", "worst_instance"]
    );
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().next().unwrap(), SUITE_CSV_HEADER.join(","));
    assert_eq!(csv.lines().count(), 2);
    let back: SuiteReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn profile_and_mutation_names_round_trip() {
    for p in [Profile::Quick, Profile::Full] {
        assert_eq!(Profile::parse(p.name()).unwrap(), p);
    }
    assert_eq!(Mutation::parse("flipped-correction").unwrap(), Mutation::FlippedCorrection);
    assert!(Profile::parse("medium").is_err());
}

#[test]
fn check_names_are_unique() {
    let mut names: Vec<_> = checks().iter().map(|c| c.name).collect();
    let n = names.len();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), n);
}

fn config_err(json: &str) -> String {
    let c = ExperimentConfig::from_json(json).and_then(|c| c.validate(std::path::Path::new(".")).map(|_| ()));
    match c {
        Err(crate::Error::Config { path, .. }) => path,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn missing_grid_names_grid_n() {
    assert_eq!(config_err(r#"{"kind": "clark-ocone-convergence", "rv": {"expr": {"var": 0}, "directions": [{"interval": [0, 1]}]}}"#), "grid.N");
    assert_eq!(config_err(r#"{"kind": "hedging", "grid": {"T": 1.0}}"#), "grid.N");
}

#[test]
fn errors_carry_field_paths() {
    assert_eq!(config_err(r#"{"kind": "hedging", "grid": {"N": "eight"}}"#), "grid.N");
    assert_eq!(config_err(r#"{"kind": "sideways"}"#), "kind");
    assert_eq!(config_err(r#"{"kind": "gamma-constants", "space": {"m": 2}, "budgets": {"paths": 0}}"#), "budgets.paths");
    assert_eq!(config_err(r#"{"kind": "gamma-constants", "space": {"m": 0}}"#), "space.m");
    assert_eq!(config_err(r#"{"kind": "gamma-constants", "space": {"m": 2, "norm": "q3"}}"#), "space.norm");
    assert_eq!(config_err(r#"{"kind": "gamma-constants"}"#), "space");
    assert_eq!(
        config_err(r#"{"kind": "l1-extension", "grid": {"N": 4}, "truncation": [2, 1], "rv": {"expr": {"var": 0}, "directions": [{"interval": [0, 1]}]}}"#),
        "truncation"
    );
    assert_eq!(config_err(r#"{"kind": "clark-ocone-convergence", "grid": {"ladder": [8, 4]}}"#), "grid.ladder");
    assert_eq!(
        config_err(r#"{"kind": "clark-ocone-convergence", "grid": {"N": 4}, "rv": {"expr": {"op": "tan", "args": [{"var": 0}]}, "directions": []}}"#),
        "rv.expr"
    );
    assert_eq!(
        config_err(r#"{"kind": "clark-ocone-convergence", "grid": {"N": 4}, "rv": {"file": "does/not/exist.json"}}"#),
        "rv.file"
    );
    assert_eq!(
        config_err(r#"{"kind": "clark-ocone-convergence", "grid": {"N": 4}, "rv": {"expr": {"op": "exp", "args": [{"var": 0}]}, "directions": [{"interval": [0, 1]}]}}"#),
        "rv"
    );
    assert_eq!(config_err(r#"{"kind": "hedging", "grid": {"N": 4}, "market": {"s0": 100, "sigma": 0.2}, "payoff": {"kind": "call", "strike": 100}}"#), "payoff");
    assert_eq!(config_err(r#"{"kind": "hedging", "grid": {"N": 4}, "budgets": {"quad_order": 5000}, "market": {"s0": 1, "sigma": 1}, "payoff": {"kind": "forward"}}"#), "budgets.quad_order");
}

#[test]
fn budgets_raise_warnings() {
    let mut c = ExperimentConfig::default_for(ExperimentKind::ClarkOconeConvergence);
    c.budgets.paths = Some(2 * PATH_BUDGET);
    let plan = c.validate(std::path::Path::new(".")).unwrap();
    assert_eq!(plan.warnings.len(), 2);
}

#[test]
fn overrides_replace_fields() {
    let mut c = ExperimentConfig::default_for(ExperimentKind::ClarkOconeConvergence);
    c.apply(&Overrides {
        seed: Some(9),
        grid_n: Some(2),
        paths: Some(10),
        ..Default::default()
    });
    let plan = c.validate(std::path::Path::new(".")).unwrap();
    assert_eq!(plan.seed, 9);
    match plan.experiment {
        Experiment::Convergence { grids, samples, .. } => {
            assert_eq!(grids.iter().map(|g| g.len()).collect::<Vec<_>>(), [2, 4, 8, 16, 32]);
            assert_eq!(samples, 10);
        }
        _ => unreachable!(),
    }
}

#[test]
fn default_configs_round_trip() {
    for k in [
        ExperimentKind::VerifyIdentities,
        ExperimentKind::ClarkOconeConvergence,
        ExperimentKind::Hedging,
        ExperimentKind::GammaConstants,
        ExperimentKind::L1Extension,
    ] {
        let c = ExperimentConfig::default_for(k);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        back.validate(std::path::Path::new(".")).unwrap();
    }
}

#[test]
fn rv_file_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("f.json"),
        r#"{"expr": {"op": "cos", "args": [{"var": 0}]}, "directions": [{"interval": [0, 0.5], "scale": 2}]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"kind": "clark-ocone-convergence", "grid": {"N": 2}, "rv": {"file": "f.json"}}"#).unwrap();
    let (c, base) = ExperimentConfig::load(&cfg).unwrap();
    let plan = c.validate(&base).unwrap();
    match plan.experiment {
        Experiment::Convergence { f, .. } => assert!(f.is_bounded()),
        _ => unreachable!(),
    }
}

fn run_in(dir: &std::path::Path, mut c: ExperimentConfig) -> SuiteReport {
    c.output.dir = Some(dir.to_path_buf());
    run_experiment(&c, std::path::Path::new(".")).unwrap()
}

fn files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn verify_identities_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = ExperimentConfig::default_for(ExperimentKind::VerifyIdentities);
    let ra = run_in(a.path(), c.clone());
    run_in(b.path(), c);
    assert!(ra.all_passed());
    let fa = files(a.path());
    assert_eq!(fa.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), ["config.json", "report.csv", "report.json"]);
    assert_eq!(fa, files(b.path()));
}

#[test]
fn convergence_experiment_writes_monotone_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default_for(ExperimentKind::ClarkOconeConvergence);
    c.budgets.paths = Some(4000);
    let r = run_in(dir.path(), c);
    assert!(r.all_passed(), "{:?}", r.records);
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap().iter().collect::<Vec<_>>(), CONVERGENCE_CSV_HEADER);
    let errs: Vec<f64> = rows.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(errs.len(), 5);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn first_chaos_convergence_is_exact() {
    let mut c = ExperimentConfig::default_for(ExperimentKind::ClarkOconeConvergence);
    c.rv = Some(serde_json::json!({"expr": {"var": 0}, "directions": [{"interval": [0.25, 0.75], "scale": 3}], "x": [1, -2]}));
    c.budgets.paths = Some(500);
    let out = execute(&c.validate(std::path::Path::new(".")).unwrap()).unwrap();
    assert_eq!(out.report.records.len(), 1);
    assert_eq!(out.report.records[0].name, "clark-ocone.exact");
    assert!(out.report.all_passed());
}

#[test]
fn forward_hedge_holds_one_share() {
    let mut c = ExperimentConfig::default_for(ExperimentKind::Hedging);
    c.payoff = Some(crate::clark_ocone::Payoff::Forward);
    c.grid = Some(GridSpec {
        horizon: Some(1.0),
        n: Some(4),
        ladder: None,
    });
    c.budgets.paths = Some(200);
    c.budgets.quad_order = Some(10);
    let out = execute(&c.validate(std::path::Path::new(".")).unwrap()).unwrap();
    let rec = out.report.record("hedge.delta-at-zero").unwrap();
    assert!(rec.diff < 1e-12, "{rec:?}");
    let hedge: serde_json::Value = serde_json::from_slice(&out.artifacts[0].bytes).unwrap();
    let row = &hedge["rows"][0];
    for key in ["t", "mean_ratio", "oracle_delta", "abs_diff"] {
        assert!(row.get(key).is_some(), "{key}");
    }
}

#[test]
fn gamma_experiment_on_hilbert_and_lp() {
    for norm in ["l2", "l3"] {
        let mut c = ExperimentConfig::default_for(ExperimentKind::GammaConstants);
        c.space = Some(SpaceSpec { m: 2, norm: norm.into() });
        c.budgets.trials = Some(5);
        c.budgets.paths = Some(4000);
        let out = execute(&c.validate(std::path::Path::new(".")).unwrap()).unwrap();
        assert!(out.report.all_passed(), "{norm}: {:?}", out.report.records);
        assert_eq!(out.report.record("gamma.trace-duality").unwrap().instances, 50);
    }
}

#[test]
fn l1_experiment_writes_tables() {
    let mut c = ExperimentConfig::default_for(ExperimentKind::L1Extension);
    c.budgets.paths = Some(500);
    let out = execute(&c.validate(std::path::Path::new(".")).unwrap()).unwrap();
    let names: Vec<_> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["l1.json", "l1.csv"]);
    let csv = String::from_utf8(out.artifacts[1].bytes.clone()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), L1_CSV_HEADER.join(","));
    assert_eq!(csv.lines().count(), 5);
    assert!(out.report.record("l1.monotone").is_some());
}
