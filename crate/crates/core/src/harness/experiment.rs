//! Running a validated experiment and writing its artifacts.

use std::fs;
use std::path::Path;

use super::config::{Experiment, ExperimentConfig, Plan};
use super::generators::{Gen, Sizes};
use super::report::{fmt, CheckRecord, Replay, SuiteReport, REPORT_SCHEMA};
use super::suite::run_property_suite;
use crate::banach::{
    gamma_norm, lift_check, trace_pairing, umd_transform_ratio, BanachSpaceSpec, GammaMode, GammaOperator, OperatorFamily,
};
use crate::clark_ocone::{
    clark_ocone_convergence, clark_ocone_l1, hedge_report, hedging_delta, replication_study, ConvergenceTable, L1Report,
};
use crate::error::Result;
use crate::rng;
use crate::stats::{Comparison, Estimate};
use crate::time::{orthonormalize, TimeGrid};

/// Header of every convergence table.
pub const CONVERGENCE_CSV_HEADER: [&str; 5] = ["schema", "N", "err", "std_error", "slope"];
/// Header of the successive-distance table of the L1 ladder.
pub const L1_CSV_HEADER: [&str; 5] = ["schema", "from", "to", "distance", "std_error"];

/// Acceptance band of convergence slopes.
pub const SLOPE_BAND: (f64, f64) = (0.35, 0.65);
/// Errors below this count as exact.
pub const EXACT_TOL: f64 = 1e-12;
/// Hedge ratio against the Black-Scholes delta.
pub const DELTA_TOL: f64 = 5e-3;

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: SuiteReport,
    pub artifacts: Vec<Artifact>,
}

fn record(plan_kind: &str, name: &str, anchor: &str, kind: &str, seed: u64, cs: &[Comparison]) -> CheckRecord {
    let replay = Replay {
        check: name.into(),
        seed,
        profile: format!("experiment:{plan_kind}"),
        mutation: None,
    };
    CheckRecord::from_comparisons(name, anchor, kind, replay, cs)
}

/// `CONVERGENCE_CSV_HEADER` rows, the fitted slope repeated on every row.
pub fn convergence_csv(table: &ConvergenceTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CONVERGENCE_CSV_HEADER)?;
    for r in &table.rows {
        w.write_record([REPORT_SCHEMA.to_string(), r.n.to_string(), fmt(r.err), fmt(r.std_error), fmt(table.slope)])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn l1_csv(report: &L1Report) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(L1_CSV_HEADER)?;
    for (i, d) in report.successive.iter().enumerate() {
        w.write_record([
            REPORT_SCHEMA.to_string(),
            fmt(report.levels[i]),
            fmt(report.levels[i + 1]),
            fmt(d.value),
            fmt(d.std_error),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Monotone decrease (at most one violation) and slope in [`SLOPE_BAND`], or
/// exactness when every error is below [`EXACT_TOL`].
pub fn convergence_comparisons(table: &ConvergenceTable) -> Vec<(&'static str, Comparison)> {
    let worst = table.rows.iter().map(|r| r.err).fold(0.0, f64::max);
    if worst <= EXACT_TOL {
        return vec![("exact", Comparison::exact(worst, 0.0, EXACT_TOL))];
    }
    let (lo, hi) = SLOPE_BAND;
    let mid = 0.5 * (lo + hi);
    vec![
        ("monotone", at_most(table.violations as f64, 1.0)),
        ("slope", Comparison::exact(table.slope, mid, 0.5 * (hi - lo))),
    ]
}

fn at_most(lhs: f64, rhs: f64) -> Comparison {
    Comparison {
        lhs,
        rhs,
        diff: (lhs - rhs).max(0.0),
        tolerance: 0.0,
        pass: lhs <= rhs,
        samples: 0,
    }
}

fn hilbert_or_auto(r: &GammaOperator, samples: usize, seed: u64) -> Result<Estimate> {
    gamma_norm(r, GammaMode::Auto { samples, seed })
}

/// Checks of the gamma machinery on `space`.
///
/// * closed form (or quadrature) against sampling over `trials` operators,
/// * trace duality on `10 · trials` pairs,
/// * the lifting inequality on `trials` random families,
/// * the UMD transform ratio, exactly one on Hilbert spaces.
pub fn gamma_constants(space: BanachSpaceSpec, trials: usize, samples: usize, seed: u64) -> Result<Vec<(&'static str, Vec<Comparison>)>> {
    let sizes = Sizes {
        max_degree: 0,
        max_n: 4,
        max_m: space.m,
        max_terms: 1,
    };
    let basis = |g: &mut Gen| -> Result<Vec<crate::time::StepFunction>> {
        let n = g.int(1, 4);
        orthonormalize(&TimeGrid::uniform(1.0, n)?, 1)
    };
    let norm_seed = rng::named_seed(seed, "gamma.norm");
    let norms = (0..trials as u64)
        .map(|i| {
            let mut g = Gen::new(norm_seed, i, sizes);
            let b = basis(&mut g)?;
            let r = g.gamma_operator(&b, space)?;
            let reference = if space.is_hilbert() {
                gamma_norm(&r, GammaMode::Exact)?
            } else {
                gamma_norm(&r, GammaMode::Quadrature { order: 40 })?
            };
            let mc = gamma_norm(
                &r,
                GammaMode::MonteCarlo {
                    samples,
                    seed: rng::child_seed(norm_seed, i),
                },
            )?;
            Ok(Comparison::against(&mc, reference.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let trace_seed = rng::named_seed(seed, "gamma.trace");
    let traces = (0..10 * trials as u64)
        .map(|i| {
            let mut g = Gen::new(trace_seed, i, sizes);
            let b = basis(&mut g)?;
            let r = g.gamma_operator(&b, space)?;
            let s = g.gamma_operator(&b, space.dual())?;
            let lhs = trace_pairing(&s, &r)?.abs();
            let nr = hilbert_or_auto(&r, samples, rng::child_seed(trace_seed, 2 * i))?;
            let ns = hilbert_or_auto(&s, samples, rng::child_seed(trace_seed, 2 * i + 1))?;
            let rhs = (nr.value + 3.0 * nr.std_error) * (ns.value + 3.0 * ns.std_error);
            let tol = 1e-12 * (1.0 + rhs);
            Ok(Comparison {
                lhs,
                rhs,
                diff: (lhs - rhs).max(0.0),
                tolerance: tol,
                pass: lhs <= rhs + tol,
                samples: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lift_seed = rng::named_seed(seed, "gamma.lift");
    let lifts = (0..trials as u64)
        .map(|i| {
            let mut g = Gen::new(lift_seed, i, sizes);
            let members = (0..g.int(1, 3)).map(|_| g.matrix(space.m, space.m)).collect();
            let family = OperatorFamily::on(space, members)?;
            let b = basis(&mut g)?;
            let rs = (0..g.int(1, 3))
                .map(|_| g.gamma_operator(&b, space))
                .collect::<Result<Vec<_>>>()?;
            let r = lift_check(&family, &rs, rng::child_seed(lift_seed, i))?;
            Ok(Comparison {
                lhs: r.lhs,
                rhs: r.constant * r.constant * r.rhs,
                diff: (-r.slack).max(0.0),
                tolerance: 0.0,
                pass: r.holds,
                samples: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let umd = umd_transform_ratio(&space, 2.0, 6, 20, rng::named_seed(seed, "gamma.umd"))?;
    let umd_cmp = if space.is_hilbert() {
        Comparison::exact(umd.lower, 1.0, 1e-12)
    } else {
        at_most(1.0, umd.lower)
    };
    Ok(vec![
        ("exact-vs-mc", norms),
        ("trace-duality", traces),
        ("lift-inequality", lifts),
        ("umd-ratio", vec![umd_cmp]),
    ])
}

/// Runs a plan in memory.
pub fn execute(plan: &Plan) -> Result<ExperimentOutput> {
    let seed = plan.seed;
    let kind = plan.kind.name();
    let mut artifacts = Vec::new();
    let mut records = Vec::new();
    match &plan.experiment {
        Experiment::Verify { profile, mutation } => {
            let mut report = run_property_suite(seed, *profile, *mutation);
            report.warnings = plan.warnings.clone();
            return Ok(ExperimentOutput { report, artifacts });
        }
        Experiment::Convergence {
            f,
            grids,
            samples,
            settings,
        } => {
            let table = clark_ocone_convergence(f, grids, 2.0, *samples, settings, seed)?;
            for (name, c) in convergence_comparisons(&table) {
                records.push(record(
                    kind,
                    &format!("clark-ocone.{name}"),
                    "Clark-Ocone: L2 representation error of the left-point sum",
                    "monte-carlo",
                    seed,
                    &[c],
                ));
            }
            artifacts.push(Artifact {
                name: "convergence.csv".into(),
                bytes: convergence_csv(&table)?,
            });
        }
        Experiment::Hedging {
            market,
            payoff,
            grid,
            ladder,
            samples,
            settings,
        } => {
            let strategy = hedging_delta(payoff, market, grid, settings)?;
            let hedge = hedge_report(&strategy, *samples, seed)?;
            if let Some(oracle) = hedge.rows[0].oracle_delta {
                let c = Comparison::exact(hedge.ratio_at_zero(), oracle, DELTA_TOL);
                records.push(record(kind, "hedge.delta-at-zero", "hedging: Black-Scholes delta", "exact", seed, &[c]));
            }
            let mut json = serde_json::to_string_pretty(&hedge)?;
            json.push('\n');
            artifacts.push(Artifact {
                name: "hedge.json".into(),
                bytes: json.into_bytes(),
            });
            if let Some(grids) = ladder {
                let table = replication_study(payoff, market, grids, *samples, settings, seed)?;
                for (name, c) in convergence_comparisons(&table) {
                    records.push(record(
                        kind,
                        &format!("hedge.replication-{name}"),
                        "hedging: mean replication error of the discrete hedge",
                        "monte-carlo",
                        seed,
                        &[c],
                    ));
                }
                artifacts.push(Artifact {
                    name: "replication.csv".into(),
                    bytes: convergence_csv(&table)?,
                });
            }
        }
        Experiment::Gamma { space, trials, samples } => {
            for (name, cs) in gamma_constants(*space, *trials, *samples, seed)? {
                let kind_tag = if name == "exact-vs-mc" { "monte-carlo" } else { "exact" };
                records.push(record(
                    kind,
                    &format!("gamma.{name}"),
                    "gamma-radonifying norms and trace duality",
                    kind_tag,
                    seed,
                    &cs,
                ));
            }
        }
        Experiment::L1 {
            f,
            grid,
            ladder,
            samples,
            settings,
        } => {
            let r = clark_ocone_l1(f, ladder, grid, *samples, settings, seed, true)?;
            let monotone = at_most(r.violations as f64, 0.0);
            records.push(record(kind, "l1.monotone", "L1 extension: successive distances of the ladder", "monte-carlo", seed, &[monotone]));
            if let Some(c) = r.direct_comparison {
                records.push(record(kind, "l1.direct-match", "L1 extension: top level against the direct integrand", "monte-carlo", seed, &[c]));
            }
            let mut json = serde_json::to_string_pretty(&r)?;
            json.push('\n');
            artifacts.push(Artifact {
                name: "l1.json".into(),
                bytes: json.into_bytes(),
            });
            artifacts.push(Artifact {
                name: "l1.csv".into(),
                bytes: l1_csv(&r)?,
            });
        }
    }
    let mut report = SuiteReport::new(kind, seed, &format!("experiment:{kind}"), records);
    report.warnings = plan.warnings.clone();
    Ok(ExperimentOutput { report, artifacts })
}

/// Validates `config`, runs it and writes `report.json`, `report.csv`,
/// `config.json` and the experiment's tables into its output directory.
pub fn run_experiment(config: &ExperimentConfig, base: &Path) -> Result<SuiteReport> {
    let plan = config.validate(base)?;
    let out = execute(&plan)?;
    let dir = config.output_dir();
    fs::create_dir_all(&dir)?;
    out.report.write_to(&dir, "report")?;
    let mut cfg = config.clone();
    cfg.output.dir = None;
    let mut json = serde_json::to_string_pretty(&cfg)?;
    json.push('\n');
    fs::write(dir.join("config.json"), json)?;
    for a in &out.artifacts {
        fs::write(dir.join(&a.name), &a.bytes)?;
    }
    Ok(out.report)
}
