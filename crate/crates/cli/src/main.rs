//! `malliavin`: run experiments and the property suite from the command line.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! config or I/O errors. `MALLIAVIN_THREADS` caps the worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use malliavin::harness::{
    replay, run_experiment, run_property_suite, ExperimentConfig, ExperimentKind, Mutation, Overrides, Profile, Replay,
    SuiteReport,
};
use malliavin::Error;

#[derive(Parser)]
#[command(name = "malliavin", version, about = "Numerical Malliavin calculus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the identity suite as a config-driven experiment.
    Verify(Common),
    /// Clark-Ocone representation error across a grid ladder.
    ClarkOcone(Common),
    /// Delta hedge against Black-Scholes and the replication study.
    Hedge(Common),
    /// Gamma norms, trace duality, lifting and UMD checks.
    Gamma(Common),
    /// Truncation ladder of the L1 extension.
    L1(Common),
    /// Run the property suite directly, or replay one check.
    Suite(SuiteArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    quad_order: Option<usize>,
    /// Uniform grid size; replaces any ladder in the config.
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_profile, default_value = "quick")]
    profile: Profile,
    /// Inject a known bug to show the suite catches it.
    #[arg(long, value_parser = parse_mutation)]
    mutation: Option<Mutation>,
    /// Replay a single check; `--seed` is then the check seed from the report.
    #[arg(long)]
    check: Option<String>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    Profile::parse(s).map_err(|e| e.to_string())
}

fn parse_mutation(s: &str) -> Result<Mutation, String> {
    Mutation::parse(s).map_err(|e| e.to_string())
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("MALLIAVIN_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config {
            path: "MALLIAVIN_THREADS".into(),
            message: format!("expected a positive integer, got {v:?}"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn print_report(r: &SuiteReport) {
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    for rec in &r.records {
        let status = if rec.pass { "PASS" } else { "FAIL" };
        match &rec.error {
            Some(e) => println!("{status} {} error: {e}", rec.name),
            None => println!(
                "{status} {} lhs={:.6e} rhs={:.6e} diff={:.3e} tol={:.3e} n={}",
                rec.name, rec.lhs, rec.rhs, rec.diff, rec.tolerance, rec.instances
            ),
        }
    }
    println!("{}/{} checks passed", r.summary.passed, r.summary.total);
}

fn experiment(kind: ExperimentKind, args: &Common) -> Result<SuiteReport, Error> {
    let (mut config, base) = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => (ExperimentConfig::default_for(kind), PathBuf::from(".")),
    };
    if config.kind != kind {
        return Err(Error::Config {
            path: "kind".into(),
            message: format!("config is a {} experiment, not {}", config.kind.name(), kind.name()),
        });
    }
    config.apply(&Overrides {
        seed: args.seed,
        out: args.out.clone(),
        paths: args.paths,
        quad_order: args.quad_order,
        grid_n: args.grid_n,
        profile: args.profile,
    });
    let report = run_experiment(&config, &base)?;
    println!("artifacts written to {}", config.output_dir().display());
    Ok(report)
}

fn suite(args: &SuiteArgs) -> Result<SuiteReport, Error> {
    let report = match &args.check {
        Some(name) => {
            let rec = replay(&Replay {
                check: name.clone(),
                seed: args.seed,
                profile: args.profile.name().into(),
                mutation: args.mutation.map(|m| m.name().into()),
            })?;
            SuiteReport::new("replay", args.seed, args.profile.name(), vec![rec])
        }
        None => run_property_suite(args.seed, args.profile, args.mutation),
    };
    let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    report.write_to(&dir, "report")?;
    println!("artifacts written to {}", dir.display());
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Verify(a) => experiment(ExperimentKind::VerifyIdentities, a),
        Command::ClarkOcone(a) => experiment(ExperimentKind::ClarkOconeConvergence, a),
        Command::Hedge(a) => experiment(ExperimentKind::Hedging, a),
        Command::Gamma(a) => experiment(ExperimentKind::GammaConstants, a),
        Command::L1(a) => experiment(ExperimentKind::L1Extension, a),
        Command::Suite(a) => suite(a),
    };
    match result {
        Ok(r) => {
            print_report(&r);
            if r.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
