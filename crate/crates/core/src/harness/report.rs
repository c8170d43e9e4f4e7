//! Versioned CSV and JSON reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::Comparison;

/// Version tag written into every report; bump when a header or key changes.
pub const REPORT_SCHEMA: &str = "malliavin-report/1";

/// CSV header of [`SuiteReport::write_csv`].
pub const SUITE_CSV_HEADER: [&str; 11] = [
    "schema", "name", "anchor", "kind", "lhs", "rhs", "diff", "tolerance", "pass", "instances", "seed",
];

/// Inputs that reproduce a check bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replay {
    pub check: String,
    pub seed: u64,
    pub profile: String,
    pub mutation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Topic of the identity being checked.
    pub anchor: String,
    /// `chaos`, `monte-carlo`, `exact` or `experiment`.
    pub kind: String,
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub instances: usize,
    pub seed: u64,
    /// Index of the instance reported in `lhs`/`rhs` (the worst one).
    pub worst_instance: usize,
    pub replay: Replay,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    /// Folds per-instance comparisons, keeping the one closest to failing.
    pub fn from_comparisons(name: &str, anchor: &str, kind: &str, replay: Replay, cs: &[Comparison]) -> Self {
        let score = |c: &Comparison| {
            if c.pass {
                if c.tolerance > 0.0 {
                    c.diff / c.tolerance
                } else {
                    0.0
                }
            } else {
                f64::INFINITY
            }
        };
        let (worst, c) = cs
            .iter()
            .enumerate()
            .fold((0, None::<&Comparison>), |(wi, w), (i, c)| match w {
                Some(w) if score(w) >= score(c) => (wi, Some(w)),
                _ => (i, Some(c)),
            });
        let c = c.copied().unwrap_or(Comparison::exact(0.0, 0.0, 0.0));
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            kind: kind.into(),
            lhs: c.lhs,
            rhs: c.rhs,
            diff: c.diff,
            tolerance: c.tolerance,
            pass: !cs.is_empty() && cs.iter().all(|c| c.pass),
            instances: cs.len(),
            seed: replay.seed,
            worst_instance: worst,
            replay,
            error: None,
        }
    }

    pub fn failed_with(name: &str, anchor: &str, kind: &str, replay: Replay, error: String) -> Self {
        CheckRecord {
            name: name.into(),
            anchor: anchor.into(),
            kind: kind.into(),
            lhs: 0.0,
            rhs: 0.0,
            diff: 0.0,
            tolerance: 0.0,
            pass: false,
            instances: 0,
            seed: replay.seed,
            worst_instance: 0,
            replay,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

/// Facts about the build that produced a report. Deliberately free of
/// timestamps, host names and thread counts so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub crate_version: String,
    pub target_os: String,
    pub target_arch: String,
    pub float: String,
    pub rng: String,
}

impl Fingerprint {
    pub fn current() -> Self {
        Fingerprint {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            target_os: std::env::consts::OS.into(),
            target_arch: std::env::consts::ARCH.into(),
            float: "f64".into(),
            rng: "chacha8 streams".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: String,
    pub suite: String,
    pub seed: u64,
    pub profile: String,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
    pub fingerprint: Fingerprint,
    /// Budget warnings raised while validating the config.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SuiteReport {
    pub fn new(suite: &str, seed: u64, profile: &str, records: Vec<CheckRecord>) -> Self {
        let passed = records.iter().filter(|r| r.pass).count();
        SuiteReport {
            schema: REPORT_SCHEMA.into(),
            suite: suite.into(),
            seed,
            profile: profile.into(),
            summary: Summary {
                total: records.len(),
                passed,
                failed: records.len() - passed,
            },
            records,
            fingerprint: Fingerprint::current(),
            warnings: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SUITE_CSV_HEADER)?;
        for r in &self.records {
            out.write_record([
                REPORT_SCHEMA.to_string(),
                r.name.clone(),
                r.anchor.clone(),
                r.kind.clone(),
                fmt(r.lhs),
                fmt(r.rhs),
                fmt(r.diff),
                fmt(r.tolerance),
                r.pass.to_string(),
                r.instances.to_string(),
                r.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv` under `dir`.
    pub fn write_to(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        self.write_csv(fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        Ok(())
    }
}

/// Shortest round-trip representation, `NaN` spelled out.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}
