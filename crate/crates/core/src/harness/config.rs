//! JSON experiment configs and their validation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::suite::{Mutation, Profile};
use crate::banach::{BanachSpaceSpec, NormTag};
use crate::clark_ocone::{Market, Payoff, TruncationLadder};
use crate::cylindrical::{ConditionalSettings, CylindricalRV, CylindricalTerm, Expr, McFallback};
use crate::error::{Error, Result};
use crate::quadrature::{DEFAULT_ORDER, MAX_ORDER};
use crate::rng;
use crate::time::{StepFunction, TimeGrid};

/// Paths per level above which a budget warning is raised.
pub const PATH_BUDGET: usize = 1_000_000;
/// Path-times-interval count above which a budget warning is raised.
pub const WORK_BUDGET: usize = 200_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyIdentities,
    ClarkOconeConvergence,
    Hedging,
    GammaConstants,
    L1Extension,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyIdentities => "verify-identities",
            ExperimentKind::ClarkOconeConvergence => "clark-ocone-convergence",
            ExperimentKind::Hedging => "hedging",
            ExperimentKind::GammaConstants => "gamma-constants",
            ExperimentKind::L1Extension => "l1-extension",
        }
    }
}

/// `{"T": 1.0, "N": 16}` or `{"T": 1.0, "ladder": [4, 8, 16]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub m: usize,
    #[serde(default = "default_norm")]
    pub norm: String,
}

fn default_norm() -> String {
    "l2".into()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub s0: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// One experiment, as read from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// A random variable: `{"expr", "directions", "x"}`, a full term list, or `{"file": path}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rv: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<Payoff>,
    /// Truncation levels of the L1 ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Vec<f64>>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub suite: SuiteSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paths: Option<usize>,
    pub quad_order: Option<usize>,
    pub grid_n: Option<usize>,
    pub profile: Option<Profile>,
}

/// Deserializes `json`, reporting the field path of the first error.
pub(crate) fn parse_at<T: DeserializeOwned>(json: &str, prefix: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        Error::config(path, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        parse_at(json, "")
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    /// The defaults used by the command line when no config is given.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            kind,
            seed: 42,
            space: None,
            grid: None,
            rv: None,
            market: None,
            payoff: None,
            truncation: None,
            budgets: Budgets::default(),
            suite: SuiteSpec::default(),
            output: OutputSpec::default(),
        };
        let w_squared = serde_json::json!({
            "expr": {"op": "pow", "args": [{"var": 0}], "n": 2},
            "directions": [{"interval": [0.0, 1.0]}]
        });
        match kind {
            ExperimentKind::VerifyIdentities => c.suite.profile = Some(Profile::Quick),
            ExperimentKind::ClarkOconeConvergence => {
                c.rv = Some(w_squared);
                c.grid = Some(GridSpec {
                    horizon: Some(1.0),
                    n: None,
                    ladder: Some(vec![4, 8, 16, 32, 64]),
                });
                c.budgets.paths = Some(20_000);
            }
            ExperimentKind::Hedging => {
                c.market = Some(MarketSpec { s0: 100.0, sigma: 0.2 });
                c.payoff = Some(Payoff::Call {
                    strike: 100.0,
                    smoothing: Some(0.01),
                });
                c.grid = Some(GridSpec {
                    horizon: Some(1.0),
                    n: Some(16),
                    ladder: Some(vec![4, 8, 16, 32, 64]),
                });
                c.budgets.paths = Some(20_000);
                c.budgets.quad_order = Some(256);
            }
            ExperimentKind::GammaConstants => {
                c.space = Some(SpaceSpec { m: 3, norm: "l2".into() });
                c.budgets.trials = Some(100);
                c.budgets.paths = Some(20_000);
            }
            ExperimentKind::L1Extension => {
                c.rv = Some(w_squared);
                c.grid = Some(GridSpec {
                    horizon: Some(1.0),
                    n: Some(8),
                    ladder: None,
                });
                c.truncation = Some(vec![2.0, 4.0, 8.0, 16.0, 32.0]);
                c.budgets.paths = Some(2_000);
            }
        }
        c
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
        if let Some(p) = o.paths {
            self.budgets.paths = Some(p);
        }
        if let Some(q) = o.quad_order {
            self.budgets.quad_order = Some(q);
        }
        if let Some(n) = o.grid_n {
            let g = self.grid.get_or_insert_with(GridSpec::default);
            g.n = Some(n);
            g.ladder = None;
        }
        if let Some(p) = o.profile {
            self.suite.profile = Some(p);
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks every field and resolves the config into a runnable plan.
    pub fn validate(&self, base: &Path) -> Result<Plan> {
        let mut warnings = Vec::new();
        let experiment = match self.kind {
            ExperimentKind::VerifyIdentities => Experiment::Verify {
                profile: self.suite.profile.unwrap_or(Profile::Quick),
                mutation: self.suite.mutation,
            },
            ExperimentKind::ClarkOconeConvergence => {
                let (horizon, grids) = self.grids(true)?;
                let f = self.rv(base, horizon)?;
                let samples = self.paths(20_000)?;
                budget(&mut warnings, samples, &grids);
                Experiment::Convergence {
                    f,
                    grids,
                    samples,
                    settings: self.settings()?,
                }
            }
            ExperimentKind::Hedging => {
                let (horizon, grids) = self.grids(false)?;
                let ms = self.market.as_ref().ok_or_else(|| Error::config("market", "required for hedging"))?;
                let market = Market::new(ms.s0, ms.sigma, horizon).map_err(|e| Error::config("market", e.to_string()))?;
                let payoff = self.payoff.clone().ok_or_else(|| Error::config("payoff", "required for hedging"))?;
                payoff.expr().map_err(|e| Error::config("payoff", e.to_string()))?;
                let g = self.grid.as_ref().expect("checked by grids");
                let grid = match g.n {
                    Some(n) => uniform(horizon, n, "grid.N")?,
                    None => grids.last().expect("non-empty").clone(),
                };
                let ladder = if g.ladder.is_some() { Some(grids) } else { None };
                let samples = self.paths(20_000)?;
                budget(&mut warnings, samples, ladder.as_deref().unwrap_or(std::slice::from_ref(&grid)));
                Experiment::Hedging {
                    market,
                    payoff,
                    grid,
                    ladder,
                    samples,
                    settings: self.settings()?,
                }
            }
            ExperimentKind::GammaConstants => {
                let space = self.space()?.ok_or_else(|| Error::config("space", "required for gamma-constants"))?;
                let trials = self.budgets.trials.unwrap_or(100);
                if trials == 0 {
                    return Err(Error::config("budgets.trials", "must be positive"));
                }
                Experiment::Gamma {
                    space,
                    trials,
                    samples: self.paths(20_000)?,
                }
            }
            ExperimentKind::L1Extension => {
                let (horizon, grids) = self.grids(false)?;
                let grid = grids.last().expect("non-empty").clone();
                let f = self.rv(base, horizon)?;
                let levels = self
                    .truncation
                    .clone()
                    .ok_or_else(|| Error::config("truncation", "required for l1-extension"))?;
                let ladder = TruncationLadder::new(levels).map_err(|e| Error::config("truncation", e.to_string()))?;
                let samples = self.paths(2_000)?;
                budget(&mut warnings, samples * ladder.levels().len(), std::slice::from_ref(&grid));
                Experiment::L1 {
                    f,
                    grid,
                    ladder,
                    samples,
                    settings: self.settings()?,
                }
            }
        };
        Ok(Plan {
            kind: self.kind,
            seed: self.seed,
            experiment,
            warnings,
        })
    }

    fn space(&self) -> Result<Option<BanachSpaceSpec>> {
        let Some(s) = &self.space else { return Ok(None) };
        let norm: NormTag = s.norm.parse().map_err(|e: Error| Error::config("space.norm", e.to_string()))?;
        BanachSpaceSpec::new(s.m, norm)
            .map(Some)
            .map_err(|e| Error::config("space.m", e.to_string()))
    }

    fn paths(&self, default: usize) -> Result<usize> {
        let p = self.budgets.paths.unwrap_or(default);
        if p < 2 {
            return Err(Error::config("budgets.paths", "at least 2 paths are needed for a standard error"));
        }
        Ok(p)
    }

    fn settings(&self) -> Result<ConditionalSettings> {
        let order = self.budgets.quad_order.unwrap_or(DEFAULT_ORDER);
        if order == 0 || order > MAX_ORDER {
            return Err(Error::config("budgets.quad_order", format!("must lie in 1..={MAX_ORDER}")));
        }
        Ok(ConditionalSettings {
            order,
            mc_fallback: Some(McFallback {
                samples: crate::cylindrical::DEFAULT_MC_SAMPLES,
                seed: rng::named_seed(self.seed, "conditional"),
            }),
        })
    }

    /// The horizon and the grids; a ladder is required when `need_ladder`.
    fn grids(&self, need_ladder: bool) -> Result<(f64, Vec<TimeGrid>)> {
        let g = self.grid.as_ref().ok_or_else(|| Error::config("grid.N", "missing grid: give N or ladder"))?;
        let horizon = g.horizon.unwrap_or(1.0);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config("grid.T", "horizon must be positive and finite"));
        }
        let grids = match (&g.ladder, g.n) {
            (Some(l), _) => {
                if l.len() < 2 {
                    return Err(Error::config("grid.ladder", "needs at least two levels"));
                }
                if l.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::config("grid.ladder", "levels must increase"));
                }
                l.iter()
                    .enumerate()
                    .map(|(i, &n)| uniform(horizon, n, &format!("grid.ladder[{i}]")))
                    .collect::<Result<Vec<_>>>()?
            }
            (None, Some(n)) if need_ladder => (0..5)
                .map(|k| uniform(horizon, n << k, "grid.N"))
                .collect::<Result<Vec<_>>>()?,
            (None, Some(n)) => vec![uniform(horizon, n, "grid.N")?],
            (None, None) => return Err(Error::config("grid.N", "missing: give N or ladder")),
        };
        Ok((horizon, grids))
    }

    fn rv(&self, base: &Path, horizon: f64) -> Result<CylindricalRV> {
        let v = self.rv.as_ref().ok_or_else(|| Error::config("rv", "required for this experiment"))?;
        let f = resolve_rv(v, base, horizon, self.space()?, "rv")?;
        if let Some(h) = f.horizon() {
            if (h - horizon).abs() > crate::time::GRID_TOL {
                return Err(Error::config("rv", format!("directions live on [0, {h}] but grid.T = {horizon}")));
            }
        }
        Ok(f)
    }
}

fn uniform(horizon: f64, n: usize, path: &str) -> Result<TimeGrid> {
    if n == 0 {
        return Err(Error::config(path, "must be positive"));
    }
    TimeGrid::uniform(horizon, n).map_err(|e| Error::config(path, e.to_string()))
}

fn budget(warnings: &mut Vec<String>, samples: usize, grids: &[TimeGrid]) {
    if samples > PATH_BUDGET {
        warnings.push(format!("budget: {samples} paths exceed {PATH_BUDGET}"));
    }
    let work = samples.saturating_mul(grids.iter().map(TimeGrid::len).sum());
    if work > WORK_BUDGET {
        warnings.push(format!("budget: {work} path-intervals exceed {WORK_BUDGET}"));
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRef {
    file: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimpleRv {
    expr: Expr,
    directions: Vec<DirectionSpec>,
    #[serde(default)]
    x: Option<Vec<f64>>,
    #[serde(default)]
    assume_integrable: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Interval {
    interval: [f64; 2],
    #[serde(default = "one")]
    scale: f64,
    #[serde(default)]
    component: usize,
    #[serde(default = "one_usize")]
    dim: usize,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DirectionSpec {
    Interval(Interval),
    Step(StepFunction),
}

/// Parses the `rv` field: a reference to another file, the short form
/// `{"expr", "directions", "x"}` or the full `{"codomain", "terms"}` form.
fn resolve_rv(v: &serde_json::Value, base: &Path, horizon: f64, space: Option<BanachSpaceSpec>, path: &str) -> Result<CylindricalRV> {
    let text = v.to_string();
    let obj = v.as_object().ok_or_else(|| Error::config(path, "expected an object"))?;
    if obj.contains_key("file") {
        let r: FileRef = parse_at(&text, path)?;
        let file = base.join(&r.file);
        let inner = fs::read_to_string(&file)
            .map_err(|e| Error::config(format!("{path}.file"), format!("{}: {e}", file.display())))?;
        let inner: serde_json::Value = parse_at(&inner, &format!("{path}.file"))?;
        return resolve_rv(&inner, base, horizon, space, &format!("{path}.file"));
    }
    if obj.contains_key("terms") {
        return parse_at(&text, path);
    }
    let s: SimpleRv = parse_at(&text, path)?;
    let dirs = s
        .directions
        .into_iter()
        .enumerate()
        .map(|(i, d)| match d {
            DirectionSpec::Step(f) => Ok(f),
            DirectionSpec::Interval(iv) => {
                let [a, b] = iv.interval;
                StepFunction::indicator_component(horizon, a, b, iv.dim, iv.component)
                    .map(|f| f.scale(iv.scale))
                    .map_err(|e| Error::config(format!("{path}.directions[{i}]"), e.to_string()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let codomain = space.unwrap_or(BanachSpaceSpec::hilbert(s.x.as_ref().map_or(1, Vec::len)));
    let x = s.x.unwrap_or_else(|| {
        let mut e = vec![0.0; codomain.m];
        e[0] = 1.0;
        e
    });
    let term = CylindricalTerm::new(s.expr, dirs, x).map_err(|e| Error::config(path, e.to_string()))?;
    CylindricalRV::new(vec![term], codomain, s.assume_integrable).map_err(|e| Error::config(path, e.to_string()))
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct Plan {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub experiment: Experiment,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum Experiment {
    Verify {
        profile: Profile,
        mutation: Option<Mutation>,
    },
    Convergence {
        f: CylindricalRV,
        grids: Vec<TimeGrid>,
        samples: usize,
        settings: ConditionalSettings,
    },
    Hedging {
        market: Market,
        payoff: Payoff,
        grid: TimeGrid,
        ladder: Option<Vec<TimeGrid>>,
        samples: usize,
        settings: ConditionalSettings,
    },
    Gamma {
        space: BanachSpaceSpec,
        trials: usize,
        samples: usize,
    },
    L1 {
        f: CylindricalRV,
        grid: TimeGrid,
        ladder: TruncationLadder,
        samples: usize,
        settings: ConditionalSettings,
    },
}
