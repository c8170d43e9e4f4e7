use serde::{Deserialize, Serialize};

use super::projection::AdaptedProjectionProcess;
use super::representation::clark_ocone;
use crate::banach::{gamma_norm_matrix, BanachSpaceSpec, GammaMode};
use crate::cylindrical::{ConditionalSettings, CylindricalRV, CylindricalTerm};
use crate::error::{Error, Result};
use crate::integral::{gamma_matrix, left_point_sum, AdaptedIntegrand};
use crate::rng;
use crate::stats::{mean_and_se, monotone_violations, Comparison};
use crate::time::{sample_path_stream, TimeGrid};

/// Levels `c_1 < c_2 < …` at which `f` is clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TruncationLadder {
    levels: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TruncationLadder {
    type Error = Error;
    fn try_from(levels: Vec<f64>) -> Result<Self> {
        TruncationLadder::new(levels)
    }
}

impl From<TruncationLadder> for Vec<f64> {
    fn from(l: TruncationLadder) -> Self {
        l.levels
    }
}

impl TruncationLadder {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidArgument("a ladder needs at least two levels".into()));
        }
        if levels.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidArgument("ladder levels must be positive and finite".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("ladder levels must increase".into()));
        }
        Ok(TruncationLadder { levels })
    }

    /// `c, 2c, 4c, …` with `n` levels.
    pub fn geometric(c: f64, n: usize) -> Result<Self> {
        TruncationLadder::new((0..n).map(|k| c * 2f64.powi(k as i32)).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// `F_c`: every term `f(W(h)) x` becomes `clip_c(f(W(h))) x` with the C² soft clip.
pub fn truncate(f: &CylindricalRV, c: f64) -> Result<CylindricalRV> {
    let terms = f
        .terms()
        .iter()
        .map(|t| CylindricalTerm::new(t.function().expr().clone().soft_clip(c), t.directions().to_vec(), t.coefficient().to_vec()))
        .collect::<Result<_>>()?;
    CylindricalRV::new(terms, *f.codomain(), f.assumes_integrable())
}

/// `min(‖X‖_γ, 1)` for one path, with `X` laid out by [`gamma_matrix`].
fn capped_gamma_norm(m: &nalgebra::DMatrix<f64>, space: &BanachSpaceSpec, seed: u64) -> Result<f64> {
    let v = if space.is_hilbert() {
        m.norm()
    } else {
        gamma_norm_matrix(m, space, GammaMode::Auto { samples: 2_000, seed })?.value
    };
    Ok(v.min(1.0))
}

/// A d-metric estimate `E(‖·‖ ∧ 1)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub value: f64,
    pub std_error: f64,
}

impl Distance {
    fn of(v: &[f64]) -> Self {
        let (value, std_error) = mean_and_se(v);
        Distance { value, std_error }
    }
}

/// Outcome of the truncation ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Report {
    pub levels: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// `d(Y^(n), Y^(n+1))`.
    pub successive: Vec<Distance>,
    /// `d(F, E F_n + I(Y^(n)))` per level.
    pub representation: Vec<Distance>,
    /// Increases along `successive`.
    pub violations: usize,
    /// `d(Y^(top), Y)` against the untruncated integrand, when it exists.
    pub direct_distance: Option<Distance>,
    /// Paired comparison of the per-path representation errors of the top
    /// level and of the untruncated integrand.
    pub direct_comparison: Option<Comparison>,
}

impl L1Report {
    /// Non-increasing successive distances, and agreement with the direct integrand when it was computed.
    pub fn pass(&self) -> bool {
        self.violations == 0 && self.direct_comparison.as_ref().is_none_or(|c| c.pass)
    }
}

/// Clark-Ocone integrands of the truncations `F_n` and their d-metric behaviour.
///
/// With `compare_direct` the integrand of `F` itself is also computed, which
/// needs the conditional expectations of `∂f` to be finite.
#[allow(clippy::too_many_arguments)]
pub fn clark_ocone_l1(
    f: &CylindricalRV,
    ladder: &TruncationLadder,
    grid: &TimeGrid,
    samples: usize,
    settings: &ConditionalSettings,
    seed: u64,
    compare_direct: bool,
) -> Result<L1Report> {
    let mut reps = ladder
        .levels()
        .iter()
        .map(|&c| clark_ocone(&truncate(f, c)?, grid, settings))
        .collect::<Result<Vec<_>>>()?;
    if compare_direct {
        reps.push(clark_ocone(f, grid, settings)?);
    }
    let mut sampling = grid.clone();
    for r in &reps {
        sampling = sampling.union(r.integrand.sampling_grid())?;
    }
    let integrands: Vec<AdaptedProjectionProcess> = reps
        .iter()
        .map(|r| r.integrand.resampled(&sampling))
        .collect::<Result<_>>()?;
    let compiled = f.compile(&sampling)?;
    let d = integrands[0].dim();
    let space = *f.codomain();
    let map = sampling.coarse_index_map(grid)?;
    let n = ladder.levels().len();
    let gamma_seed = rng::named_seed(seed, "l1-gamma");

    struct PathRow {
        successive: Vec<f64>,
        representation: Vec<f64>,
        direct: Option<f64>,
    }
    let rows = rng::try_par_collect(samples, |s| -> Result<PathRow> {
        let path = sample_path_stream(&sampling, d, seed, s);
        let inc = path.increments();
        let fv = compiled.evaluate(inc);
        let mut dw = vec![vec![0.0; d]; grid.len()];
        for (fine, &c) in map.iter().enumerate() {
            for (o, v) in dw[c].iter_mut().zip(&inc[fine * d..(fine + 1) * d]) {
                *o += v;
            }
        }
        let values: Vec<_> = integrands.iter().map(|y| y.values_flat(inc)).collect();
        let mats: Vec<_> = values.iter().map(|v| gamma_matrix(grid, v)).collect();
        let gs = rng::child_seed(gamma_seed, s);
        let successive = (0..n - 1)
            .map(|l| capped_gamma_norm(&(&mats[l + 1] - &mats[l]), &space, gs))
            .collect::<Result<_>>()?;
        let representation = (0..reps.len())
            .map(|l| {
                let ito = left_point_sum(&values[l], &dw);
                let r: Vec<f64> = fv.iter().zip(&reps[l].mean).zip(&ito).map(|((a, b), c)| a - b - c).collect();
                space.norm(&r).min(1.0)
            })
            .collect();
        let direct = if compare_direct {
            Some(capped_gamma_norm(&(&mats[n] - &mats[n - 1]), &space, gs)?)
        } else {
            None
        };
        Ok(PathRow {
            successive,
            representation,
            direct,
        })
    })?;

    let column = |get: &dyn Fn(&PathRow) -> f64| -> Vec<f64> { rows.iter().map(get).collect() };
    let successive: Vec<Distance> = (0..n - 1).map(|l| Distance::of(&column(&|r| r.successive[l]))).collect();
    let representation: Vec<Distance> = (0..n).map(|l| Distance::of(&column(&|r| r.representation[l]))).collect();
    let (direct_distance, direct_comparison) = if compare_direct {
        let top = column(&|r| r.representation[n - 1]);
        let direct = column(&|r| r.representation[n]);
        (
            Some(Distance::of(&column(&|r| r.direct.unwrap_or(0.0)))),
            Some(Comparison::paired(&top, &direct)),
        )
    } else {
        (None, None)
    };
    let values: Vec<f64> = successive.iter().map(|d| d.value).collect();
    Ok(L1Report {
        levels: ladder.levels().to_vec(),
        samples,
        seed,
        violations: monotone_violations(&values),
        successive,
        representation,
        direct_distance,
        direct_comparison,
    })
}

/// `d(X, Y) = E(‖X − Y‖_γ ∧ 1)` for two processes on the same grid.
pub fn l0_distance<X, Y>(x: &X, y: &Y, samples: usize, seed: u64) -> Result<Distance>
where
    X: AdaptedIntegrand,
    Y: AdaptedIntegrand,
{
    if x.grid() != y.grid() {
        return Err(Error::GridIncompatible("the d-metric compares processes on one grid".into()));
    }
    if x.sampling_grid() != y.sampling_grid() {
        return Err(Error::GridIncompatible("processes must share a sampling grid".into()));
    }
    let space = *x.codomain();
    let gamma_seed = rng::named_seed(seed, "l0-gamma");
    let v = rng::try_par_collect(samples, |s| -> Result<f64> {
        let path = sample_path_stream(x.sampling_grid(), x.dim(), seed, s);
        let a = gamma_matrix(x.grid(), &x.values(&path)?);
        let b = gamma_matrix(y.grid(), &y.values(&path)?);
        capped_gamma_norm(&(a - b), &space, rng::child_seed(gamma_seed, s))
    })?;
    Ok(Distance::of(&v))
}
