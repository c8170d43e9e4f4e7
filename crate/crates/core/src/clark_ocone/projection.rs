use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::banach::BanachSpaceSpec;
use crate::cylindrical::{ConditionalPlan, ConditionalSettings, CylindricalRV};
use crate::error::{Error, Result};
use crate::integral::{process_family, AdaptedIntegrand, StepProcess, CHAOS_TOL};
use crate::rng;
use crate::stats::{CheckMode, Comparison};
use crate::time::{sample_path_stream, BrownianPath, TimeGrid};

/// Where an adapted process came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub settings: ConditionalSettings,
}

/// A conditional-expectation plan with its past directions laid out on the sampling grid.
#[derive(Debug, Clone)]
struct CompiledPlan {
    plan: ConditionalPlan,
    past: Vec<Vec<Vec<f64>>>,
}

impl CompiledPlan {
    fn new(plan: ConditionalPlan, sampling: &TimeGrid) -> Result<Self> {
        let past = (0..plan.len())
            .map(|i| {
                plan.past_directions(i)
                    .iter()
                    .map(|h| Ok(h.refine(sampling)?.values().to_vec()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(CompiledPlan { plan, past })
    }

    fn past_values(&self, increments: &[f64]) -> Vec<Vec<f64>> {
        self.past
            .iter()
            .map(|t| t.iter().map(|h| h.iter().zip(increments).map(|(a, b)| a * b).sum()).collect())
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Cell {
    /// `E(Y_i e_k | F_{t_{i-1}})`, one plan per `k`.
    Projection(Vec<CompiledPlan>),
    /// `Σ_terms Σ_j E(∂_j f | F_t) h_j(t⁺)_k x`; `weights[term][j][k] = h_j(t⁺)_k`.
    Gradient {
        plan: CompiledPlan,
        weights: Vec<Vec<Vec<f64>>>,
    },
}

/// An adapted process whose value on `(t_{i-1}, t_i]` is computed from the
/// path before `t_{i-1}` by Gaussian conditioning.
#[derive(Debug, Clone)]
pub struct AdaptedProjectionProcess {
    grid: TimeGrid,
    dim: usize,
    codomain: BanachSpaceSpec,
    sampling: TimeGrid,
    cells: Vec<Cell>,
    provenance: Provenance,
}

impl AdaptedProjectionProcess {
    pub(crate) fn gradient(
        grid: TimeGrid,
        dim: usize,
        f: &CylindricalRV,
        settings: &ConditionalSettings,
        source: String,
    ) -> Result<Self> {
        let mut sampling = grid.clone();
        for h in f.directions() {
            sampling = sampling.union(h.grid())?;
        }
        let cells = (0..grid.len())
            .map(|i| {
                let t = grid.start(i);
                let plan = CompiledPlan::new(ConditionalPlan::new(f, t, settings)?, &sampling)?;
                let weights = f
                    .terms()
                    .iter()
                    .map(|term| term.directions().iter().map(|h| h.value_after(t)).collect())
                    .collect();
                Ok(Cell::Gradient { plan, weights })
            })
            .collect::<Result<_>>()?;
        Ok(AdaptedProjectionProcess {
            grid,
            dim,
            codomain: *f.codomain(),
            sampling,
            cells,
            provenance: Provenance {
                source,
                settings: *settings,
            },
        })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `Y_i(ω)` from the flat increments of a path on [`AdaptedIntegrand::sampling_grid`].
    pub fn value_flat(&self, i: usize, increments: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.codomain.m, self.dim);
        match &self.cells[i] {
            Cell::Projection(plans) => {
                for (k, p) in plans.iter().enumerate() {
                    let v = p.plan.expectation_from(&p.past_values(increments)).value;
                    for (r, x) in v.into_iter().enumerate() {
                        out[(r, k)] = x;
                    }
                }
            }
            Cell::Gradient { plan, weights } => {
                let grads = plan.plan.gradients_from(&plan.past_values(increments));
                for (term, (g, w)) in grads.iter().zip(weights).enumerate() {
                    let x = plan.plan.coefficient(term);
                    for k in 0..self.dim {
                        let s: f64 = g.iter().zip(w).map(|(gj, wj)| gj * wj[k]).sum();
                        if s != 0.0 {
                            for (r, xv) in x.iter().enumerate() {
                                out[(r, k)] += s * xv;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// All `Y_i(ω)` from flat increments on the sampling grid.
    pub fn values_flat(&self, increments: &[f64]) -> Vec<DMatrix<f64>> {
        (0..self.grid.len()).map(|i| self.value_flat(i, increments)).collect()
    }
}

impl AdaptedIntegrand for AdaptedProjectionProcess {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn codomain(&self) -> &BanachSpaceSpec {
        &self.codomain
    }

    fn sampling_grid(&self) -> &TimeGrid {
        &self.sampling
    }

    fn values(&self, path: &BrownianPath) -> Result<Vec<DMatrix<f64>>> {
        if *path.grid() != self.sampling {
            return Err(Error::GridIncompatible(
                "paths must be sampled on the sampling grid of the process".into(),
            ));
        }
        Ok(self.values_flat(path.increments()))
    }
}

/// `(P_F Y)(t) = E(Y(t) | F_t)`, evaluated at the left end of each interval.
pub fn adapted_projection(y: &StepProcess, settings: &ConditionalSettings) -> Result<AdaptedProjectionProcess> {
    let sampling = y.sampling_grid().clone();
    let cells = y
        .coefficients()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let t = y.grid().start(i);
            let plans = row
                .iter()
                .map(|rv| CompiledPlan::new(ConditionalPlan::new(rv, t, settings)?, &sampling))
                .collect::<Result<_>>()?;
            Ok(Cell::Projection(plans))
        })
        .collect::<Result<_>>()?;
    Ok(AdaptedProjectionProcess {
        grid: y.grid().clone(),
        dim: y.dim(),
        codomain: *y.codomain(),
        sampling,
        cells,
        provenance: Provenance {
            source: "adapted projection of a step process".into(),
            settings: *settings,
        },
    })
}

fn weighted_pairing(grid: &TimeGrid, x: &[DMatrix<f64>], y: &[DMatrix<f64>]) -> f64 {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (a, b))| grid.dt(i) * a.dot(b))
        .sum()
}

/// `E⟨X, P Y⟩ = E⟨P X, Y⟩` for processes on a shared grid (`Y` over `E*`).
///
/// Chaos mode uses the discrete projection of the exact chaos forms; Monte
/// Carlo mode uses the quadrature projection with `settings`.
pub fn self_adjointness_check(
    x: &StepProcess,
    y: &StepProcess,
    mode: CheckMode,
    settings: &ConditionalSettings,
) -> Result<Comparison> {
    if x.grid() != y.grid() {
        return Err(Error::GridIncompatible("self-adjointness check needs a shared grid".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::dims(x.dim(), y.dim()));
    }
    if x.codomain().m != y.codomain().m {
        return Err(Error::dims(x.codomain().m, y.codomain().m));
    }
    let sampling = x.sampling_grid().union(y.sampling_grid())?;
    match mode {
        CheckMode::Chaos => {
            let family = process_family(x.grid(), x.dim(), &sampling)?;
            let hx = x.to_h_chaos_on(&family)?;
            let hy = y.to_h_chaos_on(&family)?;
            let lhs = hx.pairing(&hy.adapted_projection()?)?;
            let rhs = hx.adapted_projection()?.pairing(&hy)?;
            Ok(Comparison::exact(lhs, rhs, CHAOS_TOL))
        }
        CheckMode::MonteCarlo { samples, seed } => {
            let cx = x.compile(&sampling)?;
            let cy = y.compile(&sampling)?;
            let px = adapted_projection(x, settings)?;
            let py = adapted_projection(y, settings)?;
            let ppx = recompile(&px, &sampling)?;
            let ppy = recompile(&py, &sampling)?;
            let pairs = rng::par_collect(samples, |s| {
                let path = sample_path_stream(&sampling, x.dim(), seed, s);
                let inc = path.increments();
                let lhs = weighted_pairing(x.grid(), &cx.values(inc), &ppy.values_flat(inc));
                let rhs = weighted_pairing(x.grid(), &ppx.values_flat(inc), &cy.values(inc));
                (lhs, rhs)
            });
            let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            Ok(Comparison::paired(&lhs, &rhs))
        }
    }
}

/// The same process with its plans laid out on a finer sampling grid.
fn recompile(p: &AdaptedProjectionProcess, sampling: &TimeGrid) -> Result<AdaptedProjectionProcess> {
    if p.sampling == *sampling {
        return Ok(p.clone());
    }
    let redo = |c: &CompiledPlan| CompiledPlan::new(c.plan.clone(), sampling);
    let cells = p
        .cells
        .iter()
        .map(|c| {
            Ok(match c {
                Cell::Projection(plans) => Cell::Projection(plans.iter().map(redo).collect::<Result<_>>()?),
                Cell::Gradient { plan, weights } => Cell::Gradient {
                    plan: redo(plan)?,
                    weights: weights.clone(),
                },
            })
        })
        .collect::<Result<_>>()?;
    Ok(AdaptedProjectionProcess {
        sampling: sampling.clone(),
        cells,
        ..p.clone()
    })
}

impl AdaptedProjectionProcess {
    /// The same process evaluated from paths on `sampling`, which must refine the current sampling grid.
    pub fn resampled(&self, sampling: &TimeGrid) -> Result<Self> {
        if !sampling.refines(&self.sampling) {
            return Err(Error::GridIncompatible("new sampling grid must refine the old one".into()));
        }
        recompile(self, sampling)
    }
}

/// `E (P Y)_i e_k = E Y_i e_k` for every interval, unit vector and component, by Monte Carlo.
pub fn expectation_preservation_check(
    y: &StepProcess,
    settings: &ConditionalSettings,
    samples: usize,
    seed: u64,
) -> Result<Vec<Comparison>> {
    let sampling = y.sampling_grid().clone();
    let cy = y.compile(&sampling)?;
    let py = adapted_projection(y, settings)?;
    let rows = rng::par_collect(samples, |s| {
        let path = sample_path_stream(&sampling, y.dim(), seed, s);
        let inc = path.increments();
        let a: Vec<f64> = cy.values(inc).iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect();
        let b: Vec<f64> = py.values_flat(inc).iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect();
        (a, b)
    });
    let width = rows.first().map_or(0, |r| r.0.len());
    Ok((0..width)
        .map(|c| {
            let a: Vec<f64> = rows.iter().map(|r| r.0[c]).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.1[c]).collect();
            Comparison::paired(&b, &a)
        })
        .collect())
}
