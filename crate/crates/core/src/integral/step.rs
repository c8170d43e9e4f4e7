use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{gamma_matrix, left_point_sum, AdaptedIntegrand};
use crate::banach::BanachSpaceSpec;
use crate::cylindrical::{CompiledRV, CylindricalRV};
use crate::error::{Error, Result};
use crate::time::{BrownianPath, TimeGrid};

/// A process with cylindrical coefficients, constant on each grid interval.
///
/// `coefficient(i, k)` is `X_i e_k`, the value on `(t_{i-1}, t_i]` applied to
/// the `k`-th unit vector of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRepr", into = "StepRepr")]
pub struct StepProcess {
    grid: TimeGrid,
    dim: usize,
    codomain: BanachSpaceSpec,
    coeffs: Vec<Vec<CylindricalRV>>,
    adapted: bool,
    sampling: TimeGrid,
}

#[derive(Serialize, Deserialize)]
struct StepRepr {
    grid: TimeGrid,
    dim: usize,
    codomain: BanachSpaceSpec,
    coefficients: Vec<Vec<CylindricalRV>>,
    adapted: bool,
}

impl TryFrom<StepRepr> for StepProcess {
    type Error = Error;
    fn try_from(r: StepRepr) -> Result<Self> {
        StepProcess::new(r.grid, r.dim, r.codomain, r.coefficients, r.adapted)
    }
}

impl From<StepProcess> for StepRepr {
    fn from(p: StepProcess) -> Self {
        StepRepr {
            grid: p.grid,
            dim: p.dim,
            codomain: p.codomain,
            coefficients: p.coeffs,
            adapted: p.adapted,
        }
    }
}

impl StepProcess {
    /// With `adapted` set, coefficient `i` must only use the path before `t_{i-1}`.
    pub fn new(
        grid: TimeGrid,
        dim: usize,
        codomain: BanachSpaceSpec,
        coeffs: Vec<Vec<CylindricalRV>>,
        adapted: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension d must be positive".into()));
        }
        if coeffs.len() != grid.len() {
            return Err(Error::dims(grid.len(), coeffs.len()));
        }
        let mut sampling = grid.clone();
        for (i, row) in coeffs.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::dims(dim, row.len()));
            }
            for rv in row {
                if *rv.codomain() != codomain {
                    return Err(Error::ShapeMismatch(format!(
                        "coefficient on interval {i} takes values in {:?}, expected {:?}",
                        rv.codomain(),
                        codomain
                    )));
                }
                for h in rv.directions() {
                    if h.dim() != dim {
                        return Err(Error::dims(dim, h.dim()));
                    }
                    if (h.horizon() - grid.horizon()).abs() > crate::time::GRID_TOL {
                        return Err(Error::HorizonMismatch(h.horizon(), grid.horizon()));
                    }
                    sampling = sampling.union(h.grid())?;
                }
                if adapted && !rv.measurable_at(grid.start(i)) {
                    return Err(Error::NotAdapted(format!(
                        "coefficient on interval {i} depends on increments after t = {}",
                        grid.start(i)
                    )));
                }
            }
        }
        Ok(StepProcess {
            grid,
            dim,
            codomain,
            coeffs,
            adapted,
            sampling,
        })
    }

    pub fn adapted(grid: TimeGrid, dim: usize, codomain: BanachSpaceSpec, coeffs: Vec<Vec<CylindricalRV>>) -> Result<Self> {
        Self::new(grid, dim, codomain, coeffs, true)
    }

    pub fn anticipating(
        grid: TimeGrid,
        dim: usize,
        codomain: BanachSpaceSpec,
        coeffs: Vec<Vec<CylindricalRV>>,
    ) -> Result<Self> {
        Self::new(grid, dim, codomain, coeffs, false)
    }

    /// Deterministic process with `values[i][k] = X_i e_k`.
    pub fn deterministic(grid: TimeGrid, codomain: BanachSpaceSpec, values: &[Vec<Vec<f64>>]) -> Result<Self> {
        let dim = values.first().map_or(0, Vec::len);
        let coeffs = values
            .iter()
            .map(|row| row.iter().map(|x| CylindricalRV::constant(x, codomain)).collect())
            .collect::<Result<_>>()?;
        Self::adapted(grid, dim, codomain, coeffs)
    }

    pub fn is_adapted(&self) -> bool {
        self.adapted
    }

    pub fn coefficient(&self, i: usize, k: usize) -> &CylindricalRV {
        &self.coeffs[i][k]
    }

    pub fn coefficients(&self) -> &[Vec<CylindricalRV>] {
        &self.coeffs
    }

    /// Whether every coefficient is polynomial (the exact chaos domain).
    pub fn is_polynomial(&self) -> bool {
        self.coeffs.iter().flatten().all(CylindricalRV::is_polynomial)
    }

    /// `a X + b Y` on a shared grid; adapted if both are.
    pub fn linear_combination(&self, a: f64, b: f64, other: &StepProcess) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridIncompatible("processes live on different grids".into()));
        }
        if self.dim != other.dim {
            return Err(Error::dims(self.dim, other.dim));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x.scale(a).add(&y.scale(b))).collect())
            .collect::<Result<_>>()?;
        Self::new(self.grid.clone(), self.dim, self.codomain, coeffs, self.adapted && other.adapted)
    }

    /// `I(X)` on one path; rejects anticipating processes.
    pub fn ito_integral_path(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        if !self.adapted {
            return Err(Error::NotAdapted(
                "the Itô integral needs an adapted process; use the Skorokhod integral".into(),
            ));
        }
        super::ito_sum(self, path)
    }

    /// The left-point sum `Σ_i X_i ΔW_i` without any adaptedness requirement.
    pub fn forward_sum_path(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        super::ito_sum(self, path)
    }

    /// Coefficients pre-refined to `grid` (a refinement of the sampling grid).
    pub fn compile(&self, grid: &TimeGrid) -> Result<CompiledStepProcess> {
        let map = grid.coarse_index_map(&self.grid)?;
        if !grid.refines(&self.sampling) {
            return Err(Error::GridIncompatible("compile grid must refine every coefficient grid".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .map(|row| row.iter().map(|rv| rv.compile(grid)).collect())
            .collect::<Result<_>>()?;
        Ok(CompiledStepProcess {
            grid: self.grid.clone(),
            dim: self.dim,
            m: self.codomain.m,
            coeffs,
            map,
        })
    }
}

impl AdaptedIntegrand for StepProcess {
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

    fn is_adapted(&self) -> bool {
        self.adapted
    }

    fn values(&self, path: &BrownianPath) -> Result<Vec<DMatrix<f64>>> {
        let m = self.codomain.m;
        self.coeffs
            .iter()
            .map(|row| {
                let mut x = DMatrix::zeros(m, self.dim);
                for (k, rv) in row.iter().enumerate() {
                    for (r, v) in rv.evaluate(path)?.into_iter().enumerate() {
                        x[(r, k)] = v;
                    }
                }
                Ok(x)
            })
            .collect()
    }
}

/// A [`StepProcess`] compiled against one sampling grid.
#[derive(Debug, Clone)]
pub struct CompiledStepProcess {
    grid: TimeGrid,
    dim: usize,
    m: usize,
    coeffs: Vec<Vec<CompiledRV>>,
    map: Vec<usize>,
}

impl CompiledStepProcess {
    /// `X_i(ω)` from the flat increments on the compiled grid.
    pub fn values(&self, increments: &[f64]) -> Vec<DMatrix<f64>> {
        self.coeffs
            .iter()
            .map(|row| {
                let mut x = DMatrix::zeros(self.m, self.dim);
                for (k, rv) in row.iter().enumerate() {
                    for (r, v) in rv.evaluate(increments).into_iter().enumerate() {
                        x[(r, k)] = v;
                    }
                }
                x
            })
            .collect()
    }

    /// Increments over the process intervals.
    pub fn coarse_increments(&self, increments: &[f64]) -> Vec<Vec<f64>> {
        let d = self.dim;
        let mut out = vec![vec![0.0; d]; self.grid.len()];
        for (fine, &c) in self.map.iter().enumerate() {
            for (o, v) in out[c].iter_mut().zip(&increments[fine * d..(fine + 1) * d]) {
                *o += v;
            }
        }
        out
    }

    /// `Σ_i X_i ΔW_i`.
    pub fn forward_sum(&self, increments: &[f64]) -> Vec<f64> {
        let v = self.values(increments);
        let mut out = left_point_sum(&v, &self.coarse_increments(increments));
        out.resize(self.m, 0.0);
        out
    }

    pub fn gamma_matrix(&self, increments: &[f64]) -> DMatrix<f64> {
        gamma_matrix(&self.grid, &self.values(increments))
    }
}

/// `Σ_i Δt_i Σ_k ⟨X_i e_k, Y_i e_k⟩`, the pathwise pairing of two processes.
pub(crate) fn weighted_pairing(grid: &TimeGrid, x: &[DMatrix<f64>], y: &[DMatrix<f64>]) -> f64 {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(i, (a, b))| grid.dt(i) * a.dot(b))
        .sum()
}
