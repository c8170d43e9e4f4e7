//! Itô and Skorokhod integrals of step processes.
//!
//! A process is constant on each interval `(t_{i-1}, t_i]` of its grid with
//! value `X_i ∈ γ(R^d, E)`, stored through the images `X_i e_k`. As an element
//! of `γ(L^2(0,T;R^d), E)` its action on the canonical step function
//! `φ_ik = Δt_i^{-1/2} 1_{(t_{i-1},t_i]} e_k` is `√Δt_i X_i e_k`.

mod chaos;
mod checks;
mod elementary;
mod step;

pub use chaos::{
    forward_sum_chaos, ito_integral_chaos, process_family, random_rotation, skorokhod, skorokhod_process,
    skorokhod_rotated, trace_correction,
};
pub use checks::{
    duality_check, forward_sum_gap, CHAOS_TOL, ito_isometry_check, skorokhod_equals_ito, two_sided_ratio, ExtensionReport,
    RatioEstimate,
};
pub use elementary::{always, ElementaryAdaptedProcess, Event};
pub use step::{CompiledStepProcess, StepProcess};

use nalgebra::DMatrix;

use crate::banach::BanachSpaceSpec;
use crate::error::Result;
use crate::time::{BrownianPath, TimeGrid};

/// A process that can be evaluated path by path.
pub trait AdaptedIntegrand: Sync {
    fn grid(&self) -> &TimeGrid;
    fn dim(&self) -> usize;
    fn codomain(&self) -> &BanachSpaceSpec;
    /// Grid on which paths must be sampled (a refinement of [`AdaptedIntegrand::grid`]).
    fn sampling_grid(&self) -> &TimeGrid;
    /// `X_i(ω)` as `m × d` matrices, one per interval.
    fn values(&self, path: &BrownianPath) -> Result<Vec<DMatrix<f64>>>;
    fn is_adapted(&self) -> bool {
        true
    }
}

/// Coarse increments `W(t_i) - W(t_{i-1})` of `path` over the intervals of `grid`.
pub fn coarse_increments(grid: &TimeGrid, path: &BrownianPath) -> Result<Vec<Vec<f64>>> {
    let map = path.grid().coarse_index_map(grid)?;
    let d = path.dim();
    let mut out = vec![vec![0.0; d]; grid.len()];
    for (fine, &c) in map.iter().enumerate() {
        for (o, v) in out[c].iter_mut().zip(path.increment(fine)) {
            *o += v;
        }
    }
    Ok(out)
}

/// `Σ_i X_i (W(t_i) - W(t_{i-1}))` for given values.
pub fn left_point_sum(values: &[DMatrix<f64>], increments: &[Vec<f64>]) -> Vec<f64> {
    let m = values.first().map_or(0, |v| v.nrows());
    let mut out = vec![0.0; m];
    for (x, dw) in values.iter().zip(increments) {
        for (r, o) in out.iter_mut().enumerate() {
            *o += dw.iter().enumerate().map(|(k, w)| x[(r, k)] * w).sum::<f64>();
        }
    }
    out
}

/// The `m × (N d)` matrix with columns `√Δt_i X_i e_k`: `X(ω)` on the canonical basis.
pub fn gamma_matrix(grid: &TimeGrid, values: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = values.first().map_or(0, |v| v.nrows());
    let d = values.first().map_or(0, |v| v.ncols());
    let mut out = DMatrix::zeros(m, grid.len() * d);
    for (i, x) in values.iter().enumerate() {
        let s = grid.dt(i).sqrt();
        for k in 0..d {
            for r in 0..m {
                out[(r, i * d + k)] = s * x[(r, k)];
            }
        }
    }
    out
}

pub(crate) fn ito_sum<X: AdaptedIntegrand + ?Sized>(x: &X, path: &BrownianPath) -> Result<Vec<f64>> {
    let values = x.values(path)?;
    let inc = coarse_increments(x.grid(), path)?;
    let mut out = left_point_sum(&values, &inc);
    if values.is_empty() {
        out = vec![0.0; x.codomain().m];
    }
    Ok(out)
}
