//! Exact chaos forms of step processes and their integrals.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{AdaptedIntegrand, StepProcess};
use crate::banach::gaussian_matrix;
use crate::chaos::{divergence, divergence_with, malliavin_derivative, ChaosExpansion, ChaosFamily, DivergenceRule, HChaos};
use crate::error::{Error, Result};
use crate::time::{gram_schmidt, orthonormalize, StepFunction, TimeGrid};

/// Orthonormal family for processes on `grid` whose coefficients use directions on `fine`.
///
/// The first `N d` members are the canonical functions of `grid`; the rest
/// complete them to a basis of step functions on `grid ∪ fine`, each supported
/// inside a single interval of `grid`.
pub fn process_family(grid: &TimeGrid, dim: usize, fine: &TimeGrid) -> Result<Arc<ChaosFamily>> {
    let fine = grid.union(fine)?;
    let mut fs = orthonormalize(grid, dim)?;
    fs.extend(orthonormalize(&fine, dim)?);
    let (basis, _) = gram_schmidt(&fs)?;
    Ok(ChaosFamily::new(basis)?.shared())
}

/// A random orthogonal `n × n` matrix.
pub fn random_rotation(n: usize, seed: u64) -> DMatrix<f64> {
    gaussian_matrix(n, n, seed, 0).qr().q()
}

fn interval_indicator(grid: &TimeGrid, dim: usize, i: usize, k: usize) -> Result<StepFunction> {
    StepFunction::indicator_component(grid.horizon(), grid.start(i), grid.end(i), dim, k)
}

impl StepProcess {
    /// The [`process_family`] of this process.
    pub fn chaos_family(&self) -> Result<Arc<ChaosFamily>> {
        process_family(self.grid(), self.dim(), self.sampling_grid())
    }

    /// `chaos(X_i e_k)` for every interval and unit vector.
    pub fn coefficient_chaos(&self, family: &Arc<ChaosFamily>) -> Result<Vec<Vec<ChaosExpansion>>> {
        self.coefficients()
            .iter()
            .map(|row| row.iter().map(|rv| rv.to_chaos_on(family.clone())).collect())
            .collect()
    }

    /// `X` as an element of `L^2(Ω; γ(H, E))` over `family`: column `j` is
    /// `X ψ_j = Σ_ik √Δt_i ⟨ψ_j, φ_ik⟩ X_i e_k`.
    pub fn to_h_chaos_on(&self, family: &Arc<ChaosFamily>) -> Result<HChaos> {
        let grid = self.grid();
        let d = self.dim();
        let coeffs = self.coefficient_chaos(family)?;
        let mut cols = vec![ChaosExpansion::zero(family.clone(), *self.codomain()); family.len()];
        let canonical = orthonormalize(grid, d)?;
        for (i, row) in coeffs.iter().enumerate() {
            let s = grid.dt(i).sqrt();
            for (k, c) in row.iter().enumerate() {
                let coords = family.coordinates(&canonical[i * d + k])?;
                for (col, a) in cols.iter_mut().zip(coords) {
                    if a != 0.0 {
                        *col = col.axpy(s * a, c)?;
                    }
                }
            }
        }
        HChaos::from_columns(family.clone(), *self.codomain(), &cols)
    }

    pub fn to_h_chaos(&self) -> Result<HChaos> {
        self.to_h_chaos_on(&self.chaos_family()?)
    }

    /// `Σ_ik chaos(X_i e_k) · W(1_{(t_{i-1},t_i]} e_k)` with no adaptedness requirement.
    pub fn forward_sum_chaos_on(&self, family: &Arc<ChaosFamily>) -> Result<ChaosExpansion> {
        let grid = self.grid();
        let d = self.dim();
        let coeffs = self.coefficient_chaos(family)?;
        let mut out = ChaosExpansion::zero(family.clone(), *self.codomain());
        for (i, row) in coeffs.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                let dw = ChaosExpansion::wiener(family.clone(), &interval_indicator(grid, d, i, k)?)?;
                out = out.add(&dw.multiply(c)?)?;
            }
        }
        Ok(out)
    }

    /// `I(X)` as a chaos expansion over `family`.
    pub fn ito_chaos_on(&self, family: &Arc<ChaosFamily>) -> Result<ChaosExpansion> {
        if !self.is_adapted() {
            return Err(Error::NotAdapted(
                "the Itô integral needs an adapted process; use the Skorokhod integral".into(),
            ));
        }
        self.forward_sum_chaos_on(family)
    }
}

/// `I(X)` over the process family of `x`.
pub fn ito_integral_chaos(x: &StepProcess) -> Result<ChaosExpansion> {
    x.ito_chaos_on(&x.chaos_family()?)
}

/// The left-point sum of `x` over its process family.
pub fn forward_sum_chaos(x: &StepProcess) -> Result<ChaosExpansion> {
    x.forward_sum_chaos_on(&x.chaos_family()?)
}

/// `R(DX) = Σ_j D_{ψ_j}(X ψ_j)`, the trace term separating the forward sum from `δ(X)`.
pub fn trace_correction(x: &HChaos) -> Result<ChaosExpansion> {
    let family = x.family().clone();
    let mut out = ChaosExpansion::zero(family.clone(), *x.codomain());
    for j in 0..family.len() {
        let col = x.column(j)?;
        if col.is_empty() {
            continue;
        }
        out = out.add(&malliavin_derivative(&col).column(j)?)?;
    }
    Ok(out)
}

/// The Skorokhod integral `δ(X)`.
pub fn skorokhod(x: &HChaos) -> Result<ChaosExpansion> {
    divergence(x)
}

/// `δ(X)` computed with the rotated basis `h_j = Σ_k U[j,k] ψ_k` for a random orthogonal `U`.
pub fn skorokhod_rotated(x: &HChaos, seed: u64) -> Result<ChaosExpansion> {
    let u = random_rotation(x.family().len(), seed);
    divergence_with(x, DivergenceRule::Standard, Some(&u))
}

/// `δ(X)` for a step process.
pub fn skorokhod_process(x: &StepProcess) -> Result<ChaosExpansion> {
    divergence(&x.to_h_chaos()?)
}
