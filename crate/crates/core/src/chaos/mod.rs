//! Exact Wiener-chaos algebra over a finite orthonormal family in `H`.
//!
//! A [`ChaosExpansion`] is a finite sum `Σ_α He_α(ξ) ⊗ c_α` where
//! `ξ_j = W(ψ_j)` for an orthonormal family `ψ_1..ψ_M` and
//! `He_α(ξ) = Π_j He_{α_j}(ξ_j)`. Because the `ξ_j` are i.i.d. standard
//! Gaussians, expectations, pairings, derivatives and divergences reduce to
//! coefficient bookkeeping and are exact up to floating-point rounding.

mod expansion;
mod h_chaos;
pub mod hermite;
mod multi_index;

pub use expansion::ChaosExpansion;
pub use h_chaos::{divergence, divergence_with, malliavin_derivative, DivergenceRule, HChaos};
pub use multi_index::MultiIndex;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{orthonormalize, BrownianPath, StepFunction, TimeGrid, GRID_TOL};

/// Largest total degree a product may reach.
pub const DEGREE_CAP: u32 = 32;

const ORTHO_TOL: f64 = 1e-10;

/// An orthonormal family `ψ_1..ψ_M` of step functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<StepFunction>", into = "Vec<StepFunction>")]
pub struct ChaosFamily {
    functions: Vec<StepFunction>,
}

impl TryFrom<Vec<StepFunction>> for ChaosFamily {
    type Error = Error;
    fn try_from(v: Vec<StepFunction>) -> Result<Self> {
        ChaosFamily::new(v)
    }
}

impl From<ChaosFamily> for Vec<StepFunction> {
    fn from(f: ChaosFamily) -> Self {
        f.functions
    }
}

impl ChaosFamily {
    pub fn new(functions: Vec<StepFunction>) -> Result<Self> {
        for i in 0..functions.len() {
            for j in i..functions.len() {
                let g = functions[i].inner(&functions[j])?;
                let target = if i == j { 1.0 } else { 0.0 };
                if (g - target).abs() > ORTHO_TOL {
                    return Err(Error::BasisMismatch(format!(
                        "family is not orthonormal: <psi_{i}, psi_{j}> = {g}"
                    )));
                }
            }
        }
        Ok(ChaosFamily { functions })
    }

    /// The canonical basis of step functions on `grid` (interval-major).
    pub fn canonical(grid: &TimeGrid, dim: usize) -> Result<Self> {
        Ok(ChaosFamily {
            functions: orthonormalize(grid, dim)?,
        })
    }

    pub fn shared(self) -> Arc<ChaosFamily> {
        Arc::new(self)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[StepFunction] {
        &self.functions
    }

    pub fn function(&self, j: usize) -> &StepFunction {
        &self.functions[j]
    }

    /// `⟨h, ψ_j⟩` for every `j`; errors if `h` is not in the span.
    pub fn coordinates(&self, h: &StepFunction) -> Result<Vec<f64>> {
        let c: Vec<f64> = self.functions.iter().map(|p| h.inner(p)).collect::<Result<_>>()?;
        let proj: f64 = c.iter().map(|v| v * v).sum();
        let hn2 = h.norm().powi(2);
        let residual = hn2 - proj;
        if residual > 1e-10 * hn2.max(1.0) {
            return Err(Error::BasisMismatch(format!(
                "direction is not in the span of the family (squared residual {residual:.3e})"
            )));
        }
        Ok(c)
    }

    /// The family with `h` added (after orthogonalization), unless `h` is already in the span.
    pub fn extended_with(&self, h: &StepFunction) -> Result<ChaosFamily> {
        let mut r = h.clone();
        for p in &self.functions {
            let c = r.inner(p)?;
            r = r.axpy(-c, p)?;
        }
        for p in &self.functions {
            let c = r.inner(p)?;
            r = r.axpy(-c, p)?;
        }
        let n = r.norm();
        if n <= 1e-9 * h.norm().max(1.0) {
            return Ok(self.clone());
        }
        let mut functions = self.functions.clone();
        functions.push(r.scale(1.0 / n));
        Ok(ChaosFamily { functions })
    }

    /// `ξ_j = W(ψ_j)` on a path.
    pub fn coordinates_on_path(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        self.functions.iter().map(|p| path.evaluate_w(p)).collect()
    }

    /// Classifies `ψ_j` relative to `t`: `Some(true)` if supported in `[0,t]`,
    /// `Some(false)` if supported in `[t,T]`, error if it straddles `t`.
    pub fn is_past(&self, j: usize, t: f64) -> Result<bool> {
        let f = &self.functions[j];
        if f.supported_before(t) {
            Ok(true)
        } else if f.supported_after(t) {
            Ok(false)
        } else {
            Err(Error::RefinementNeeded { index: j, t })
        }
    }

    /// Left end of the support of `ψ_j` (0 for the zero function).
    pub fn support_start(&self, j: usize) -> f64 {
        self.functions[j].support().map_or(0.0, |s| s.0)
    }

    fn same_function(a: &StepFunction, b: &StepFunction) -> bool {
        a.dim() == b.dim()
            && (a.horizon() - b.horizon()).abs() <= GRID_TOL
            && a.inner(b).is_ok_and(|v| (v - 1.0).abs() < 1e-12)
    }

    /// Union of two families: `self` followed by the members of `other` not
    /// already present. Returns the union and the index map for `other`.
    pub fn union(&self, other: &ChaosFamily) -> Result<(ChaosFamily, Vec<usize>)> {
        let mut functions = self.functions.clone();
        let mut map = Vec::with_capacity(other.len());
        for g in &other.functions {
            match functions.iter().position(|f| Self::same_function(f, g)) {
                Some(i) => map.push(i),
                None => {
                    for f in &functions {
                        let v = f.inner(g)?;
                        if v.abs() > ORTHO_TOL {
                            return Err(Error::BasisMismatch(
                                "families overlap without being orthogonal; rebase onto a common family first".into(),
                            ));
                        }
                    }
                    map.push(functions.len());
                    functions.push(g.clone());
                }
            }
        }
        Ok((ChaosFamily { functions }, map))
    }
}

/// Whether two shared families are the same (by pointer, then by value).
pub(crate) fn same_family(a: &Arc<ChaosFamily>, b: &Arc<ChaosFamily>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_family_and_coordinates() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let fam = ChaosFamily::canonical(&g, 1).unwrap();
        let h = StepFunction::indicator(1.0, 0.0, 0.5).unwrap();
        let c = fam.coordinates(&h).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
        assert_eq!(c[2], 0.0);
        let off = StepFunction::indicator(1.0, 0.0, 0.3).unwrap();
        assert!(matches!(fam.coordinates(&off), Err(Error::BasisMismatch(_))));
        assert!(fam.is_past(1, 0.5).unwrap());
        assert!(!fam.is_past(2, 0.5).unwrap());
        assert!(matches!(fam.is_past(1, 0.4), Err(Error::RefinementNeeded { index: 1, .. })));
    }

    #[test]
    fn extension_and_union() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let fam = ChaosFamily::canonical(&g, 1).unwrap();
        let same = fam.extended_with(&StepFunction::indicator(1.0, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(same.len(), 2);
        let bigger = fam.extended_with(&StepFunction::indicator(1.0, 0.0, 0.25).unwrap()).unwrap();
        assert_eq!(bigger.len(), 3);
        let (u, map) = fam.union(&bigger).unwrap();
        assert_eq!(u.len(), 3);
        assert_eq!(map, vec![0, 1, 2]);
        let quarter = ChaosFamily::new(vec![StepFunction::indicator(1.0, 0.0, 0.25).unwrap().scale(2.0)]).unwrap();
        assert!(fam.union(&quarter).is_err());
    }
}
