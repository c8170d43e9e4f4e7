//! Seeded random instances for the property suite.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::banach::{BanachSpaceSpec, GammaOperator};
use crate::chaos::{ChaosExpansion, ChaosFamily, HChaos, MultiIndex};
use crate::cylindrical::{CylindricalRV, CylindricalTerm, Expr};
use crate::error::Result;
use crate::integral::StepProcess;
use crate::rng;
use crate::time::{StepFunction, TimeGrid};

/// Size limits of the generated instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sizes {
    pub max_degree: u32,
    pub max_n: usize,
    pub max_m: usize,
    pub max_terms: usize,
}

pub struct Gen {
    pub rng: ChaCha8Rng,
    pub sizes: Sizes,
}

impl Gen {
    pub fn new(seed: u64, instance: u64, sizes: Sizes) -> Self {
        Gen {
            rng: rng::stream(seed, instance),
            sizes,
        }
    }

    pub fn normal(&mut self) -> f64 {
        rng::standard_normal(&mut self.rng)
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn int(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..=hi)
    }

    pub fn grid(&mut self) -> TimeGrid {
        let n = self.int(1, self.sizes.max_n);
        TimeGrid::uniform(1.0, n).expect("positive n")
    }

    pub fn space(&mut self) -> BanachSpaceSpec {
        BanachSpaceSpec::hilbert(self.int(1, self.sizes.max_m))
    }

    /// Canonical family on a random uniform grid.
    pub fn family(&mut self, dim: usize) -> Arc<ChaosFamily> {
        let g = self.grid();
        Arc::new(ChaosFamily::canonical(&g, dim).expect("valid grid"))
    }

    pub fn multi_index(&mut self, n: usize, degree: u32) -> MultiIndex {
        let mut pairs = vec![0u32; n];
        for _ in 0..degree {
            let j = self.int(0, n - 1);
            pairs[j] += 1;
        }
        let p: Vec<(usize, u32)> = pairs.into_iter().enumerate().filter(|(_, k)| *k > 0).collect();
        MultiIndex::from_pairs(&p)
    }

    pub fn chaos(&mut self, family: &Arc<ChaosFamily>, codomain: BanachSpaceSpec) -> Result<ChaosExpansion> {
        let terms = self.int(1, self.sizes.max_terms);
        let n = family.len();
        let items: Vec<(MultiIndex, Vec<f64>)> = (0..terms)
            .map(|_| {
                let deg = self.int(0, self.sizes.max_degree as usize) as u32;
                (self.multi_index(n, deg), self.normals(codomain.m))
            })
            .collect();
        ChaosExpansion::from_terms(family.clone(), codomain, items)
    }

    /// A chaos expansion in the `n`-th chaos only.
    pub fn pure_chaos(&mut self, family: &Arc<ChaosFamily>, codomain: BanachSpaceSpec, degree: u32) -> Result<ChaosExpansion> {
        let terms = self.int(1, self.sizes.max_terms);
        let n = family.len();
        let items: Vec<(MultiIndex, Vec<f64>)> = (0..terms)
            .map(|_| (self.multi_index(n, degree), self.normals(codomain.m)))
            .collect();
        ChaosExpansion::from_terms(family.clone(), codomain, items)
    }

    pub fn h_chaos(&mut self, family: &Arc<ChaosFamily>, codomain: BanachSpaceSpec) -> Result<HChaos> {
        let cols = (0..family.len())
            .map(|_| {
                if self.rng.random_bool(0.3) {
                    Ok(ChaosExpansion::zero(family.clone(), codomain))
                } else {
                    self.chaos(family, codomain)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        HChaos::from_columns(family.clone(), codomain, &cols)
    }

    /// A random step function on a grid of the family's horizon.
    pub fn step_function(&mut self, grid: &TimeGrid, dim: usize) -> StepFunction {
        let v = self.normals(grid.len() * dim);
        StepFunction::from_flat(grid.clone(), dim, v).expect("shapes agree")
    }

    /// `Σ_k c_k Π_j v_j^{e_jk}` with total degree at most `degree`.
    pub fn polynomial(&mut self, arity: usize, degree: u32) -> Expr {
        let terms = self.int(1, self.sizes.max_terms);
        let mut out = Vec::new();
        for _ in 0..terms {
            let deg = self.int(0, degree as usize);
            let mut factors = vec![Expr::constant(self.normal())];
            if arity > 0 {
                let mut e = vec![0u32; arity];
                for _ in 0..deg {
                    let j = self.int(0, arity - 1);
                    e[j] += 1;
                }
                for (j, k) in e.into_iter().enumerate() {
                    if k > 0 {
                        factors.push(Expr::var(j).pow(k));
                    }
                }
            }
            out.push(Expr::Mul(factors));
        }
        Expr::Add(out)
    }

    /// A bounded smooth function built from `sin`, `cos` and `logistic` of linear forms.
    pub fn bounded(&mut self, arity: usize) -> Expr {
        let lin = |g: &mut Gen| {
            let mut parts = vec![Expr::constant(0.3 * g.normal())];
            for j in 0..arity {
                parts.push(Expr::constant(g.normal()) * Expr::var(j));
            }
            Expr::Add(parts)
        };
        let mut out = Vec::new();
        for _ in 0..self.int(1, 3) {
            let inner = lin(self);
            let node = match self.int(0, 2) {
                0 => inner.sin(),
                1 => inner.cos(),
                _ => inner.logistic(),
            };
            out.push(Expr::constant(self.normal()) * node);
        }
        Expr::Add(out)
    }

    /// Indicator of a random union of grid intervals inside `(0, t]`, scaled.
    pub fn direction_before(&mut self, grid: &TimeGrid, t_index: usize, dim: usize) -> StepFunction {
        let mut v = vec![0.0; grid.len() * dim];
        for i in 0..t_index {
            for k in 0..dim {
                v[i * dim + k] = self.normal();
            }
        }
        StepFunction::from_flat(grid.clone(), dim, v).expect("shapes agree")
    }

    /// A polynomial random variable measurable at `grid.start(i)`.
    pub fn adapted_rv(&mut self, grid: &TimeGrid, i: usize, dim: usize, codomain: BanachSpaceSpec) -> Result<CylindricalRV> {
        if i == 0 {
            return CylindricalRV::constant(&self.normals(codomain.m), codomain);
        }
        let k = self.int(1, 2);
        let dirs = (0..k).map(|_| self.direction_before(grid, i, dim)).collect();
        let f = self.polynomial(k, self.sizes.max_degree.min(3));
        CylindricalRV::new(vec![CylindricalTerm::new(f, dirs, self.normals(codomain.m))?], codomain, false)
    }

    /// A polynomial random variable with directions anywhere in `[0, T]`.
    pub fn any_rv(&mut self, grid: &TimeGrid, dim: usize, codomain: BanachSpaceSpec) -> Result<CylindricalRV> {
        let k = self.int(1, 2);
        let dirs = (0..k).map(|_| self.step_function(grid, dim)).collect();
        let f = self.polynomial(k, self.sizes.max_degree.min(3));
        CylindricalRV::new(vec![CylindricalTerm::new(f, dirs, self.normals(codomain.m))?], codomain, false)
    }

    pub fn adapted_process(&mut self, grid: &TimeGrid, dim: usize, codomain: BanachSpaceSpec) -> Result<StepProcess> {
        let coeffs = (0..grid.len())
            .map(|i| (0..dim).map(|_| self.adapted_rv(grid, i, dim, codomain)).collect())
            .collect::<Result<_>>()?;
        StepProcess::adapted(grid.clone(), dim, codomain, coeffs)
    }

    pub fn anticipating_process(&mut self, grid: &TimeGrid, dim: usize, codomain: BanachSpaceSpec) -> Result<StepProcess> {
        let coeffs = (0..grid.len())
            .map(|_| (0..dim).map(|_| self.any_rv(grid, dim, codomain)).collect())
            .collect::<Result<_>>()?;
        StepProcess::anticipating(grid.clone(), dim, codomain, coeffs)
    }

    /// A random quadratic `F = f(W(h_1), W(h_2)) x`.
    pub fn quadratic_rv(&mut self, dim: usize, codomain: BanachSpaceSpec) -> Result<CylindricalRV> {
        let terms = (0..self.int(1, 2))
            .map(|_| {
                let k = self.int(1, 2);
                let g = self.grid();
                let dirs = (0..k).map(|_| self.step_function(&g, dim)).collect();
                let sizes = self.sizes;
                self.sizes.max_terms = 4;
                let f = self.polynomial(k, 2);
                self.sizes = sizes;
                CylindricalTerm::new(f, dirs, self.normals(codomain.m))
            })
            .collect::<Result<_>>()?;
        CylindricalRV::new(terms, codomain, false)
    }

    /// A gamma operator with `k` columns over an orthonormal basis.
    pub fn gamma_operator(&mut self, basis: &[StepFunction], codomain: BanachSpaceSpec) -> Result<GammaOperator> {
        let m = DMatrix::from_vec(codomain.m, basis.len(), self.normals(codomain.m * basis.len()));
        GammaOperator::from_matrix(basis.to_vec(), m, codomain)
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_vec(rows, cols, self.normals(rows * cols))
    }
}
