use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::hermite::{he_all, linearize};
use super::{same_family, ChaosFamily, MultiIndex, DEGREE_CAP};
use crate::banach::BanachSpaceSpec;
use crate::error::{Error, Result};
use crate::time::{BrownianPath, StepFunction};

/// `F = Σ_α He_α(ξ) ⊗ c_α` with `c_α ∈ E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpansionRepr", into = "ExpansionRepr")]
pub struct ChaosExpansion {
    family: Arc<ChaosFamily>,
    codomain: BanachSpaceSpec,
    coeffs: BTreeMap<MultiIndex, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ExpansionRepr {
    family: ChaosFamily,
    codomain: BanachSpaceSpec,
    terms: Vec<(MultiIndex, Vec<f64>)>,
}

impl TryFrom<ExpansionRepr> for ChaosExpansion {
    type Error = Error;
    fn try_from(r: ExpansionRepr) -> Result<Self> {
        ChaosExpansion::from_terms(Arc::new(r.family), r.codomain, r.terms)
    }
}

impl From<ChaosExpansion> for ExpansionRepr {
    fn from(c: ChaosExpansion) -> Self {
        ExpansionRepr {
            family: (*c.family).clone(),
            codomain: c.codomain,
            terms: c.coeffs.into_iter().collect(),
        }
    }
}

/// `He_α He_β` expanded in the Hermite basis.
pub(crate) fn hermite_product(a: &MultiIndex, b: &MultiIndex) -> Result<Vec<(MultiIndex, f64)>> {
    let total = a.total() + b.total();
    if total > DEGREE_CAP {
        return Err(Error::DegreeCap {
            degree: total,
            cap: DEGREE_CAP,
        });
    }
    let mut dirs: Vec<usize> = a.entries().iter().chain(b.entries()).map(|e| e.0).collect();
    dirs.sort_unstable();
    dirs.dedup();
    let mut parts: Vec<(Vec<(usize, u32)>, f64)> = vec![(Vec::new(), 1.0)];
    for d in dirs {
        let (x, y) = (a.degree(d), b.degree(d));
        let lin = if x == 0 || y == 0 {
            vec![(x + y, 1.0)]
        } else {
            linearize(x, y)
        };
        let mut next = Vec::with_capacity(parts.len() * lin.len());
        for (pairs, c) in &parts {
            for &(deg, l) in &lin {
                let mut p = pairs.clone();
                if deg > 0 {
                    p.push((d, deg));
                }
                next.push((p, c * l));
            }
        }
        parts = next;
    }
    Ok(parts
        .into_iter()
        .map(|(p, c)| (MultiIndex::from_pairs(&p), c))
        .collect())
}

fn add_into(map: &mut BTreeMap<MultiIndex, Vec<f64>>, key: MultiIndex, c: f64, v: &[f64]) {
    let e = map.entry(key).or_insert_with(|| vec![0.0; v.len()]);
    for (a, b) in e.iter_mut().zip(v) {
        *a += c * b;
    }
}

impl ChaosExpansion {
    pub fn zero(family: Arc<ChaosFamily>, codomain: BanachSpaceSpec) -> Self {
        ChaosExpansion {
            family,
            codomain,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_terms<I>(family: Arc<ChaosFamily>, codomain: BanachSpaceSpec, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Vec<f64>)>,
    {
        let mut coeffs = BTreeMap::new();
        for (alpha, c) in terms {
            codomain.check_vector(&c)?;
            if alpha.max_direction().is_some_and(|d| d >= family.len()) {
                return Err(Error::BasisMismatch(format!(
                    "multi-index {alpha} references a direction outside the family of size {}",
                    family.len()
                )));
            }
            if alpha.total() > DEGREE_CAP {
                return Err(Error::DegreeCap {
                    degree: alpha.total(),
                    cap: DEGREE_CAP,
                });
            }
            add_into(&mut coeffs, alpha, 1.0, &c);
        }
        let mut out = ChaosExpansion { family, codomain, coeffs };
        out.prune();
        Ok(out)
    }

    /// The constant random variable `c`.
    pub fn constant(family: Arc<ChaosFamily>, codomain: BanachSpaceSpec, c: &[f64]) -> Result<Self> {
        Self::from_terms(family, codomain, [(MultiIndex::empty(), c.to_vec())])
    }

    /// Scalar `He_α(ξ)`.
    pub fn hermite(family: Arc<ChaosFamily>, alpha: MultiIndex) -> Result<Self> {
        Self::from_terms(family, BanachSpaceSpec::hilbert(1), [(alpha, vec![1.0])])
    }

    /// Scalar `W(h) = Σ_j ⟨h, ψ_j⟩ ξ_j`; `h` must lie in the span of the family.
    pub fn wiener(family: Arc<ChaosFamily>, h: &StepFunction) -> Result<Self> {
        let c = family.coordinates(h)?;
        let terms: Vec<(MultiIndex, Vec<f64>)> = c
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (MultiIndex::single(j, 1), vec![*v]))
            .collect();
        Self::from_terms(family, BanachSpaceSpec::hilbert(1), terms)
    }

    pub fn family(&self) -> &Arc<ChaosFamily> {
        &self.family
    }

    pub fn codomain(&self) -> &BanachSpaceSpec {
        &self.codomain
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Vec<f64>)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Option<&[f64]> {
        self.coeffs.get(alpha).map(|v| v.as_slice())
    }

    /// Largest total degree present.
    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|a| a.total()).max().unwrap_or(0)
    }

    /// Removes coefficients that are exactly zero.
    pub fn prune(&mut self) {
        self.coeffs.retain(|_, v| v.iter().any(|x| *x != 0.0));
    }

    /// The same random variable with a relabelled codomain of equal dimension.
    pub fn with_codomain(mut self, codomain: BanachSpaceSpec) -> Result<Self> {
        if codomain.m != self.codomain.m {
            return Err(Error::dims(self.codomain.m, codomain.m));
        }
        self.codomain = codomain;
        Ok(self)
    }

    /// Re-indexes onto a superset family; `map[j]` is the new index of direction `j`.
    pub(crate) fn relabel(&self, family: Arc<ChaosFamily>, map: &[usize]) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(a, c)| (a.remap(map), c.clone()))
            .collect();
        ChaosExpansion {
            family,
            codomain: self.codomain,
            coeffs,
        }
    }

    /// Both operands over a common family.
    pub fn unify(&self, other: &ChaosExpansion) -> Result<(ChaosExpansion, ChaosExpansion)> {
        if same_family(&self.family, &other.family) {
            return Ok((self.clone(), other.relabel(self.family.clone(), &identity_map(other.family.len()))));
        }
        let (u, map) = self.family.union(&other.family)?;
        let u = Arc::new(u);
        let own = identity_map(self.family.len());
        Ok((self.relabel(u.clone(), &own), other.relabel(u, &map)))
    }

    fn check_same_dim(&self, other: &ChaosExpansion) -> Result<()> {
        if self.codomain.m != other.codomain.m {
            return Err(Error::dims(self.codomain.m, other.codomain.m));
        }
        Ok(())
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &ChaosExpansion) -> Result<Self> {
        self.check_same_dim(other)?;
        let (mut a, b) = self.unify(other)?;
        for (k, v) in b.coeffs {
            add_into(&mut a.coeffs, k, c, &v);
        }
        a.prune();
        Ok(a)
    }

    pub fn add(&self, other: &ChaosExpansion) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &ChaosExpansion) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            for x in v.iter_mut() {
                *x *= c;
            }
        }
        out.prune();
        out
    }

    /// Component `r` as a scalar expansion.
    pub fn component(&self, r: usize) -> Result<Self> {
        if r >= self.codomain.m {
            return Err(Error::dims(self.codomain.m, r + 1));
        }
        let mut out = ChaosExpansion {
            family: self.family.clone(),
            codomain: BanachSpaceSpec::hilbert(1),
            coeffs: self.coeffs.iter().map(|(a, c)| (a.clone(), vec![c[r]])).collect(),
        };
        out.prune();
        Ok(out)
    }

    /// `f ⊗ x` for a scalar expansion `f`.
    pub fn tensor(&self, x: &[f64], codomain: BanachSpaceSpec) -> Result<Self> {
        self.require_scalar()?;
        codomain.check_vector(x)?;
        let mut out = ChaosExpansion {
            family: self.family.clone(),
            codomain,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, c)| (a.clone(), x.iter().map(|v| v * c[0]).collect()))
                .collect(),
        };
        out.prune();
        Ok(out)
    }

    pub(crate) fn require_scalar(&self) -> Result<()> {
        if self.codomain.m != 1 {
            return Err(Error::InvalidArgument(format!(
                "expected a scalar expansion, found values in R^{}",
                self.codomain.m
            )));
        }
        Ok(())
    }

    /// Exact product `F · G` of a scalar `F` with an `E`-valued `G`.
    pub fn multiply(&self, other: &ChaosExpansion) -> Result<Self> {
        self.require_scalar()?;
        let (a, b) = self.unify(other)?;
        let mut coeffs = BTreeMap::new();
        for (alpha, ca) in &a.coeffs {
            for (beta, cb) in &b.coeffs {
                for (gamma, c) in hermite_product(alpha, beta)? {
                    add_into(&mut coeffs, gamma, c * ca[0], cb);
                }
            }
        }
        let mut out = ChaosExpansion {
            family: a.family,
            codomain: b.codomain,
            coeffs,
        };
        out.prune();
        Ok(out)
    }

    /// Pointwise duality `⟨F, G⟩` as a scalar expansion (`G` over `E*`).
    pub fn dot(&self, other: &ChaosExpansion) -> Result<Self> {
        self.check_same_dim(other)?;
        let (a, b) = self.unify(other)?;
        let mut coeffs = BTreeMap::new();
        for (alpha, ca) in &a.coeffs {
            for (beta, cb) in &b.coeffs {
                let d: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                if d == 0.0 {
                    continue;
                }
                for (gamma, c) in hermite_product(alpha, beta)? {
                    add_into(&mut coeffs, gamma, c * d, &[1.0]);
                }
            }
        }
        let mut out = ChaosExpansion {
            family: a.family,
            codomain: BanachSpaceSpec::hilbert(1),
            coeffs,
        };
        out.prune();
        Ok(out)
    }

    /// `E F`, the coefficient of the empty multi-index.
    pub fn expectation(&self) -> Vec<f64> {
        self.coeffs
            .get(&MultiIndex::empty())
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.codomain.m])
    }

    /// `F` at the point `ξ` (one coordinate per family member).
    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.family.len() {
            return Err(Error::dims(self.family.len(), xi.len()));
        }
        let max_deg: Vec<u32> = {
            let mut m = vec![0u32; xi.len()];
            for a in self.coeffs.keys() {
                for &(d, k) in a.entries() {
                    m[d] = m[d].max(k);
                }
            }
            m
        };
        let tables: Vec<Vec<f64>> = xi.iter().zip(&max_deg).map(|(x, n)| he_all(*n, *x)).collect();
        let mut out = vec![0.0; self.codomain.m];
        for (a, c) in &self.coeffs {
            let w: f64 = a.entries().iter().map(|&(d, k)| tables[d][k as usize]).product();
            for (o, v) in out.iter_mut().zip(c) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    pub fn evaluate_path(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        self.evaluate(&self.family.coordinates_on_path(path)?)
    }

    /// `E(F | F_t)`: drops every term that touches a direction supported in `(t, T]`.
    pub fn conditional_expectation(&self, t: f64) -> Result<Self> {
        let past: Vec<bool> = (0..self.family.len())
            .map(|j| self.family.is_past(j, t))
            .collect::<Result<_>>()?;
        let mut out = self.clone();
        out.coeffs.retain(|a, _| a.entries().iter().all(|&(d, _)| past[d]));
        Ok(out)
    }

    /// `E‖F‖²` for the Euclidean norm on `E`: `Σ_α α! ‖c_α‖²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(a, c)| a.factorial() * c.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `E⟨F, G⟩ = Σ_α α! ⟨c_α(F), c_α(G)⟩`.
    pub fn l2_pairing(&self, other: &ChaosExpansion) -> Result<f64> {
        self.check_same_dim(other)?;
        let (a, b) = self.unify(other)?;
        Ok(a.coeffs
            .iter()
            .filter_map(|(k, ca)| {
                b.coeffs
                    .get(k)
                    .map(|cb| k.factorial() * ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>())
            })
            .sum())
    }

    /// `π_N F`: the first-chaos part in directions `0..n`.
    pub fn pi_gaussian_projection(&self, n: usize) -> Result<Self> {
        if n > self.family.len() {
            return Err(Error::InvalidArgument(format!(
                "projection rank {n} exceeds the family size {}",
                self.family.len()
            )));
        }
        let mut out = self.clone();
        out.coeffs
            .retain(|a, _| a.total() == 1 && a.entries()[0].0 < n);
        Ok(out)
    }

    /// Largest coefficient difference over the union of supports.
    pub fn max_abs_diff(&self, other: &ChaosExpansion) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.coeffs
            .values()
            .flat_map(|v| v.iter())
            .fold(0.0, |a, v| a.max(v.abs())))
    }

    /// Re-expresses `F` over `target`, which must span every member of the current family.
    pub fn rebase(&self, target: Arc<ChaosFamily>) -> Result<Self> {
        if same_family(&self.family, &target) {
            return Ok(self.clone());
        }
        // ξ_j as first-chaos expansions in the new family
        let xi: Vec<ChaosExpansion> = self
            .family
            .functions()
            .iter()
            .map(|f| ChaosExpansion::wiener(target.clone(), f))
            .collect::<Result<_>>()?;
        let one = ChaosExpansion::constant(target.clone(), BanachSpaceSpec::hilbert(1), &[1.0])?;
        let mut powers: Vec<Vec<ChaosExpansion>> = vec![vec![one.clone()]; xi.len()];
        let mut out = ChaosExpansion::zero(target.clone(), self.codomain);
        for (alpha, c) in &self.coeffs {
            let mut term = one.clone();
            for &(d, k) in alpha.entries() {
                // He_{n+1}(y) = y He_n(y) − n He_{n−1}(y)
                while powers[d].len() <= k as usize {
                    let n = powers[d].len() - 1;
                    let next = xi[d].multiply(&powers[d][n])?;
                    let next = if n >= 1 { next.axpy(-(n as f64), &powers[d][n - 1])? } else { next };
                    powers[d].push(next);
                }
                term = term.multiply(&powers[d][k as usize])?;
            }
            out = out.add(&term.tensor(c, self.codomain)?)?;
        }
        Ok(out)
    }
}

pub(crate) fn identity_map(n: usize) -> Vec<usize> {
    (0..n).collect()
}
