use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expr::{Expr, Growth, Polynomial, SmoothFunction};
use crate::banach::{BanachSpaceSpec, GammaOperator};
use crate::chaos::{ChaosExpansion, ChaosFamily, HChaos};
use crate::error::{Error, Result};
use crate::time::{gram_schmidt, BrownianPath, PathPrefix, StepFunction, TimeGrid, GRID_TOL};

/// One summand `f(W(h_1), …, W(h_n)) ⊗ x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TermRepr", into = "TermRepr")]
pub struct CylindricalTerm {
    f: Arc<SmoothFunction>,
    directions: Arc<[StepFunction]>,
    x: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    f: Expr,
    directions: Vec<StepFunction>,
    x: Vec<f64>,
}

impl TryFrom<TermRepr> for CylindricalTerm {
    type Error = Error;
    fn try_from(r: TermRepr) -> Result<Self> {
        CylindricalTerm::new(r.f, r.directions, r.x)
    }
}

impl From<CylindricalTerm> for TermRepr {
    fn from(t: CylindricalTerm) -> Self {
        TermRepr {
            f: t.f.expr().clone(),
            directions: t.directions.to_vec(),
            x: t.x,
        }
    }
}

impl CylindricalTerm {
    /// `f` gets one variable per direction.
    pub fn new(f: Expr, directions: Vec<StepFunction>, x: Vec<f64>) -> Result<Self> {
        let f = SmoothFunction::new(f, directions.len())?;
        if let Some(first) = directions.first() {
            for h in &directions[1..] {
                if h.dim() != first.dim() {
                    return Err(Error::dims(first.dim(), h.dim()));
                }
                if (h.horizon() - first.horizon()).abs() > GRID_TOL {
                    return Err(Error::HorizonMismatch(first.horizon(), h.horizon()));
                }
            }
        }
        Ok(CylindricalTerm {
            f: Arc::new(f),
            directions: directions.into(),
            x,
        })
    }

    pub fn function(&self) -> &SmoothFunction {
        &self.f
    }

    pub fn directions(&self) -> &[StepFunction] {
        &self.directions
    }

    pub fn coefficient(&self) -> &[f64] {
        &self.x
    }

    /// `(W(h_1), …, W(h_n))` on a path.
    pub fn w_values(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        self.directions.iter().map(|h| path.evaluate_w(h)).collect()
    }
}

/// `F = Σ_j f_j(W(h_1), …, W(h_n)) ⊗ x_j` with values in `E = R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RvRepr", into = "RvRepr")]
pub struct CylindricalRV {
    terms: Vec<CylindricalTerm>,
    codomain: BanachSpaceSpec,
    assume_integrable: bool,
}

#[derive(Serialize, Deserialize)]
struct RvRepr {
    codomain: BanachSpaceSpec,
    terms: Vec<CylindricalTerm>,
    #[serde(default)]
    assume_integrable: bool,
}

impl TryFrom<RvRepr> for CylindricalRV {
    type Error = Error;
    fn try_from(r: RvRepr) -> Result<Self> {
        CylindricalRV::new(r.terms, r.codomain, r.assume_integrable)
    }
}

impl From<CylindricalRV> for RvRepr {
    fn from(f: CylindricalRV) -> Self {
        RvRepr {
            codomain: f.codomain,
            terms: f.terms,
            assume_integrable: f.assume_integrable,
        }
    }
}

impl CylindricalRV {
    /// Validates shapes and growth. Functions of exponential growth are
    /// rejected unless `assume_integrable` is set.
    pub fn new(terms: Vec<CylindricalTerm>, codomain: BanachSpaceSpec, assume_integrable: bool) -> Result<Self> {
        let mut reference: Option<&StepFunction> = None;
        for t in &terms {
            codomain.check_vector(&t.x)?;
            if !assume_integrable && t.f.growth() == Growth::Exponential {
                return Err(Error::NotIntegrable(format!(
                    "{} may grow exponentially; set assume_integrable to accept it",
                    t.f.expr()
                )));
            }
            for h in t.directions.iter() {
                match reference {
                    None => reference = Some(h),
                    Some(r) => {
                        if r.dim() != h.dim() {
                            return Err(Error::dims(r.dim(), h.dim()));
                        }
                        if (r.horizon() - h.horizon()).abs() > GRID_TOL {
                            return Err(Error::HorizonMismatch(r.horizon(), h.horizon()));
                        }
                    }
                }
            }
        }
        Ok(CylindricalRV {
            terms,
            codomain,
            assume_integrable,
        })
    }

    /// Scalar `f(W(h_1), …, W(h_n))`.
    pub fn scalar(f: Expr, directions: Vec<StepFunction>) -> Result<Self> {
        Self::new(
            vec![CylindricalTerm::new(f, directions, vec![1.0])?],
            BanachSpaceSpec::hilbert(1),
            false,
        )
    }

    /// `W(h) ⊗ x`.
    pub fn wiener(h: &StepFunction, x: &[f64], codomain: BanachSpaceSpec) -> Result<Self> {
        Self::new(
            vec![CylindricalTerm::new(Expr::var(0), vec![h.clone()], x.to_vec())?],
            codomain,
            false,
        )
    }

    pub fn constant(c: &[f64], codomain: BanachSpaceSpec) -> Result<Self> {
        Self::new(
            vec![CylindricalTerm::new(Expr::constant(1.0), vec![], c.to_vec())?],
            codomain,
            false,
        )
    }

    pub fn zero(codomain: BanachSpaceSpec) -> Self {
        CylindricalRV {
            terms: Vec::new(),
            codomain,
            assume_integrable: false,
        }
    }

    pub fn terms(&self) -> &[CylindricalTerm] {
        &self.terms
    }

    pub fn codomain(&self) -> &BanachSpaceSpec {
        &self.codomain
    }

    pub fn assumes_integrable(&self) -> bool {
        self.assume_integrable
    }

    pub fn growth(&self) -> Growth {
        self.terms.iter().map(|t| t.f.growth()).max().unwrap_or(Growth::Bounded)
    }

    pub fn is_bounded(&self) -> bool {
        self.growth() == Growth::Bounded
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|t| t.f.is_polynomial())
    }

    /// Every direction of every term.
    pub fn directions(&self) -> impl Iterator<Item = &StepFunction> {
        self.terms.iter().flat_map(|t| t.directions.iter())
    }

    /// `d` with `H = L²(0,T;R^d)`, if any direction is present.
    pub fn dim(&self) -> Option<usize> {
        self.directions().next().map(|h| h.dim())
    }

    pub fn horizon(&self) -> Option<f64> {
        self.directions().next().map(|h| h.horizon())
    }

    /// Whether every direction is supported in `[0, t]`.
    pub fn measurable_at(&self, t: f64) -> bool {
        self.directions().all(|h| h.supported_before(t))
    }

    pub fn add(&self, other: &CylindricalRV) -> Result<Self> {
        if self.codomain.m != other.codomain.m {
            return Err(Error::dims(self.codomain.m, other.codomain.m));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(terms, self.codomain, self.assume_integrable || other.assume_integrable)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.x.iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    /// A scalar `F` times `x ∈ E'`.
    pub fn tensor(&self, x: &[f64], codomain: BanachSpaceSpec) -> Result<Self> {
        self.require_scalar()?;
        let terms = self
            .terms
            .iter()
            .map(|t| CylindricalTerm {
                f: t.f.clone(),
                directions: t.directions.clone(),
                x: x.iter().map(|v| v * t.x[0]).collect(),
            })
            .collect();
        Self::new(terms, codomain, self.assume_integrable)
    }

    fn require_scalar(&self) -> Result<()> {
        if self.codomain.m != 1 {
            return Err(Error::InvalidArgument("expected a scalar random variable".into()));
        }
        Ok(())
    }

    fn product_terms(a: &CylindricalTerm, b: &CylindricalTerm, x: Vec<f64>) -> Result<CylindricalTerm> {
        let n = a.directions.len();
        let f = a.f.expr().clone() * b.f.expr().shift_vars(n);
        let mut dirs = a.directions.to_vec();
        dirs.extend(b.directions.iter().cloned());
        CylindricalTerm::new(f, dirs, x)
    }

    /// `F G` for scalar `F` and `E`-valued `G`.
    pub fn multiply(&self, g: &CylindricalRV) -> Result<Self> {
        self.require_scalar()?;
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &g.terms {
                terms.push(Self::product_terms(a, b, b.x.iter().map(|v| v * a.x[0]).collect())?);
            }
        }
        Self::new(terms, g.codomain, self.assume_integrable || g.assume_integrable)
    }

    /// Pointwise duality `⟨F, G⟩` for `G` over `E*`.
    pub fn dot(&self, g: &CylindricalRV) -> Result<Self> {
        if self.codomain.m != g.codomain.m {
            return Err(Error::dims(self.codomain.m, g.codomain.m));
        }
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &g.terms {
                let d: f64 = a.x.iter().zip(&b.x).map(|(u, v)| u * v).sum();
                terms.push(Self::product_terms(a, b, vec![d])?);
            }
        }
        Self::new(
            terms,
            BanachSpaceSpec::hilbert(1),
            self.assume_integrable || g.assume_integrable,
        )
    }

    /// The same variable with every `f` post-composed with `g` (a one-variable expression in `v0`).
    ///
    /// Only defined for a single-term variable, where `g(f)` is again of the form `g∘f(W(h)) ⊗ x`.
    pub fn compose(&self, g: &Expr) -> Result<Self> {
        if self.terms.len() != 1 {
            return Err(Error::InvalidArgument("composition needs a single-term variable".into()));
        }
        let t = &self.terms[0];
        let inner = t.f.expr().clone();
        let f = g.substitute(&|_| inner.clone());
        let term = CylindricalTerm::new(f, t.directions.to_vec(), t.x.clone())?;
        Self::new(vec![term], self.codomain, self.assume_integrable)
    }

    pub fn with_assumed_integrability(mut self) -> Self {
        self.assume_integrable = true;
        self
    }

    /// `F(ω)` on a sampled path.
    pub fn evaluate(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.codomain.m];
        for t in &self.terms {
            let w = t.w_values(path)?;
            let v = t.f.value(&w);
            for (o, x) in out.iter_mut().zip(&t.x) {
                *o += v * x;
            }
        }
        Ok(out)
    }

    /// `F(ω)` from the observed part of a path; fails unless `F` is measurable at the prefix time.
    pub fn evaluate_prefix(&self, prefix: &PathPrefix<'_>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.codomain.m];
        for t in &self.terms {
            let w: Vec<f64> = t.directions.iter().map(|h| prefix.evaluate_w(h)).collect::<Result<_>>()?;
            let v = t.f.value(&w);
            for (o, x) in out.iter_mut().zip(&t.x) {
                *o += v * x;
            }
        }
        Ok(out)
    }

    /// Directions pre-refined to `grid` for fast repeated evaluation.
    pub fn compile(&self, grid: &TimeGrid) -> Result<CompiledRV> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let dirs = t
                    .directions
                    .iter()
                    .map(|h| Ok(h.refine(grid)?.values().to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CompiledTerm {
                    f: t.f.clone(),
                    dirs,
                    x: t.x.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(CompiledRV {
            terms,
            m: self.codomain.m,
        })
    }

    pub fn malliavin_derivative(&self) -> DerivativeRV {
        let mut terms = Vec::new();
        for t in &self.terms {
            for j in 0..t.directions.len() {
                terms.push(DerivativeTerm {
                    f: t.f.clone(),
                    partial: j,
                    directions: t.directions.clone(),
                    x: t.x.clone(),
                });
            }
        }
        DerivativeRV {
            terms,
            codomain: self.codomain,
        }
    }

    /// An orthonormal family spanning every direction.
    pub fn natural_family(&self) -> Result<Arc<ChaosFamily>> {
        let dirs: Vec<StepFunction> = self.directions().cloned().collect();
        let (basis, _) = gram_schmidt(&dirs)?;
        Ok(ChaosFamily::new(basis)?.shared())
    }

    /// Exact chaos form on the family spanned by the directions.
    pub fn to_chaos(&self) -> Result<ChaosExpansion> {
        self.to_chaos_on(self.natural_family()?)
    }

    /// Exact chaos form on `family`, which must span every direction.
    pub fn to_chaos_on(&self, family: Arc<ChaosFamily>) -> Result<ChaosExpansion> {
        let mut out = ChaosExpansion::zero(family.clone(), self.codomain);
        for t in &self.terms {
            let p = t.f.to_polynomial()?;
            let scalar = polynomial_chaos(&p, &t.directions, &family)?;
            out = out.add(&scalar.tensor(&t.x, self.codomain)?)?;
        }
        Ok(out)
    }
}

/// `p(W(h_1), …, W(h_n))` as a scalar chaos expansion.
pub(crate) fn polynomial_chaos(
    p: &Polynomial,
    directions: &[StepFunction],
    family: &Arc<ChaosFamily>,
) -> Result<ChaosExpansion> {
    let one = ChaosExpansion::constant(family.clone(), BanachSpaceSpec::hilbert(1), &[1.0])?;
    let w: Vec<ChaosExpansion> = directions
        .iter()
        .map(|h| ChaosExpansion::wiener(family.clone(), h))
        .collect::<Result<_>>()?;
    let mut powers: Vec<Vec<ChaosExpansion>> = vec![vec![one.clone()]; w.len()];
    let mut out = ChaosExpansion::zero(family.clone(), BanachSpaceSpec::hilbert(1));
    for (e, c) in p.terms() {
        let mut term = one.clone();
        for (k, &deg) in e.iter().enumerate() {
            while powers[k].len() <= deg as usize {
                let next = powers[k].last().expect("non-empty").multiply(&w[k])?;
                powers[k].push(next);
            }
            if deg > 0 {
                term = term.multiply(&powers[k][deg as usize])?;
            }
        }
        out = out.axpy(c, &term)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct CompiledTerm {
    f: Arc<SmoothFunction>,
    dirs: Vec<Vec<f64>>,
    x: Vec<f64>,
}

/// A [`CylindricalRV`] whose directions live on one fixed grid.
#[derive(Debug, Clone)]
pub struct CompiledRV {
    terms: Vec<CompiledTerm>,
    m: usize,
}

impl CompiledRV {
    /// `F` from the flat increments of a path on the compiled grid.
    pub fn evaluate(&self, increments: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        let mut w = Vec::new();
        for t in &self.terms {
            w.clear();
            w.extend(t.dirs.iter().map(|h| h.iter().zip(increments).map(|(a, b)| a * b).sum::<f64>()));
            let v = t.f.value(&w);
            for (o, x) in out.iter_mut().zip(&t.x) {
                *o += v * x;
            }
        }
        out
    }
}

/// One summand `∂_j f(W(h)) ⊗ (h_j ⊗ x)` of a derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTerm {
    f: Arc<SmoothFunction>,
    partial: usize,
    directions: Arc<[StepFunction]>,
    x: Vec<f64>,
}

impl DerivativeTerm {
    pub fn function(&self) -> &SmoothFunction {
        &self.f
    }

    pub fn partial(&self) -> usize {
        self.partial
    }

    pub fn directions(&self) -> &[StepFunction] {
        &self.directions
    }

    /// The `H`-direction `h_j`.
    pub fn direction(&self) -> &StepFunction {
        &self.directions[self.partial]
    }

    pub fn coefficient(&self) -> &[f64] {
        &self.x
    }
}

/// A `γ(H,E)`-valued smooth random variable `Σ ∂_j f(W(h)) ⊗ (h_j ⊗ x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeRV {
    terms: Vec<DerivativeTerm>,
    codomain: BanachSpaceSpec,
}

impl DerivativeRV {
    pub fn terms(&self) -> &[DerivativeTerm] {
        &self.terms
    }

    pub fn codomain(&self) -> &BanachSpaceSpec {
        &self.codomain
    }

    pub fn rank_bound(&self) -> usize {
        self.terms.len()
    }

    fn scalars(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        let mut scratch = Vec::new();
        self.terms
            .iter()
            .map(|t| {
                let w: Vec<f64> = t.directions.iter().map(|h| path.evaluate_w(h)).collect::<Result<_>>()?;
                Ok(t.f.partial(t.partial, &w, &mut scratch))
            })
            .collect()
    }

    /// `DF(ω)` as a finite-rank operator.
    pub fn evaluate(&self, path: &BrownianPath) -> Result<GammaOperator> {
        let s = self.scalars(path)?;
        let terms: Vec<(StepFunction, Vec<f64>)> = self
            .terms
            .iter()
            .zip(&s)
            .map(|(t, v)| (t.direction().clone(), t.x.iter().map(|x| x * v).collect()))
            .collect();
        if terms.is_empty() {
            return Ok(GammaOperator::zero(self.codomain));
        }
        GammaOperator::from_terms(&terms, self.codomain)
    }

    /// `(DF(ω)) h`.
    pub fn apply(&self, h: &StepFunction, path: &BrownianPath) -> Result<Vec<f64>> {
        let s = self.scalars(path)?;
        let mut out = vec![0.0; self.codomain.m];
        for (t, v) in self.terms.iter().zip(&s) {
            let c = v * t.direction().inner(h)?;
            for (o, x) in out.iter_mut().zip(&t.x) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// Exact chaos form on `family` (polynomial `f` only).
    pub fn to_chaos_on(&self, family: Arc<ChaosFamily>) -> Result<HChaos> {
        let mut out = HChaos::zero(family.clone(), self.codomain);
        for t in &self.terms {
            let p = t.f.to_polynomial()?.partial(t.partial);
            let scalar = polynomial_chaos(&p, &t.directions, &family)?;
            out = out.add(&HChaos::tensor(&scalar, t.direction(), &t.x, self.codomain)?)?;
        }
        Ok(out)
    }

    /// The `d × m` kernel `Σ ∂_j f(W(h)) h_j(s⁺) x^T` at a fixed path.
    pub fn kernel_after(&self, s: f64, path: &BrownianPath) -> Result<DMatrix<f64>> {
        let sc = self.scalars(path)?;
        let d = self.terms.first().map_or(1, |t| t.direction().dim());
        let mut k = DMatrix::zeros(d, self.codomain.m);
        for (t, v) in self.terms.iter().zip(&sc) {
            let h = t.direction().value_after(s);
            for (a, hv) in h.iter().enumerate() {
                for (b, x) in t.x.iter().enumerate() {
                    k[(a, b)] += v * hv * x;
                }
            }
        }
        Ok(k)
    }
}

/// Derivative of `F` along `h` at a path by central differences of the shifted path `ω + ε∫h`.
pub fn finite_difference_derivative(f: &CylindricalRV, h: &StepFunction, path: &BrownianPath, eps: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; f.codomain.m];
    for t in &f.terms {
        let w = t.w_values(path)?;
        let shifts: Vec<f64> = t.directions.iter().map(|g| g.inner(h)).collect::<Result<_>>()?;
        let plus: Vec<f64> = w.iter().zip(&shifts).map(|(a, s)| a + eps * s).collect();
        let minus: Vec<f64> = w.iter().zip(&shifts).map(|(a, s)| a - eps * s).collect();
        let d = (t.f.value(&plus) - t.f.value(&minus)) / (2.0 * eps);
        for (o, x) in out.iter_mut().zip(&t.x) {
            *o += d * x;
        }
    }
    Ok(out)
}
