use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expansion::{hermite_product, identity_map};
use super::{same_family, ChaosExpansion, ChaosFamily, MultiIndex};
use crate::banach::{BanachSpaceSpec, GammaOperator};
use crate::error::{Error, Result};
use crate::time::StepFunction;

/// A `γ(H,E)`-valued chaos expansion `Σ_α He_α(ξ) ⊗ R_α`.
///
/// Each `R_α` is stored as an `m × M` matrix whose column `j` is `R_α ψ_j`,
/// so every coefficient operator lives on the family that also carries the
/// chaos variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HChaosRepr", into = "HChaosRepr")]
pub struct HChaos {
    family: Arc<ChaosFamily>,
    codomain: BanachSpaceSpec,
    coeffs: BTreeMap<MultiIndex, DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct HChaosRepr {
    family: ChaosFamily,
    codomain: BanachSpaceSpec,
    /// Column lists, one column per family member.
    terms: Vec<(MultiIndex, Vec<Vec<f64>>)>,
}

impl TryFrom<HChaosRepr> for HChaos {
    type Error = Error;
    fn try_from(r: HChaosRepr) -> Result<Self> {
        let family = Arc::new(r.family);
        let m = r.codomain.m;
        let mut out = HChaos::zero(family.clone(), r.codomain);
        for (alpha, cols) in r.terms {
            if cols.len() != family.len() || cols.iter().any(|c| c.len() != m) {
                return Err(Error::ShapeMismatch("coefficient columns do not match the family".into()));
            }
            let mat = DMatrix::from_iterator(m, cols.len(), cols.into_iter().flatten());
            out.add_term(alpha, 1.0, &mat)?;
        }
        Ok(out)
    }
}

impl From<HChaos> for HChaosRepr {
    fn from(h: HChaos) -> Self {
        HChaosRepr {
            family: (*h.family).clone(),
            codomain: h.codomain,
            terms: h
                .coeffs
                .into_iter()
                .map(|(a, m)| (a, m.column_iter().map(|c| c.iter().copied().collect()).collect()))
                .collect(),
        }
    }
}

/// Which sign the trace correction `R(Df)` enters the divergence with.
///
/// Only [`DivergenceRule::Standard`] is correct; the flipped rule exists so the
/// property suite can demonstrate that its duality checks detect the error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceRule {
    #[default]
    Standard,
    FlippedCorrection,
}

impl HChaos {
    pub fn zero(family: Arc<ChaosFamily>, codomain: BanachSpaceSpec) -> Self {
        HChaos {
            family,
            codomain,
            coeffs: BTreeMap::new(),
        }
    }

    fn add_term(&mut self, alpha: MultiIndex, c: f64, mat: &DMatrix<f64>) -> Result<()> {
        if mat.nrows() != self.codomain.m || mat.ncols() != self.family.len() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient is {}x{}, expected {}x{}",
                mat.nrows(),
                mat.ncols(),
                self.codomain.m,
                self.family.len()
            )));
        }
        if alpha.max_direction().is_some_and(|d| d >= self.family.len()) {
            return Err(Error::BasisMismatch(format!("multi-index {alpha} is outside the family")));
        }
        let e = self
            .coeffs
            .entry(alpha)
            .or_insert_with(|| DMatrix::zeros(mat.nrows(), mat.ncols()));
        *e += mat * c;
        Ok(())
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, m| m.iter().any(|v| *v != 0.0));
    }

    /// The variable whose column `j` is `cols[j]`, i.e. `X ψ_j = cols[j]`.
    pub fn from_columns(family: Arc<ChaosFamily>, codomain: BanachSpaceSpec, cols: &[ChaosExpansion]) -> Result<Self> {
        if cols.len() != family.len() {
            return Err(Error::dims(family.len(), cols.len()));
        }
        let m = codomain.m;
        let mut out = HChaos::zero(family.clone(), codomain);
        for (j, c) in cols.iter().enumerate() {
            if c.codomain().m != m {
                return Err(Error::dims(m, c.codomain().m));
            }
            let c = if same_family(c.family(), &family) {
                c.clone()
            } else {
                c.rebase(family.clone())?
            };
            for (alpha, v) in c.terms() {
                let mut mat = DMatrix::zeros(m, family.len());
                mat.set_column(j, &nalgebra::DVector::from_column_slice(v));
                out.add_term(alpha.clone(), 1.0, &mat)?;
            }
        }
        out.prune();
        Ok(out)
    }

    /// `f ⊗ (h ⊗ x)` for a scalar expansion `f` and `h` in the span of the family.
    pub fn tensor(f: &ChaosExpansion, h: &StepFunction, x: &[f64], codomain: BanachSpaceSpec) -> Result<Self> {
        f.require_scalar()?;
        codomain.check_vector(x)?;
        let family = f.family().clone();
        let coords = family.coordinates(h)?;
        let mut op = DMatrix::zeros(codomain.m, family.len());
        for (j, c) in coords.iter().enumerate() {
            for (r, xv) in x.iter().enumerate() {
                op[(r, j)] = c * xv;
            }
        }
        Self::tensor_operator(f, &op, codomain)
    }

    /// `f ⊗ R` with `R` given by its columns on the family of `f`.
    pub fn tensor_operator(f: &ChaosExpansion, op: &DMatrix<f64>, codomain: BanachSpaceSpec) -> Result<Self> {
        f.require_scalar()?;
        let mut out = HChaos::zero(f.family().clone(), codomain);
        for (a, c) in f.terms() {
            out.add_term(a.clone(), c[0], op)?;
        }
        out.prune();
        Ok(out)
    }

    pub fn family(&self) -> &Arc<ChaosFamily> {
        &self.family
    }

    pub fn codomain(&self) -> &BanachSpaceSpec {
        &self.codomain
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &DMatrix<f64>)> {
        self.coeffs.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn with_codomain(mut self, codomain: BanachSpaceSpec) -> Result<Self> {
        if codomain.m != self.codomain.m {
            return Err(Error::dims(self.codomain.m, codomain.m));
        }
        self.codomain = codomain;
        Ok(self)
    }

    fn relabel(&self, family: Arc<ChaosFamily>, map: &[usize]) -> Self {
        let n = family.len();
        let coeffs = self
            .coeffs
            .iter()
            .map(|(a, m)| {
                let mut w = DMatrix::zeros(m.nrows(), n);
                for (j, &t) in map.iter().enumerate() {
                    w.set_column(t, &m.column(j));
                }
                (a.remap(map), w)
            })
            .collect();
        HChaos {
            family,
            codomain: self.codomain,
            coeffs,
        }
    }

    fn unify(&self, other: &HChaos) -> Result<(HChaos, HChaos)> {
        if same_family(&self.family, &other.family) {
            return Ok((self.clone(), other.clone()));
        }
        let (u, map) = self.family.union(&other.family)?;
        let u = Arc::new(u);
        Ok((self.relabel(u.clone(), &identity_map(self.family.len())), other.relabel(u, &map)))
    }

    /// Brings a chaos expansion onto this family (extending it if needed).
    fn unify_scalar(&self, f: &ChaosExpansion) -> Result<(HChaos, ChaosExpansion)> {
        if same_family(&self.family, f.family()) {
            return Ok((self.clone(), f.clone()));
        }
        let (u, map) = self.family.union(f.family())?;
        let u = Arc::new(u);
        Ok((self.relabel(u.clone(), &identity_map(self.family.len())), f.relabel(u, &map)))
    }

    pub fn axpy(&self, c: f64, other: &HChaos) -> Result<Self> {
        if self.codomain.m != other.codomain.m {
            return Err(Error::dims(self.codomain.m, other.codomain.m));
        }
        let (mut a, b) = self.unify(other)?;
        for (k, m) in &b.coeffs {
            a.add_term(k.clone(), c, m)?;
        }
        a.prune();
        Ok(a)
    }

    pub fn add(&self, other: &HChaos) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &HChaos) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for m in out.coeffs.values_mut() {
            *m *= c;
        }
        out.prune();
        out
    }

    /// `X h` as an `E`-valued expansion.
    pub fn apply(&self, h: &StepFunction) -> Result<ChaosExpansion> {
        let coords = self.family.coordinates(h)?;
        self.apply_coords(&coords)
    }

    /// `X ψ_j`.
    pub fn column(&self, j: usize) -> Result<ChaosExpansion> {
        let mut coords = vec![0.0; self.family.len()];
        coords[j] = 1.0;
        self.apply_coords(&coords)
    }

    fn apply_coords(&self, coords: &[f64]) -> Result<ChaosExpansion> {
        let terms = self.coeffs.iter().map(|(a, m)| {
            let v: Vec<f64> = (0..m.nrows())
                .map(|r| coords.iter().enumerate().map(|(j, c)| c * m[(r, j)]).sum())
                .collect();
            (a.clone(), v)
        });
        ChaosExpansion::from_terms(self.family.clone(), self.codomain, terms)
    }

    /// `E X` as a matrix of columns on the family.
    pub fn expectation(&self) -> DMatrix<f64> {
        self.coeffs
            .get(&MultiIndex::empty())
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.codomain.m, self.family.len()))
    }

    /// `E X` as an operator.
    pub fn expectation_operator(&self) -> Result<GammaOperator> {
        GammaOperator::from_matrix(self.family.functions().to_vec(), self.expectation(), self.codomain)
    }

    /// The operator `X(ω)` at the chaos point `ξ`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.codomain.m, self.family.len());
        for (a, m) in &self.coeffs {
            let f = ChaosExpansion::hermite(self.family.clone(), a.clone())?;
            out += m * f.evaluate(xi)?[0];
        }
        Ok(out)
    }

    /// `E⟨X, Y⟩` with the trace pairing: `Σ_α α! Σ_j ⟨X_α ψ_j, Y_α ψ_j⟩`.
    pub fn pairing(&self, other: &HChaos) -> Result<f64> {
        if self.codomain.m != other.codomain.m {
            return Err(Error::dims(self.codomain.m, other.codomain.m));
        }
        let (a, b) = self.unify(other)?;
        Ok(a.coeffs
            .iter()
            .filter_map(|(k, ma)| b.coeffs.get(k).map(|mb| k.factorial() * ma.dot(mb)))
            .sum())
    }

    /// `E‖X‖²` for the Hilbert-Schmidt norm.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(a, m)| a.factorial() * m.norm_squared())
            .sum()
    }

    pub fn max_abs_diff(&self, other: &HChaos) -> Result<f64> {
        let d = self.sub(other)?;
        Ok(d.coeffs.values().flat_map(|m| m.iter()).fold(0.0, |a, v| a.max(v.abs())))
    }

    /// `f · X` for a scalar expansion `f`.
    pub fn scalar_multiply(&self, f: &ChaosExpansion) -> Result<Self> {
        f.require_scalar()?;
        let (x, f) = self.unify_scalar(f)?;
        let mut out = HChaos::zero(x.family.clone(), x.codomain);
        for (alpha, cf) in f.terms() {
            for (beta, mx) in &x.coeffs {
                for (g, c) in hermite_product(alpha, beta)? {
                    out.add_term(g, c * cf[0], mx)?;
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// `X ⊗ G` for a scalar-valued `X` (an `H`-valued variable) and `E`-valued `G`.
    pub fn outer(&self, g: &ChaosExpansion) -> Result<Self> {
        if self.codomain.m != 1 {
            return Err(Error::InvalidArgument("outer product needs an H-valued (scalar) factor".into()));
        }
        let (x, g) = self.unify_scalar(g)?;
        let mut out = HChaos::zero(x.family.clone(), *g.codomain());
        let gm = g.codomain().m;
        for (alpha, mx) in &x.coeffs {
            for (beta, cg) in g.terms() {
                let cg_col = DMatrix::from_column_slice(gm, 1, cg);
                let op = &cg_col * mx; // (m × 1)(1 × M)
                for (k, c) in hermite_product(alpha, beta)? {
                    out.add_term(k, c, &op)?;
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// The `H`-valued variable `h ↦ ⟨X h, G⟩` for `G` over `E*`.
    pub fn pair_with(&self, g: &ChaosExpansion) -> Result<Self> {
        if g.codomain().m != self.codomain.m {
            return Err(Error::dims(self.codomain.m, g.codomain().m));
        }
        let (x, g) = self.unify_scalar(g)?;
        let mut out = HChaos::zero(x.family.clone(), BanachSpaceSpec::hilbert(1));
        for (alpha, mx) in &x.coeffs {
            for (beta, cg) in g.terms() {
                let row = DMatrix::from_row_slice(1, cg.len(), cg) * mx;
                for (k, c) in hermite_product(alpha, beta)? {
                    out.add_term(k, c, &row)?;
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// `E(X(t) | F_t)` at every `t`, in the filtration generated by the family.
    pub fn conditional_expectation(&self, t: f64) -> Result<Self> {
        let past: Vec<bool> = (0..self.family.len())
            .map(|j| self.family.is_past(j, t))
            .collect::<Result<_>>()?;
        let mut out = self.clone();
        out.coeffs.retain(|a, _| a.entries().iter().all(|&(d, _)| past[d]));
        Ok(out)
    }

    /// Discrete adapted projection: column `j` is conditioned on the information
    /// available at the left end of the support of `ψ_j`.
    pub fn adapted_projection(&self) -> Result<Self> {
        let n = self.family.len();
        // past[j][d]: direction d is known at the start of column j; zero columns are skipped
        let mut past = vec![vec![true; n]; n];
        for (j, row) in past.iter_mut().enumerate() {
            if self.coeffs.values().all(|m| m.column(j).iter().all(|v| *v == 0.0)) {
                continue;
            }
            let s = self.family.support_start(j);
            for (d, p) in row.iter_mut().enumerate() {
                *p = self.family.is_past(d, s)?;
            }
        }
        let mut out = self.clone();
        for (a, m) in out.coeffs.iter_mut() {
            for (j, row) in past.iter().enumerate() {
                if !a.entries().iter().all(|&(d, _)| row[d]) {
                    m.column_mut(j).fill(0.0);
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Whether the discrete adapted projection leaves `X` unchanged.
    pub fn is_adapted(&self) -> Result<bool> {
        Ok(self.adapted_projection()?.max_abs_diff(self)? == 0.0)
    }

    /// `ξ_X(t) = X ∘ (1_{[0,t]} ·)`: zeroes the columns of directions supported after `t`.
    pub fn restrict_before(&self, t: f64) -> Result<Self> {
        let past: Vec<bool> = (0..self.family.len())
            .map(|j| self.family.is_past(j, t))
            .collect::<Result<_>>()?;
        let mut out = self.clone();
        for m in out.coeffs.values_mut() {
            for (j, p) in past.iter().enumerate() {
                if !p {
                    m.column_mut(j).fill(0.0);
                }
            }
        }
        out.prune();
        Ok(out)
    }
}

/// Exact Malliavin derivative: `D(He_α ⊗ c) = Σ_j α_j He_{α−e_j} ⊗ (ψ_j ⊗ c)`.
pub fn malliavin_derivative(f: &ChaosExpansion) -> HChaos {
    let family = f.family().clone();
    let m = f.codomain().m;
    let mut out = HChaos::zero(family.clone(), *f.codomain());
    for (alpha, c) in f.terms() {
        for &(j, k) in alpha.entries() {
            let lower = alpha.shifted(j, -1).expect("degree is positive");
            let mut op = DMatrix::zeros(m, family.len());
            for (r, v) in c.iter().enumerate() {
                op[(r, j)] = k as f64 * v;
            }
            out.add_term(lower, 1.0, &op).expect("shapes agree by construction");
        }
    }
    out.prune();
    out
}

/// Skorokhod divergence by the explicit formula
/// `δ(f ⊗ R) = Σ_j W(h_j) f ⊗ R h_j − R(Df)` over the family basis.
pub fn divergence(x: &HChaos) -> Result<ChaosExpansion> {
    divergence_with(x, DivergenceRule::Standard, None)
}

/// [`divergence`] with a chosen correction sign and, optionally, a different
/// orthonormal basis `h_j = Σ_k U[j,k] ψ_k` of the span (`U` orthogonal).
pub fn divergence_with(x: &HChaos, rule: DivergenceRule, rotation: Option<&DMatrix<f64>>) -> Result<ChaosExpansion> {
    let family = x.family.clone();
    let n = family.len();
    let m = x.codomain.m;
    let u = match rotation {
        Some(u) => {
            if u.nrows() != n || u.ncols() != n {
                return Err(Error::ShapeMismatch(format!("rotation must be {n}x{n}")));
            }
            u.clone()
        }
        None => DMatrix::identity(n, n),
    };
    let sign = match rule {
        DivergenceRule::Standard => -1.0,
        DivergenceRule::FlippedCorrection => 1.0,
    };
    let mut out = ChaosExpansion::zero(family.clone(), x.codomain);
    for (beta, r) in &x.coeffs {
        let f = ChaosExpansion::hermite(family.clone(), beta.clone())?;
        // Σ_j W(h_j) f ⊗ R h_j
        for j in 0..n {
            let rh: Vec<f64> = (0..m).map(|row| (0..n).map(|k| u[(j, k)] * r[(row, k)]).sum()).collect();
            if rh.iter().all(|v| *v == 0.0) {
                continue;
            }
            let w_terms = (0..n)
                .filter(|&k| u[(j, k)] != 0.0)
                .map(|k| (MultiIndex::single(k, 1), vec![u[(j, k)]]));
            let w = ChaosExpansion::from_terms(family.clone(), BanachSpaceSpec::hilbert(1), w_terms)?;
            let wf = w.multiply(&f)?;
            out = out.add(&wf.tensor(&rh, x.codomain)?)?;
        }
        // R(Df) = Σ_k ∂_k f · R ψ_k
        let df = malliavin_derivative(&f);
        for (gamma, dm) in df.terms() {
            let v: Vec<f64> = (0..m).map(|row| (0..n).map(|k| dm[(0, k)] * r[(row, k)]).sum()).collect();
            let term = ChaosExpansion::from_terms(family.clone(), x.codomain, [(gamma.clone(), v)])?;
            out = out.axpy(sign, &term)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::TimeGrid;

    fn fam(n: usize) -> Arc<ChaosFamily> {
        Arc::new(ChaosFamily::canonical(&TimeGrid::uniform(1.0, n).unwrap(), 1).unwrap())
    }

    fn he(f: &Arc<ChaosFamily>, pairs: &[(usize, u32)]) -> ChaosExpansion {
        ChaosExpansion::hermite(f.clone(), MultiIndex::from_pairs(pairs)).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let f = fam(2);
        let e2 = BanachSpaceSpec::hilbert(2);
        let x = [1.0, -2.0];
        let df = malliavin_derivative(&he(&f, &[(0, 2)]).tensor(&x, e2).unwrap());
        let expect = HChaos::tensor(&he(&f, &[(0, 1)]).scale(2.0), f.function(0), &x, e2).unwrap();
        assert!(df.max_abs_diff(&expect).unwrap() < 1e-14);
        let c = ChaosExpansion::constant(f.clone(), e2, &x).unwrap();
        assert!(malliavin_derivative(&c).is_empty());
        let prod = malliavin_derivative(&he(&f, &[(0, 1), (1, 1)]));
        let e1 = BanachSpaceSpec::hilbert(1);
        let expect = HChaos::tensor(&he(&f, &[(1, 1)]), f.function(0), &[1.0], e1)
            .unwrap()
            .add(&HChaos::tensor(&he(&f, &[(0, 1)]), f.function(1), &[1.0], e1).unwrap())
            .unwrap();
        assert!(prod.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn divergence_examples() {
        let f = fam(2);
        let e2 = BanachSpaceSpec::hilbert(2);
        let x = [0.5, 3.0];
        let one = ChaosExpansion::constant(f.clone(), BanachSpaceSpec::hilbert(1), &[1.0]).unwrap();
        let d = divergence(&HChaos::tensor(&one, f.function(0), &x, e2).unwrap()).unwrap();
        assert!(d.max_abs_diff(&he(&f, &[(0, 1)]).tensor(&x, e2).unwrap()).unwrap() < 1e-14);
        let d = divergence(&HChaos::tensor(&he(&f, &[(0, 1)]), f.function(0), &x, e2).unwrap()).unwrap();
        assert!(d.max_abs_diff(&he(&f, &[(0, 2)]).tensor(&x, e2).unwrap()).unwrap() < 1e-14);
        let d = divergence(&HChaos::tensor(&he(&f, &[(1, 1)]), f.function(0), &x, e2).unwrap()).unwrap();
        assert!(d.max_abs_diff(&he(&f, &[(0, 1), (1, 1)]).tensor(&x, e2).unwrap()).unwrap() < 1e-14);
    }

    #[test]
    fn flipped_rule_differs_only_by_the_correction() {
        let f = fam(1);
        let e1 = BanachSpaceSpec::hilbert(1);
        let x = HChaos::tensor(&he(&f, &[(0, 1)]), f.function(0), &[1.0], e1).unwrap();
        let good = divergence(&x).unwrap();
        let bad = divergence_with(&x, DivergenceRule::FlippedCorrection, None).unwrap();
        // δ(ξ ψ) = ξ² − 1 = He_2; flipped gives ξ² + 1 = He_2 + 2
        assert_eq!(bad.sub(&good).unwrap().expectation(), vec![2.0]);
    }

    #[test]
    fn number_operator() {
        let f = fam(2);
        for n in 1..6 {
            let h = he(&f, &[(0, n), (1, 2)]);
            let lhs = divergence(&malliavin_derivative(&h)).unwrap();
            assert!(lhs.max_abs_diff(&h.scale((n + 2) as f64)).unwrap() < 1e-13);
        }
    }

    #[test]
    fn adapted_projection_on_canonical_family() {
        let f = fam(2);
        let e1 = BanachSpaceSpec::hilbert(1);
        // ξ_0 on the second interval is adapted; ξ_1 on the second interval is not
        let adapted = HChaos::tensor(&he(&f, &[(0, 1)]), f.function(1), &[1.0], e1).unwrap();
        assert!(adapted.is_adapted().unwrap());
        let anticipating = HChaos::tensor(&he(&f, &[(1, 1)]), f.function(1), &[1.0], e1).unwrap();
        assert!(anticipating.adapted_projection().unwrap().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let f = fam(2);
        let x = HChaos::tensor(&he(&f, &[(1, 2)]), f.function(0), &[1.0, 2.0], BanachSpaceSpec::hilbert(2)).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(serde_json::from_str::<HChaos>(&s).unwrap(), x);
    }
}
