use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::BanachSpaceSpec;
use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng;
use crate::stats::{self, Estimate};
use crate::time::{gram_schmidt, StepFunction};

/// Largest Gaussian dimension integrated by tensor quadrature.
pub const QUAD_DIM_CAP: usize = 4;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// A finite-rank operator `R: H → E` given by its values on an orthonormal family.
///
/// Column `j` of `matrix` is `R b_j`; `R` vanishes on the orthogonal complement
/// of the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct GammaOperator {
    basis: Vec<StepFunction>,
    matrix: DMatrix<f64>,
    codomain: BanachSpaceSpec,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    basis: Vec<StepFunction>,
    columns: Vec<Vec<f64>>,
    codomain: BanachSpaceSpec,
}

impl TryFrom<OperatorRepr> for GammaOperator {
    type Error = Error;
    fn try_from(r: OperatorRepr) -> Result<Self> {
        GammaOperator::new(r.basis, r.columns, r.codomain)
    }
}

impl From<GammaOperator> for OperatorRepr {
    fn from(g: GammaOperator) -> Self {
        let columns = g.matrix.column_iter().map(|c| c.iter().copied().collect()).collect();
        OperatorRepr {
            basis: g.basis,
            columns,
            codomain: g.codomain,
        }
    }
}

/// How `E‖Σ γ_n R b_n‖²` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// Frobenius norm; Hilbert codomain only.
    Exact,
    /// Tensor Gauss-Hermite over the range of the covariance.
    Quadrature { order: usize },
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact for `l2`, quadrature at the default order when the rank is at most
    /// [`QUAD_DIM_CAP`], Monte Carlo otherwise.
    Auto { samples: usize, seed: u64 },
}

impl GammaOperator {
    pub fn new(basis: Vec<StepFunction>, columns: Vec<Vec<f64>>, codomain: BanachSpaceSpec) -> Result<Self> {
        if basis.len() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} basis vectors but {} columns",
                basis.len(),
                columns.len()
            )));
        }
        let mut matrix = DMatrix::zeros(codomain.m, columns.len());
        for (j, c) in columns.iter().enumerate() {
            codomain.check_vector(c)?;
            matrix.set_column(j, &DVector::from_column_slice(c));
        }
        Self::from_matrix(basis, matrix, codomain)
    }

    pub fn from_matrix(basis: Vec<StepFunction>, matrix: DMatrix<f64>, codomain: BanachSpaceSpec) -> Result<Self> {
        if matrix.nrows() != codomain.m || matrix.ncols() != basis.len() {
            return Err(Error::ShapeMismatch(format!(
                "matrix is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.m,
                basis.len()
            )));
        }
        for i in 0..basis.len() {
            for j in i..basis.len() {
                let g = basis[i].inner(&basis[j])?;
                let target = if i == j { 1.0 } else { 0.0 };
                if (g - target).abs() > 1e-10 {
                    return Err(Error::BasisMismatch(format!(
                        "domain family is not orthonormal: <b_{i}, b_{j}> = {g}"
                    )));
                }
            }
        }
        Ok(GammaOperator { basis, matrix, codomain })
    }

    pub fn zero(codomain: BanachSpaceSpec) -> Self {
        GammaOperator {
            basis: Vec::new(),
            matrix: DMatrix::zeros(codomain.m, 0),
            codomain,
        }
    }

    /// `h ⊗ x: g ↦ ⟨g, h⟩ x`.
    pub fn rank_one(h: &StepFunction, x: &[f64], codomain: BanachSpaceSpec) -> Result<Self> {
        Self::from_terms(&[(h.clone(), x.to_vec())], codomain)
    }

    /// `Σ_j h_j ⊗ x_j` for arbitrary (not necessarily orthonormal) `h_j`.
    pub fn from_terms(terms: &[(StepFunction, Vec<f64>)], codomain: BanachSpaceSpec) -> Result<Self> {
        for (_, x) in terms {
            codomain.check_vector(x)?;
        }
        let hs: Vec<StepFunction> = terms.iter().map(|(h, _)| h.clone()).collect();
        let (basis, a) = gram_schmidt(&hs)?;
        let mut matrix = DMatrix::zeros(codomain.m, basis.len());
        for (k, (_, x)) in terms.iter().enumerate() {
            for j in 0..basis.len() {
                let c = a[(k, j)];
                for (r, xv) in x.iter().enumerate() {
                    matrix[(r, j)] += c * xv;
                }
            }
        }
        Ok(GammaOperator { basis, matrix, codomain })
    }

    pub fn basis(&self) -> &[StepFunction] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn codomain(&self) -> &BanachSpaceSpec {
        &self.codomain
    }

    pub fn rank_bound(&self) -> usize {
        self.basis.len()
    }

    /// `R h = Σ_j ⟨h, b_j⟩ R b_j`.
    pub fn apply(&self, h: &StepFunction) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.codomain.m];
        for (j, b) in self.basis.iter().enumerate() {
            let c = h.inner(b)?;
            for (r, o) in out.iter_mut().enumerate() {
                *o += c * self.matrix[(r, j)];
            }
        }
        Ok(out)
    }

    /// `T ∘ R` for a matrix `T: E → F`.
    pub fn compose(&self, t: &DMatrix<f64>, target: BanachSpaceSpec) -> Result<Self> {
        if t.ncols() != self.codomain.m || t.nrows() != target.m {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose a {}x{} matrix with an operator into R^{}",
                t.nrows(),
                t.ncols(),
                self.codomain.m
            )));
        }
        Ok(GammaOperator {
            basis: self.basis.clone(),
            matrix: t * &self.matrix,
            codomain: target,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        GammaOperator {
            basis: self.basis.clone(),
            matrix: &self.matrix * c,
            codomain: self.codomain,
        }
    }

    /// Both operators re-expressed on a shared orthonormal family.
    pub fn on_common_basis(ops: &[&GammaOperator]) -> Result<(Vec<StepFunction>, Vec<DMatrix<f64>>)> {
        let all: Vec<StepFunction> = ops.iter().flat_map(|o| o.basis.iter().cloned()).collect();
        let (basis, a) = gram_schmidt(&all)?;
        let mut offset = 0;
        let mut mats = Vec::with_capacity(ops.len());
        for o in ops {
            let k = o.basis.len();
            let block = a.rows(offset, k).into_owned();
            mats.push(&o.matrix * block);
            offset += k;
        }
        Ok((basis, mats))
    }

    /// `Σ_i c_i R_i`; all operators must share the codomain.
    pub fn linear_combination(coeffs: &[f64], ops: &[&GammaOperator]) -> Result<Self> {
        let Some(first) = ops.first() else {
            return Err(Error::InvalidArgument("empty operator list".into()));
        };
        for o in ops {
            if o.codomain.m != first.codomain.m {
                return Err(Error::dims(first.codomain.m, o.codomain.m));
            }
        }
        let (basis, mats) = Self::on_common_basis(ops)?;
        let mut matrix = DMatrix::zeros(first.codomain.m, basis.len());
        for (c, m) in coeffs.iter().zip(&mats) {
            matrix += m * *c;
        }
        Ok(GammaOperator {
            basis,
            matrix,
            codomain: first.codomain,
        })
    }

    /// `R ∘ (1_{[0,t]} ·)`, the truncation acting on the domain side.
    pub fn restrict_before(&self, t: f64) -> Result<Self> {
        let terms: Vec<(StepFunction, Vec<f64>)> = self
            .basis
            .iter()
            .enumerate()
            .map(|(j, b)| Ok((b.restrict_before(t)?, self.matrix.column(j).iter().copied().collect())))
            .collect::<Result<_>>()?;
        if terms.is_empty() {
            return Ok(self.clone());
        }
        Self::from_terms(&terms, self.codomain)
    }

    pub fn frobenius(&self) -> f64 {
        self.matrix.norm()
    }
}

/// `‖R‖_γ`.
pub fn gamma_norm(r: &GammaOperator, mode: GammaMode) -> Result<Estimate> {
    gamma_norm_matrix(&r.matrix, &r.codomain, mode)
}

/// `(E‖M γ‖²)^{1/2}` for a standard Gaussian vector `γ`.
pub fn gamma_norm_matrix(m: &DMatrix<f64>, space: &BanachSpaceSpec, mode: GammaMode) -> Result<Estimate> {
    let sq = gamma_norm_sq_matrix(m, space, mode)?;
    let value = sq.value.max(0.0).sqrt();
    // delta method for the square root
    let std_error = if value > 0.0 { sq.std_error / (2.0 * value) } else { sq.std_error.sqrt() };
    Ok(Estimate { value, std_error, ..sq })
}

/// `E‖M γ‖²` for a standard Gaussian vector `γ`.
pub fn gamma_norm_sq_matrix(m: &DMatrix<f64>, space: &BanachSpaceSpec, mode: GammaMode) -> Result<Estimate> {
    if m.nrows() != space.m {
        return Err(Error::dims(space.m, m.nrows()));
    }
    match mode {
        GammaMode::Exact => {
            if !space.is_hilbert() {
                return Err(Error::NotHilbert(space.norm.to_string()));
            }
            Ok(Estimate::exact(m.norm_squared()))
        }
        GammaMode::Quadrature { order } => {
            let l = covariance_factor(m);
            if l.ncols() > QUAD_DIM_CAP {
                return Err(Error::QuadratureCap {
                    dim: l.ncols(),
                    cap: QUAD_DIM_CAP,
                });
            }
            quadrature_sq(&l, space, order)
        }
        GammaMode::MonteCarlo { samples, seed } => monte_carlo_sq(m, space, samples, seed),
        GammaMode::Auto { samples, seed } => {
            if space.is_hilbert() {
                return Ok(Estimate::exact(m.norm_squared()));
            }
            let l = covariance_factor(m);
            if l.ncols() <= QUAD_DIM_CAP {
                quadrature_sq(&l, space, quadrature::DEFAULT_ORDER)
            } else {
                monte_carlo_sq(m, space, samples, seed)
            }
        }
    }
}

/// `L` with `L Lᵀ = M Mᵀ`, keeping only the numerically non-zero spectrum.
pub(crate) fn covariance_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let c = m * m.transpose();
    spectral_factor(&c)
}

/// Spectral square-root factor of a symmetric positive semi-definite matrix.
pub(crate) fn spectral_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = c.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(c.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
    let keep: Vec<usize> = (0..n)
        .filter(|&i| top > 0.0 && eig.eigenvalues[i] > EIGEN_FLOOR * top.max(1.0))
        .collect();
    let mut l = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for r in 0..n {
            l[(r, col)] = eig.eigenvectors[(r, i)] * s;
        }
    }
    l
}

fn quadrature_sq(l: &DMatrix<f64>, space: &BanachSpaceSpec, order: usize) -> Result<Estimate> {
    let mut y = vec![0.0; l.nrows()];
    let v = quadrature::tensor_expect(l.ncols(), order, |z| {
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = (0..z.len()).map(|k| l[(r, k)] * z[k]).sum();
        }
        space.norm(&y).powi(2)
    })?;
    Ok(Estimate::exact(v))
}

fn monte_carlo_sq(m: &DMatrix<f64>, space: &BanachSpaceSpec, samples: usize, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("Monte Carlo mode needs at least 2 samples".into()));
    }
    let k = m.ncols();
    let values = rng::par_collect(samples, |i| {
        let mut r = rng::stream(seed, i);
        let mut g = vec![0.0; k];
        rng::fill_standard_normal(&mut r, &mut g);
        let y = m * DVector::from_column_slice(&g);
        space.norm(y.as_slice()).powi(2)
    });
    Ok(stats::estimate(&values, seed))
}

/// `tr(S* R) = Σ_n ⟨R h_n, S h_n⟩` over any orthonormal basis of `H`.
///
/// The operators may be given on different domain families; the pairing is
/// computed as `Σ_{ij} ⟨b_i, b'_j⟩ ⟨R b_i, S b'_j⟩`.
pub fn trace_pairing(s: &GammaOperator, r: &GammaOperator) -> Result<f64> {
    if s.codomain.m != r.codomain.m {
        return Err(Error::dims(r.codomain.m, s.codomain.m));
    }
    if s.codomain.norm != r.codomain.dual().norm {
        return Err(Error::InvalidArgument(format!(
            "first operator must map into the dual {}, found {}",
            r.codomain.dual().norm,
            s.codomain.norm
        )));
    }
    let mut acc = 0.0;
    for (i, bi) in r.basis.iter().enumerate() {
        for (j, bj) in s.basis.iter().enumerate() {
            let q = bi.inner(bj).map_err(|e| Error::BasisMismatch(e.to_string()))?;
            if q != 0.0 {
                acc += q * r.matrix.column(i).dot(&s.matrix.column(j));
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banach::NormTag;
    use crate::time::{orthonormalize, TimeGrid};
    use proptest::prelude::*;

    fn canonical(k: usize) -> Vec<StepFunction> {
        orthonormalize(&TimeGrid::uniform(1.0, k).unwrap(), 1).unwrap()
    }

    fn identity(m: usize, norm: NormTag) -> GammaOperator {
        GammaOperator::from_matrix(canonical(m), DMatrix::identity(m, m), BanachSpaceSpec::new(m, norm).unwrap()).unwrap()
    }

    #[test]
    fn exact_norm_of_identity() {
        let r = identity(2, NormTag::L2);
        let e = gamma_norm(&r, GammaMode::Exact).unwrap();
        assert!((e.value - 2f64.sqrt()).abs() < 1e-15);
        let q = gamma_norm(&r, GammaMode::Quadrature { order: 4 }).unwrap();
        assert!((q.value - 2f64.sqrt()).abs() < 1e-13);
        let linf = identity(2, NormTag::LINF);
        assert!(matches!(gamma_norm(&linf, GammaMode::Exact), Err(Error::NotHilbert(_))));
    }

    #[test]
    fn rank_one_norm_is_vector_norm() {
        let h = StepFunction::indicator(1.0, 0.0, 0.5).unwrap();
        let x = [1.0, -2.0, 0.5];
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            let space = BanachSpaceSpec::lp(3, p).unwrap();
            let r = GammaOperator::rank_one(&h, &x, space).unwrap();
            // ‖h‖ = 1/√2 is absorbed into the column
            let expect = space.norm(&x) * 0.5f64.sqrt();
            let q = gamma_norm(&r, GammaMode::Quadrature { order: 3 }).unwrap();
            assert!((q.value - expect).abs() < 1e-12);
            let mc = gamma_norm(&r, GammaMode::MonteCarlo { samples: 4000, seed: 3 }).unwrap();
            assert!(mc.covers(expect, 3.0), "p = {p}: {mc:?} vs {expect}");
        }
    }

    #[test]
    fn linf_identity_against_closed_form() {
        // E max(γ1², γ2²) = 1 + 2/π
        let truth = (1.0 + 2.0 / std::f64::consts::PI).sqrt();
        let r = identity(2, NormTag::LINF);
        let mc = gamma_norm(&r, GammaMode::MonteCarlo { samples: 20_000, seed: 11 }).unwrap();
        assert!(mc.covers(truth, 3.0), "{mc:?} vs {truth}");
        let q = gamma_norm(&r, GammaMode::Quadrature { order: 60 }).unwrap();
        assert!((q.value - truth).abs() < 5e-3);
    }

    #[test]
    fn trace_pairing_examples() {
        let r = identity(2, NormTag::L2);
        assert!((trace_pairing(&r, &r).unwrap() - 2.0).abs() < 1e-15);
        let h = StepFunction::indicator(1.0, 0.0, 1.0).unwrap();
        let x = [1.0, 2.0];
        let xs = [3.0, -1.0];
        let e = BanachSpaceSpec::lp(2, 3.0).unwrap();
        let rr = GammaOperator::rank_one(&h, &x, e).unwrap();
        let ss = GammaOperator::rank_one(&h, &xs, e.dual()).unwrap();
        assert!((trace_pairing(&ss, &rr).unwrap() - 1.0).abs() < 1e-15);
        assert!(trace_pairing(&rr, &rr).is_err());
    }

    #[test]
    fn from_terms_handles_dependent_directions() {
        let h1 = StepFunction::indicator(1.0, 0.0, 0.5).unwrap();
        let h2 = StepFunction::indicator(1.0, 0.0, 0.5).unwrap().scale(2.0);
        let r = GammaOperator::from_terms(&[(h1.clone(), vec![1.0]), (h2, vec![1.0])], BanachSpaceSpec::hilbert(1)).unwrap();
        assert_eq!(r.rank_bound(), 1);
        // R = 3 h1 ⊗ 1, ‖R‖_γ = 3 ‖h1‖
        assert!((r.frobenius() - 3.0 * 0.5f64.sqrt()).abs() < 1e-14);
        assert!((r.apply(&h1).unwrap()[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn truncation_is_column_restriction() {
        let h = StepFunction::indicator(1.0, 0.0, 1.0).unwrap();
        let x = [1.0, 1.0];
        let r = GammaOperator::rank_one(&h, &x, BanachSpaceSpec::hilbert(2)).unwrap();
        let half = r.restrict_before(0.5).unwrap();
        assert!((half.frobenius() - 0.5f64.sqrt() * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(r.restrict_before(1.0).unwrap().frobenius(), r.frobenius());
        assert_eq!(r.restrict_before(0.0).unwrap().frobenius(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let r = identity(2, NormTag::L1);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains(r#""codomain":{"m":2,"norm":"l1"}"#));
        let back: GammaOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn trace_pairing_is_basis_invariant(
            a in prop::collection::vec(-2.0f64..2.0, 6),
            b in prop::collection::vec(-2.0f64..2.0, 6),
            theta in 0.0f64..6.3,
        ) {
            let basis = canonical(2);
            let e = BanachSpaceSpec::hilbert(3);
            let r = GammaOperator::from_matrix(basis.clone(), DMatrix::from_column_slice(3, 2, &a), e).unwrap();
            let s = GammaOperator::from_matrix(basis.clone(), DMatrix::from_column_slice(3, 2, &b), e).unwrap();
            let (c, sn) = (theta.cos(), theta.sin());
            let rot = [basis[0].scale(c).axpy(sn, &basis[1]).unwrap(), basis[0].scale(-sn).axpy(c, &basis[1]).unwrap()];
            let rotate = |op: &GammaOperator| {
                let cols: Vec<Vec<f64>> = rot.iter().map(|h| op.apply(h).unwrap()).collect();
                GammaOperator::new(rot.to_vec(), cols, e).unwrap()
            };
            let direct = trace_pairing(&s, &r).unwrap();
            let rotated = trace_pairing(&rotate(&s), &rotate(&r)).unwrap();
            prop_assert!((direct - rotated).abs() <= 1e-12 * (1.0 + direct.abs()));
            let mixed = trace_pairing(&rotate(&s), &r).unwrap();
            prop_assert!((direct - mixed).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn gamma_norm_is_homogeneous(a in prop::collection::vec(-2.0f64..2.0, 4), c in -3.0f64..3.0) {
            let e = BanachSpaceSpec::lp(2, 1.0).unwrap();
            let r = GammaOperator::from_matrix(canonical(2), DMatrix::from_column_slice(2, 2, &a), e).unwrap();
            let mode = GammaMode::Quadrature { order: 6 };
            let n1 = gamma_norm(&r, mode).unwrap().value;
            let n2 = gamma_norm(&r.scale(c), mode).unwrap().value;
            prop_assert!((n2 - c.abs() * n1).abs() <= 1e-10 * (1.0 + n2));
        }
    }
}
