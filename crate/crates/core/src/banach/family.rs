use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gamma::{gamma_norm_sq_matrix, GammaMode, GammaOperator};
use super::{spectral_norm, BanachSpaceSpec};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng;

const INNER_SAMPLES: usize = 4000;
const OUTER_QUAD_ORDER: usize = 6;
const OUTER_QUAD_CAP: usize = 4;
const OUTER_SAMPLES: usize = 2000;

/// A finite family of operators `E → F` given as `m' × m` matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr", into = "FamilyRepr")]
pub struct OperatorFamily {
    members: Vec<DMatrix<f64>>,
    domain: BanachSpaceSpec,
    target: BanachSpaceSpec,
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    domain: BanachSpaceSpec,
    target: BanachSpaceSpec,
    /// Row-major matrices.
    members: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<FamilyRepr> for OperatorFamily {
    type Error = Error;
    fn try_from(r: FamilyRepr) -> Result<Self> {
        let members = r
            .members
            .iter()
            .map(|rows| {
                let ncols = rows.first().map_or(0, |x| x.len());
                if rows.iter().any(|x| x.len() != ncols) {
                    return Err(Error::ShapeMismatch("ragged matrix rows".into()));
                }
                Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
            })
            .collect::<Result<_>>()?;
        OperatorFamily::new(members, r.domain, r.target)
    }
}

impl From<OperatorFamily> for FamilyRepr {
    fn from(f: OperatorFamily) -> Self {
        let members = f
            .members
            .iter()
            .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect();
        FamilyRepr {
            domain: f.domain,
            target: f.target,
            members,
        }
    }
}

impl OperatorFamily {
    pub fn new(members: Vec<DMatrix<f64>>, domain: BanachSpaceSpec, target: BanachSpaceSpec) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("operator family must be non-empty".into()));
        }
        for t in &members {
            if t.nrows() != target.m || t.ncols() != domain.m {
                return Err(Error::ShapeMismatch(format!(
                    "member is {}x{}, expected {}x{}",
                    t.nrows(),
                    t.ncols(),
                    target.m,
                    domain.m
                )));
            }
        }
        Ok(OperatorFamily { members, domain, target })
    }

    /// A family of endomorphisms of `space`.
    pub fn on(space: BanachSpaceSpec, members: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(members, space, space)
    }

    pub fn members(&self) -> &[DMatrix<f64>] {
        &self.members
    }

    pub fn domain(&self) -> &BanachSpaceSpec {
        &self.domain
    }

    pub fn target(&self) -> &BanachSpaceSpec {
        &self.target
    }

    /// The family with one more member.
    pub fn with_member(&self, t: DMatrix<f64>) -> Result<Self> {
        let mut members = self.members.clone();
        members.push(t);
        Self::new(members, self.domain, self.target)
    }

    /// Rigorous upper bound for the gamma-bound.
    ///
    /// In the Hilbert case the gamma-bound is the uniform bound. Otherwise a
    /// Gaussian sum splits by member, and the contraction principle gives
    /// `γ(𝒯) ≤ Σ_T ‖T‖`.
    pub fn gamma_bound_upper(&self) -> Result<f64> {
        if self.domain.is_hilbert() && self.target.is_hilbert() {
            return Ok(self.members.iter().map(spectral_norm).fold(0.0, f64::max));
        }
        let mut total = 0.0;
        for t in &self.members {
            total += self.domain.operator_norm_bound(t, &self.target)?;
        }
        Ok(total)
    }
}

/// Result of [`gamma_bound_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaBoundEstimate {
    /// Empirical lower bound (best ratio found).
    pub lower: f64,
    /// Running maximum after each trial.
    pub history: Vec<f64>,
    /// Rigorous upper bound.
    pub upper: f64,
    pub seed: u64,
}

fn sq_norm(m: &DMatrix<f64>, space: &BanachSpaceSpec, seed: u64) -> Result<f64> {
    Ok(gamma_norm_sq_matrix(
        m,
        space,
        GammaMode::Auto {
            samples: INNER_SAMPLES,
            seed,
        },
    )?
    .value)
}

/// `(E‖Σ γ_j T_j x_j‖² / E‖Σ γ_j x_j‖²)^{1/2}` for one choice of `(T_j, x_j)`.
fn randomized_ratio(family: &OperatorFamily, choice: &[usize], xs: &DMatrix<f64>, seed: u64) -> Result<f64> {
    let mut tx = DMatrix::zeros(family.target.m, xs.ncols());
    for (j, &c) in choice.iter().enumerate() {
        tx.set_column(j, &(&family.members[c] * xs.column(j)));
    }
    let num = sq_norm(&tx, &family.target, seed)?;
    let den = sq_norm(xs, &family.domain, seed)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

/// Empirical lower bound for the gamma-bound of `family`.
///
/// Trial 0 is deterministic and puts the top right singular vector of the
/// member with the largest spectral norm in the first slot; later trials draw
/// members uniformly and vectors from a standard Gaussian.
pub fn gamma_bound_estimate(
    family: &OperatorFamily,
    n_vectors: usize,
    trials: usize,
    seed: u64,
) -> Result<GammaBoundEstimate> {
    if trials == 0 || n_vectors == 0 {
        return Err(Error::InvalidArgument("trials and n_vectors must be at least 1".into()));
    }
    let m = family.domain.m;
    let mut history = Vec::with_capacity(trials);
    let mut best = 0.0f64;
    for trial in 0..trials {
        let (choice, xs) = if trial == 0 {
            let (idx, _) = family
                .members
                .iter()
                .enumerate()
                .map(|(i, t)| (i, spectral_norm(t)))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let svd = family.members[idx].clone().svd(false, true);
            let vt = svd.v_t.unwrap();
            let top = (0..svd.singular_values.len())
                .max_by(|a, b| svd.singular_values[*a].partial_cmp(&svd.singular_values[*b]).unwrap())
                .unwrap();
            let mut xs = DMatrix::zeros(m, n_vectors);
            xs.set_column(0, &vt.row(top).transpose());
            (vec![idx; n_vectors], xs)
        } else {
            let mut r = rng::stream(seed, trial as u64);
            let choice: Vec<usize> = (0..n_vectors).map(|_| r.random_range(0..family.members.len())).collect();
            let mut data = vec![0.0; m * n_vectors];
            rng::fill_standard_normal(&mut r, &mut data);
            (choice, DMatrix::from_vec(m, n_vectors, data))
        };
        let ratio = randomized_ratio(family, &choice, &xs, rng::child_seed(seed, trial as u64))?;
        best = best.max(ratio);
        history.push(best);
    }
    Ok(GammaBoundEstimate {
        lower: best,
        history,
        upper: family.gamma_bound_upper()?,
        seed,
    })
}

/// Both sides of the lifted gamma-boundedness inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    /// `E‖Σ_j γ_j T_j ∘ R_j‖_γ²`.
    pub lhs: f64,
    /// `E‖Σ_j γ_j R_j‖_γ²`.
    pub rhs: f64,
    /// Constant `C` used on the right.
    pub constant: f64,
    /// `C² · rhs − lhs`.
    pub slack: f64,
    pub holds: bool,
    /// Members assigned to the operators.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

/// `E_γ ‖Σ_j γ_j M_j‖²_γ` over independent standard Gaussians `γ_j`.
fn randomized_gamma_sq(mats: &[DMatrix<f64>], space: &BanachSpaceSpec, seed: u64) -> Result<f64> {
    if space.is_hilbert() {
        return Ok(mats.iter().map(|m| m.norm_squared()).sum());
    }
    let (rows, cols) = mats[0].shape();
    let combine = |g: &[f64]| {
        let mut s = DMatrix::zeros(rows, cols);
        for (m, c) in mats.iter().zip(g) {
            s += m * *c;
        }
        s
    };
    if mats.len() <= OUTER_QUAD_CAP {
        let mut err = None;
        let v = quadrature::tensor_expect(mats.len(), OUTER_QUAD_ORDER, |g| match sq_norm(&combine(g), space, seed) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        })?;
        return match err {
            Some(e) => Err(e),
            None => Ok(v),
        };
    }
    let vals = rng::try_par_collect(OUTER_SAMPLES, |i| {
        let mut r = rng::stream(seed, i);
        let mut g = vec![0.0; mats.len()];
        rng::fill_standard_normal(&mut r, &mut g);
        sq_norm(&combine(&g), space, rng::child_seed(seed, i))
    })?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Checks `E‖Σ γ_j T_j∘R_j‖² ≤ C² E‖Σ γ_j R_j‖²` with `T_j` drawn from `family`
/// by `seed` and `C` the rigorous upper bound of the family.
pub fn lift_check(family: &OperatorFamily, r_list: &[GammaOperator], seed: u64) -> Result<LiftReport> {
    let mut r = rng::stream(seed, 0);
    let assignment: Vec<usize> = (0..r_list.len()).map(|_| r.random_range(0..family.members.len())).collect();
    lift_check_assigned(family, r_list, &assignment, seed)
}

/// [`lift_check`] with an explicit member assignment.
pub fn lift_check_assigned(
    family: &OperatorFamily,
    r_list: &[GammaOperator],
    assignment: &[usize],
    seed: u64,
) -> Result<LiftReport> {
    if r_list.is_empty() || assignment.len() != r_list.len() {
        return Err(Error::InvalidArgument("need one member assignment per operator".into()));
    }
    for r in r_list {
        if r.codomain().m != family.domain.m {
            return Err(Error::ShapeMismatch(format!(
                "operator maps into R^{} but the family acts on R^{}",
                r.codomain().m,
                family.domain.m
            )));
        }
    }
    if assignment.iter().any(|&a| a >= family.members.len()) {
        return Err(Error::InvalidArgument("assignment index out of range".into()));
    }
    let refs: Vec<&GammaOperator> = r_list.iter().collect();
    let (_, mats) = GammaOperator::on_common_basis(&refs)?;
    let lifted: Vec<DMatrix<f64>> = mats
        .iter()
        .zip(assignment)
        .map(|(m, &a)| &family.members[a] * m)
        .collect();
    let lhs = randomized_gamma_sq(&lifted, &family.target, seed)?;
    let rhs = randomized_gamma_sq(&mats, &family.domain, seed)?;
    let constant = family.gamma_bound_upper()?;
    let slack = constant * constant * rhs - lhs;
    let holds = slack >= -1e-9 * (1.0 + lhs.abs());
    Ok(LiftReport {
        lhs,
        rhs,
        constant,
        slack,
        holds,
        assignment: assignment.to_vec(),
        seed,
    })
}

/// Random `rows × cols` matrix with standard Gaussian entries.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, stream);
    let mut data = vec![0.0; rows * cols];
    rng::fill_standard_normal(&mut r, &mut data);
    DMatrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::{orthonormalize, TimeGrid};

    fn l2(m: usize) -> BanachSpaceSpec {
        BanachSpaceSpec::hilbert(m)
    }

    #[test]
    fn identity_family_has_bound_one() {
        for space in [l2(2), BanachSpaceSpec::lp(2, 1.0).unwrap()] {
            let f = OperatorFamily::on(space, vec![DMatrix::identity(2, 2)]).unwrap();
            let e = gamma_bound_estimate(&f, 3, 5, 1).unwrap();
            assert_eq!(e.lower, 1.0);
        }
    }

    #[test]
    fn scaled_identity() {
        let f = OperatorFamily::on(l2(2), vec![DMatrix::identity(2, 2) * -2.5]).unwrap();
        let e = gamma_bound_estimate(&f, 2, 5, 1).unwrap();
        assert!((e.lower - 2.5).abs() < 1e-14);
    }

    #[test]
    fn history_is_monotone() {
        let f = OperatorFamily::on(
            BanachSpaceSpec::lp(2, 1.0).unwrap(),
            vec![gaussian_matrix(2, 2, 4, 0), gaussian_matrix(2, 2, 4, 1)],
        )
        .unwrap();
        let e = gamma_bound_estimate(&f, 2, 10, 9).unwrap();
        assert!(e.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(e.lower <= e.upper + 1e-9);
    }

    #[test]
    fn diagonal_projections_against_mesh_search() {
        let f = OperatorFamily::on(
            l2(2),
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        let est = gamma_bound_estimate(&f, 2, 50, 5).unwrap();
        // mesh oracle over x_1, x_2 on the unit circle and both member choices
        let mut mesh_best = 0.0f64;
        let steps = 24;
        for a in 0..steps {
            for b in 0..steps {
                for c1 in 0..2 {
                    for c2 in 0..2 {
                        let ta = a as f64 * std::f64::consts::TAU / steps as f64;
                        let tb = b as f64 * std::f64::consts::TAU / steps as f64;
                        let xs = DMatrix::from_column_slice(2, 2, &[ta.cos(), ta.sin(), tb.cos(), tb.sin()]);
                        mesh_best = mesh_best.max(randomized_ratio(&f, &[c1, c2], &xs, 0).unwrap());
                    }
                }
            }
        }
        assert!(est.lower >= 1.0 - 1e-12);
        assert!(est.lower <= 2f64.sqrt() * (1.0 + 1e-9));
        assert!(est.lower >= mesh_best - 1e-9);
        assert!((mesh_best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lift_identity_and_scaling() {
        let basis = orthonormalize(&TimeGrid::uniform(1.0, 3).unwrap(), 1).unwrap();
        let rs: Vec<GammaOperator> = (0..3)
            .map(|k| GammaOperator::from_matrix(basis.clone(), gaussian_matrix(2, 3, 8, k), l2(2)).unwrap())
            .collect();
        let id = OperatorFamily::on(l2(2), vec![DMatrix::identity(2, 2)]).unwrap();
        let rep = lift_check(&id, &rs, 1).unwrap();
        assert_eq!(rep.lhs, rep.rhs);
        let c = OperatorFamily::on(l2(2), vec![DMatrix::identity(2, 2) * 3.0]).unwrap();
        let rep = lift_check(&c, &rs, 1).unwrap();
        assert!((rep.lhs - 9.0 * rep.rhs).abs() < 1e-12 * rep.lhs);
        assert!(rep.holds);
    }

    #[test]
    fn lift_holds_in_l1() {
        let e = BanachSpaceSpec::lp(2, 1.0).unwrap();
        let basis = orthonormalize(&TimeGrid::uniform(1.0, 2).unwrap(), 1).unwrap();
        let rs: Vec<GammaOperator> = (0..3)
            .map(|k| GammaOperator::from_matrix(basis.clone(), gaussian_matrix(2, 2, 3, k), e).unwrap())
            .collect();
        let f = OperatorFamily::on(e, vec![gaussian_matrix(2, 2, 5, 0), gaussian_matrix(2, 2, 5, 1)]).unwrap();
        let rep = lift_check(&f, &rs, 2).unwrap();
        assert!(rep.holds, "{rep:?}");
    }

    #[test]
    fn family_json() {
        let f = OperatorFamily::on(l2(2), vec![DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("[[1.0,2.0],[3.0,4.0]]"));
        assert_eq!(serde_json::from_str::<OperatorFamily>(&s).unwrap(), f);
        assert!(OperatorFamily::on(l2(2), vec![]).is_err());
        assert!(OperatorFamily::on(l2(2), vec![DMatrix::zeros(3, 2)]).is_err());
    }
}
