use serde::{Deserialize, Serialize};

use super::projection::AdaptedProjectionProcess;
use crate::banach::{BanachSpaceSpec, GammaOperator};
use crate::chaos::HChaos;
use crate::cylindrical::{ConditionalPlan, ConditionalSettings, CylindricalRV};
use crate::error::{Error, Result};
use crate::integral::{process_family, AdaptedIntegrand, CHAOS_TOL};
use crate::rng;
use crate::stats::{loglog_rate, mean_and_se, monotone_violations};
use crate::time::{sample_path_stream, TimeGrid, GRID_TOL};

/// `F = E F + I(Y)` with `Y = P_F(DF)` on a grid.
#[derive(Debug, Clone)]
pub struct ClarkOconeRepresentation {
    pub mean: Vec<f64>,
    /// Nonzero only when `E F` needed the Monte Carlo fallback.
    pub mean_std_error: f64,
    pub integrand: AdaptedProjectionProcess,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub intervals: usize,
    pub settings: ConditionalSettings,
}

fn check_horizon(f: &CylindricalRV, grid: &TimeGrid) -> Result<()> {
    match f.horizon() {
        Some(h) if (h - grid.horizon()).abs() > GRID_TOL => Err(Error::HorizonMismatch(h, grid.horizon())),
        _ => Ok(()),
    }
}

/// `t ↦ E(D_t F | F_t)` at the left end of each grid interval.
///
/// On `e_k` the value is `Σ_j E(∂_j f(W(h)) | F_t) h_j(t⁺)_k x`.
pub fn clark_ocone_integrand(
    f: &CylindricalRV,
    grid: &TimeGrid,
    settings: &ConditionalSettings,
) -> Result<AdaptedProjectionProcess> {
    check_horizon(f, grid)?;
    AdaptedProjectionProcess::gradient(
        grid.clone(),
        f.dim().unwrap_or(1),
        f,
        settings,
        "conditioned Malliavin derivative".into(),
    )
}

/// The mean and integrand of `F`.
pub fn clark_ocone(f: &CylindricalRV, grid: &TimeGrid, settings: &ConditionalSettings) -> Result<ClarkOconeRepresentation> {
    let integrand = clark_ocone_integrand(f, grid, settings)?;
    let plan = ConditionalPlan::new(f, 0.0, settings)?;
    let empty: Vec<Vec<f64>> = (0..plan.len()).map(|i| vec![0.0; plan.past_directions(i).len()]).collect();
    let mean = plan.expectation_from(&empty);
    Ok(ClarkOconeRepresentation {
        mean: mean.value,
        mean_std_error: mean.std_error,
        integrand,
        diagnostics: Diagnostics {
            intervals: grid.len(),
            settings: *settings,
        },
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub err: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub p: f64,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<ConvergenceRow>,
    /// `s` in `err ~ N^{-s}`.
    pub slope: f64,
    /// Number of increases of `err` along the rows.
    pub violations: usize,
}

impl ConvergenceTable {
    pub(crate) fn from_samples(p: f64, seed: u64, grids: &[TimeGrid], per_level: &[Vec<f64>]) -> Self {
        let rows: Vec<ConvergenceRow> = grids
            .iter()
            .zip(per_level)
            .map(|(g, v)| {
                let (m, se) = mean_and_se(v);
                let err = m.max(0.0).powf(1.0 / p);
                // delta method for x ↦ x^{1/p}
                let std_error = if err > 0.0 { se / (p * err.powf(p - 1.0)) } else { 0.0 };
                ConvergenceRow {
                    n: g.len(),
                    err,
                    std_error,
                }
            })
            .collect();
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let errs: Vec<f64> = rows.iter().map(|r| r.err).collect();
        ConvergenceTable {
            p,
            samples: per_level.first().map_or(0, Vec::len),
            seed,
            slope: loglog_rate(&ns, &errs),
            violations: monotone_violations(&errs),
            rows,
        }
    }
}

/// Shared layout for evaluating left-point sums on several grids from one path.
pub(crate) struct Levels {
    pub joint: TimeGrid,
    /// Per level: the joint interval starting at each level left point.
    pub starts: Vec<Vec<usize>>,
    /// Per level: fine interval → level interval.
    pub maps: Vec<Vec<usize>>,
}

impl Levels {
    pub fn new(grids: &[TimeGrid]) -> Result<Self> {
        let Some(first) = grids.first() else {
            return Err(Error::InvalidArgument("at least one grid is required".into()));
        };
        let mut joint = first.clone();
        for g in &grids[1..] {
            if (g.horizon() - joint.horizon()).abs() > GRID_TOL {
                return Err(Error::HorizonMismatch(g.horizon(), joint.horizon()));
            }
            joint = joint.union(g)?;
        }
        let starts = grids
            .iter()
            .map(|g| {
                (0..g.len())
                    .map(|i| joint.find_point(g.start(i)).expect("level points lie on the joint grid"))
                    .collect()
            })
            .collect();
        Ok(Levels {
            joint,
            starts,
            maps: Vec::new(),
        })
    }

    pub fn with_sampling(mut self, grids: &[TimeGrid], sampling: &TimeGrid) -> Result<Self> {
        self.maps = grids
            .iter()
            .map(|g| sampling.coarse_index_map(g))
            .collect::<Result<_>>()?;
        Ok(self)
    }

    /// Level increments from flat sampling increments.
    pub fn increments(&self, level: usize, n: usize, dim: usize, inc: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; dim]; n];
        for (fine, &c) in self.maps[level].iter().enumerate() {
            for (o, v) in out[c].iter_mut().zip(&inc[fine * dim..(fine + 1) * dim]) {
                *o += v;
            }
        }
        out
    }
}

/// `err(N) = (E‖F − E F − Σ_i Y(t_{i-1}) ΔW_i‖^p)^{1/p}` on each grid.
///
/// All levels share the same paths, drawn on the union of the grids and the
/// direction grids of `F`.
pub fn clark_ocone_convergence(
    f: &CylindricalRV,
    grids: &[TimeGrid],
    p: f64,
    samples: usize,
    settings: &ConditionalSettings,
    seed: u64,
) -> Result<ConvergenceTable> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must lie in [1, ∞), got {p}")));
    }
    let levels = Levels::new(grids)?;
    let rep = clark_ocone(f, &levels.joint, settings)?;
    let sampling = rep.integrand.sampling_grid().clone();
    let levels = levels.with_sampling(grids, &sampling)?;
    let compiled = f.compile(&sampling)?;
    let d = rep.integrand.dim();
    let space: BanachSpaceSpec = *f.codomain();
    let per_path = rng::par_collect(samples, |s| {
        let path = sample_path_stream(&sampling, d, seed, s);
        let inc = path.increments();
        let fv = compiled.evaluate(inc);
        let y = rep.integrand.values_flat(inc);
        grids
            .iter()
            .enumerate()
            .map(|(l, g)| {
                let dw = levels.increments(l, g.len(), d, inc);
                let mut r = fv.clone();
                for (o, m) in r.iter_mut().zip(&rep.mean) {
                    *o -= m;
                }
                for (i, w) in dw.iter().enumerate() {
                    let yi = &y[levels.starts[l][i]];
                    for (row, o) in r.iter_mut().enumerate() {
                        *o -= w.iter().enumerate().map(|(k, wk)| yi[(row, k)] * wk).sum::<f64>();
                    }
                }
                space.norm(&r).powf(p)
            })
            .collect::<Vec<f64>>()
    });
    let per_level: Vec<Vec<f64>> = (0..grids.len())
        .map(|l| per_path.iter().map(|v| v[l]).collect())
        .collect();
    Ok(ConvergenceTable::from_samples(p, seed, grids, &per_level))
}

/// `err(N)` on a single grid.
pub fn clark_ocone_verify(
    f: &CylindricalRV,
    grid: &TimeGrid,
    p: f64,
    samples: usize,
    settings: &ConditionalSettings,
    seed: u64,
) -> Result<ConvergenceRow> {
    let t = clark_ocone_convergence(f, std::slice::from_ref(grid), p, samples, settings, seed)?;
    Ok(t.rows[0])
}

/// `ξ_X(t) = X ∘ (1_{[0,t]} ·)`.
pub fn martingale_truncation(x: &GammaOperator, t: f64, horizon: f64) -> Result<GammaOperator> {
    if !(0.0..=horizon + GRID_TOL).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon });
    }
    x.restrict_before(t)
}

/// [`martingale_truncation`] for a chaos-valued operator.
pub fn martingale_truncation_chaos(x: &HChaos, t: f64, horizon: f64) -> Result<HChaos> {
    if !(0.0..=horizon + GRID_TOL).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon });
    }
    x.restrict_before(t)
}

/// Outcome of the martingale identity at the grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub points: usize,
    pub paths: usize,
}

/// `E(F | F_t) − E F = ∫_0^t E(D_s F | F_s) dW_s` at every grid point, for `F` of degree at most 2.
///
/// The left side comes from the chaos expansion of `F`. The right side is
/// the exact Itô integral of the conditioned derivative: for quadratic `f`,
/// `E(∂_j f(W(h)) | F_s) = ∂_j f(m(s))` with `m(s) = W(h 1_{[0,s]})`, which is
/// affine in the path on each interval, so
/// `∫ (A + B (W_s − W_u)) dW_s = A ΔW + ½ Σ_ab B_ab (ΔW_a ΔW_b − δ_ab Δu)`
/// with `B` symmetric.
pub fn martingale_identity_check(f: &CylindricalRV, grid: &TimeGrid, paths: usize, seed: u64) -> Result<MartingaleReport> {
    check_horizon(f, grid)?;
    for t in f.terms() {
        let p = t.function().to_polynomial()?;
        if p.degree() > 2 {
            return Err(Error::NotPolynomial(format!(
                "martingale identity is exact for degree at most 2, got {}",
                p.degree()
            )));
        }
    }
    let d = f.dim().unwrap_or(1);
    let m = f.codomain().m;
    let mut sampling = grid.clone();
    for h in f.directions() {
        sampling = sampling.union(h.grid())?;
    }
    let family = process_family(grid, d, &sampling)?;
    let chaos = f.to_chaos_on(family)?;
    let mean = chaos.expectation();
    let conditioned: Vec<_> = grid
        .points()
        .iter()
        .map(|&t| chaos.conditional_expectation(t))
        .collect::<Result<_>>()?;
    let point_of: Vec<Option<usize>> = (0..=sampling.len())
        .map(|j| grid.find_point(sampling.points()[j]))
        .collect();
    // direction values on the sampling grid: [term][j] -> flat values
    let dirs: Vec<Vec<Vec<f64>>> = f
        .terms()
        .iter()
        .map(|t| t.directions().iter().map(|h| Ok(h.refine(&sampling)?.values().to_vec())).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let worst = rng::try_par_collect(paths, |s| -> Result<f64> {
        let path = sample_path_stream(&sampling, d, seed, s);
        let mut past: Vec<Vec<f64>> = dirs.iter().map(|t| vec![0.0; t.len()]).collect();
        let mut ito = vec![0.0; m];
        let mut worst: f64 = 0.0;
        let mut compare = |j: usize, ito: &[f64]| -> Result<()> {
            if let Some(n) = point_of[j] {
                let lhs = conditioned[n].evaluate_path(&path)?;
                for ((l, mu), r) in lhs.iter().zip(&mean).zip(ito) {
                    worst = worst.max((l - mu - r).abs());
                }
            }
            Ok(())
        };
        compare(0, &ito)?;
        for i in 0..sampling.len() {
            let dw = path.increment(i);
            let du = sampling.dt(i);
            for ((term, hv), a) in f.terms().iter().zip(&dirs).zip(&mut past) {
                let func = term.function();
                let g = func.gradient(a);
                let hess = func.hessian(a);
                let hi: Vec<&[f64]> = hv.iter().map(|v| &v[i * d..(i + 1) * d]).collect();
                let mut c = 0.0;
                for (j, hj) in hi.iter().enumerate() {
                    c += g[j] * hj.iter().zip(dw).map(|(x, y)| x * y).sum::<f64>();
                }
                for (j, hj) in hi.iter().enumerate() {
                    for (l, hl) in hi.iter().enumerate() {
                        if hess[j][l] == 0.0 {
                            continue;
                        }
                        let mut q = 0.0;
                        for a_ in 0..d {
                            for b_ in 0..d {
                                let delta = if a_ == b_ { du } else { 0.0 };
                                q += hj[a_] * hl[b_] * (dw[a_] * dw[b_] - delta);
                            }
                        }
                        c += 0.5 * hess[j][l] * q;
                    }
                }
                for (o, x) in ito.iter_mut().zip(term.coefficient()) {
                    *o += c * x;
                }
                for (aj, hj) in a.iter_mut().zip(&hi) {
                    *aj += hj.iter().zip(dw).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            compare(i + 1, &ito)?;
        }
        Ok(worst)
    })?;
    let max_discrepancy = worst.into_iter().fold(0.0, f64::max);
    Ok(MartingaleReport {
        max_discrepancy,
        tolerance: CHAOS_TOL,
        pass: max_discrepancy <= CHAOS_TOL,
        points: grid.points().len(),
        paths,
    })
}

/// Representation error of `Y + ε Z` for a fixed deterministic direction `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    /// `(ε, err(ε), standard error)`.
    pub rows: Vec<(f64, f64, f64)>,
    /// `‖Z‖_{L²(0,T;γ)}`.
    pub z_norm: f64,
    /// `|err(ε) − ε‖Z‖| <= err(0)` up to three standard errors on every row.
    pub pass: bool,
}

/// Perturbs the Clark-Ocone integrand by `ε Z`, `Z ≡ e_1 ⊗ u` with `u` the first unit
/// vector of `E`, and records the `L²` representation error.
///
/// By the isometry `err(ε)` is pinned between `ε‖Z‖ − err(0)` and `ε‖Z‖ + err(0)`,
/// so any integrand other than the conditioned derivative is detected.
pub fn perturbation_check(
    f: &CylindricalRV,
    grid: &TimeGrid,
    eps: &[f64],
    samples: usize,
    settings: &ConditionalSettings,
    seed: u64,
) -> Result<PerturbationReport> {
    let rep = clark_ocone(f, grid, settings)?;
    let sampling = rep.integrand.sampling_grid().clone();
    let compiled = f.compile(&sampling)?;
    let d = rep.integrand.dim();
    let map = sampling.coarse_index_map(grid)?;
    let mut all_eps = vec![0.0];
    all_eps.extend_from_slice(eps);
    let per_path = rng::par_collect(samples, |s| {
        let path = sample_path_stream(&sampling, d, seed, s);
        let inc = path.increments();
        let mut r = compiled.evaluate(inc);
        for (o, m) in r.iter_mut().zip(&rep.mean) {
            *o -= m;
        }
        let y = rep.integrand.values_flat(inc);
        let mut dw = vec![vec![0.0; d]; grid.len()];
        for (fine, &c) in map.iter().enumerate() {
            for (o, v) in dw[c].iter_mut().zip(&inc[fine * d..(fine + 1) * d]) {
                *o += v;
            }
        }
        for (i, w) in dw.iter().enumerate() {
            for (row, o) in r.iter_mut().enumerate() {
                *o -= w.iter().enumerate().map(|(k, wk)| y[i][(row, k)] * wk).sum::<f64>();
            }
        }
        let iz: f64 = dw.iter().map(|w| w[0]).sum();
        all_eps
            .iter()
            .map(|e| {
                let mut q = r.clone();
                q[0] -= e * iz;
                q.iter().map(|v| v * v).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    let z_norm = grid.horizon().sqrt();
    let mut rows = Vec::new();
    for (l, e) in all_eps.iter().enumerate() {
        let v: Vec<f64> = per_path.iter().map(|p| p[l]).collect();
        let (m, se) = mean_and_se(&v);
        let err = m.max(0.0).sqrt();
        let std_error = if err > 0.0 { se / (2.0 * err) } else { 0.0 };
        rows.push((*e, err, std_error));
    }
    let (_, err0, se0) = rows[0];
    let pass = rows
        .iter()
        .all(|&(e, err, se)| (err - e * z_norm).abs() <= err0 + 3.0 * (se + se0) + 1e-12);
    Ok(PerturbationReport { rows, z_norm, pass })
}
