//! Reports for the isometry, duality and extension identities.

use serde::{Deserialize, Serialize};

use super::chaos::{process_family, skorokhod, trace_correction};
use super::step::weighted_pairing;
use super::{coarse_increments, gamma_matrix, left_point_sum, AdaptedIntegrand, StepProcess};
use crate::banach::{gamma_norm_matrix, GammaMode};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{jackknife_pair, CheckMode, Comparison};
use crate::time::sample_path_stream;

/// Tolerance of the exact chaos identities.
pub const CHAOS_TOL: f64 = 1e-10;

/// Largest coefficient difference between two chaos computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub max_coefficient_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ExtensionReport {
    fn new(max_coefficient_discrepancy: f64) -> Self {
        ExtensionReport {
            max_coefficient_discrepancy,
            tolerance: CHAOS_TOL,
            pass: max_coefficient_discrepancy <= CHAOS_TOL,
        }
    }
}

/// Ratio of `(E‖I(X)‖^p)^{1/p}` to `(E‖X‖_γ^p)^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub p: f64,
    pub ratio: f64,
    pub std_error: f64,
    pub integral_norm: f64,
    pub gamma_norm: f64,
    pub samples: usize,
    pub seed: u64,
}

fn require_adapted(x: &StepProcess) -> Result<()> {
    if x.is_adapted() {
        Ok(())
    } else {
        Err(Error::NotAdapted("identity requires an adapted process".into()))
    }
}

/// `E⟨I(X), I(Y)⟩ = E⟨X, Y⟩` for adapted `X` and `Y` over `E*`.
///
/// The right side is `Σ_i Δt_i Σ_k E⟨X_i e_k, Y_i e_k⟩`.
pub fn duality_check(x: &StepProcess, y: &StepProcess, mode: CheckMode) -> Result<Comparison> {
    require_adapted(x)?;
    require_adapted(y)?;
    if x.grid() != y.grid() {
        return Err(Error::GridIncompatible("duality check needs a shared grid".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::dims(x.dim(), y.dim()));
    }
    if *y.codomain() != x.codomain().dual() {
        return Err(Error::ShapeMismatch("Y must take values in the dual of the codomain of X".into()));
    }
    let sampling = x.sampling_grid().union(y.sampling_grid())?;
    match mode {
        CheckMode::Chaos => {
            let family = process_family(x.grid(), x.dim(), &sampling)?;
            let lhs = x.ito_chaos_on(&family)?.l2_pairing(&y.ito_chaos_on(&family)?)?;
            let cx = x.coefficient_chaos(&family)?;
            let cy = y.coefficient_chaos(&family)?;
            let mut rhs = 0.0;
            for (i, (rx, ry)) in cx.iter().zip(&cy).enumerate() {
                for (a, b) in rx.iter().zip(ry) {
                    rhs += x.grid().dt(i) * a.l2_pairing(b)?;
                }
            }
            Ok(Comparison::exact(lhs, rhs, CHAOS_TOL))
        }
        CheckMode::MonteCarlo { samples, seed } => {
            let px = x.compile(&sampling)?;
            let py = y.compile(&sampling)?;
            let pairs = rng::par_collect(samples, |s| {
                let path = sample_path_stream(&sampling, x.dim(), seed, s);
                let inc = path.increments();
                let ix = px.forward_sum(inc);
                let iy = py.forward_sum(inc);
                let lhs: f64 = ix.iter().zip(&iy).map(|(a, b)| a * b).sum();
                (lhs, weighted_pairing(x.grid(), &px.values(inc), &py.values(inc)))
            });
            let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            Ok(Comparison::paired(&lhs, &rhs))
        }
    }
}

/// `E‖I(X)‖² = E‖X‖²_{L²(0,T;γ(R^d,E))}` by Monte Carlo, Hilbert `E` only.
pub fn ito_isometry_check<X: AdaptedIntegrand>(x: &X, samples: usize, seed: u64) -> Result<Comparison> {
    if !x.codomain().is_hilbert() {
        return Err(Error::NotHilbert(x.codomain().norm.to_string()));
    }
    if !x.is_adapted() {
        return Err(Error::NotAdapted("the isometry holds for adapted processes".into()));
    }
    let grid = x.sampling_grid();
    let pairs = rng::try_par_collect(samples, |s| -> Result<(f64, f64)> {
        let path = sample_path_stream(grid, x.dim(), seed, s);
        let values = x.values(&path)?;
        let i = left_point_sum(&values, &coarse_increments(x.grid(), &path)?);
        let lhs: f64 = i.iter().map(|v| v * v).sum();
        Ok((lhs, weighted_pairing(x.grid(), &values, &values)))
    })?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(Comparison::paired(&lhs, &rhs))
}

/// `δ(X) = I(X)` in the chaos algebra for adapted `X`.
pub fn skorokhod_equals_ito(x: &StepProcess) -> Result<ExtensionReport> {
    require_adapted(x)?;
    let family = x.chaos_family()?;
    let ito = x.ito_chaos_on(&family)?;
    let delta = skorokhod(&x.to_h_chaos_on(&family)?)?;
    Ok(ExtensionReport::new(delta.max_abs_diff(&ito)?))
}

/// `δ(X) = Σ_i X_i ΔW_i - R(DX)` for any `X`, adapted or not.
pub fn forward_sum_gap(x: &StepProcess) -> Result<ExtensionReport> {
    let family = x.chaos_family()?;
    let hx = x.to_h_chaos_on(&family)?;
    let delta = skorokhod(&hx)?;
    let rhs = x.forward_sum_chaos_on(&family)?.sub(&trace_correction(&hx)?)?;
    Ok(ExtensionReport::new(delta.max_abs_diff(&rhs)?))
}

/// Monte Carlo estimate of `‖I(X)‖_{L^p(Ω;E)} / ‖X‖_{L^p(Ω;γ)}`.
pub fn two_sided_ratio<X: AdaptedIntegrand>(x: &X, p: f64, samples: usize, seed: u64) -> Result<RatioEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must lie in (1, ∞), got {p}")));
    }
    if !x.is_adapted() {
        return Err(Error::NotAdapted("the two-sided estimate concerns adapted processes".into()));
    }
    let grid = x.sampling_grid();
    let space = *x.codomain();
    let gamma_seed = rng::named_seed(seed, "two-sided-gamma");
    let pairs = rng::try_par_collect(samples, |s| -> Result<(f64, f64)> {
        let path = sample_path_stream(grid, x.dim(), seed, s);
        let values = x.values(&path)?;
        let i = left_point_sum(&values, &coarse_increments(x.grid(), &path)?);
        let g = gamma_norm_matrix(
            &gamma_matrix(x.grid(), &values),
            &space,
            GammaMode::Auto {
                samples: 2_000,
                seed: rng::child_seed(gamma_seed, s),
            },
        )?;
        Ok((space.norm(&i).powf(p), g.value.powf(p)))
    })?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (ratio, std_error) = jackknife_pair(&a, &b, |u, v| (u / v).powf(1.0 / p));
    let n = samples as f64;
    Ok(RatioEstimate {
        p,
        ratio,
        std_error,
        integral_norm: (a.iter().sum::<f64>() / n).powf(1.0 / p),
        gamma_norm: (b.iter().sum::<f64>() / n).powf(1.0 / p),
        samples,
        seed,
    })
}
