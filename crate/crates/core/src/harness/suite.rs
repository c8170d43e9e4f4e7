//! The property suite: every invariant of the engine as a named, replayable check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generators::{Gen, Sizes};
use super::report::{CheckRecord, Replay, SuiteReport};
use crate::banach::{
    gamma_norm, spectral_norm, trace_pairing, BanachSpaceSpec, GammaMode, GammaOperator, OperatorFamily, PaleyWalsh,
};
use crate::chaos::{divergence_with, malliavin_derivative, ChaosExpansion, ChaosFamily, DivergenceRule, HChaos, MultiIndex};
use crate::clark_ocone::{clark_ocone_verify, expectation_preservation_check, martingale_identity_check, self_adjointness_check};
use crate::cylindrical::{ConditionalSettings, CylindricalRV, CylindricalTerm};
use crate::error::{Error, Result};
use crate::integral::{
    duality_check, forward_sum_gap, ito_integral_chaos, ito_isometry_check, random_rotation, skorokhod_equals_ito,
    AdaptedIntegrand, StepProcess, CHAOS_TOL,
};
use crate::rng;
use crate::stats::{estimate, CheckMode, Comparison};
use crate::time::{gram_matrix, orthonormalize, sample_path_stream, StepFunction, TimeGrid};

/// Instance counts and sizes of a suite run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Degree at most 2, grids of at most 4 intervals, small Monte Carlo budgets.
    Quick,
    /// Degree at most 4, grids of at most 8 intervals, `m <= 3`, 50 exact
    /// instances per check and `10^5` Monte Carlo paths.
    Full,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Quick => "quick",
            Profile::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            _ => Err(Error::config("profile", format!("expected quick or full, got {s:?}"))),
        }
    }

    fn sizes(self) -> Sizes {
        match self {
            Profile::Quick => Sizes {
                max_degree: 2,
                max_n: 4,
                max_m: 2,
                max_terms: 3,
            },
            Profile::Full => Sizes {
                max_degree: 4,
                max_n: 8,
                max_m: 3,
                max_terms: 4,
            },
        }
    }

    fn max_dim(self) -> usize {
        match self {
            Profile::Quick => 1,
            Profile::Full => 2,
        }
    }

    fn instances(self, kind: Kind) -> usize {
        match (self, kind) {
            (Profile::Quick, Kind::MonteCarlo) => 1,
            (Profile::Full, Kind::MonteCarlo) => 2,
            (Profile::Quick, _) => 5,
            (Profile::Full, _) => 50,
        }
    }

    fn samples(self) -> usize {
        match self {
            Profile::Quick => 2_000,
            Profile::Full => 100_000,
        }
    }
}

/// Deliberate bugs that the suite must detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Adds the trace correction `R(Df)` in the divergence instead of subtracting it.
    FlippedCorrection,
}

impl Mutation {
    pub fn name(self) -> &'static str {
        match self {
            Mutation::FlippedCorrection => "flipped-correction",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flipped-correction" => Ok(Mutation::FlippedCorrection),
            _ => Err(Error::config("mutation", format!("unknown mutation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// Exact chaos computation at tolerance `1e-10`.
    Chaos,
    /// Exact finite-dimensional computation at machine precision.
    Exact,
    /// Monte Carlo at three standard errors.
    MonteCarlo,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Chaos => "chaos",
            Kind::Exact => "exact",
            Kind::MonteCarlo => "monte-carlo",
        }
    }
}

/// Per-check context handed to every instance.
pub struct Ctx {
    pub profile: Profile,
    pub mutation: Option<Mutation>,
    pub seed: u64,
    pub samples: usize,
}

impl Ctx {
    fn rule(&self) -> DivergenceRule {
        match self.mutation {
            Some(Mutation::FlippedCorrection) => DivergenceRule::FlippedCorrection,
            None => DivergenceRule::Standard,
        }
    }

    fn dim(&self, g: &mut Gen) -> usize {
        g.int(1, self.profile.max_dim())
    }

    fn mc_seed(&self, instance: u64) -> u64 {
        rng::child_seed(self.seed, instance)
    }
}

type Instance = fn(&mut Gen, &Ctx, u64) -> Result<Comparison>;

/// A named identity.
pub struct Check {
    pub name: &'static str,
    pub anchor: &'static str,
    pub kind: Kind,
    run: Instance,
}

/// Builds a comparison from a coefficient discrepancy, reporting the sizes of both sides.
fn coeff_cmp(lhs: f64, rhs: f64, diff: f64) -> Comparison {
    Comparison {
        lhs,
        rhs,
        diff,
        tolerance: CHAOS_TOL,
        pass: diff <= CHAOS_TOL,
        samples: 0,
    }
}

/// The worst component of two vectors.
fn vec_cmp(lhs: &[f64], rhs: &[f64], tol: f64) -> Comparison {
    let mut worst = Comparison::exact(0.0, 0.0, tol);
    for (a, b) in lhs.iter().zip(rhs) {
        let c = Comparison::exact(*a, *b, tol);
        if c.diff >= worst.diff {
            worst = c;
        }
    }
    worst
}

/// `lhs <= rhs + tol`.
fn at_most(lhs: f64, rhs: f64, tol: f64) -> Comparison {
    Comparison {
        lhs,
        rhs,
        diff: (lhs - rhs).max(0.0),
        tolerance: tol,
        pass: lhs <= rhs + tol,
        samples: 0,
    }
}

fn hnorm(x: &HChaos) -> f64 {
    x.l2_norm_sq().sqrt()
}

fn cnorm(x: &ChaosExpansion) -> f64 {
    x.l2_norm_sq().sqrt()
}

/// A random element of the span of the family.
fn span_element(g: &mut Gen, family: &ChaosFamily) -> Result<StepFunction> {
    let mut h = family.function(0).scale(g.normal());
    for j in 1..family.len() {
        h = h.axpy(g.normal(), family.function(j))?;
    }
    Ok(h)
}

fn family_grid(family: &ChaosFamily) -> TimeGrid {
    family.function(0).grid().clone()
}

// ---- derivative and divergence in the chaos algebra ----

fn ibp(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let cod = g.space();
    let f = g.chaos(&fam, cod)?;
    let h = span_element(g, &fam)?;
    let lhs = malliavin_derivative(&f).apply(&h)?.expectation();
    let rhs = ChaosExpansion::wiener(fam, &h)?.multiply(&f)?.expectation();
    Ok(vec_cmp(&lhs, &rhs, CHAOS_TOL))
}

fn product_rule_pairing(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let space = g.space();
    let f = g.chaos(&fam, space)?;
    let gg = g.chaos(&fam, space)?;
    let lhs = malliavin_derivative(&f.dot(&gg)?);
    let rhs = malliavin_derivative(&f)
        .pair_with(&gg)?
        .add(&malliavin_derivative(&gg).pair_with(&f)?)?;
    Ok(coeff_cmp(hnorm(&lhs), hnorm(&rhs), lhs.max_abs_diff(&rhs)?))
}

fn product_rule_scalar(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let f = g.chaos(&fam, BanachSpaceSpec::hilbert(1))?;
    let cod = g.space();
    let gg = g.chaos(&fam, cod)?;
    let lhs = malliavin_derivative(&f.multiply(&gg)?);
    let rhs = malliavin_derivative(&gg)
        .scalar_multiply(&f)?
        .add(&malliavin_derivative(&f).outer(&gg)?)?;
    Ok(coeff_cmp(hnorm(&lhs), hnorm(&rhs), lhs.max_abs_diff(&rhs)?))
}

fn pairing_by_parts(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let space = g.space();
    let f = g.chaos(&fam, space)?;
    let gg = g.chaos(&fam, space)?;
    let h = span_element(g, &fam)?;
    let lhs = malliavin_derivative(&f).apply(&h)?.l2_pairing(&gg)?;
    let w = ChaosExpansion::wiener(fam, &h)?;
    let rhs = w.multiply(&f.dot(&gg)?)?.expectation()[0] - f.l2_pairing(&malliavin_derivative(&gg).apply(&h)?)?;
    Ok(Comparison::exact(lhs, rhs, CHAOS_TOL))
}

fn duality(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let space = g.space();
    let x = g.h_chaos(&fam, space)?;
    let gg = g.chaos(&fam, space)?;
    let lhs = x.pairing(&malliavin_derivative(&gg))?;
    let rhs = divergence_with(&x, ctx.rule(), None)?.l2_pairing(&gg)?;
    Ok(Comparison::exact(lhs, rhs, CHAOS_TOL))
}

fn formula_vs_duality(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let space = g.space();
    let x = g.h_chaos(&fam, space)?;
    let delta = divergence_with(&x, ctx.rule(), None)?;
    let mut candidates: Vec<MultiIndex> = Vec::new();
    for (beta, _) in x.terms() {
        for j in 0..fam.len() {
            for k in [-1, 1] {
                if let Some(a) = beta.shifted(j, k) {
                    candidates.push(a);
                }
            }
        }
    }
    candidates.sort();
    candidates.dedup();
    let mut diff: f64 = 0.0;
    for alpha in &candidates {
        for r in 0..space.m {
            let mut e = vec![0.0; space.m];
            e[r] = 1.0;
            let probe = ChaosExpansion::from_terms(fam.clone(), space, [(alpha.clone(), e)])?;
            let by_duality = x.pairing(&malliavin_derivative(&probe))? / alpha.factorial();
            let by_formula = delta.coefficient(alpha).map_or(0.0, |c| c[r]);
            diff = diff.max((by_duality - by_formula).abs());
        }
    }
    Ok(coeff_cmp(cnorm(&delta), hnorm(&x), diff))
}

fn number_operator(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let n = g.int(1, g.sizes.max_degree as usize) as u32;
    let cod = g.space();
    let f = g.pure_chaos(&fam, cod, n)?;
    let lhs = divergence_with(&malliavin_derivative(&f), ctx.rule(), None)?;
    let rhs = f.scale(n as f64);
    Ok(coeff_cmp(cnorm(&lhs), cnorm(&rhs), lhs.max_abs_diff(&rhs)?))
}

fn basis_independence(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let cod = g.space();
    let x = g.h_chaos(&fam, cod)?;
    let u = random_rotation(fam.len(), ctx.mc_seed(instance));
    let a = divergence_with(&x, ctx.rule(), None)?;
    let b = divergence_with(&x, ctx.rule(), Some(&u))?;
    Ok(coeff_cmp(cnorm(&a), cnorm(&b), a.max_abs_diff(&b)?))
}

fn grid_time(g: &mut Gen, grid: &TimeGrid) -> f64 {
    grid.points()[g.int(0, grid.len())]
}

fn conditional_contraction(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let cod = g.space();
    let f = g.chaos(&fam, cod)?;
    let t = grid_time(g, &family_grid(&fam));
    Ok(at_most(f.conditional_expectation(t)?.l2_norm_sq(), f.l2_norm_sq(), CHAOS_TOL))
}

fn conditional_mean(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let cod = g.space();
    let f = g.chaos(&fam, cod)?;
    let t = grid_time(g, &family_grid(&fam));
    Ok(vec_cmp(&f.conditional_expectation(t)?.expectation(), &f.expectation(), CHAOS_TOL))
}

fn tower(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let cod = g.space();
    let f = g.chaos(&fam, cod)?;
    let grid = family_grid(&fam);
    let s = grid_time(g, &grid);
    let t = grid_time(g, &grid);
    let a = f.conditional_expectation(s)?.conditional_expectation(t)?;
    let b = f.conditional_expectation(s.min(t))?;
    Ok(coeff_cmp(cnorm(&a), cnorm(&b), a.max_abs_diff(&b)?))
}

// ---- stochastic integrals ----

fn ito_isometry_chaos(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let space = g.space();
    let x = g.adapted_process(&grid, d, space)?;
    let y = g.adapted_process(&grid, d, space.dual())?;
    duality_check(&x, &y, CheckMode::Chaos)
}

fn skorokhod_is_ito(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let cod = g.space();
    let x = g.adapted_process(&grid, d, cod)?;
    let r = skorokhod_equals_ito(&x)?;
    Ok(Comparison::exact(r.max_coefficient_discrepancy, 0.0, r.tolerance))
}

fn trace_correction(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let cod = g.space();
    let x = g.anticipating_process(&grid, d, cod)?;
    let r = forward_sum_gap(&x)?;
    Ok(Comparison::exact(r.max_coefficient_discrepancy, 0.0, r.tolerance))
}

fn ito_mean_zero(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let space = g.space();
    let x = g.adapted_process(&grid, d, space)?;
    let e = ito_integral_chaos(&x)?.expectation();
    Ok(vec_cmp(&e, &vec![0.0; space.m], CHAOS_TOL))
}

fn ito_linearity(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let space = g.space();
    let x = g.adapted_process(&grid, d, space)?;
    let y = g.adapted_process(&grid, d, space)?;
    let (a, b) = (g.normal(), g.normal());
    let z = x.linear_combination(a, b, &y)?;
    let sampling = z.sampling_grid().union(x.sampling_grid())?.union(y.sampling_grid())?;
    let path = sample_path_stream(&sampling, d, ctx.mc_seed(instance), 0);
    let lhs = z.ito_integral_path(&path)?;
    let ix = x.ito_integral_path(&path)?;
    let iy = y.ito_integral_path(&path)?;
    let rhs: Vec<f64> = ix.iter().zip(&iy).map(|(u, v)| a * u + b * v).collect();
    let scale = 1.0 + lhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(vec_cmp(&lhs, &rhs, CHAOS_TOL * scale))
}

// ---- adapted projection ----

fn projection_idempotent(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let cod = g.space();
    let x = g.h_chaos(&fam, cod)?;
    let p = x.adapted_projection()?;
    let pp = p.adapted_projection()?;
    Ok(coeff_cmp(hnorm(&pp), hnorm(&p), pp.max_abs_diff(&p)?))
}

fn projection_fixes_adapted(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let cod = g.space();
    let x = g.adapted_process(&grid, d, cod)?.to_h_chaos()?;
    let p = x.adapted_projection()?;
    Ok(coeff_cmp(hnorm(&p), hnorm(&x), p.max_abs_diff(&x)?))
}

fn projection_self_adjoint(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let space = g.space();
    let x = g.adapted_process(&grid, d, space)?;
    let y = g.anticipating_process(&grid, d, space.dual())?;
    self_adjointness_check(&x, &y, CheckMode::Chaos, &ConditionalSettings::default())
}

fn projection_mean(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let fam = {
        let d = ctx.dim(g);
        g.family(d)
    };
    let cod = g.space();
    let x = g.h_chaos(&fam, cod)?;
    let a = x.adapted_projection()?.expectation();
    let b = x.expectation();
    Ok(vec_cmp(a.as_slice(), b.as_slice(), CHAOS_TOL))
}

// ---- Clark-Ocone ----

fn martingale_identity(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let d = ctx.dim(g);
    let cod = g.space();
    let f = g.quadratic_rv(d, cod)?;
    let grid = g.grid();
    let r = martingale_identity_check(&f, &grid, 5, ctx.mc_seed(instance))?;
    Ok(Comparison::exact(r.max_discrepancy, 0.0, r.tolerance))
}

fn first_chaos_exact(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let space = g.space();
    let h = g.step_function(&grid, d);
    let f = CylindricalRV::wiener(&h, &g.normals(space.m), space)?;
    let row = clark_ocone_verify(&f, &grid, 2.0, 100, &ConditionalSettings::quadrature(4), ctx.mc_seed(instance))?;
    Ok(Comparison::exact(row.err, 0.0, 1e-12))
}

// ---- smooth random variables ----

fn derivative_commutes_with_chaos(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let cod = g.space();
    let f = g.any_rv(&grid, d, cod)?;
    let fam = f.natural_family()?;
    let a = malliavin_derivative(&f.to_chaos_on(fam.clone())?);
    let b = f.malliavin_derivative().to_chaos_on(fam)?;
    Ok(coeff_cmp(hnorm(&a), hnorm(&b), a.max_abs_diff(&b)?))
}

fn product_rule_pathwise(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let space = g.space();
    let k = g.int(1, 2);
    let dirs: Vec<StepFunction> = (0..k).map(|_| g.step_function(&grid, d)).collect();
    let f = CylindricalRV::scalar(g.bounded(k), dirs)?;
    let gg = g.any_rv(&grid, d, space)?;
    let h = g.step_function(&grid, d);
    let fg = f.multiply(&gg)?;
    let path = sample_path_stream(&grid, d, ctx.mc_seed(instance), 0);
    let lhs = fg.malliavin_derivative().apply(&h, &path)?;
    let fv = f.evaluate(&path)?[0];
    let dfh = f.malliavin_derivative().apply(&h, &path)?[0];
    let dg = gg.malliavin_derivative().apply(&h, &path)?;
    let gv = gg.evaluate(&path)?;
    let rhs: Vec<f64> = dg.iter().zip(&gv).map(|(a, b)| fv * a + dfh * b).collect();
    let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(vec_cmp(&lhs, &rhs, CHAOS_TOL * scale))
}

// ---- time grids ----

fn refinement_neutrality(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let d = ctx.dim(g);
    let a = g.grid();
    let b = g.grid();
    let f = g.step_function(&a, d);
    let h = g.step_function(&b, d);
    let fine = a.union(&b)?.union(&TimeGrid::uniform(1.0, 7)?)?;
    let lhs = f.inner(&h)?;
    let rhs = f.refine(&fine)?.inner(&h.refine(&fine)?)?;
    let path = sample_path_stream(&fine, d, ctx.mc_seed(instance), 0);
    let w1 = path.evaluate_w(&f)?;
    let w2 = path.evaluate_w(&f.refine(&fine)?)?;
    let c = Comparison::exact(lhs, rhs, 1e-12 * (1.0 + lhs.abs()));
    let cw = Comparison::exact(w1, w2, 1e-12 * (1.0 + w1.abs()));
    Ok(if c.pass { cw } else { c })
}

fn restriction_composes(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let d = ctx.dim(g);
    let grid = g.grid();
    let f = g.step_function(&grid, d);
    let s = g.rng_unit();
    let t = g.rng_unit();
    let a = f.restrict_before(s)?.restrict_before(t)?;
    let b = f.restrict_before(s.min(t))?;
    let (a, b) = a.on_common_grid(&b)?;
    Ok(vec_cmp(a.values(), b.values(), 0.0))
}

fn orthonormal_gram(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let d = ctx.dim(g);
    let grid = g.grid();
    let basis = orthonormalize(&grid, d)?;
    let gram = gram_matrix(&basis)?;
    let diff = (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).amax();
    Ok(Comparison::exact(diff, 0.0, 1e-12))
}

// ---- gamma-radonifying norms ----

fn basis_for(g: &mut Gen, d: usize) -> Result<Vec<StepFunction>> {
    let grid = g.grid();
    orthonormalize(&grid, d)
}

fn gamma_homogeneity(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let basis = {
        let d = ctx.dim(g);
        basis_for(g, d)?
    };
    let cod = g.space();
    let r = g.gamma_operator(&basis, cod)?;
    let c = g.normal();
    let lhs = gamma_norm(&r.scale(c), GammaMode::Exact)?.value;
    let rhs = c.abs() * gamma_norm(&r, GammaMode::Exact)?.value;
    Ok(Comparison::exact(lhs, rhs, 1e-12 * (1.0 + rhs)))
}

fn trace_invariance(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let basis = {
        let d = ctx.dim(g);
        basis_for(g, d)?
    };
    let space = g.space();
    let r = g.gamma_operator(&basis, space)?;
    let s = g.gamma_operator(&basis, space.dual())?;
    let u = random_rotation(basis.len(), ctx.mc_seed(instance));
    let rotated: Vec<StepFunction> = (0..basis.len())
        .map(|k| {
            let mut h = basis[0].scale(u[(k, 0)]);
            for (j, b) in basis.iter().enumerate().skip(1) {
                h = h.axpy(u[(k, j)], b)?;
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;
    let r2 = GammaOperator::from_matrix(rotated.clone(), r.matrix() * u.transpose(), space)?;
    let s2 = GammaOperator::from_matrix(rotated, s.matrix() * u.transpose(), space.dual())?;
    let lhs = trace_pairing(&s, &r)?;
    let rhs = trace_pairing(&s2, &r2)?;
    Ok(Comparison::exact(lhs, rhs, 1e-12 * (1.0 + lhs.abs())))
}

fn trace_duality(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let basis = {
        let d = ctx.dim(g);
        basis_for(g, d)?
    };
    let space = g.space();
    let r = g.gamma_operator(&basis, space)?;
    let s = g.gamma_operator(&basis, space.dual())?;
    let lhs = trace_pairing(&s, &r)?.abs();
    let rhs = gamma_norm(&r, GammaMode::Exact)?.value * gamma_norm(&s, GammaMode::Exact)?.value;
    Ok(at_most(lhs, rhs, 1e-12 * (1.0 + rhs)))
}

fn ideal_property(g: &mut Gen, ctx: &Ctx, _: u64) -> Result<Comparison> {
    let basis = {
        let d = ctx.dim(g);
        basis_for(g, d)?
    };
    let space = g.space();
    let target = g.space();
    let r = g.gamma_operator(&basis, space)?;
    let t = g.matrix(target.m, space.m);
    let lhs = gamma_norm(&r.compose(&t, target)?, GammaMode::Exact)?.value;
    let rhs = spectral_norm(&t) * gamma_norm(&r, GammaMode::Exact)?.value;
    Ok(at_most(lhs, rhs, 1e-12 * (1.0 + rhs)))
}

fn umd_identity(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let m = g.int(1, g.sizes.max_m);
    let depth = g.int(1, 6);
    let w = PaleyWalsh::random(m, depth, ctx.seed, instance);
    let p = 1.0 + 3.0 * g.rng_unit();
    let space = BanachSpaceSpec::lp(m, p)?;
    let ratio = w.transform_ratio(&vec![1.0; depth], &space, p);
    Ok(Comparison::exact(ratio, 1.0, 0.0))
}

// ---- Monte Carlo ----

fn wiener_isometry_mc(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let d = ctx.dim(g);
    let grid = g.grid();
    let f = g.step_function(&grid, d);
    let h = g.step_function(&grid, d);
    let seed = ctx.mc_seed(instance);
    let v = rng::try_par_collect(ctx.samples, |s| -> Result<f64> {
        let path = sample_path_stream(&grid, d, seed, s);
        Ok(path.evaluate_w(&f)? * path.evaluate_w(&h)?)
    })?;
    Ok(Comparison::against(&estimate(&v, seed), f.inner(&h)?))
}

fn ito_isometry_mc(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let cod = g.space();
    let x = g.adapted_process(&grid, d, cod)?;
    ito_isometry_check(&x, ctx.samples, ctx.mc_seed(instance))
}

fn duality_mc(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let space = g.space();
    let x = g.adapted_process(&grid, d, space)?;
    let y = g.adapted_process(&grid, d, space.dual())?;
    duality_check(&x, &y, CheckMode::MonteCarlo {
        samples: ctx.samples,
        seed: ctx.mc_seed(instance),
    })
}

fn ibp_bounded_mc(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let grid = g.grid();
    let d = ctx.dim(g);
    let k = g.int(1, 2);
    let dirs: Vec<StepFunction> = (0..k).map(|_| g.step_function(&grid, d)).collect();
    let f = CylindricalRV::scalar(g.bounded(k), dirs)?;
    let h = g.step_function(&grid, d);
    let df = f.malliavin_derivative();
    let seed = ctx.mc_seed(instance);
    let pairs = rng::try_par_collect(ctx.samples, |s| -> Result<(f64, f64)> {
        let path = sample_path_stream(&grid, d, seed, s);
        Ok((df.apply(&h, &path)?[0], path.evaluate_w(&h)? * f.evaluate(&path)?[0]))
    })?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(Comparison::paired(&a, &b))
}

fn projection_mean_mc(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let grid = TimeGrid::uniform(1.0, g.int(1, g.sizes.max_n.min(4)))?;
    let k = g.int(1, 2);
    let coeffs = (0..grid.len())
        .map(|_| {
            let dirs: Vec<StepFunction> = (0..k).map(|_| g.step_function(&grid, 1)).collect();
            let term = CylindricalTerm::new(g.bounded(k), dirs, vec![1.0])?;
            Ok(vec![CylindricalRV::new(vec![term], BanachSpaceSpec::hilbert(1), false)?])
        })
        .collect::<Result<_>>()?;
    let y = StepProcess::anticipating(grid, 1, BanachSpaceSpec::hilbert(1), coeffs)?;
    let cs = expectation_preservation_check(&y, &ConditionalSettings::quadrature(10), ctx.samples, ctx.mc_seed(instance))?;
    let worst = cs
        .iter()
        .copied()
        .max_by(|a, b| (a.diff / a.tolerance).total_cmp(&(b.diff / b.tolerance)))
        .ok_or_else(|| Error::InvalidArgument("empty process".into()))?;
    Ok(worst)
}

fn gamma_exact_vs_mc(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let basis = {
        let d = ctx.dim(g);
        basis_for(g, d)?
    };
    let cod = g.space();
    let r = g.gamma_operator(&basis, cod)?;
    let exact = gamma_norm(&r, GammaMode::Exact)?.value;
    let mc = gamma_norm(
        &r,
        GammaMode::MonteCarlo {
            samples: ctx.samples,
            seed: ctx.mc_seed(instance),
        },
    )?;
    Ok(Comparison::against(&mc, exact))
}

fn lift_inequality(g: &mut Gen, ctx: &Ctx, instance: u64) -> Result<Comparison> {
    let m = g.int(1, g.sizes.max_m);
    let space = BanachSpaceSpec::hilbert(m);
    let members = (0..g.int(1, 3)).map(|_| g.matrix(m, m)).collect();
    let family = OperatorFamily::on(space, members)?;
    let basis = basis_for(g, 1)?;
    let rs = (0..g.int(1, 3))
        .map(|_| g.gamma_operator(&basis, space))
        .collect::<Result<Vec<_>>>()?;
    let r = crate::banach::lift_check(&family, &rs, ctx.mc_seed(instance))?;
    Ok(Comparison {
        lhs: r.lhs,
        rhs: r.rhs,
        diff: (r.lhs - r.rhs).max(0.0),
        tolerance: r.slack,
        pass: r.holds,
        samples: 0,
    })
}

impl Gen {
    fn rng_unit(&mut self) -> f64 {
        use rand::Rng;
        self.rng.random::<f64>()
    }
}

macro_rules! check {
    ($name:literal, $anchor:literal, $kind:ident, $f:ident) => {
        Check {
            name: $name,
            anchor: $anchor,
            kind: Kind::$kind,
            run: $f,
        }
    };
}

/// Every check of the suite in execution order.
pub fn checks() -> Vec<Check> {
    vec![
        check!("time.refinement-neutrality", "step functions: inner products under refinement", Exact, refinement_neutrality),
        check!("time.restriction-composes", "step functions: restriction to [0, t]", Exact, restriction_composes),
        check!("time.orthonormal-gram", "step functions: canonical orthonormal basis", Exact, orthonormal_gram),
        check!("time.wiener-isometry-mc", "isonormal process: E W(f) W(g) = <f, g>", MonteCarlo, wiener_isometry_mc),
        check!("gamma.homogeneity", "gamma norm: homogeneity", Exact, gamma_homogeneity),
        check!("gamma.trace-basis-invariance", "trace duality: change of orthonormal basis", Exact, trace_invariance),
        check!("gamma.trace-duality", "trace duality: |tr(S*R)| <= |R|_gamma |S|_gamma", Exact, trace_duality),
        check!("gamma.ideal-property", "gamma norm: ideal property", Exact, ideal_property),
        check!("gamma.umd-identity-signs", "UMD: trivial sign transform", Exact, umd_identity),
        check!("gamma.exact-vs-mc", "gamma norm: Hilbert closed form against sampling", MonteCarlo, gamma_exact_vs_mc),
        check!("gamma.lift-inequality", "gamma-bounded families: lifting to L2(0,T;H)", MonteCarlo, lift_inequality),
        check!("derivative.integration-by-parts", "derivative: E(DF(h)) = E(W(h) F)", Chaos, ibp),
        check!("derivative.product-rule-pairing", "derivative: D<F, G> = <DF, G> + <F, DG>", Chaos, product_rule_pairing),
        check!("derivative.product-rule-scalar", "derivative: D(fG) = f DG + Df (x) G", Chaos, product_rule_scalar),
        check!("derivative.pairing-by-parts", "derivative: E<DF(h), G> = E(W(h)<F, G>) - E<F, DG(h)>", Chaos, pairing_by_parts),
        check!("derivative.integration-by-parts-mc", "derivative: integration by parts for bounded functions", MonteCarlo, ibp_bounded_mc),
        check!("derivative.commutes-with-chaos", "derivative: smooth variables against the chaos expansion", Chaos, derivative_commutes_with_chaos),
        check!("derivative.product-rule-pathwise", "derivative: product rule along paths", Exact, product_rule_pathwise),
        check!("divergence.duality", "divergence: E<X, DG> = E<delta X, G>", Chaos, duality),
        check!("divergence.formula-vs-duality", "divergence: explicit formula against duality", Chaos, formula_vs_duality),
        check!("divergence.number-operator", "divergence: delta D = n on the n-th chaos", Chaos, number_operator),
        check!("divergence.basis-independence", "divergence: independence of the orthonormal basis", Chaos, basis_independence),
        check!("conditional.contraction", "conditional expectation: L2 contraction", Chaos, conditional_contraction),
        check!("conditional.mean", "conditional expectation: preserves the mean", Chaos, conditional_mean),
        check!("conditional.tower", "conditional expectation: tower property", Chaos, tower),
        check!("integral.ito-isometry-chaos", "Ito integral: E<I(X), I(Y)> = E<X, Y>", Chaos, ito_isometry_chaos),
        check!("integral.ito-isometry-mc", "Ito integral: isometry in a Hilbert space", MonteCarlo, ito_isometry_mc),
        check!("integral.duality-mc", "Ito integral: duality by sampling", MonteCarlo, duality_mc),
        check!("integral.skorokhod-equals-ito", "Skorokhod integral: extends the Ito integral", Chaos, skorokhod_is_ito),
        check!("integral.trace-correction", "Skorokhod integral: forward sum minus trace correction", Chaos, trace_correction),
        check!("integral.mean-zero", "Ito integral: zero mean", Chaos, ito_mean_zero),
        check!("integral.linearity", "Ito integral: linearity along paths", Exact, ito_linearity),
        check!("projection.idempotent", "adapted projection: idempotent", Chaos, projection_idempotent),
        check!("projection.fixes-adapted", "adapted projection: fixes adapted processes", Chaos, projection_fixes_adapted),
        check!("projection.self-adjoint", "adapted projection: self-adjoint", Chaos, projection_self_adjoint),
        check!("projection.mean", "adapted projection: preserves expectation", Chaos, projection_mean),
        check!("projection.mean-mc", "adapted projection: quadrature preserves expectation", MonteCarlo, projection_mean_mc),
        check!("clark-ocone.martingale-identity", "Clark-Ocone: E(F|F_t) - E F as an Ito integral", Chaos, martingale_identity),
        check!("clark-ocone.first-chaos-exact", "Clark-Ocone: exact on the first chaos", Exact, first_chaos_exact),
    ]
}

fn run_one(check: &Check, seed: u64, profile: Profile, mutation: Option<Mutation>) -> CheckRecord {
    let replay = Replay {
        check: check.name.into(),
        seed,
        profile: profile.name().into(),
        mutation: mutation.map(|m| m.name().into()),
    };
    let ctx = Ctx {
        profile,
        mutation,
        seed,
        samples: profile.samples(),
    };
    let n = profile.instances(check.kind);
    let sizes = profile.sizes();
    let result: Result<Vec<Comparison>> = (0..n as u64)
        .map(|i| {
            let mut g = Gen::new(seed, i, sizes);
            (check.run)(&mut g, &ctx, i)
        })
        .collect();
    match result {
        Ok(cs) => CheckRecord::from_comparisons(check.name, check.anchor, check.kind.name(), replay, &cs),
        Err(e) => CheckRecord::failed_with(check.name, check.anchor, check.kind.name(), replay, e.to_string()),
    }
}

/// Runs every check whose name passes `filter`.
pub fn run_property_suite_filtered(
    seed: u64,
    profile: Profile,
    mutation: Option<Mutation>,
    filter: &dyn Fn(&Check) -> bool,
) -> SuiteReport {
    let records = checks()
        .iter()
        .filter(|c| filter(c))
        .map(|c| run_one(c, rng::named_seed(seed, c.name), profile, mutation))
        .collect();
    let suite = match mutation {
        Some(m) => format!("property-suite+{}", m.name()),
        None => "property-suite".into(),
    };
    SuiteReport::new(&suite, seed, profile.name(), records)
}

/// Runs every check of the suite.
pub fn run_property_suite(seed: u64, profile: Profile, mutation: Option<Mutation>) -> SuiteReport {
    run_property_suite_filtered(seed, profile, mutation, &|_| true)
}

/// Re-runs a single check from its recorded inputs.
pub fn replay(r: &Replay) -> Result<CheckRecord> {
    let all = checks();
    let check = all
        .iter()
        .find(|c| c.name == r.check)
        .ok_or_else(|| Error::config("replay.check", format!("unknown check {:?}", r.check)))?;
    let profile = Profile::parse(&r.profile)?;
    let mutation = r.mutation.as_deref().map(Mutation::parse).transpose()?;
    Ok(run_one(check, r.seed, profile, mutation))
}
