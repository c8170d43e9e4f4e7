use serde::{Deserialize, Serialize};

use super::projection::AdaptedProjectionProcess;
use super::representation::{clark_ocone, ConvergenceTable, Levels};
use crate::banach::BanachSpaceSpec;
use crate::cylindrical::{ConditionalSettings, CylindricalRV, CylindricalTerm, Expr};
use crate::error::{Error, Result};
use crate::integral::AdaptedIntegrand;
use crate::rng;
use crate::stats::{mean_and_se, normal_cdf};
use crate::time::{sample_path_stream, StepFunction, TimeGrid};

/// Driftless Black-Scholes market `S_t = S_0 exp(σ W_t − σ² t / 2)`, `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub s0: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl Market {
    pub fn new(s0: f64, sigma: f64, horizon: f64) -> Result<Self> {
        if !(s0 > 0.0 && sigma > 0.0 && horizon > 0.0) || !(s0 * sigma * horizon).is_finite() {
            return Err(Error::InvalidArgument("S0, sigma and T must be positive and finite".into()));
        }
        Ok(Market { s0, sigma, horizon })
    }

    /// `S_t` given `W_t`.
    pub fn spot(&self, t: f64, w: f64) -> f64 {
        self.s0 * (self.sigma * w - 0.5 * self.sigma * self.sigma * t).exp()
    }
}

/// A European payoff `g(S_T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Payoff {
    Forward,
    /// `(S_T − K)^+`, replaced by `ε softplus((s − K)/ε)` with `ε = smoothing · K`.
    Call { strike: f64, smoothing: Option<f64> },
    /// Any smooth expression in `v_0 = S_T`.
    Custom(Expr),
}

impl Payoff {
    /// `g` as an expression in `v_0 = s`.
    pub fn expr(&self) -> Result<Expr> {
        match self {
            Payoff::Forward => Ok(Expr::var(0)),
            Payoff::Call { strike, smoothing } => {
                let Some(width) = smoothing else {
                    return Err(Error::NonDifferentiable(
                        "the call payoff has a kink at the strike; give a smoothing width".into(),
                    ));
                };
                if !(*strike > 0.0 && *width > 0.0) {
                    return Err(Error::InvalidArgument("strike and smoothing width must be positive".into()));
                }
                let eps = width * strike;
                let u = Expr::constant(1.0 / eps) * (Expr::var(0) - Expr::constant(*strike));
                Ok(Expr::constant(eps) * u.softplus())
            }
            Payoff::Custom(e) => {
                if e.arity() > 1 {
                    return Err(Error::InvalidArgument("a payoff depends on S_T alone".into()));
                }
                Ok(e.clone())
            }
        }
    }

    /// Black-Scholes price and delta at spot `s` with `tau` to expiry, when known in closed form.
    pub fn oracle(&self, s: f64, sigma: f64, tau: f64) -> Option<(f64, f64)> {
        match self {
            Payoff::Forward => Some((s, 1.0)),
            Payoff::Call { strike, .. } => Some((
                black_scholes_call(s, *strike, sigma, tau),
                black_scholes_delta(s, *strike, sigma, tau),
            )),
            Payoff::Custom(_) => None,
        }
    }
}

fn d1(s: f64, k: f64, sigma: f64, tau: f64) -> f64 {
    ((s / k).ln() + 0.5 * sigma * sigma * tau) / (sigma * tau.sqrt())
}

/// Call price with zero rate.
pub fn black_scholes_call(s: f64, k: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return (s - k).max(0.0);
    }
    let a = d1(s, k, sigma, tau);
    s * normal_cdf(a) - k * normal_cdf(a - sigma * tau.sqrt())
}

/// `Φ(d_1)` with zero rate.
pub fn black_scholes_delta(s: f64, k: f64, sigma: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return if s > k { 1.0 } else { 0.0 };
    }
    normal_cdf(d1(s, k, sigma, tau))
}

/// Shares held on each grid interval: `H_t = Y_t / (σ S_t)` with `Y` the
/// Clark-Ocone integrand of `g(S_T)`.
#[derive(Debug, Clone)]
pub struct HedgingStrategy {
    pub market: Market,
    pub payoff: Payoff,
    /// `E g(S_T)`.
    pub price: f64,
    pub integrand: AdaptedProjectionProcess,
    terminal: CylindricalRV,
}

impl HedgingStrategy {
    pub fn grid(&self) -> &TimeGrid {
        self.integrand.grid()
    }

    /// `g(S_T)` as a cylindrical random variable of `W_T`.
    pub fn terminal(&self) -> &CylindricalRV {
        &self.terminal
    }

    /// Hedge ratios on every interval from flat increments on the sampling grid.
    pub fn ratios_flat(&self, increments: &[f64]) -> Vec<f64> {
        let sampling = self.integrand.sampling_grid();
        let y = self.integrand.values_flat(increments);
        let mut w = 0.0;
        let mut fine = 0;
        (0..self.grid().len())
            .map(|i| {
                let t = self.grid().start(i);
                while sampling.start(fine) < t - crate::time::GRID_TOL {
                    w += increments[fine];
                    fine += 1;
                }
                y[i][(0, 0)] / (self.market.sigma * self.market.spot(t, w))
            })
            .collect()
    }
}

/// The delta hedge of `payoff` in `market` on `grid`.
pub fn hedging_delta(payoff: &Payoff, market: &Market, grid: &TimeGrid, settings: &ConditionalSettings) -> Result<HedgingStrategy> {
    if (grid.horizon() - market.horizon).abs() > crate::time::GRID_TOL {
        return Err(Error::HorizonMismatch(grid.horizon(), market.horizon));
    }
    let g = payoff.expr()?;
    let Market { s0, sigma, horizon } = *market;
    let spot = Expr::constant(s0) * (Expr::constant(sigma) * Expr::var(0) - Expr::constant(0.5 * sigma * sigma * horizon)).exp();
    let f = g.substitute(&|_| spot.clone());
    let h = StepFunction::indicator(horizon, 0.0, horizon)?;
    let term = CylindricalTerm::new(f, vec![h], vec![1.0])?;
    let terminal = CylindricalRV::new(vec![term], BanachSpaceSpec::hilbert(1), true)?;
    let rep = clark_ocone(&terminal, grid, settings)?;
    Ok(HedgingStrategy {
        market: *market,
        payoff: payoff.clone(),
        price: rep.mean[0],
        integrand: rep.integrand,
        terminal,
    })
}

/// Mean hedge ratio at one grid time against the closed-form delta on the same paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeRow {
    pub t: f64,
    pub mean_ratio: f64,
    pub std_error: f64,
    pub oracle_delta: Option<f64>,
    pub abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    pub market: Market,
    pub payoff: Payoff,
    pub price: f64,
    pub oracle_price: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub rows: Vec<HedgeRow>,
}

impl HedgeReport {
    pub fn ratio_at_zero(&self) -> f64 {
        self.rows[0].mean_ratio
    }
}

/// Hedge ratios averaged over `samples` paths at every grid time.
pub fn hedge_report(strategy: &HedgingStrategy, samples: usize, seed: u64) -> Result<HedgeReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one path is required".into()));
    }
    let sampling = strategy.integrand.sampling_grid().clone();
    let grid = strategy.grid().clone();
    let m = strategy.market;
    let starts: Vec<usize> = (0..grid.len())
        .map(|i| sampling.find_point(grid.start(i)).expect("grid points lie on the sampling grid"))
        .collect();
    let per_path = rng::par_collect(samples, |s| {
        let path = sample_path_stream(&sampling, 1, seed, s);
        let h = strategy.ratios_flat(path.increments());
        let oracle: Vec<Option<f64>> = (0..grid.len())
            .map(|i| {
                let t = grid.start(i);
                let spot = m.spot(t, path.value_at_point(starts[i])[0]);
                strategy.payoff.oracle(spot, m.sigma, m.horizon - t).map(|o| o.1)
            })
            .collect();
        (h, oracle)
    });
    let rows = (0..grid.len())
        .map(|i| {
            let h: Vec<f64> = per_path.iter().map(|p| p.0[i]).collect();
            let (mean_ratio, std_error) = mean_and_se(&h);
            let oracle_delta = per_path
                .iter()
                .map(|p| p.1[i])
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            HedgeRow {
                t: grid.start(i),
                mean_ratio,
                std_error,
                oracle_delta,
                abs_diff: oracle_delta.map(|o| (o - mean_ratio).abs()),
            }
        })
        .collect();
    Ok(HedgeReport {
        market: m,
        payoff: strategy.payoff.clone(),
        price: strategy.price,
        oracle_price: strategy.payoff.oracle(m.s0, m.sigma, m.horizon).map(|o| o.0),
        samples,
        seed,
        rows,
    })
}

/// `E|g(S_T) − price − Σ_i H_{t_{i-1}} ΔS_i|` on each grid, with shared paths.
pub fn replication_study(
    payoff: &Payoff,
    market: &Market,
    grids: &[TimeGrid],
    samples: usize,
    settings: &ConditionalSettings,
    seed: u64,
) -> Result<ConvergenceTable> {
    let levels = Levels::new(grids)?;
    let strategy = hedging_delta(payoff, market, &levels.joint, settings)?;
    let sampling = strategy.integrand.sampling_grid().clone();
    let levels = levels.with_sampling(grids, &sampling)?;
    let compiled = strategy.terminal.compile(&sampling)?;
    let joint_points: Vec<usize> = levels
        .joint
        .points()
        .iter()
        .map(|&t| sampling.find_point(t).expect("joint points lie on the sampling grid"))
        .collect();
    let per_path = rng::par_collect(samples, |s| {
        let path = sample_path_stream(&sampling, 1, seed, s);
        let inc = path.increments();
        let payoff = compiled.evaluate(inc)[0];
        let h = strategy.ratios_flat(inc);
        let spot: Vec<f64> = joint_points
            .iter()
            .zip(levels.joint.points())
            .map(|(&j, &t)| market.spot(t, path.value_at_point(j)[0]))
            .collect();
        grids
            .iter()
            .enumerate()
            .map(|(l, g)| {
                let mut gain = 0.0;
                for i in 0..g.len() {
                    let a = levels.starts[l][i];
                    let b = levels.starts[l].get(i + 1).copied().unwrap_or(levels.joint.len());
                    gain += h[a] * (spot[b] - spot[a]);
                }
                (payoff - strategy.price - gain).abs()
            })
            .collect::<Vec<f64>>()
    });
    let per_level: Vec<Vec<f64>> = (0..grids.len())
        .map(|l| per_path.iter().map(|v| v[l]).collect())
        .collect();
    Ok(ConvergenceTable::from_samples(1.0, seed, grids, &per_level))
}
