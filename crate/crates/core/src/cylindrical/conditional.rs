//! `E(F | F_t)` for cylindrical random variables by Gaussian splitting.
//!
//! Each direction splits as `h = h 1_{[0,t]} + h 1_{(t,T]}`. The past parts
//! are read off the path; the future parts form a centered Gaussian vector
//! independent of `F_t` with Gram covariance `Σ(t) = L Lᵀ`, so
//! `E(f(W(h)) | F_t) = E f(a + L z)` with `z` standard normal.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dual::Dual;
use super::expr::SmoothFunction;
use super::rv::CylindricalRV;
use crate::banach::spectral_factor;
use crate::error::{Error, Result};
use crate::quadrature::{for_each_tensor_node, DEFAULT_ORDER};
use crate::rng;
use crate::time::{gram_matrix, BrownianPath, StepFunction};

/// Largest future rank handled by tensor quadrature.
pub const FUTURE_DIM_CAP: usize = 4;

/// Inner sample count of the Monte Carlo fallback.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McFallback {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSettings {
    pub order: usize,
    /// Used when the future rank exceeds [`FUTURE_DIM_CAP`]; `None` makes that an error.
    pub mc_fallback: Option<McFallback>,
}

impl Default for ConditionalSettings {
    fn default() -> Self {
        ConditionalSettings {
            order: DEFAULT_ORDER,
            mc_fallback: Some(McFallback {
                samples: DEFAULT_MC_SAMPLES,
                seed: 0,
            }),
        }
    }
}

impl ConditionalSettings {
    pub fn quadrature(order: usize) -> Self {
        ConditionalSettings {
            order,
            mc_fallback: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Method {
    /// Every term is already measurable.
    Measurable,
    Quadrature { order: usize, max_dim: usize },
    MonteCarlo { samples: usize },
}

/// A conditional expectation at one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditional {
    pub value: Vec<f64>,
    /// Zero unless the Monte Carlo fallback was used.
    pub std_error: f64,
    pub method: Method,
}

#[derive(Debug, Clone)]
enum Rule {
    /// Weighted shift vectors `L z` (row-major, one row per node).
    Nodes { shifts: Vec<f64>, weights: Vec<f64>, order: usize, rank: usize },
    Sampled { shifts: Vec<f64>, samples: usize },
}

#[derive(Debug, Clone)]
struct TermPlan {
    f: Arc<SmoothFunction>,
    x: Vec<f64>,
    past: Vec<StepFunction>,
    rule: Rule,
}

/// Precomputed Gaussian split of a variable at a fixed time.
#[derive(Debug, Clone)]
pub struct ConditionalPlan {
    t: f64,
    m: usize,
    terms: Vec<TermPlan>,
}

fn build_rule(future: &[StepFunction], settings: &ConditionalSettings, label: u64) -> Result<Rule> {
    let n = future.len();
    let l = if n == 0 {
        DMatrix::zeros(0, 0)
    } else {
        spectral_factor(&gram_matrix(future)?)
    };
    let r = l.ncols();
    let shift = |z: &[f64], out: &mut Vec<f64>| {
        for i in 0..n {
            out.push((0..r).map(|k| l[(i, k)] * z[k]).sum());
        }
    };
    if r <= FUTURE_DIM_CAP {
        if settings.order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be at least 1".into()));
        }
        let mut shifts = Vec::new();
        let mut weights = Vec::new();
        for_each_tensor_node(r, settings.order, |z, w| {
            shift(z, &mut shifts);
            weights.push(w);
        })?;
        return Ok(Rule::Nodes {
            shifts,
            weights,
            order: settings.order,
            rank: r,
        });
    }
    let Some(mc) = settings.mc_fallback else {
        return Err(Error::QuadratureCap {
            dim: r,
            cap: FUTURE_DIM_CAP,
        });
    };
    let mut g = rng::stream(mc.seed, label);
    let mut z = vec![0.0; r];
    let mut shifts = Vec::with_capacity(mc.samples * n);
    for _ in 0..mc.samples {
        rng::fill_standard_normal(&mut g, &mut z);
        shift(&z, &mut shifts);
    }
    Ok(Rule::Sampled {
        shifts,
        samples: mc.samples,
    })
}

impl ConditionalPlan {
    pub fn new(rv: &CylindricalRV, t: f64, settings: &ConditionalSettings) -> Result<Self> {
        if let Some(h) = rv.horizon() {
            if !(0.0..=h).contains(&t) {
                return Err(Error::TimeOutOfRange { t, horizon: h });
            }
        }
        let mut terms = Vec::with_capacity(rv.terms().len());
        for (idx, term) in rv.terms().iter().enumerate() {
            let mut past = Vec::new();
            let mut future = Vec::new();
            for h in term.directions() {
                past.push(h.restrict_before(t)?);
                future.push(h.restrict_after(t)?);
            }
            let rule = build_rule(&future, settings, idx as u64)?;
            terms.push(TermPlan {
                f: Arc::new(term.function().clone()),
                x: term.coefficient().to_vec(),
                past,
                rule,
            });
        }
        Ok(ConditionalPlan {
            t,
            m: rv.codomain().m,
            terms,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Number of terms of the underlying variable.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Past parts `h_k 1_{[0,t]}` of the directions of term `i`.
    pub fn past_directions(&self, i: usize) -> &[StepFunction] {
        &self.terms[i].past
    }

    /// `a_k = W(h_k 1_{[0,t]})` for every term.
    pub fn past_values(&self, path: &BrownianPath) -> Result<Vec<Vec<f64>>> {
        self.terms
            .iter()
            .map(|t| t.past.iter().map(|h| path.evaluate_w(h)).collect())
            .collect()
    }

    fn method(&self) -> Method {
        let mut max_dim = 0;
        let mut order = 0;
        for t in &self.terms {
            match t.rule {
                Rule::Sampled { samples, .. } => return Method::MonteCarlo { samples },
                Rule::Nodes { order: o, rank, .. } => {
                    max_dim = max_dim.max(rank);
                    order = o;
                }
            }
        }
        if max_dim == 0 {
            Method::Measurable
        } else {
            Method::Quadrature { order, max_dim }
        }
    }

    /// `E(F | F_t)` given the past values of every term.
    pub fn expectation_from(&self, past: &[Vec<f64>]) -> Conditional {
        let mut value = vec![0.0; self.m];
        let mut var = 0.0;
        let mut y = Vec::new();
        for (t, a) in self.terms.iter().zip(past) {
            let n = a.len();
            let (mean, se) = match &t.rule {
                Rule::Nodes { shifts, weights, .. } => {
                    let mut acc = 0.0;
                    for (k, w) in weights.iter().enumerate() {
                        y.clear();
                        y.extend(a.iter().zip(&shifts[k * n..(k + 1) * n]).map(|(u, s)| u + s));
                        acc += w * t.f.value(&y);
                    }
                    (acc, 0.0)
                }
                Rule::Sampled { shifts, samples } => {
                    let vals: Vec<f64> = (0..*samples)
                        .map(|k| {
                            let y: Vec<f64> = a.iter().zip(&shifts[k * n..(k + 1) * n]).map(|(u, s)| u + s).collect();
                            t.f.value(&y)
                        })
                        .collect();
                    crate::stats::mean_and_se(&vals)
                }
            };
            let xn = t.x.iter().map(|v| v * v).sum::<f64>();
            var += se * se * xn;
            for (o, x) in value.iter_mut().zip(&t.x) {
                *o += mean * x;
            }
        }
        Conditional {
            value,
            std_error: var.sqrt(),
            method: self.method(),
        }
    }

    pub fn expectation(&self, path: &BrownianPath) -> Result<Conditional> {
        Ok(self.expectation_from(&self.past_values(path)?))
    }

    /// `E(∇f(W(h)) | F_t)` for every term, given the past values.
    pub fn gradients_from(&self, past: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut scratch: Vec<Dual> = Vec::new();
        let mut y = Vec::new();
        self.terms
            .iter()
            .zip(past)
            .map(|(t, a)| {
                let n = a.len();
                let mut g = vec![0.0; n];
                let mut visit = |shift: &[f64], w: f64| {
                    y.clear();
                    y.extend(a.iter().zip(shift).map(|(u, s)| u + s));
                    for (j, gj) in g.iter_mut().enumerate() {
                        *gj += w * t.f.partial(j, &y, &mut scratch);
                    }
                };
                match &t.rule {
                    Rule::Nodes { shifts, weights, .. } => {
                        for (k, w) in weights.iter().enumerate() {
                            visit(&shifts[k * n..(k + 1) * n], *w);
                        }
                    }
                    Rule::Sampled { shifts, samples } => {
                        let w = 1.0 / *samples as f64;
                        for k in 0..*samples {
                            visit(&shifts[k * n..(k + 1) * n], w);
                        }
                    }
                }
                g
            })
            .collect()
    }

    /// Coefficient `x` of term `i`.
    pub fn coefficient(&self, i: usize) -> &[f64] {
        &self.terms[i].x
    }
}

/// `E(F | F_t)` at one path.
pub fn conditional_expectation(
    f: &CylindricalRV,
    t: f64,
    path: &BrownianPath,
    settings: &ConditionalSettings,
) -> Result<Conditional> {
    ConditionalPlan::new(f, t, settings)?.expectation(path)
}
