use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::AdaptedIntegrand;
use crate::banach::BanachSpaceSpec;
use crate::error::{Error, Result};
use crate::time::{sample_path_stream, BrownianPath, PathPrefix, TimeGrid};

/// An event of `F_{t_{i-1}}`, given as a predicate on the path observed up to `t_{i-1}`.
pub type Event = Arc<dyn Fn(&PathPrefix<'_>) -> bool + Send + Sync>;

/// The event that always occurs.
pub fn always() -> Event {
    Arc::new(|_| true)
}

#[derive(Clone)]
struct EventTerm {
    event: Event,
    /// `x_ijk` for `k = 1..l`.
    coeffs: Vec<Vec<f64>>,
}

/// `X = Σ_i Σ_j 1_{(t_{i-1},t_i]} 1_{A_ij} Σ_k h_k ⊗ x_ijk`.
///
/// Each event only ever sees the path before the start of its interval, so
/// the process is adapted by construction.
#[derive(Clone)]
pub struct ElementaryAdaptedProcess {
    grid: TimeGrid,
    sampling: TimeGrid,
    directions: Vec<Vec<f64>>,
    codomain: BanachSpaceSpec,
    terms: Vec<Vec<EventTerm>>,
}

impl fmt::Debug for ElementaryAdaptedProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ElementaryAdaptedProcess")
            .field("grid", &self.grid)
            .field("directions", &self.directions)
            .field("codomain", &self.codomain)
            .field("events", &self.terms.iter().map(Vec::len).collect::<Vec<_>>())
            .finish()
    }
}

impl ElementaryAdaptedProcess {
    /// An empty process; `directions` are the orthonormal vectors `h_1..h_l` of `R^d`.
    pub fn new(grid: TimeGrid, directions: Vec<Vec<f64>>, codomain: BanachSpaceSpec) -> Result<Self> {
        let d = directions.first().map(Vec::len).unwrap_or(0);
        if d == 0 {
            return Err(Error::InvalidArgument("at least one non-empty direction is required".into()));
        }
        for (a, ha) in directions.iter().enumerate() {
            if ha.len() != d {
                return Err(Error::dims(d, ha.len()));
            }
            for hb in &directions[a..] {
                let g: f64 = ha.iter().zip(hb).map(|(x, y)| x * y).sum();
                let target = if std::ptr::eq(ha, hb) { 1.0 } else { 0.0 };
                if (g - target).abs() > 1e-10 {
                    return Err(Error::InvalidArgument("directions h_1..h_l must be orthonormal".into()));
                }
            }
        }
        let n = grid.len();
        Ok(ElementaryAdaptedProcess {
            sampling: grid.clone(),
            grid,
            directions,
            codomain,
            terms: vec![Vec::new(); n],
        })
    }

    /// Adds `1_{(t_{i-1},t_i]} 1_A Σ_k h_k ⊗ x_k`.
    pub fn with_term(mut self, interval: usize, event: Event, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if interval >= self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "interval {interval} outside a grid of {} intervals",
                self.grid.len()
            )));
        }
        if coeffs.len() != self.directions.len() {
            return Err(Error::dims(self.directions.len(), coeffs.len()));
        }
        for x in &coeffs {
            self.codomain.check_vector(x)?;
        }
        self.terms[interval].push(EventTerm { event, coeffs });
        Ok(self)
    }

    /// Paths are drawn on `grid`, which must refine the process grid.
    pub fn with_sampling_grid(mut self, grid: TimeGrid) -> Result<Self> {
        if !grid.refines(&self.grid) {
            return Err(Error::GridIncompatible("sampling grid must refine the process grid".into()));
        }
        self.sampling = grid;
        Ok(self)
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// Number of events on interval `i`.
    pub fn events(&self, i: usize) -> usize {
        self.terms[i].len()
    }

    /// Checks on `samples` paths that no path lies in two events of the same interval.
    pub fn check_disjoint(&self, samples: usize, seed: u64) -> Result<()> {
        let d = self.dim();
        for s in 0..samples as u64 {
            let path = sample_path_stream(&self.sampling, d, seed, s);
            for (i, terms) in self.terms.iter().enumerate() {
                let prefix = path.prefix(self.grid.start(i))?;
                let hits = terms.iter().filter(|t| (t.event)(&prefix)).count();
                if hits > 1 {
                    return Err(Error::InvalidArgument(format!(
                        "events on interval {i} overlap (sample {s} lies in {hits} of them)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `X_i(ω)` as an `m × d` matrix.
    pub fn value(&self, i: usize, path: &BrownianPath) -> Result<DMatrix<f64>> {
        let prefix = path.prefix(self.grid.start(i))?;
        let mut out = DMatrix::zeros(self.codomain.m, self.dim());
        for t in &self.terms[i] {
            if !(t.event)(&prefix) {
                continue;
            }
            for (h, x) in self.directions.iter().zip(&t.coeffs) {
                for (r, xv) in x.iter().enumerate() {
                    for (c, hv) in h.iter().enumerate() {
                        out[(r, c)] += xv * hv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `I(X) = Σ_ij 1_{A_ij} Σ_k ⟨h_k, W(t_i) - W(t_{i-1})⟩ x_ijk`.
    pub fn ito_integral_path(&self, path: &BrownianPath) -> Result<Vec<f64>> {
        super::ito_sum(self, path)
    }
}

impl AdaptedIntegrand for ElementaryAdaptedProcess {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn dim(&self) -> usize {
        self.directions[0].len()
    }

    fn codomain(&self) -> &BanachSpaceSpec {
        &self.codomain
    }

    fn sampling_grid(&self) -> &TimeGrid {
        &self.sampling
    }

    fn values(&self, path: &BrownianPath) -> Result<Vec<DMatrix<f64>>> {
        (0..self.grid.len()).map(|i| self.value(i, path)).collect()
    }
}
