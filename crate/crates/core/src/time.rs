//! Time grids, step functions in `L^2(0,T; R^d)` and sampled Brownian paths.
//!
//! Every element of the Hilbert space `H = L^2(0,T; R^d)` used by the engine
//! is a [`StepFunction`]: piecewise constant on the half-open intervals
//! `(t_{i-1}, t_i]` of a [`TimeGrid`]. Binary operations silently refine both
//! operands to the union grid, so the algebra is total as long as horizons and
//! dimensions agree.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Absolute tolerance used when comparing or deduplicating grid points.
pub const GRID_TOL: f64 = 1e-12;

/// A partition `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct TimeGrid {
    points: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    points: Vec<f64>,
}

impl TryFrom<GridRepr> for TimeGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        TimeGrid::new(r.points)
    }
}

impl From<TimeGrid> for GridRepr {
    fn from(g: TimeGrid) -> Self {
        GridRepr { points: g.points }
    }
}

impl TimeGrid {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("need at least one interval".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid point".into()));
        }
        if points[0].abs() > GRID_TOL {
            return Err(Error::InvalidGrid(format!("first point must be 0, got {}", points[0])));
        }
        points[0] = 0.0;
        for w in points.windows(2) {
            if w[1] - w[0] <= GRID_TOL {
                return Err(Error::InvalidGrid(format!(
                    "points must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { points })
    }

    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("N must be at least 1".into()));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        let mut points: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        points[n] = horizon;
        TimeGrid::new(points)
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of intervals `N`.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Left endpoint of interval `i` (zero based).
    pub fn start(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn end(&self, i: usize) -> f64 {
        self.points[i + 1]
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    /// Index of the grid point equal to `t` (within tolerance).
    pub fn find_point(&self, t: f64) -> Option<usize> {
        let idx = self.points.partition_point(|p| *p < t - GRID_TOL);
        (idx < self.points.len() && (self.points[idx] - t).abs() <= GRID_TOL).then_some(idx)
    }

    /// Index `i` of the interval with `t_i <= t < t_{i+1}` (the interval right after `t`).
    pub fn interval_after(&self, t: f64) -> Option<usize> {
        if t < -GRID_TOL || t >= self.horizon() - GRID_TOL {
            return None;
        }
        let idx = self.points.partition_point(|p| *p <= t + GRID_TOL);
        Some(idx.saturating_sub(1).min(self.len() - 1))
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if t < -GRID_TOL || t > self.horizon() + GRID_TOL || !t.is_finite() {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    fn check_horizon(&self, other: &TimeGrid) -> Result<()> {
        if (self.horizon() - other.horizon()).abs() > GRID_TOL {
            return Err(Error::HorizonMismatch(self.horizon(), other.horizon()));
        }
        Ok(())
    }

    /// The grid whose point set is the union of both point sets.
    pub fn union(&self, other: &TimeGrid) -> Result<TimeGrid> {
        self.check_horizon(other)?;
        if self == other {
            return Ok(self.clone());
        }
        let mut merged: Vec<f64> = Vec::with_capacity(self.points.len() + other.points.len());
        let (mut i, mut j) = (0, 0);
        while i < self.points.len() || j < other.points.len() {
            let next = match (self.points.get(i), other.points.get(j)) {
                (Some(a), Some(b)) if a <= b => {
                    i += 1;
                    *a
                }
                (Some(_), Some(b)) => {
                    j += 1;
                    *b
                }
                (Some(a), None) => {
                    i += 1;
                    *a
                }
                (None, Some(b)) => {
                    j += 1;
                    *b
                }
                (None, None) => unreachable!(),
            };
            match merged.last() {
                Some(last) if (next - last).abs() <= GRID_TOL => {}
                _ => merged.push(next),
            }
        }
        let n = merged.len();
        merged[n - 1] = self.horizon();
        TimeGrid::new(merged)
    }

    /// This grid with `t` inserted (no-op if `t` is already a point).
    pub fn with_point(&self, t: f64) -> Result<TimeGrid> {
        self.check_time(t)?;
        if self.find_point(t).is_some() {
            return Ok(self.clone());
        }
        let mut points = self.points.clone();
        let idx = points.partition_point(|p| *p < t);
        points.insert(idx, t);
        TimeGrid::new(points)
    }

    /// Whether every point of `coarse` is a point of `self`.
    pub fn refines(&self, coarse: &TimeGrid) -> bool {
        (self.horizon() - coarse.horizon()).abs() <= GRID_TOL
            && coarse.points.iter().all(|p| self.find_point(*p).is_some())
    }

    /// For each interval of `self`, the interval of `coarse` that contains it.
    pub fn coarse_index_map(&self, coarse: &TimeGrid) -> Result<Vec<usize>> {
        if !self.refines(coarse) {
            return Err(Error::GridIncompatible(
                "target grid does not contain every point of the source grid".into(),
            ));
        }
        let mut map = Vec::with_capacity(self.len());
        let mut c = 0;
        for i in 0..self.len() {
            while coarse.end(c) < self.end(i) - GRID_TOL {
                c += 1;
            }
            map.push(c);
        }
        Ok(map)
    }
}

/// Piecewise-constant element of `L^2(0,T; R^d)`; value `i` lives on `(t_{i-1}, t_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRepr", into = "StepRepr")]
pub struct StepFunction {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StepRepr {
    points: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<StepRepr> for StepFunction {
    type Error = Error;
    fn try_from(r: StepRepr) -> Result<Self> {
        StepFunction::new(TimeGrid::new(r.points)?, r.values)
    }
}

impl From<StepFunction> for StepRepr {
    fn from(f: StepFunction) -> Self {
        let values = (0..f.grid.len()).map(|i| f.value(i).to_vec()).collect();
        StepRepr {
            points: f.grid.points,
            values,
        }
    }
}

impl StepFunction {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dims(grid.len(), values.len()));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension d must be positive".into()));
        }
        let mut flat = Vec::with_capacity(dim * values.len());
        for v in &values {
            if v.len() != dim {
                return Err(Error::dims(dim, v.len()));
            }
            flat.extend_from_slice(v);
        }
        Self::from_flat(grid, dim, flat)
    }

    pub fn from_flat(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension d must be positive".into()));
        }
        if values.len() != dim * grid.len() {
            return Err(Error::dims(dim * grid.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite step value".into()));
        }
        Ok(StepFunction { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        let n = grid.len() * dim;
        StepFunction {
            grid,
            dim,
            values: vec![0.0; n],
        }
    }

    /// Scalar indicator `1_{(a,b]}` on `[0, horizon]`.
    pub fn indicator(horizon: f64, a: f64, b: f64) -> Result<Self> {
        Self::indicator_component(horizon, a, b, 1, 0)
    }

    /// `1_{(a,b]} ⊗ e_k` in `L^2(0,T; R^dim)`.
    pub fn indicator_component(horizon: f64, a: f64, b: f64, dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidArgument(format!("component {k} out of range for d = {dim}")));
        }
        if !(0.0..=horizon).contains(&a) || !(0.0..=horizon).contains(&b) || b < a {
            return Err(Error::InvalidArgument(format!(
                "indicator bounds ({a}, {b}] not inside [0, {horizon}]"
            )));
        }
        let grid = TimeGrid::uniform(horizon, 1)?.with_point(a)?.with_point(b)?;
        let mut f = StepFunction::zeros(grid, dim);
        for i in 0..f.grid.len() {
            if f.grid.start(i) >= a - GRID_TOL && f.grid.end(i) <= b + GRID_TOL {
                f.values[i * dim + k] = 1.0;
            }
        }
        Ok(f)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on interval `i`.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Value just after `t`, i.e. on the interval `(t_i, t_{i+1}]` with `t_i <= t`; zero at `t = T`.
    pub fn value_after(&self, t: f64) -> Vec<f64> {
        match self.grid.interval_after(t) {
            Some(i) => self.value(i).to_vec(),
            None => vec![0.0; self.dim],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Re-expresses the function on a finer grid.
    pub fn refine(&self, grid: &TimeGrid) -> Result<StepFunction> {
        if *grid == self.grid {
            return Ok(self.clone());
        }
        let map = grid.coarse_index_map(&self.grid)?;
        let mut values = Vec::with_capacity(grid.len() * self.dim);
        for c in map {
            values.extend_from_slice(self.value(c));
        }
        Ok(StepFunction {
            grid: grid.clone(),
            dim: self.dim,
            values,
        })
    }

    fn check_compatible(&self, other: &StepFunction) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::dims(self.dim, other.dim));
        }
        self.grid.check_horizon(&other.grid)
    }

    /// Both functions re-expressed on the union of their grids.
    pub fn on_common_grid(&self, other: &StepFunction) -> Result<(StepFunction, StepFunction)> {
        self.check_compatible(other)?;
        let grid = self.grid.union(&other.grid)?;
        Ok((self.refine(&grid)?, other.refine(&grid)?))
    }

    pub fn inner(&self, other: &StepFunction) -> Result<f64> {
        self.check_compatible(other)?;
        if self.grid == other.grid {
            return Ok(dot_same_grid(self, other));
        }
        let (a, b) = self.on_common_grid(other)?;
        Ok(dot_same_grid(&a, &b))
    }

    pub fn norm(&self) -> f64 {
        dot_same_grid(self, self).sqrt()
    }

    pub fn scale(&self, c: f64) -> StepFunction {
        StepFunction {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &StepFunction) -> Result<StepFunction> {
        let (mut a, b) = self.on_common_grid(other)?;
        for (x, y) in a.values.iter_mut().zip(&b.values) {
            *x += c * y;
        }
        Ok(a)
    }

    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        self.axpy(1.0, other)
    }

    /// `f · 1_{[0,t]}`.
    pub fn restrict_before(&self, t: f64) -> Result<StepFunction> {
        self.grid.check_time(t)?;
        let grid = self.grid.with_point(t)?;
        let mut f = self.refine(&grid)?;
        for i in 0..grid.len() {
            if grid.start(i) >= t - GRID_TOL {
                f.values[i * self.dim..(i + 1) * self.dim].fill(0.0);
            }
        }
        Ok(f)
    }

    /// `f · 1_{(t,T]}`.
    pub fn restrict_after(&self, t: f64) -> Result<StepFunction> {
        self.grid.check_time(t)?;
        let grid = self.grid.with_point(t)?;
        let mut f = self.refine(&grid)?;
        for i in 0..grid.len() {
            if grid.end(i) <= t + GRID_TOL {
                f.values[i * self.dim..(i + 1) * self.dim].fill(0.0);
            }
        }
        Ok(f)
    }

    /// Closure of the set where the function is non-zero, as `(start, end)`.
    pub fn support(&self) -> Option<(f64, f64)> {
        let nz = |i: &usize| self.value(*i).iter().any(|v| *v != 0.0);
        let first = (0..self.grid.len()).find(nz)?;
        let last = (0..self.grid.len()).rev().find(nz)?;
        Some((self.grid.start(first), self.grid.end(last)))
    }

    /// Whether the support lies in `[0, t]`.
    pub fn supported_before(&self, t: f64) -> bool {
        self.support().is_none_or(|(_, e)| e <= t + GRID_TOL)
    }

    /// Whether the support lies in `[t, T]`.
    pub fn supported_after(&self, t: f64) -> bool {
        self.support().is_none_or(|(s, _)| s >= t - GRID_TOL)
    }
}

fn dot_same_grid(a: &StepFunction, b: &StepFunction) -> f64 {
    let d = a.dim;
    (0..a.grid.len())
        .map(|i| {
            let s: f64 = a.values[i * d..(i + 1) * d]
                .iter()
                .zip(&b.values[i * d..(i + 1) * d])
                .map(|(x, y)| x * y)
                .sum();
            a.grid.dt(i) * s
        })
        .sum()
}

/// `⟨f, g⟩_H = Σ_i (t_i - t_{i-1}) f_i · g_i` on the common refinement.
pub fn inner_product(f: &StepFunction, g: &StepFunction) -> Result<f64> {
    f.inner(g)
}

pub fn restrict_before(f: &StepFunction, t: f64) -> Result<StepFunction> {
    f.restrict_before(t)
}

/// Canonical orthonormal basis `{(Δt_i)^{-1/2} 1_{(t_{i-1},t_i]} ⊗ e_k}`, ordered interval-major.
pub fn orthonormalize(grid: &TimeGrid, dim: usize) -> Result<Vec<StepFunction>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension d must be positive".into()));
    }
    let mut out = Vec::with_capacity(grid.len() * dim);
    for i in 0..grid.len() {
        let scale = grid.dt(i).recip().sqrt();
        for k in 0..dim {
            let mut f = StepFunction::zeros(grid.clone(), dim);
            f.values[i * dim + k] = scale;
            out.push(f);
        }
    }
    Ok(out)
}

/// Modified Gram-Schmidt on a list of step functions.
///
/// Returns an orthonormal family `e_1..e_r` (all on the union grid) and the
/// `n × r` matrix `A` with `f_k = Σ_j A[k,j] e_j`. Numerically dependent
/// inputs are dropped.
pub fn gram_schmidt(fs: &[StepFunction]) -> Result<(Vec<StepFunction>, DMatrix<f64>)> {
    let Some(first) = fs.first() else {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    };
    let mut grid = first.grid.clone();
    for f in &fs[1..] {
        first.check_compatible(f)?;
        grid = grid.union(&f.grid)?;
    }
    let refined: Vec<StepFunction> = fs.iter().map(|f| f.refine(&grid)).collect::<Result<_>>()?;
    let mut basis: Vec<StepFunction> = Vec::new();
    for f in &refined {
        let scale = f.norm().max(1.0);
        let mut r = f.clone();
        for _ in 0..2 {
            for e in &basis {
                let c = dot_same_grid(&r, e);
                for (x, y) in r.values.iter_mut().zip(&e.values) {
                    *x -= c * y;
                }
            }
        }
        let n = r.norm();
        if n > 1e-10 * scale {
            basis.push(r.scale(1.0 / n));
        }
    }
    let mut a = DMatrix::zeros(fs.len(), basis.len());
    for (k, f) in refined.iter().enumerate() {
        for (j, e) in basis.iter().enumerate() {
            a[(k, j)] = dot_same_grid(f, e);
        }
    }
    Ok((basis, a))
}

/// Gram matrix `G[i,j] = ⟨f_i, f_j⟩`.
pub fn gram_matrix(fs: &[StepFunction]) -> Result<DMatrix<f64>> {
    let n = fs.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = fs[i].inner(&fs[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// A sampled realization of an `R^d`-cylindrical Brownian motion on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    grid: TimeGrid,
    dim: usize,
    increments: Vec<f64>,
    seed: u64,
}

impl BrownianPath {
    pub fn from_increments(grid: TimeGrid, dim: usize, increments: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension d must be positive".into()));
        }
        if increments.len() != grid.len() * dim {
            return Err(Error::dims(grid.len() * dim, increments.len()));
        }
        Ok(BrownianPath {
            grid,
            dim,
            increments,
            seed: 0,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn increment(&self, i: usize) -> &[f64] {
        &self.increments[i * self.dim..(i + 1) * self.dim]
    }

    /// `W(t_j)` for grid point `j`.
    pub fn value_at_point(&self, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for i in 0..j {
            for (acc, x) in w.iter_mut().zip(self.increment(i)) {
                *acc += x;
            }
        }
        w
    }

    /// Sum of the increments over the grid intervals `[from, to)`.
    pub fn increment_between(&self, from: usize, to: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for i in from..to {
            for (acc, x) in w.iter_mut().zip(self.increment(i)) {
                *acc += x;
            }
        }
        w
    }

    /// `W(h) = Σ_i h_i · ΔW_i`; `h` must live on a coarsening of the path grid.
    pub fn evaluate_w(&self, h: &StepFunction) -> Result<f64> {
        if h.dim != self.dim {
            return Err(Error::dims(self.dim, h.dim));
        }
        if h.grid == self.grid {
            return Ok(h.values.iter().zip(&self.increments).map(|(a, b)| a * b).sum());
        }
        if (h.horizon() - self.grid.horizon()).abs() > GRID_TOL {
            return Err(Error::HorizonMismatch(h.horizon(), self.grid.horizon()));
        }
        // walk both grids; every point of h's grid must be a path point
        let d = self.dim;
        let mut c = 0;
        let mut acc = 0.0;
        for i in 0..self.grid.len() {
            while h.grid.end(c) < self.grid.end(i) - GRID_TOL {
                c += 1;
            }
            if h.grid.start(c) > self.grid.start(i) + GRID_TOL {
                return Err(Error::GridIncompatible(format!(
                    "direction has grid point {} that is not on the path grid",
                    h.grid.start(c)
                )));
            }
            let hv = &h.values[c * d..(c + 1) * d];
            let dw = self.increment(i);
            acc += hv.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>();
        }
        if !h.grid.is_empty() && c != h.grid.len() - 1 {
            return Err(Error::GridIncompatible("direction grid not covered by path".into()));
        }
        Ok(acc)
    }

    /// View of the path restricted to `[0, t]`; `t` must be a grid point.
    pub fn prefix(&self, t: f64) -> Result<PathPrefix<'_>> {
        let end = self.grid.find_point(t).ok_or_else(|| {
            Error::GridIncompatible(format!("time {t} is not a point of the path grid"))
        })?;
        Ok(PathPrefix { path: self, end })
    }

    pub fn prefix_at_point(&self, end: usize) -> PathPrefix<'_> {
        PathPrefix {
            path: self,
            end: end.min(self.grid.len()),
        }
    }

    /// CSV export with columns `t,dW1,...,dWd` (`t` is the right endpoint of each increment).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("dW{k}")));
        wtr.write_record(&header)?;
        for i in 0..self.grid.len() {
            let mut row = vec![format!("{}", self.grid.end(i))];
            row.extend(self.increment(i).iter().map(|x| format!("{x}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Draws a path with increments `ΔW_i ~ N(0, Δt_i · I_d)` from sub-stream 0 of `seed`.
pub fn sample_path(grid: &TimeGrid, dim: usize, seed: u64) -> BrownianPath {
    sample_path_stream(grid, dim, seed, 0)
}

/// Draws a path from sub-stream `stream` of `seed`.
pub fn sample_path_stream(grid: &TimeGrid, dim: usize, seed: u64, stream: u64) -> BrownianPath {
    let mut rng = rng::stream(seed, stream);
    let mut increments = vec![0.0; grid.len() * dim];
    rng::fill_standard_normal(&mut rng, &mut increments);
    for i in 0..grid.len() {
        let s = grid.dt(i).sqrt();
        for v in &mut increments[i * dim..(i + 1) * dim] {
            *v *= s;
        }
    }
    BrownianPath {
        grid: grid.clone(),
        dim,
        increments,
        seed,
    }
}

/// `W(h)` on a sampled path.
pub fn evaluate_w(path: &BrownianPath, h: &StepFunction) -> Result<f64> {
    path.evaluate_w(h)
}

/// The part of a path observable at time `t_end`: increments strictly before it.
#[derive(Debug, Clone, Copy)]
pub struct PathPrefix<'a> {
    path: &'a BrownianPath,
    end: usize,
}

impl<'a> PathPrefix<'a> {
    pub fn time(&self) -> f64 {
        self.path.grid.points()[self.end]
    }

    pub fn dim(&self) -> usize {
        self.path.dim
    }

    /// Number of visible increments.
    pub fn len(&self) -> usize {
        self.end
    }

    pub fn is_empty(&self) -> bool {
        self.end == 0
    }

    pub fn increment(&self, i: usize) -> Option<&'a [f64]> {
        (i < self.end).then(|| self.path.increment(i))
    }

    /// `W(t_j)` for a visible grid point `j <= len()`.
    pub fn value_at_point(&self, j: usize) -> Option<Vec<f64>> {
        (j <= self.end).then(|| self.path.value_at_point(j))
    }

    /// Current value `W(t_end)`.
    pub fn current(&self) -> Vec<f64> {
        self.path.value_at_point(self.end)
    }

    /// `W(h)` for `h` supported in `[0, t_end]`.
    pub fn evaluate_w(&self, h: &StepFunction) -> Result<f64> {
        if !h.supported_before(self.time()) {
            return Err(Error::NotAdapted(format!(
                "direction is supported beyond the observation time {}",
                self.time()
            )));
        }
        self.path.evaluate_w(h)
    }
}
