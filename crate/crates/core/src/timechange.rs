//! Nondecreasing continuous clocks, their generalized inverse and time-changed paths.
//!
//! A clock `L` is stored by its values on a grid and read piecewise-linearly, so it
//! is continuous by construction. Its generalized inverse
//! `L^+(t) = sup { s : L(s) <= t }` is computed segment-wise in closed form, which
//! makes `L(L^+(t)) = t` hold to roundoff. On a plateau of `L` the inverse
//! returns the right endpoint; the reverse composition `L^+(L(s)) = s` fails there
//! and is never assumed.

use crate::error::{invalid_input, Error, Result};
use crate::path::{PathKind, SampledPath, TimeGrid, GRID_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct IncreasingFn {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl IncreasingFn {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values[0] != 0.0 {
            return Err(invalid_input(format!("clock must start at 0, got {}", values[0])));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid_input(format!("non-finite clock value {bad}")));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] < w[0]) {
            return Err(invalid_input(format!("clock decreases from {} to {}", w[0], w[1])));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on the grid, shifting so that the clock starts at 0.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let base = f(0.0);
        let values = grid.nodes().iter().map(|&t| f(t) - base).collect();
        Self::new(grid, values)
    }

    pub fn identity(grid: TimeGrid) -> Self {
        let values = grid.nodes().to_vec();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `L(T_max)`.
    #[inline]
    pub fn final_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Clock increment over grid cell `i`.
    #[inline]
    pub fn increment(&self, i: usize) -> f64 {
        self.values[i + 1] - self.values[i]
    }

    /// Piecewise-linear value at `s`, clamped to `[0, T_max]`.
    pub fn eval(&self, s: f64) -> f64 {
        let nodes = self.grid.nodes();
        let k = self.grid.floor_index(s);
        if k + 1 >= nodes.len() || s <= nodes[k] {
            return self.values[k];
        }
        let w = (s - nodes[k]) / (nodes[k + 1] - nodes[k]);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Maximal intervals `[a, b]` (grid nodes, `a < b`) on which the clock is flat.
    pub fn plateaus(&self) -> Vec<(f64, f64)> {
        let nodes = self.grid.nodes();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for i in 0..self.values.len() - 1 {
            let flat = self.values[i + 1] == self.values[i];
            match (flat, start) {
                (true, None) => start = Some(i),
                (false, Some(a)) => {
                    out.push((nodes[a], nodes[i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(a) = start {
            out.push((nodes[a], self.grid.t_max()));
        }
        out
    }

    /// Uniform grid on `[0, L(T_max)]` with as many nodes as the clock grid.
    pub fn uniform_image_grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.final_value(), self.grid.len() - 1)
    }

    /// Grid made of the distinct clock values `L(t_j)`, together with the position
    /// of each `L(t_j)` in it.
    pub fn image_grid(&self) -> Result<(TimeGrid, Vec<usize>)> {
        let mut nodes = Vec::with_capacity(self.values.len());
        let mut index = Vec::with_capacity(self.values.len());
        for &v in &self.values {
            match nodes.last() {
                Some(&last) if v <= last => {}
                _ => nodes.push(v),
            }
            index.push(nodes.len() - 1);
        }
        Ok((TimeGrid::new(nodes)?, index))
    }
}

/// `L^+(t) = sup { s in [0, T_max] : L(s) <= t }`.
pub fn lambda_dagger(clock: &IncreasingFn, t: f64) -> Result<f64> {
    let top = clock.final_value();
    if !(t >= 0.0 && t <= top) {
        return Err(Error::OutOfRange {
            value: t,
            lo: 0.0,
            hi: top,
        });
    }
    let values = clock.values();
    let nodes = clock.grid().nodes();
    let k = values.partition_point(|&v| v <= t) - 1;
    if k + 1 == values.len() {
        return Ok(nodes[k]);
    }
    // values[k] <= t < values[k + 1]: the segment is strictly increasing.
    let frac = (t - values[k]) / (values[k + 1] - values[k]);
    Ok(nodes[k] + frac * (nodes[k + 1] - nodes[k]))
}

/// `|L(L^+(t)) - t|`.
pub fn check_right_inverse(clock: &IncreasingFn, t: f64) -> Result<f64> {
    let s = lambda_dagger(clock, t)?;
    Ok((clock.eval(s) - t).abs())
}

/// `X(t) = Y(L^+(t)) - Y(0)` sampled on `output_grid`, which must lie inside `[0, L(T_max)]`.
pub fn time_change_path(
    path: &SampledPath,
    clock: &IncreasingFn,
    output_grid: &TimeGrid,
) -> Result<SampledPath> {
    let span_tol = GRID_TOL * (1.0 + clock.grid().t_max());
    if (path.grid().t_max() - clock.grid().t_max()).abs() > span_tol {
        return Err(Error::GridMismatch(format!(
            "path spans [0, {}] but the clock spans [0, {}]",
            path.grid().t_max(),
            clock.grid().t_max()
        )));
    }
    let top = clock.final_value();
    if output_grid.t_max() > top + GRID_TOL * (1.0 + top) {
        return Err(Error::GridMismatch(format!(
            "output grid reaches {} beyond the clock range {top}",
            output_grid.t_max()
        )));
    }
    let dim = path.dim();
    let start = path.value(0).to_vec();
    let mut data = Vec::with_capacity(output_grid.len() * dim);
    let mut buf = vec![0.0; dim];
    for &tau in output_grid.nodes() {
        let s = lambda_dagger(clock, tau.min(top))?;
        path.eval_into(s, &mut buf);
        data.extend(buf.iter().zip(&start).map(|(a, b)| a - b));
    }
    Ok(SampledPath::from_parts(
        output_grid.clone(),
        dim,
        data,
        PathKind::ContinuousLinear,
    ))
}
