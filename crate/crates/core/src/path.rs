//! Time grids and grid-sampled trajectories.

use std::sync::Arc;

use crate::error::{invalid_input, Error, Result};
use crate::linalg::SymMatrix;

/// Relative tolerance used when matching a time against grid nodes.
pub const GRID_TOL: f64 = 1e-9;

/// Strictly increasing time nodes starting at 0. Cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Arc<[f64]>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid_input("time grid must contain at least one node"));
        }
        if nodes[0] != 0.0 {
            return Err(invalid_input(format!("time grid must start at 0, got {}", nodes[0])));
        }
        if let Some(bad) = nodes.iter().find(|v| !v.is_finite()) {
            return Err(invalid_input(format!("non-finite grid node {bad}")));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid_input(format!(
                "grid nodes must be strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes: nodes.into() })
    }

    /// `steps + 1` equally spaced nodes on `[0, t_max]`.
    pub fn uniform(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(invalid_input(format!("t_max must be positive, got {t_max}")));
        }
        if steps == 0 {
            return Err(invalid_input("a uniform grid needs at least one step"));
        }
        let nodes = (0..=steps)
            .map(|i| t_max * i as f64 / steps as f64)
            .collect();
        Ok(Self { nodes })
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn t_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    #[inline]
    pub fn step(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn max_step(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    fn tolerance(&self) -> f64 {
        GRID_TOL * (1.0 + self.t_max())
    }

    /// Index of the node equal to `t` within [`GRID_TOL`].
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = self.tolerance();
        let k = self.nodes.partition_point(|&v| v < t - tol);
        (k < self.nodes.len() && (self.nodes[k] - t).abs() <= tol).then_some(k)
    }

    /// Like [`TimeGrid::index_of`] but an alignment error when `t` is off-grid.
    pub fn require_index(&self, t: f64) -> Result<usize> {
        self.index_of(t)
            .ok_or_else(|| Error::Alignment(format!("time {t} is not a node of the grid")))
    }

    /// Index of the last node `<= t` (clamped to the grid).
    pub fn floor_index(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|&v| v <= t);
        k.saturating_sub(1)
    }

    /// Positions of `sub`'s nodes inside `self`.
    pub fn embed(&self, sub: &TimeGrid) -> Result<Vec<usize>> {
        if Arc::ptr_eq(&self.nodes, &sub.nodes) {
            return Ok((0..self.len()).collect());
        }
        sub.nodes
            .iter()
            .map(|&t| {
                self.index_of(t).ok_or_else(|| {
                    invalid_input(format!("partition node {t} is not a node of the path grid"))
                })
            })
            .collect()
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes == other.nodes
    }

    pub(crate) fn require_same(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: paths are sampled on different grids")))
        }
    }
}

/// How a sampled path is read between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    /// Linear interpolation; the path is continuous.
    ContinuousLinear,
    /// Value of the last node at or before `t`; jumps sit on nodes.
    CadlagConstant,
}

/// Path in `R^d` sampled on a [`TimeGrid`]; values are stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    dim: usize,
    data: Vec<f64>,
    kind: PathKind,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, dim: usize, data: Vec<f64>, kind: PathKind) -> Result<Self> {
        if dim == 0 {
            return Err(invalid_input("path dimension must be at least 1"));
        }
        if data.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: grid.len() * dim,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(invalid_input(format!("non-finite path value {bad}")));
        }
        Ok(Self {
            grid,
            dim,
            data,
            kind,
        })
    }

    pub fn from_scalars(grid: TimeGrid, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        Self::new(grid, 1, values, kind)
    }

    /// Path equal to `value` at every node.
    pub fn constant(grid: TimeGrid, value: &[f64], kind: PathKind) -> Self {
        let data = value.repeat(grid.len());
        Self {
            dim: value.len(),
            grid,
            data,
            kind,
        }
    }

    pub(crate) fn from_parts(grid: TimeGrid, dim: usize, data: Vec<f64>, kind: PathKind) -> Self {
        debug_assert_eq!(data.len(), grid.len() * dim);
        Self {
            grid,
            dim,
            data,
            kind,
        }
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn kind(&self) -> PathKind {
        self.kind
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    pub fn value(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Scalar value at node `i`; only meaningful for `dim == 1`.
    #[inline]
    pub fn scalar(&self, i: usize) -> f64 {
        self.data[i * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn with_kind(mut self, kind: PathKind) -> Self {
        self.kind = kind;
        self
    }

    /// Coordinate `c` across all nodes.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// Value at an arbitrary time in `[0, t_max]`, read according to the path kind.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let nodes = self.grid.nodes();
        let k = self.grid.floor_index(t);
        if self.kind == PathKind::CadlagConstant || k + 1 >= nodes.len() || t <= nodes[k] {
            out.copy_from_slice(self.value(k));
            return;
        }
        let w = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
        let (a, b) = (self.value(k), self.value(k + 1));
        for c in 0..self.dim {
            out[c] = a[c] + w * (b[c] - a[c]);
        }
    }

    /// `self - value(0)` at every node.
    pub fn centered(&self) -> Self {
        let start = self.value(0).to_vec();
        let data = self
            .data
            .chunks_exact(self.dim)
            .flat_map(|v| v.iter().zip(&start).map(|(a, b)| a - b))
            .collect();
        Self::from_parts(self.grid.clone(), self.dim, data, self.kind)
    }

    /// Euclidean norm of the value at node `i`.
    pub fn norm_at(&self, i: usize) -> f64 {
        self.value(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the increment between nodes `i - 1` and `i`.
    pub fn increment_norm(&self, i: usize) -> f64 {
        self.value(i)
            .iter()
            .zip(self.value(i - 1))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Path of symmetric matrices sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPath {
    grid: TimeGrid,
    dim: usize,
    data: Vec<f64>,
    kind: PathKind,
}

impl MatrixPath {
    pub fn from_matrices(grid: TimeGrid, values: Vec<SymMatrix>, kind: PathKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let dim = values
            .first()
            .map(SymMatrix::dim)
            .ok_or_else(|| invalid_input("matrix path needs at least one node"))?;
        let mut data = Vec::with_capacity(values.len() * dim * dim);
        for m in &values {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
            if !m.is_finite() {
                return Err(invalid_input("non-finite matrix in path"));
            }
            data.extend_from_slice(m.as_slice());
        }
        Ok(Self {
            grid,
            dim,
            data,
            kind,
        })
    }

    pub fn constant(grid: TimeGrid, value: &SymMatrix, kind: PathKind) -> Self {
        let data = value.as_slice().repeat(grid.len());
        Self {
            dim: value.dim(),
            grid,
            data,
            kind,
        }
    }

    /// Scalar path viewed as a path of `1 x 1` matrices.
    pub fn from_scalar_path(path: &SampledPath) -> Result<Self> {
        if path.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: path.dim(),
            });
        }
        Ok(Self {
            grid: path.grid().clone(),
            dim: 1,
            data: path.data().to_vec(),
            kind: path.kind(),
        })
    }

    pub(crate) fn from_parts(grid: TimeGrid, dim: usize, data: Vec<f64>, kind: PathKind) -> Self {
        debug_assert_eq!(data.len(), grid.len() * dim * dim);
        Self {
            grid,
            dim,
            data,
            kind,
        }
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn kind(&self) -> PathKind {
        self.kind
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Row-major entries of the matrix at node `i`.
    #[inline]
    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.dim * self.dim;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn at(&self, i: usize) -> SymMatrix {
        SymMatrix::from_raw(self.dim, self.slice(i).to_vec())
    }

    pub fn trace_at(&self, i: usize) -> f64 {
        let s = self.slice(i);
        (0..self.dim).map(|k| s[k * self.dim + k]).sum()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Entry `(r, c)` across all nodes, as a scalar path.
    pub fn entry_path(&self, r: usize, c: usize) -> SampledPath {
        let n = self.dim * self.dim;
        let data = self.data.iter().skip(r * self.dim + c).step_by(n).copied().collect();
        SampledPath::from_parts(self.grid.clone(), 1, data, self.kind)
    }

    /// `a^T M(t) a` across all nodes, as a scalar path.
    pub fn quad_form_path(&self, a: &[f64]) -> SampledPath {
        let data = (0..self.len()).map(|i| self.at(i).quad_form(a)).collect();
        SampledPath::from_parts(self.grid.clone(), 1, data, self.kind)
    }

    /// Matrix at time `t` read according to the path kind.
    pub fn eval(&self, t: f64) -> SymMatrix {
        let nodes = self.grid.nodes();
        let k = self.grid.floor_index(t);
        if self.kind == PathKind::CadlagConstant || k + 1 >= nodes.len() || t <= nodes[k] {
            return self.at(k);
        }
        let w = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
        let (a, b) = (self.slice(k), self.slice(k + 1));
        SymMatrix::from_raw(
            self.dim,
            a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(&SymMatrix) -> SymMatrix) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.len() {
            data.extend_from_slice(f(&self.at(i)).as_slice());
        }
        Self::from_parts(self.grid.clone(), self.dim, data, self.kind)
    }

    pub fn with_kind(mut self, kind: PathKind) -> Self {
        self.kind = kind;
        self
    }
}
