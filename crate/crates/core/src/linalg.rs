//! Dense symmetric matrices of small order and the positive semidefinite cone.
//!
//! Everything here is sized for `d <= 8`: storage is a full row-major buffer and
//! the eigendecomposition is a cyclic Jacobi sweep. Wherever a matrix norm is
//! needed it is the operator (spectral) norm, `sup_{|x|=1} |x^T A x|`.

use crate::error::{invalid_input, invalid_param, Error, Result};

/// Relative symmetry tolerance accepted by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative band below zero inside which an eigenvalue still counts as
/// nonnegative; such eigenvalues are clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

/// Jacobi sweeps stop once the off-diagonal Frobenius mass falls below this
/// fraction of the total Frobenius norm.
const JACOBI_OFF_DIAGONAL_TARGET: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Real symmetric `d x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, checking finiteness and symmetry.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid_input("matrix dimension must be at least 1"));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(invalid_input(format!("non-finite matrix entry {bad}")));
        }
        let scale = 1.0 + data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(invalid_input(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid_input("matrix rows must all have length equal to the row count"));
        }
        Self::new(dim, rows.concat())
    }

    /// Symmetrizes `(A + A^T) / 2` from arbitrary row-major entries.
    pub(crate) fn symmetrized(dim: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let m = 0.5 * (data[i * dim + j] + data[j * dim + i]);
                data[i * dim + j] = m;
                data[j * dim + i] = m;
            }
        }
        Self { dim, data }
    }

    /// Wraps a buffer already known to be symmetric.
    pub(crate) fn from_raw(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = value;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let dim = values.len();
        let mut m = Self::zeros(dim);
        for (i, v) in values.iter().enumerate() {
            m.data[i * dim + i] = *v;
        }
        m
    }

    /// Tensor square `x x^T`.
    pub fn outer(x: &[f64]) -> Self {
        let dim = x.len();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = x[i] * x[j];
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + factor * other`, in place.
    pub fn add_scaled_assign(&mut self, factor: f64, other: &Self) {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// Matrix product, symmetrized. Exact (up to roundoff) when the factors commute,
    /// e.g. functions of the same matrix.
    pub fn matmul_sym(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += a * other.get(k, j);
                }
            }
        }
        Self::symmetrized(d, out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    #[inline]
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `a^T A b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += a[i] * self.get(i, j) * b[j];
            }
        }
        acc
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// Operator norm: the largest eigenvalue modulus.
    pub fn norm(&self) -> f64 {
        match self.dim {
            1 => self.data[0].abs(),
            2 => {
                let (a, b, c) = (self.data[0], self.data[1], self.data[3]);
                let mean = 0.5 * (a + c);
                let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                mean.abs() + radius
            }
            _ => self
                .eigen()
                .values
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Eigendecomposition by cyclic Jacobi rotations.
    pub fn eigen(&self) -> SymEigen {
        jacobi_eigen(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self.dim {
            1 => self.data[0],
            _ => self
                .eigen()
                .values
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(*v)),
        }
    }
}

/// Eigenvalues and orthonormal eigenvectors; `vectors` is row-major with the
/// k-th eigenvector stored in column k.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl SymEigen {
    /// Reassembles `V f(L) V^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|v| f(*v)).collect();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.vectors[i * d + k] * mapped[k] * self.vectors[j * d + k];
                }
                out[i * d + j] = acc;
                out[j * d + i] = acc;
            }
        }
        SymMatrix::from_raw(d, out)
    }
}

fn jacobi_eigen(m: &SymMatrix) -> SymEigen {
    let d = m.dim;
    let mut a = m.data.clone();
    let mut v = SymMatrix::identity(d).data;
    let total = m.frobenius();
    if d > 1 && total > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    off += a[p * d + q] * a[p * d + q];
                }
            }
            if off.sqrt() <= JACOBI_OFF_DIAGONAL_TARGET * total {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = a[p * d + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let tau = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // A <- A J
                    for k in 0..d {
                        let akp = a[k * d + p];
                        let akq = a[k * d + q];
                        a[k * d + p] = c * akp - s * akq;
                        a[k * d + q] = s * akp + c * akq;
                    }
                    // A <- J^T A
                    for k in 0..d {
                        let apk = a[p * d + k];
                        let aqk = a[q * d + k];
                        a[p * d + k] = c * apk - s * aqk;
                        a[q * d + k] = s * apk + c * aqk;
                    }
                    a[p * d + q] = 0.0;
                    a[q * d + p] = 0.0;
                    for k in 0..d {
                        let vkp = v[k * d + p];
                        let vkq = v[k * d + q];
                        v[k * d + p] = c * vkp - s * vkq;
                        v[k * d + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    SymEigen {
        values: (0..d).map(|i| a[i * d + i]).collect(),
        vectors: v,
    }
}

/// Element of the positive semidefinite cone.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix(SymMatrix);

impl PsdMatrix {
    /// Accepts `base` if its smallest eigenvalue is at least `-PSD_TOL * (1 + |base|)`.
    pub fn new(base: SymMatrix) -> Result<Self> {
        let eig = base.eigen();
        check_psd(&eig)?;
        Ok(Self(base))
    }

    /// Clamps negative eigenvalues to zero, whatever their size.
    pub fn project(base: &SymMatrix) -> Self {
        if base.dim == 1 {
            return Self(SymMatrix::from_raw(1, vec![base.data[0].max(0.0)]));
        }
        Self(base.eigen().map(|v| v.max(0.0)))
    }

    pub(crate) fn from_sym_unchecked(base: SymMatrix) -> Self {
        Self(base)
    }

    pub fn identity(dim: usize) -> Self {
        Self(SymMatrix::identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(SymMatrix::zeros(dim))
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn into_sym(self) -> SymMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }
}

impl AsRef<SymMatrix> for PsdMatrix {
    fn as_ref(&self) -> &SymMatrix {
        &self.0
    }
}

fn check_psd(eig: &SymEigen) -> Result<()> {
    let norm = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let min = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let tolerance = PSD_TOL * (1.0 + norm);
    if min < -tolerance {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tolerance,
        });
    }
    Ok(())
}

/// Operator norm, rejecting non-finite entries.
pub fn op_norm(a: &SymMatrix) -> Result<f64> {
    if !a.is_finite() {
        return Err(invalid_input("non-finite matrix entries"));
    }
    Ok(a.norm())
}

pub fn trace(a: &SymMatrix) -> f64 {
    a.trace()
}

/// Principal square root; eigenvalues in the tolerance band below zero are clamped.
pub fn psd_sqrt(phi: &PsdMatrix) -> Result<PsdMatrix> {
    let m = phi.as_sym();
    if m.dim == 1 {
        let v = m.data[0];
        if v < -PSD_TOL * (1.0 + v.abs()) {
            return Err(Error::NotPsd {
                min_eigenvalue: v,
                tolerance: PSD_TOL * (1.0 + v.abs()),
            });
        }
        return Ok(PsdMatrix(SymMatrix::from_raw(1, vec![v.max(0.0).sqrt()])));
    }
    let eig = m.eigen();
    check_psd(&eig)?;
    Ok(PsdMatrix(eig.map(|v| v.max(0.0).sqrt())))
}

/// `(phi + eps^2 I)^{-1/2}`, well defined for every PSD `phi` once `eps > 0`.
pub fn psd_inv_sqrt(phi: &PsdMatrix, eps: f64) -> Result<SymMatrix> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid_param(format!("regularization eps must be positive, got {eps}")));
    }
    let shift = eps * eps;
    let m = phi.as_sym();
    if m.dim == 1 {
        return Ok(SymMatrix::from_raw(1, vec![1.0 / (m.data[0].max(0.0) + shift).sqrt()]));
    }
    let eig = m.eigen();
    check_psd(&eig)?;
    Ok(eig.map(|v| 1.0 / (v.max(0.0) + shift).sqrt()))
}

/// `m R / (m v |R|)`: shrinks `r` radially onto the operator-norm ball of radius `m`.
pub fn truncate_sym(r: &SymMatrix, m: f64) -> Result<SymMatrix> {
    if !(m > 0.0) {
        return Err(invalid_param(format!("truncation level must be positive, got {m}")));
    }
    let norm = op_norm(r)?;
    if norm <= m {
        return Ok(r.clone());
    }
    Ok(r.scale(m / norm))
}

/// Returns `(x^[N], f_N(x))` with `x^[N] = N x / (N v |x|)` and `f_N(x) = |x - x^[N]|^2`.
pub fn truncate_vec(x: &[f64], n: f64) -> Result<(Vec<f64>, f64)> {
    if !(n > 0.0) {
        return Err(invalid_param(format!("truncation level must be positive, got {n}")));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= n {
        return Ok((x.to_vec(), 0.0));
    }
    let factor = n / norm;
    let truncated: Vec<f64> = x.iter().map(|v| v * factor).collect();
    let defect = x
        .iter()
        .zip(&truncated)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((truncated, defect))
}

/// Scalar truncation defect `f_N(x) = (|x| - N)_+^2`.
pub fn truncation_defect(x: f64, n: f64) -> f64 {
    let excess = (x.abs() - n).max(0.0);
    excess * excess
}
