//! Discretized integrals: left-point stochastic sums, pathwise Stieltjes sums
//! against a clock, and causal kernel mollification of matrix-valued integrands.

use crate::error::{invalid_input, Error, Result};
#[cfg(test)]
use crate::linalg::SymMatrix;
use crate::path::{MatrixPath, PathKind, SampledPath, TimeGrid};
use crate::timechange::IncreasingFn;

/// `Z(t) = sum over partition cells before t of R(left) (S(t ^ right) - S(left))`.
///
/// `R` and `S` share one grid; `partition` must be a sub-grid of it. Within a
/// partition cell the integrand is frozen at the cell's left endpoint, so `Z` at
/// fine nodes inside the cell is `Z(left) + R(left) (S(t) - S(left))`.
pub fn ito_left_sum(
    integrand: &MatrixPath,
    driver: &SampledPath,
    partition: &TimeGrid,
) -> Result<SampledPath> {
    integrand.grid().require_same(driver.grid(), "ito_left_sum")?;
    if integrand.dim() != driver.dim() {
        return Err(Error::DimensionMismatch {
            expected: integrand.dim(),
            got: driver.dim(),
        });
    }
    let positions = driver.grid().embed(partition)?;
    if positions.first() != Some(&0) {
        return Err(invalid_input("partition must start at the first grid node"));
    }
    let d = driver.dim();
    let n = driver.len();
    let mut data = vec![0.0; n * d];
    let mut incr = vec![0.0; d];
    let mut acc = vec![0.0; d];
    let mut cell = 0usize;
    let mut left = 0usize;
    for i in 1..n {
        while cell + 1 < positions.len() && positions[cell + 1] < i {
            cell += 1;
            left = positions[cell];
            let base = data[left * d..(left + 1) * d].to_vec();
            acc.copy_from_slice(&base);
        }
        let r = integrand.slice(left);
        let (s_i, s_left) = (driver.value(i), driver.value(left));
        for c in 0..d {
            incr[c] = s_i[c] - s_left[c];
        }
        let out = &mut data[i * d..(i + 1) * d];
        for row in 0..d {
            let mut v = acc[row];
            for c in 0..d {
                v += r[row * d + c] * incr[c];
            }
            out[row] = v;
        }
    }
    Ok(SampledPath::from_parts(
        driver.grid().clone(),
        d,
        data,
        PathKind::ContinuousLinear,
    ))
}

/// `K(t) = sum over grid cells before t of phi(left) * (L(right) - L(left))`.
pub fn stieltjes_compose(integrand: &MatrixPath, clock: &IncreasingFn) -> Result<MatrixPath> {
    integrand.grid().require_same(clock.grid(), "stieltjes_compose")?;
    let m = integrand.dim() * integrand.dim();
    let n = integrand.len();
    let mut data = vec![0.0; n * m];
    for i in 1..n {
        let dl = clock.increment(i - 1);
        let (prev, cur) = data.split_at_mut(i * m);
        let prev = &prev[(i - 1) * m..];
        let phi = integrand.slice(i - 1);
        for k in 0..m {
            cur[k] = prev[k] + phi[k] * dl;
        }
    }
    Ok(MatrixPath::from_parts(
        integrand.grid().clone(),
        integrand.dim(),
        data,
        PathKind::ContinuousLinear,
    ))
}

/// Scalar version of [`stieltjes_compose`].
pub fn stieltjes_compose_scalar(integrand: &SampledPath, clock: &IncreasingFn) -> Result<SampledPath> {
    let as_matrix = MatrixPath::from_scalar_path(integrand)?;
    let k = stieltjes_compose(&as_matrix, clock)?;
    Ok(SampledPath::from_parts(
        k.grid().clone(),
        1,
        k.data().to_vec(),
        PathKind::ContinuousLinear,
    ))
}

/// Nonnegative density on `[0, 1]` given by samples on a uniform grid and read
/// by linear interpolation; zero outside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    samples: Vec<f64>,
    // Exact integrals of the interpolant and of `u` times it, from 0 to each knot.
    cum0: Vec<f64>,
    cum1: Vec<f64>,
}

impl MollifierKernel {
    pub const MASS_TOL: f64 = 1e-10;

    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Kernel("need at least two samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Kernel("samples must be finite and nonnegative".into()));
        }
        if samples[0] != 0.0 {
            return Err(Error::Kernel(format!("g(0) must vanish, got {}", samples[0])));
        }
        let (cum0, cum1) = cumulative_moments(&samples);
        let kernel = Self { samples, cum0, cum1 };
        let mass = kernel.mass();
        if (mass - 1.0).abs() > Self::MASS_TOL {
            return Err(Error::Kernel(format!("kernel mass {mass} differs from 1")));
        }
        Ok(kernel)
    }

    /// Samples `g` on `resolution + 1` uniform nodes and rescales to unit trapezoid mass.
    pub fn from_fn(g: impl Fn(f64) -> f64, resolution: usize) -> Result<Self> {
        let resolution = resolution.max(1);
        let mut samples: Vec<f64> = (0..=resolution)
            .map(|i| g(i as f64 / resolution as f64))
            .collect();
        let mass = trapezoid_mass(&samples);
        if !(mass > 0.0) {
            return Err(Error::Kernel("kernel has no mass".into()));
        }
        samples.iter_mut().for_each(|v| *v /= mass);
        Self::from_samples(samples)
    }

    /// Trapezoid mass of the samples; exactly the integral of the interpolant.
    pub fn mass(&self) -> f64 {
        trapezoid_mass(&self.samples)
    }

    pub fn eval(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let m = self.samples.len() - 1;
        let x = u * m as f64;
        let k = (x.floor() as usize).min(m - 1);
        let w = x - k as f64;
        self.samples[k] + w * (self.samples[k + 1] - self.samples[k])
    }

    pub fn max_value(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }

    /// `int_0^1 u g(u) du` of the interpolant.
    pub fn first_moment(&self) -> f64 {
        self.cum1[self.cum1.len() - 1]
    }

    /// `(int_0^v g, int_0^v u g(u) du)` of the interpolant, `v` clamped to `[0, 1]`.
    pub fn moments_to(&self, v: f64) -> (f64, f64) {
        let m = self.samples.len() - 1;
        if !(v > 0.0) {
            return (0.0, 0.0);
        }
        if v >= 1.0 {
            return (self.cum0[m], self.cum1[m]);
        }
        let delta = 1.0 / m as f64;
        let x = v * m as f64;
        let k = (x.floor() as usize).min(m - 1);
        let xk = k as f64 * delta;
        let tau = v - xk;
        let gk = self.samples[k];
        let slope = (self.samples[k + 1] - gk) / delta;
        let m0 = gk * tau + slope * tau * tau / 2.0;
        let m1 = xk * gk * tau + (xk * slope + gk) * tau * tau / 2.0 + slope * tau.powi(3) / 3.0;
        (self.cum0[k] + m0, self.cum1[k] + m1)
    }
}

fn cumulative_moments(samples: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = samples.len() - 1;
    let delta = 1.0 / m as f64;
    let mut cum0 = vec![0.0; m + 1];
    let mut cum1 = vec![0.0; m + 1];
    for k in 0..m {
        let xk = k as f64 * delta;
        let (a, b) = (samples[k], samples[k + 1]);
        let slope = (b - a) / delta;
        cum0[k + 1] = cum0[k] + 0.5 * delta * (a + b);
        cum1[k + 1] = cum1[k] + xk * a * delta + (xk * slope + a) * delta * delta / 2.0 + slope * delta.powi(3) / 3.0;
    }
    (cum0, cum1)
}

impl Default for MollifierKernel {
    /// `g(u) = 6 u (1 - u)`.
    fn default() -> Self {
        Self::from_fn(|u| 6.0 * u * (1.0 - u), 4096).expect("default kernel is valid")
    }
}

fn trapezoid_mass(samples: &[f64]) -> f64 {
    let m = samples.len() - 1;
    let h = 1.0 / m as f64;
    h * (samples[1..m].iter().sum::<f64>() + 0.5 * (samples[0] + samples[m]))
}

/// `H_n(t) = int_{max(0, t - 1/n)}^t H(u) g_n(t - u) du`, `g_n(v) = n g(n v)`.
///
/// The integrand is read according to its path kind (piecewise constant or
/// piecewise linear between the cut point `t - 1/n` and the grid nodes) and
/// integrated against the kernel interpolant exactly, so constant paths are
/// reproduced to roundoff. Each output value only uses `H` on `[0, t]`.
pub fn mollify(path: &MatrixPath, n: usize, kernel: &MollifierKernel) -> Result<MatrixPath> {
    if n == 0 {
        return Err(invalid_input("mollification index n must be at least 1"));
    }
    let nodes = path.grid().nodes();
    let m = path.dim() * path.dim();
    let nf = n as f64;
    let width = 1.0 / nf;
    let linear = path.kind() == PathKind::ContinuousLinear;
    let mut data = vec![0.0; nodes.len() * m];
    for (i, &t) in nodes.iter().enumerate() {
        let lower = (t - width).max(0.0);
        let first = nodes.partition_point(|&v| v <= lower);
        let lower_value = path.eval(lower);
        let out = &mut data[i * m..(i + 1) * m];
        // Cells [a, b] from the cut point through the grid nodes in (lower, t].
        let mut a = lower;
        let mut ha: &[f64] = lower_value.as_slice();
        let mut ga = kernel.moments_to(nf * (t - a));
        for k in first..=i {
            let (b, hb) = (nodes[k], path.slice(k));
            if b > a {
                let gb = kernel.moments_to(nf * (t - b));
                // int_a^b g_n(t - u) du and int_a^b (u - a) g_n(t - u) du.
                let m0 = ga.0 - gb.0;
                let m1 = (t - a) * m0 - (ga.1 - gb.1) / nf;
                if linear {
                    let slope_w = m1 / (b - a);
                    for c in 0..m {
                        out[c] += ha[c] * m0 + (hb[c] - ha[c]) * slope_w;
                    }
                } else {
                    for c in 0..m {
                        out[c] += ha[c] * m0;
                    }
                }
                ga = gb;
            }
            a = b;
            ha = hb;
        }
    }
    Ok(MatrixPath::from_parts(
        path.grid().clone(),
        path.dim(),
        data,
        PathKind::ContinuousLinear,
    ))
}

/// `int_0^t |H_n(u) - H(u)| du` (operator norm), trapezoid on the grid.
pub fn l1_distance(a: &MatrixPath, b: &MatrixPath, t: f64) -> Result<f64> {
    a.grid().require_same(b.grid(), "l1_distance")?;
    let nodes = a.grid().nodes();
    let last = a.grid().floor_index(t);
    let diff = |i: usize| a.at(i).sub(&b.at(i)).norm();
    let mut acc = 0.0;
    let mut prev = diff(0);
    for i in 1..=last {
        let cur = diff(i);
        acc += 0.5 * (nodes[i] - nodes[i - 1]) * (prev + cur);
        prev = cur;
    }
    Ok(acc)
}
