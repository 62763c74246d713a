//! Seeded driving noise and the time-changed-Brownian construction of a
//! continuous local martingale with prescribed initial law, characteristic
//! density `Phi` and clock `L`.
//!
//! The construction runs in the clock's own time scale: with
//! `Theta = sqrt(Phi)` and `H(tau) = Theta(L^+(tau))`, a standard Wiener process
//! `w` on `[0, L(T_max)]` is integrated against `H` and read back through the
//! clock, `Y(t) = Y(0) + (H . w)(L(t))`. The resulting characteristic is the
//! pathwise sum `K = Phi o L`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::integrate::{ito_left_sum, stieltjes_compose};
use crate::linalg::{psd_inv_sqrt, psd_sqrt, PsdMatrix, SymMatrix};
use crate::path::{MatrixPath, PathKind, SampledPath, TimeGrid, GRID_TOL};
use crate::rng::{purpose, NoiseSeed};
use crate::timechange::{lambda_dagger, IncreasingFn};

/// Law of the independent increments of a driving process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncrementLaw {
    #[default]
    Gaussian,
    /// `+-sqrt(variance)` with probability 1/2 each.
    TwoPoint,
}

impl IncrementLaw {
    #[inline]
    pub fn draw(self, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Gaussian => rng.sample(StandardNormal),
            Self::TwoPoint => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Standard `d`-dimensional Wiener process on `grid`, starting at 0.
pub fn sample_brownian(d: usize, grid: &TimeGrid, seed: NoiseSeed) -> Result<SampledPath> {
    if d == 0 {
        return Err(invalid_input("dimension must be at least 1"));
    }
    let mut rng = seed.rng();
    let n = grid.len();
    let mut data = vec![0.0; n * d];
    for i in 1..n {
        let sd = grid.step(i - 1).sqrt();
        for c in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            data[i * d + c] = data[(i - 1) * d + c] + sd * z;
        }
    }
    Ok(SampledPath::from_parts(grid.clone(), d, data, PathKind::ContinuousLinear))
}

/// Gaussian process with independent increments and `E S(t) S(t)^T = T(t) I`.
pub fn sample_indep_increments(
    variance: &IncreasingFn,
    d: usize,
    grid: &TimeGrid,
    seed: NoiseSeed,
) -> Result<SampledPath> {
    sample_indep_increments_with(variance, d, grid, seed, IncrementLaw::Gaussian)
}

/// Like [`sample_indep_increments`] with a choice of increment law.
pub fn sample_indep_increments_with(
    variance: &IncreasingFn,
    d: usize,
    grid: &TimeGrid,
    seed: NoiseSeed,
    law: IncrementLaw,
) -> Result<SampledPath> {
    if d == 0 {
        return Err(invalid_input("dimension must be at least 1"));
    }
    let span = variance.grid().t_max();
    if grid.t_max() > span + GRID_TOL * (1.0 + span) {
        return Err(Error::GridMismatch(format!(
            "grid reaches {} but the variance function is only known on [0, {span}]",
            grid.t_max()
        )));
    }
    let levels: Vec<f64> = if grid.same_as(variance.grid()) {
        variance.values().to_vec()
    } else {
        grid.nodes().iter().map(|&t| variance.eval(t)).collect()
    };
    let mut rng = seed.rng();
    let n = grid.len();
    let mut data = vec![0.0; n * d];
    for i in 1..n {
        let dv = levels[i] - levels[i - 1];
        if dv < 0.0 {
            return Err(invalid_input("variance function decreases on the grid"));
        }
        let sd = dv.sqrt();
        for c in 0..d {
            data[i * d + c] = data[(i - 1) * d + c] + sd * law.draw(&mut rng);
        }
    }
    Ok(SampledPath::from_parts(grid.clone(), d, data, PathKind::ContinuousLinear))
}

/// Causal map from the auxiliary driver's past to a PSD matrix: called with the
/// grid times and driver values up to and including the current node.
#[derive(Clone)]
pub struct DriverMap(Arc<DriverFn>);

type DriverFn = dyn Fn(&[f64], &[f64]) -> SymMatrix + Send + Sync;

impl DriverMap {
    pub fn new(f: impl Fn(&[f64], &[f64]) -> SymMatrix + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for DriverMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DriverMap(..)")
    }
}

#[derive(Debug, Clone)]
pub enum PhiModel {
    /// Deterministic `Phi(s) = Phi_0`.
    Constant(PsdMatrix),
    /// `Phi(s) = v(s) D` with `v = low + (high - low) * logistic(vol * B(s))` for an
    /// auxiliary Brownian motion `B`.
    ScalarDiffusion {
        direction: PsdMatrix,
        low: f64,
        high: f64,
        vol: f64,
    },
    /// Markov regimes on the grid: regime `k` is left for `k + 1 (mod m)` with
    /// probability `1 - exp(-rates[k] dt)` per step. Starts in regime 0.
    RegimeSwitch {
        rates: Vec<f64>,
        levels: Vec<PsdMatrix>,
    },
    /// `Phi(s) = f(driver on [0, s])` for an auxiliary Brownian driver.
    FunctionOfDriver(DriverMap),
}

/// Generator of `S_+`-valued characteristic densities, causal in an auxiliary driver.
#[derive(Debug, Clone)]
pub struct PhiGenerator {
    dim: usize,
    model: PhiModel,
}

impl PhiGenerator {
    pub fn new(dim: usize, model: PhiModel) -> Result<Self> {
        let check_dim = |m: &PsdMatrix| {
            if m.dim() == dim {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                })
            }
        };
        match &model {
            PhiModel::Constant(m) => check_dim(m)?,
            PhiModel::ScalarDiffusion {
                direction,
                low,
                high,
                vol,
            } => {
                check_dim(direction)?;
                if !(*low >= 0.0 && high >= low && vol.is_finite()) {
                    return Err(invalid_param("scalar diffusion needs 0 <= low <= high and finite vol"));
                }
            }
            PhiModel::RegimeSwitch { rates, levels } => {
                if levels.is_empty() || rates.len() != levels.len() {
                    return Err(invalid_param("regime switch needs one rate per level"));
                }
                if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                    return Err(invalid_param("switching rates must be nonnegative"));
                }
                levels.iter().try_for_each(check_dim)?;
            }
            PhiModel::FunctionOfDriver(_) => {}
        }
        Ok(Self { dim, model })
    }

    pub fn constant(phi: PsdMatrix) -> Self {
        Self {
            dim: phi.dim(),
            model: PhiModel::Constant(phi),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> &PhiModel {
        &self.model
    }

    /// Same model with every level multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return Err(invalid_param("scale factor must be nonnegative"));
        }
        let scale = |m: &PsdMatrix| PsdMatrix::from_sym_unchecked(m.as_sym().scale(factor));
        let model = match &self.model {
            PhiModel::Constant(m) => PhiModel::Constant(scale(m)),
            PhiModel::ScalarDiffusion {
                direction,
                low,
                high,
                vol,
            } => PhiModel::ScalarDiffusion {
                direction: scale(direction),
                low: *low,
                high: *high,
                vol: *vol,
            },
            PhiModel::RegimeSwitch { rates, levels } => PhiModel::RegimeSwitch {
                rates: rates.clone(),
                levels: levels.iter().map(scale).collect(),
            },
            PhiModel::FunctionOfDriver(f) => {
                let f = f.clone();
                PhiModel::FunctionOfDriver(DriverMap::new(move |t, b| (f.0)(t, b).scale(factor)))
            }
        };
        Ok(Self {
            dim: self.dim,
            model,
        })
    }

    /// Auxiliary driver: a Brownian path for the diffusion-type models, per-step
    /// uniforms for the regime switch, zeros for the constant model.
    pub fn sample_driver(&self, grid: &TimeGrid, seed: NoiseSeed) -> Result<SampledPath> {
        match &self.model {
            PhiModel::Constant(_) => Ok(SampledPath::constant(grid.clone(), &[0.0], PathKind::CadlagConstant)),
            PhiModel::RegimeSwitch { .. } => {
                let mut rng = seed.rng();
                let mut values = vec![0.0; grid.len()];
                for v in values.iter_mut().skip(1) {
                    *v = rng.random::<f64>();
                }
                SampledPath::from_scalars(grid.clone(), values, PathKind::CadlagConstant)
            }
            PhiModel::ScalarDiffusion { .. } | PhiModel::FunctionOfDriver(_) => sample_brownian(1, grid, seed),
        }
    }

    /// `Phi` at each node from the driver's values at that node and before.
    pub fn phi_from_driver(&self, driver: &SampledPath) -> Result<MatrixPath> {
        let grid = driver.grid();
        let n = grid.len();
        let d = self.dim;
        match &self.model {
            PhiModel::Constant(m) => Ok(MatrixPath::constant(grid.clone(), m.as_sym(), PathKind::CadlagConstant)),
            PhiModel::ScalarDiffusion {
                direction,
                low,
                high,
                vol,
            } => {
                let dir = direction.as_sym().as_slice();
                let mut data = Vec::with_capacity(n * d * d);
                for i in 0..n {
                    let v = low + (high - low) * logistic(vol * driver.scalar(i));
                    data.extend(dir.iter().map(|x| x * v));
                }
                Ok(MatrixPath::from_parts(grid.clone(), d, data, PathKind::CadlagConstant))
            }
            PhiModel::RegimeSwitch { rates, levels } => {
                let mut state = 0usize;
                let mut data = Vec::with_capacity(n * d * d);
                data.extend_from_slice(levels[0].as_sym().as_slice());
                for i in 1..n {
                    let p = 1.0 - (-rates[state] * grid.step(i - 1)).exp();
                    if driver.scalar(i) < p {
                        state = (state + 1) % levels.len();
                    }
                    data.extend_from_slice(levels[state].as_sym().as_slice());
                }
                Ok(MatrixPath::from_parts(grid.clone(), d, data, PathKind::CadlagConstant))
            }
            PhiModel::FunctionOfDriver(f) => {
                let times = grid.nodes();
                let values = driver.data();
                let mut data = Vec::with_capacity(n * d * d);
                for i in 0..n {
                    let m = (f.0)(&times[..=i], &values[..=i]);
                    if m.dim() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: m.dim(),
                        });
                    }
                    let m = PsdMatrix::new(m)?;
                    data.extend_from_slice(m.as_sym().as_slice());
                }
                Ok(MatrixPath::from_parts(grid.clone(), d, data, PathKind::CadlagConstant))
            }
        }
    }

    pub fn sample(&self, grid: &TimeGrid, seed: NoiseSeed) -> Result<MatrixPath> {
        self.phi_from_driver(&self.sample_driver(grid, seed)?)
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Law of `Y(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialLaw {
    Constant { value: Vec<f64> },
    /// Independent coordinates `N(mean_i, std^2)`.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// `a` with probability `p`, otherwise `b`.
    TwoPoint { a: Vec<f64>, b: Vec<f64>, p: f64 },
}

impl InitialLaw {
    pub fn zero(d: usize) -> Self {
        Self::Constant { value: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { value } => value.len(),
            Self::Gaussian { mean, .. } => mean.len(),
            Self::TwoPoint { a, .. } => a.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { std, .. } if !(*std >= 0.0) => Err(invalid_param("initial std must be nonnegative")),
            Self::TwoPoint { a, b, p } => {
                if a.len() != b.len() {
                    return Err(invalid_param("two-point atoms must have equal dimension"));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid_param("two-point probability must lie in [0, 1]"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, seed: NoiseSeed) -> Vec<f64> {
        match self {
            Self::Constant { value } => value.clone(),
            Self::Gaussian { mean, std } => {
                let mut rng = seed.rng();
                mean.iter()
                    .map(|m| m + std * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            Self::TwoPoint { a, b, p } => {
                let mut rng = seed.rng();
                if rng.random::<f64>() < *p {
                    a.clone()
                } else {
                    b.clone()
                }
            }
        }
    }
}

/// Output of [`construct_martingale`].
#[derive(Debug, Clone)]
pub struct Construction {
    /// The martingale on the simulation grid.
    pub y: SampledPath,
    /// Its quadratic characteristic `Phi o L`.
    pub k: MatrixPath,
    /// The density `Phi` on the simulation grid.
    pub phi: MatrixPath,
    /// Standard Wiener process in clock time.
    pub wiener: SampledPath,
    /// Position of `L(t_j)` in the Wiener grid for each simulation node `t_j`.
    pub image_index: Vec<usize>,
}

/// Builds `Y` with `Y(0) ~ initial`, characteristic `Phi o L`, on `grid`.
///
/// Noise sources are separated by purpose: `Y(0)`, the `Phi` driver and the
/// Wiener process are drawn from independent streams of `seed`.
pub fn construct_martingale(
    initial: &InitialLaw,
    phi_gen: &PhiGenerator,
    clock: &IncreasingFn,
    grid: &TimeGrid,
    seed: NoiseSeed,
) -> Result<Construction> {
    let d = phi_gen.dim();
    if initial.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: initial.dim(),
        });
    }
    initial.validate()?;
    let clock = resample_clock(clock, grid)?;

    let y0 = initial.sample(seed.derive(purpose::INITIAL_VALUE));
    let phi = phi_gen.sample(grid, seed.derive(purpose::PHI_DRIVER))?;
    let theta = sqrt_path(&phi)?;

    let (wgrid, image_index) = clock_time_grid(&clock)?;
    let wiener = sample_brownian(d, &wgrid, seed.derive(purpose::WIENER))?;

    let nodes = grid.nodes();
    let mut h = Vec::with_capacity(wgrid.len() * d * d);
    for &tau in wgrid.nodes() {
        let s = lambda_dagger(&clock, tau.min(clock.final_value()))?;
        let k = grid.floor_index(s);
        debug_assert!(nodes[k] <= s);
        h.extend_from_slice(theta.slice(k));
    }
    let h = MatrixPath::from_parts(wgrid.clone(), d, h, PathKind::CadlagConstant);
    let x = ito_left_sum(&h, &wiener, &wgrid)?;

    let mut y = Vec::with_capacity(grid.len() * d);
    for &j in &image_index {
        y.extend(x.value(j).iter().zip(&y0).map(|(a, b)| a + b));
    }
    let y = SampledPath::from_parts(grid.clone(), d, y, PathKind::ContinuousLinear);
    let k = stieltjes_compose(&phi, &clock)?;
    Ok(Construction {
        y,
        k,
        phi,
        wiener,
        image_index,
    })
}

fn resample_clock(clock: &IncreasingFn, grid: &TimeGrid) -> Result<IncreasingFn> {
    if clock.grid().same_as(grid) {
        return Ok(clock.clone());
    }
    let span = clock.grid().t_max();
    if (grid.t_max() - span).abs() > GRID_TOL * (1.0 + span) {
        return Err(Error::GridMismatch(format!(
            "simulation grid spans [0, {}] but the clock spans [0, {span}]",
            grid.t_max()
        )));
    }
    IncreasingFn::new(grid.clone(), grid.nodes().iter().map(|&t| clock.eval(t)).collect())
}

fn sqrt_path(phi: &MatrixPath) -> Result<MatrixPath> {
    let d = phi.dim();
    let mut data = Vec::with_capacity(phi.len() * d * d);
    let mut cache: Option<(Vec<f64>, Vec<f64>)> = None;
    for i in 0..phi.len() {
        let cur = phi.slice(i);
        // Piecewise-constant densities repeat; skip the eigensolve when they do.
        if let Some((last_in, last_out)) = &cache {
            if last_in.as_slice() == cur {
                data.extend_from_slice(last_out);
                continue;
            }
        }
        let root = psd_sqrt(&PsdMatrix::from_sym_unchecked(phi.at(i)))?;
        data.extend_from_slice(root.as_sym().as_slice());
        cache = Some((cur.to_vec(), root.into_sym().into_vec()));
    }
    Ok(MatrixPath::from_parts(phi.grid().clone(), d, data, PathKind::CadlagConstant))
}

/// Union of a uniform grid on `[0, L(T_max)]` and the image points `L(t_j)`,
/// with the position of every image point.
fn clock_time_grid(clock: &IncreasingFn) -> Result<(TimeGrid, Vec<usize>)> {
    let top = clock.final_value();
    let values = clock.values();
    if top == 0.0 {
        return Ok((TimeGrid::new(vec![0.0])?, vec![0; values.len()]));
    }
    let steps = values.len() - 1;
    let tol = GRID_TOL * (1.0 + top);
    let mut nodes: Vec<f64> = Vec::with_capacity(2 * values.len());
    let mut index = Vec::with_capacity(values.len());
    let mut u = 0usize;
    let uniform = |k: usize| top * k as f64 / steps as f64;
    for &v in values {
        while u <= steps && uniform(u) < v - tol {
            push_node(&mut nodes, uniform(u), tol);
            u += 1;
        }
        while u <= steps && (uniform(u) - v).abs() <= tol {
            u += 1;
        }
        push_node(&mut nodes, v, tol);
        index.push(nodes.len() - 1);
    }
    while u <= steps {
        push_node(&mut nodes, uniform(u), tol);
        u += 1;
    }
    Ok((TimeGrid::new(nodes)?, index))
}

fn push_node(nodes: &mut Vec<f64>, v: f64, tol: f64) {
    match nodes.last() {
        Some(&last) if v <= last + tol => {}
        _ => nodes.push(v),
    }
}

/// Inverse of the construction: `w = Psi . (Y o L^+ - Y(0))` with
/// `Psi = Phi^{-1/2}`, on the grid of distinct clock values `L(t_j)`.
///
/// On each image cell `[L(t_j), L(t_{j+1}))` the whitening matrix is read at the
/// last simulation node carrying the value `L(t_j)`, which is where `L^+` lands.
/// Eigenvalues of `Phi` below `eps` are treated as zero.
pub fn recover_brownian(y: &SampledPath, phi: &MatrixPath, clock: &IncreasingFn, eps: f64) -> Result<SampledPath> {
    y.grid().require_same(phi.grid(), "recover_brownian")?;
    let clock = resample_clock(clock, y.grid())?;
    let (image, index) = clock.image_grid()?;
    let d = y.dim();
    // Last simulation node for each image node.
    let mut source = vec![0usize; image.len()];
    for (j, &pos) in index.iter().enumerate() {
        source[pos] = j;
    }
    let mut psi_cache: Option<(Vec<f64>, SymMatrix)> = None;
    let mut data = vec![0.0; image.len() * d];
    let mut inc = vec![0.0; d];
    let mut white = vec![0.0; d];
    for k in 1..image.len() {
        let from = source[k - 1];
        let to = source[k];
        let cur = phi.slice(from);
        let psi = match &psi_cache {
            Some((key, m)) if key.as_slice() == cur => m.clone(),
            _ => {
                let m = psd_inv_sqrt(&PsdMatrix::project(&phi.at(from)), eps)?;
                psi_cache = Some((cur.to_vec(), m.clone()));
                m
            }
        };
        for c in 0..d {
            inc[c] = y.value(to)[c] - y.value(from)[c];
        }
        psi.mul_vec_into(&inc, &mut white);
        for c in 0..d {
            data[k * d + c] = data[(k - 1) * d + c] + white[c];
        }
    }
    Ok(SampledPath::from_parts(image, d, data, PathKind::ContinuousLinear))
}

/// `Y + eps W_0` with `W_0` Gaussian, independent increments, `E W_0 W_0^T = L I`.
pub fn epsilon_perturb(
    path: &SampledPath,
    clock: &IncreasingFn,
    eps: f64,
    seed: NoiseSeed,
) -> Result<SampledPath> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid_param(format!("perturbation eps must be positive, got {eps}")));
    }
    let w0 = sample_indep_increments(clock, path.dim(), path.grid(), seed.derive(purpose::PERTURBATION))?;
    let data = path
        .data()
        .iter()
        .zip(w0.data())
        .map(|(y, w)| y + eps * w)
        .collect();
    Ok(SampledPath::from_parts(path.grid().clone(), path.dim(), data, path.kind()))
}

/// `K + eps^2 L I`, the characteristic of [`epsilon_perturb`]'s output.
pub fn perturbed_characteristic(k: &MatrixPath, clock: &IncreasingFn, eps: f64) -> Result<MatrixPath> {
    k.grid().require_same(clock.grid(), "perturbed_characteristic")?;
    let d = k.dim();
    let mut data = k.data().to_vec();
    for (i, lv) in clock.values().iter().enumerate() {
        for c in 0..d {
            data[i * d * d + c * d + c] += eps * eps * lv;
        }
    }
    Ok(MatrixPath::from_parts(k.grid().clone(), d, data, k.kind()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadvar::realized_qv;

    fn regime_gen() -> PhiGenerator {
        PhiGenerator::new(
            1,
            PhiModel::RegimeSwitch {
                rates: vec![2.0, 3.0],
                levels: vec![
                    PsdMatrix::new(SymMatrix::diag(&[0.5])).unwrap(),
                    PsdMatrix::new(SymMatrix::diag(&[1.0])).unwrap(),
                ],
            },
        )
        .unwrap()
    }

    #[test]
    fn brownian_starts_at_zero_and_is_deterministic() {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let a = sample_brownian(3, &grid, NoiseSeed::new(5, 1)).unwrap();
        let b = sample_brownian(3, &grid, NoiseSeed::new(5, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value(0), &[0.0, 0.0, 0.0]);
        assert!(sample_brownian(0, &grid, NoiseSeed::new(5, 1)).is_err());
    }

    #[test]
    fn brownian_terminal_moments() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let n = 10_000;
        let d = 2;
        let ends: Vec<Vec<f64>> = (0..n)
            .map(|p| sample_brownian(d, &grid, NoiseSeed::new(17, p)).unwrap().value(8).to_vec())
            .collect();
        let mut cov = SymMatrix::zeros(d);
        for c in 0..d {
            let mean = ends.iter().map(|e| e[c]).sum::<f64>() / n as f64;
            assert!(mean.abs() <= 3.0 / (n as f64).sqrt(), "mean {mean}");
        }
        for e in &ends {
            cov.add_scaled_assign(1.0 / n as f64, &SymMatrix::outer(e));
        }
        assert!(cov.sub(&SymMatrix::identity(d)).norm() <= 0.05);
    }

    #[test]
    fn independent_increments_examples() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let zero = IncreasingFn::new(grid.clone(), vec![0.0; 11]).unwrap();
        let s = sample_indep_increments(&zero, 2, &grid, NoiseSeed::new(1, 0)).unwrap();
        assert!(s.data().iter().all(|v| *v == 0.0));

        let twice = IncreasingFn::from_fn(grid.clone(), |t| 2.0 * t).unwrap();
        let n = 10_000;
        let var = (0..n)
            .map(|p| {
                sample_indep_increments(&twice, 1, &grid, NoiseSeed::new(3, p))
                    .unwrap()
                    .scalar(10)
                    .powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert!((1.9..=2.1).contains(&var), "var {var}");

        let two_point = sample_indep_increments_with(&twice, 1, &grid, NoiseSeed::new(3, 0), IncrementLaw::TwoPoint).unwrap();
        for i in 1..11 {
            assert!(((two_point.scalar(i) - two_point.scalar(i - 1)).abs() - 0.2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_identity_density_gives_brownian_qv() {
        let grid = TimeGrid::uniform(1.0, 1024).unwrap();
        let clock = IncreasingFn::identity(grid.clone());
        let gen = PhiGenerator::constant(PsdMatrix::identity(1));
        let n = 1000;
        let mean_qv = (0..n)
            .map(|p| {
                let c = construct_martingale(&InitialLaw::zero(1), &gen, &clock, &grid, NoiseSeed::new(8, p)).unwrap();
                realized_qv(&c.y, &grid).unwrap().at(grid.len() - 1).get(0, 0)
            })
            .sum::<f64>()
            / n as f64;
        assert!((0.9..=1.1).contains(&mean_qv), "{mean_qv}");
    }

    #[test]
    fn zero_density_freezes_the_path() {
        let grid = TimeGrid::uniform(2.0, 64).unwrap();
        let clock = IncreasingFn::from_fn(grid.clone(), |t| t * t).unwrap();
        let gen = PhiGenerator::constant(PsdMatrix::zeros(2));
        let init = InitialLaw::Gaussian { mean: vec![1.0, -1.0], std: 1.0 };
        let c = construct_martingale(&init, &gen, &clock, &grid, NoiseSeed::new(1, 2)).unwrap();
        let y0 = c.y.value(0).to_vec();
        for i in 0..grid.len() {
            assert_eq!(c.y.value(i), y0.as_slice());
            assert!(c.k.slice(i).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn plateau_freezes_every_path() {
        let grid = TimeGrid::uniform(3.0, 300).unwrap();
        let clock = IncreasingFn::from_fn(grid.clone(), |s| s.min(1.0) + (s - 2.0).max(0.0)).unwrap();
        let gen = PhiGenerator::constant(PsdMatrix::identity(1));
        for p in 0..50 {
            let c = construct_martingale(&InitialLaw::zero(1), &gen, &clock, &grid, NoiseSeed::new(4, p)).unwrap();
            let a = grid.index_of(1.0).unwrap();
            let b = grid.index_of(2.0).unwrap();
            for i in a..=b {
                assert_eq!(c.y.scalar(i), c.y.scalar(a));
            }
        }
    }

    #[test]
    fn martingale_increments_are_centered() {
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let clock = IncreasingFn::from_fn(grid.clone(), |t| t + t * t).unwrap();
        let gen = regime_gen();
        let n = 10_000u64;
        let probes = [(0usize, 8usize), (8, 24), (16, 32)];
        let incs: Vec<Vec<f64>> = (0..n)
            .map(|p| {
                let c = construct_martingale(&InitialLaw::zero(1), &gen, &clock, &grid, NoiseSeed::new(12, p)).unwrap();
                probes.iter().map(|&(s, t)| c.y.scalar(t) - c.y.scalar(s)).collect()
            })
            .collect();
        for k in 0..probes.len() {
            let xs: Vec<f64> = incs.iter().map(|v| v[k]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let stderr = (var / n as f64).sqrt();
            assert!(mean.abs() <= 4.0 * stderr, "probe {k}: mean {mean} stderr {stderr}");
        }
    }

    #[test]
    fn phi_is_causal_in_its_driver() {
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let map = DriverMap::new(|_, b| {
            let running_max = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            SymMatrix::diag(&[0.5 + running_max.abs().min(1.0), 1.0])
        });
        let gens = [
            PhiGenerator::new(2, PhiModel::FunctionOfDriver(map)).unwrap(),
            PhiGenerator::new(
                2,
                PhiModel::ScalarDiffusion {
                    direction: PsdMatrix::identity(2),
                    low: 0.2,
                    high: 1.0,
                    vol: 1.5,
                },
            )
            .unwrap(),
        ];
        for gen in gens {
            let driver = gen.sample_driver(&grid, NoiseSeed::new(3, 3)).unwrap();
            let mut altered = driver.data().to_vec();
            for v in altered.iter_mut().skip(51) {
                *v += 5.0;
            }
            let altered = SampledPath::from_scalars(grid.clone(), altered, driver.kind()).unwrap();
            let (a, b) = (gen.phi_from_driver(&driver).unwrap(), gen.phi_from_driver(&altered).unwrap());
            for i in 0..=50 {
                assert_eq!(a.slice(i), b.slice(i));
            }
            assert_ne!(a.slice(100), b.slice(100));
        }
    }

    #[test]
    fn function_of_driver_must_be_psd() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let gen = PhiGenerator::new(1, PhiModel::FunctionOfDriver(DriverMap::new(|_, _| SymMatrix::diag(&[-1.0])))).unwrap();
        assert!(matches!(gen.sample(&grid, NoiseSeed::new(0, 0)), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn construction_is_deterministic() {
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let clock = IncreasingFn::from_fn(grid.clone(), |t| t * t).unwrap();
        let gen = regime_gen();
        let a = construct_martingale(&InitialLaw::zero(1), &gen, &clock, &grid, NoiseSeed::new(1, 9)).unwrap();
        let b = construct_martingale(&InitialLaw::zero(1), &gen, &clock, &grid, NoiseSeed::new(1, 9)).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.k, b.k);
    }

    #[test]
    fn epsilon_perturbation() {
        let grid = TimeGrid::uniform(1.0, 512).unwrap();
        let clock = IncreasingFn::identity(grid.clone());
        let zero = SampledPath::constant(grid.clone(), &[0.0], PathKind::ContinuousLinear);
        assert!(epsilon_perturb(&zero, &clock, 0.0, NoiseSeed::new(0, 0)).is_err());

        let eps = 0.3;
        let gen = PhiGenerator::constant(PsdMatrix::identity(1));
        let n = 1000;
        let mut qv = 0.0;
        for p in 0..n {
            let c = construct_martingale(&InitialLaw::zero(1), &gen, &clock, &grid, NoiseSeed::new(2, p)).unwrap();
            let ye = epsilon_perturb(&c.y, &clock, eps, NoiseSeed::new(2, p)).unwrap();
            let diff: Vec<f64> = ye.data().iter().zip(c.y.data()).map(|(a, b)| a - b).collect();
            let diff = SampledPath::from_scalars(grid.clone(), diff, PathKind::ContinuousLinear).unwrap();
            qv += realized_qv(&diff, &grid).unwrap().at(512).get(0, 0) / n as f64;
        }
        assert!((qv - eps * eps).abs() <= 0.1 * eps * eps, "qv {qv}");
        let k = MatrixPath::constant(grid.clone(), &SymMatrix::zeros(1), PathKind::ContinuousLinear);
        let ke = perturbed_characteristic(&k, &clock, eps).unwrap();
        assert!((ke.at(512).get(0, 0) - eps * eps).abs() < 1e-12);
    }

    #[test]
    fn recovery_inverts_the_construction() {
        let grid = TimeGrid::uniform(1.0, 128).unwrap();
        for clock in [
            IncreasingFn::identity(grid.clone()),
            IncreasingFn::from_fn(grid.clone(), |t| t * t).unwrap(),
            IncreasingFn::from_fn(grid.clone(), |t| (t - 0.5).max(0.0) + 0.2 * t.min(0.25)).unwrap(),
        ] {
            let gen = regime_gen();
            let c = construct_martingale(&InitialLaw::zero(1), &gen, &clock, &grid, NoiseSeed::new(6, 1)).unwrap();
            let w = recover_brownian(&c.y, &c.phi, &clock, 1e-12).unwrap();
            let (image, index) = clock.image_grid().unwrap();
            assert_eq!(w.len(), image.len());
            for (j, &pos) in index.iter().enumerate() {
                let expected = c.wiener.scalar(c.image_index[j]);
                assert!((w.scalar(pos) - expected).abs() < 1e-10, "node {j}");
            }
        }
    }

    #[test]
    fn clock_time_grid_contains_images_and_uniform_nodes() {
        let grid = TimeGrid::uniform(3.0, 6).unwrap();
        let clock = IncreasingFn::from_fn(grid.clone(), |s| s.min(1.0) + (s - 2.0).max(0.0)).unwrap();
        let (w, idx) = clock_time_grid(&clock).unwrap();
        for (j, &v) in clock.values().iter().enumerate() {
            assert!((w.nodes()[idx[j]] - v).abs() < 1e-12);
        }
        assert!(w.nodes().len() >= 7);
        assert!((w.t_max() - 2.0).abs() < 1e-12);
    }
}
