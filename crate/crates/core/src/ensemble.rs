//! Collections of independently seeded paths sharing one grid.

use rayon::prelude::*;

use crate::error::{invalid_input, Error, Result};
use crate::path::{MatrixPath, SampledPath, TimeGrid};
use crate::rng::NoiseSeed;
use crate::simulate::{construct_martingale, InitialLaw, PhiGenerator};
use crate::timechange::IncreasingFn;

/// One simulated path, optionally with its quadratic characteristic.
#[derive(Debug, Clone)]
pub struct EnsemblePath {
    pub seed: NoiseSeed,
    pub y: SampledPath,
    pub k: Option<MatrixPath>,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    grid: TimeGrid,
    dim: usize,
    paths: Vec<EnsemblePath>,
}

impl Ensemble {
    /// Checks that all paths share one grid and dimension.
    pub fn new(paths: Vec<EnsemblePath>) -> Result<Self> {
        let first = paths.first().ok_or_else(|| invalid_input("ensemble has no paths"))?;
        let grid = first.y.grid().clone();
        let dim = first.y.dim();
        for p in &paths {
            p.y.grid().require_same(&grid, "ensemble")?;
            if p.y.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.y.dim(),
                });
            }
            if let Some(k) = &p.k {
                k.grid().require_same(&grid, "ensemble characteristic")?;
                if k.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: k.dim(),
                    });
                }
            }
        }
        Ok(Self { grid, dim, paths })
    }

    /// Paths `0..size` with stream ids `0..size` of `seed`, generated in parallel.
    /// The output order, and hence every downstream reduction, is by stream id.
    pub fn generate<F>(size: usize, seed: u64, make: F) -> Result<Self>
    where
        F: Fn(NoiseSeed) -> Result<EnsemblePath> + Sync,
    {
        if size == 0 {
            return Err(invalid_input("ensemble size must be positive"));
        }
        let paths = (0..size as u64)
            .into_par_iter()
            .map(|i| make(NoiseSeed::new(seed, i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(paths)
    }

    /// Ensemble of [`construct_martingale`] outputs, each carrying its characteristic.
    pub fn construct(
        size: usize,
        seed: u64,
        initial: &InitialLaw,
        phi: &PhiGenerator,
        clock: &IncreasingFn,
        grid: &TimeGrid,
    ) -> Result<Self> {
        Self::generate(size, seed, |s| {
            let c = construct_martingale(initial, phi, clock, grid, s)?;
            Ok(EnsemblePath {
                seed: s,
                y: c.y,
                k: Some(c.k),
            })
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[EnsemblePath] {
        &self.paths
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EnsemblePath> {
        self.paths.iter()
    }

    pub fn has_characteristic(&self) -> bool {
        self.paths.iter().all(|p| p.k.is_some())
    }

    /// Applies `f` to every path in parallel, returning results in path order.
    pub fn map_paths<T: Send>(&self, f: impl Fn(&EnsemblePath) -> T + Sync) -> Vec<T> {
        self.paths.par_iter().map(&f).collect()
    }
}

impl<'a> IntoIterator for &'a Ensemble {
    type Item = &'a EnsemblePath;
    type IntoIter = std::slice::Iter<'a, EnsemblePath>;

    fn into_iter(self) -> Self::IntoIter {
        self.paths.iter()
    }
}

/// Mean of `xs` and the standard error of that mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Empirical frequency and its binomial standard error.
pub fn frequency(hits: usize, n: usize) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Empirical `q`-quantile (nearest rank on the sorted sample).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}
