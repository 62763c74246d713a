//! Two-sample comparison of finite-dimensional distributions: energy-distance
//! permutation test and Kolmogorov-Smirnov tests.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ensemble::Ensemble;
use crate::error::{invalid_input, Error, Result};
use crate::rng::{purpose, NoiseSeed};

/// Fewest permutations accepted by [`energy_test`].
pub const MIN_PERMUTATIONS: usize = 199;

/// Per-path rows `(Y(t_1), ..., Y(t_l))`, optionally followed by
/// `(tr K(t_1), ..., tr K(t_l))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FddSample {
    pub times: Vec<f64>,
    width: usize,
    data: Vec<f64>,
}

impl FddSample {
    pub fn from_rows(times: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or_else(|| invalid_input("sample has no rows"))?;
        if width == 0 {
            return Err(invalid_input("rows must be nonempty"));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: r.len(),
            });
        }
        Ok(Self {
            times,
            width,
            data: rows.concat(),
        })
    }

    /// One-column sample.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid_input("sample has no rows"));
        }
        Ok(Self {
            times: Vec::new(),
            width: 1,
            data: values.to_vec(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.data[i * self.width + c]).collect()
    }
}

/// Extracts rows at `times`, which must be grid nodes.
pub fn fdd_sample(ensemble: &Ensemble, times: &[f64], include_characteristic: bool) -> Result<FddSample> {
    let grid = ensemble.grid();
    let idx = times
        .iter()
        .map(|&t| grid.require_index(t))
        .collect::<Result<Vec<_>>>()?;
    if include_characteristic && !ensemble.has_characteristic() {
        return Err(invalid_input("characteristic requested but not carried by the ensemble"));
    }
    let d = ensemble.dim();
    let width = idx.len() * d + if include_characteristic { idx.len() } else { 0 };
    let mut data = Vec::with_capacity(width * ensemble.len());
    for p in ensemble {
        for &i in &idx {
            data.extend_from_slice(p.y.value(i));
        }
        if include_characteristic {
            let k = p.k.as_ref().expect("checked above");
            data.extend(idx.iter().map(|&i| k.trace_at(i)));
        }
    }
    Ok(FddSample {
        times: times.to_vec(),
        width,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn canonical_order(a: &FddSample, b: &FddSample) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Energy statistic `2 E|a - b| - E|a - a'| - E|b - b'|` (V-statistic form) with a
/// permutation p-value `(1 + #{perm >= observed}) / (n_perm + 1)`.
///
/// The two samples are pooled in a canonical order, so swapping the arguments
/// reproduces the same statistic and p-value bit for bit. Permutation `k` is
/// drawn from stream `k` of `seed`, which makes the p-value independent of the
/// number of worker threads.
pub fn energy_test(a: &FddSample, b: &FddSample, n_perm: usize, seed: NoiseSeed) -> Result<TestResult> {
    if a.width != b.width {
        return Err(Error::DimensionMismatch {
            expected: a.width,
            got: b.width,
        });
    }
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::StatisticalPower(format!(
            "{n_perm} permutations requested, at least {MIN_PERMUTATIONS} needed"
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(invalid_input("energy test needs nonempty samples"));
    }
    let (first, second) = if canonical_order(a, b).is_gt() { (b, a) } else { (a, b) };
    let na = first.len();
    let n = na + second.len();
    let w = a.width;
    let pooled: Vec<&[f64]> = (0..na)
        .map(|i| first.row(i))
        .chain((0..second.len()).map(|i| second.row(i)))
        .collect();
    let dist: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pooled = &pooled;
            (0..n).map(move |j| {
                (0..w)
                    .map(|c| (pooled[i][c] - pooled[j][c]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .collect();
    let total: f64 = dist.iter().sum();

    let labels: Vec<bool> = (0..n).map(|i| i < na).collect();
    let observed = energy_from_labels(&dist, &labels, na, total);
    let base = seed.derive(purpose::PERMUTATION);
    let exceed: usize = (0..n_perm as u64)
        .into_par_iter()
        .map(|k| {
            let mut perm = labels.clone();
            perm.shuffle(&mut base.with_stream(k).rng());
            usize::from(energy_from_labels(&dist, &perm, na, total) >= observed)
        })
        .sum();
    Ok(TestResult {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
    })
}

/// Energy statistic alone, without permutations.
pub fn energy_statistic(a: &FddSample, b: &FddSample) -> Result<f64> {
    if a.width != b.width {
        return Err(Error::DimensionMismatch {
            expected: a.width,
            got: b.width,
        });
    }
    if a.is_empty() || b.is_empty() {
        return Err(invalid_input("energy statistic needs nonempty samples"));
    }
    let (first, second) = if canonical_order(a, b).is_gt() { (b, a) } else { (a, b) };
    let mean_dist = |x: &FddSample, y: &FddSample| -> f64 {
        let sum: f64 = (0..x.len())
            .into_par_iter()
            .map(|i| {
                let xi = x.row(i);
                (0..y.len())
                    .map(|j| xi.iter().zip(y.row(j)).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        sum / (x.len() * y.len()) as f64
    };
    Ok(2.0 * mean_dist(first, second) - mean_dist(first, first) - mean_dist(second, second))
}

fn energy_from_labels(dist: &[f64], in_a: &[bool], na: usize, total: f64) -> f64 {
    let n = in_a.len();
    let nb = n - na;
    let mask: Vec<f64> = in_a.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
    let mut s_aa = 0.0;
    let mut s_ab = 0.0;
    for (i, row) in dist.chunks_exact(n).enumerate() {
        let r: f64 = row.iter().zip(&mask).map(|(d, m)| d * m).sum();
        if in_a[i] {
            s_aa += r;
        } else {
            s_ab += r;
        }
    }
    let s_bb = total - s_aa - 2.0 * s_ab;
    let (na, nb) = (na as f64, nb as f64);
    2.0 * s_ab / (na * nb) - s_aa / (na * na) - s_bb / (nb * nb)
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(stat: f64, effective_n: f64) -> f64 {
    let en = effective_n.sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * stat)
}

/// Two-sample Kolmogorov-Smirnov statistic with its asymptotic p-value.
pub fn ks_1d(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid_input("KS test needs nonempty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid_input("KS test got NaN"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut stat = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        stat = stat.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(TestResult {
        statistic: stat,
        p_value: ks_p_value(stat, n * m / (n + m)),
    })
}

/// One-sample Kolmogorov-Smirnov test against `N(mean, sd^2)`.
pub fn ks_one_sample_normal(x: &[f64], mean: f64, sd: f64) -> Result<TestResult> {
    if x.is_empty() {
        return Err(invalid_input("KS test needs a nonempty sample"));
    }
    let law = Normal::new(mean, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let stat = v
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = law.cdf(xi);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(TestResult {
        statistic: stat,
        p_value: ks_p_value(stat, n),
    })
}
