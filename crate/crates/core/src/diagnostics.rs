//! Path-space functionals and ensemble diagnostics for relative compactness,
//! uniform integrability and maximal inequalities.
//!
//! Tightness is a statement about infinite sequences; everything here reports
//! finite-sample exceedance frequencies and trend flags, never a yes/no answer.

use std::collections::VecDeque;

use serde_json::json;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::ensemble::{frequency, mean_stderr, Ensemble};
use crate::error::{invalid_param, Error, Result};
use crate::path::{PathKind, SampledPath, GRID_TOL};
use crate::table::ResultTable;

/// Default exceedance levels for the modulus criterion.
pub const DEFAULT_EPS_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.5];
/// Smallest ensemble accepted by the ensemble diagnostics.
pub const MIN_ENSEMBLE: usize = 100;

/// `sup |f(v) - f(u)|` over `(v - r)+ <= u <= v <= t`, evaluated on the sampled
/// representation: interpolated paths use grid-node pairs, piecewise-constant
/// paths also count a node whose constant stretch reaches into `[v - r, v]`
/// (so a jump is seen by every window that contains it).
pub fn delta_u(f: &SampledPath, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) || !(r > 0.0) {
        return Err(invalid_param(format!("delta_u needs t > 0 and r > 0, got t={t}, r={r}")));
    }
    let nodes = f.grid().nodes();
    let last = f.grid().floor_index(t + GRID_TOL * (1.0 + t));
    let cadlag = f.kind() == PathKind::CadlagConstant;
    // Node `i` has left the window of node `v`.
    let expired = |i: usize, v: usize| {
        let floor = nodes[v] - r;
        let tol = GRID_TOL * (1.0 + nodes[v]);
        if cadlag {
            i < v && nodes[i + 1] <= floor + tol
        } else {
            nodes[i] < floor - tol
        }
    };
    if f.dim() == 1 {
        return Ok(delta_u_scalar(f.data(), last, expired));
    }
    let mut best = 0.0f64;
    let mut lo = 0;
    for v in 0..=last {
        while expired(lo, v) {
            lo += 1;
        }
        let fv = f.value(v);
        for u in lo..v {
            let dist = f
                .value(u)
                .iter()
                .zip(fv)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            best = best.max(dist);
        }
    }
    Ok(best.sqrt())
}

/// Sliding-window max and min with monotone deques.
fn delta_u_scalar(x: &[f64], last: usize, expired: impl Fn(usize, usize) -> bool) -> f64 {
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best = 0.0f64;
    for v in 0..=last {
        while maxq.back().is_some_and(|&i| x[i] <= x[v]) {
            maxq.pop_back();
        }
        maxq.push_back(v);
        while minq.back().is_some_and(|&i| x[i] >= x[v]) {
            minq.pop_back();
        }
        minq.push_back(v);
        while expired(maxq[0], v) {
            maxq.pop_front();
        }
        while expired(minq[0], v) {
            minq.pop_front();
        }
        best = best.max(x[maxq[0]] - x[v]).max(x[v] - x[minq[0]]);
    }
    best
}

/// Largest node-to-node increment (Euclidean norm) up to time `t`. For
/// piecewise-constant paths these are the jumps; for interpolated paths it is a proxy.
pub fn max_jump(f: &SampledPath, t: f64) -> f64 {
    let last = f.grid().floor_index(t + GRID_TOL * (1.0 + t.abs()));
    (1..=last).map(|i| f.increment_norm(i)).fold(0.0, f64::max)
}

/// Truncated locally uniform distance with its tail bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricR {
    /// `sum_{m=1}^{ceil(T_max)} 2^-m (1 ^ sup_{s<=m} |f(s) - g(s)|)`.
    pub value: f64,
    /// `value + 2^-ceil(T_max)`, an upper bound for the untruncated series.
    pub upper: f64,
}

pub fn metric_r(f: &SampledPath, g: &SampledPath) -> Result<MetricR> {
    f.grid().require_same(g.grid(), "metric_r")?;
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: g.dim(),
        });
    }
    let nodes = f.grid().nodes();
    let terms = (f.grid().t_max() - GRID_TOL).ceil().max(1.0) as i32;
    let mut value = 0.0;
    let mut sup = 0.0f64;
    let mut i = 0;
    for m in 1..=terms {
        let horizon = m as f64 + GRID_TOL * (1.0 + m as f64);
        while i < nodes.len() && nodes[i] <= horizon {
            let d = f
                .value(i)
                .iter()
                .zip(g.value(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            sup = sup.max(d);
            i += 1;
        }
        value += 0.5f64.powi(m) * sup.min(1.0);
    }
    Ok(MetricR {
        value,
        upper: value + 0.5f64.powi(terms),
    })
}

/// One exceedance frequency cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceCell {
    pub index: usize,
    pub threshold: f64,
    pub eps: Option<f64>,
    pub frequency: f64,
    pub stderr: f64,
}

/// Exceedance surfaces for the two relative-compactness criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    /// `P{sup_{s<=t} |Y_n(s)| > N}` per `(n, N)`.
    pub sup_cells: Vec<ExceedanceCell>,
    /// `P{Delta_U(Y_n; t, r) > eps}` per `(n, r, eps)`.
    pub modulus_cells: Vec<ExceedanceCell>,
    /// Per `N`, the largest frequency over the upper half of the index range.
    pub sup_tail: Vec<(f64, f64)>,
    /// Per `(eps, r)`, the largest frequency over the upper half of the index range.
    pub modulus_tail: Vec<(f64, f64, f64)>,
    /// `sup_tail` nonincreasing in `N`.
    pub sup_decreasing_in_n: bool,
    /// `modulus_tail` nonincreasing as `r` shrinks, for every `eps`.
    pub modulus_decreasing_in_r: bool,
}

impl TightnessReport {
    pub fn append_to(&self, table: &mut ResultTable, family: &str) {
        for c in &self.sup_cells {
            table
                .push("sup_exceedance", json!({"family": family, "n": c.index, "N": c.threshold}), c.frequency)
                .stderr(c.stderr);
        }
        for c in &self.modulus_cells {
            table
                .push(
                    "modulus_exceedance",
                    json!({"family": family, "n": c.index, "r": c.threshold, "eps": c.eps}),
                    c.frequency,
                )
                .stderr(c.stderr);
        }
        for &(n, v) in &self.sup_tail {
            table.push("sup_exceedance_tail", json!({"family": family, "N": n}), v);
        }
        for &(eps, r, v) in &self.modulus_tail {
            table.push("modulus_exceedance_tail", json!({"family": family, "r": r, "eps": eps}), v);
        }
    }
}

/// Exceedance frequencies of both criteria for an indexed family of ensembles.
pub fn tightness_report(
    ensembles: &[(usize, &Ensemble)],
    t: f64,
    n_grid: &[f64],
    r_grid: &[f64],
    eps_grid: &[f64],
) -> Result<TightnessReport> {
    if ensembles.len() < 2 {
        return Err(Error::StatisticalPower("tightness needs at least two ensemble indices".into()));
    }
    if let Some((n, e)) = ensembles.iter().find(|(_, e)| e.len() < MIN_ENSEMBLE) {
        return Err(Error::StatisticalPower(format!(
            "ensemble {n} has {} paths, fewer than {MIN_ENSEMBLE}",
            e.len()
        )));
    }
    let mut r_sorted = r_grid.to_vec();
    r_sorted.sort_by(f64::total_cmp);
    let mut n_sorted = n_grid.to_vec();
    n_sorted.sort_by(f64::total_cmp);

    let mut sup_cells = Vec::new();
    let mut modulus_cells = Vec::new();
    for &(index, ens) in ensembles {
        let last = ens.grid().floor_index(t + GRID_TOL * (1.0 + t));
        let sups = ens.map_paths(|p| (0..=last).map(|i| p.y.norm_at(i)).fold(0.0, f64::max));
        let moduli: Vec<Vec<f64>> = ens.map_paths(|p| {
            r_sorted
                .iter()
                .map(|&r| delta_u(&p.y, t, r))
                .collect::<Result<Vec<_>>>()
        })
        .into_iter()
        .collect::<Result<_>>()?;
        for &big_n in &n_sorted {
            let (f, s) = frequency(sups.iter().filter(|&&v| v > big_n).count(), sups.len());
            sup_cells.push(ExceedanceCell {
                index,
                threshold: big_n,
                eps: None,
                frequency: f,
                stderr: s,
            });
        }
        for (ri, &r) in r_sorted.iter().enumerate() {
            for &eps in eps_grid {
                let (f, s) = frequency(moduli.iter().filter(|m| m[ri] > eps).count(), moduli.len());
                modulus_cells.push(ExceedanceCell {
                    index,
                    threshold: r,
                    eps: Some(eps),
                    frequency: f,
                    stderr: s,
                });
            }
        }
    }

    let mut indices: Vec<usize> = ensembles.iter().map(|(n, _)| *n).collect();
    indices.sort_unstable();
    let cutoff = indices[indices.len() / 2];
    let tail_max = |cells: &[ExceedanceCell], pick: &dyn Fn(&ExceedanceCell) -> bool| {
        cells
            .iter()
            .filter(|c| c.index >= cutoff && pick(c))
            .map(|c| c.frequency)
            .fold(0.0, f64::max)
    };
    let sup_tail: Vec<(f64, f64)> = n_sorted
        .iter()
        .map(|&big_n| (big_n, tail_max(&sup_cells, &|c| c.threshold == big_n)))
        .collect();
    let mut modulus_tail = Vec::new();
    for &eps in eps_grid {
        for &r in &r_sorted {
            modulus_tail.push((eps, r, tail_max(&modulus_cells, &|c| c.threshold == r && c.eps == Some(eps))));
        }
    }
    let sup_decreasing_in_n = sup_tail.windows(2).all(|w| w[1].1 <= w[0].1);
    // Within one eps block r increases, so frequencies must not decrease.
    let modulus_decreasing_in_r = modulus_tail
        .windows(2)
        .all(|w| w[0].0 != w[1].0 || w[0].2 <= w[1].2);
    Ok(TightnessReport {
        sup_cells,
        modulus_cells,
        sup_tail,
        modulus_tail,
        sup_decreasing_in_n,
        modulus_decreasing_in_r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UiPoint {
    pub level: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// `L -> E[|Y(t) - Y(0)|^2; |Y(t) - Y(0)|^2 > L]` on `levels`.
pub fn ui_statistic(ensemble: &Ensemble, t: f64, levels: &[f64]) -> Result<Vec<UiPoint>> {
    if ensemble.len() < MIN_ENSEMBLE {
        return Err(Error::StatisticalPower(format!(
            "uniform integrability curve needs at least {MIN_ENSEMBLE} paths"
        )));
    }
    let i = ensemble.grid().floor_index(t + GRID_TOL * (1.0 + t));
    let sq: Vec<f64> = ensemble
        .iter()
        .map(|p| {
            p.y.value(i)
                .iter()
                .zip(p.y.value(0))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    Ok(levels
        .iter()
        .map(|&level| {
            let tail: Vec<f64> = sq.iter().map(|&x| if x > level { x } else { 0.0 }).collect();
            let (mean, stderr) = mean_stderr(&tail);
            UiPoint { level, mean, stderr }
        })
        .collect())
}

/// `E[Z^2; Z^2 > L]` for `Z ~ N(0, 1)`: `2 (c phi(c) + 1 - Phi(c))`, `c = sqrt(L)`.
pub fn gaussian_tail_second_moment(level: f64) -> f64 {
    let n = Normal::standard();
    let c = level.max(0.0).sqrt();
    2.0 * (c * n.pdf(c) + n.sf(c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LenglartCheck {
    /// Frequency of `sup_{s<=t} |Y(s) - Y(0)| >= l`.
    pub lhs: f64,
    /// `a / l^2 + ` frequency of `tr K(t) >= a`.
    pub rhs: f64,
    /// Combined binomial standard error of the two frequencies.
    pub stderr: f64,
    /// `lhs <= rhs + 4 stderr`.
    pub holds: bool,
}

/// Empirical sides of `P{sup |Y| >= l} <= a / l^2 + P{tr K(t) >= a}`.
///
/// The supremum is taken over `Y - Y(0)`, the martingale the inequality is about;
/// for ensembles started at zero this is `sup |Y|`.
pub fn lenglart_check(ensemble: &Ensemble, t: f64, l: f64, a: f64) -> Result<LenglartCheck> {
    if !(l > 0.0) || !(a > 0.0) {
        return Err(invalid_param(format!("Lenglart check needs l > 0 and a > 0, got l={l}, a={a}")));
    }
    if !ensemble.has_characteristic() {
        return Err(Error::InvalidInput("Lenglart check needs the characteristic of every path".into()));
    }
    let last = ensemble.grid().floor_index(t + GRID_TOL * (1.0 + t));
    let n = ensemble.len();
    let mut hits_l = 0;
    let mut hits_a = 0;
    for p in ensemble {
        let y0 = p.y.value(0);
        let sup = (0..=last)
            .map(|i| {
                p.y.value(i)
                    .iter()
                    .zip(y0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
            .sqrt();
        if sup >= l {
            hits_l += 1;
        }
        if p.k.as_ref().expect("checked above").trace_at(last) >= a {
            hits_a += 1;
        }
    }
    let (lhs, se_l) = frequency(hits_l, n);
    let (pa, se_a) = frequency(hits_a, n);
    let rhs = a / (l * l) + pa;
    let stderr = (se_l * se_l + se_a * se_a).sqrt();
    Ok(LenglartCheck {
        lhs,
        rhs,
        stderr,
        holds: lhs <= rhs + 4.0 * stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EnsemblePath;
    use crate::linalg::PsdMatrix;
    use crate::path::{PathKind, TimeGrid};
    use crate::rng::NoiseSeed;
    use crate::simulate::{sample_brownian, InitialLaw, PhiGenerator};
    use crate::timechange::IncreasingFn;
    use proptest::prelude::*;

    fn scalar(grid: &TimeGrid, f: impl Fn(f64) -> f64, kind: PathKind) -> SampledPath {
        SampledPath::from_scalars(grid.clone(), grid.nodes().iter().map(|&t| f(t)).collect(), kind).unwrap()
    }

    fn brute_delta_u(f: &SampledPath, t: f64, r: f64) -> f64 {
        let nodes = f.grid().nodes();
        let mut best = 0.0f64;
        for v in 0..nodes.len() {
            if nodes[v] > t + 1e-12 {
                break;
            }
            for u in 0..=v {
                let reach = if f.kind() == PathKind::CadlagConstant && u < v { nodes[u + 1] } else { nodes[u] };
                let inside = if f.kind() == PathKind::CadlagConstant && u < v {
                    reach > nodes[v] - r + 1e-9 * (1.0 + nodes[v])
                } else {
                    reach >= nodes[v] - r - 1e-9 * (1.0 + nodes[v])
                };
                if inside {
                    let d: f64 = f.value(u).iter().zip(f.value(v)).map(|(a, b)| (a - b).powi(2)).sum();
                    best = best.max(d.sqrt());
                }
            }
        }
        best
    }

    fn brownian_ensemble(size: usize, steps: usize, seed: u64) -> Ensemble {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let clock = IncreasingFn::identity(grid.clone());
        Ensemble::construct(size, seed, &InitialLaw::zero(1), &PhiGenerator::constant(PsdMatrix::identity(1)), &clock, &grid)
            .unwrap()
    }

    #[test]
    fn delta_u_examples() {
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let c = scalar(&grid, |_| 3.0, PathKind::ContinuousLinear);
        assert_eq!(delta_u(&c, 1.0, 0.3).unwrap(), 0.0);
        let lin = scalar(&grid, |s| s, PathKind::ContinuousLinear);
        assert!((delta_u(&lin, 1.0, 0.2).unwrap() - 0.2).abs() < 1e-12);
        let step = scalar(&grid, |s| if s >= 0.505 { 1.0 } else { 0.0 }, PathKind::CadlagConstant);
        for r in [0.001, 0.01, 0.5] {
            assert!(delta_u(&step, 1.0, r).unwrap() >= 1.0);
        }
        assert!(delta_u(&lin, 0.0, 0.1).is_err());
        assert!(delta_u(&lin, 1.0, -0.1).is_err());
    }

    #[test]
    fn delta_u_fast_path_matches_brute_force() {
        let grid = TimeGrid::uniform(1.0, 200).unwrap();
        for p in 0..20 {
            let w = sample_brownian(1, &grid, NoiseSeed::new(1, p)).unwrap();
            let w2 = sample_brownian(2, &grid, NoiseSeed::new(2, p)).unwrap();
            let steps = [w.clone().with_kind(PathKind::CadlagConstant), w2.clone().with_kind(PathKind::CadlagConstant)];
            for (t, r) in [(1.0, 0.05), (0.5, 0.2), (0.73, 0.011), (1.0, 0.001)] {
                for f in [&w, &w2, &steps[0], &steps[1]] {
                    assert!((delta_u(f, t, r).unwrap() - brute_delta_u(f, t, r)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn max_jump_examples() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let step = scalar(&grid, |s| if s >= 0.45 { 1.0 } else { 0.0 }, PathKind::CadlagConstant);
        assert_eq!(max_jump(&step, 1.0), 1.0);
        assert_eq!(max_jump(&step, 0.3), 0.0);
        let c = scalar(&grid, |_| 2.0, PathKind::CadlagConstant);
        assert_eq!(max_jump(&c, 1.0), 0.0);

        let fine = TimeGrid::uniform(1.0, 1 << 12).unwrap();
        let small = (0..1000)
            .filter(|&p| max_jump(&sample_brownian(1, &fine, NoiseSeed::new(9, p)).unwrap(), 1.0) < 0.2)
            .count();
        assert!(small >= 990, "{small}");
    }

    #[test]
    fn metric_r_examples() {
        let g1 = TimeGrid::uniform(1.0, 10).unwrap();
        let a = scalar(&g1, |_| 0.0, PathKind::ContinuousLinear);
        let b = scalar(&g1, |s| 3.0 * s, PathKind::ContinuousLinear);
        assert_eq!(metric_r(&a, &a).unwrap().value, 0.0);
        let m = metric_r(&a, &b).unwrap();
        assert_eq!(m.value, 0.5);
        assert_eq!(m.upper, 1.0);

        let g2 = TimeGrid::uniform(2.0, 20).unwrap();
        let c = scalar(&g2, |_| 0.0, PathKind::ContinuousLinear);
        let d = scalar(&g2, |_| 0.5, PathKind::ContinuousLinear);
        assert!((metric_r(&c, &d).unwrap().value - 0.375).abs() < 1e-15);
        assert!(metric_r(&a, &c).is_err());
    }

    proptest! {
        #[test]
        fn metric_r_is_a_metric(
            x in prop::collection::vec(-2.0f64..2.0, 31),
            y in prop::collection::vec(-2.0f64..2.0, 31),
            z in prop::collection::vec(-2.0f64..2.0, 31),
        ) {
            let grid = TimeGrid::uniform(3.0, 30).unwrap();
            let mk = |v: Vec<f64>| SampledPath::from_scalars(grid.clone(), v, PathKind::ContinuousLinear).unwrap();
            let (f, g, h) = (mk(x), mk(y), mk(z));
            let fg = metric_r(&f, &g).unwrap().value;
            prop_assert_eq!(fg, metric_r(&g, &f).unwrap().value);
            let fh = metric_r(&f, &h).unwrap().value;
            let hg = metric_r(&h, &g).unwrap().value;
            prop_assert!(fg <= fh + hg + 1e-12);
            prop_assert!((0.0..=1.0).contains(&fg));
        }

        #[test]
        fn delta_u_is_monotone_and_bounded(
            x in prop::collection::vec(-3.0f64..3.0, 41),
            t1 in 0.05f64..1.0, dt in 0.0f64..1.0,
            r1 in 0.01f64..1.0, dr in 0.0f64..1.0,
        ) {
            let grid = TimeGrid::uniform(2.0, 40).unwrap();
            let f = SampledPath::from_scalars(grid.clone(), x, PathKind::ContinuousLinear).unwrap();
            let base = delta_u(&f, t1, r1).unwrap();
            prop_assert!(delta_u(&f, t1 + dt, r1).unwrap() >= base);
            prop_assert!(delta_u(&f, t1, r1 + dr).unwrap() >= base);
            let last = grid.floor_index(t1 + 1e-9);
            let sup = (0..=last).map(|i| f.scalar(i).abs()).fold(0.0, f64::max);
            prop_assert!(base <= 2.0 * sup + 1e-12);
        }
    }

    #[test]
    fn tightness_report_on_same_law_family() {
        let e1 = brownian_ensemble(300, 128, 1);
        let e2 = brownian_ensemble(300, 128, 2);
        let e3 = brownian_ensemble(300, 128, 3);
        let fam = [(1usize, &e1), (2, &e2), (3, &e3)];
        let rep = tightness_report(&fam, 1.0, &[0.5, 1.0, 2.0, 3.0], &[0.01, 0.05, 0.2], &DEFAULT_EPS_GRID).unwrap();
        assert!(rep.sup_decreasing_in_n);
        assert!(rep.modulus_decreasing_in_r);
        // P{sup |W| > 2} = 2 P{|W(1)| > 2} ~ 0.091 (reflection principle); grid maxima sit slightly below.
        for c in rep.sup_cells.iter().filter(|c| c.threshold == 2.0) {
            assert!((c.frequency - 0.091).abs() < 4.0 * c.stderr + 0.02, "{c:?}");
        }
        assert!(tightness_report(&fam[..1], 1.0, &[1.0], &[0.1], &[0.1]).is_err());
    }

    #[test]
    fn tightness_report_constant_family_is_zero() {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let ens = Ensemble::generate(100, 0, |s| {
            Ok(EnsemblePath {
                seed: s,
                y: SampledPath::constant(grid.clone(), &[0.0], PathKind::ContinuousLinear),
                k: None,
            })
        })
        .unwrap();
        let rep = tightness_report(&[(1, &ens), (2, &ens)], 1.0, &[0.1, 1.0], &[0.1, 0.5], &DEFAULT_EPS_GRID).unwrap();
        assert!(rep.sup_cells.iter().chain(&rep.modulus_cells).all(|c| c.frequency == 0.0));
    }

    #[test]
    fn ui_curve_matches_gaussian_tail() {
        let ens = brownian_ensemble(4000, 64, 5);
        let levels = [0.0, 0.5, 1.0, 2.0, 4.0, 6.0];
        for p in ui_statistic(&ens, 1.0, &levels).unwrap() {
            let exact = gaussian_tail_second_moment(p.level);
            assert!((p.mean - exact).abs() <= 4.0 * p.stderr.max(1e-3), "{p:?} vs {exact}");
        }
        assert!((gaussian_tail_second_moment(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ui_curve_vanishes_above_bound() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let ens = Ensemble::generate(100, 0, |s| {
            let v = (s.stream_id % 7) as f64 / 7.0;
            Ok(EnsemblePath {
                seed: s,
                y: SampledPath::from_scalars(grid.clone(), vec![0.0, v, -v, v, v], PathKind::ContinuousLinear)?,
                k: None,
            })
        })
        .unwrap();
        let curve = ui_statistic(&ens, 1.0, &[1.0, 2.0]).unwrap();
        assert!(curve.iter().all(|p| p.mean == 0.0));
    }

    #[test]
    fn lenglart_examples() {
        let ens = brownian_ensemble(1000, 256, 8);
        let c = lenglart_check(&ens, 1.0, 10.0, 2.0).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!((c.rhs - 0.02).abs() < 1e-12);
        assert!(c.holds);
        // tr K(1) = 1 deterministically, so a above it leaves only a / l^2.
        let c = lenglart_check(&ens, 1.0, 2.0, 1.5).unwrap();
        assert_eq!(c.rhs, 1.5 / 4.0);
        assert!(c.holds);
        assert!(lenglart_check(&ens, 1.0, 0.0, 1.0).is_err());
        assert!(lenglart_check(&ens, 1.0, 1.0, -1.0).is_err());
    }
}
