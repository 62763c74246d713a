//! Approximation operators: left-point sums on coarsening partitions and causal
//! kernel mollification.

use rayon::prelude::*;
use serde_json::json;

use super::config::ExperimentConfig;
use super::{new_table, strictly_decreasing, Setup};
use crate::ensemble::mean_stderr;
use crate::error::Result;
use crate::integrate::{ito_left_sum, l1_distance, mollify, MollifierKernel};
use crate::linalg::SymMatrix;
use crate::path::{MatrixPath, PathKind, SampledPath, TimeGrid};
use crate::rng::{purpose, NoiseSeed};
use crate::simulate::sample_brownian;
use crate::table::ResultTable;

/// Continuous adapted integrand `R(s) = (1 + sin(3 B(s)) / 2) I`.
fn random_integrand(d: usize, grid: &TimeGrid, seed: NoiseSeed) -> Result<MatrixPath> {
    let b = sample_brownian(1, grid, seed.derive(purpose::INTEGRAND))?;
    let values = (0..grid.len())
        .map(|i| SymMatrix::scaled_identity(d, 1.0 + 0.5 * (3.0 * b.scalar(i)).sin()))
        .collect();
    MatrixPath::from_matrices(grid.clone(), values, PathKind::ContinuousLinear)
}

/// `sum over partition cells of S(right) (S(right) - S(left))`, per component, at the end.
fn right_point_sum(s: &SampledPath, positions: &[usize]) -> Vec<f64> {
    let d = s.dim();
    let mut acc = vec![0.0; d];
    for w in positions.windows(2) {
        let (l, r) = (s.value(w[0]), s.value(w[1]));
        for c in 0..d {
            acc[c] += r[c] * (r[c] - l[c]);
        }
    }
    acc
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn run_approximation(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let s = Setup::new(cfg)?;
    let p = cfg.approximation_params();
    let mut table = new_table(cfg);
    let grid = &s.grid;
    let t = cfg.grid.t_max;
    let d = cfg.dim;
    let last = grid.len() - 1;
    let partitions = p
        .levels
        .iter()
        .map(|&n| TimeGrid::uniform(t, n))
        .collect::<Result<Vec<_>>>()?;
    let n_fine = *p.levels.iter().max().expect("validated levels");
    let fine_partition = TimeGrid::uniform(t, n_fine)?;
    let fine_positions = grid.embed(&fine_partition)?;

    // Per path: squared terminal errors per level, then the anticipating sum's error.
    let per_path = (0..cfg.ensemble_size as u64)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64)> {
            let seed = NoiseSeed::new(cfg.seed, i);
            let driver = sample_brownian(d, grid, seed.derive(purpose::WIENER))?;
            let r = random_integrand(d, grid, seed)?;
            let exact = ito_left_sum(&r, &driver, grid)?;
            let errs = partitions
                .iter()
                .map(|part| Ok(sq_dist(ito_left_sum(&r, &driver, part)?.value(last), exact.value(last))))
                .collect::<Result<Vec<_>>>()?;
            let id = MatrixPath::from_matrices(
                grid.clone(),
                (0..grid.len())
                    .map(|k| SymMatrix::diag(driver.value(k)))
                    .collect(),
                PathKind::ContinuousLinear,
            )?;
            let ito = ito_left_sum(&id, &driver, grid)?;
            let neg = sq_dist(&right_point_sum(&driver, &fine_positions), ito.value(last));
            Ok((errs, neg))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut means = Vec::with_capacity(p.levels.len());
    for (j, &n) in p.levels.iter().enumerate() {
        let col: Vec<f64> = per_path.iter().map(|(e, _)| e[j]).collect();
        let (m, se) = mean_stderr(&col);
        table.push("left_sum_mse", json!({"n": n, "t": t}), m).stderr(se);
        means.push(m);
    }
    let decreasing = strictly_decreasing(&means);
    table
        .push("left_sum_mse_decreasing", json!({"levels": p.levels}), f64::from(u8::from(decreasing)))
        .pass(decreasing);

    let kernel = MollifierKernel::default();
    let step_values = grid
        .nodes()
        .iter()
        .map(|&u| SymMatrix::scaled_identity(d, if u >= p.step_time { 1.0 } else { 0.0 }))
        .collect();
    let step = MatrixPath::from_matrices(grid.clone(), step_values, PathKind::CadlagConstant)?;
    let mut l1 = Vec::with_capacity(p.mollify_levels.len());
    for &n in &p.mollify_levels {
        let e = l1_distance(&mollify(&step, n, &kernel)?, &step, t)?;
        table.push("mollifier_l1_error", json!({"n": n, "jump_time": p.step_time}), e);
        l1.push(e);
    }
    let decreasing = strictly_decreasing(&l1);
    table
        .push("mollifier_l1_decreasing", json!({"levels": p.mollify_levels}), f64::from(u8::from(decreasing)))
        .pass(decreasing);

    let ramp = MatrixPath::from_matrices(
        grid.clone(),
        grid.nodes().iter().map(|&u| SymMatrix::scaled_identity(d, u)).collect(),
        PathKind::ContinuousLinear,
    )?;
    let shift = kernel.first_moment();
    let mut worst: f64 = 0.0;
    for &n in &p.mollify_levels {
        let hn = mollify(&ramp, n, &kernel)?;
        let start = 1.0 / n as f64;
        let gap = grid
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, &u)| u >= start)
            .map(|(i, &u)| hn.at(i).sub(&SymMatrix::scaled_identity(d, u - shift / n as f64)).norm())
            .fold(0.0, f64::max);
        table.push("ramp_closed_form_gap", json!({"n": n, "shift": shift}), gap);
        worst = worst.max(gap);
    }
    table
        .push("ramp_closed_form_worst", json!({"levels": p.mollify_levels}), worst)
        .bracket(0.0, p.closed_form_tol)
        .pass(worst <= p.closed_form_tol);

    // Negative control: evaluating the integrand S at the right endpoint picks
    // up [S](t) = t, which no refinement removes.
    let neg: Vec<f64> = per_path.iter().map(|(_, e)| *e).collect();
    let (m, se) = mean_stderr(&neg);
    table
        .push("negative_right_point_mse", json!({"n": n_fine, "t": t}), m)
        .stderr(se)
        .pass(m >= p.negative_min);
    table.mark_negative_control_done();
    Ok(table)
}
