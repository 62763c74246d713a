//! Realized QV against the predictable characteristic for scaled random walks
//! `Y_n = sqrt(Phi) . S_n` as the step count `n` grows.

use rand::Rng;
use serde_json::json;

use super::config::ExperimentConfig;
use super::{new_table, sqrt_path, strictly_decreasing, sub_seed, Setup};
use crate::ensemble::{frequency, mean_stderr, Ensemble, EnsemblePath};
use crate::error::Result;
use crate::integrate::{ito_left_sum, stieltjes_compose};
use crate::path::{PathKind, SampledPath, TimeGrid};
use crate::quadvar::qv_discrepancy;
use crate::rng::{purpose, NoiseSeed};
use crate::simulate::sample_indep_increments_with;
use crate::table::ResultTable;
use crate::timechange::IncreasingFn;

const TAG_LEVEL: u64 = 1;
const TAG_NEGATIVE: u64 = 2;

/// Compensated Poisson-type walk: each step jumps by 1 with probability `dt`,
/// minus its mean. Jumps never shrink, so `[S] - <S>` does not vanish.
fn compensated_jump_walk(d: usize, grid: &TimeGrid, seed: NoiseSeed) -> SampledPath {
    let mut rng = seed.rng();
    let mut data = vec![0.0; grid.len() * d];
    for i in 1..grid.len() {
        let dt = grid.step(i - 1).min(1.0);
        for c in 0..d {
            let jump = if rng.random::<f64>() < dt { 1.0 } else { 0.0 };
            data[i * d + c] = data[(i - 1) * d + c] + jump - dt;
        }
    }
    SampledPath::new(grid.clone(), d, data, PathKind::CadlagConstant).expect("walk data has grid shape")
}

pub fn run_lemma4_convergence(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let s = Setup::new(cfg)?;
    let p = cfg.lemma4_params();
    let mut table = new_table(cfg);
    let t = cfg.grid.t_max;

    let build = |n: usize, base: u64, jump_walk: bool| -> Result<Vec<f64>> {
        let grid = TimeGrid::uniform(t, n)?;
        let clock = cfg.clock.build(&grid)?;
        let ens = Ensemble::generate(cfg.ensemble_size, base, |seed| {
            let phi = s.phi.sample(&grid, seed)?;
            let walk = if jump_walk {
                compensated_jump_walk(cfg.dim, &grid, seed.derive(purpose::WALK))
            } else {
                sample_indep_increments_with(&clock, cfg.dim, &grid, seed.derive(purpose::WALK), p.increment_law)?
            };
            let y = ito_left_sum(&sqrt_path(&phi)?, &walk, &grid)?.with_kind(PathKind::CadlagConstant);
            let k = if jump_walk {
                // Jump variance is dt (1 - dt) per step, not the clock increment.
                let mut acc = 0.0;
                let mut var = vec![0.0];
                for i in 1..grid.len() {
                    let dt = grid.step(i - 1).min(1.0);
                    acc += dt * (1.0 - dt);
                    var.push(acc);
                }
                stieltjes_compose(&phi, &IncreasingFn::new(grid.clone(), var)?)?
            } else {
                stieltjes_compose(&phi, &clock)?
            };
            Ok(EnsemblePath { seed, y, k: Some(k) })
        })?;
        ens.map_paths(|path| qv_discrepancy(&path.y, path.k.as_ref().expect("set above"), t))
            .into_iter()
            .collect()
    };

    let mut freqs = Vec::with_capacity(p.levels.len());
    for &n in &p.levels {
        let disc = build(n, sub_seed(cfg.seed, TAG_LEVEL, n as u64), false)?;
        let (f, se) = frequency(disc.iter().filter(|&&v| v > p.eps).count(), disc.len());
        let (mean, mean_se) = mean_stderr(&disc);
        table
            .push("discrepancy_exceedance", json!({"n": n, "eps": p.eps, "t": t}), f)
            .stderr(se);
        table
            .push("mean_sup_discrepancy", json!({"n": n, "t": t}), mean)
            .stderr(mean_se);
        freqs.push(f);
    }
    let decreasing = strictly_decreasing(&freqs);
    table
        .push("exceedance_strictly_decreasing", json!({"levels": p.levels}), f64::from(u8::from(decreasing)))
        .pass(decreasing);
    let last = *freqs.last().expect("at least two levels");
    table
        .push("final_exceedance", json!({"n": p.levels.last(), "eps": p.eps}), last)
        .bracket(0.0, p.final_max)
        .pass(last <= p.final_max);

    // Negative control: unit jumps at the finest level keep the discrepancy large.
    let n = *p.levels.last().expect("at least two levels");
    let disc = build(n, sub_seed(cfg.seed, TAG_NEGATIVE, n as u64), true)?;
    let (f, _) = frequency(disc.iter().filter(|&&v| v > p.eps).count(), disc.len());
    table
        .push("negative_jump_walk_exceedance", json!({"n": n, "eps": p.eps}), f)
        .bracket(p.negative_min, 1.0)
        .pass(f >= p.negative_min);
    table.mark_negative_control_done();
    Ok(table)
}
