//! Functional limit for `X_n = X(0) + phi_n . M_n` with `M_n` a coin-flip walk
//! and `phi_n` predictable, against the limit built by the construction.

use rayon::prelude::*;
use serde_json::json;

use super::config::ExperimentConfig;
use super::{new_table, sqrt_path, strictly_decreasing, sub_seed, Setup};
use crate::compare::{energy_test, fdd_sample};
use crate::diagnostics::max_jump;
use crate::ensemble::{mean_stderr, Ensemble, EnsemblePath};
use crate::error::Result;
use crate::integrate::ito_left_sum;
use crate::linalg::{truncation_defect, PsdMatrix};
use crate::path::{PathKind, SampledPath, TimeGrid};
use crate::rng::{purpose, NoiseSeed};
use crate::simulate::{sample_indep_increments_with, IncrementLaw, PhiGenerator};
use crate::table::ResultTable;

const TAG_WALK: u64 = 1;
const TAG_LIMIT: u64 = 2;
const TAG_PERM: u64 = 3;
const TAG_NEGATIVE: u64 = 4;
const TAG_DONSKER: u64 = 5;

struct WalkFamily {
    ensemble: Ensemble,
    /// Per path: `max |dX_n|^2` on `[0, T]`.
    jump_sq: Vec<f64>,
    /// Per path and truncation level `l`: `sum f_l(|phi_n(left)|) d tr<M_n>`.
    defects: Vec<Vec<f64>>,
}

fn walk_family(
    cfg: &ExperimentConfig,
    s: &Setup,
    phi_gen: &PhiGenerator,
    n: usize,
    base: u64,
    levels: &[f64],
) -> Result<WalkFamily> {
    let t = cfg.grid.t_max;
    let d = cfg.dim;
    let grid = TimeGrid::uniform(t, n)?;
    let clock = cfg.clock.build(&grid)?;
    let outputs: Vec<(EnsemblePath, f64, Vec<f64>)> = (0..cfg.ensemble_size as u64)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let seed = NoiseSeed::new(base, i);
            let phi = sqrt_path(&phi_gen.sample(&grid, seed)?)?;
            let walk = sample_indep_increments_with(&clock, d, &grid, seed.derive(purpose::WALK), IncrementLaw::TwoPoint)?;
            let x0 = s.initial.sample(seed.derive(purpose::INITIAL_VALUE));
            let z = ito_left_sum(&phi, &walk, &grid)?;
            let data = z.data().chunks(d).flat_map(|row| row.iter().zip(&x0).map(|(a, b)| a + b)).collect();
            let x = SampledPath::new(grid.clone(), d, data, PathKind::CadlagConstant)?;
            let jump = max_jump(&x, t).powi(2);
            let defects = levels
                .iter()
                .map(|&l| {
                    (1..grid.len())
                        .map(|i| truncation_defect(phi.at(i - 1).norm(), l) * d as f64 * clock.increment(i - 1))
                        .sum()
                })
                .collect();
            Ok((EnsemblePath { seed, y: x, k: None }, jump, defects))
        })
        .collect::<Result<_>>()?;
    let mut paths = Vec::with_capacity(outputs.len());
    let mut jump_sq = Vec::with_capacity(outputs.len());
    let mut defects = Vec::with_capacity(outputs.len());
    for (p, j, df) in outputs {
        paths.push(p);
        jump_sq.push(j);
        defects.push(df);
    }
    Ok(WalkFamily {
        ensemble: Ensemble::new(paths)?,
        jump_sq,
        defects,
    })
}

pub fn run_fclt(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let s = Setup::new(cfg)?;
    let p = cfg.fclt_params();
    let mut table = new_table(cfg);
    let times = cfg.probe_times();
    let n_max = *p.levels.iter().max().expect("at least two levels");
    let fine = TimeGrid::uniform(cfg.grid.t_max, n_max)?;
    let fine_clock = cfg.clock.build(&fine)?;
    let perm_seed = |j: u64| NoiseSeed::new(sub_seed(cfg.seed, TAG_PERM, j), 0);

    let mut jumps = Vec::with_capacity(p.levels.len());
    let mut finest = None;
    for &n in &p.levels {
        let fam = walk_family(cfg, &s, &s.phi, n, sub_seed(cfg.seed, TAG_WALK, n as u64), &p.truncation_levels)?;
        let (mean, se) = mean_stderr(&fam.jump_sq);
        table.push("mean_max_jump_sq", json!({"n": n}), mean).stderr(se);
        jumps.push(mean);
        if n == n_max {
            finest = Some(fam);
        }
    }
    let decreasing = strictly_decreasing(&jumps);
    table
        .push("max_jump_decreasing", json!({"levels": p.levels}), f64::from(u8::from(decreasing)))
        .pass(decreasing);

    let fam = finest.expect("largest level visited");
    let mut defect_means = Vec::with_capacity(p.truncation_levels.len());
    for (j, &l) in p.truncation_levels.iter().enumerate() {
        let col: Vec<f64> = fam.defects.iter().map(|d| d[j]).collect();
        let (mean, se) = mean_stderr(&col);
        table.push("truncation_defect", json!({"n": n_max, "l": l}), mean).stderr(se);
        defect_means.push(mean);
    }
    let decreasing = strictly_decreasing(&defect_means);
    table
        .push("truncation_defect_decreasing", json!({"levels": p.truncation_levels}), f64::from(u8::from(decreasing)))
        .pass(decreasing);

    let limit = |gen: &PhiGenerator, tag: u64| {
        Ensemble::construct(cfg.ensemble_size, sub_seed(cfg.seed, tag, 0), &s.initial, gen, &fine_clock, &fine)
    };
    let walk_fdd = fdd_sample(&fam.ensemble, &times, false)?;
    let sv = energy_test(&walk_fdd, &fdd_sample(&limit(&s.phi, TAG_LIMIT)?, &times, false)?, cfg.tests.n_perm, perm_seed(0))?;
    let params = json!({"case": "stochastic-volatility", "n": n_max, "times": times, "n_perm": cfg.tests.n_perm});
    table.push("energy_statistic", params.clone(), sv.statistic);
    table
        .push("energy_p_value", params, sv.p_value)
        .bracket(cfg.tests.alpha, 1.0)
        .pass(sv.p_value >= cfg.tests.alpha);

    if p.donsker {
        let unit = PhiGenerator::constant(PsdMatrix::identity(cfg.dim));
        let walks = walk_family(cfg, &s, &unit, n_max, sub_seed(cfg.seed, TAG_DONSKER, 1), &[])?;
        let res = energy_test(
            &fdd_sample(&walks.ensemble, &times, false)?,
            &fdd_sample(&limit(&unit, TAG_DONSKER)?, &times, false)?,
            cfg.tests.n_perm,
            perm_seed(1),
        )?;
        let params = json!({"case": "donsker", "n": n_max, "times": times, "n_perm": cfg.tests.n_perm});
        table.push("energy_statistic", params.clone(), res.statistic);
        table
            .push("energy_p_value", params, res.p_value)
            .bracket(cfg.tests.alpha, 1.0)
            .pass(res.p_value >= cfg.tests.alpha);
    }

    // Negative control: the walk against the limit with a rescaled density.
    let wrong = s.phi.scaled(p.negative_factor)?;
    let neg = energy_test(
        &walk_fdd,
        &fdd_sample(&limit(&wrong, TAG_NEGATIVE)?, &times, false)?,
        cfg.tests.n_perm_negative,
        perm_seed(2),
    )?;
    let params = json!({"case": "scaled-limit", "factor": p.negative_factor, "n_perm": cfg.tests.n_perm_negative});
    table.push("negative_energy_statistic", params.clone(), neg.statistic);
    table
        .push("negative_energy_p_value", params, neg.p_value)
        .bracket(0.0, cfg.tests.alpha_negative)
        .pass(neg.p_value < cfg.tests.alpha_negative);
    table.mark_negative_control_done();
    Ok(table)
}
