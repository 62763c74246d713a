//! Relative-compactness diagnostics on a family satisfying the conditions and
//! on one engineered to violate the sup-bound criterion.

use serde_json::json;

use super::config::ExperimentConfig;
use super::{new_table, sub_seed, Setup};
use crate::diagnostics::{tightness_report, ui_statistic, TightnessReport};
use crate::ensemble::{Ensemble, EnsemblePath};
use crate::error::{Error, Result};
use crate::path::{SampledPath, TimeGrid};
use crate::simulate::sample_brownian;
use crate::table::ResultTable;

const TAG_POSITIVE: u64 = 1;
const TAG_NEGATIVE: u64 = 2;

fn largest_threshold_tail(report: &TightnessReport) -> f64 {
    report.sup_tail.last().map_or(0.0, |&(_, v)| v)
}

pub fn run_tightness(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let s = Setup::new(cfg)?;
    let p = cfg.tightness_params();
    if !(p.t > 0.0 && p.t <= cfg.grid.t_max) {
        return Err(Error::Config(format!("tightness.t must lie in (0, {}]", cfg.grid.t_max)));
    }
    let mut table = new_table(cfg);
    let n_top = *p.sup_thresholds.iter().max_by(|a, b| a.total_cmp(b)).unwrap_or(&0.0);

    let positive = p
        .levels
        .iter()
        .map(|&n| -> Result<(usize, Ensemble)> {
            let grid = TimeGrid::uniform(cfg.grid.t_max, n)?;
            let clock = cfg.clock.build(&grid)?;
            let ens = Ensemble::construct(cfg.ensemble_size, sub_seed(cfg.seed, TAG_POSITIVE, n as u64), &s.initial, &s.phi, &clock, &grid)?;
            Ok((n, ens))
        })
        .collect::<Result<Vec<_>>>()?;
    let neg_grid = TimeGrid::uniform(cfg.grid.t_max, *p.levels.iter().max().expect("validated levels"))?;
    let negative = p
        .negative_levels
        .iter()
        .map(|&m| -> Result<(usize, Ensemble)> {
            let scale = (m as f64).sqrt();
            let ens = Ensemble::generate(cfg.ensemble_size, sub_seed(cfg.seed, TAG_NEGATIVE, m as u64), |seed| {
                let w = sample_brownian(cfg.dim, &neg_grid, seed)?;
                let data = w.data().iter().map(|v| scale * v).collect();
                Ok(EnsemblePath {
                    seed,
                    y: SampledPath::new(neg_grid.clone(), cfg.dim, data, w.kind())?,
                    k: None,
                })
            })?;
            Ok((m, ens))
        })
        .collect::<Result<Vec<_>>>()?;

    for (family, ensembles) in [("positive", &positive), ("negative", &negative)] {
        let refs: Vec<(usize, &Ensemble)> = ensembles.iter().map(|(n, e)| (*n, e)).collect();
        let report = tightness_report(&refs, p.t, &p.sup_thresholds, &p.r_grid, &p.eps_grid)?;
        report.append_to(&mut table, family);
        for (n, ens) in ensembles {
            for pt in ui_statistic(ens, p.t, &p.ui_levels)? {
                table
                    .push("ui_tail_mean", json!({"family": family, "n": n, "L": pt.level}), pt.mean)
                    .stderr(pt.stderr);
            }
        }
        let tail = largest_threshold_tail(&report);
        let params = json!({"family": family, "N": n_top});
        if family == "positive" {
            table
                .push("sup_tail_at_largest_n", params, tail)
                .bracket(0.0, p.positive_tail_max)
                .pass(tail <= p.positive_tail_max);
            table
                .push("sup_decreasing_in_n", json!({"family": family}), f64::from(u8::from(report.sup_decreasing_in_n)))
                .pass(report.sup_decreasing_in_n);
            table
                .push("modulus_decreasing_in_r", json!({"family": family}), f64::from(u8::from(report.modulus_decreasing_in_r)))
                .pass(report.modulus_decreasing_in_r);
        } else {
            // The designed violation: variance growing with the index.
            table
                .push("negative_sup_tail_at_largest_n", params, tail)
                .bracket(p.negative_tail_min, 1.0)
                .pass(tail >= p.negative_tail_min);
            table.mark_negative_control_done();
        }
    }
    Ok(table)
}
