//! Forward-compose `K = Phi o L`, recover `Phi` by dyadic ratios and rebuild `K`.

use serde_json::json;

use super::config::ExperimentConfig;
use super::{new_table, strictly_decreasing, Setup};
use crate::error::Result;
use crate::integrate::stieltjes_compose;
use crate::linalg::SymMatrix;
use crate::path::MatrixPath;
use crate::rn::{dyadic_indices, matrix_reconstruction_error, matrix_rn};
use crate::rng::NoiseSeed;
use crate::table::ResultTable;

pub fn run_rn_roundtrip(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let s = Setup::new(cfg)?;
    let p = cfg.rn_params();
    let mut table = new_table(cfg);
    let mut depths = p.depths.clone();
    depths.sort_unstable();

    let phi = s.phi.sample(&s.grid, NoiseSeed::new(cfg.seed, 0))?;
    let k = stieltjes_compose(&phi, &s.clock)?;

    let mut recon = Vec::with_capacity(depths.len());
    let mut density = Vec::with_capacity(depths.len());
    let mut interp_worst: f64 = 0.0;
    for &depth in &depths {
        let est = matrix_rn(&k, &s.clock, depth)?;
        let rebuilt = stieltjes_compose(&est.phi, &s.clock)?;
        let r = matrix_reconstruction_error(&est.phi, &s.clock, &k)?;
        let dens = (0..phi.len())
            .map(|i| est.phi.at(i).sub(&phi.at(i)).norm())
            .fold(0.0, f64::max);
        let interp = dyadic_indices(&s.grid, depth)?
            .into_iter()
            .map(|i| rebuilt.at(i).sub(&k.at(i)).norm() / (1.0 + k.at(i).norm()))
            .fold(0.0, f64::max);
        let converged = est.converged.iter().filter(|c| **c).count() as f64 / est.converged.len() as f64;
        table.push("reconstruction_sup_error", json!({"depth": depth}), r);
        table.push("density_sup_error", json!({"depth": depth}), dens);
        table.push("dyadic_interpolation_error", json!({"depth": depth}), interp);
        table.push("converged_fraction", json!({"depth": depth}), converged);
        recon.push(r);
        density.push(dens);
        interp_worst = interp_worst.max(interp);
    }

    let decreasing = strictly_decreasing(&recon);
    table
        .push("reconstruction_decreasing", json!({"depths": depths}), f64::from(u8::from(decreasing)))
        .pass(decreasing);
    for (w, e) in depths.windows(2).zip(density.windows(2)) {
        let rate = (e[0] / e[1]).powf(1.0 / f64::from(w[1] - w[0]));
        let row = table.push("density_rate_per_level", json!({"from": w[0], "to": w[1]}), rate);
        if let Some(min) = p.min_rate {
            row.pass(rate >= min);
        }
    }
    table
        .push("dyadic_interpolation_worst", json!({"depths": depths}), interp_worst)
        .bracket(0.0, p.interp_tol)
        .pass(interp_worst <= p.interp_tol);

    // Negative control: a jump in K has no density with respect to L, so the
    // rebuilt K smears it over one dyadic cell at every depth.
    let deepest = *depths.last().expect("at least two depths");
    let bump = SymMatrix::scaled_identity(cfg.dim, p.negative_jump);
    let jumped = MatrixPath::from_matrices(
        s.grid.clone(),
        s.grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &t)| if t >= p.negative_time { k.at(i).add(&bump) } else { k.at(i) })
            .collect(),
        k.kind(),
    )?;
    let est = matrix_rn(&jumped, &s.clock, deepest)?;
    let err = matrix_reconstruction_error(&est.phi, &s.clock, &jumped)?;
    let floor = 0.25 * p.negative_jump;
    table
        .push("negative_jump_reconstruction_error", json!({"depth": deepest, "jump": p.negative_jump, "time": p.negative_time}), err)
        .pass(err >= floor);
    table.mark_negative_control_done();
    Ok(table)
}
