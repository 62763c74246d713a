//! Law invariance of the construction: two couplings with the same law of
//! `(Y(0), Phi)` but independent noise must agree in joint fdd of `Y` and `tr K`.

use serde_json::json;

use super::config::ExperimentConfig;
use super::{new_table, strictly_decreasing, sub_seed, Setup};
use crate::compare::{energy_statistic, energy_test, fdd_sample};
use crate::ensemble::{Ensemble, EnsemblePath};
use crate::error::Result;
use crate::rng::{purpose, NoiseSeed};
use crate::simulate::{epsilon_perturb, perturbed_characteristic};
use crate::table::ResultTable;

const TAG_COUPLING_B: u64 = 1;
const TAG_PERM: u64 = 2;

pub fn run_thm1_invariance(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let s = Setup::new(cfg)?;
    let p = cfg.thm1_params();
    let times = cfg.probe_times();
    let mut table = new_table(cfg);
    let size = cfg.ensemble_size;

    let seed_b = sub_seed(cfg.seed, TAG_COUPLING_B, purpose::COUPLING_B);
    let ens_a = Ensemble::construct(size, cfg.seed, &s.initial, &s.phi, &s.clock, &s.grid)?;
    let ens_b = Ensemble::construct(size, seed_b, &s.initial, &s.phi, &s.clock, &s.grid)?;
    let fdd_a = fdd_sample(&ens_a, &times, true)?;
    let fdd_b = fdd_sample(&ens_b, &times, true)?;
    let perm_seed = |j: u64| NoiseSeed::new(sub_seed(cfg.seed, TAG_PERM, j), 0);
    let same = energy_test(&fdd_a, &fdd_b, cfg.tests.n_perm, perm_seed(0))?;
    let params = json!({"comparison": "coupling-a-vs-b", "times": times, "n_perm": cfg.tests.n_perm, "paths": size});
    table.push("energy_statistic", params.clone(), same.statistic);
    table
        .push("energy_p_value", params, same.p_value)
        .bracket(cfg.tests.alpha, 1.0)
        .pass(same.p_value >= cfg.tests.alpha);

    // Negative control: the same noise as coupling B under a rescaled density.
    let scaled = s.phi.scaled(p.negative_factor)?;
    let ens_neg = Ensemble::construct(size, seed_b, &s.initial, &scaled, &s.clock, &s.grid)?;
    let fdd_neg = fdd_sample(&ens_neg, &times, true)?;
    let neg = energy_test(&fdd_a, &fdd_neg, cfg.tests.n_perm_negative, perm_seed(1))?;
    let params = json!({"comparison": "phi-vs-scaled-phi", "factor": p.negative_factor, "n_perm": cfg.tests.n_perm_negative});
    table.push("negative_energy_statistic", params.clone(), neg.statistic);
    table
        .push("negative_energy_p_value", params, neg.p_value)
        .bracket(0.0, cfg.tests.alpha_negative)
        .pass(neg.p_value < cfg.tests.alpha_negative);
    table.mark_negative_control_done();

    // Regularization ladder: Y + eps W_0 against Y itself, same paths.
    let mut stats = Vec::with_capacity(p.eps_ladder.len());
    for &eps in &p.eps_ladder {
        let perturbed = Ensemble::new(
            ens_a
                .map_paths(|path| -> Result<EnsemblePath> {
                    let k = path.k.as_ref().expect("constructed ensembles carry K");
                    Ok(EnsemblePath {
                        seed: path.seed,
                        y: epsilon_perturb(&path.y, &s.clock, eps, path.seed)?,
                        k: Some(perturbed_characteristic(k, &s.clock, eps)?),
                    })
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?,
        )?;
        let stat = energy_statistic(&fdd_sample(&perturbed, &times, true)?, &fdd_a)?;
        table.push("eps_energy_statistic", json!({"eps": eps}), stat);
        stats.push(stat);
    }
    table
        .push("eps_ladder_decreasing", json!({"eps": p.eps_ladder}), f64::from(u8::from(strictly_decreasing(&stats))))
        .pass(strictly_decreasing(&stats));
    Ok(table)
}
