//! Named, config-driven experiments assembling the other modules into
//! verification pipelines. Each runner returns a [`ResultTable`]; every
//! experiment runs its negative control in the same call.

mod approximation;
pub mod config;
mod fclt;
mod lemma4;
mod levy;
mod rn_roundtrip;
mod thm1;
mod tightness;

pub use approximation::run_approximation;
pub use config::{ClockSpec, ExperimentConfig, ExperimentKind, GridSpec, PhiSpec, TestLevels};
pub use fclt::run_fclt;
pub use lemma4::run_lemma4_convergence;
pub use levy::run_levy_check;
pub use rn_roundtrip::run_rn_roundtrip;
pub use thm1::run_thm1_invariance;
pub use tightness::run_tightness;

use crate::error::Result;
use crate::linalg::{psd_sqrt, PsdMatrix};
use crate::path::{MatrixPath, TimeGrid};
use crate::rng::splitmix64;
use crate::simulate::{InitialLaw, PhiGenerator};
use crate::table::ResultTable;
use crate::timechange::IncreasingFn;

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Thm1Invariance => run_thm1_invariance(cfg),
        ExperimentKind::LevyCheck => run_levy_check(cfg),
        ExperimentKind::Lemma4Convergence => run_lemma4_convergence(cfg),
        ExperimentKind::Fclt => run_fclt(cfg),
        ExperimentKind::RnRoundtrip => run_rn_roundtrip(cfg),
        ExperimentKind::Tightness => run_tightness(cfg),
        ExperimentKind::Approximation => run_approximation(cfg),
    }
}

/// Model pieces shared by the runners, built once from the config.
struct Setup {
    grid: TimeGrid,
    clock: IncreasingFn,
    phi: PhiGenerator,
    initial: InitialLaw,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid.build()?;
        Ok(Self {
            clock: cfg.clock.build(&grid)?,
            phi: cfg.phi.build(cfg.dim)?,
            initial: cfg.initial_law(),
            grid,
        })
    }
}

fn new_table(cfg: &ExperimentConfig) -> ResultTable {
    let mut table = ResultTable::new(cfg.experiment.name(), cfg.hash(), cfg.seed);
    table.require_negative_control();
    table
}

/// Independent base seed for sub-experiment `tag` at index `index`.
fn sub_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64((tag << 32) ^ index))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Pointwise PSD square root, reusing the previous root while the input repeats.
fn sqrt_path(phi: &MatrixPath) -> Result<MatrixPath> {
    let mut prev: Option<(usize, crate::linalg::SymMatrix)> = None;
    let mut out = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        let root = match &prev {
            Some((j, m)) if phi.slice(*j) == phi.slice(i) => m.clone(),
            _ => psd_sqrt(&PsdMatrix::project(&phi.at(i)))?.into_sym(),
        };
        prev = Some((i, root.clone()));
        out.push(root);
    }
    MatrixPath::from_matrices(phi.grid().clone(), out, phi.kind())
}
