//! Continuous local martingales as time-changed Brownian integrals, with the
//! numerical machinery to check their distributional and limit properties:
//! small dense PSD linear algebra, clocks and their generalized inverses,
//! seeded path simulation, discretized integrals, realized quadratic
//! variation, dyadic Radon-Nikodym estimation, path-space diagnostics,
//! two-sample tests and a config-driven experiment harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod compare;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod integrate;
pub mod linalg;
pub mod path;
pub mod quadvar;
pub mod rn;
pub mod rng;
pub mod simulate;
pub mod table;
pub mod timechange;

pub use ensemble::{Ensemble, EnsemblePath};
pub use error::{Error, Result};
pub use linalg::{PsdMatrix, SymMatrix};
pub use path::{MatrixPath, PathKind, SampledPath, TimeGrid};
pub use rng::NoiseSeed;
pub use table::{ResultTable, Verdict};
pub use timechange::IncreasingFn;
