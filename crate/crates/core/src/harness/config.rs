//! Experiment configuration: a TOML schema with strict key checking, defaults
//! per experiment and a canonical hash recorded in every result row.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{PsdMatrix, SymMatrix};
use crate::path::TimeGrid;
use crate::simulate::{DriverMap, IncrementLaw, InitialLaw, PhiGenerator, PhiModel};
use crate::timechange::IncreasingFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Thm1Invariance,
    LevyCheck,
    Lemma4Convergence,
    Fclt,
    RnRoundtrip,
    Tightness,
    Approximation,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Thm1Invariance,
        Self::LevyCheck,
        Self::Lemma4Convergence,
        Self::Fclt,
        Self::RnRoundtrip,
        Self::Tightness,
        Self::Approximation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Thm1Invariance => "thm1-invariance",
            Self::LevyCheck => "levy-check",
            Self::Lemma4Convergence => "lemma4-convergence",
            Self::Fclt => "fclt",
            Self::RnRoundtrip => "rn-roundtrip",
            Self::Tightness => "tightness",
            Self::Approximation => "approximation",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.t_max, self.steps)
    }
}

/// The clock `L`, sampled on the simulation grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClockSpec {
    #[default]
    Identity,
    /// `L(t) = scale t^exponent`.
    Power { scale: f64, exponent: f64 },
    /// Identity with the plateau `[start, end]` removed: `L(t) = min(t, start) + (t - end)+`.
    Plateau { start: f64, end: f64 },
    /// Linear interpolation through `(t, L)` knots; the first knot must be `(0, 0)`.
    Piecewise { knots: Vec<[f64; 2]> },
}

impl ClockSpec {
    pub fn build(&self, grid: &TimeGrid) -> Result<IncreasingFn> {
        match self {
            Self::Identity => Ok(IncreasingFn::identity(grid.clone())),
            Self::Power { scale, exponent } => {
                if !(*scale >= 0.0 && *exponent > 0.0) {
                    return Err(Error::Config("power clock needs scale >= 0 and exponent > 0".into()));
                }
                IncreasingFn::from_fn(grid.clone(), |t| scale * t.powf(*exponent))
            }
            Self::Plateau { start, end } => {
                if !(0.0 <= *start && start <= end) {
                    return Err(Error::Config("plateau needs 0 <= start <= end".into()));
                }
                IncreasingFn::from_fn(grid.clone(), |t| t.min(*start) + (t - end).max(0.0))
            }
            Self::Piecewise { knots } => {
                if knots.first() != Some(&[0.0, 0.0]) || knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::Config("piecewise clock needs increasing knot times starting at (0, 0)".into()));
                }
                let eval = |t: f64| {
                    let k = knots.partition_point(|p| p[0] <= t).saturating_sub(1);
                    if k + 1 >= knots.len() {
                        return knots[k][1];
                    }
                    let (a, b) = (knots[k], knots[k + 1]);
                    a[1] + (t - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
                };
                IncreasingFn::new(grid.clone(), grid.nodes().iter().map(|&t| eval(t)).collect())
                    .map_err(|e| Error::Config(format!("piecewise clock: {e}")))
            }
        }
    }
}

pub type MatrixSpec = Vec<Vec<f64>>;

fn psd_from_spec(rows: &MatrixSpec) -> Result<PsdMatrix> {
    PsdMatrix::new(SymMatrix::from_rows(rows)?)
}

/// Characteristic density model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSpec {
    Constant { matrix: MatrixSpec },
    ScalarDiffusion { direction: MatrixSpec, low: f64, high: f64, vol: f64 },
    RegimeSwitch { rates: Vec<f64>, levels: Vec<MatrixSpec> },
    /// Deterministic `base + sin(2 pi frequency s) amplitude`; must stay PSD.
    Smooth { base: MatrixSpec, amplitude: MatrixSpec, frequency: f64 },
}

impl PhiSpec {
    pub fn identity(d: usize) -> Self {
        Self::Constant {
            matrix: identity_rows(d),
        }
    }

    pub fn build(&self, dim: usize) -> Result<PhiGenerator> {
        let model = match self {
            Self::Constant { matrix } => PhiModel::Constant(psd_from_spec(matrix)?),
            Self::ScalarDiffusion {
                direction,
                low,
                high,
                vol,
            } => PhiModel::ScalarDiffusion {
                direction: psd_from_spec(direction)?,
                low: *low,
                high: *high,
                vol: *vol,
            },
            Self::RegimeSwitch { rates, levels } => PhiModel::RegimeSwitch {
                rates: rates.clone(),
                levels: levels.iter().map(psd_from_spec).collect::<Result<_>>()?,
            },
            Self::Smooth {
                base,
                amplitude,
                frequency,
            } => {
                let base = SymMatrix::from_rows(base)?;
                let amp = SymMatrix::from_rows(amplitude)?;
                if base.dim() != amp.dim() {
                    return Err(Error::Config("smooth density: base and amplitude differ in size".into()));
                }
                let w = 2.0 * std::f64::consts::PI * frequency;
                PhiModel::FunctionOfDriver(DriverMap::new(move |times, _| {
                    let s = times[times.len() - 1];
                    base.add(&amp.scale((w * s).sin()))
                }))
            }
        };
        PhiGenerator::new(dim, model)
    }
}

pub fn identity_rows(d: usize) -> MatrixSpec {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn diag_rows(values: &[f64]) -> MatrixSpec {
    let d = values.len();
    (0..d).map(|i| (0..d).map(|j| if i == j { values[i] } else { 0.0 }).collect()).collect()
}

/// Permutation counts and levels for the two-sample tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestLevels {
    /// Non-rejection level for equality-in-law claims.
    pub alpha: f64,
    /// Required rejection level for negative controls.
    pub alpha_negative: f64,
    pub n_perm: usize,
    pub n_perm_negative: usize,
}

impl Default for TestLevels {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            alpha_negative: 0.001,
            n_perm: 999,
            n_perm_negative: 1999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thm1Params {
    /// Perturbation sizes for the `Y + eps W_0` ladder.
    pub eps_ladder: Vec<f64>,
    /// The negative control multiplies `Phi` by this factor.
    pub negative_factor: f64,
}

impl Default for Thm1Params {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.5, 0.25, 0.1, 0.05],
            negative_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevyParams {
    /// Paths used as independent KS replications.
    pub replications: usize,
    pub ks_alpha: f64,
    /// Required fraction of replications passing KS.
    pub pass_fraction: f64,
    /// Accepted band for the median realized QV of `w` at the end of the range.
    pub qv_band: [f64; 2],
    /// Eigenvalue floor when whitening by `Phi^{-1/2}`.
    pub whitening_eps: f64,
    /// Required rejection level for the control that skips the time change.
    pub negative_alpha: f64,
}

impl Default for LevyParams {
    fn default() -> Self {
        Self {
            replications: 100,
            ks_alpha: 0.01,
            pass_fraction: 0.95,
            qv_band: [0.9, 1.1],
            whitening_eps: 1e-8,
            negative_alpha: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma4Params {
    /// Walk lengths `n` (steps on `[0, T_max]`).
    pub levels: Vec<usize>,
    pub increment_law: IncrementLaw,
    /// Discrepancy threshold.
    pub eps: f64,
    /// Largest accepted exceedance frequency at the finest level.
    pub final_max: f64,
    /// Smallest exceedance frequency the compensated-Poisson control must keep.
    pub negative_min: f64,
}

impl Default for Lemma4Params {
    fn default() -> Self {
        Self {
            levels: vec![64, 256, 1024, 4096],
            increment_law: IncrementLaw::Gaussian,
            eps: 0.1,
            final_max: 0.05,
            negative_min: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcltParams {
    pub levels: Vec<usize>,
    /// Truncation levels `l` for the defect `int f_l(phi_n) d tr<M_n>`.
    pub truncation_levels: Vec<f64>,
    /// Also run the Donsker case `phi = 1`.
    pub donsker: bool,
    /// The negative control compares against the limit built from `factor Phi`.
    pub negative_factor: f64,
}

impl Default for FcltParams {
    fn default() -> Self {
        Self {
            levels: vec![64, 256, 1024, 4096],
            truncation_levels: vec![0.25, 0.5, 0.75, 1.0],
            donsker: true,
            negative_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnParams {
    pub depths: Vec<u32>,
    /// Required per-level shrink factor of the density error, if any.
    pub min_rate: Option<f64>,
    /// Tolerance for `Phi_hat o L = K` at dyadic nodes, relative to `1 + |K|`.
    pub interp_tol: f64,
    /// Size of the jump added to `K` in the negative control.
    pub negative_jump: f64,
    /// Time of that jump (off the dyadic lattice).
    pub negative_time: f64,
}

impl Default for RnParams {
    fn default() -> Self {
        Self {
            depths: vec![4, 6, 8, 10],
            min_rate: Some(1.7),
            interp_tol: 1e-12,
            negative_jump: 0.5,
            negative_time: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessParams {
    /// Grid sizes of the positive family.
    pub levels: Vec<usize>,
    /// Variance multipliers `n` of the negative family `sqrt(n) W`.
    pub negative_levels: Vec<usize>,
    pub t: f64,
    pub sup_thresholds: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub eps_grid: Vec<f64>,
    pub ui_levels: Vec<f64>,
    /// Largest accepted tail frequency of the positive family at the largest threshold.
    pub positive_tail_max: f64,
    /// Smallest tail frequency the negative family must show at the largest threshold.
    pub negative_tail_min: f64,
}

impl Default for TightnessParams {
    fn default() -> Self {
        Self {
            levels: vec![64, 256, 1024],
            negative_levels: vec![1, 16, 256],
            t: 1.0,
            sup_thresholds: vec![1.0, 2.0, 4.0, 8.0],
            r_grid: vec![0.01, 0.05, 0.2],
            eps_grid: crate::diagnostics::DEFAULT_EPS_GRID.to_vec(),
            ui_levels: vec![1.0, 4.0, 9.0, 16.0],
            positive_tail_max: 0.05,
            negative_tail_min: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproximationParams {
    /// Partition sizes for the coarse left-point sums.
    pub levels: Vec<usize>,
    /// Mollification indices `n`.
    pub mollify_levels: Vec<usize>,
    /// Jump time of the step integrand.
    pub step_time: f64,
    /// Tolerance for `H_n(t) = t - c / n`.
    pub closed_form_tol: f64,
    /// Smallest error the anticipating right-point sum must keep.
    pub negative_min: f64,
}

impl Default for ApproximationParams {
    fn default() -> Self {
        Self {
            levels: vec![16, 32, 64, 128, 256],
            mollify_levels: vec![2, 4, 8, 16, 32],
            step_time: 0.3,
            closed_form_tol: 1e-3,
            negative_min: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub ensemble_size: usize,
    pub dim: usize,
    pub grid: GridSpec,
    #[serde(default)]
    pub clock: ClockSpec,
    pub phi: PhiSpec,
    pub initial: Option<InitialLaw>,
    /// Probe times for finite-dimensional comparisons; default `T/4, T/2, 3T/4, T`.
    pub probe_times: Option<Vec<f64>>,
    #[serde(default)]
    pub tests: TestLevels,
    pub thm1: Option<Thm1Params>,
    pub levy: Option<LevyParams>,
    pub lemma4: Option<Lemma4Params>,
    pub fclt: Option<FcltParams>,
    pub rn: Option<RnParams>,
    pub tightness: Option<TightnessParams>,
    pub approximation: Option<ApproximationParams>,
}

impl ExperimentConfig {
    /// Desk-scale defaults.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = |dim: usize, t_max: f64, steps: usize, size: usize, phi: PhiSpec| Self {
            experiment: kind,
            seed: 20_240_501,
            ensemble_size: size,
            dim,
            grid: GridSpec { t_max, steps },
            clock: ClockSpec::Identity,
            phi,
            initial: None,
            probe_times: None,
            tests: TestLevels::default(),
            thm1: None,
            levy: None,
            lemma4: None,
            fclt: None,
            rn: None,
            tightness: None,
            approximation: None,
        };
        let regime = |d: usize| PhiSpec::RegimeSwitch {
            rates: vec![3.0, 2.0],
            levels: vec![diag_rows(&vec![0.5; d]), {
                let mut m = diag_rows(&vec![1.5; d]);
                if d > 1 {
                    m[0][1] = 0.4;
                    m[1][0] = 0.4;
                }
                m
            }],
        };
        let diffusion = |d: usize| PhiSpec::ScalarDiffusion {
            direction: identity_rows(d),
            low: 0.25,
            high: 2.25,
            vol: 2.0,
        };
        match kind {
            ExperimentKind::Thm1Invariance => {
                let mut c = base(2, 1.0, 256, 1000, regime(2));
                c.clock = ClockSpec::Power {
                    scale: 1.0,
                    exponent: 1.5,
                };
                c.initial = Some(InitialLaw::Gaussian {
                    mean: vec![0.0, 0.0],
                    std: 0.5,
                });
                c.thm1 = Some(Thm1Params::default());
                c
            }
            ExperimentKind::LevyCheck => {
                let mut c = base(1, 1.0, 4096, 1000, PhiSpec::identity(1));
                c.clock = ClockSpec::Power {
                    scale: 1.0,
                    exponent: 2.0,
                };
                c.levy = Some(LevyParams::default());
                c
            }
            ExperimentKind::Lemma4Convergence => {
                let mut c = base(1, 1.0, 4096, 500, diffusion(1));
                c.lemma4 = Some(Lemma4Params::default());
                c
            }
            ExperimentKind::Fclt => {
                let mut c = base(1, 1.0, 4096, 1000, diffusion(1));
                c.fclt = Some(FcltParams::default());
                c
            }
            ExperimentKind::RnRoundtrip => {
                let mut c = base(
                    2,
                    1.0,
                    4096,
                    1,
                    PhiSpec::Smooth {
                        base: vec![vec![2.0, 0.3], vec![0.3, 1.5]],
                        amplitude: vec![vec![0.8, 0.2], vec![0.2, -0.5]],
                        frequency: 1.0,
                    },
                );
                c.clock = ClockSpec::Power {
                    scale: 1.0,
                    exponent: 1.5,
                };
                c.rn = Some(RnParams::default());
                c
            }
            ExperimentKind::Tightness => {
                let mut c = base(1, 1.0, 1024, 400, regime(1));
                c.tightness = Some(TightnessParams::default());
                c
            }
            ExperimentKind::Approximation => {
                let mut c = base(1, 1.0, 4096, 1000, PhiSpec::identity(1));
                c.approximation = Some(ApproximationParams::default());
                c
            }
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn probe_times(&self) -> Vec<f64> {
        self.probe_times.clone().unwrap_or_else(|| {
            let t = self.grid.t_max;
            vec![0.25 * t, 0.5 * t, 0.75 * t, t]
        })
    }

    pub fn initial_law(&self) -> InitialLaw {
        self.initial.clone().unwrap_or_else(|| InitialLaw::zero(self.dim))
    }

    pub fn thm1_params(&self) -> Thm1Params {
        self.thm1.clone().unwrap_or_default()
    }

    pub fn levy_params(&self) -> LevyParams {
        self.levy.clone().unwrap_or_default()
    }

    pub fn lemma4_params(&self) -> Lemma4Params {
        self.lemma4.clone().unwrap_or_default()
    }

    pub fn fclt_params(&self) -> FcltParams {
        self.fclt.clone().unwrap_or_default()
    }

    pub fn rn_params(&self) -> RnParams {
        self.rn.clone().unwrap_or_default()
    }

    pub fn tightness_params(&self) -> TightnessParams {
        self.tightness.clone().unwrap_or_default()
    }

    pub fn approximation_params(&self) -> ApproximationParams {
        self.approximation.clone().unwrap_or_default()
    }

    /// Structural checks; model-level checks happen when the pieces are built.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 || self.dim > 8 {
            return bad(format!("dim must lie in 1..=8, got {}", self.dim));
        }
        if !(self.grid.t_max > 0.0) || !self.grid.t_max.is_finite() || self.grid.steps == 0 {
            return bad("grid needs t_max > 0 and steps >= 1".into());
        }
        if self.grid.steps > 1 << 20 {
            return bad(format!("grid steps {} exceed 2^20", self.grid.steps));
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be positive".into());
        }
        if self.initial_law().dim() != self.dim {
            return bad("initial law dimension differs from dim".into());
        }
        self.initial_law().validate().map_err(|e| Error::Config(e.to_string()))?;
        let tl = &self.tests;
        if !(0.0 < tl.alpha && tl.alpha < 1.0 && 0.0 < tl.alpha_negative && tl.alpha_negative < 1.0) {
            return bad("test levels must lie in (0, 1)".into());
        }
        if tl.n_perm < crate::compare::MIN_PERMUTATIONS || tl.n_perm_negative < crate::compare::MIN_PERMUTATIONS {
            return bad(format!("permutation counts must be at least {}", crate::compare::MIN_PERMUTATIONS));
        }
        if let Some(times) = &self.probe_times {
            if times.is_empty() || times.iter().any(|t| !(*t >= 0.0 && *t <= self.grid.t_max)) {
                return bad("probe times must lie in [0, t_max]".into());
            }
        }
        let sections = [
            (ExperimentKind::Thm1Invariance, self.thm1.is_some()),
            (ExperimentKind::LevyCheck, self.levy.is_some()),
            (ExperimentKind::Lemma4Convergence, self.lemma4.is_some()),
            (ExperimentKind::Fclt, self.fclt.is_some()),
            (ExperimentKind::RnRoundtrip, self.rn.is_some()),
            (ExperimentKind::Tightness, self.tightness.is_some()),
            (ExperimentKind::Approximation, self.approximation.is_some()),
        ];
        if let Some((kind, _)) = sections.iter().find(|(k, present)| *present && *k != self.experiment) {
            return bad(format!("section `{}` does not belong to experiment `{}`", section_name(*kind), self.experiment));
        }
        self.phi
            .build(self.dim)
            .map_err(|e| Error::Config(format!("phi: {e}")))?;
        if let Some(rn) = &self.rn {
            if rn.depths.len() < 2 || rn.depths.iter().any(|&d| !(2..=crate::rn::MAX_DEPTH).contains(&d)) {
                return bad(format!("rn depths must be at least two levels in 2..={}", crate::rn::MAX_DEPTH));
            }
        }
        for (name, levels) in [
            ("lemma4.levels", self.lemma4.as_ref().map(|p| &p.levels)),
            ("fclt.levels", self.fclt.as_ref().map(|p| &p.levels)),
            ("tightness.levels", self.tightness.as_ref().map(|p| &p.levels)),
            ("approximation.levels", self.approximation.as_ref().map(|p| &p.levels)),
        ] {
            if let Some(levels) = levels {
                if levels.len() < 2 || levels.iter().any(|&n| n == 0 || n > 1 << 20) {
                    return bad(format!("{name} needs at least two levels in 1..=2^20"));
                }
            }
        }
        Ok(())
    }
}

fn section_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Thm1Invariance => "thm1",
        ExperimentKind::LevyCheck => "levy",
        ExperimentKind::Lemma4Convergence => "lemma4",
        ExperimentKind::Fclt => "fclt",
        ExperimentKind::RnRoundtrip => "rn",
        ExperimentKind::Tightness => "tightness",
        ExperimentKind::Approximation => "approximation",
    }
}
