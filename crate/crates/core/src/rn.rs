//! Dyadic Radon-Nikodym estimation: recover `phi` from `zeta = phi o L` given the
//! sampled trajectory `zeta` and the clock `L`.
//!
//! Level `n` uses the dyadic cells `(s_{i-1}, s_i]`, `s_i = i 2^-n`, and the
//! increment ratio `(zeta(s_i) - zeta(s_{i-1})) / (L(s_i) - L(s_{i-1}))`. A cell
//! where the clock does not move gets ratio 0; `zeta` is flat there, so this is
//! the choice under which `psi_n o L` reproduces `zeta` at every dyadic node.
//!
//! Estimates are stored right-continuously: the value at grid node `t_k` is the
//! ratio of the cell containing `[t_k, t_{k+1})`. Left-point Stieltjes sums of the
//! estimate then hit `zeta` exactly at dyadic nodes.

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::integrate::{stieltjes_compose, stieltjes_compose_scalar};
use crate::linalg::{PsdMatrix, SymMatrix};
use crate::path::{MatrixPath, PathKind, SampledPath, TimeGrid};
use crate::timechange::IncreasingFn;

/// Relative tolerance between consecutive levels for a node to count as converged.
pub const RN_CONV_TOL: f64 = 1e-6;
/// Slack allowed when checking that a characteristic is PSD-nondecreasing.
pub const MONOTONE_TOL: f64 = 1e-9;
/// Deepest supported level.
pub const MAX_DEPTH: u32 = 40;

/// Estimate of a scalar derivative with its per-node convergence report.
#[derive(Debug, Clone)]
pub struct RnEstimate {
    pub phi: SampledPath,
    pub converged: Vec<bool>,
}

/// Estimate of a matrix density. `converged[k]` holds when every polarized entry
/// converged at node `k`; only those nodes are PSD-projected.
#[derive(Debug, Clone)]
pub struct MatrixRnEstimate {
    pub phi: MatrixPath,
    pub converged: Vec<bool>,
}

/// Grid positions of the dyadic nodes `i 2^-n` in `[0, T_max]`.
pub fn dyadic_indices(grid: &TimeGrid, n: u32) -> Result<Vec<usize>> {
    if n > MAX_DEPTH {
        return Err(invalid_param(format!("dyadic level {n} exceeds {MAX_DEPTH}")));
    }
    let h = (0.5f64).powi(n as i32);
    let cells = grid.t_max() / h;
    let count = cells.round();
    if (cells - count).abs() > 1e-9 * (1.0 + cells) || count < 1.0 {
        return Err(Error::Alignment(format!(
            "T_max = {} is not a positive multiple of 2^-{n}",
            grid.t_max()
        )));
    }
    (0..=count as usize)
        .map(|i| {
            let s = i as f64 * h;
            grid.index_of(s)
                .ok_or_else(|| Error::Alignment(format!("dyadic node {s} (level {n}) is not a grid node")))
        })
        .collect()
}

fn ratios(zeta: &[f64], clock: &[f64], dyadic: &[usize]) -> Vec<f64> {
    dyadic
        .windows(2)
        .map(|w| {
            let dl = clock[w[1]] - clock[w[0]];
            if dl > 0.0 {
                (zeta[w[1]] - zeta[w[0]]) / dl
            } else {
                0.0
            }
        })
        .collect()
}

/// Spreads per-cell values onto grid nodes, right-continuously.
fn spread(cell_values: &[f64], dyadic: &[usize], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (c, w) in dyadic.windows(2).enumerate() {
        out[w[0]..w[1]].fill(cell_values[c]);
    }
    out[len - 1] = cell_values[cell_values.len() - 1];
    out
}

fn check_scalar(zeta: &SampledPath, clock: &IncreasingFn) -> Result<()> {
    zeta.grid().require_same(clock.grid(), "Radon-Nikodym estimation")?;
    if zeta.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: zeta.dim(),
        });
    }
    Ok(())
}

/// Level-`n` ratio estimate `psi_n`, piecewise constant on dyadic cells.
pub fn dyadic_ratio(zeta: &SampledPath, clock: &IncreasingFn, n: u32) -> Result<SampledPath> {
    check_scalar(zeta, clock)?;
    let dyadic = dyadic_indices(clock.grid(), n)?;
    let cells = ratios(zeta.data(), clock.values(), &dyadic);
    let values = spread(&cells, &dyadic, zeta.len());
    SampledPath::from_scalars(zeta.grid().clone(), values, PathKind::CadlagConstant)
}

fn converged_mask(fine: &[f64], coarse: &[f64], tol: f64) -> Vec<bool> {
    fine.iter()
        .zip(coarse)
        .map(|(a, b)| (a - b).abs() <= tol * (1.0 + a.abs()))
        .collect()
}

/// `psi_{n_max}` with nodes flagged converged when they agree with `psi_{n_max - 1}`
/// to [`RN_CONV_TOL`].
pub fn rn_derivative(zeta: &SampledPath, clock: &IncreasingFn, n_max: u32) -> Result<RnEstimate> {
    if n_max < 2 {
        return Err(invalid_param("n_max must be at least 2"));
    }
    let fine = dyadic_ratio(zeta, clock, n_max)?;
    let coarse = dyadic_ratio(zeta, clock, n_max - 1)?;
    let converged = converged_mask(fine.data(), coarse.data(), RN_CONV_TOL);
    Ok(RnEstimate { phi: fine, converged })
}

/// Errors unless every increment of `k` is PSD up to [`MONOTONE_TOL`].
pub fn check_psd_monotone(k: &MatrixPath) -> Result<()> {
    for i in 1..k.len() {
        let step = k.at(i).sub(&k.at(i - 1));
        let scale = 1.0 + k.at(i).norm();
        let low = step.min_eigenvalue();
        if low < -MONOTONE_TOL * scale {
            return Err(invalid_input(format!(
                "characteristic decreases in the PSD order at node {i} (eigenvalue {low:e})"
            )));
        }
    }
    Ok(())
}

/// Matrix density `Phi` with `K = Phi o L`, from diagonal and `(e_i + e_j)` quadratic
/// forms of `K` combined by polarization.
pub fn matrix_rn(k: &MatrixPath, clock: &IncreasingFn, n_max: u32) -> Result<MatrixRnEstimate> {
    if n_max < 2 {
        return Err(invalid_param("n_max must be at least 2"));
    }
    k.grid().require_same(clock.grid(), "matrix_rn")?;
    check_psd_monotone(k)?;
    let d = k.dim();
    let len = k.len();
    let fine_idx = dyadic_indices(clock.grid(), n_max)?;
    let coarse_idx = dyadic_indices(clock.grid(), n_max - 1)?;

    let estimate = |zeta: &[f64]| {
        let fine = spread(&ratios(zeta, clock.values(), &fine_idx), &fine_idx, len);
        let coarse = spread(&ratios(zeta, clock.values(), &coarse_idx), &coarse_idx, len);
        (fine, coarse)
    };
    let entry = |r: usize, c: usize| -> Vec<f64> { (0..len).map(|t| k.slice(t)[r * d + c]).collect() };

    let mut fine = vec![vec![Vec::new(); d]; d];
    let mut coarse = vec![vec![Vec::new(); d]; d];
    for i in 0..d {
        let (f, c) = estimate(&entry(i, i));
        fine[i][i] = f;
        coarse[i][i] = c;
    }
    for i in 0..d {
        for j in i + 1..d {
            let sum: Vec<f64> = (0..len)
                .map(|t| {
                    let m = k.slice(t);
                    m[i * d + i] + m[j * d + j] + 2.0 * m[i * d + j]
                })
                .collect();
            let (f, c) = estimate(&sum);
            let polar = |s: &[f64], a: &[f64], b: &[f64]| -> Vec<f64> {
                s.iter().zip(a).zip(b).map(|((s, a), b)| 0.5 * (s - a - b)).collect()
            };
            fine[i][j] = polar(&f, &fine[i][i], &fine[j][j]);
            coarse[i][j] = polar(&c, &coarse[i][i], &coarse[j][j]);
        }
    }

    let mut converged = vec![true; len];
    for i in 0..d {
        for j in i..d {
            for (flag, ok) in converged.iter_mut().zip(converged_mask(&fine[i][j], &coarse[i][j], RN_CONV_TOL)) {
                *flag &= ok;
            }
        }
    }

    let mut data = Vec::with_capacity(len * d * d);
    let mut m = vec![0.0; d * d];
    for t in 0..len {
        for i in 0..d {
            for j in i..d {
                m[i * d + j] = fine[i][j][t];
                m[j * d + i] = fine[i][j][t];
            }
        }
        let sym = SymMatrix::symmetrized(d, m.clone());
        if converged[t] {
            data.extend_from_slice(PsdMatrix::project(&sym).as_sym().as_slice());
        } else {
            data.extend_from_slice(sym.as_slice());
        }
    }
    Ok(MatrixRnEstimate {
        phi: MatrixPath::from_parts(k.grid().clone(), d, data, PathKind::CadlagConstant),
        converged,
    })
}

/// `sup_t |(psi o L)(t) - zeta(t)|` over grid nodes.
pub fn reconstruction_error(psi: &SampledPath, clock: &IncreasingFn, zeta: &SampledPath) -> Result<f64> {
    let rebuilt = stieltjes_compose_scalar(psi, clock)?;
    zeta.grid().require_same(rebuilt.grid(), "reconstruction_error")?;
    Ok(rebuilt
        .data()
        .iter()
        .zip(zeta.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `sup_t op_norm((Phi o L)(t) - K(t))` over grid nodes.
pub fn matrix_reconstruction_error(phi: &MatrixPath, clock: &IncreasingFn, k: &MatrixPath) -> Result<f64> {
    let rebuilt = stieltjes_compose(phi, clock)?;
    k.grid().require_same(rebuilt.grid(), "matrix_reconstruction_error")?;
    Ok((0..k.len())
        .map(|t| rebuilt.at(t).sub(&k.at(t)).norm())
        .fold(0.0, f64::max))
}
