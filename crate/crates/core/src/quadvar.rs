//! Realized quadratic variation and its distance from a quadratic characteristic.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::path::{MatrixPath, PathKind, SampledPath, TimeGrid};

/// `[Y](t) = sum over partition cells ending at or before t of (dY)(dY)^T`,
/// sampled on `partition`.
pub fn realized_qv(y: &SampledPath, partition: &TimeGrid) -> Result<MatrixPath> {
    let idx = y.grid().embed(partition)?;
    let d = y.dim();
    let dd = d * d;
    let mut data = vec![0.0; partition.len() * dd];
    let mut inc = vec![0.0; d];
    for k in 1..idx.len() {
        let (prev, cur) = data.split_at_mut(k * dd);
        let cur = &mut cur[..dd];
        cur.copy_from_slice(&prev[(k - 1) * dd..]);
        let (a, b) = (y.value(idx[k - 1]), y.value(idx[k]));
        for c in 0..d {
            inc[c] = b[c] - a[c];
        }
        for r in 0..d {
            for c in 0..d {
                cur[r * d + c] += inc[r] * inc[c];
            }
        }
    }
    Ok(MatrixPath::from_parts(partition.clone(), d, data, PathKind::CadlagConstant))
}

/// `op_norm([Y](s) - K(s))` at every node of the shared grid, with `[Y]` on the
/// full grid.
pub fn qv_discrepancy_profile(y: &SampledPath, k: &MatrixPath) -> Result<Vec<f64>> {
    y.grid().require_same(k.grid(), "qv_discrepancy")?;
    if y.dim() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: y.dim(),
            got: k.dim(),
        });
    }
    let qv = realized_qv(y, y.grid())?;
    let d = y.dim();
    let mut diff = vec![0.0; d * d];
    Ok((0..y.len())
        .map(|i| {
            for ((o, a), b) in diff.iter_mut().zip(qv.slice(i)).zip(k.slice(i)) {
                *o = a - b;
            }
            SymMatrix::from_raw(d, diff.clone()).norm()
        })
        .collect())
}

/// `sup_{s <= t} op_norm([Y](s) - K(s))` over grid nodes.
pub fn qv_discrepancy(y: &SampledPath, k: &MatrixPath, t: f64) -> Result<f64> {
    let profile = qv_discrepancy_profile(y, k)?;
    let last = y.grid().floor_index(t);
    Ok(profile[..=last].iter().copied().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NoiseSeed;
    use crate::simulate::sample_brownian;
    use proptest::prelude::*;

    #[test]
    fn constant_path_has_zero_qv() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let y = SampledPath::constant(grid.clone(), &[2.0, -1.0], PathKind::ContinuousLinear);
        let qv = realized_qv(&y, &grid).unwrap();
        assert!(qv.data().iter().all(|v| *v == 0.0));
        let k = MatrixPath::constant(grid.clone(), &SymMatrix::zeros(2), PathKind::CadlagConstant);
        assert_eq!(qv_discrepancy(&y, &k, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn finite_variation_path_has_vanishing_qv() {
        for steps in [10usize, 100, 1000] {
            let grid = TimeGrid::uniform(1.0, steps).unwrap();
            let y = SampledPath::from_scalars(grid.clone(), grid.nodes().to_vec(), PathKind::ContinuousLinear).unwrap();
            let h = 1.0 / steps as f64;
            let v = realized_qv(&y, &grid).unwrap().at(steps).get(0, 0);
            assert!((v - h).abs() < 1e-12, "{v} vs {h}");
        }
    }

    #[test]
    fn brownian_qv_and_discrepancy_against_zero() {
        let grid = TimeGrid::uniform(1.0, 1024).unwrap();
        let n = 1000;
        let mut mean = SymMatrix::zeros(2);
        let zero = MatrixPath::constant(grid.clone(), &SymMatrix::zeros(2), PathKind::CadlagConstant);
        let mut disc = Vec::new();
        for p in 0..n {
            let w = sample_brownian(2, &grid, NoiseSeed::new(21, p)).unwrap();
            mean.add_scaled_assign(1.0 / n as f64, &realized_qv(&w, &grid).unwrap().at(1024));
            disc.push(qv_discrepancy(&w, &zero, 1.0).unwrap());
        }
        assert!(mean.sub(&SymMatrix::identity(2)).norm() <= 0.05);
        disc.sort_by(f64::total_cmp);
        let median = disc[disc.len() / 2];
        assert!((median - 1.0).abs() < 0.15, "{median}");
    }

    #[test]
    fn coarse_partition_must_be_subgrid() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let y = SampledPath::constant(grid, &[0.0], PathKind::ContinuousLinear);
        let bad = TimeGrid::uniform(1.0, 3).unwrap();
        assert!(matches!(realized_qv(&y, &bad), Err(Error::InvalidInput(_))));
        let good = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(realized_qv(&y, &good).unwrap().len(), 5);
    }

    proptest! {
        #[test]
        fn qv_is_psd_monotone_with_trace_identity(values in prop::collection::vec(-5.0f64..5.0, 2 * 12)) {
            let grid = TimeGrid::uniform(1.0, 11).unwrap();
            let y = SampledPath::new(grid.clone(), 2, values, PathKind::ContinuousLinear).unwrap();
            let qv = realized_qv(&y, &grid).unwrap();
            let mut sq = 0.0;
            for i in 1..grid.len() {
                let step = qv.at(i).sub(&qv.at(i - 1));
                prop_assert!(step.min_eigenvalue() >= -1e-10);
                sq += y.increment_norm(i).powi(2);
                prop_assert!((qv.trace_at(i) - sq).abs() <= 1e-10 * (1.0 + sq));
            }
        }
    }
}
