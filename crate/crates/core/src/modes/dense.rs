//! Full dense eigendecomposition for small grids.
//!
//! The null space of `Q` is lifted out of the way with the shift
//! `c B K^+ B^T`, where `B = sqrt(eps) grad` and `K = B^T B`; that term is `c`
//! times the orthogonal projector onto `range(B)` and commutes with `Q`.
//! Eigenvalues below `c / 2` are then exactly the generalized-transverse ones.

use alloc::format;
use alloc::vec;

use nalgebra::DMatrix;

use super::bank::{BankExtent, ModeBank};
use super::cluster::{canonical_rotation, clusters};
use super::{transverse_dimension, QOperator, CLUSTER_TOL};
use crate::error::{Error, Result};
use crate::lattice::grad_into;
use crate::linalg::{mul, sym_eigen, tmul};

/// Largest edge-vector length (3N) accepted by the dense path.
pub const DENSE_LIMIT: usize = 1536;

/// Dense matrix of `Q` assembled column by column.
pub(crate) fn dense_q(op: &QOperator) -> DMatrix<f64> {
    let n = op.grid().vector_len();
    let mut q = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut face = vec![0.0; n];
    for (j, col) in q.as_mut_slice().chunks_mut(n).enumerate() {
        e[j] = 1.0;
        op.apply_slice(&e, col, &mut face);
        e[j] = 0.0;
    }
    q
}

/// Complete transverse bank: the `2N - 2` nonzero modes plus the three
/// zero-frequency harmonic modes, all clusters canonicalized.
pub fn dense_mode_bank(op: &QOperator) -> Result<ModeBank> {
    let medium = op.medium().clone();
    let grid = *medium.grid();
    let n = grid.vector_len();
    let cells = grid.cells();
    if n > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!("dense solve limited to 3N <= {DENSE_LIMIT}, grid has {n}")));
    }
    let q = dense_q(op);

    let mut b = DMatrix::zeros(n, cells);
    let mut unit = vec![0.0; cells];
    for (j, col) in b.as_mut_slice().chunks_mut(n).enumerate() {
        unit[j] = 1.0;
        grad_into(&grid, &unit, col);
        unit[j] = 0.0;
        col.iter_mut().zip(medium.sqrt_eps()).for_each(|(v, s)| *v *= s);
    }
    let (kv, kvec) = sym_eigen(tmul(&b, &b));
    let kmax = kv.last().cloned().unwrap_or(0.0);
    let keep: alloc::vec::Vec<usize> = (0..kv.len()).filter(|&i| kv[i] > 1e-10 * kmax).collect();
    // columns of bv span range(B) orthonormally
    let bv = mul(&b, &DMatrix::from_fn(cells, keep.len(), |r, c| kvec[(r, keep[c])] / libm::sqrt(kv[keep[c]])));

    let bound = (0..n).map(|i| q.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let shift = 2.0 * bound + 1.0 / (grid.spacing() * grid.spacing());
    let mut mat = q;
    crate::linalg::gemm(shift, &bv, false, &bv.transpose(), 1.0, &mut mat);
    let (vals, vecs) = sym_eigen(mat);
    let count = vals.iter().take_while(|&&v| v < 0.5 * shift).count();
    let expected = transverse_dimension(&grid) + 3;
    if count != expected {
        return Err(Error::InvalidArgument(format!(
            "dense transverse count {count} differs from the expected {expected}"
        )));
    }
    let zero_cut = 1e-9 * shift;
    let mut lambda: alloc::vec::Vec<f64> = vals[..count].iter().map(|&v| if v.abs() <= zero_cut { 0.0 } else { v }).collect();
    let mut x = vecs.columns(0, count).into_owned();
    let omega: alloc::vec::Vec<f64> = lambda.iter().map(|&l| libm::sqrt(l.max(0.0))).collect();
    let wmax = omega.last().cloned().unwrap_or(0.0);
    for (a, e) in clusters(&omega, CLUSTER_TOL * wmax) {
        let v = x.columns(a, e - a).into_owned();
        let c = canonical_rotation(&v);
        x.columns_mut(a, e - a).copy_from(&mul(&v, &c));
        if lambda[a] != 0.0 {
            // one shared value per cluster keeps the ordering exact
            let mean = lambda[a..e].iter().sum::<f64>() / (e - a) as f64;
            lambda[a..e].iter_mut().for_each(|l| *l = mean);
        }
    }
    let freqs: alloc::vec::Vec<f64> = lambda.iter().map(|&l| libm::sqrt(l.max(0.0))).collect();
    let g = x / libm::sqrt(grid.cell_volume());
    Ok(ModeBank::assemble(medium, op.variant(), freqs, g, BankExtent { complete: true, band_top: wmax }))
}

/// Lowest `n_modes` nonzero modes from the dense solve.
pub(crate) fn truncated_bank(op: &QOperator, n_modes: usize) -> Result<ModeBank> {
    let full = dense_mode_bank(op)?;
    let skip = full.frequencies().iter().take_while(|&&w| w == 0.0).count();
    if skip != 3 {
        return Err(Error::InvalidArgument(format!("expected 3 harmonic modes, found {skip}")));
    }
    let n = full.grid().vector_len();
    let nonzero = ModeBank::from_parts(
        full.medium().clone(),
        full.variant(),
        full.frequencies()[skip..].to_vec(),
        full.g_values()[skip * n..].to_vec(),
        BankExtent { complete: false, band_top: full.band_top() },
    )?;
    nonzero.truncated(n_modes)
}
