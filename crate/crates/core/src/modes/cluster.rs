//! Degenerate-cluster detection and a basis-independent canonical basis for
//! each cluster.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Maximal runs `[start, end)` of ascending `freqs` whose neighbours differ by
/// at most `tol`.
pub(crate) fn clusters(freqs: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=freqs.len() {
        if i == freqs.len() || freqs[i] - freqs[i - 1] > tol {
            if i > start {
                out.push((start, i));
            }
            start = i;
        }
    }
    out
}

/// Rotation `C` (k x k, orthogonal) such that `V C` is the Gram-Schmidt
/// orthonormalization of the projections of the unit vectors `e_0, e_1, ...`
/// onto the span of `V`, visited in index order. The result depends only on
/// the subspace, not on the basis `V` (orthonormal columns) that spans it.
pub(crate) fn canonical_rotation(v: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = v.shape();
    if k <= 1 {
        let mut c = DMatrix::identity(k, k);
        if k == 1 {
            // fix the sign by the first clearly nonzero component
            let amax = v.column(0).amax();
            if let Some(first) = v.column(0).iter().find(|x| x.abs() > 1e-3 * amax) {
                if *first < 0.0 {
                    c[(0, 0)] = -1.0;
                }
            }
        }
        return c;
    }
    let typical = libm::sqrt(k as f64 / n as f64);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    // strict first pass keeps the choice away from near-ties; relaxed pass completes the set
    for (min_norm, min_keep) in [(0.5 * typical, 0.5), (1e-8 * typical, 1e-6)] {
        for j in 0..n {
            if basis.len() == k {
                break;
            }
            let row: DVector<f64> = v.row(j).transpose();
            let rn = row.norm();
            if rn < min_norm {
                continue;
            }
            let mut r = row.clone();
            for _ in 0..2 {
                for b in &basis {
                    let d = b.dot(&r);
                    r.axpy(-d, b, 1.0);
                }
            }
            let rr = r.norm();
            if rr >= min_keep * rn {
                basis.push(r / rr);
            }
        }
        if basis.len() == k {
            break;
        }
    }
    let mut c = DMatrix::zeros(k, k);
    for (col, b) in basis.iter().enumerate() {
        c.set_column(col, b);
    }
    c
}
