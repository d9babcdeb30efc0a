//! Dense helpers on column-major `DMatrix<f64>` blocks: GEMM through
//! `matrixmultiply`, symmetric eigensolves sorted ascending, and SVQB
//! orthonormalization.

use alloc::vec::Vec;
use nalgebra::DMatrix;

/// `c = alpha * op(a) * b + beta * c`, `op(a) = a^T` when `trans_a`.
pub(crate) fn gemm(alpha: f64, a: &DMatrix<f64>, trans_a: bool, b: &DMatrix<f64>, beta: f64, c: &mut DMatrix<f64>) {
    let (ar, ac) = a.shape();
    let (m, k, rsa, csa) = if trans_a { (ac, ar, ar as isize, 1) } else { (ar, ac, 1, ar as isize) };
    let (br, n) = b.shape();
    assert_eq!(k, br, "gemm inner dimension");
    assert_eq!(c.shape(), (m, n), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        *c *= beta;
        return;
    }
    // SAFETY: shapes checked above; strides describe column-major storage of each matrix.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            1,
            br as isize,
            beta,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

/// `a^T b`.
pub(crate) fn tmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a.ncols(), b.ncols());
    gemm(1.0, a, true, b, 0.0, &mut c);
    c
}

/// `a b`.
pub(crate) fn mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a.nrows(), b.ncols());
    gemm(1.0, a, false, b, 0.0, &mut c);
    c
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
pub(crate) fn sym_eigen(mut g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    // exact symmetrization guards against rounding asymmetry in assembled Gram matrices
    let n = g.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Orthonormalizes the columns of `z` in place (two SVQB passes), dropping
/// directions whose relative singular value falls below `drop`.
/// One SVQB pass, repeated only when the kept spectrum is wide enough for a
/// single pass to leave visible loss of orthogonality.
pub(crate) fn svqb_adaptive(z: DMatrix<f64>, drop: f64) -> DMatrix<f64> {
    let (z, ratio) = svqb_pass(z, drop);
    if ratio < 1e-6 && z.ncols() > 0 {
        svqb_pass(z, drop).0
    } else {
        z
    }
}

pub(crate) fn svqb(z: DMatrix<f64>, drop: f64) -> DMatrix<f64> {
    let (z, _) = svqb_pass(z, drop);
    svqb_pass(z, drop).0
}

/// Returns the orthonormalized block and the smallest kept eigenvalue ratio
/// of the scaled Gram matrix.
fn svqb_pass(z: DMatrix<f64>, drop: f64) -> (DMatrix<f64>, f64) {
    if z.ncols() == 0 {
        return (z, 1.0);
    }
    let g = tmul(&z, &z);
    let d: Vec<f64> = (0..g.nrows()).map(|i| g[(i, i)]).collect();
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    if dmax == 0.0 {
        return (DMatrix::zeros(z.nrows(), 0), 1.0);
    }
    let scale: Vec<f64> = d.iter().map(|&v| if v > 1e-300 * dmax { 1.0 / libm::sqrt(v) } else { 0.0 }).collect();
    let gs = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] * scale[i] * scale[j]);
    let (theta, u) = sym_eigen(gs);
    let tmax = theta.last().cloned().unwrap_or(0.0);
    let keep: Vec<usize> = (0..theta.len()).filter(|&i| theta[i] > drop * tmax).collect();
    let ratio = keep.first().map_or(1.0, |&i| theta[i] / tmax);
    let t = DMatrix::from_fn(g.nrows(), keep.len(), |i, j| scale[i] * u[(i, keep[j])] / libm::sqrt(theta[keep[j]]));
    (mul(&z, &t), ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_products() {
        let a = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4);
        let b = DMatrix::from_fn(5, 4, |i, j| libm::sin((i + 2 * j) as f64));
        let c = DMatrix::from_fn(3, 4, |i, j| i as f64 - j as f64);
        assert!((tmul(&a, &b) - a.transpose() * &b).amax() < 1e-14);
        assert!((mul(&c.transpose(), &a.transpose()) - c.transpose() * a.transpose()).amax() < 1e-14);
        let mut acc = c.clone();
        gemm(2.0, &a, true, &b, -1.0, &mut acc);
        assert!((acc - (a.transpose() * &b * 2.0 - c)).amax() < 1e-13);
    }

    #[test]
    fn svqb_orthonormalizes_and_drops_dependent_columns() {
        let mut z = DMatrix::from_fn(20, 4, |i, j| libm::cos((i * (j + 1)) as f64 * 0.37));
        let dup = z.column(1) * 3.0;
        z.set_column(3, &dup);
        let q = svqb(z, 1e-12);
        assert_eq!(q.ncols(), 3);
        assert!((tmul(&q, &q) - DMatrix::identity(3, 3)).amax() < 1e-13);
    }

    #[test]
    fn sym_eigen_is_sorted() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -1.0]);
        let (vals, vecs) = sym_eigen(g.clone());
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..3 {
            let r = &g * vecs.column(k) - vecs.column(k) * vals[k];
            assert!(r.amax() < 1e-12);
        }
    }
}
