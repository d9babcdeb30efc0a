//! Block LOBPCG for the lowest nonzero eigenpairs of `Q`.
//!
//! Every trial direction is pushed through the null-space projector and made
//! orthogonal to the harmonic fields, so Rayleigh-Ritz never sees the zero
//! eigenvalues. `Q` itself maps into the transverse space, so products need no
//! further projection. Only unconverged columns up to the end of the
//! requested cluster contribute residual directions (soft locking); the
//! remaining guard columns are refined through Rayleigh-Ritz alone.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bank::{BankExtent, ModeBank};
use super::cluster::{canonical_rotation, clusters};
use super::{harmonic_basis, NullSpaceProjector, QOperator, SolveOptions, CLUSTER_TOL};
use crate::error::{Error, Result};
use crate::fourier::SeparableBasis;
use crate::linalg::{gemm, mul, svqb, svqb_adaptive, sym_eigen, tmul};
use crate::medium::MediumProfile;

/// `sqrt(eps) (-Laplacian + shift)^-1 sqrt(eps)` applied per component.
struct Preconditioner {
    basis: SeparableBasis,
    sqrt_eps: Vec<f64>,
    inv_h2: f64,
    shift: f64,
    buf: Vec<f64>,
}

impl Preconditioner {
    fn new(m: &MediumProfile) -> Self {
        let grid = m.grid();
        let basis = SeparableBasis::new(grid.dims());
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let lowest = basis.min_nonzero_symbol();
        let shift = if lowest.is_finite() { 0.5 * lowest * inv_h2 } else { inv_h2 };
        Self { basis, sqrt_eps: m.sqrt_eps().to_vec(), inv_h2, shift, buf: vec![0.0; grid.cells()] }
    }

    fn apply(&mut self, r: &mut [f64]) {
        let n = self.buf.len();
        r.iter_mut().zip(&self.sqrt_eps).for_each(|(v, s)| *v *= s);
        let (inv_h2, shift) = (self.inv_h2, self.shift);
        for comp in r.chunks_mut(n) {
            self.buf.copy_from_slice(comp);
            self.basis.filter(&self.buf, comp, |s| 1.0 / (s * inv_h2 + shift));
        }
        r.iter_mut().zip(&self.sqrt_eps).for_each(|(v, s)| *v *= s);
    }
}

/// `z -= basis (basis^T z)`, twice for stability.
fn orthogonalize_against(basis: &DMatrix<f64>, z: &mut DMatrix<f64>) {
    if basis.ncols() == 0 || z.ncols() == 0 {
        return;
    }
    for _ in 0..2 {
        let c = tmul(basis, z);
        gemm(-1.0, basis, false, &c, 1.0, z);
    }
}

fn orthogonalize_once(basis: &DMatrix<f64>, z: &mut DMatrix<f64>) {
    let c = tmul(basis, z);
    gemm(-1.0, basis, false, &c, 1.0, z);
}

fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        out.column_mut(k).copy_from(&x.column(j));
    }
    out
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut data = Vec::with_capacity(n * (a.ncols() + b.ncols()));
    data.extend_from_slice(a.as_slice());
    data.extend_from_slice(b.as_slice());
    DMatrix::from_vec(n, a.ncols() + b.ncols(), data)
}

struct State {
    x: DMatrix<f64>,
    ax: DMatrix<f64>,
    lambda: Vec<f64>,
}

/// Rayleigh-Ritz on the orthonormal columns of `x`.
fn rayleigh_ritz(x: DMatrix<f64>, ax: DMatrix<f64>) -> State {
    let (lambda, c) = sym_eigen(tmul(&x, &ax));
    State { x: mul(&x, &c), ax: mul(&ax, &c), lambda }
}

fn residual_norms(s: &State) -> Vec<f64> {
    let n = s.x.nrows();
    s.x.as_slice()
        .chunks(n)
        .zip(s.ax.as_slice().chunks(n))
        .zip(&s.lambda)
        .map(|((x, ax), &l)| libm::sqrt(x.iter().zip(ax).map(|(a, b)| (b - l * a) * (b - l * a)).sum::<f64>()))
        .collect()
}

fn omegas(lambda: &[f64]) -> Vec<f64> {
    lambda.iter().map(|&l| libm::sqrt(l.max(0.0))).collect()
}

/// Index one past the degenerate cluster that contains `n_modes - 1`. A Ritz
/// value is within `||r||` of an eigenvalue, so unconverged neighbours are
/// counted in whenever their uncertainty reaches the cluster.
fn cluster_end(omega: &[f64], rn: &[f64], n_modes: usize) -> usize {
    let tol = CLUSTER_TOL * omega[n_modes - 1];
    let slack = |j: usize| if omega[j] > 0.0 { rn[j] / (2.0 * omega[j]) } else { f64::INFINITY };
    let mut end = n_modes;
    while end < omega.len() && omega[end] - omega[end - 1] <= tol + slack(end) + slack(end - 1) {
        end += 1;
    }
    end
}

pub(super) fn solve(op: &QOperator, n_modes: usize, block: usize, opts: &SolveOptions) -> Result<ModeBank> {
    let medium = op.medium().clone();
    let grid = *medium.grid();
    let n = grid.vector_len();
    let m = block;
    let mut proj = NullSpaceProjector::new(&medium, opts.projection_tol)?;
    let harmonics = harmonic_basis(&medium, opts.projection_tol)?;
    let mut prec = Preconditioner::new(&medium);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::zeros(n, m);
    x.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    proj.project_block(&mut x)?;
    orthogonalize_against(&harmonics, &mut x);
    let x = svqb(x, 1e-12);
    if x.ncols() < m {
        return Err(Error::InvalidArgument("random start block is rank deficient".into()));
    }
    let ax = op.apply_block(&x);
    let mut s = rayleigh_ritz(x, ax);
    let mut p: Option<DMatrix<f64>> = None;
    let mut worst = f64::INFINITY;
    let mut converged_at = None;

    for it in 0..opts.max_iterations {
        let rn = residual_norms(&s);
        let omega = omegas(&s.lambda);
        let need = cluster_end(&omega, &rn, n_modes);
        let tiny = f64::MIN_POSITIVE;
        let done: Vec<bool> = rn.iter().zip(&s.lambda).map(|(&r, &l)| r <= opts.tol * l.max(tiny)).collect();
        worst = (0..need).map(|j| rn[j] / s.lambda[j].max(tiny)).fold(0.0, f64::max);
        if done[..need].iter().all(|&d| d) {
            converged_at = Some(it);
            break;
        }
        let active: Vec<usize> = (0..need).filter(|&j| !done[j]).collect();

        let mut w = select_columns(&s.ax, &active);
        for (k, &j) in active.iter().enumerate() {
            let l = s.lambda[j];
            let mut col = w.column_mut(k);
            col.axpy(-l, &s.x.column(j), 1.0);
        }
        let nr = w.nrows();
        for col in w.as_mut_slice().chunks_mut(nr) {
            prec.apply(col);
        }
        let mut z = match &p {
            Some(p) => hcat(&w, &select_columns(p, &active)),
            None => w,
        };
        // Removing X first and projecting afterwards keeps the projection
        // tolerance relative to what survives; X itself is transverse, so the
        // two steps commute up to rounding.
        orthogonalize_once(&s.x, &mut z);
        proj.project_block(&mut z)?;
        orthogonalize_against(&harmonics, &mut z);
        orthogonalize_once(&s.x, &mut z);
        let z = svqb_adaptive(z, 1e-10);
        if z.ncols() == 0 {
            break;
        }
        let az = op.apply_block(&z);
        let q = z.ncols();
        let xaz = tmul(&s.x, &az);
        let zaz = tmul(&z, &az);
        let mut g = DMatrix::zeros(m + q, m + q);
        for j in 0..m {
            g[(j, j)] = s.lambda[j];
        }
        g.view_mut((0, m), (m, q)).copy_from(&xaz);
        g.view_mut((m, 0), (q, m)).copy_from(&xaz.transpose());
        g.view_mut((m, m), (q, q)).copy_from(&zaz);
        let (vals, vecs) = sym_eigen(g);
        let cx = vecs.view((0, 0), (m, m)).into_owned();
        let cz = vecs.view((m, 0), (q, m)).into_owned();
        let mut x = mul(&s.x, &cx);
        let mut ax = mul(&s.ax, &cx);
        let pz = mul(&z, &cz);
        gemm(1.0, &az, false, &cz, 1.0, &mut ax);
        x += &pz;
        p = Some(pz);
        s = State { x, ax, lambda: vals[..m].to_vec() };

        if (it + 1) % 10 == 0 {
            // periodic cleanup of accumulated rounding in X
            let mut x = core::mem::replace(&mut s.x, DMatrix::zeros(0, 0));
            proj.project_block(&mut x)?;
            orthogonalize_against(&harmonics, &mut x);
            let x = svqb(x, 1e-12);
            let ax = op.apply_block(&x);
            s = rayleigh_ritz(x, ax);
            p = None;
        }
    }
    if converged_at.is_none() {
        return Err(Error::NotConverged { solver: "lobpcg", iterations: opts.max_iterations, residual: worst });
    }

    let omega = omegas(&s.lambda);
    let need = cluster_end(&omega, &residual_norms(&s), n_modes);
    let ctol = CLUSTER_TOL * omega[n_modes - 1];
    let groups = clusters(&omega[..need], ctol);
    for &(a, b) in &groups {
        let v = s.x.columns(a, b - a).into_owned();
        let c = canonical_rotation(&v);
        let xv = mul(&v, &c);
        let axv = mul(&s.ax.columns(a, b - a).into_owned(), &c);
        s.x.columns_mut(a, b - a).copy_from(&xv);
        s.ax.columns_mut(a, b - a).copy_from(&axv);
        for k in a..b {
            s.lambda[k] = s.x.column(k).dot(&s.ax.column(k));
        }
    }
    let omega = omegas(&s.lambda);
    let (last_start, last_end) = *groups.last().expect("at least one cluster");
    let scale = 1.0 / libm::sqrt(grid.cell_volume());
    let g = s.x.columns(0, n_modes).into_owned() * scale;
    let mut freqs = omega[..n_modes].to_vec();
    // Ritz values inside a cluster can be out of order by rounding
    for k in 1..freqs.len() {
        if freqs[k] < freqs[k - 1] {
            freqs[k] = freqs[k - 1];
        }
    }
    let whole = m == super::transverse_dimension(&grid);
    let cut_inside = last_end > n_modes || (need == m && !whole);
    let band_top = match (cut_inside, last_start) {
        (false, _) => freqs[n_modes - 1],
        (true, 0) => 0.0,
        (true, k) => freqs[k - 1],
    };
    Ok(ModeBank::assemble(medium, op.variant(), freqs, g, BankExtent { complete: false, band_top }))
}
