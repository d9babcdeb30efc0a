//! Eigenmodes of `Q = eps^-1/2 curl_t (mu^-1 curl) eps^-1/2` on edge fields.
//!
//! Work is done in the `g` representation, where `Q` is symmetric under the
//! plain inner product; the physical mode is `h = g / sqrt(eps)`. Modes are
//! normalized so that `sum g^2 dV = 1`, which is the same as
//! `sum eps h^2 dV = 1`.
//!
//! Besides the gradient null space, `Q` annihilates three uniform
//! ("harmonic") fields on a periodic box. The iterative solver deflates them
//! and returns nonzero-frequency modes only; [`dense_mode_bank`] builds the
//! complete transverse basis including them.

mod bank;
mod cluster;
mod dense;
mod lobpcg;

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::electrostatics::{harmonic_field_with, PoissonOptions, PoissonSolver, Preconditioner};
use crate::error::{Error, Result};
use crate::lattice::{curl_into, curl_t_into, div_into, grad_into, Grid, Placement, VectorField};
use crate::medium::MediumProfile;

pub use bank::{mode_residual_report, BankExtent, ModeBank, ModeReport};
pub use dense::{dense_mode_bank, DENSE_LIMIT};

/// Which curl-curl operator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Variant {
    Nonmagnetic,
    /// `1/mu` (face samples) between the two curls; `mu = 1` when the medium has none.
    Magnetic,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Nonmagnetic => 0,
            Variant::Magnetic => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Nonmagnetic),
            1 => Some(Variant::Magnetic),
            _ => None,
        }
    }
}

/// The operator `Q` bound to a medium.
#[derive(Debug, Clone)]
pub struct QOperator {
    medium: Arc<MediumProfile>,
    variant: Variant,
    inv_mu: Option<Vec<f64>>,
}

impl QOperator {
    pub fn new(medium: impl Into<Arc<MediumProfile>>) -> Self {
        Self { medium: medium.into(), variant: Variant::Nonmagnetic, inv_mu: None }
    }

    pub fn magnetic(medium: impl Into<Arc<MediumProfile>>) -> Self {
        let medium = medium.into();
        let n = medium.grid().vector_len();
        let inv_mu = match medium.mu() {
            Some(mu) => mu.iter().map(|m| 1.0 / m).collect(),
            None => vec![1.0; n],
        };
        Self { medium, variant: Variant::Magnetic, inv_mu: Some(inv_mu) }
    }

    pub fn with_variant(medium: impl Into<Arc<MediumProfile>>, variant: Variant) -> Self {
        match variant {
            Variant::Nonmagnetic => Self::new(medium),
            Variant::Magnetic => Self::magnetic(medium),
        }
    }

    pub fn medium(&self) -> &Arc<MediumProfile> {
        &self.medium
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn grid(&self) -> &Grid {
        self.medium.grid()
    }

    /// `out = Q g`; `face` is scratch of the same length.
    pub(crate) fn apply_slice(&self, g: &[f64], out: &mut [f64], face: &mut [f64]) {
        let grid = self.medium.grid();
        let w = self.medium.inv_sqrt_eps();
        out.iter_mut().zip(g.iter().zip(w)).for_each(|(o, (x, s))| *o = x * s);
        curl_into(grid, out, face);
        if let Some(inv_mu) = &self.inv_mu {
            face.iter_mut().zip(inv_mu).for_each(|(f, m)| *f *= m);
        }
        curl_t_into(grid, face, out);
        out.iter_mut().zip(w).for_each(|(o, s)| *o *= s);
    }

    /// `curl_t(mu^-1 curl h)`, the left side of the wave equation for `h`.
    pub(crate) fn curl_curl(&self, h: &[f64], out: &mut [f64], face: &mut [f64]) {
        let grid = self.medium.grid();
        curl_into(grid, h, face);
        if let Some(inv_mu) = &self.inv_mu {
            face.iter_mut().zip(inv_mu).for_each(|(f, m)| *f *= m);
        }
        curl_t_into(grid, face, out);
    }

    /// Applies `Q` to each column.
    pub(crate) fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let mut out = DMatrix::zeros(n, x.ncols());
        let mut face = vec![0.0; n];
        for (src, dst) in x.as_slice().chunks(n).zip(out.as_mut_slice().chunks_mut(n)) {
            self.apply_slice(src, dst, &mut face);
        }
        out
    }
}

/// `Q g` for an edge field.
pub fn apply_q(op: &QOperator, g: &VectorField) -> Result<VectorField> {
    g.expect(Placement::Edge)?;
    if g.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    let n = op.grid().vector_len();
    let mut out = vec![0.0; n];
    let mut face = vec![0.0; n];
    op.apply_slice(g.values(), &mut out, &mut face);
    VectorField::from_values(*op.grid(), Placement::Edge, out)
}

/// Removes the `sqrt(eps) grad psi` component of `g` fields.
pub(crate) struct NullSpaceProjector {
    grid: Grid,
    sqrt_eps: Vec<f64>,
    solver: PoissonSolver,
    sigma: Vec<f64>,
    psi: Vec<f64>,
    edge: Vec<f64>,
}

impl NullSpaceProjector {
    pub(crate) fn new(m: &MediumProfile, tol: f64) -> Result<Self> {
        let opts = PoissonOptions { tol, preconditioner: Preconditioner::Spectral, ..PoissonOptions::default() };
        let grid = *m.grid();
        Ok(Self {
            grid,
            sqrt_eps: m.sqrt_eps().to_vec(),
            solver: PoissonSolver::new(m, opts)?,
            sigma: vec![0.0; grid.cells()],
            psi: vec![0.0; grid.cells()],
            edge: vec![0.0; grid.vector_len()],
        })
    }

    pub(crate) fn project(&mut self, g: &mut [f64]) -> Result<()> {
        self.edge.iter_mut().zip(g.iter().zip(&self.sqrt_eps)).for_each(|(e, (x, s))| *e = x * s);
        div_into(&self.grid, &self.edge, &mut self.sigma);
        self.sigma.iter_mut().for_each(|v| *v = -*v);
        self.solver.solve_slice(&self.sigma, &mut self.psi, true)?;
        grad_into(&self.grid, &self.psi, &mut self.edge);
        g.iter_mut().zip(self.edge.iter().zip(&self.sqrt_eps)).for_each(|(x, (e, s))| *x -= e * s);
        Ok(())
    }

    pub(crate) fn project_block(&mut self, x: &mut DMatrix<f64>) -> Result<()> {
        let n = x.nrows();
        for col in x.as_mut_slice().chunks_mut(n) {
            self.project(col)?;
        }
        Ok(())
    }
}

/// Projects `g` onto `{g : div(sqrt(eps) g) = 0}` along `sqrt(eps) grad psi`.
pub fn project_transverse_g(g: &VectorField, m: &MediumProfile, tol: f64) -> Result<VectorField> {
    g.expect(Placement::Edge)?;
    if g.grid() != m.grid() {
        return Err(Error::GridMismatch);
    }
    let mut out = g.values().to_vec();
    NullSpaceProjector::new(m, tol)?.project(&mut out)?;
    VectorField::from_values(*m.grid(), Placement::Edge, out)
}

/// Orthonormal (plain Euclidean) basis of the three harmonic zero modes of `Q`.
pub(crate) fn harmonic_basis(m: &MediumProfile, tol: f64) -> Result<DMatrix<f64>> {
    let n = m.grid().vector_len();
    let mut solver = PoissonSolver::new(m, PoissonOptions::with_tol(tol))?;
    let mut y = DMatrix::zeros(n, 3);
    for axis in 0..3 {
        let (u, _) = harmonic_field_with(&mut solver, axis)?;
        for (i, (v, s)) in u.values().iter().zip(m.sqrt_eps()).enumerate() {
            y[(i, axis)] = v * s;
        }
    }
    Ok(crate::linalg::svqb(y, 1e-14))
}

/// Knobs for [`solve_modes_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Convergence when `||Q g - lambda g|| <= tol * lambda` for unit `g`.
    pub tol: f64,
    pub seed: u64,
    pub max_iterations: usize,
    /// Extra block vectors beyond the requested count; `None` picks a size.
    pub guard: Option<usize>,
    /// Relative residual of the Poisson solves used by the null-space projection.
    pub projection_tol: f64,
    /// Use the dense solver whenever the grid is small enough, regardless of block size.
    pub prefer_dense: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, seed: 0, max_iterations: 500, guard: None, projection_tol: 1e-12, prefer_dense: false }
    }
}

/// Relative frequency gap below which modes count as degenerate.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Maximal runs `[start, end)` of ascending frequencies whose neighbours differ by at most `tol`.
pub fn cluster_ranges(freqs: &[f64], tol: f64) -> Vec<(usize, usize)> {
    cluster::clusters(freqs, tol)
}

/// Number of nonzero-frequency transverse modes on `grid`: all `3N` edge
/// values minus the `N - 1` gradients and the three harmonic fields.
pub fn transverse_dimension(grid: &Grid) -> usize {
    (2 * grid.cells()).saturating_sub(2)
}

/// Lowest `n_modes` nonzero-frequency modes with default options.
pub fn solve_modes(op: &QOperator, n_modes: usize, tol: f64) -> Result<ModeBank> {
    solve_modes_with(op, n_modes, &SolveOptions { tol, ..SolveOptions::default() })
}

pub fn solve_modes_with(op: &QOperator, n_modes: usize, opts: &SolveOptions) -> Result<ModeBank> {
    let available = transverse_dimension(op.grid());
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be at least 1".into()));
    }
    if n_modes > available {
        return Err(Error::TooManyModes { requested: n_modes, available });
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidArgument(format!("eigen tolerance {} outside (0, 1)", opts.tol)));
    }
    let guard = opts.guard.unwrap_or_else(|| (n_modes / 5).max(8));
    let block = (n_modes + guard).min(available);
    let small = op.grid().vector_len() <= DENSE_LIMIT;
    if small && (opts.prefer_dense || 3 * block > available) {
        return dense::truncated_bank(op, n_modes);
    }
    lobpcg::solve(op, n_modes, block, opts)
}

#[cfg(test)]
mod tests;
