//! Generalized Poisson problem `div(eps grad chi) = -sigma` on the periodic
//! grid and the eps-weighted Helmholtz split built on it.
//!
//! The periodic operator has the constants as null space, so sources must
//! have zero mean and potentials are returned with zero mean.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fourier::SeparableBasis;
use crate::lattice::{div_into, dot, grad_into, Grid, Placement, ScalarField, Site, VectorField};
use crate::medium::{build_profile, periodic_distance, Descriptor, MediumProfile};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Preconditioner used by [`PoissonSolver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// Inverse diagonal of the operator.
    Jacobi,
    /// Exact inverse of the constant-coefficient operator at the mean permittivity.
    /// Converges in one step for homogeneous media.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonOptions {
    /// Relative residual target `||div(eps grad chi) + sigma|| / ||sigma||`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Subtract the mean of any source instead of rejecting it.
    pub auto_neutralize: bool,
    pub preconditioner: Preconditioner,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iterations: 100_000, auto_neutralize: false, preconditioner: Preconditioner::Jacobi }
    }
}

impl PoissonOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    /// Zero-mean potential.
    pub chi: ScalarField,
    /// Final relative residual.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Reusable conjugate-gradient solver bound to one medium.
///
/// Holds its own scratch buffers, so one instance must not be shared between
/// concurrent solves.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    grid: Grid,
    eps: Vec<f64>,
    opts: PoissonOptions,
    diag_inv: Vec<f64>,
    spectral: Option<(SeparableBasis, f64)>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    edge: Vec<f64>,
}

impl PoissonSolver {
    pub fn new(m: &MediumProfile, opts: PoissonOptions) -> Result<Self> {
        if !(opts.tol > 0.0 && opts.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("Poisson tolerance must be positive, got {}", opts.tol)));
        }
        let grid = *m.grid();
        let n = grid.cells();
        let eps = m.eps().to_vec();
        let h2 = grid.spacing() * grid.spacing();
        let dims = grid.dims();
        let mut diag = vec![0.0; n];
        for (c, d) in diag.iter_mut().enumerate() {
            for a in 0..3 {
                // a length-1 axis has an identically zero difference operator
                if dims[a] > 1 {
                    *d += (eps[a * n + c] + eps[a * n + grid.neighbor(c, a, -1)]) / h2;
                }
            }
        }
        let diag_inv = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
        let spectral = (opts.preconditioner == Preconditioner::Spectral).then(|| {
            let mean = eps.iter().sum::<f64>() / eps.len() as f64;
            (SeparableBasis::new(dims), mean / h2)
        });
        Ok(Self {
            grid,
            eps,
            opts,
            diag_inv,
            spectral,
            r: vec![0.0; n],
            z: vec![0.0; n],
            p: vec![0.0; n],
            q: vec![0.0; n],
            edge: vec![0.0; 3 * n],
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn options(&self) -> &PoissonOptions {
        &self.opts
    }

    /// Solves `div(eps grad chi) = -sigma` for zero-mean `chi`.
    pub fn solve(&mut self, sigma: &ScalarField) -> Result<PoissonSolution> {
        if *sigma.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut chi = vec![0.0; self.grid.cells()];
        let (residual_norm, iterations) = self.solve_slice(sigma.values(), &mut chi, false)?;
        Ok(PoissonSolution { chi: ScalarField::from_values(self.grid, chi)?, residual_norm, iterations })
    }

    /// Applies `A x = -div(eps grad x)` into `out`.
    fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        grad_into(&self.grid, x, &mut self.edge);
        self.edge.iter_mut().zip(&self.eps).for_each(|(e, w)| *e *= w);
        div_into(&self.grid, &self.edge, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    fn precondition(&mut self) {
        match &mut self.spectral {
            Some((basis, scale)) => {
                let scale = *scale;
                basis.filter(&self.r, &mut self.z, |s| if s > 1e-12 { 1.0 / (scale * s) } else { 0.0 });
            }
            None => self.z.iter_mut().zip(&self.r).zip(&self.diag_inv).for_each(|((z, r), d)| *z = r * d),
        }
        remove_mean(&mut self.z);
    }

    /// `structural` marks sources that are a divergence and so sum to zero up to
    /// rounding; those are always neutralized.
    pub(crate) fn solve_slice(&mut self, sigma: &[f64], chi: &mut [f64], structural: bool) -> Result<(f64, usize)> {
        let n = self.grid.cells();
        if sigma.len() != n || chi.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: sigma.len() });
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Poisson source"));
        }
        chi.fill(0.0);
        let norm = libm::sqrt(dot(sigma, sigma));
        if norm == 0.0 {
            return Ok((0.0, 0));
        }
        let mean = sigma.iter().sum::<f64>() / n as f64;
        if mean.abs() > 1e-12 * norm && !self.opts.auto_neutralize && !structural {
            return Err(Error::IncompatibleSource { mean, norm });
        }
        let mut b = sigma.to_vec();
        b.iter_mut().for_each(|v| *v -= mean);
        let bnorm = libm::sqrt(dot(&b, &b));
        if bnorm == 0.0 {
            return Ok((0.0, 0));
        }

        let tol = self.opts.tol;
        self.r.copy_from_slice(&b);
        self.precondition();
        self.p.copy_from_slice(&self.z);
        let mut rz = dot(&self.r, &self.z);
        let mut best = 1.0;
        let mut it = 0;
        let mut q = core::mem::take(&mut self.q);
        let mut p = core::mem::take(&mut self.p);
        let result = loop {
            let rel = libm::sqrt(dot(&self.r, &self.r)) / bnorm;
            if rel <= tol {
                // confirm against the true residual before accepting
                self.apply(chi, &mut q);
                for (ri, (bi, qi)) in self.r.iter_mut().zip(b.iter().zip(&q)) {
                    *ri = bi - qi;
                }
                let true_rel = libm::sqrt(dot(&self.r, &self.r)) / bnorm;
                best = f64::min(best, true_rel);
                if true_rel <= tol {
                    break Ok((true_rel, it));
                }
                // restart from the true residual
                self.precondition();
                p.copy_from_slice(&self.z);
                rz = dot(&self.r, &self.z);
            } else {
                best = f64::min(best, rel);
            }
            if it >= self.opts.max_iterations || rz <= 0.0 {
                break Err(Error::NotConverged { solver: "poisson-cg", iterations: it, residual: best });
            }
            self.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break Err(Error::NotConverged { solver: "poisson-cg", iterations: it, residual: best });
            }
            let alpha = rz / pq;
            chi.iter_mut().zip(&p).for_each(|(x, pi)| *x += alpha * pi);
            self.r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
            self.precondition();
            let rz_new = dot(&self.r, &self.z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&self.z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
            remove_mean(&mut p);
            remove_mean(chi);
            it += 1;
        };
        self.q = q;
        self.p = p;
        remove_mean(chi);
        let (_, iters) = result?;
        // report residual relative to the original source norm
        Ok((best.min(1.0) * bnorm / norm, iters))
    }
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// One-shot Jacobi-preconditioned solve of `div(eps grad chi) = -sigma`.
pub fn solve_poisson(sigma: &ScalarField, m: &MediumProfile, tol: f64) -> Result<PoissonSolution> {
    if *sigma.grid() != *m.grid() {
        return Err(Error::GridMismatch);
    }
    PoissonSolver::new(m, PoissonOptions::with_tol(tol))?.solve(sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// Divergence-free part.
    pub x1: VectorField,
    /// `eps * grad(chi)`.
    pub x2: VectorField,
    pub chi: ScalarField,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Splits an edge field into `x1 + eps * grad(chi)` with `div(x1) = 0`.
pub fn helmholtz_decompose(x: &VectorField, m: &MediumProfile, tol: f64) -> Result<DecompositionResult> {
    let mut solver = PoissonSolver::new(m, PoissonOptions::with_tol(tol))?;
    decompose_with(&mut solver, x)
}

/// [`helmholtz_decompose`] reusing an existing solver.
pub fn decompose_with(solver: &mut PoissonSolver, x: &VectorField) -> Result<DecompositionResult> {
    x.expect(Placement::Edge)?;
    if *x.grid() != solver.grid {
        return Err(Error::GridMismatch);
    }
    let grid = solver.grid;
    let mut sigma = vec![0.0; grid.cells()];
    div_into(&grid, x.values(), &mut sigma);
    sigma.iter_mut().for_each(|v| *v = -*v);
    let mut chi = vec![0.0; grid.cells()];
    let (residual_norm, iterations) = solver.solve_slice(&sigma, &mut chi, true)?;
    let mut x2 = vec![0.0; grid.vector_len()];
    grad_into(&grid, &chi, &mut x2);
    x2.iter_mut().zip(&solver.eps).for_each(|(v, e)| *v *= e);
    let x1: Vec<f64> = x.values().iter().zip(&x2).map(|(a, b)| a - b).collect();
    Ok(DecompositionResult {
        x1: VectorField::from_values(grid, Placement::Edge, x1)?,
        x2: VectorField::from_values(grid, Placement::Edge, x2)?,
        chi: ScalarField::from_values(grid, chi)?,
        residual_norm,
        iterations,
    })
}

/// Derivative of `integral x . Y` restricted to generalized-transverse `Y`:
/// the divergence-free part of `x`.
pub fn constrained_derivative_linear(x: &VectorField, m: &MediumProfile, tol: f64) -> Result<VectorField> {
    Ok(helmholtz_decompose(x, m, tol)?.x1)
}

/// Field `c_hat + grad(psi)` with `div(eps (c_hat + grad psi)) = 0`: the
/// response of the medium to a unit mean field along `axis`.
pub fn harmonic_field(m: &MediumProfile, axis: usize, opts: PoissonOptions) -> Result<VectorField> {
    let mut solver = PoissonSolver::new(m, opts)?;
    Ok(harmonic_field_with(&mut solver, axis)?.0)
}

pub(crate) fn harmonic_field_with(solver: &mut PoissonSolver, axis: usize) -> Result<(VectorField, usize)> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let grid = solver.grid;
    let n = grid.cells();
    let mut d = vec![0.0; 3 * n];
    d[axis * n..(axis + 1) * n].copy_from_slice(&solver.eps[axis * n..(axis + 1) * n]);
    let mut sigma = vec![0.0; n];
    div_into(&grid, &d, &mut sigma);
    let mut psi = vec![0.0; n];
    let (_, iterations) = solver.solve_slice(&sigma, &mut psi, true)?;
    let mut u = vec![0.0; 3 * n];
    grad_into(&grid, &psi, &mut u);
    u[axis * n..(axis + 1) * n].iter_mut().for_each(|v| *v += 1.0);
    Ok((VectorField::from_values(grid, Placement::Edge, u)?, iterations))
}

/// Ratio of the mean field inside a spherical vacuum cavity to the applied
/// mean field, for a host of permittivity `eps_out` filling the periodic box.
///
/// The sphere sits at the box centre; `radius` is in length units and must
/// span at least two cells and at most a quarter of the shortest box side.
pub fn cavity_field_factor(eps_out: f64, grid: Grid, radius: f64, tol: f64) -> Result<f64> {
    Ok(cavity_field(eps_out, grid, radius, tol)?.factor)
}

/// Interior statistics of the cavity solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityField {
    /// Mean interior x-field over the applied field.
    pub factor: f64,
    /// Largest relative deviation from the mean over samples within half the radius.
    pub max_deviation: f64,
    /// Root-mean-square relative deviation over the same samples.
    pub rms_deviation: f64,
    pub samples: usize,
    pub iterations: usize,
}

pub fn cavity_field(eps_out: f64, grid: Grid, radius: f64, tol: f64) -> Result<CavityField> {
    if !(eps_out.is_finite() && eps_out > 0.0) {
        return Err(Error::InvalidMedium(format!("eps_out must be positive, got {eps_out}")));
    }
    let l_min = grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
    if !(radius >= 2.0 * grid.spacing() && radius <= 0.25 * l_min) {
        return Err(Error::InvalidArgument(format!(
            "cavity radius {radius} outside [2 cells = {}, L/4 = {}]",
            2.0 * grid.spacing(),
            0.25 * l_min
        )));
    }
    let center = grid.lengths().map(|l| 0.5 * l);
    let desc = Descriptor::Sphere { center, radius, eps_in: 1.0, eps_out };
    let m = build_profile(&desc, grid)?;
    let mut solver = PoissonSolver::new(&m, PoissonOptions::with_tol(tol))?;
    let (u, iterations) = harmonic_field_with(&mut solver, 0)?;
    let ex = u.component(0);
    let dist = |idx: usize| periodic_distance(grid.position(Site::Edge(0), idx), center, grid.lengths());
    let inside: Vec<usize> = (0..grid.cells()).filter(|&idx| dist(idx) <= radius).collect();
    if inside.is_empty() {
        return Err(Error::InvalidArgument("cavity contains no x-edge samples".into()));
    }
    let factor = inside.iter().map(|&i| ex[i]).sum::<f64>() / inside.len() as f64;
    // uniformity is judged away from the staircased surface
    let core: Vec<f64> = inside.iter().filter(|&&i| dist(i) <= 0.5 * radius).map(|&i| ex[i] / factor - 1.0).collect();
    let max_deviation = core.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let rms_deviation = libm::sqrt(core.iter().map(|d| d * d).sum::<f64>() / core.len().max(1) as f64);
    Ok(CavityField { factor, max_deviation, rms_deviation, samples: inside.len(), iterations })
}
