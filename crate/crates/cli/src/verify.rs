//! Invariant suite behind the `verify` task.

use dielq_core::electrostatics::{decompose_with, PoissonOptions, PoissonSolver};
use dielq_core::lattice::{curl, curl_t, div, div_face, grad, Grid, Placement, ScalarField, VectorField};
use dielq_core::medium::MediumProfile;
use dielq_core::modes::{solve_modes_with, transverse_dimension, ModeBank, QOperator, SolveOptions, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::RunError;

/// Poisson tolerance of the decomposition checks, independent of the run's own.
pub const CHECK_POISSON_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {:e} > {:e}", c.name, c.value, c.tolerance))
            .collect()
    }
}

fn random_scalar(g: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::from_values(g, (0..g.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_vector(g: Grid, p: Placement, rng: &mut ChaCha8Rng) -> VectorField {
    VectorField::from_values(g, p, (0..g.vector_len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn operator_checks(g: Grid, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<(), RunError> {
    let phi = random_scalar(g, rng);
    let v = random_vector(g, Placement::Edge, rng);
    let w = random_vector(g, Placement::Face, rng);
    let s2 = g.spacing() * g.spacing();
    out.push(Check::new("curl_grad", curl(&grad(&phi))?.max_abs() * s2, 1e-13));
    out.push(Check::new("div_curl_t", div(&curl_t(&w)?)?.max_abs() * s2, 1e-13));
    out.push(Check::new("div_face_curl", div_face(&curl(&v)?)?.max_abs() * s2, 1e-13));

    let gp = grad(&phi);
    let adj = (gp.inner(&v)? + phi.inner(&div(&v)?)?).abs() / (gp.norm() * v.norm()).max(f64::MIN_POSITIVE);
    out.push(Check::new("grad_div_adjoint", adj, 1e-12));
    let cv = curl(&v)?;
    let adj = (cv.inner(&w)? - v.inner(&curl_t(&w)?)?).abs() / (cv.norm() * w.norm()).max(f64::MIN_POSITIVE);
    out.push(Check::new("curl_adjoint", adj, 1e-12));
    Ok(())
}

fn decomposition_checks(m: &MediumProfile, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<(), RunError> {
    let g = *m.grid();
    let x = random_vector(g, Placement::Edge, rng);
    let mut solver = PoissonSolver::new(m, PoissonOptions::with_tol(CHECK_POISSON_TOL))?;
    let d = decompose_with(&mut solver, &x)?;
    let scale = x.max_abs();
    out.push(Check::new("decompose_reconstruction", d.x1.add(&d.x2)?.sub(&x)?.max_abs() / scale, 1e-12));
    out.push(Check::new("decompose_div_x1", div(&d.x1)?.norm() * g.spacing() / x.norm(), 1e-9));
    let again = decompose_with(&mut solver, &d.x1)?;
    out.push(Check::new("decompose_idempotent", again.x1.sub(&d.x1)?.max_abs() / scale, 2e-10));
    let longitudinal = decompose_with(&mut solver, &d.x2)?;
    out.push(Check::new("decompose_longitudinal", longitudinal.x1.max_abs() / scale, 2e-10));
    Ok(())
}

/// Lattice dispersion of a homogeneous medium, two polarizations per nonzero wavevector.
pub fn homogeneous_spectrum(g: &Grid, eps: f64) -> Vec<f64> {
    let [nx, ny, nz] = g.dims();
    let mut w = Vec::with_capacity(2 * g.cells());
    let s = |m: usize, n: usize| (std::f64::consts::PI * m as f64 / n as f64).sin().powi(2);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if i + j + k == 0 {
                    continue;
                }
                let v = 2.0 / g.spacing() * (s(i, nx) + s(j, ny) + s(k, nz)).sqrt() / eps.sqrt();
                w.push(v);
                w.push(v);
            }
        }
    }
    w.sort_by(f64::total_cmp);
    w
}

fn bank_checks(bank: &ModeBank, eigen_tol: f64, out: &mut Vec<Check>) {
    let r = bank.report();
    out.push(Check::new("bank_gram_defect", r.gram_defect, 1e-8));
    let rel = r.residuals.iter().zip(bank.frequencies()).map(|(res, w)| res / (w * w)).fold(0.0, f64::max);
    out.push(Check::new("bank_relative_residual", rel, 10.0 * eigen_tol));
    out.push(Check::new("bank_divergence", r.max_divergence(), 1e-8));
    let bad_order = bank.frequencies().windows(2).filter(|w| w[1] < w[0]).count();
    out.push(Check::new("bank_ascending", bad_order as f64, 0.0));
}

fn dispersion_check(name: &str, bank: &ModeBank, eps: f64, eigen_tol: f64, out: &mut Vec<Check>) {
    let want = homogeneous_spectrum(bank.grid(), eps);
    let dev = bank.frequencies().iter().zip(&want).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    out.push(Check::new(name, dev, 10.0 * eigen_tol));
}

/// Runs the suite; a homogeneous medium without a bank gets its own lowest-shell solve.
pub fn verify(
    medium: &MediumProfile,
    variant: Variant,
    bank: Option<&ModeBank>,
    eigen_tol: f64,
    seed: u64,
) -> Result<VerifyReport, RunError> {
    let g = *medium.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    operator_checks(g, &mut rng, &mut checks)?;
    decomposition_checks(medium, &mut rng, &mut checks)?;
    let homogeneous = medium.uniform_eps().filter(|_| medium.mu().is_none());
    if let Some(b) = bank {
        bank_checks(b, eigen_tol, &mut checks);
        if let Some(eps) = homogeneous {
            dispersion_check("bank_dispersion", b, eps, eigen_tol, &mut checks);
        }
    } else if let Some(eps) = homogeneous {
        let spectrum = homogeneous_spectrum(&g, eps);
        if let Some(&lowest) = spectrum.first() {
            let shell = spectrum.iter().take_while(|&&w| w <= lowest * (1.0 + 1e-12)).count();
            if shell <= transverse_dimension(&g) {
                let op = QOperator::with_variant(medium.clone(), variant);
                let opts = SolveOptions { tol: eigen_tol, seed, ..SolveOptions::default() };
                let b = solve_modes_with(&op, shell, &opts)?;
                bank_checks(&b, eigen_tol, &mut checks);
                dispersion_check("lowest_shell_dispersion", &b, eps, eigen_tol, &mut checks);
            }
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { passed, seed, checks })
}
