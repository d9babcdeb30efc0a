//! Task orchestration for one configuration.

use std::path::{Path, PathBuf};

use dielq_core::electrostatics::{cavity_field, decompose_with, PoissonOptions, PoissonSolver};
use dielq_core::emission::{
    default_broadening, emission_rate, ldos_spectrum, local_field_corrected_rate, Broadening, BulkSource,
};
use dielq_core::lattice::{div, Grid, Placement, VectorField};
use dielq_core::medium::MediumProfile;
use dielq_core::modes::{solve_modes_with, ModeBank, QOperator, SolveOptions};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bankfile::{load_bank, save_bank};
use crate::config::{BroadeningSpec, RunConfig, Task};
use crate::error::RunError;
use crate::output::{write_json, Csv};
use crate::verify::{verify, VerifyReport};

/// LDOS frequencies handed to one worker at a time.
const LDOS_CHUNK: usize = 32;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
    /// Directory that relative `bank_in` paths are resolved against.
    pub base_dir: PathBuf,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self { out_dir: out_dir.into(), threads: None, base_dir: PathBuf::from(".") }
    }
}

#[derive(Debug, Default)]
pub struct RunSummary {
    /// Files written, in task order.
    pub artifacts: Vec<PathBuf>,
    pub verify: Option<VerifyReport>,
    pub bank: Option<ModeBank>,
}

/// Loads `config_path` and runs it with `bank_in` resolved next to the config.
pub fn run_file(config_path: &Path, out_dir: &Path, threads: Option<usize>) -> Result<RunSummary, RunError> {
    let config = RunConfig::load(config_path)?;
    let base_dir = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    run(&config, &RunOptions { out_dir: out_dir.to_path_buf(), threads, base_dir })
}

/// Validates and executes every task in order. A failed `verify` does not
/// stop later tasks; it turns the whole run into [`RunError::Invariant`].
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    config.validate()?;
    std::fs::create_dir_all(&opts.out_dir)
        .map_err(|e| RunError::schema(format!("output directory {}: {e}", opts.out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| RunError::schema(format!("threads: {e}")))?;
    pool.install(|| Runner::new(config, opts).and_then(Runner::execute))
}

struct Runner<'a> {
    config: &'a RunConfig,
    opts: &'a RunOptions,
    medium: MediumProfile,
    summary: RunSummary,
}

impl<'a> Runner<'a> {
    fn new(config: &'a RunConfig, opts: &'a RunOptions) -> Result<Self, RunError> {
        let medium = config.build_medium()?;
        let mut summary = RunSummary::default();
        if let Some(p) = &config.bank_in {
            let path = if p.is_absolute() { p.clone() } else { opts.base_dir.join(p) };
            let bank = load_bank(&path)?;
            if bank.grid() != medium.grid() || bank.medium().eps() != medium.eps() {
                return Err(RunError::schema(format!("bank_in {} was computed for a different grid or medium", path.display())));
            }
            summary.bank = Some(bank);
        }
        Ok(Self { config, opts, medium, summary })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.opts.out_dir.join(name)
    }

    fn execute(mut self) -> Result<RunSummary, RunError> {
        for &task in &self.config.tasks {
            info!("task {task:?}");
            match task {
                Task::Decompose => self.decompose()?,
                Task::Modes => self.modes()?,
                Task::Verify => self.verify()?,
                Task::Ldos => self.ldos()?,
                Task::Rate => self.rate()?,
                Task::CavityFactor => self.cavity()?,
            }
        }
        if let Some(v) = &self.summary.verify {
            if !v.passed {
                return Err(RunError::Invariant(v.failures()));
            }
        }
        Ok(self.summary)
    }

    fn bank(&self) -> &ModeBank {
        self.summary.bank.as_ref().expect("validated: a bank precedes this task")
    }

    fn decompose(&mut self) -> Result<(), RunError> {
        #[derive(Serialize)]
        struct Sample {
            seed: u64,
            reconstruction: f64,
            div_x1_relative: f64,
            transverse_fraction: f64,
            residual: f64,
            iterations: usize,
        }
        #[derive(Serialize)]
        struct Report {
            poisson_tol: f64,
            samples: Vec<Sample>,
        }
        let tol = self.config.solver.poisson_tol;
        let g = *self.medium.grid();
        let mut solver = PoissonSolver::new(&self.medium, PoissonOptions::with_tol(tol))?;
        let mut samples = Vec::new();
        for s in 0..self.config.decompose.samples as u64 {
            let seed = self.config.seed.wrapping_add(s);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = VectorField::from_values(g, Placement::Edge, (0..g.vector_len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            let d = decompose_with(&mut solver, &x)?;
            samples.push(Sample {
                seed,
                reconstruction: d.x1.add(&d.x2)?.sub(&x)?.max_abs() / x.max_abs(),
                div_x1_relative: div(&d.x1)?.norm() * g.spacing() / x.norm(),
                transverse_fraction: d.x1.norm() / x.norm(),
                residual: d.residual_norm,
                iterations: d.iterations,
            });
        }
        let path = self.path(&self.config.outputs.decompose);
        write_json(&path, &Report { poisson_tol: tol, samples })?;
        self.summary.artifacts.push(path);
        Ok(())
    }

    fn modes(&mut self) -> Result<(), RunError> {
        let s = &self.config.solver;
        let n = self.config.modes.expect("validated");
        let op = QOperator::with_variant(self.medium.clone(), self.config.variant);
        let opts = SolveOptions {
            tol: s.eigen_tol,
            seed: self.config.seed,
            max_iterations: s.max_iterations,
            guard: s.guard,
            prefer_dense: s.prefer_dense,
            ..SolveOptions::default()
        };
        let bank = solve_modes_with(&op, n, &opts)?;
        info!("{} modes up to {:.6}, band top {:.6}", bank.len(), bank.max_frequency(), bank.band_top());

        let bank_path = self.path(&self.config.outputs.bank);
        save_bank(&bank, &bank_path)?;
        let mut csv = Csv::new(&["omega", "residual", "divergence", "eigen_tol", "band_top"]);
        let r = bank.report();
        for (i, &w) in bank.frequencies().iter().enumerate() {
            csv.row(&[w, r.residuals[i], r.divergence[i], s.eigen_tol, bank.band_top()]);
        }
        let csv_path = self.path(&self.config.outputs.modes);
        csv.write(&csv_path)?;
        self.summary.artifacts.extend([bank_path.clone(), crate::bankfile::sidecar_path(&bank_path), csv_path]);
        self.summary.bank = Some(bank);
        Ok(())
    }

    fn verify(&mut self) -> Result<(), RunError> {
        let report = verify(
            &self.medium,
            self.config.variant,
            self.summary.bank.as_ref(),
            self.config.solver.eigen_tol,
            self.config.seed,
        )?;
        let path = self.path(&self.config.outputs.verify);
        write_json(&path, &report)?;
        self.summary.artifacts.push(path);
        self.summary.verify = Some(report);
        Ok(())
    }

    fn ldos(&mut self) -> Result<(), RunError> {
        let spec = self.config.ldos.as_ref().expect("validated");
        let bank = self.bank();
        let [k, l] = self.config.rate.transition;
        let omegas: Vec<f64> = if spec.samples == 1 {
            vec![spec.omega_min]
        } else {
            (0..spec.samples)
                .map(|i| spec.omega_min + (spec.omega_max - spec.omega_min) * i as f64 / (spec.samples - 1) as f64)
                .collect()
        };
        let br = resolve_broadening(&spec.broadening, bank, 0.5 * (spec.omega_min + spec.omega_max))?;
        let mut written = Vec::new();
        for (i, atom) in self.config.atoms.iter().enumerate() {
            let orientation = match spec.orientation {
                Some(o) => o,
                None => atom.dipole(k, l)?,
            };
            if orientation.iter().all(|v| *v == 0.0) {
                return Err(RunError::schema(format!("atoms[{i}]: zero dipole for {k}->{l}; set ldos.orientation")));
            }
            let parts: Vec<Vec<(f64, f64)>> = omegas
                .par_chunks(LDOS_CHUNK)
                .map(|c| ldos_spectrum(bank, atom.position, orientation, c, &br))
                .collect::<Result<_, _>>()?;
            let mut csv = Csv::new(&["omega", "ldos", "eta", "cutoff", "eigen_tol"]);
            for (w, v) in parts.into_iter().flatten() {
                csv.row(&[w, v, br.eta, br.cutoff.unwrap_or(f64::INFINITY), self.config.solver.eigen_tol]);
            }
            let path = self.path(&format!("{}_{i}.csv", self.config.outputs.ldos_prefix));
            csv.write(&path)?;
            written.push(path);
        }
        self.summary.artifacts.extend(written);
        Ok(())
    }

    fn rate(&mut self) -> Result<(), RunError> {
        #[derive(Serialize)]
        struct Row {
            atom: usize,
            transition: [usize; 2],
            position: [f64; 3],
            omega0: f64,
            rate: f64,
            reference: f64,
            ratio: f64,
            local_field_factor: f64,
            eta: f64,
            cutoff: Option<f64>,
            ldos_samples: Vec<(f64, f64)>,
        }
        #[derive(Serialize)]
        struct Report {
            eigen_tol: f64,
            modes: usize,
            band_top: f64,
            local_field: bool,
            rates: Vec<Row>,
        }
        let spec = &self.config.rate;
        let bank = self.bank();
        let [k, l] = spec.transition;
        let rates: Vec<Row> = self
            .config
            .atoms
            .par_iter()
            .enumerate()
            .map(|(i, atom)| -> Result<Row, RunError> {
                let br = resolve_broadening(&spec.broadening, bank, atom.transition_frequency(k, l)?)?;
                let r = if spec.local_field {
                    local_field_corrected_rate(BulkSource::Bank(bank), atom, (k, l), Some(&br))?
                } else {
                    emission_rate(bank, atom, (k, l), &br)?
                };
                Ok(Row {
                    atom: i,
                    transition: spec.transition,
                    position: atom.position,
                    omega0: r.omega0,
                    rate: r.rate,
                    reference: r.reference,
                    ratio: r.ratio,
                    local_field_factor: r.local_field_factor,
                    eta: r.broadening.eta,
                    cutoff: r.broadening.cutoff,
                    ldos_samples: r.ldos_samples,
                })
            })
            .collect::<Result<_, _>>()?;
        let report = Report {
            eigen_tol: self.config.solver.eigen_tol,
            modes: bank.len(),
            band_top: bank.band_top(),
            local_field: spec.local_field,
            rates,
        };
        let path = self.path(&self.config.outputs.rates);
        write_json(&path, &report)?;
        self.summary.artifacts.push(path);
        Ok(())
    }

    fn cavity(&mut self) -> Result<(), RunError> {
        #[derive(Serialize)]
        struct Row {
            eps: f64,
            factor: f64,
            analytic: f64,
            relative_deviation: f64,
            core_max_deviation: f64,
            samples: usize,
            iterations: usize,
        }
        #[derive(Serialize)]
        struct Report {
            box_cells: usize,
            radius_cells: usize,
            poisson_tol: f64,
            rows: Vec<Row>,
        }
        let c = &self.config.cavity;
        let eps_list = if c.eps.is_empty() { vec![self.medium.uniform_eps().expect("validated")] } else { c.eps.clone() };
        let tol = self.config.solver.poisson_tol;
        let grid = Grid::cubic(c.box_cells, 1.0)?;
        let rows: Vec<Row> = eps_list
            .par_iter()
            .map(|&eps| -> Result<Row, RunError> {
                let f = cavity_field(eps, grid, c.radius_cells as f64, tol)?;
                let analytic = 3.0 * eps / (2.0 * eps + 1.0);
                Ok(Row {
                    eps,
                    factor: f.factor,
                    analytic,
                    relative_deviation: (f.factor - analytic).abs() / analytic,
                    core_max_deviation: f.max_deviation,
                    samples: f.samples,
                    iterations: f.iterations,
                })
            })
            .collect::<Result<_, _>>()?;
        let path = self.path(&self.config.outputs.cavity);
        write_json(&path, &Report { box_cells: c.box_cells, radius_cells: c.radius_cells, poisson_tol: tol, rows })?;
        self.summary.artifacts.push(path);
        Ok(())
    }
}

/// Explicit width if given, otherwise the default spacing-based width at `omega0`.
pub fn resolve_broadening(spec: &BroadeningSpec, bank: &ModeBank, omega0: f64) -> Result<Broadening, RunError> {
    let eta = match spec.eta {
        Some(e) => e,
        None => default_broadening(bank, omega0)?.eta,
    };
    Ok(if spec.truncate { Broadening::new(eta, Some(spec.cutoff))? } else { Broadening::lorentzian(eta)? })
}
