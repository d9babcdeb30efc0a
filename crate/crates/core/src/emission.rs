//! Dipole couplings and golden-rule emission rates from a mode bank.
//!
//! Natural units (`hbar = eps0 = c = 1`). The atom couples to `D / eps`, which
//! in mode language is `g = -i sqrt(omega / 2) mu . h(R)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::electrostatics::cavity_field_factor;
use crate::error::{Error, Result};
use crate::lattice::{interpolate, Grid, Site};
use crate::modes::{ModeBank, CLUSTER_TOL};

/// Relative half-width of the frequency window used to measure level spacing.
pub const SPACING_WINDOW: f64 = 0.15;
/// Default broadening in units of the mean level spacing.
pub const DEFAULT_ETA_FACTOR: f64 = 1.0;
/// Default kernel truncation in units of `eta`.
pub const DEFAULT_CUTOFF: f64 = 3.0;
/// Cells across the periodic box used for the cavity field factor.
pub const CAVITY_BOX_CELLS: usize = 64;
/// Cavity radius in cells for the cavity field factor.
pub const CAVITY_RADIUS_CELLS: usize = 8;

/// Atom with level energies and a real symmetric table of transition dipoles.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AtomSpec {
    /// Position in length units, inside `[0, L)` on every axis.
    pub position: [f64; 3],
    pub levels: Vec<f64>,
    /// `dipoles[k * n + l]` is the moment of the `k <-> l` transition.
    pub dipoles: Vec<[f64; 3]>,
    /// Radius of the empty cavity carved around the atom.
    pub cavity_radius: f64,
}

impl AtomSpec {
    pub fn new(position: [f64; 3], levels: Vec<f64>, dipoles: Vec<[f64; 3]>, cavity_radius: f64) -> Result<Self> {
        let atom = Self { position, levels, dipoles, cavity_radius };
        atom.validate()?;
        Ok(atom)
    }

    /// Ground state at 0, excited state at `omega0`, transition moment `dipole`.
    pub fn two_level(position: [f64; 3], omega0: f64, dipole: [f64; 3], cavity_radius: f64) -> Result<Self> {
        let z = [0.0; 3];
        Self::new(position, alloc::vec![0.0, omega0], alloc::vec![z, dipole, dipole, z], cavity_radius)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.levels.len();
        if n < 2 {
            return Err(Error::InvalidArgument("an atom needs at least two levels".into()));
        }
        if self.dipoles.len() != n * n {
            return Err(Error::SizeMismatch { expected: n * n, found: self.dipoles.len() });
        }
        let finite = self.position.iter().chain(&self.levels).chain(self.dipoles.iter().flatten()).all(|v| v.is_finite());
        if !finite || !self.cavity_radius.is_finite() {
            return Err(Error::NonFinite("atom"));
        }
        if self.cavity_radius < 0.0 {
            return Err(Error::InvalidArgument("cavity radius must be nonnegative".into()));
        }
        for k in 0..n {
            for l in 0..k {
                if self.dipoles[k * n + l] != self.dipoles[l * n + k] {
                    return Err(Error::InvalidArgument(format!("dipole table is not symmetric at ({k}, {l})")));
                }
            }
        }
        Ok(())
    }

    pub fn dipole(&self, k: usize, l: usize) -> Result<[f64; 3]> {
        let n = self.levels.len();
        if k >= n || l >= n {
            return Err(Error::InvalidArgument(format!("level index out of range ({k}, {l}) for {n} levels")));
        }
        Ok(self.dipoles[k * n + l])
    }

    /// `E_k - E_l`.
    pub fn transition_frequency(&self, k: usize, l: usize) -> Result<f64> {
        self.dipole(k, l)?;
        Ok(self.levels[k] - self.levels[l])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingElement {
    pub mode: usize,
    pub levels: (usize, usize),
    pub value: Complex64,
}

/// Lorentzian of half width `eta`, optionally cut at `|x| <= cutoff * eta` and
/// renormalized to unit area.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Broadening {
    pub eta: f64,
    pub cutoff: Option<f64>,
}

impl Broadening {
    pub fn lorentzian(eta: f64) -> Result<Self> {
        Self::new(eta, None)
    }

    pub fn new(eta: f64, cutoff: Option<f64>) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument(format!("broadening eta must be positive, got {eta}")));
        }
        if let Some(k) = cutoff {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::InvalidArgument(format!("broadening cutoff must be positive, got {k}")));
            }
        }
        Ok(Self { eta, cutoff })
    }

    /// Half width of the kernel support (infinite without a cutoff).
    pub fn reach(&self) -> f64 {
        self.cutoff.map_or(f64::INFINITY, |k| k * self.eta)
    }

    pub fn kernel(&self, x: f64) -> f64 {
        let eta = self.eta;
        match self.cutoff {
            Some(k) if x.abs() > k * eta => 0.0,
            Some(k) => eta / PI / (x * x + eta * eta) / (2.0 / PI * libm::atan(k)),
            None => eta / PI / (x * x + eta * eta),
        }
    }
}

/// Mean gap between distinct (cluster) frequencies within `SPACING_WINDOW`
/// of `omega0`, restricted to complete clusters.
pub fn level_spacing(bank: &ModeBank, omega0: f64) -> Result<f64> {
    let top = bank.band_top();
    let (lo, hi) = ((1.0 - SPACING_WINDOW) * omega0, (1.0 + SPACING_WINDOW) * omega0);
    if hi > top {
        return Err(Error::OutOfBand { omega: omega0, lo: 0.0, hi: top });
    }
    let levels = distinct_levels(bank.frequencies(), CLUSTER_TOL * bank.max_frequency());
    let near: Vec<f64> = levels.into_iter().filter(|&w| w > 0.0 && w >= lo && w <= hi).collect();
    if near.len() < 2 {
        return Err(Error::InvalidArgument(format!("fewer than two levels near omega = {omega0}")));
    }
    Ok((near[near.len() - 1] - near[0]) / (near.len() - 1) as f64)
}

fn distinct_levels(freqs: &[f64], tol: f64) -> Vec<f64> {
    crate::modes::cluster_ranges(freqs, tol).into_iter().map(|(a, b)| freqs[a..b].iter().sum::<f64>() / (b - a) as f64).collect()
}

/// Default kernel at `omega0`: `DEFAULT_ETA_FACTOR` level spacings, cut at `DEFAULT_CUTOFF`.
pub fn default_broadening(bank: &ModeBank, omega0: f64) -> Result<Broadening> {
    Broadening::new(DEFAULT_ETA_FACTOR * level_spacing(bank, omega0)?, Some(DEFAULT_CUTOFF))
}

fn check_position(grid: &Grid, pos: [f64; 3]) -> Result<()> {
    let l = grid.lengths();
    for a in 0..3 {
        if !(pos[a] >= 0.0 && pos[a] < l[a]) {
            return Err(Error::InvalidArgument(format!("position {pos:?} lies outside the grid box {l:?}")));
        }
    }
    Ok(())
}

/// `h` of mode `i` at `pos`, each staggered component interpolated on its own lattice.
pub fn mode_field_at(bank: &ModeBank, i: usize, pos: [f64; 3]) -> [f64; 3] {
    let grid = bank.grid();
    let n = grid.cells();
    let h = bank.mode_h(i);
    core::array::from_fn(|a| interpolate(grid, Site::Edge(a), &h[a * n..(a + 1) * n], pos))
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One element per mode: `g = -i sqrt(omega / 2) mu_kl . h(R)`.
pub fn dipole_coupling(bank: &ModeBank, atom: &AtomSpec, k: usize, l: usize) -> Result<Vec<CouplingElement>> {
    atom.validate()?;
    check_position(bank.grid(), atom.position)?;
    let mu = atom.dipole(k, l)?;
    Ok(bank
        .frequencies()
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let proj = dot3(mu, mode_field_at(bank, i, atom.position));
            CouplingElement { mode: i, levels: (k, l), value: Complex64::new(0.0, -libm::sqrt(w / 2.0) * proj) }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmissionReport {
    pub omega0: f64,
    pub rate: f64,
    /// Free-space rate `omega0^3 mu^2 / (3 pi)`.
    pub reference: f64,
    pub ratio: f64,
    pub broadening: Broadening,
    /// Orientation-resolved LDOS around `omega0` along the dipole.
    pub ldos_samples: Vec<(f64, f64)>,
    /// Cavity field factor applied to the rate (1 for the bare rate).
    pub local_field_factor: f64,
}

/// Analytic vacuum rate for transition frequency `omega0` and moment `mu`.
pub fn free_space_rate(omega0: f64, mu: [f64; 3]) -> f64 {
    omega0 * omega0 * omega0 * dot3(mu, mu) / (3.0 * PI)
}

const REPORT_SAMPLES: usize = 41;

/// Golden-rule rate `2 pi sum |g|^2 L(omega0 - omega)` for the `k -> l` transition.
pub fn emission_rate(bank: &ModeBank, atom: &AtomSpec, transition: (usize, usize), broadening: &Broadening) -> Result<EmissionReport> {
    let (k, l) = transition;
    let omega0 = atom.transition_frequency(k, l)?;
    if !(omega0 > 0.0) {
        return Err(Error::InvalidArgument(format!("transition frequency must be positive, got {omega0}")));
    }
    let top = bank.band_top();
    if omega0 + broadening.reach() > top {
        return Err(Error::OutOfBand { omega: omega0, lo: 0.0, hi: top });
    }
    let couplings = dipole_coupling(bank, atom, k, l)?;
    let freqs = bank.frequencies();
    let rate = 2.0 * PI * couplings.iter().map(|c| c.value.norm_sqr() * broadening.kernel(omega0 - freqs[c.mode])).sum::<f64>();
    let mu = atom.dipole(k, l)?;
    let reference = free_space_rate(omega0, mu);
    let norm = libm::sqrt(dot3(mu, mu));
    let ldos_samples = if norm > 0.0 {
        let span = if broadening.cutoff.is_some() { broadening.reach() } else { 4.0 * broadening.eta };
        let span = span.min(top - omega0).min(omega0);
        let grid: Vec<f64> =
            (0..REPORT_SAMPLES).map(|i| omega0 - span + 2.0 * span * i as f64 / (REPORT_SAMPLES - 1) as f64).collect();
        ldos_spectrum(bank, atom.position, mu, &grid, broadening)?
    } else {
        Vec::new()
    };
    let ratio = if reference > 0.0 { rate / reference } else { 0.0 };
    Ok(EmissionReport { omega0, rate, reference, ratio, broadening: *broadening, ldos_samples, local_field_factor: 1.0 })
}

/// Where the bulk rate comes from.
#[derive(Debug, Clone, Copy)]
pub enum BulkSource<'a> {
    /// Golden rule on a bank of a homogeneous medium.
    Bank(&'a ModeBank),
    /// Analytic `sqrt(eps) Gamma0`.
    Eps(f64),
}

/// Empty-cavity rate: the bulk rate times the squared cavity field factor,
/// the latter solved numerically for a sphere of `CAVITY_RADIUS_CELLS` cells.
pub fn local_field_corrected_rate(
    source: BulkSource<'_>,
    atom: &AtomSpec,
    transition: (usize, usize),
    broadening: Option<&Broadening>,
) -> Result<EmissionReport> {
    atom.validate()?;
    if !(atom.cavity_radius > 0.0) {
        return Err(Error::InvalidArgument("empty-cavity rate needs a positive cavity radius".into()));
    }
    let mut report = match source {
        BulkSource::Bank(bank) => {
            let eps = bank.medium().uniform_eps().ok_or_else(|| {
                Error::InvalidArgument("bulk rate needs a bank of a homogeneous medium".into())
            })?;
            let (k, l) = transition;
            let b = match broadening {
                Some(b) => *b,
                None => default_broadening(bank, atom.transition_frequency(k, l)?)?,
            };
            let mut r = emission_rate(bank, atom, transition, &b)?;
            r.local_field_factor = eps;
            r
        }
        BulkSource::Eps(eps) => {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::InvalidMedium(format!("bulk eps must be positive, got {eps}")));
            }
            let (k, l) = transition;
            let omega0 = atom.transition_frequency(k, l)?;
            if !(omega0 > 0.0) {
                return Err(Error::InvalidArgument(format!("transition frequency must be positive, got {omega0}")));
            }
            let reference = free_space_rate(omega0, atom.dipole(k, l)?);
            let rate = libm::sqrt(eps) * reference;
            let ratio = if reference > 0.0 { rate / reference } else { 0.0 };
            let broadening = broadening.copied().unwrap_or(Broadening { eta: 0.0, cutoff: None });
            EmissionReport { omega0, rate, reference, ratio, broadening, ldos_samples: Vec::new(), local_field_factor: eps }
        }
    };
    // local_field_factor temporarily carries the bulk eps
    let eps = report.local_field_factor;
    let spacing = atom.cavity_radius / CAVITY_RADIUS_CELLS as f64;
    let grid = Grid::cubic(CAVITY_BOX_CELLS, spacing)?;
    let factor = cavity_field_factor(eps, grid, atom.cavity_radius, crate::electrostatics::DEFAULT_TOL)?;
    report.rate *= factor * factor;
    report.ratio = if report.reference > 0.0 { report.rate / report.reference } else { 0.0 };
    report.local_field_factor = factor;
    Ok(report)
}

/// Projected LDOS `sum |u . h(r)|^2 eps(r) L(omega - omega_l)` along `orientation`.
pub fn ldos_spectrum(
    bank: &ModeBank,
    position: [f64; 3],
    orientation: [f64; 3],
    omega_grid: &[f64],
    broadening: &Broadening,
) -> Result<Vec<(f64, f64)>> {
    check_position(bank.grid(), position)?;
    let norm = libm::sqrt(dot3(orientation, orientation));
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("orientation must be a nonzero finite vector".into()));
    }
    if omega_grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("omega grid"));
    }
    if omega_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("omega grid must be ascending".into()));
    }
    let u = orientation.map(|x| x / norm);
    let eps = bank.medium().eps_at(position, u);
    let weights: Vec<f64> = (0..bank.len())
        .map(|i| {
            let p = dot3(u, mode_field_at(bank, i, position));
            p * p * eps
        })
        .collect();
    let freqs = bank.frequencies();
    Ok(omega_grid
        .iter()
        .map(|&w| (w, weights.iter().zip(freqs).map(|(c, &f)| c * broadening.kernel(w - f)).sum()))
        .collect())
}
