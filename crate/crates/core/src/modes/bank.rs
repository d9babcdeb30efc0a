use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{QOperator, Variant};
use crate::error::{Error, Result};
use crate::lattice::{div_into, dot, Grid, Placement, VectorField};
use crate::linalg::tmul;
use crate::medium::MediumProfile;

/// How much of the spectrum a bank covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankExtent {
    /// The bank spans the whole generalized-transverse space (harmonic modes included).
    pub complete: bool,
    /// Highest frequency up to which every degenerate cluster is fully present.
    pub band_top: f64,
}

/// Invariant checks recomputed from the stored mode fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport {
    /// `||Q g - omega^2 g|| / ||g||` per mode.
    pub residuals: Vec<f64>,
    /// `||curl_t(mu^-1 curl h) - eps omega^2 h|| / ||h||` per mode.
    pub wave_residuals: Vec<f64>,
    /// `||div(eps h)|| s / ||eps h||` per mode.
    pub divergence: Vec<f64>,
    /// `max |<h_i, h_j>_eps - delta_ij|`.
    pub gram_defect: f64,
}

impl ModeReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_wave_residual(&self) -> f64 {
        self.wave_residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().cloned().fold(0.0, f64::max)
    }
}

/// Orthonormal set of real eigenmodes with ascending frequencies.
#[derive(Debug, Clone)]
pub struct ModeBank {
    medium: Arc<MediumProfile>,
    variant: Variant,
    frequencies: Vec<f64>,
    /// One mode per column, `sum g^2 dV = 1`.
    modes_g: DMatrix<f64>,
    modes_h: DMatrix<f64>,
    extent: BankExtent,
    report: ModeReport,
}

impl ModeBank {
    /// Assembles a bank from `g` fields stored mode after mode, recomputing
    /// `h` and all invariant metadata.
    pub fn from_parts(
        medium: Arc<MediumProfile>,
        variant: Variant,
        frequencies: Vec<f64>,
        modes_g: Vec<f64>,
        extent: BankExtent,
    ) -> Result<Self> {
        let n = medium.grid().vector_len();
        let m = frequencies.len();
        if modes_g.len() != n * m {
            return Err(Error::SizeMismatch { expected: n * m, found: modes_g.len() });
        }
        if frequencies.iter().chain(&modes_g).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mode bank"));
        }
        if frequencies.iter().any(|&w| w < 0.0) || frequencies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("bank frequencies must be nonnegative and ascending".into()));
        }
        Ok(Self::assemble(medium, variant, frequencies, DMatrix::from_vec(n, m, modes_g), extent))
    }

    pub(crate) fn assemble(
        medium: Arc<MediumProfile>,
        variant: Variant,
        frequencies: Vec<f64>,
        modes_g: DMatrix<f64>,
        extent: BankExtent,
    ) -> Self {
        let mut modes_h = modes_g.clone();
        let n = modes_g.nrows();
        if n > 0 {
            for col in modes_h.as_mut_slice().chunks_mut(n) {
                col.iter_mut().zip(medium.inv_sqrt_eps()).for_each(|(h, w)| *h *= w);
            }
        }
        let op = QOperator::with_variant(medium.clone(), variant);
        let report = compute_report(&op, &frequencies, &modes_g, &modes_h);
        Self { medium, variant, frequencies, modes_g, modes_h, extent, report }
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

    pub fn operator(&self) -> QOperator {
        QOperator::with_variant(self.medium.clone(), self.variant)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn extent(&self) -> BankExtent {
        self.extent
    }

    pub fn is_complete(&self) -> bool {
        self.extent.complete
    }

    pub fn band_top(&self) -> f64 {
        self.extent.band_top
    }

    pub fn mode_g(&self, i: usize) -> &[f64] {
        let n = self.modes_g.nrows();
        &self.modes_g.as_slice()[i * n..(i + 1) * n]
    }

    pub fn mode_h(&self, i: usize) -> &[f64] {
        let n = self.modes_h.nrows();
        &self.modes_h.as_slice()[i * n..(i + 1) * n]
    }

    pub fn mode_h_field(&self, i: usize) -> VectorField {
        VectorField::from_values(*self.grid(), Placement::Edge, self.mode_h(i).to_vec()).expect("finite mode")
    }

    pub fn mode_g_field(&self, i: usize) -> VectorField {
        VectorField::from_values(*self.grid(), Placement::Edge, self.mode_g(i).to_vec()).expect("finite mode")
    }

    /// All `g` fields, mode after mode.
    pub fn g_values(&self) -> &[f64] {
        self.modes_g.as_slice()
    }

    pub(crate) fn h_matrix(&self) -> &DMatrix<f64> {
        &self.modes_h
    }

    pub fn report(&self) -> &ModeReport {
        &self.report
    }

    pub fn gram_defect(&self) -> f64 {
        self.report.gram_defect
    }

    pub fn residuals(&self) -> &[f64] {
        &self.report.residuals
    }

    /// Keeps the first `count` modes.
    pub fn truncated(&self, count: usize) -> Result<ModeBank> {
        if count > self.len() {
            return Err(Error::TooManyModes { requested: count, available: self.len() });
        }
        let n = self.modes_g.nrows();
        let g = self.modes_g.as_slice()[..n * count].to_vec();
        let freqs = self.frequencies[..count].to_vec();
        let top = freqs.last().cloned().unwrap_or(0.0);
        let clusters = super::cluster::clusters(&self.frequencies, super::CLUSTER_TOL * self.max_frequency());
        // the last kept cluster is only whole if truncation falls on a boundary
        let band_top = match clusters.iter().find(|(s, e)| *s < count && *e > count) {
            Some((s, _)) => if *s == 0 { 0.0 } else { self.frequencies[*s - 1] },
            None => top,
        }
        .min(self.extent.band_top);
        let complete = self.extent.complete && count == self.len();
        Ok(ModeBank::assemble(
            self.medium.clone(),
            self.variant,
            freqs,
            DMatrix::from_vec(n, count, g),
            BankExtent { complete, band_top },
        ))
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies.last().cloned().unwrap_or(0.0)
    }

    /// Replaces the stored fields of modes `start..start + c.nrows()` by their
    /// combination with the orthogonal matrix `c` (for gauge-freedom checks).
    pub fn remixed(&self, start: usize, c: &DMatrix<f64>) -> Result<ModeBank> {
        let k = c.nrows();
        if c.ncols() != k || start + k > self.len() {
            return Err(Error::InvalidArgument(format!("remix block {k} at {start} does not fit the bank")));
        }
        let block = self.modes_g.columns(start, k) * c;
        let mut g = self.modes_g.clone();
        g.columns_mut(start, k).copy_from(&block);
        Ok(ModeBank::assemble(self.medium.clone(), self.variant, self.frequencies.clone(), g, self.extent))
    }
}

/// Recomputes residuals, divergence and the Gram defect from the stored fields.
pub fn mode_residual_report(bank: &ModeBank) -> ModeReport {
    compute_report(&bank.operator(), &bank.frequencies, &bank.modes_g, &bank.modes_h)
}

fn compute_report(op: &QOperator, freqs: &[f64], g: &DMatrix<f64>, h: &DMatrix<f64>) -> ModeReport {
    let medium = op.medium();
    let grid = medium.grid();
    let n = grid.vector_len();
    let eps = medium.eps();
    let mut face = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut scalar = vec![0.0; grid.cells()];
    let mut residuals = Vec::with_capacity(freqs.len());
    let mut wave_residuals = Vec::with_capacity(freqs.len());
    let mut divergence = Vec::with_capacity(freqs.len());
    for (i, &w) in freqs.iter().enumerate() {
        let lambda = w * w;
        let gi = &g.as_slice()[i * n..(i + 1) * n];
        let hi = &h.as_slice()[i * n..(i + 1) * n];
        op.apply_slice(gi, &mut out, &mut face);
        let r: f64 = out.iter().zip(gi).map(|(a, b)| (a - lambda * b) * (a - lambda * b)).sum();
        residuals.push(libm::sqrt(r / dot(gi, gi)));

        op.curl_curl(hi, &mut out, &mut face);
        let r: f64 = out.iter().zip(hi.iter().zip(eps)).map(|(a, (b, e))| (a - lambda * e * b) * (a - lambda * e * b)).sum();
        wave_residuals.push(libm::sqrt(r / dot(hi, hi)));

        out.iter_mut().zip(hi.iter().zip(eps)).for_each(|(o, (b, e))| *o = b * e);
        div_into(grid, &out, &mut scalar);
        divergence.push(libm::sqrt(dot(&scalar, &scalar) / dot(&out, &out)) * grid.spacing());
    }
    let gram = tmul(g, g) * grid.cell_volume();
    let mut gram_defect: f64 = 0.0;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let want = if i == j { 1.0 } else { 0.0 };
            gram_defect = gram_defect.max((gram[(i, j)] - want).abs());
        }
    }
    ModeReport { residuals, wave_residuals, divergence, gram_defect }
}
