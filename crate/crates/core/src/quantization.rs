//! Normal-mode expansion of the free field and the generalized transverse
//! projector built from a mode bank.
//!
//! With modes normalized as `sum eps h_i h_j dV = delta_ij`:
//!
//! * `A = sum q h`, `Pi = sum p eps h` (so `Pi = eps dA/dt`, minus the displacement),
//! * `H = 1/2 sum [Pi^2 / eps + (curl A)^2 / mu] dV = 1/2 sum (p^2 + omega^2 q^2)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{curl, Placement, VectorField};
use crate::linalg::{mul, tmul};
use crate::medium::MediumProfile;
use crate::modes::ModeBank;

/// Classical mode coordinates `q` and momenta `p` (natural units, hbar = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl ModeCoefficients {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::SizeMismatch { expected: q.len(), found: p.len() });
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mode coefficients"));
        }
        Ok(Self { q, p })
    }

    pub fn zeros(n: usize) -> Self {
        Self { q: vec![0.0; n], p: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `a = sqrt(omega/2) q + i sqrt(1/(2 omega)) p`.
    pub fn amplitudes(&self, freqs: &[f64]) -> Result<Vec<Complex64>> {
        self.check(freqs)?;
        freqs
            .iter()
            .zip(self.q.iter().zip(&self.p))
            .map(|(&w, (&q, &p))| {
                if w > 0.0 {
                    Ok(Complex64::new(libm::sqrt(w / 2.0) * q, libm::sqrt(0.5 / w) * p))
                } else {
                    Err(Error::InvalidArgument(format!("amplitude map needs omega > 0, got {w}")))
                }
            })
            .collect()
    }

    /// Inverse of [`ModeCoefficients::amplitudes`].
    pub fn from_amplitudes(a: &[Complex64], freqs: &[f64]) -> Result<Self> {
        if a.len() != freqs.len() {
            return Err(Error::SizeMismatch { expected: freqs.len(), found: a.len() });
        }
        let mut q = Vec::with_capacity(a.len());
        let mut p = Vec::with_capacity(a.len());
        for (z, &w) in a.iter().zip(freqs) {
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!("amplitude map needs omega > 0, got {w}")));
            }
            q.push(z.re / libm::sqrt(w / 2.0));
            p.push(z.im / libm::sqrt(0.5 / w));
        }
        Self::new(q, p)
    }

    /// Free evolution over time `t`: each mode rotates in phase space at its own frequency.
    pub fn evolve(&self, freqs: &[f64], t: f64) -> Result<Self> {
        self.check(freqs)?;
        let mut q = Vec::with_capacity(self.len());
        let mut p = Vec::with_capacity(self.len());
        for (&w, (&q0, &p0)) in freqs.iter().zip(self.q.iter().zip(&self.p)) {
            if w == 0.0 {
                q.push(q0 + p0 * t);
                p.push(p0);
            } else {
                let (s, c) = (libm::sin(w * t), libm::cos(w * t));
                q.push(q0 * c + p0 / w * s);
                p.push(-w * q0 * s + p0 * c);
            }
        }
        Ok(Self { q, p })
    }

    fn check(&self, freqs: &[f64]) -> Result<()> {
        if freqs.len() != self.len() {
            return Err(Error::SizeMismatch { expected: freqs.len(), found: self.len() });
        }
        Ok(())
    }
}

/// Vector potential and canonical momentum on the edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub a: VectorField,
    /// `Pi = eps dA/dt`; for the free field this is minus the displacement.
    pub pi: VectorField,
}

impl FieldSnapshot {
    /// Magnetic induction `curl A` on faces.
    pub fn b(&self) -> VectorField {
        curl(&self.a).expect("A lives on edges")
    }

    /// Displacement field `D = -Pi`.
    pub fn d(&self) -> VectorField {
        self.pi.scaled(-1.0)
    }

    /// Electric field `E = -dA/dt = -Pi / eps`.
    pub fn e(&self, m: &MediumProfile) -> VectorField {
        let inv: Vec<f64> = m.eps().iter().map(|e| -1.0 / e).collect();
        self.pi.weighted(&inv)
    }
}

/// `A = sum q h`, `Pi = sum p eps h`.
pub fn synthesize_fields(bank: &ModeBank, coeffs: &ModeCoefficients) -> Result<FieldSnapshot> {
    if coeffs.len() != bank.len() {
        return Err(Error::SizeMismatch { expected: bank.len(), found: coeffs.len() });
    }
    let grid = *bank.grid();
    let n = grid.vector_len();
    let mut a = vec![0.0; n];
    let mut pi = vec![0.0; n];
    for i in 0..bank.len() {
        let h = bank.mode_h(i);
        let (q, p) = (coeffs.q[i], coeffs.p[i]);
        a.iter_mut().zip(h).for_each(|(v, x)| *v += q * x);
        pi.iter_mut().zip(h).for_each(|(v, x)| *v += p * x);
    }
    pi.iter_mut().zip(bank.medium().eps()).for_each(|(v, e)| *v *= e);
    Ok(FieldSnapshot {
        a: VectorField::from_values(grid, Placement::Edge, a)?,
        pi: VectorField::from_values(grid, Placement::Edge, pi)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyForms {
    /// Grid sum of `1/2 [Pi^2 / eps + (curl A)^2 / mu] dV`.
    pub integral_form: f64,
    /// `1/2 sum (p^2 + omega^2 q^2)`.
    pub spectral_form: f64,
}

pub fn hamiltonian_energy(bank: &ModeBank, coeffs: &ModeCoefficients, m: &MediumProfile) -> Result<EnergyForms> {
    if m.grid() != bank.grid() {
        return Err(Error::GridMismatch);
    }
    let fields = synthesize_fields(bank, coeffs)?;
    let dv = m.grid().cell_volume();
    let electric: f64 = fields.pi.values().iter().zip(m.eps()).map(|(p, e)| p * p / e).sum();
    let b = fields.b();
    let magnetic: f64 = match m.mu() {
        Some(mu) => b.values().iter().zip(mu).map(|(x, u)| x * x / u).sum(),
        None => b.values().iter().map(|x| x * x).sum(),
    };
    let spectral = 0.5
        * bank.frequencies().iter().zip(coeffs.q.iter().zip(&coeffs.p)).map(|(w, (q, p))| p * p + w * w * q * q).sum::<f64>();
    Ok(EnergyForms { integral_form: 0.5 * (electric + magnetic) * dv, spectral_form: spectral })
}

/// Spectral projector `sum_l h_l(r) h_l(r') eps(r')` built from a bank.
///
/// It acts in two ways, distinguished by which slot the field enters:
/// [`apply`](Self::apply) contracts the first slot and maps divergence-free
/// fields to themselves, [`apply_generalized`](Self::apply_generalized)
/// contracts the second slot and maps onto generalized-transverse fields
/// (`div(eps y) = 0`). Both are idempotent for any orthonormal bank.
#[derive(Debug, Clone, Copy)]
pub struct TransverseProjector<'a> {
    bank: &'a ModeBank,
}

impl<'a> TransverseProjector<'a> {
    pub fn new(bank: &'a ModeBank) -> Self {
        Self { bank }
    }

    pub fn bank(&self) -> &ModeBank {
        self.bank
    }

    fn check(&self, x: &VectorField) -> Result<()> {
        x.expect(Placement::Edge)?;
        if x.grid() != self.bank.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `x -> eps sum_l h_l <h_l, x>`: identity on divergence-free `x`, zero on `eps grad psi`.
    pub fn apply(&self, x: &VectorField) -> Result<VectorField> {
        self.check(x)?;
        let h = self.bank.h_matrix();
        let mut out = self.expand(h, x.values());
        out.iter_mut().zip(self.bank.medium().eps()).for_each(|(v, e)| *v *= e);
        VectorField::from_values(*x.grid(), Placement::Edge, out)
    }

    /// `y -> sum_l h_l <h_l, eps y>`: identity on generalized-transverse `y`,
    /// zero on gradients, symmetric in the eps-weighted inner product.
    pub fn apply_generalized(&self, y: &VectorField) -> Result<VectorField> {
        self.check(y)?;
        let ey: Vec<f64> = y.values().iter().zip(self.bank.medium().eps()).map(|(v, e)| v * e).collect();
        let out = self.expand(self.bank.h_matrix(), &ey);
        VectorField::from_values(*y.grid(), Placement::Edge, out)
    }

    /// `sum_l h_l <h_l, v>` with the volume-weighted inner product.
    fn expand(&self, h: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        let col = DMatrix::from_column_slice(v.len(), 1, v);
        let coef = tmul(h, &col) * self.bank.grid().cell_volume();
        mul(h, &coef).as_slice().to_vec()
    }
}

/// Kernel `D_ab(r, r') = sum_l h_l,a(r) h_l,b(r') eps_b(r')` between the edges
/// of cells `r` and `r_prime`; component `a` sits at the `a`-edge of its cell.
///
/// Times the cell volume this is the matrix of
/// [`TransverseProjector::apply_generalized`]. Only meaningful for complete banks.
pub fn commutator_dyadic(bank: &ModeBank, r: usize, r_prime: usize) -> Result<[[f64; 3]; 3]> {
    if !bank.is_complete() {
        return Err(Error::IncompleteBank);
    }
    let cells = bank.grid().cells();
    if r >= cells || r_prime >= cells {
        return Err(Error::InvalidArgument(format!("cell index out of range (cells = {cells})")));
    }
    let eps = bank.medium().eps();
    let mut d = [[0.0; 3]; 3];
    for l in 0..bank.len() {
        let h = bank.mode_h(l);
        for (a, row) in d.iter_mut().enumerate() {
            let ha = h[a * cells + r];
            for (b, v) in row.iter_mut().enumerate() {
                let idx = b * cells + r_prime;
                *v += ha * h[idx] * eps[idx];
            }
        }
    }
    Ok(d)
}
