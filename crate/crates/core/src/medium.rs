//! Dielectric (and optional magnetic) profiles sampled on the staggered grid.
//!
//! Permittivity is sampled independently at every edge-component location,
//! permeability at every face-component location, both by staircase
//! (nearest-sample) evaluation of an analytic descriptor.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{dot, Grid, Placement, Site, VectorField};

/// One layer of a periodic slab stack.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub thickness: f64,
    pub eps: f64,
}

/// Analytic description of a relative-permittivity profile.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Descriptor {
    Homogeneous {
        eps: f64,
    },
    /// Layers stacked along `axis` starting at coordinate 0; one period of
    /// the stack must tile the box.
    SlabStack {
        #[cfg_attr(feature = "serde", serde(default))]
        axis: usize,
        layers: Vec<Layer>,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        eps_in: f64,
        eps_out: f64,
    },
    /// Host profile with vacuum spheres carved around each centre.
    EmptyCavity {
        host: Box<Descriptor>,
        centers: Vec<[f64; 3]>,
        radius: f64,
    },
    /// Smooth periodic random profile with values in `[eps_min, eps_max]`.
    SmoothRandom {
        seed: u64,
        eps_min: f64,
        eps_max: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_terms"))]
        terms: usize,
    },
}

#[cfg(feature = "serde")]
fn default_terms() -> usize {
    6
}

/// Low-order Fourier series backing [`Descriptor::SmoothRandom`].
#[derive(Debug, Clone)]
struct SmoothSeries {
    terms: Vec<([f64; 3], f64, f64)>,
    norm: f64,
}

impl SmoothSeries {
    fn new(seed: u64, terms: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(terms);
        while out.len() < terms {
            let n = [0; 3].map(|_: i32| rng.gen_range(-2i32..=2) as f64);
            if n == [0.0; 3] {
                continue;
            }
            let amp = rng.gen_range(0.2..1.0);
            let phase = rng.gen_range(0.0..core::f64::consts::TAU);
            out.push((n, amp, phase));
        }
        let norm = out.iter().map(|t| t.1).sum();
        Self { terms: out, norm }
    }

    /// Value in [-1, 1].
    fn eval(&self, pos: [f64; 3], lengths: [f64; 3]) -> f64 {
        let s: f64 = self
            .terms
            .iter()
            .map(|(n, amp, phase)| {
                let arg: f64 = (0..3).map(|a| core::f64::consts::TAU * n[a] * pos[a] / lengths[a]).sum();
                amp * libm::cos(arg + phase)
            })
            .sum();
        s / self.norm
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidMedium(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `x` reduced to `[0, p)`.
pub(crate) fn wrap(x: f64, p: f64) -> f64 {
    let r = x - p * libm::floor(x / p);
    if r >= p { 0.0 } else { r }
}

/// Minimum-image distance on the periodic box.
pub fn periodic_distance(a: [f64; 3], b: [f64; 3], lengths: [f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let mut d = wrap(a[k] - b[k], lengths[k]);
        if d > 0.5 * lengths[k] {
            d = lengths[k] - d;
        }
        d2 += d * d;
    }
    libm::sqrt(d2)
}

impl Descriptor {
    fn validate(&self, grid: &Grid) -> Result<()> {
        let lengths = grid.lengths();
        match self {
            Descriptor::Homogeneous { eps } => positive("eps", *eps),
            Descriptor::SlabStack { axis, layers } => {
                if *axis > 2 {
                    return Err(Error::InvalidMedium(format!("slab axis {axis} out of range")));
                }
                if layers.is_empty() {
                    return Err(Error::InvalidMedium("slab stack has no layers".into()));
                }
                for l in layers {
                    positive("layer eps", l.eps)?;
                    positive("layer thickness", l.thickness)?;
                }
                let period: f64 = layers.iter().map(|l| l.thickness).sum();
                let reps = lengths[*axis] / period;
                if (reps - libm::round(reps)).abs() > 1e-9 * reps.max(1.0) || libm::round(reps) < 1.0 {
                    return Err(Error::InvalidMedium(format!(
                        "slab period {period} does not tile box length {}",
                        lengths[*axis]
                    )));
                }
                Ok(())
            }
            Descriptor::Sphere { radius, eps_in, eps_out, .. } => {
                positive("eps_in", *eps_in)?;
                positive("eps_out", *eps_out)?;
                positive("radius", *radius)?;
                let half = lengths.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
                if *radius > half {
                    return Err(Error::InvalidMedium(format!("sphere radius {radius} exceeds half the box ({half})")));
                }
                Ok(())
            }
            Descriptor::EmptyCavity { host, centers, radius } => {
                host.validate(grid)?;
                positive("cavity radius", *radius)?;
                if *radius < grid.spacing() {
                    return Err(Error::InvalidMedium(format!(
                        "cavity radius {radius} is below one cell ({})",
                        grid.spacing()
                    )));
                }
                let half = lengths.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
                if *radius > half {
                    return Err(Error::InvalidMedium(format!("cavity radius {radius} exceeds half the box")));
                }
                if centers.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidMedium("non-finite cavity centre".into()));
                }
                Ok(())
            }
            Descriptor::SmoothRandom { eps_min, eps_max, terms, .. } => {
                positive("eps_min", *eps_min)?;
                positive("eps_max", *eps_max)?;
                if eps_max < eps_min {
                    return Err(Error::InvalidMedium("eps_max below eps_min".into()));
                }
                if *terms == 0 {
                    return Err(Error::InvalidMedium("smooth profile needs at least one term".into()));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the profile at a point of the periodic box.
    pub fn evaluate(&self, pos: [f64; 3], grid: &Grid) -> f64 {
        Evaluator::new(self).eval(pos, grid)
    }
}

/// Descriptor with any per-profile precomputation done once.
struct Evaluator<'a> {
    desc: &'a Descriptor,
    series: Option<SmoothSeries>,
    host: Option<Box<Evaluator<'a>>>,
}

impl<'a> Evaluator<'a> {
    fn new(desc: &'a Descriptor) -> Self {
        match desc {
            Descriptor::SmoothRandom { seed, terms, .. } => {
                Self { desc, series: Some(SmoothSeries::new(*seed, *terms)), host: None }
            }
            Descriptor::EmptyCavity { host, .. } => Self { desc, series: None, host: Some(Box::new(Evaluator::new(host))) },
            _ => Self { desc, series: None, host: None },
        }
    }

    fn eval(&self, pos: [f64; 3], grid: &Grid) -> f64 {
        let lengths = grid.lengths();
        match self.desc {
            Descriptor::Homogeneous { eps } => *eps,
            Descriptor::SlabStack { axis, layers } => {
                let period: f64 = layers.iter().map(|l| l.thickness).sum();
                // half-open layers; samples sitting on an interface (to rounding) go to the next layer
                let tol = 1e-9 * grid.spacing();
                let u = wrap(pos[*axis], period);
                let mut start = 0.0;
                for l in layers {
                    let end = start + l.thickness;
                    if u < end - tol {
                        return l.eps;
                    }
                    start = end;
                }
                layers[0].eps
            }
            Descriptor::Sphere { center, radius, eps_in, eps_out } => {
                if periodic_distance(pos, *center, lengths) <= *radius {
                    *eps_in
                } else {
                    *eps_out
                }
            }
            Descriptor::EmptyCavity { centers, radius, .. } => {
                if centers.iter().any(|c| periodic_distance(pos, *c, lengths) <= *radius) {
                    1.0
                } else {
                    self.host.as_ref().map_or(1.0, |h| h.eval(pos, grid))
                }
            }
            Descriptor::SmoothRandom { eps_min, eps_max, .. } => {
                let f = self.series.as_ref().map_or(0.0, |s| s.eval(pos, lengths));
                eps_min + (eps_max - eps_min) * 0.5 * (1.0 + f)
            }
        }
    }
}

fn sample(desc: &Descriptor, grid: &Grid, placement: Placement) -> Vec<f64> {
    let ev = Evaluator::new(desc);
    let n = grid.cells();
    let mut out = Vec::with_capacity(3 * n);
    for a in 0..3 {
        let site = placement.site(a);
        out.extend((0..n).map(|idx| ev.eval(grid.position(site, idx), grid)));
    }
    out
}

/// How the permittivity samples were produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Analytic(Descriptor),
    /// Samples supplied directly (e.g. loaded from disk).
    Sampled,
}

/// Sampled permittivity/permeability on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumProfile {
    grid: Grid,
    eps: Vec<f64>,
    sqrt_eps: Vec<f64>,
    inv_sqrt_eps: Vec<f64>,
    mu: Option<Vec<f64>>,
    provenance: Provenance,
    mu_descriptor: Option<Descriptor>,
}

/// Staircase-samples a descriptor onto the edge locations of `grid`.
pub fn build_profile(descriptor: &Descriptor, grid: Grid) -> Result<MediumProfile> {
    descriptor.validate(&grid)?;
    let eps = sample(descriptor, &grid, Placement::Edge);
    MediumProfile::assemble(grid, eps, None, Provenance::Analytic(descriptor.clone()), None)
}

impl MediumProfile {
    pub fn vacuum(grid: Grid) -> Self {
        build_profile(&Descriptor::Homogeneous { eps: 1.0 }, grid).expect("vacuum is valid")
    }

    pub fn homogeneous(grid: Grid, eps: f64) -> Result<Self> {
        build_profile(&Descriptor::Homogeneous { eps }, grid)
    }

    /// Profile from explicit edge samples (component-major, x fastest).
    pub fn from_samples(grid: Grid, eps: Vec<f64>) -> Result<Self> {
        if eps.len() != grid.vector_len() {
            return Err(Error::SizeMismatch { expected: grid.vector_len(), found: eps.len() });
        }
        Self::assemble(grid, eps, None, Provenance::Sampled, None)
    }

    /// Adds a permeability profile sampled at face locations.
    pub fn with_mu(mut self, descriptor: &Descriptor) -> Result<Self> {
        descriptor.validate(&self.grid)?;
        let mu = sample(descriptor, &self.grid, Placement::Face);
        check_positive("mu", &mu)?;
        self.mu = Some(mu);
        self.mu_descriptor = Some(descriptor.clone());
        Ok(self)
    }

    /// Adds explicit face samples of the permeability.
    pub fn with_mu_samples(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.grid.vector_len() {
            return Err(Error::SizeMismatch { expected: self.grid.vector_len(), found: mu.len() });
        }
        check_positive("mu", &mu)?;
        self.mu = Some(mu);
        self.mu_descriptor = None;
        Ok(self)
    }

    fn assemble(
        grid: Grid,
        eps: Vec<f64>,
        mu: Option<Vec<f64>>,
        provenance: Provenance,
        mu_descriptor: Option<Descriptor>,
    ) -> Result<Self> {
        check_positive("eps", &eps)?;
        let sqrt_eps: Vec<f64> = eps.iter().map(|&e| libm::sqrt(e)).collect();
        let inv_sqrt_eps = sqrt_eps.iter().map(|&s| 1.0 / s).collect();
        Ok(Self { grid, eps, sqrt_eps, inv_sqrt_eps, mu, provenance, mu_descriptor })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Edge samples of the relative permittivity.
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn sqrt_eps(&self) -> &[f64] {
        &self.sqrt_eps
    }

    pub fn inv_sqrt_eps(&self) -> &[f64] {
        &self.inv_sqrt_eps
    }

    /// Face samples of the relative permeability, if any.
    pub fn mu(&self) -> Option<&[f64]> {
        self.mu.as_deref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn descriptor(&self) -> Option<&Descriptor> {
        match &self.provenance {
            Provenance::Analytic(d) => Some(d),
            Provenance::Sampled => None,
        }
    }

    pub fn mu_descriptor(&self) -> Option<&Descriptor> {
        self.mu_descriptor.as_ref()
    }

    /// The common value when every edge sample is identical.
    pub fn uniform_eps(&self) -> Option<f64> {
        let e0 = self.eps[0];
        self.eps.iter().all(|&e| e == e0).then_some(e0)
    }

    /// Orientation-weighted permittivity at an arbitrary point: the sum over
    /// components of `u_a^2` times the trilinear interpolant of the `a`-edge samples.
    pub fn eps_at(&self, pos: [f64; 3], orientation: [f64; 3]) -> f64 {
        let n = self.grid.cells();
        let norm2: f64 = orientation.iter().map(|u| u * u).sum();
        (0..3)
            .filter(|&a| orientation[a] != 0.0)
            .map(|a| {
                orientation[a] * orientation[a] / norm2
                    * crate::lattice::interpolate(&self.grid, Site::Edge(a), &self.eps[a * n..(a + 1) * n], pos)
            })
            .sum()
    }

    /// `eps` as an edge field, handy for pointwise products.
    pub fn eps_field(&self) -> VectorField {
        VectorField::from_values(self.grid, Placement::Edge, self.eps.clone()).expect("eps samples are finite")
    }
}

fn check_positive(name: &'static str, v: &[f64]) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidMedium(format!("{name} sample {bad} is not positive and finite")));
    }
    Ok(())
}

/// eps-weighted inner product `sum eps u v dV` of two edge fields.
pub fn eps_inner(u: &VectorField, v: &VectorField, m: &MediumProfile) -> Result<f64> {
    u.check_compatible(v)?;
    u.expect(Placement::Edge)?;
    if *u.grid() != m.grid {
        return Err(Error::GridMismatch);
    }
    let s: f64 = u.values().iter().zip(v.values()).zip(&m.eps).map(|((a, b), e)| e * a * b).sum();
    Ok(s * m.grid.cell_volume())
}

/// Standard (unweighted) inner product, for symmetry with [`eps_inner`].
pub fn std_inner(u: &VectorField, v: &VectorField) -> Result<f64> {
    u.check_compatible(v)?;
    Ok(dot(u.values(), v.values()) * u.grid().cell_volume())
}
