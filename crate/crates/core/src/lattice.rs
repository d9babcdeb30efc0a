//! Periodic staggered (Yee) lattice and its mimetic difference operators.
//!
//! Scalars live at cell sites `(i, j, k) * s`. Edge component `a` of a vector
//! field sits half a cell along `a` from its site, face component `a` half a
//! cell along both other axes. With forward differences for `grad`/`curl`
//! and their exact negative adjoints (`div`, `curl_t`), the discrete
//! identities `curl grad = 0`, `div curl_t = 0` and
//! `<grad phi, v> = -<phi, div v>` hold to rounding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform periodic lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    spacing: f64,
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: f64) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidGrid(format!("dims must be positive, got {dims:?}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        Ok(Self { dims, spacing })
    }

    pub fn cubic(n: usize, spacing: f64) -> Result<Self> {
        Self::new([n, n, n], spacing)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    pub fn volume(&self) -> f64 {
        self.cells() as f64 * self.cell_volume()
    }

    /// Box side lengths.
    pub fn lengths(&self) -> [f64; 3] {
        self.dims.map(|n| n as f64 * self.spacing)
    }

    /// Linear index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    /// Index of the periodic neighbour `idx + step * e_axis`.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> usize {
        let mut c = self.coords(idx);
        let n = self.dims[axis] as isize;
        c[axis] = (c[axis] as isize + step).rem_euclid(n) as usize;
        self.index(c[0], c[1], c[2])
    }

    /// Position (in length units) of a sample of the given kind at cell `idx`.
    pub fn position(&self, site: Site, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let off = site.offset();
        [0, 1, 2].map(|a| (c[a] as f64 + off[a]) * self.spacing)
    }

    /// Total number of vector-field components.
    pub fn vector_len(&self) -> usize {
        3 * self.cells()
    }
}

/// Location of a sample inside its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Cell,
    Edge(usize),
    Face(usize),
}

impl Site {
    /// Offset from the cell site, in units of the spacing.
    pub fn offset(self) -> [f64; 3] {
        match self {
            Site::Cell => [0.0; 3],
            Site::Edge(a) => {
                let mut o = [0.0; 3];
                o[a] = 0.5;
                o
            }
            Site::Face(a) => {
                let mut o = [0.5; 3];
                o[a] = 0.0;
                o
            }
        }
    }
}

/// Staggering of a vector field's components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Edge,
    Face,
}

impl Placement {
    pub fn site(self, component: usize) -> Site {
        match self {
            Placement::Edge => Site::Edge(component),
            Placement::Face => Site::Face(component),
        }
    }
}

/// Cell-centred scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.cells()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::SizeMismatch { expected: grid.cells(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..grid.cells()).map(|n| f(grid.position(Site::Cell, n))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Euclidean norm of the samples (no volume weight).
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Volume-weighted inner product.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(dot(&self.values, &other.values) * self.grid.cell_volume())
    }
}

/// Staggered vector field. Storage is component-major; each component block
/// is x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    placement: Placement,
    values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid, placement: Placement) -> Self {
        Self { grid, placement, values: vec![0.0; grid.vector_len()] }
    }

    pub fn from_values(grid: Grid, placement: Placement, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.vector_len() {
            return Err(Error::SizeMismatch { expected: grid.vector_len(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector field"));
        }
        Ok(Self { grid, placement, values })
    }

    /// Samples `f(component, position)` at every staggered location.
    pub fn from_fn(grid: Grid, placement: Placement, mut f: impl FnMut(usize, [f64; 3]) -> f64) -> Self {
        let n = grid.cells();
        let mut values = Vec::with_capacity(3 * n);
        for a in 0..3 {
            let site = placement.site(a);
            values.extend((0..n).map(|idx| f(a, grid.position(site, idx))));
        }
        Self { grid, placement, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn placement(&self) -> Placement {
        self.placement
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, a: usize) -> &[f64] {
        let n = self.grid.cells();
        &self.values[a * n..(a + 1) * n]
    }

    pub fn component_mut(&mut self, a: usize) -> &mut [f64] {
        let n = self.grid.cells();
        &mut self.values[a * n..(a + 1) * n]
    }

    pub fn expect(&self, placement: Placement) -> Result<()> {
        if self.placement != placement {
            return Err(Error::PlacementMismatch { expected: placement, found: self.placement });
        }
        Ok(())
    }

    pub fn check_compatible(&self, other: &VectorField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        other.expect(self.placement)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(dot(&self.values, &self.values))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Volume-weighted standard inner product.
    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(dot(&self.values, &other.values) * self.grid.cell_volume())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &VectorField) -> Result<()> {
        self.check_compatible(other)?;
        axpy(&mut self.values, s, &other.values);
        Ok(())
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Pointwise product with a per-component weight of the same layout.
    pub fn weighted(&self, weight: &[f64]) -> VectorField {
        debug_assert_eq!(weight.len(), self.values.len());
        let values = self.values.iter().zip(weight).map(|(v, w)| v * w).collect();
        VectorField { grid: self.grid, placement: self.placement, values }
    }
}

/// Trilinear interpolation of one staggered component block at `pos` (length units).
pub fn interpolate(grid: &Grid, site: Site, block: &[f64], pos: [f64; 3]) -> f64 {
    let off = site.offset();
    let mut base = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..3 {
        let u = pos[a] / grid.spacing - off[a];
        let f = libm::floor(u);
        t[a] = u - f;
        base[a] = (f as i64).rem_euclid(grid.dims[a] as i64) as usize;
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut c = [0usize; 3];
        for a in 0..3 {
            let up = (corner >> a) & 1 == 1;
            w *= if up { t[a] } else { 1.0 - t[a] };
            c[a] = if up { (base[a] + 1) % grid.dims[a] } else { base[a] };
        }
        if w != 0.0 {
            acc += w * block[grid.index(c[0], c[1], c[2])];
        }
    }
    acc
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += s * x);
}

/// Visits every cell with its index and its +1 neighbours along x, y, z.
#[inline]
fn for_each_forward(grid: &Grid, mut f: impl FnMut(usize, [usize; 3])) {
    let [nx, ny, nz] = grid.dims;
    for k in 0..nz {
        let kp = if k + 1 == nz { 0 } else { k + 1 };
        for j in 0..ny {
            let jp = if j + 1 == ny { 0 } else { j + 1 };
            for i in 0..nx {
                let ip = if i + 1 == nx { 0 } else { i + 1 };
                f(grid.index(i, j, k), [grid.index(ip, j, k), grid.index(i, jp, k), grid.index(i, j, kp)]);
            }
        }
    }
}

/// Same as [`for_each_forward`] with -1 neighbours.
#[inline]
fn for_each_backward(grid: &Grid, mut f: impl FnMut(usize, [usize; 3])) {
    let [nx, ny, nz] = grid.dims;
    for k in 0..nz {
        let km = if k == 0 { nz - 1 } else { k - 1 };
        for j in 0..ny {
            let jm = if j == 0 { ny - 1 } else { j - 1 };
            for i in 0..nx {
                let im = if i == 0 { nx - 1 } else { i - 1 };
                f(grid.index(i, j, k), [grid.index(im, j, k), grid.index(i, jm, k), grid.index(i, j, km)]);
            }
        }
    }
}

/// Forward-difference gradient, cell sites to edges.
pub fn grad(phi: &ScalarField) -> VectorField {
    let grid = phi.grid;
    let mut out = vec![0.0; grid.vector_len()];
    grad_into(&grid, &phi.values, &mut out);
    VectorField { grid, placement: Placement::Edge, values: out }
}

/// Backward-difference divergence of an edge field; the negative adjoint of [`grad`].
pub fn div(v: &VectorField) -> Result<ScalarField> {
    v.expect(Placement::Edge)?;
    let grid = v.grid;
    let mut out = vec![0.0; grid.cells()];
    div_into(&grid, &v.values, &mut out);
    Ok(ScalarField { grid, values: out })
}

/// Forward-difference divergence of a face field (cell-site result).
///
/// `div_face(curl(v)) = 0` for every edge field `v`.
pub fn div_face(w: &VectorField) -> Result<ScalarField> {
    w.expect(Placement::Face)?;
    let grid = w.grid;
    let n = grid.cells();
    let inv = 1.0 / grid.spacing;
    let x = &w.values;
    let mut out = vec![0.0; n];
    for_each_forward(&grid, |c, nb| {
        let mut s = 0.0;
        for a in 0..3 {
            s += x[a * n + nb[a]] - x[a * n + c];
        }
        out[c] = s * inv;
    });
    Ok(ScalarField { grid, values: out })
}

/// Staggered curl, edges to faces.
pub fn curl(v: &VectorField) -> Result<VectorField> {
    v.expect(Placement::Edge)?;
    let grid = v.grid;
    let mut out = vec![0.0; grid.vector_len()];
    curl_into(&grid, &v.values, &mut out);
    Ok(VectorField { grid, placement: Placement::Face, values: out })
}

/// Transpose of [`curl`], faces to edges.
pub fn curl_t(w: &VectorField) -> Result<VectorField> {
    w.expect(Placement::Face)?;
    let grid = w.grid;
    let mut out = vec![0.0; grid.vector_len()];
    curl_t_into(&grid, &w.values, &mut out);
    Ok(VectorField { grid, placement: Placement::Edge, values: out })
}

pub(crate) fn grad_into(grid: &Grid, p: &[f64], out: &mut [f64]) {
    let n = grid.cells();
    let inv = 1.0 / grid.spacing;
    for_each_forward(grid, |c, nb| {
        for a in 0..3 {
            out[a * n + c] = (p[nb[a]] - p[c]) * inv;
        }
    });
}

pub(crate) fn div_into(grid: &Grid, x: &[f64], out: &mut [f64]) {
    let n = grid.cells();
    let inv = 1.0 / grid.spacing;
    for_each_backward(grid, |c, nb| {
        let mut s = 0.0;
        for a in 0..3 {
            s += x[a * n + c] - x[a * n + nb[a]];
        }
        out[c] = s * inv;
    });
}

pub(crate) fn curl_into(grid: &Grid, x: &[f64], out: &mut [f64]) {
    let n = grid.cells();
    let inv = 1.0 / grid.spacing;
    for_each_forward(grid, |c, nb| {
        for a in 0..3 {
            let b = (a + 1) % 3;
            let d = (a + 2) % 3;
            // (curl v)_a = d_b v_d - d_d v_b
            out[a * n + c] = ((x[d * n + nb[b]] - x[d * n + c]) - (x[b * n + nb[d]] - x[b * n + c])) * inv;
        }
    });
}

pub(crate) fn curl_t_into(grid: &Grid, x: &[f64], out: &mut [f64]) {
    let n = grid.cells();
    let inv = 1.0 / grid.spacing;
    for_each_backward(grid, |c, nb| {
        for a in 0..3 {
            let b = (a + 1) % 3;
            let d = (a + 2) % 3;
            out[a * n + c] = ((x[d * n + c] - x[d * n + nb[b]]) - (x[b * n + c] - x[b * n + nb[d]])) * inv;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scalar(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::from_values(grid, (0..grid.cells()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_vector(grid: Grid, placement: Placement, rng: &mut ChaCha8Rng) -> VectorField {
        let vals = (0..grid.vector_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        VectorField::from_values(grid, placement, vals).unwrap()
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new([4, 0, 4], 1.0).is_err());
        assert!(Grid::new([4, 4, 4], 0.0).is_err());
        assert!(Grid::new([4, 4, 4], f64::NAN).is_err());
        let g = Grid::new([3, 4, 5], 0.5).unwrap();
        assert_eq!(g.cells(), 60);
        for idx in 0..g.cells() {
            let [i, j, k] = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.neighbor(g.index(2, 0, 0), 0, 1), g.index(0, 0, 0));
        assert_eq!(g.neighbor(g.index(0, 0, 0), 2, -1), g.index(0, 0, 4));
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid::cubic(5, 0.3).unwrap();
        let phi = ScalarField::from_fn(g, |_| 2.5);
        assert_eq!(grad(&phi).max_abs(), 0.0);
    }

    #[test]
    fn gradient_of_cosine_matches_discrete_symbol() {
        let s = 0.25;
        let g = Grid::cubic(8, s).unwrap();
        let l = 8.0 * s;
        let k = 2.0 * PI / l;
        let phi = ScalarField::from_fn(g, |r| libm::cos(k * r[0]));
        let gp = grad(&phi);
        // d/dx cos at the half-shifted edge picks up the discrete factor sin(ks/2)/(s/2)
        let amp = libm::sin(k * s / 2.0) / (s / 2.0);
        let want = VectorField::from_fn(g, Placement::Edge, |a, r| if a == 0 { -amp * libm::sin(k * r[0]) } else { 0.0 });
        let err = gp.sub(&want).unwrap().max_abs();
        assert!(err < 1e-13, "err {err}");
    }

    #[test]
    fn laplacian_stencil_of_impulse() {
        let s = 0.5;
        let g = Grid::cubic(6, s).unwrap();
        let mut phi = ScalarField::zeros(g);
        let c = g.index(2, 3, 1);
        phi.values_mut()[c] = 1.0;
        let lap = div(&grad(&phi)).unwrap();
        let v = lap.values();
        assert!((v[c] + 6.0 / (s * s)).abs() < 1e-12);
        for a in 0..3 {
            for step in [-1, 1] {
                assert!((v[g.neighbor(c, a, step)] - 1.0 / (s * s)).abs() < 1e-12);
            }
        }
        let total: f64 = v.iter().map(|x| x.abs()).sum();
        assert!((total - 12.0 / (s * s)).abs() < 1e-12);
    }

    #[test]
    fn operators_check_placement() {
        let g = Grid::cubic(3, 1.0).unwrap();
        let e = VectorField::zeros(g, Placement::Edge);
        let f = VectorField::zeros(g, Placement::Face);
        assert!(matches!(div(&f), Err(Error::PlacementMismatch { .. })));
        assert!(matches!(curl(&f), Err(Error::PlacementMismatch { .. })));
        assert!(matches!(curl_t(&e), Err(Error::PlacementMismatch { .. })));
        assert!(matches!(div_face(&e), Err(Error::PlacementMismatch { .. })));
        let other = VectorField::zeros(Grid::cubic(4, 1.0).unwrap(), Placement::Edge);
        assert_eq!(e.inner(&other), Err(Error::GridMismatch));
    }

    #[test]
    fn plane_wave_curl_has_discrete_wavenumber() {
        let g = Grid::cubic(8, 1.0).unwrap();
        let k = 2.0 * PI / 8.0;
        let v = VectorField::from_fn(g, Placement::Edge, |a, r| if a == 1 { libm::cos(k * r[0]) } else { 0.0 });
        let w = curl(&v).unwrap();
        let kd = 2.0 * libm::sin(k / 2.0);
        let want = VectorField::from_fn(g, Placement::Face, |a, r| if a == 2 { -kd * libm::sin(k * r[0]) } else { 0.0 });
        assert!(w.sub(&want).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn chain_identities_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Grid::new([4, 5, 3], 0.7).unwrap();
        let phi = random_scalar(g, &mut rng);
        assert!(curl(&grad(&phi)).unwrap().max_abs() <= 1e-13);
        let w = random_vector(g, Placement::Face, &mut rng);
        assert!(div(&curl_t(&w).unwrap()).unwrap().max_abs() <= 1e-13);
        let v = random_vector(g, Placement::Edge, &mut rng);
        assert!(div_face(&curl(&v).unwrap()).unwrap().max_abs() <= 1e-13);
    }

    /// Dense matrix of a linear operator, built column by column from unit inputs.
    fn dense_columns(n_in: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
        (0..n_in)
            .map(|c| {
                let mut e = vec![0.0; n_in];
                e[c] = 1.0;
                apply(&e)
            })
            .collect()
    }

    fn dense_apply(cols: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; cols[0].len()];
        for (c, &xc) in cols.iter().zip(x) {
            axpy(&mut y, xc, c);
        }
        y
    }

    #[test]
    fn operators_match_dense_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Grid::cubic(4, 0.5).unwrap();
        let gm = dense_columns(g.cells(), |e| grad(&ScalarField::from_values(g, e.to_vec()).unwrap()).into_values());
        let dm = dense_columns(g.vector_len(), |e| {
            div(&VectorField::from_values(g, Placement::Edge, e.to_vec()).unwrap()).unwrap().into_values()
        });
        let cm = dense_columns(g.vector_len(), |e| {
            curl(&VectorField::from_values(g, Placement::Edge, e.to_vec()).unwrap()).unwrap().into_values()
        });
        let phi = random_scalar(g, &mut rng);
        let v = random_vector(g, Placement::Edge, &mut rng);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
        assert!(close(grad(&phi).values(), &dense_apply(&gm, phi.values())));
        assert!(close(div(&v).unwrap().values(), &dense_apply(&dm, v.values())));
        assert!(close(curl(&v).unwrap().values(), &dense_apply(&cm, v.values())));
        // div is exactly -grad^T, curl_t exactly curl^T
        for r in 0..g.cells() {
            for c in 0..g.vector_len() {
                assert_eq!(dm[c][r], -gm[r][c]);
            }
        }
        let w = random_vector(g, Placement::Face, &mut rng);
        let ct = curl_t(&w).unwrap();
        for (c, col) in cm.iter().enumerate() {
            let want: f64 = dot(col, w.values());
            assert!((ct.values()[c] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_pairs_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Grid::cubic(4, 1.3).unwrap();
        let phi = random_scalar(g, &mut rng);
        let v = random_vector(g, Placement::Edge, &mut rng);
        let w = random_vector(g, Placement::Face, &mut rng);
        let lhs = grad(&phi).inner(&v).unwrap();
        let rhs = -phi.inner(&div(&v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        let lhs = curl(&v).unwrap().inner(&w).unwrap();
        let rhs = v.inner(&curl_t(&w).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn single_cell_axes_reduce_to_lower_dimension() {
        let g = Grid::new([8, 1, 1], 1.0).unwrap();
        let phi = ScalarField::from_fn(g, |r| libm::sin(r[0]));
        let gp = grad(&phi);
        assert_eq!(gp.component(1).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(gp.component(2).iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert!(curl(&gp).unwrap().max_abs() < 1e-15);
    }
}
