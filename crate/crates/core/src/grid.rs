//! Uniform Cartesian real-space mesh centred on the origin, central finite
//! difference Laplacian with hard-wall boundaries, and the quadratures used
//! everywhere else (inner products, dipole moments).
//!
//! Fields are stored flat in row-major order with x outermost:
//! `index = (ix * ny + iy) * nz + iz`. In 1D the y and z extents are 1.

use std::ops::{AddAssign, Mul};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Smallest axis count accepted for an active axis (width of the 9-point stencil).
pub const MIN_AXIS_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    shape: [usize; 3],
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, shape: [usize; 3], h: f64) -> Result<Self> {
        let mut errs = Vec::new();
        if dim != 1 && dim != 3 {
            errs.push(format!("grid dimension must be 1 or 3, got {dim}"));
        }
        if !(h > 0.0 && h.is_finite()) {
            errs.push(format!("grid spacing must be positive, got {h}"));
        }
        let active = if dim == 1 { 1 } else { 3 };
        for (axis, &n) in shape.iter().enumerate() {
            if axis < active && n < MIN_AXIS_POINTS {
                errs.push(format!(
                    "axis {axis} has {n} points, need at least {MIN_AXIS_POINTS}"
                ));
            }
            if axis >= active && dim == 1 && n != 1 {
                errs.push(format!("1D grid must have extent 1 on axis {axis}"));
            }
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Grid { dim, shape, h })
    }

    pub fn new_1d(n: usize, h: f64) -> Result<Self> {
        Grid::new(1, [n, 1, 1], h)
    }

    pub fn new_3d(shape: [usize; 3], h: f64) -> Result<Self> {
        Grid::new(3, shape, h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight h^dim.
    pub fn volume_element(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Number of axes carrying more than one point.
    pub fn active_axes(&self) -> usize {
        self.dim
    }

    /// Coordinate of point `i` along `axis`; the mesh is symmetric about zero.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.shape[axis] as f64 - 1.0)) * self.h
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.shape[1] + iy) * self.shape[2] + iz
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let iz = idx % self.shape[2];
        let rest = idx / self.shape[2];
        [rest / self.shape[1], rest % self.shape[1], iz]
    }

    /// Cartesian position of a flat index; inactive axes report 0.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.unravel(idx);
        let mut r = [self.coord(0, ix), 0.0, 0.0];
        if self.dim == 3 {
            r[1] = self.coord(1, iy);
            r[2] = self.coord(2, iz);
        }
        r
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.shape[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// Half-extent of the box along `axis` (distance from origin to the outermost point).
    pub fn half_extent(&self, axis: usize) -> f64 {
        0.5 * (self.shape[axis] as f64 - 1.0) * self.h
    }

    pub fn contains(&self, r: [f64; 3]) -> bool {
        (0..3).all(|a| {
            if a >= self.dim {
                r[a] == 0.0
            } else {
                r[a].abs() <= self.half_extent(a) + 1e-12
            }
        })
    }

    /// The field `v · r` sampled on the mesh.
    pub fn linear_field(&self, v: [f64; 3]) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let r = self.position(idx);
                v[0] * r[0] + v[1] * r[1] + v[2] * r[2]
            })
            .collect()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Usage(format!(
                "field has {len} values but grid has {} points",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Central second-derivative stencil with `points` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stencil {
    points: usize,
}

impl Default for Stencil {
    fn default() -> Self {
        Stencil { points: 9 }
    }
}

impl Stencil {
    pub fn new(points: usize) -> Result<Self> {
        match points {
            3 | 5 | 7 | 9 => Ok(Stencil { points }),
            _ => Err(Error::config(format!(
                "stencil order must be 3, 5, 7 or 9 points, got {points}"
            ))),
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> usize {
        (self.points - 1) / 2
    }

    /// Coefficients c_0..c_w of d²/dx² ≈ (c_0 f_0 + Σ_j c_j (f_j + f_-j)) / h².
    pub fn coefficients(&self) -> &'static [f64] {
        match self.points {
            3 => &[-2.0, 1.0],
            5 => &[-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
            7 => &[-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
            _ => &[
                -205.0 / 72.0,
                8.0 / 5.0,
                -1.0 / 5.0,
                8.0 / 315.0,
                -1.0 / 560.0,
            ],
        }
    }

    /// Largest eigenvalue of -∇² on an unbounded mesh (used for time-step checks).
    pub fn max_symbol(&self, grid: &Grid) -> f64 {
        let c = self.coefficients();
        let per_axis: f64 = -(c[0]
            + 2.0
                * c[1..]
                    .iter()
                    .enumerate()
                    .map(|(j, cj)| if j % 2 == 0 { -cj } else { *cj })
                    .sum::<f64>());
        per_axis * grid.active_axes() as f64 / (grid.spacing() * grid.spacing())
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        let w = self.half_width();
        for axis in 0..grid.active_axes() {
            if grid.shape()[axis] <= w {
                return Err(Error::config(format!(
                    "axis {axis} has {} points, too few for a {}-point stencil",
                    grid.shape()[axis],
                    self.points
                )));
            }
        }
        Ok(())
    }
}

/// `out += scale * ∇² input` with zero values outside the box.
pub fn laplacian_accumulate<T>(grid: &Grid, stencil: Stencil, input: &[T], out: &mut [T], scale: f64)
where
    T: Copy + AddAssign + Mul<f64, Output = T>,
{
    let coef = stencil.coefficients();
    let inv_h2 = scale / (grid.spacing() * grid.spacing());
    let c0 = coef[0] * inv_h2 * grid.active_axes() as f64;
    for (o, &v) in out.iter_mut().zip(input) {
        *o += v * c0;
    }
    let [nx, ny, nz] = grid.shape();
    let strides = [ny * nz, nz, 1];
    for axis in 0..grid.active_axes() {
        let n = grid.shape()[axis];
        let stride = strides[axis];
        let starts: Vec<usize> = match axis {
            0 => (0..ny * nz).collect(),
            1 => (0..nx)
                .flat_map(|ix| (0..nz).map(move |iz| ix * ny * nz + iz))
                .collect(),
            _ => (0..nx * ny).map(|l| l * nz).collect(),
        };
        for start in starts {
            for (j, &cj) in coef.iter().enumerate().skip(1) {
                let c = cj * inv_h2;
                if j >= n {
                    break;
                }
                for i in 0..n - j {
                    let a = start + i * stride;
                    let b = start + (i + j) * stride;
                    out[a] += input[b] * c;
                    out[b] += input[a] * c;
                }
            }
        }
    }
}

/// Generic field on a grid. Construct with [`Field::from_vec`] to have length
/// and finiteness validated.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    data: Vec<T>,
}

pub type SpatialField = Field<C64>;
pub type RealField = Field<f64>;

pub trait FiniteValue {
    fn is_finite_value(&self) -> bool;
}

impl FiniteValue for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl FiniteValue for C64 {
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<T: Copy + Default + FiniteValue> Field<T> {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            data: vec![T::default(); grid.len()],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<T>) -> Result<Self> {
        grid.check_len(data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::Numerical(format!("non-finite field value at index {i}")));
        }
        Ok(Field { grid, data })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> T) -> Self {
        Field {
            grid,
            data: (0..grid.len()).map(|i| f(grid.position(i))).collect(),
        }
    }
}

impl<T> Field<T> {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_grid<U>(&self, other: &Field<U>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Usage("fields live on different grids".into()));
        }
        Ok(())
    }
}

impl RealField {
    pub fn to_complex(&self) -> SpatialField {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    /// ∫ f dr
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.volume_element()
    }
}

/// ∇² f on the grid with hard-wall boundaries.
pub fn laplacian_apply<T>(f: &Field<T>, stencil: Stencil) -> Result<Field<T>>
where
    T: Copy + Default + AddAssign + Mul<f64, Output = T>,
{
    stencil.check_grid(&f.grid)?;
    let mut out = vec![T::default(); f.data.len()];
    laplacian_accumulate(&f.grid, stencil, &f.data, &mut out, 1.0);
    Ok(Field {
        grid: f.grid,
        data: out,
    })
}

/// Σ conj(f) g over raw slices, without the volume element.
#[inline]
pub fn dot_raw(f: &[C64], g: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in f.iter().zip(g) {
        acc += a.conj() * b;
    }
    acc
}

#[inline]
pub fn norm_sqr_raw(f: &[C64]) -> f64 {
    f.iter().map(|v| v.norm_sqr()).sum()
}

/// ⟨f|g⟩ = h^dim Σ conj(f) g.
pub fn inner_product(f: &SpatialField, g: &SpatialField) -> Result<C64> {
    f.same_grid(g)?;
    Ok(dot_raw(&f.data, &g.data) * f.grid.volume_element())
}

/// ∫ r_axis ρ dr by midpoint quadrature.
pub fn dipole_integral(rho: &RealField, axis: usize) -> Result<f64> {
    if axis >= 3 {
        return Err(Error::Usage(format!("axis {axis} out of range")));
    }
    Ok(dipole_raw(&rho.grid, &rho.data, axis))
}

pub fn dipole_raw(grid: &Grid, rho: &[f64], axis: usize) -> f64 {
    if axis >= grid.active_axes() {
        return 0.0;
    }
    let mut acc = 0.0;
    for (idx, &v) in rho.iter().enumerate() {
        acc += grid.coord(axis, grid.unravel(idx)[axis]) * v;
    }
    acc * grid.volume_element()
}
