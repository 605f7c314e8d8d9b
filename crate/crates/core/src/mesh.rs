//! Discrete space-time geometry: uniform cell-centered grids, scalar and
//! tensor fields, parabolic cubes, midpoint quadrature and discrete
//! differential operators with homogeneous Neumann boundary conditions.
//!
//! Conventions used throughout the crate:
//!
//! * Grids are uniform and cell-centered; a cell belongs to a ball iff its
//!   center does (closed ball, Euclidean distance). Uniform spacing keeps
//!   cube membership exact for dyadic radii.
//! * 2D cells are stored row-major: `idx = iy * nx + ix`. 1D grids use the
//!   same layout with `ny = 1`.
//! * Time quadrature is the right-endpoint rule: the whole-domain space-time
//!   integral sums slices `1..=steps` with weight `dt`, so the measure of the
//!   full space-time cylinder is exactly `|domain| * (T - t0)`. Cube-clipped
//!   integrals select slices by raw membership of the slice time in the
//!   cube's time window, which may include slice 0.
//! * The discrete gradient lives on faces: interior face value
//!   `(f_right - f_left)/h`, boundary faces 0 (Neumann mirror). Face-based
//!   gradient quadrature assigns each interior face the cell volume; the
//!   cell-centered gradient (used for pointwise norms) averages the two face
//!   values per axis.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Uniform rectangular mesh in `n` space dimensions, `n` either 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 2],
    origin: [f64; 2],
    spacing: [f64; 2],
}

impl Grid {
    /// 1D grid on `[min, max]` with `cells` cells.
    pub fn line(min: f64, max: f64, cells: usize) -> Result<Self> {
        Self::build(1, [min, 0.0], [max, 1.0], [cells, 1])
    }

    /// 2D grid on `[min_x, max_x] x [min_y, max_y]`.
    pub fn rect(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        Self::build(2, [x.0, y.0], [x.1, y.1], [nx, ny])
    }

    fn build(dim: usize, min: [f64; 2], max: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        let mut spacing = [1.0_f64; 2];
        for d in 0..dim {
            if cells[d] < 2 {
                return Err(Error::Construction("grid needs at least 2 cells per axis"));
            }
            if !(max[d] - min[d]).is_finite() || max[d] <= min[d] {
                return Err(Error::Construction("grid extent must be positive and finite"));
            }
            spacing[d] = (max[d] - min[d]) / cells[d] as f64;
        }
        Ok(Grid { dim, cells, origin: min, spacing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn cell_count(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn min_spacing(&self) -> f64 {
        let mut h = self.spacing[0];
        for d in 1..self.dim {
            h = math::min(h, self.spacing[d]);
        }
        h
    }

    /// Extent of the given axis; the upper end is `min + cells * h` exactly.
    pub fn extent(&self, axis: usize) -> (f64, f64) {
        (self.origin[axis], self.origin[axis] + self.cells[axis] as f64 * self.spacing[axis])
    }

    pub fn domain_measure(&self) -> f64 {
        let mut v = 1.0;
        for d in 0..self.dim {
            v *= self.cells[d] as f64 * self.spacing[d];
        }
        v
    }

    pub fn cell_volume(&self) -> f64 {
        let mut v = 1.0;
        for d in 0..self.dim {
            v *= self.spacing[d];
        }
        v
    }

    /// Euclidean diameter of the domain.
    pub fn diameter(&self) -> f64 {
        let mut s = 0.0;
        for d in 0..self.dim {
            let len = self.cells[d] as f64 * self.spacing[d];
            s += len * len;
        }
        math::sqrt(s)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells[0] + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.coords(idx);
        [
            self.origin[0] + (ix as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (iy as f64 + 0.5) * self.spacing[1],
        ]
    }

    /// Neighboring cell along `axis` in direction `dir` (-1 or +1), if any.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i32) -> Option<usize> {
        let (ix, iy) = self.coords(idx);
        let pos = [ix, iy];
        let next = pos[axis] as i64 + dir as i64;
        if next < 0 || next >= self.cells[axis] as i64 {
            return None;
        }
        let mut p = pos;
        p[axis] = next as usize;
        Some(self.index(p[0], p[1]))
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Uniform discretization of the time interval `[t0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAxis {
    t0: f64,
    dt: f64,
    steps: usize,
}

impl TimeAxis {
    pub fn span(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Construction("time axis needs at least one step"));
        }
        if !(t_end - t0).is_finite() || t_end <= t0 {
            return Err(Error::Construction("time span must be positive and finite"));
        }
        Ok(TimeAxis { t0, dt: (t_end - t0) / steps as f64, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of time slices including the initial one.
    pub fn slice_count(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, slice: usize) -> f64 {
        self.t0 + slice as f64 * self.dt
    }
}

/// One scalar value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: Grid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.cell_count()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::ShapeMismatch("value count differs from cell count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field"));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.cell_count()).map(|i| f(grid.center(i))).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &b| math::min(a, b))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &b| math::max(a, b))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if !self.grid.same_layout(&other.grid) {
            return Err(Error::ShapeMismatch("fields on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field::from_values(self.grid, values)
    }
}

/// One [`Field`] per time slice, including the initial one.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    time: TimeAxis,
    slices: Vec<Field>,
}

impl SpaceTimeField {
    pub fn constant(grid: Grid, time: TimeAxis, value: f64) -> Self {
        let slices = (0..time.slice_count()).map(|_| Field::constant(grid, value)).collect();
        SpaceTimeField { time, slices }
    }

    pub fn from_slices(time: TimeAxis, slices: Vec<Field>) -> Result<Self> {
        if slices.len() != time.slice_count() {
            return Err(Error::ShapeMismatch("slice count differs from steps + 1"));
        }
        let grid = *slices[0].grid();
        if slices.iter().any(|s| !s.grid().same_layout(&grid)) {
            return Err(Error::ShapeMismatch("slices on different grids"));
        }
        Ok(SpaceTimeField { time, slices })
    }

    pub fn from_fn(grid: Grid, time: TimeAxis, f: impl Fn([f64; 2], f64) -> f64) -> Result<Self> {
        let slices = (0..time.slice_count())
            .map(|m| Field::from_fn(grid, |x| f(x, time.time(m))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_slices(time, slices)
    }

    /// Constant-in-time extension of one spatial field.
    pub fn extend(field: &Field, time: TimeAxis) -> Self {
        let slices = (0..time.slice_count()).map(|_| field.clone()).collect();
        SpaceTimeField { time, slices }
    }

    pub fn grid(&self) -> &Grid {
        self.slices[0].grid()
    }

    pub fn time(&self) -> &TimeAxis {
        &self.time
    }

    pub fn slice(&self, m: usize) -> &Field {
        &self.slices[m]
    }

    pub fn slices(&self) -> &[Field] {
        &self.slices
    }

    pub fn min(&self) -> f64 {
        self.slices.iter().fold(f64::INFINITY, |a, s| math::min(a, s.min()))
    }

    pub fn max(&self) -> f64 {
        self.slices.iter().fold(f64::NEG_INFINITY, |a, s| math::max(a, s.max()))
    }

    pub fn same_shape(&self, other: &SpaceTimeField) -> bool {
        self.time == other.time && self.grid().same_layout(other.grid())
    }

    /// Discrete `L^2` norm of the difference over the space-time cylinder.
    pub fn l2_distance(&self, other: &SpaceTimeField) -> Result<f64> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch("space-time fields differ in shape"));
        }
        let vol = self.grid().cell_volume();
        let dt = self.time.dt();
        let mut acc = 0.0;
        for m in 1..self.slices.len() {
            let a = self.slices[m].values();
            let b = other.slices[m].values();
            let mut s = 0.0;
            for i in 0..a.len() {
                let d = a[i] - b[i];
                s += d * d;
            }
            acc += s * vol * dt;
        }
        Ok(math::sqrt(acc))
    }
}

/// Symmetric coefficient matrix attached to one cell; only `xx` is used on
/// 1D grids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor {
    pub fn isotropic(v: f64) -> Self {
        SymTensor { xx: v, yy: v, xy: 0.0 }
    }

    pub fn identity() -> Self {
        Self::isotropic(1.0)
    }

    pub fn diagonal(xx: f64, yy: f64) -> Self {
        SymTensor { xx, yy, xy: 0.0 }
    }

    /// Eigenvalue interval by the closed-form 2x2 formula (the `xx` entry
    /// alone in 1D).
    pub fn eigen_bounds(&self, dim: usize) -> (f64, f64) {
        if dim == 1 {
            return (self.xx, self.xx);
        }
        let mean = 0.5 * (self.xx + self.yy);
        let half = 0.5 * (self.xx - self.yy);
        let disc = math::sqrt(half * half + self.xy * self.xy);
        (mean - disc, mean + disc)
    }

    pub fn frobenius_sq(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.xx * self.xx
        } else {
            self.xx * self.xx + self.yy * self.yy + 2.0 * self.xy * self.xy
        }
    }

    pub fn sub(&self, other: &SymTensor) -> SymTensor {
        SymTensor { xx: self.xx - other.xx, yy: self.yy - other.yy, xy: self.xy - other.xy }
    }

    pub fn scale(&self, k: f64) -> SymTensor {
        SymTensor { xx: self.xx * k, yy: self.yy * k, xy: self.xy * k }
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        SymTensor { xx: self.xx + other.xx, yy: self.yy + other.yy, xy: self.xy + other.xy }
    }
}

/// Symmetric `n x n` coefficient per cell, optionally one set per time slice,
/// with declared ellipticity constant: every eigenvalue must lie in
/// `[1/lambda, lambda]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    grid: Grid,
    slices: usize,
    ellipticity: f64,
    data: Vec<SymTensor>,
}

/// Slack for eigenvalue checks against the declared ellipticity interval.
const ELLIPTICITY_TOL: f64 = 1e-12;

impl TensorField {
    pub fn identity(grid: Grid) -> Self {
        TensorField {
            grid,
            slices: 1,
            ellipticity: 1.0,
            data: vec![SymTensor::identity(); grid.cell_count()],
        }
    }

    /// Time-independent coefficient.
    pub fn from_fn(grid: Grid, ellipticity: f64, f: impl Fn([f64; 2]) -> SymTensor) -> Result<Self> {
        let data: Vec<SymTensor> = (0..grid.cell_count()).map(|i| f(grid.center(i))).collect();
        Self::validated(grid, 1, ellipticity, data)
    }

    /// Time-dependent coefficient, one tensor set per slice.
    pub fn from_fn_time(
        grid: Grid,
        time: TimeAxis,
        ellipticity: f64,
        f: impl Fn([f64; 2], f64) -> SymTensor,
    ) -> Result<Self> {
        let slices = time.slice_count();
        let mut data = Vec::with_capacity(slices * grid.cell_count());
        for m in 0..slices {
            let t = time.time(m);
            for i in 0..grid.cell_count() {
                data.push(f(grid.center(i), t));
            }
        }
        Self::validated(grid, slices, ellipticity, data)
    }

    fn validated(grid: Grid, slices: usize, ellipticity: f64, data: Vec<SymTensor>) -> Result<Self> {
        if !(ellipticity >= 1.0) || !ellipticity.is_finite() {
            return Err(Error::InvalidParameter("ellipticity constant must be >= 1"));
        }
        let lo = 1.0 / ellipticity - ELLIPTICITY_TOL;
        let hi = ellipticity + ELLIPTICITY_TOL;
        for t in &data {
            let (emin, emax) = t.eigen_bounds(grid.dim());
            if !emin.is_finite() || !emax.is_finite() || emin < lo || emax > hi {
                return Err(Error::Ellipticity);
            }
        }
        Ok(TensorField { grid, slices, ellipticity, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn slice_count(&self) -> usize {
        self.slices
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    /// Tensor at a cell; a time-independent field ignores `slice`.
    pub fn at(&self, cell: usize, slice: usize) -> SymTensor {
        let s = if self.slices == 1 { 0 } else { slice.min(self.slices - 1) };
        self.data[s * self.grid.cell_count() + cell]
    }

    pub fn is_time_dependent(&self) -> bool {
        self.slices > 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubeVariant {
    /// `B_rho(y) x (s - rho^2, s + rho^2]`
    Centered,
    /// `B_rho(y) x (s - rho^2, s]`
    Backward,
}

/// Parabolic cube: a Euclidean ball in space times a time interval of length
/// `rho^2` (backward) or `2 rho^2` (centered).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicCube {
    pub center: [f64; 2],
    pub time_center: f64,
    pub radius: f64,
    pub variant: CubeVariant,
}

impl ParabolicCube {
    pub fn centered(center: [f64; 2], time_center: f64, radius: f64) -> Result<Self> {
        Self::build(center, time_center, radius, CubeVariant::Centered)
    }

    pub fn backward(center: [f64; 2], time_center: f64, radius: f64) -> Result<Self> {
        Self::build(center, time_center, radius, CubeVariant::Backward)
    }

    fn build(center: [f64; 2], time_center: f64, radius: f64, variant: CubeVariant) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("cube radius must be positive"));
        }
        Ok(ParabolicCube { center, time_center, radius, variant })
    }

    /// Same ball and variant with a different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::build(self.center, self.time_center, radius, self.variant)
    }

    pub fn contains_point(&self, dim: usize, x: [f64; 2]) -> bool {
        let mut d2 = 0.0;
        for d in 0..dim {
            let dx = x[d] - self.center[d];
            d2 += dx * dx;
        }
        d2 <= self.radius * self.radius
    }

    pub fn contains_time(&self, t: f64) -> bool {
        let r2 = self.radius * self.radius;
        let upper = match self.variant {
            CubeVariant::Centered => self.time_center + r2,
            CubeVariant::Backward => self.time_center,
        };
        t > self.time_center - r2 && t <= upper
    }

    /// Time window as `(lower, upper]`.
    pub fn time_window(&self) -> (f64, f64) {
        let r2 = self.radius * self.radius;
        match self.variant {
            CubeVariant::Centered => (self.time_center - r2, self.time_center + r2),
            CubeVariant::Backward => (self.time_center - r2, self.time_center),
        }
    }

    /// Whether `inner` is geometrically contained in `self` (ball and time
    /// window both nested).
    pub fn contains_cube(&self, inner: &ParabolicCube, dim: usize) -> bool {
        let mut d2 = 0.0;
        for d in 0..dim {
            let dx = inner.center[d] - self.center[d];
            d2 += dx * dx;
        }
        let fits_ball = math::sqrt(d2) + inner.radius <= self.radius + 1e-14;
        let (ilo, ihi) = inner.time_window();
        let (olo, ohi) = self.time_window();
        fits_ball && ilo >= olo - 1e-14 && ihi <= ohi + 1e-14
    }

    /// Indices of cells whose centers lie in the ball.
    pub fn cells_in(&self, grid: &Grid) -> Vec<usize> {
        let mut out = Vec::new();
        // Scan only the bounding box of the ball.
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        for d in 0..grid.dim() {
            let h = grid.spacing(d);
            let (gmin, _) = grid.extent(d);
            let a = (self.center[d] - self.radius - gmin) / h - 0.5;
            let b = (self.center[d] + self.radius - gmin) / h - 0.5;
            lo[d] = math::max(math::floor(a), 0.0) as usize;
            hi[d] = math::min(math::ceil(b), (grid.cells(d) - 1) as f64) as usize;
            if math::ceil(b) < 0.0 || math::floor(a) > (grid.cells(d) - 1) as f64 {
                return out;
            }
        }
        if grid.dim() == 1 {
            for ix in lo[0]..=hi[0] {
                let idx = grid.index(ix, 0);
                if self.contains_point(1, grid.center(idx)) {
                    out.push(idx);
                }
            }
        } else {
            for iy in lo[1]..=hi[1] {
                for ix in lo[0]..=hi[0] {
                    let idx = grid.index(ix, iy);
                    if self.contains_point(2, grid.center(idx)) {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }

    /// Slice indices whose times lie in the time window.
    pub fn slices_in(&self, time: &TimeAxis) -> Vec<usize> {
        (0..time.slice_count()).filter(|&m| self.contains_time(time.time(m))).collect()
    }
}

/// Integration region: the whole domain or a parabolic cube clipped to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Whole,
    Cube(ParabolicCube),
}

fn region_cells(region: &Region, grid: &Grid) -> Vec<usize> {
    match region {
        Region::Whole => (0..grid.cell_count()).collect(),
        Region::Cube(c) => c.cells_in(grid),
    }
}

fn region_slices(region: &Region, time: &TimeAxis) -> Vec<usize> {
    match region {
        // Right-endpoint rule over (t0, T].
        Region::Whole => (1..time.slice_count()).collect(),
        Region::Cube(c) => c.slices_in(time),
    }
}

/// Midpoint-rule integral of a spatial field; exact for integrands affine in
/// each coordinate.
pub fn cell_integral(f: &Field, region: Region) -> Result<f64> {
    let cells = region_cells(&region, f.grid());
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let vol = f.grid().cell_volume();
    Ok(cells.iter().map(|&i| f.get(i)).sum::<f64>() * vol)
}

/// Average variant of [`cell_integral`]; divides by the measured volume.
pub fn cell_average(f: &Field, region: Region) -> Result<f64> {
    let cells = region_cells(&region, f.grid());
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let sum: f64 = cells.iter().map(|&i| f.get(i)).sum();
    Ok(sum / cells.len() as f64)
}

/// Space-time integral with weight `cell volume x dt` per sample.
pub fn st_integral(u: &SpaceTimeField, region: Region) -> Result<f64> {
    let cells = region_cells(&region, u.grid());
    let slices = region_slices(&region, u.time());
    if cells.is_empty() || slices.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let w = u.grid().cell_volume() * u.time().dt();
    let mut acc = 0.0;
    for &m in &slices {
        let vals = u.slice(m).values();
        let mut s = 0.0;
        for &i in &cells {
            s += vals[i];
        }
        acc += s;
    }
    Ok(acc * w)
}

/// Average variant of [`st_integral`].
pub fn st_average(u: &SpaceTimeField, region: Region) -> Result<f64> {
    let cells = region_cells(&region, u.grid());
    let slices = region_slices(&region, u.time());
    if cells.is_empty() || slices.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut acc = 0.0;
    for &m in &slices {
        let vals = u.slice(m).values();
        for &i in &cells {
            acc += vals[i];
        }
    }
    Ok(acc / (cells.len() * slices.len()) as f64)
}

/// Discrete measure of a region: sample count times `cell volume x dt`.
pub fn region_measure(grid: &Grid, time: &TimeAxis, region: Region) -> f64 {
    let cells = region_cells(&region, grid);
    let slices = region_slices(&region, time);
    (cells.len() * slices.len()) as f64 * grid.cell_volume() * time.dt()
}

/// Gradient component on the faces orthogonal to `axis`.
///
/// Layout: for `axis = 0` the face index is `iy * (nx + 1) + ix_face`; for
/// `axis = 1` it is `iy_face * nx + ix`. Boundary faces carry 0, realizing
/// the homogeneous Neumann mirror.
pub fn face_gradient(f: &Field, axis: usize) -> Vec<f64> {
    let grid = f.grid();
    let (nx, ny) = (grid.cells(0), grid.cells(1));
    let h = grid.spacing(axis);
    match axis {
        0 => {
            let mut g = vec![0.0; (nx + 1) * ny];
            for iy in 0..ny {
                for ixf in 1..nx {
                    let left = f.get(grid.index(ixf - 1, iy));
                    let right = f.get(grid.index(ixf, iy));
                    g[iy * (nx + 1) + ixf] = (right - left) / h;
                }
            }
            g
        }
        1 => {
            let mut g = vec![0.0; nx * (ny + 1)];
            for iyf in 1..ny {
                for ix in 0..nx {
                    let left = f.get(grid.index(ix, iyf - 1));
                    let right = f.get(grid.index(ix, iyf));
                    g[iyf * nx + ix] = (right - left) / h;
                }
            }
            g
        }
        _ => panic!("axis out of range"),
    }
}

/// Cell-centered gradient vector: per axis the mean of the two adjacent face
/// values (boundary faces 0).
pub fn cell_gradient(f: &Field) -> Vec<[f64; 2]> {
    let grid = f.grid();
    let mut out = vec![[0.0; 2]; grid.cell_count()];
    for axis in 0..grid.dim() {
        let faces = face_gradient(f, axis);
        let (nx, ny) = (grid.cells(0), grid.cells(1));
        for iy in 0..ny {
            for ix in 0..nx {
                let idx = grid.index(ix, iy);
                let (lo, hi) = match axis {
                    0 => (iy * (nx + 1) + ix, iy * (nx + 1) + ix + 1),
                    _ => (iy * nx + ix, (iy + 1) * nx + ix),
                };
                out[idx][axis] = 0.5 * (faces[lo] + faces[hi]);
            }
        }
    }
    out
}

/// Position of a face center (midpoint of the two adjacent cell centers for
/// interior faces).
pub fn face_position(grid: &Grid, axis: usize, face: usize) -> [f64; 2] {
    let (nx, _ny) = (grid.cells(0), grid.cells(1));
    let mut p = [0.0; 2];
    match axis {
        0 => {
            let iy = face / (nx + 1);
            let ixf = face % (nx + 1);
            p[0] = grid.extent(0).0 + ixf as f64 * grid.spacing(0);
            p[1] = grid.extent(1).0 + (iy as f64 + 0.5) * grid.spacing(1);
        }
        _ => {
            let iyf = face / nx;
            let ix = face % nx;
            p[0] = grid.extent(0).0 + (ix as f64 + 0.5) * grid.spacing(0);
            p[1] = grid.extent(1).0 + iyf as f64 * grid.spacing(1);
        }
    }
    p
}

fn interior_faces(grid: &Grid, axis: usize) -> Vec<usize> {
    let (nx, ny) = (grid.cells(0), grid.cells(1));
    let mut out = Vec::new();
    match axis {
        0 => {
            for iy in 0..ny {
                for ixf in 1..nx {
                    out.push(iy * (nx + 1) + ixf);
                }
            }
        }
        _ => {
            for iyf in 1..ny {
                for ix in 0..nx {
                    out.push(iyf * nx + ix);
                }
            }
        }
    }
    out
}

/// Face-based integral of `|grad f|^2` over one slice: each interior face
/// carries the cell volume. Pairs exactly with the implicit stiffness
/// operator under summation by parts.
pub fn grad_sq_integral(f: &Field) -> f64 {
    let grid = f.grid();
    let vol = grid.cell_volume();
    let mut acc = 0.0;
    for axis in 0..grid.dim() {
        let g = face_gradient(f, axis);
        for face in interior_faces(grid, axis) {
            acc += g[face] * g[face] * vol;
        }
    }
    acc
}

/// Face-based integral of `|grad u|^2` over a space-time region. Faces are
/// selected by their midpoints for cube regions.
pub fn grad_sq_st_integral(u: &SpaceTimeField, region: Region) -> f64 {
    let grid = u.grid();
    let vol = grid.cell_volume();
    let dt = u.time().dt();
    let slices = region_slices(&region, u.time());
    let mut acc = 0.0;
    for &m in &slices {
        let f = u.slice(m);
        for axis in 0..grid.dim() {
            let g = face_gradient(f, axis);
            for face in interior_faces(grid, axis) {
                let keep = match &region {
                    Region::Whole => true,
                    Region::Cube(c) => c.contains_point(grid.dim(), face_position(grid, axis, face)),
                };
                if keep {
                    acc += g[face] * g[face] * vol * dt;
                }
            }
        }
    }
    acc
}
