//! Frozen-coefficient fixed-point scheme for the scalar self-diffusion
//! equation
//!
//! ```text
//! u_t = div[(1 + alpha lambda u) A grad u] + theta^2 u (1 - lambda u)
//!       - lambda theta c u,      du/dnu = 0,   u(0) = u0,
//! ```
//!
//! plus the frozen-coefficient reference solve on parabolic cubes and the
//! approximation gaps between the two.
//!
//! Each outer iteration freezes the whole space-time iterate `v` and solves a
//! linear problem: diffusion `(1 + alpha lambda v) A` implicit, the reaction
//! split so that `theta^2 lambda v u + lambda theta c u` sits on the diagonal
//! and `theta^2 v` is the explicit source. In the normalized variable
//! `lambda u` the source is bounded by the absorption, which is exactly the
//! structure that keeps every iterate inside `[0, 1/lambda]` without a
//! step-size restriction. At the fixed point the scheme is the fully implicit
//! backward-Euler discretization of the equation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::mesh::{
    st_integral, Field, Grid, ParabolicCube, Region, SpaceTimeField, SymTensor,
    TensorField, TimeAxis,
};
use crate::parabolic::{diagonal_face_coefficients, mixed_flux_divergence};
use crate::sparse::{assemble_implicit_step, solve_spd_warm, DEFAULT_REL_TOL};

/// Parameters of the scalar model equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    alpha: f64,
    lambda: f64,
    theta: f64,
    ellipticity: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, lambda: f64, theta: f64, ellipticity: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter("self-diffusion weight"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter("carrying-capacity scale"));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidParameter("rate scale"));
        }
        if !(ellipticity >= 1.0) || !ellipticity.is_finite() {
            return Err(Error::InvalidParameter("ellipticity constant"));
        }
        Ok(ModelParams { alpha, lambda, theta, ellipticity })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardConfig {
    pub max_iterations: usize,
    pub l2_tolerance: f64,
    /// Fraction of the new iterate mixed in per update; 1 is the plain map.
    pub relaxation: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { max_iterations: 200, l2_tolerance: 1e-10, relaxation: 1.0 }
    }
}

impl PicardConfig {
    fn validate(&self) -> Result<()> {
        if !(self.l2_tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParameter("relaxation must lie in (0, 1]"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("iteration budget"));
        }
        Ok(())
    }
}

/// Converged solution with the iteration history.
#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub u: SpaceTimeField,
    /// Successive-iterate `L^2` gaps, one per outer iteration.
    pub gaps: Vec<f64>,
    /// `(min, max)` of each outer iterate, for bracket assertions.
    pub iterate_range: Vec<(f64, f64)>,
}

fn check_bracket(u0: &Field, lambda: f64) -> Result<()> {
    let tol = 1e-12 / lambda;
    if u0.min() < -tol || u0.max() > 1.0 / lambda + tol {
        return Err(Error::InvalidParameter("initial datum outside [0, 1/lambda]"));
    }
    Ok(())
}

/// One sweep of the frozen-coefficient map: solve the linear problem with
/// coefficients taken from `v` at the new time level of each step.
fn apply_map(
    params: &ModelParams,
    a: &TensorField,
    c: &SpaceTimeField,
    u0: &Field,
    v: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    let grid = *u0.grid();
    let time = *c.time();
    let dt = time.dt();
    let (alpha, lambda, theta) = (params.alpha, params.lambda, params.theta);
    let mut slices = Vec::with_capacity(time.slice_count());
    slices.push(u0.clone());
    for m in 1..time.slice_count() {
        let vm = v.slice(m);
        let scale = vm.map(|w| 1.0 + alpha * lambda * math::max(w, 0.0))?;
        let diffusivity = diagonal_face_coefficients(a, m, Some(&scale))?;
        let reaction = vm.zip(c.slice(m), |vv, cc| {
            theta * theta * lambda * math::max(vv, 0.0) + lambda * theta * cc
        })?;
        let matrix = assemble_implicit_step(&grid, &diffusivity, &reaction, dt)?;
        let mixed = mixed_flux_divergence(v.slice(m), a, m, Some(&scale));
        let prev = &slices[m - 1];
        let rhs: Vec<f64> = (0..grid.cell_count())
            .map(|i| prev.get(i) / dt + theta * theta * math::max(vm.get(i), 0.0) + mixed[i])
            .collect();
        let (x, _) = solve_spd_warm(&matrix, &rhs, Some(prev.values()), DEFAULT_REL_TOL)?;
        slices.push(Field::from_values(grid, x)?);
    }
    SpaceTimeField::from_slices(time, slices)
}

/// Fixed-point solve starting from the constant-in-time extension of `u0`.
pub fn picard_solve(
    params: &ModelParams,
    a: &TensorField,
    c: &SpaceTimeField,
    u0: &Field,
    cfg: &PicardConfig,
) -> Result<PicardSolution> {
    let start = SpaceTimeField::extend(u0, *c.time());
    picard_solve_from(params, a, c, u0, &start, cfg)
}

/// Fixed-point solve from an explicit initial iterate.
pub fn picard_solve_from(
    params: &ModelParams,
    a: &TensorField,
    c: &SpaceTimeField,
    u0: &Field,
    initial_iterate: &SpaceTimeField,
    cfg: &PicardConfig,
) -> Result<PicardSolution> {
    cfg.validate()?;
    check_bracket(u0, params.lambda)?;
    if c.min() < 0.0 {
        return Err(Error::CoefficientSign);
    }
    if !a.grid().same_layout(u0.grid()) || !initial_iterate.same_shape(c) {
        return Err(Error::ShapeMismatch("fixed-point data"));
    }
    let mut v = initial_iterate.clone();
    let mut gaps = Vec::new();
    let mut ranges = Vec::new();
    for _ in 0..cfg.max_iterations {
        let w = apply_map(params, a, c, u0, &v)?;
        ranges.push((w.min(), w.max()));
        let gap = w.l2_distance(&v)?;
        gaps.push(gap);
        v = if cfg.relaxation == 1.0 {
            w
        } else {
            let omega = cfg.relaxation;
            let slices = v
                .slices()
                .iter()
                .zip(w.slices())
                .map(|(old, new)| old.zip(new, |a, b| (1.0 - omega) * a + omega * b))
                .collect::<Result<Vec<_>>>()?;
            SpaceTimeField::from_slices(*v.time(), slices)?
        };
        if gap <= cfg.l2_tolerance {
            return Ok(PicardSolution { u: v, gaps, iterate_range: ranges });
        }
    }
    Err(Error::NoConvergence { gaps })
}

/// Spatially averaged tensor over the cube's ball, one tensor per slice
/// (constant in space), reproduced as a [`TensorField`] on the same grid.
pub fn cube_average_tensor(a: &TensorField, cube: &ParabolicCube, time: &TimeAxis) -> Result<TensorField> {
    let grid = *a.grid();
    let cells = cube.cells_in(&grid);
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let slice_mean = |m: usize| -> SymTensor {
        let mut acc = SymTensor { xx: 0.0, yy: 0.0, xy: 0.0 };
        for &i in &cells {
            acc = acc.add(&a.at(i, m));
        }
        acc.scale(1.0 / cells.len() as f64)
    };
    if a.is_time_dependent() {
        TensorField::from_fn_time(grid, *time, a.ellipticity(), |_, t| {
            // Map the time back to its slice index.
            let m = math::round((t - time.t0()) / time.dt()) as usize;
            slice_mean(m)
        })
    } else {
        let mean = slice_mean(0);
        TensorField::from_fn(grid, a.ellipticity(), |_| mean)
    }
}

/// Solution of the frozen-coefficient, reaction-only equation on a parabolic
/// cube with `u` as parabolic boundary data.
///
/// The returned field equals `u` outside the cube; inside, the earliest slice
/// of the time slab and the ring of cube cells with a neighbor outside the
/// ball are copied from `u`, and the interior cells solve
/// `v_t = div[(1 + alpha lambda v) Abar(t) grad v] + theta^2 v (1 - lambda v)`
/// by the same frozen-coefficient iteration as [`picard_solve`]. Cube faces
/// that coincide with the domain boundary keep the zero-flux condition, so
/// cubes abutting the boundary are admissible; the time slab must lie inside
/// the axis.
pub fn reference_solve(
    params: &ModelParams,
    abar: &TensorField,
    cube: &ParabolicCube,
    u: &SpaceTimeField,
    cfg: &PicardConfig,
) -> Result<SpaceTimeField> {
    cfg.validate()?;
    let grid = *u.grid();
    let time = *u.time();
    let (tlo, thi) = cube.time_window();
    if tlo < time.t0() - 1e-12 || thi > time.t_end() + 1e-12 {
        return Err(Error::CubeOutsideDomain);
    }
    let slab = cube.slices_in(&time);
    if slab.len() < 2 {
        return Err(Error::CubeOutsideDomain);
    }
    let cells = cube.cells_in(&grid);
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut in_cube = alloc::vec![false; grid.cell_count()];
    for &i in &cells {
        in_cube[i] = true;
    }
    // Ring cells carry Dirichlet data from u; cells whose every in-grid
    // neighbor stays in the ball are unknowns.
    let mut is_ring = alloc::vec![false; grid.cell_count()];
    for &i in &cells {
        for axis in 0..grid.dim() {
            for dir in [-1, 1] {
                if let Some(nb) = grid.neighbor(i, axis, dir) {
                    if !in_cube[nb] {
                        is_ring[i] = true;
                    }
                }
            }
        }
    }
    let interior: Vec<usize> = cells.iter().copied().filter(|&i| !is_ring[i]).collect();
    if interior.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (alpha, lambda, theta) = (params.alpha, params.lambda, params.theta);
    let dt = time.dt();
    let first = slab[0];

    let mut v = u.clone();
    let mut gap_prev = f64::INFINITY;
    for iter in 0..cfg.max_iterations {
        let mut slices: Vec<Field> = v.slices().to_vec();
        for (k, &m) in slab.iter().enumerate().skip(1) {
            if slab[k - 1] + 1 != m {
                return Err(Error::CubeOutsideDomain);
            }
            let frozen = v.slice(m);
            let prev = &slices[m - 1];
            // Dense-free local solve: Jacobi-preconditioned CG on the
            // interior unknowns with ring cells folded into the RHS.
            let mut index_of = alloc::vec![usize::MAX; grid.cell_count()];
            for (j, &i) in interior.iter().enumerate() {
                index_of[i] = j;
            }
            let n = interior.len();
            let mut diag = alloc::vec![0.0; n];
            let mut rhs = alloc::vec![0.0; n];
            let mut couplings: Vec<(usize, usize, f64)> = Vec::new();
            for (j, &i) in interior.iter().enumerate() {
                let fz = math::max(frozen.get(i), 0.0);
                diag[j] = 1.0 / dt + theta * theta * lambda * fz;
                rhs[j] = prev.get(i) / dt + theta * theta * fz;
                for axis in 0..grid.dim() {
                    let h = grid.spacing(axis);
                    for dir in [-1i32, 1] {
                        let Some(nb) = grid.neighbor(i, axis, dir) else { continue };
                        if !in_cube[nb] {
                            // Ball edge coincides with the Neumann mirror.
                            continue;
                        }
                        let d_face = 0.5
                            * ((1.0 + alpha * lambda * math::max(frozen.get(i), 0.0))
                                * tensor_axis(abar, i, m, axis)
                                + (1.0 + alpha * lambda * math::max(frozen.get(nb), 0.0))
                                    * tensor_axis(abar, nb, m, axis));
                        let k_face = d_face / (h * h);
                        diag[j] += k_face;
                        if index_of[nb] != usize::MAX {
                            couplings.push((j, index_of[nb], -k_face));
                        } else {
                            // Ring cell: Dirichlet data from u at this slice.
                            rhs[j] += k_face * u.slice(m).get(nb);
                        }
                    }
                }
            }
            // Ring values come straight from u at this slice.
            let mut new_vals = slices[m].values().to_vec();
            for &i in &cells {
                if is_ring[i] {
                    new_vals[i] = u.slice(m).get(i);
                }
            }
            let x = cg_local(&diag, &couplings, &rhs, n)?;
            for (j, &i) in interior.iter().enumerate() {
                new_vals[i] = x[j];
            }
            slices[m] = Field::from_values(grid, new_vals)?;
        }
        // Bottom of the slab and everything outside stay pinned to u.
        let mut bottom = slices[first].values().to_vec();
        for &i in &cells {
            bottom[i] = u.slice(first).get(i);
        }
        slices[first] = Field::from_values(grid, bottom)?;
        let next = SpaceTimeField::from_slices(time, slices)?;
        let gap = next.l2_distance(&v)?;
        v = next;
        if gap <= cfg.l2_tolerance || (iter > 0 && gap >= gap_prev && gap <= 1e-8) {
            return Ok(v);
        }
        gap_prev = gap;
    }
    Err(Error::NoConvergence { gaps: alloc::vec![gap_prev] })
}

fn tensor_axis(a: &TensorField, cell: usize, slice: usize, axis: usize) -> f64 {
    let t = a.at(cell, slice);
    if axis == 0 {
        t.xx
    } else {
        t.yy
    }
}

/// CG on a small symmetric system given as diagonal plus coupling triples.
fn cg_local(diag: &[f64], couplings: &[(usize, usize, f64)], b: &[f64], n: usize) -> Result<Vec<f64>> {
    let matvec = |x: &[f64], out: &mut [f64]| {
        for j in 0..n {
            out[j] = diag[j] * x[j];
        }
        for &(i, j, v) in couplings {
            out[i] += v * x[j];
        }
    };
    let norm_b = math::sqrt(b.iter().map(|v| v * v).sum());
    if norm_b == 0.0 {
        return Ok(alloc::vec![0.0; n]);
    }
    let mut x = alloc::vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(&r, &d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    let mut ap = alloc::vec![0.0; n];
    for it in 0..(10 * n + 20) {
        let res = math::sqrt(r.iter().map(|v| v * v).sum()) / norm_b;
        if res <= DEFAULT_REL_TOL {
            return Ok(x);
        }
        matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        let _ = it;
    }
    Err(Error::SolveFailure { iterations: 10 * n + 20, residual: f64::NAN })
}

/// Squared `L^2` and face-gradient gaps between two fields over a cube.
pub fn approximation_gap(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    cube: &ParabolicCube,
) -> Result<(f64, f64)> {
    if !u.same_shape(v) {
        return Err(Error::ShapeMismatch("approximation gap fields"));
    }
    let diff_slices = u
        .slices()
        .iter()
        .zip(v.slices())
        .map(|(a, b)| a.zip(b, |x, y| x - y))
        .collect::<Result<Vec<_>>>()?;
    let diff = SpaceTimeField::from_slices(*u.time(), diff_slices)?;
    let sq_slices = diff
        .slices()
        .iter()
        .map(|s| s.map(|v| v * v))
        .collect::<Result<Vec<_>>>()?;
    let sq = SpaceTimeField::from_slices(*u.time(), sq_slices)?;
    let l2 = st_integral(&sq, Region::Cube(*cube))?;
    let h1 = crate::mesh::grad_sq_st_integral(&diff, Region::Cube(*cube));
    Ok((l2, h1))
}

/// Backward cube centered spatially in the domain and anchored at the final
/// time; the shared geometry used by reference-solve sweeps.
pub fn centered_cube(grid: &Grid, time: &TimeAxis, radius: f64) -> Result<ParabolicCube> {
    let mut center = [0.0; 2];
    for d in 0..grid.dim() {
        let (lo, hi) = grid.extent(d);
        center[d] = 0.5 * (lo + hi);
    }
    ParabolicCube::backward(center, time.t_end(), radius)
}
