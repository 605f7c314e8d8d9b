//! Linear parabolic stepping with mixed data, the coefficient truncation
//! device, weak-form residuals and energy functionals.
//!
//! The implicit step discretizes `w_t = div(A grad w) - c w + f` with
//! backward Euler: the reaction goes on the diagonal, the source stays
//! explicit, so `0 <= f <= c` and `0 <= w_prev <= 1` give `0 <= w <= 1`
//! without a step-size restriction. For tensors with off-diagonal entries the
//! mixed-derivative flux is applied as an explicit correction evaluated on
//! `w_prev`; the M-matrix guarantees (positivity, comparison, bracket) are
//! exact for diagonal tensors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fixedpoint::ModelParams;
use crate::math;
use crate::mesh::{
    cell_gradient, cell_integral, grad_sq_integral, st_integral, Field, Region, SpaceTimeField,
    TensorField,
};
use crate::sparse::{assemble_implicit_step, solve_spd_warm, FaceCoefficients, DEFAULT_REL_TOL};

/// Data for `w_t = div(A grad w) - c w + f`, `dw/dnu = 0`, `w(0) = g(0)`.
///
/// `g` doubles as the initial datum (slice 0); with pure Neumann boundaries
/// its later slices only enter the energy report.
#[derive(Clone, Debug)]
pub struct LinearProblem {
    a: TensorField,
    c: SpaceTimeField,
    f: SpaceTimeField,
    g: SpaceTimeField,
}

impl LinearProblem {
    pub fn new(a: TensorField, c: SpaceTimeField, f: SpaceTimeField, g: SpaceTimeField) -> Result<Self> {
        if !c.same_shape(&f) || !c.same_shape(&g) || !a.grid().same_layout(c.grid()) {
            return Err(Error::ShapeMismatch("linear problem data"));
        }
        if c.min() < 0.0 {
            return Err(Error::CoefficientSign);
        }
        Ok(LinearProblem { a, c, f, g })
    }

    pub fn coefficient(&self) -> &TensorField {
        &self.a
    }

    pub fn reaction(&self) -> &SpaceTimeField {
        &self.c
    }

    pub fn source(&self) -> &SpaceTimeField {
        &self.f
    }

    pub fn datum(&self) -> &SpaceTimeField {
        &self.g
    }
}

/// Face coefficients for the diagonal part of a tensor at one slice, scaled
/// by a per-cell factor (arithmetic mean at interior faces).
pub(crate) fn diagonal_face_coefficients(
    a: &TensorField,
    slice: usize,
    scale: Option<&Field>,
) -> Result<FaceCoefficients> {
    let grid = *a.grid();
    let component = |axis: usize, cell: usize| -> f64 {
        let t = a.at(cell, slice);
        let s = scale.map(|f| f.get(cell)).unwrap_or(1.0);
        s * if axis == 0 { t.xx } else { t.yy }
    };
    let (nx, ny) = (grid.cells(0), grid.cells(1));
    let mut x = vec![0.0; (nx + 1) * ny];
    for iy in 0..ny {
        for ixf in 1..nx {
            let l = grid.index(ixf - 1, iy);
            let r = grid.index(ixf, iy);
            x[iy * (nx + 1) + ixf] = 0.5 * (component(0, l) + component(0, r));
        }
    }
    let y = if grid.dim() == 2 {
        let mut y = vec![0.0; nx * (ny + 1)];
        for iyf in 1..ny {
            for ix in 0..nx {
                let l = grid.index(ix, iyf - 1);
                let r = grid.index(ix, iyf);
                y[iyf * nx + ix] = 0.5 * (component(1, l) + component(1, r));
            }
        }
        y
    } else {
        Vec::new()
    };
    FaceCoefficients::new(&grid, [x, y])
}

/// Divergence of the mixed (off-diagonal) part of the tensor flux, evaluated
/// on a frozen field. Zero for diagonal tensors.
pub(crate) fn mixed_flux_divergence(
    w: &Field,
    a: &TensorField,
    slice: usize,
    scale: Option<&Field>,
) -> Vec<f64> {
    let grid = *w.grid();
    let n = grid.cell_count();
    let mut div = vec![0.0; n];
    if grid.dim() < 2 {
        return div;
    }
    let has_mixed = (0..n).any(|i| a.at(i, slice).xy != 0.0);
    if !has_mixed {
        return div;
    }
    let grads = cell_gradient(w);
    let coeff = |cell: usize| -> f64 {
        let s = scale.map(|f| f.get(cell)).unwrap_or(1.0);
        s * a.at(cell, slice).xy
    };
    let (nx, ny) = (grid.cells(0), grid.cells(1));
    // Axis-0 faces carry a_xy dw/dy, axis-1 faces carry a_xy dw/dx; interior
    // faces average the two adjacent cells, boundary faces stay zero-flux.
    for iy in 0..ny {
        for ixf in 1..nx {
            let l = grid.index(ixf - 1, iy);
            let r = grid.index(ixf, iy);
            let flux = 0.5 * (coeff(l) + coeff(r)) * 0.5 * (grads[l][1] + grads[r][1]);
            div[l] += flux / grid.spacing(0);
            div[r] -= flux / grid.spacing(0);
        }
    }
    for iyf in 1..ny {
        for ix in 0..nx {
            let l = grid.index(ix, iyf - 1);
            let r = grid.index(ix, iyf);
            let flux = 0.5 * (coeff(l) + coeff(r)) * 0.5 * (grads[l][0] + grads[r][0]);
            div[l] += flux / grid.spacing(1);
            div[r] -= flux / grid.spacing(1);
        }
    }
    div
}

/// One backward-Euler step to `slice_index` from the previous slice value.
pub fn linear_step(problem: &LinearProblem, w_prev: &Field, slice_index: usize) -> Result<Field> {
    let grid = *problem.c.grid();
    if !w_prev.grid().same_layout(&grid) {
        return Err(Error::ShapeMismatch("previous slice grid"));
    }
    let steps = problem.c.time().steps();
    if slice_index == 0 || slice_index > steps {
        return Err(Error::InvalidParameter("slice index"));
    }
    let dt = problem.c.time().dt();
    let diffusivity = diagonal_face_coefficients(&problem.a, slice_index, None)?;
    let matrix = assemble_implicit_step(&grid, &diffusivity, problem.c.slice(slice_index), dt)?;
    let mixed = mixed_flux_divergence(w_prev, &problem.a, slice_index, None);
    let f = problem.f.slice(slice_index);
    let rhs: Vec<f64> = (0..grid.cell_count())
        .map(|i| w_prev.get(i) / dt + f.get(i) + mixed[i])
        .collect();
    let (x, _) = solve_spd_warm(&matrix, &rhs, Some(w_prev.values()), DEFAULT_REL_TOL)?;
    Field::from_values(grid, x)
}

/// March the linear problem over the whole time axis starting from `g(0)`.
pub fn solve_linear_problem(problem: &LinearProblem) -> Result<SpaceTimeField> {
    let time = *problem.c.time();
    let mut slices = Vec::with_capacity(time.slice_count());
    slices.push(problem.g.slice(0).clone());
    for m in 1..time.slice_count() {
        let next = linear_step(problem, &slices[m - 1], m)?;
        slices.push(next);
    }
    SpaceTimeField::from_slices(time, slices)
}

/// Pointwise truncation `(min(c, k), min(f, k))`; preserves `0 <= f_k <= c_k`
/// whenever `0 <= f <= c`.
pub fn truncate(c: &SpaceTimeField, f: &SpaceTimeField, k: f64) -> Result<(SpaceTimeField, SpaceTimeField)> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter("truncation level must be positive"));
    }
    if !c.same_shape(f) {
        return Err(Error::ShapeMismatch("truncation fields"));
    }
    let cut = |u: &SpaceTimeField| -> Result<SpaceTimeField> {
        let slices = u
            .slices()
            .iter()
            .map(|s| s.map(|v| math::min(v, k)))
            .collect::<Result<Vec<_>>>()?;
        SpaceTimeField::from_slices(*u.time(), slices)
    };
    Ok((cut(c)?, cut(f)?))
}

/// Value of the discrete weak form of the scalar model equation against a
/// test function vanishing at the initial time.
///
/// Each interior slice contributes
/// `(u_t phi + (1 + alpha lambda u) <A grad u, grad phi>
///   - [theta^2 u (1 - lambda u) - lambda theta c u] phi) vol dt`
/// with cell-centered gradients, so a solution produced by the implicit
/// stepping leaves an `O(h^2 + dt)` residual per unit test norm rather than
/// one at solver tolerance.
pub fn weak_residual(
    u: &SpaceTimeField,
    params: &ModelParams,
    a: &TensorField,
    c: &SpaceTimeField,
    test: &SpaceTimeField,
) -> Result<f64> {
    if !u.same_shape(c) || !u.same_shape(test) || !a.grid().same_layout(u.grid()) {
        return Err(Error::ShapeMismatch("weak form data"));
    }
    if test.slice(0).values().iter().any(|&v| v != 0.0) {
        return Err(Error::TestFunction);
    }
    let grid = u.grid();
    let dt = u.time().dt();
    let w = grid.cell_volume() * dt;
    let (alpha, lambda, theta) = (params.alpha(), params.lambda(), params.theta());
    let mut acc = 0.0;
    for m in 1..u.time().slice_count() {
        let un = u.slice(m);
        let up = u.slice(m - 1);
        let cs = c.slice(m);
        let phi = test.slice(m);
        let gu = cell_gradient(un);
        let gphi = cell_gradient(phi);
        for i in 0..grid.cell_count() {
            let t = a.at(i, m);
            let flux = t.xx * gu[i][0] * gphi[i][0]
                + t.yy * gu[i][1] * gphi[i][1]
                + t.xy * (gu[i][0] * gphi[i][1] + gu[i][1] * gphi[i][0]);
            let ui = un.get(i);
            let reaction = theta * theta * ui * (1.0 - lambda * ui) - lambda * theta * cs.get(i) * ui;
            acc += ((ui - up.get(i)) / dt * phi.get(i) + (1.0 + alpha * lambda * ui) * flux
                - reaction * phi.get(i))
                * w;
        }
    }
    Ok(acc)
}

/// Left-hand side and right-hand components of the parabolic energy estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyReport {
    /// `sup_t int u^2 dx + int int |grad u|^2 dx dt`
    pub lhs: f64,
    pub domain_measure: f64,
    pub c_l2_sq: f64,
    pub g_norm_sq: f64,
}

impl EnergyReport {
    pub fn rhs_sum(&self) -> f64 {
        self.domain_measure + self.c_l2_sq + self.g_norm_sq
    }
}

/// Energy functional of a space-time field together with the data terms the
/// estimate compares against.
pub fn energy_report(u: &SpaceTimeField, c: &SpaceTimeField, g: &SpaceTimeField) -> Result<EnergyReport> {
    if !u.same_shape(c) || !u.same_shape(g) {
        return Err(Error::ShapeMismatch("energy report fields"));
    }
    let mut sup_mass = 0.0;
    for s in u.slices() {
        let sq = s.map(|v| v * v)?;
        sup_mass = math::max(sup_mass, cell_integral(&sq, Region::Whole)?);
    }
    let mut grad = 0.0;
    for m in 1..u.time().slice_count() {
        grad += grad_sq_integral(u.slice(m)) * u.time().dt();
    }
    let sq = |f: &SpaceTimeField| -> Result<f64> {
        let squared = f
            .slices()
            .iter()
            .map(|s| s.map(|v| v * v))
            .collect::<Result<Vec<_>>>()?;
        st_integral(&SpaceTimeField::from_slices(*f.time(), squared)?, Region::Whole)
    };
    let c_l2_sq = sq(c)?;
    let mut g_norm_sq = sq(g)?;
    for m in 1..g.time().slice_count() {
        g_norm_sq += grad_sq_integral(g.slice(m)) * g.time().dt();
    }
    let g0_sq = g.slice(0).map(|v| v * v)?;
    g_norm_sq += cell_integral(&g0_sq, Region::Whole)?;
    Ok(EnergyReport {
        lhs: sup_mass + grad,
        domain_measure: u.grid().domain_measure(),
        c_l2_sq,
        g_norm_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Grid, TimeAxis};

    fn constant_problem(
        grid: Grid,
        time: TimeAxis,
        c: f64,
        f: f64,
        g0: f64,
    ) -> LinearProblem {
        LinearProblem::new(
            TensorField::identity(grid),
            SpaceTimeField::constant(grid, time, c),
            SpaceTimeField::constant(grid, time, f),
            SpaceTimeField::constant(grid, time, g0),
        )
        .unwrap()
    }

    #[test]
    fn constants_are_steady_under_neumann() {
        let grid = Grid::rect((0.0, 1.0), (0.0, 1.0), 8, 8).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 4).unwrap();
        let p = constant_problem(grid, time, 0.0, 0.0, 1.0);
        let w = solve_linear_problem(&p).unwrap();
        for m in 0..time.slice_count() {
            for &v in w.slice(m).values() {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spatially_constant_reduces_to_ode() {
        // c = 1, f = 1, w_prev = 0, dt = 1: (w - 0)/1 = -w + 1, so w = 0.5.
        let grid = Grid::line(0.0, 1.0, 4).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 1).unwrap();
        let p = constant_problem(grid, time, 1.0, 1.0, 0.0);
        let w = linear_step(&p, &Field::constant(grid, 0.0), 1).unwrap();
        for &v in w.values() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn three_cell_step_matches_dense_oracle() {
        // Implicit step of (1,0,0) with D = 1, c = f = 0, h = dt = 1:
        // dense solve of [[2,-1,0],[-1,3,-1],[0,-1,2]] x = (1,0,0).
        let grid = Grid::line(0.0, 3.0, 3).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 1).unwrap();
        let p = constant_problem(grid, time, 0.0, 0.0, 0.0);
        let w_prev = Field::from_values(grid, alloc::vec![1.0, 0.0, 0.0]).unwrap();
        let w = linear_step(&p, &w_prev, 1).unwrap();
        let dense = crate::sparse::tests::dense_solve(
            &[2.0, -1.0, 0.0, -1.0, 3.0, -1.0, 0.0, -1.0, 2.0],
            &[1.0, 0.0, 0.0],
        );
        for i in 0..3 {
            assert!((w.get(i) - dense[i]).abs() < 1e-10);
        }
        assert!((w.get(0) - 0.625).abs() < 1e-10);
    }

    #[test]
    fn mass_conserved_without_reaction_or_source() {
        let grid = Grid::line(0.0, 1.0, 32).unwrap();
        let time = TimeAxis::span(0.0, 0.5, 20).unwrap();
        let mut p = constant_problem(grid, time, 0.0, 0.0, 0.0);
        let g = SpaceTimeField::extend(
            &Field::from_fn(grid, |x| if x[0] < 0.5 { 1.0 } else { 0.0 }).unwrap(),
            time,
        );
        p = LinearProblem::new(p.a.clone(), p.c.clone(), p.f.clone(), g).unwrap();
        let w = solve_linear_problem(&p).unwrap();
        let mass0 = cell_integral(w.slice(0), Region::Whole).unwrap();
        for m in 1..time.slice_count() {
            let mass = cell_integral(w.slice(m), Region::Whole).unwrap();
            assert!((mass - mass0).abs() <= 1e-12 * mass0.abs());
        }
    }

    #[test]
    fn bracket_preserved_with_dominating_reaction() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let grid = Grid::rect((0.0, 1.0), (0.0, 1.0), 10, 10).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 10).unwrap();
        for _ in 0..5 {
            let c = SpaceTimeField::from_fn(grid, time, |x, t| {
                1.0 + (x[0] * 9.0 + x[1] * 5.0 + t).sin().abs()
            })
            .unwrap();
            let f = SpaceTimeField::from_slices(
                time,
                c.slices().iter().map(|s| s.map(|v| v * 0.9).unwrap()).collect(),
            )
            .unwrap();
            let g0: f64 = rng.gen_range(0.0..1.0);
            let p = LinearProblem::new(
                TensorField::identity(grid),
                c,
                f,
                SpaceTimeField::constant(grid, time, g0),
            )
            .unwrap();
            let w = solve_linear_problem(&p).unwrap();
            assert!(w.min() >= -1e-10);
            assert!(w.max() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn comparison_principle_on_ordered_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid = Grid::line(0.0, 1.0, 16).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 8).unwrap();
        let a = TensorField::from_fn(grid, 2.0, |x| {
            crate::mesh::SymTensor::isotropic(1.0 + 0.5 * (6.0 * x[0]).sin().abs())
        })
        .unwrap();
        let c = SpaceTimeField::from_fn(grid, time, |x, _| 0.3 + x[0]).unwrap();
        for _ in 0..5 {
            let f1v: f64 = rng.gen_range(0.0..0.5);
            let f2v = f1v + rng.gen_range(0.0..0.5);
            let g1v: f64 = rng.gen_range(0.0..0.5);
            let g2v = g1v + rng.gen_range(0.0..0.5);
            let mk = |fv: f64, gv: f64| {
                LinearProblem::new(
                    a.clone(),
                    c.clone(),
                    SpaceTimeField::constant(grid, time, fv),
                    SpaceTimeField::constant(grid, time, gv),
                )
                .unwrap()
            };
            let w1 = solve_linear_problem(&mk(f1v, g1v)).unwrap();
            let w2 = solve_linear_problem(&mk(f2v, g2v)).unwrap();
            for m in 0..time.slice_count() {
                for i in 0..grid.cell_count() {
                    assert!(w1.slice(m).get(i) <= w2.slice(m).get(i) + 1e-10);
                }
            }
        }
    }

    #[test]
    fn truncation_examples() {
        let grid = Grid::line(0.0, 1.0, 6).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 2).unwrap();
        let c = SpaceTimeField::constant(grid, time, 5.0);
        let f = SpaceTimeField::constant(grid, time, 2.0);
        let (ck, fk) = truncate(&c, &f, 3.0).unwrap();
        assert!(ck.slices().iter().all(|s| s.values().iter().all(|&v| v == 3.0)));
        assert!(fk.slices().iter().all(|s| s.values().iter().all(|&v| v == 2.0)));
        let (ck, _) = truncate(&c, &f, 7.0).unwrap();
        assert_eq!(ck, c);
        // Mixed field against the elementwise oracle.
        let mixed = SpaceTimeField::from_fn(grid, time, |x, t| x[0] * 4.0 + t).unwrap();
        let (mk, _) = truncate(&mixed, &f, 2.5).unwrap();
        for m in 0..time.slice_count() {
            for i in 0..grid.cell_count() {
                let want = mixed.slice(m).get(i).min(2.5);
                assert_eq!(mk.slice(m).get(i), want);
            }
        }
        assert!(truncate(&c, &f, 0.0).is_err());
    }

    #[test]
    fn energy_report_examples() {
        let grid = Grid::line(0.0, 1.0, 256).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 8).unwrap();
        let zero = SpaceTimeField::constant(grid, time, 0.0);
        let r = energy_report(&zero, &zero, &zero).unwrap();
        assert_eq!(r.lhs, 0.0);

        let one = SpaceTimeField::constant(grid, time, 1.0);
        let r = energy_report(&one, &zero, &zero).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12);

        // u(x, t) = x: sup int u^2 = 1/3, grad term = 1 (up to the O(h)
        // boundary strips of the face quadrature).
        let linear = SpaceTimeField::from_fn(grid, time, |x, _| x[0]).unwrap();
        let r = energy_report(&linear, &zero, &zero).unwrap();
        assert!((r.lhs - (1.0 / 3.0 + 1.0)).abs() < 1e-2, "lhs = {}", r.lhs);
    }

    #[test]
    fn weak_residual_vanishes_for_equilibria() {
        let grid = Grid::line(0.0, 1.0, 16).unwrap();
        let time = TimeAxis::span(0.0, 1.0, 4).unwrap();
        let params = ModelParams::new(1.0, 2.0, 1.0, 1.0).unwrap();
        let a = TensorField::identity(grid);
        let c = SpaceTimeField::constant(grid, time, 0.0);
        let test = SpaceTimeField::from_fn(grid, time, |x, t| t * (1.0 + x[0])).unwrap();

        let zero = SpaceTimeField::constant(grid, time, 0.0);
        assert_eq!(weak_residual(&zero, &params, &a, &c, &test).unwrap(), 0.0);

        // Logistic equilibrium u = 1/lambda with c = 0.
        let eq = SpaceTimeField::constant(grid, time, 0.5);
        let r = weak_residual(&eq, &params, &a, &c, &test).unwrap();
        assert!(r.abs() <= 1e-12, "residual {r}");

        let bad_test = SpaceTimeField::constant(grid, time, 1.0);
        assert_eq!(
            weak_residual(&zero, &params, &a, &c, &bad_test),
            Err(Error::TestFunction)
        );
    }

    #[test]
    fn weak_residual_refines_at_first_order_overall() {
        // Manufactured exact solution via the reaction coefficient:
        // u = a + b cos(pi x) e^{-t} solves the model equation with
        // c = [div((1 + alpha lambda u) A grad u) + theta^2 u (1 - lambda u)
        //      - u_t] / (lambda theta u).
        let params = ModelParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let (aa, bb) = (0.5, 0.01);
        let exact = move |x: [f64; 2], t: f64| aa + bb * (core::f64::consts::PI * x[0]).cos() * (-t).exp();
        let forcing = move |x: [f64; 2], t: f64| {
            let pi = core::f64::consts::PI;
            let u = exact(x, t);
            let ux = -bb * pi * (pi * x[0]).sin() * (-t).exp();
            let uxx = -bb * pi * pi * (pi * x[0]).cos() * (-t).exp();
            let ut = -bb * (pi * x[0]).cos() * (-t).exp();
            let diffusion = (1.0 + u) * uxx + ux * ux;
            (diffusion + u * (1.0 - u) - ut) / u
        };
        let residual = |cells: usize, steps: usize| -> f64 {
            let grid = Grid::line(0.0, 1.0, cells).unwrap();
            let time = TimeAxis::span(0.0, 0.5, steps).unwrap();
            let u = SpaceTimeField::from_fn(grid, time, exact).unwrap();
            let c = SpaceTimeField::from_fn(grid, time, forcing).unwrap();
            let a = TensorField::identity(grid);
            let test = SpaceTimeField::from_fn(grid, time, |x, t| {
                t * (1.0 + 0.3 * (core::f64::consts::PI * x[0]).cos())
            })
            .unwrap();
            weak_residual(&u, &params, &a, &c, &test).unwrap().abs()
        };
        let coarse = residual(32, 8);
        let fine = residual(64, 16);
        assert!(
            coarse / fine >= 1.8,
            "refinement ratio {} (coarse {coarse:e}, fine {fine:e})",
            coarse / fine
        );
    }
}
