//! Assembly and solution of the symmetric positive-definite systems produced
//! by implicit diffusion steps.
//!
//! The assembled matrix is an M-matrix: positive diagonal, non-positive
//! off-diagonals, row sums equal to `1/dt + c_i`. That structure is what makes
//! the discrete maximum principle provable at the scheme level, so it is
//! validated rather than assumed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::mesh::{Field, Grid};

/// Default relative tolerance for implicit solves. Invariant tests assert
/// bounds to 1e-8; the linear-algebra error must stay subdominant.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Compressed-row sparse matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Per-face diffusivities, one vector per axis.
///
/// Layout matches [`crate::mesh::face_gradient`]: axis 0 faces indexed
/// `iy * (nx + 1) + ix_face`, axis 1 faces `iy_face * nx + ix`. Boundary-face
/// values are ignored by the assembly (zero-flux Neumann).
#[derive(Clone, Debug)]
pub struct FaceCoefficients {
    per_axis: [Vec<f64>; 2],
}

impl FaceCoefficients {
    pub fn new(grid: &Grid, per_axis: [Vec<f64>; 2]) -> Result<Self> {
        let (nx, ny) = (grid.cells(0), grid.cells(1));
        let want = [(nx + 1) * ny, if grid.dim() == 2 { nx * (ny + 1) } else { 0 }];
        for d in 0..grid.dim() {
            if per_axis[d].len() != want[d] {
                return Err(Error::ShapeMismatch("face coefficient layout"));
            }
            if per_axis[d].iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::CoefficientSign);
            }
        }
        Ok(FaceCoefficients { per_axis })
    }

    /// Arithmetic mean of the two adjacent cell values at interior faces;
    /// boundary faces set to 0.
    pub fn from_cell_diffusivity(d: &Field) -> Result<Self> {
        let grid = d.grid();
        let (nx, ny) = (grid.cells(0), grid.cells(1));
        let mut x = vec![0.0; (nx + 1) * ny];
        for iy in 0..ny {
            for ixf in 1..nx {
                x[iy * (nx + 1) + ixf] =
                    0.5 * (d.get(grid.index(ixf - 1, iy)) + d.get(grid.index(ixf, iy)));
            }
        }
        let y = if grid.dim() == 2 {
            let mut y = vec![0.0; nx * (ny + 1)];
            for iyf in 1..ny {
                for ix in 0..nx {
                    y[iyf * nx + ix] =
                        0.5 * (d.get(grid.index(ix, iyf - 1)) + d.get(grid.index(ix, iyf)));
                }
            }
            y
        } else {
            Vec::new()
        };
        Self::new(grid, [x, y])
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Self::from_cell_diffusivity(&Field::constant(*grid, value))
    }

    fn face(&self, axis: usize, idx: usize) -> f64 {
        self.per_axis[axis][idx]
    }
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for row in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            out[row] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Copy into a dense row-major matrix (used by oracle tests).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                out[row * self.n + self.col_idx[k]] = self.vals[k];
            }
        }
        out
    }

    /// Check symmetry (1e-14 relative), positive diagonal and index sanity.
    pub fn validate(&self) -> Result<()> {
        for row in 0..self.n {
            let mut prev: Option<usize> = None;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[k];
                if col >= self.n {
                    return Err(Error::Construction("column index out of range"));
                }
                if let Some(p) = prev {
                    if col <= p {
                        return Err(Error::Construction("unsorted columns"));
                    }
                }
                prev = Some(col);
                let a = self.vals[k];
                let b = self.get(col, row);
                let scale = math::max(math::abs(a), math::abs(b));
                if math::abs(a - b) > 1e-14 * math::max(scale, 1.0) {
                    return Err(Error::Construction("matrix not symmetric"));
                }
            }
            if !(self.get(row, row) > 0.0) {
                return Err(Error::Construction("non-positive diagonal"));
            }
        }
        Ok(())
    }
}

/// Backward-Euler system matrix `I/dt + stiffness(D) + diag(c)` for
/// `w_t = div(D grad w) - c w + f` with zero-flux boundaries.
pub fn assemble_implicit_step(
    grid: &Grid,
    diffusivity: &FaceCoefficients,
    reaction: &Field,
    dt: f64,
) -> Result<SparseMatrix> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter("dt must be positive"));
    }
    if reaction.values().iter().any(|&c| c < 0.0) {
        return Err(Error::CoefficientSign);
    }
    if !reaction.grid().same_layout(grid) {
        return Err(Error::ShapeMismatch("reaction grid"));
    }
    let n = grid.cell_count();
    let (nx, ny) = (grid.cells(0), grid.cells(1));
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n * 5);
    let mut vals = Vec::with_capacity(n * 5);
    row_ptr.push(0);

    // Face diffusivity divided by h^2, looked up per (cell, axis, side).
    let flux = |idx: usize, axis: usize, dir: i32| -> f64 {
        let (ix, iy) = grid.coords(idx);
        let h = grid.spacing(axis);
        let face = match (axis, dir) {
            (0, -1) => iy * (nx + 1) + ix,
            (0, 1) => iy * (nx + 1) + ix + 1,
            (1, -1) => iy * nx + ix,
            _ => (iy + 1) * nx + ix,
        };
        diffusivity.face(axis, face) / (h * h)
    };

    for idx in 0..n {
        let (ix, iy) = grid.coords(idx);
        let mut diag = 1.0 / dt + reaction.get(idx);
        // (column, value) pairs in ascending column order:
        // south, west, self, east, north.
        let mut entries: [(usize, f64); 5] = [(usize::MAX, 0.0); 5];
        let mut count = 0;
        let push = |e: &mut [(usize, f64); 5], c: usize, v: f64, count: &mut usize| {
            e[*count] = (c, v);
            *count += 1;
        };
        if grid.dim() == 2 && iy > 0 {
            let k = flux(idx, 1, -1);
            diag += k;
            push(&mut entries, grid.index(ix, iy - 1), -k, &mut count);
        }
        if ix > 0 {
            let k = flux(idx, 0, -1);
            diag += k;
            push(&mut entries, grid.index(ix - 1, iy), -k, &mut count);
        }
        let self_slot = count;
        push(&mut entries, idx, 0.0, &mut count);
        if ix + 1 < nx {
            let k = flux(idx, 0, 1);
            diag += k;
            push(&mut entries, grid.index(ix + 1, iy), -k, &mut count);
        }
        if grid.dim() == 2 && iy + 1 < ny {
            let k = flux(idx, 1, 1);
            diag += k;
            push(&mut entries, grid.index(ix, iy + 1), -k, &mut count);
        }
        entries[self_slot].1 = diag;
        for e in entries.iter().take(count) {
            col_idx.push(e.0);
            vals.push(e.1);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseMatrix { n, row_ptr, col_idx, vals })
}

/// Jacobi-preconditioned conjugate gradients with a deterministic inner loop.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], rel_tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    solve_spd_warm(a, b, None, rel_tol)
}

/// Same as [`solve_spd`] with an optional warm start (time stepping reuses
/// the previous slice).
pub fn solve_spd_warm(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::ShapeMismatch("rhs length"));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidParameter("rel_tol must lie in (0, 1)"));
    }
    let norm_b = math::sqrt(b.iter().map(|v| v * v).sum());
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| 1.0 / d).collect();
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(&r, &d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let max_iter = 10 * n;
    let mut res = math::sqrt(r.iter().map(|v| v * v).sum()) / norm_b;
    let mut iters = 0;
    while res > rel_tol && iters < max_iter {
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iters += 1;
        res = math::sqrt(r.iter().map(|v| v * v).sum()) / norm_b;
    }
    if res > rel_tol {
        return Err(Error::SolveFailure { iterations: iters, residual: res });
    }
    Ok((x, SolveStats { iterations: iters, relative_residual: res }))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mesh::TimeAxis;
    use proptest::prelude::*;

    /// Dense LU with partial pivoting; the independent oracle for solve_spd.
    pub fn dense_solve(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m = a.to_vec();
        let mut x = b.to_vec();
        for col in 0..n {
            let mut piv = col;
            for row in col + 1..n {
                if m[row * n + col].abs() > m[piv * n + col].abs() {
                    piv = row;
                }
            }
            if piv != col {
                for k in 0..n {
                    m.swap(col * n + k, piv * n + k);
                }
                x.swap(col, piv);
            }
            let d = m[col * n + col];
            for row in col + 1..n {
                let factor = m[row * n + col] / d;
                if factor != 0.0 {
                    for k in col..n {
                        m[row * n + k] -= factor * m[col * n + k];
                    }
                    x[row] -= factor * x[col];
                }
            }
        }
        for row in (0..n).rev() {
            let mut acc = x[row];
            for k in row + 1..n {
                acc -= m[row * n + k] * x[k];
            }
            x[row] = acc / m[row * n + row];
        }
        x
    }

    fn line_grid(cells: usize) -> Grid {
        Grid::line(0.0, cells as f64, cells).unwrap()
    }

    #[test]
    fn hand_assembled_tridiagonal() {
        // 1D, 3 cells, h = 1, D = 1, c = 0, dt = 1.
        let g = line_grid(3);
        let d = FaceCoefficients::constant(&g, 1.0).unwrap();
        let c = Field::constant(g, 0.0);
        let m = assemble_implicit_step(&g, &d, &c, 1.0).unwrap();
        let expect = [[2.0, -1.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), expect[i][j]);
            }
        }
        m.validate().unwrap();
    }

    #[test]
    fn zero_diffusivity_gives_scaled_identity() {
        let g = line_grid(5);
        let d = FaceCoefficients::constant(&g, 0.0).unwrap();
        let c = Field::constant(g, 0.0);
        let dt = 0.25;
        let m = assemble_implicit_step(&g, &d, &c, dt).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 / dt } else { 0.0 };
                assert_eq!(m.get(i, j), want);
            }
        }
    }

    #[test]
    fn negative_coefficients_rejected() {
        let g = line_grid(4);
        let c = Field::from_values(g, alloc::vec![0.0, -0.5, 0.0, 0.0]).unwrap();
        let d = FaceCoefficients::constant(&g, 1.0).unwrap();
        assert_eq!(assemble_implicit_step(&g, &d, &c, 1.0), Err(Error::CoefficientSign));
        let bad = FaceCoefficients::new(&g, [alloc::vec![0.0, -1.0, 1.0, 1.0, 0.0], Vec::new()]);
        assert_eq!(bad.err(), Some(Error::CoefficientSign));
    }

    #[test]
    fn tridiagonal_solve_matches_dense_oracle() {
        let g = line_grid(3);
        let d = FaceCoefficients::constant(&g, 1.0).unwrap();
        let c = Field::constant(g, 0.0);
        let m = assemble_implicit_step(&g, &d, &c, 1.0).unwrap();
        let b = [1.0, 1.0, 1.0];
        let oracle = dense_solve(&m.to_dense(), &b);
        let (x, stats) = solve_spd(&m, &b, 1e-12).unwrap();
        for i in 0..3 {
            assert!((x[i] - oracle[i]).abs() < 1e-10, "x={x:?} oracle={oracle:?}");
        }
        assert!(stats.relative_residual <= 1e-12);
    }

    #[test]
    fn identity_solve_is_immediate() {
        let g = line_grid(6);
        let d = FaceCoefficients::constant(&g, 0.0).unwrap();
        let c = Field::constant(g, 0.0);
        let m = assemble_implicit_step(&g, &d, &c, 1.0).unwrap();
        let b = [3.0, -1.0, 2.0, 0.5, 4.0, -2.0];
        let (x, stats) = solve_spd(&m, &b, 1e-12).unwrap();
        assert!(stats.iterations <= 1);
        for i in 0..6 {
            assert!((x[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = line_grid(4);
        let d = FaceCoefficients::constant(&g, 2.0).unwrap();
        let c = Field::constant(g, 1.0);
        let m = assemble_implicit_step(&g, &d, &c, 0.5).unwrap();
        let (x, stats) = solve_spd(&m, &[0.0; 4], 1e-10).unwrap();
        assert_eq!(x, alloc::vec![0.0; 4]);
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn solve_matches_dense_oracle_on_200_unknowns() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 20, 10).unwrap();
        let dcell = Field::from_values(g, (0..200).map(|_| rng.gen_range(0.1..2.0)).collect()).unwrap();
        let d = FaceCoefficients::from_cell_diffusivity(&dcell).unwrap();
        let c = Field::from_values(g, (0..200).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let m = assemble_implicit_step(&g, &d, &c, 0.01).unwrap();
        m.validate().unwrap();
        let b: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = dense_solve(&m.to_dense(), &b);
        let (x, _) = solve_spd(&m, &b, 1e-12).unwrap();
        for i in 0..200 {
            assert!((x[i] - oracle[i]).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn m_matrix_structure(
            seed in 0u64..1000,
            nx in 3usize..8,
            ny in 2usize..6,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::rect((0.0, 1.0), (0.0, 2.0), nx, ny).unwrap();
            let n = g.cell_count();
            let dcell = Field::from_values(g, (0..n).map(|_| rng.gen_range(0.0..3.0)).collect()).unwrap();
            let d = FaceCoefficients::from_cell_diffusivity(&dcell).unwrap();
            let c = Field::from_values(g, (0..n).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
            let dt = rng.gen_range(0.01..1.0);
            let time = TimeAxis::span(0.0, dt, 1).unwrap();
            let m = assemble_implicit_step(&g, &d, &c, time.dt()).unwrap();
            m.validate().unwrap();
            for i in 0..n {
                let mut row_sum = 0.0;
                for j in 0..n {
                    let v = m.get(i, j);
                    if i != j {
                        prop_assert!(v <= 0.0);
                    }
                    row_sum += v;
                }
                // Row sums equal 1/dt + c_i with zero-flux boundaries.
                prop_assert!((row_sum - (1.0 / time.dt() + c.get(i))).abs() < 1e-9 * (1.0 / time.dt()));
            }
        }

        #[test]
        fn nonnegative_rhs_gives_nonnegative_solution(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::line(0.0, 1.0, 12).unwrap();
            let dcell = Field::from_values(g, (0..12).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap();
            let d = FaceCoefficients::from_cell_diffusivity(&dcell).unwrap();
            let c = Field::from_values(g, (0..12).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
            let m = assemble_implicit_step(&g, &d, &c, 0.1).unwrap();
            let b: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (x, _) = solve_spd(&m, &b, 1e-12).unwrap();
            // Discrete positivity: M-matrix inverses are nonnegative.
            prop_assert!(x.iter().all(|&v| v >= -1e-12));
        }
    }
}
