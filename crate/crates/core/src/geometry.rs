//! Boundary-flattening machinery: Lipschitz graph boundaries, the shear maps
//! that flatten them, pushed-forward diffusion coefficients and their
//! distortion and ellipticity bounds.
//!
//! The graph is piecewise linear between cell-center samples, so all
//! Jacobians are exact where defined and `det = 1` holds identically (the
//! maps are unit-diagonal triangular shears). This module provides the
//! coordinate algebra and its checks only; the solvers never integrate on
//! flattened domains.

use crate::error::{Error, Result};
use crate::math;
use crate::mesh::{Field, SymTensor, TensorField};

/// Boundary graph `x2 = gamma(x1)` sampled on a 1D grid (the boundary of a
/// 2D domain), with its measured Lipschitz constant.
#[derive(Clone, Debug)]
pub struct LipschitzGraph {
    samples: Field,
    lipschitz: f64,
}

impl LipschitzGraph {
    /// Build from samples and validate against the declared constant.
    pub fn new(samples: Field, declared_lipschitz: f64) -> Result<Self> {
        if samples.grid().dim() != 1 {
            return Err(Error::Construction("graph samples must live on a 1D grid"));
        }
        let measured = Self::measure(&samples);
        if measured > declared_lipschitz + 1e-14 {
            return Err(Error::InvalidParameter("measured slope exceeds declared bound"));
        }
        Ok(LipschitzGraph { samples, lipschitz: measured })
    }

    /// Max slope between adjacent samples.
    fn measure(samples: &Field) -> f64 {
        let h = samples.grid().spacing(0);
        let mut lip = 0.0_f64;
        for i in 1..samples.len() {
            lip = math::max(lip, math::abs(samples.get(i) - samples.get(i - 1)) / h);
        }
        lip
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Graph height by linear interpolation between cell-center samples.
    pub fn height(&self, x1: f64) -> Result<f64> {
        let grid = self.samples.grid();
        let h = grid.spacing(0);
        let first = grid.center(0)[0];
        let last = grid.center(self.samples.len() - 1)[0];
        if x1 < first - 1e-14 || x1 > last + 1e-14 {
            return Err(Error::OutsideGraph);
        }
        let pos = math::min(math::max((x1 - first) / h, 0.0), (self.samples.len() - 1) as f64);
        let i = math::min(math::floor(pos), (self.samples.len() - 2) as f64) as usize;
        let frac = pos - i as f64;
        Ok(self.samples.get(i) * (1.0 - frac) + self.samples.get(i + 1) * frac)
    }

    /// Slope of the interpolant at `x1` (left segment at exact sample
    /// points).
    pub fn slope(&self, x1: f64) -> Result<f64> {
        let grid = self.samples.grid();
        let h = grid.spacing(0);
        let first = grid.center(0)[0];
        let last = grid.center(self.samples.len() - 1)[0];
        if x1 < first - 1e-14 || x1 > last + 1e-14 {
            return Err(Error::OutsideGraph);
        }
        let pos = math::min(math::max((x1 - first) / h, 0.0), (self.samples.len() - 1) as f64);
        let i = math::min(math::floor(pos), (self.samples.len() - 2) as f64) as usize;
        Ok((self.samples.get(i + 1) - self.samples.get(i)) / h)
    }
}

/// Shear that flattens the graph: `(x1, x2) -> (x1, x2 - gamma(x1))`.
pub fn flatten(graph: &LipschitzGraph, point: [f64; 2]) -> Result<[f64; 2]> {
    Ok([point[0], point[1] - graph.height(point[0])?])
}

/// Inverse shear: `(y1, y2) -> (y1, y2 + gamma(y1))`.
pub fn unflatten(graph: &LipschitzGraph, point: [f64; 2]) -> Result<[f64; 2]> {
    Ok([point[0], point[1] + graph.height(point[0])?])
}

/// Jacobian of the flattening at first coordinate `x1`:
/// `[[1, 0], [-gamma', 1]]`, determinant 1 exactly.
pub fn flatten_jacobian(graph: &LipschitzGraph, x1: f64) -> Result<[[f64; 2]; 2]> {
    let slope = graph.slope(x1)?;
    Ok([[1.0, 0.0], [-slope, 1.0]])
}

/// Jacobian of the inverse, `[[1, 0], [gamma', 1]]`.
pub fn unflatten_jacobian(graph: &LipschitzGraph, x1: f64) -> Result<[[f64; 2]; 2]> {
    let slope = graph.slope(x1)?;
    Ok([[1.0, 0.0], [slope, 1.0]])
}

/// Squared operator-norm bound `n + Lip(gamma)^2` of the flattening
/// distortion.
pub fn distortion_bound_sq(graph: &LipschitzGraph, dim: usize) -> f64 {
    dim as f64 + graph.lipschitz * graph.lipschitz
}

/// Push a coefficient through the shear: per cell
/// `Ahat = J A J^T` with `J` the flattening Jacobian at the cell's first
/// coordinate. Every eigenvalue of the result lands in
/// `[1/((n+1) Lambda), (n+1) Lambda]`; slopes above 1 are rejected.
pub fn pushforward_coefficient(a: &TensorField, graph: &LipschitzGraph) -> Result<TensorField> {
    if graph.lipschitz > 1.0 {
        return Err(Error::LipschitzTooLarge);
    }
    let grid = *a.grid();
    if grid.dim() != 2 {
        return Err(Error::Construction("pushforward needs a 2D coefficient"));
    }
    if a.is_time_dependent() {
        return Err(Error::Construction("pushforward expects a static coefficient"));
    }
    let widened = (grid.dim() as f64 + 1.0) * a.ellipticity();
    TensorField::from_fn(grid, widened, |x| {
        let slope = graph.slope(x[0]).unwrap_or(0.0);
        let t = a
            .at(cell_at(&grid, x), 0)
            .conjugate_by_shear(-slope);
        t
    })
}

fn cell_at(grid: &crate::mesh::Grid, x: [f64; 2]) -> usize {
    let ix = math::round((x[0] - grid.extent(0).0) / grid.spacing(0) - 0.5) as usize;
    let iy = math::round((x[1] - grid.extent(1).0) / grid.spacing(1) - 0.5) as usize;
    grid.index(ix.min(grid.cells(0) - 1), iy.min(grid.cells(1) - 1))
}

impl SymTensor {
    /// `J self J^T` for the shear `J = [[1, 0], [s, 1]]`.
    pub fn conjugate_by_shear(&self, s: f64) -> SymTensor {
        // Row 2 of J picks up s times row 1.
        let xx = self.xx;
        let xy = s * self.xx + self.xy;
        let yy = s * s * self.xx + 2.0 * s * self.xy + self.yy;
        SymTensor { xx, yy, xy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid;

    fn graph_from_fn(f: impl Fn(f64) -> f64, lip: f64) -> LipschitzGraph {
        let g = Grid::line(-2.0, 2.0, 64).unwrap();
        let samples = Field::from_fn(g, |x| f(x[0])).unwrap();
        LipschitzGraph::new(samples, lip).unwrap()
    }

    #[test]
    fn flat_graph_gives_identity() {
        let graph = graph_from_fn(|_| 0.0, 0.0);
        let p = [0.3, 0.7];
        assert_eq!(flatten(&graph, p).unwrap(), p);
        let j = flatten_jacobian(&graph, 0.3).unwrap();
        assert_eq!(j, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn linear_graph_formula() {
        let graph = graph_from_fn(|x| 0.3 * x, 0.3);
        let y = flatten(&graph, [1.0, 1.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14);
        assert!((y[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn round_trip_is_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let graph = graph_from_fn(|x| 0.4 * (1.3 * x).sin(), 0.6);
        for _ in 0..50 {
            let p = [rng.gen_range(-1.9..1.9), rng.gen_range(-2.0..2.0)];
            let q = unflatten(&graph, flatten(&graph, p).unwrap()).unwrap();
            assert!((q[0] - p[0]).abs() <= 1e-12 && (q[1] - p[1]).abs() <= 1e-12);
        }
        assert!(flatten(&graph, [5.0, 0.0]).is_err());
    }

    #[test]
    fn measured_lipschitz_enforced() {
        let g = Grid::line(0.0, 1.0, 8).unwrap();
        let steep = Field::from_fn(g, |x| 2.0 * x[0]).unwrap();
        assert!(LipschitzGraph::new(steep.clone(), 1.0).is_err());
        assert!(LipschitzGraph::new(steep, 2.0).is_ok());
    }

    #[test]
    fn shear_conjugation_closed_form() {
        // A = I, gamma = delta x: Ahat = [[1, -delta], [-delta, 1 + delta^2]].
        let delta = 0.25;
        let t = SymTensor::identity().conjugate_by_shear(-delta);
        assert_eq!(t.xx, 1.0);
        assert_eq!(t.xy, -delta);
        assert!((t.yy - (1.0 + delta * delta)).abs() < 1e-15);

        // delta = 1: eigenvalues (3 +- sqrt(5))/2, inside [1/3, 3].
        let t = SymTensor::identity().conjugate_by_shear(-1.0);
        let (lo, hi) = t.eigen_bounds(2);
        assert!((lo - (3.0 - 5.0_f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((hi - (3.0 + 5.0_f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!(lo >= 1.0 / 3.0 && hi <= 3.0);
    }

    #[test]
    fn pushforward_respects_widened_ellipticity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let grid = Grid::rect((-2.0, 2.0), (-2.0, 2.0), 12, 12).unwrap();
        for trial in 0..20 {
            let lam = rng.gen_range(1.0..2.5);
            let amp: f64 = rng.gen_range(0.0..1.0);
            let freq: f64 = rng.gen_range(0.5..2.0);
            let lip = (amp * freq).min(1.0);
            let gg = Grid::line(-2.0, 2.0, 48).unwrap();
            let samples = Field::from_fn(gg, |x| amp * (freq * x[0]).sin() / freq.max(1.0)).unwrap();
            let graph = LipschitzGraph::new(samples, lip + 1e-9).unwrap();
            // Random diagonal-dominant symmetric tensor within [1/lam, lam].
            let spread: f64 = rng.gen_range(0.0..0.4);
            let a = TensorField::from_fn(grid, lam, |x| {
                let mid = 0.5 * (lam + 1.0 / lam);
                let half = spread * 0.5 * (lam - 1.0 / lam);
                SymTensor {
                    xx: mid + half * (x[0]).sin(),
                    yy: mid - half * (x[1]).cos(),
                    xy: 0.3 * half,
                }
            })
            .unwrap();
            let pushed = pushforward_coefficient(&a, &graph).unwrap();
            let bound = 3.0 * lam;
            for i in 0..grid.cell_count() {
                let (lo, hi) = pushed.at(i, 0).eigen_bounds(2);
                assert!(lo >= 1.0 / bound - 1e-12 && hi <= bound + 1e-12, "trial {trial}");
            }
            // Unimodular congruence preserves the determinant.
            for i in [0, grid.cell_count() / 2] {
                let orig = a.at(i, 0);
                let new = pushed.at(i, 0);
                let det0 = orig.xx * orig.yy - orig.xy * orig.xy;
                let det1 = new.xx * new.yy - new.xy * new.xy;
                assert!((det0 - det1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn steep_graph_rejected_for_pushforward() {
        let grid = Grid::rect((-2.0, 2.0), (-2.0, 2.0), 4, 4).unwrap();
        let graph = graph_from_fn(|x| 1.5 * x, 1.5);
        let a = TensorField::identity(grid);
        assert_eq!(pushforward_coefficient(&a, &graph), Err(Error::LipschitzTooLarge));
    }
}
