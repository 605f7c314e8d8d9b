//! Regularity-theory diagnostics: Lebesgue norms, parabolic maximal
//! functions, BMO seminorms of coefficients, level-set distribution sums,
//! truncation-energy traces, bootstrap exponent ladders, the two-parameter
//! scaling transform and the global gradient-estimate ratio.
//!
//! The maximal operator takes a supremum over a finite, grid-aligned radius
//! set, so the continuum supremum is approximated from below and every
//! asserted inequality survives the approximation. Averages over cubes are
//! discrete: the integrand is summed over the cells and slices the cube
//! actually contains and divided by that sample count, which keeps all
//! quantities exactly reproducible by brute-force oracles.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fixedpoint::ModelParams;
use crate::math;
use crate::mesh::{
    cell_gradient, face_gradient, face_position, CubeVariant, Field, Grid, ParabolicCube, Region,
    SpaceTimeField, SymTensor, TensorField, TimeAxis,
};

/// Radius set and cube variant for the maximal operator.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximalConfig {
    radii: Vec<f64>,
    pub variant: CubeVariant,
}

impl MaximalConfig {
    pub fn new(radii: Vec<f64>, variant: CubeVariant) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidParameter("empty radius set"));
        }
        if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidParameter("radii must be positive"));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("radii must be strictly ascending"));
        }
        Ok(MaximalConfig { radii, variant })
    }

    /// Default set: a sub-cell radius (so that the smallest cube holds only
    /// the host sample and the pointwise bound `|f| <= Mf` is exact),
    /// followed by dyadic multiples of the spacing up to the domain diameter.
    pub fn dyadic(grid: &Grid, time: &TimeAxis) -> Self {
        let h = grid.min_spacing();
        let mut radii = vec![0.5 * math::min(h, math::sqrt(time.dt()))];
        let mut r = h;
        while r <= grid.diameter() {
            radii.push(r);
            r *= 2.0;
        }
        MaximalConfig { radii, variant: CubeVariant::Centered }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// `L^p` norm of a spatial field over a region by midpoint quadrature.
pub fn lp_norm_field(f: &Field, p: f64, region: Region) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter("p must be finite and >= 1"));
    }
    let grid = f.grid();
    let vol = grid.cell_volume();
    let cells: Vec<usize> = match region {
        Region::Whole => (0..grid.cell_count()).collect(),
        Region::Cube(c) => c.cells_in(grid),
    };
    if cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut acc = 0.0;
    for &i in &cells {
        acc += math::powf(math::abs(f.get(i)), p) * vol;
    }
    Ok(math::powf(acc, 1.0 / p))
}

/// `L^p` norm of a space-time field over a region.
pub fn lp_norm(u: &SpaceTimeField, p: f64, region: Region) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter("p must be finite and >= 1"));
    }
    let grid = u.grid();
    let time = u.time();
    let vol = grid.cell_volume() * time.dt();
    let (cells, slices) = region_samples(&region, grid, time);
    if cells.is_empty() || slices.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut acc = 0.0;
    for &m in &slices {
        let vals = u.slice(m).values();
        for &i in &cells {
            acc += math::powf(math::abs(vals[i]), p) * vol;
        }
    }
    Ok(math::powf(acc, 1.0 / p))
}

fn region_samples(region: &Region, grid: &Grid, time: &TimeAxis) -> (Vec<usize>, Vec<usize>) {
    match region {
        Region::Whole => ((0..grid.cell_count()).collect(), (1..time.slice_count()).collect()),
        Region::Cube(c) => (c.cells_in(grid), c.slices_in(time)),
    }
}

/// Parabolic maximal function `M_U f`: at every grid point the maximum over
/// the radius set of the average of `|f| chi_U` over the cube clipped to the
/// grid.
///
/// Summation runs slices-outer, row-major-inner with a single accumulator so
/// a brute-force oracle that does the same reproduces it bit for bit.
pub fn parabolic_maximal(f: &SpaceTimeField, mask: Region, cfg: &MaximalConfig) -> Result<SpaceTimeField> {
    let grid = *f.grid();
    let time = *f.time();
    let n_cells = grid.cell_count();
    let n_slices = time.slice_count();

    // |f| restricted to the mask region.
    let mut masked: Vec<Vec<f64>> = Vec::with_capacity(n_slices);
    for m in 0..n_slices {
        let mut vals: Vec<f64> = f.slice(m).values().iter().map(|&v| math::abs(v)).collect();
        if let Region::Cube(c) = &mask {
            let inside_t = c.contains_time(time.time(m));
            for (i, v) in vals.iter_mut().enumerate() {
                if !inside_t || !c.contains_point(grid.dim(), grid.center(i)) {
                    *v = 0.0;
                }
            }
        }
        masked.push(vals);
    }

    // Spatial offsets per radius (uniform grid: the ball pattern only shifts)
    // and the slice-offset window per radius.
    let (nx, ny) = (grid.cells(0), grid.cells(1));
    let mut spatial_offsets: Vec<Vec<(i64, i64)>> = Vec::new();
    let mut time_offsets: Vec<Vec<i64>> = Vec::new();
    for &rho in &cfg.radii {
        let mut offs = Vec::new();
        let reach_x = (math::floor(rho / grid.spacing(0)) as i64) + 1;
        let reach_y = if grid.dim() == 2 { (math::floor(rho / grid.spacing(1)) as i64) + 1 } else { 0 };
        for dy in -reach_y..=reach_y {
            for dx in -reach_x..=reach_x {
                let mut d2 = (dx as f64 * grid.spacing(0)) * (dx as f64 * grid.spacing(0));
                if grid.dim() == 2 {
                    d2 += (dy as f64 * grid.spacing(1)) * (dy as f64 * grid.spacing(1));
                }
                if d2 <= rho * rho {
                    offs.push((dx, dy));
                }
            }
        }
        spatial_offsets.push(offs);
        let r2 = rho * rho;
        let dt = time.dt();
        let reach = (math::ceil(r2 / dt) as i64) + 1;
        let mut toffs = Vec::new();
        for dm in -reach..=reach {
            let t_rel = dm as f64 * dt;
            let ok = match cfg.variant {
                CubeVariant::Centered => t_rel > -r2 && t_rel <= r2,
                CubeVariant::Backward => t_rel > -r2 && t_rel <= 0.0,
            };
            if ok {
                toffs.push(dm);
            }
        }
        time_offsets.push(toffs);
    }

    let mut out_slices = Vec::with_capacity(n_slices);
    for m in 0..n_slices {
        let mut out = vec![0.0; n_cells];
        for i in 0..n_cells {
            let (ix, iy) = grid.coords(i);
            let mut best = 0.0_f64;
            for (ri, offs) in spatial_offsets.iter().enumerate() {
                let mut sum = 0.0;
                let mut count = 0usize;
                for &dm in &time_offsets[ri] {
                    let mm = m as i64 + dm;
                    if mm < 0 || mm >= n_slices as i64 {
                        continue;
                    }
                    let slice_vals = &masked[mm as usize];
                    for &(dx, dy) in offs {
                        let cx = ix as i64 + dx;
                        let cy = iy as i64 + dy;
                        if cx < 0 || cx >= nx as i64 || cy < 0 || cy >= ny as i64 {
                            continue;
                        }
                        sum += slice_vals[grid.index(cx as usize, cy as usize)];
                        count += 1;
                    }
                }
                if count > 0 {
                    best = math::max(best, sum / count as f64);
                }
            }
            out[i] = best;
        }
        out_slices.push(Field::from_values(grid, out)?);
    }
    SpaceTimeField::from_slices(time, out_slices)
}

/// BMO seminorm of a coefficient: the supremum over backward cubes (radii
/// dyadic in the spacing, capped at `r_max`) and grid points of the cube
/// average of the squared Frobenius deviation from the per-slice spatial
/// mean over the cube's ball.
pub fn bmo_seminorm(a: &TensorField, time: &TimeAxis, r_max: f64) -> Result<f64> {
    let grid = *a.grid();
    let h = grid.min_spacing();
    if !(r_max >= h) {
        return Err(Error::InvalidParameter("radius cap below grid spacing"));
    }
    let mut radii = Vec::new();
    let mut r = h;
    while r <= r_max {
        radii.push(r);
        r *= 2.0;
    }
    if *radii.last().unwrap() < r_max {
        radii.push(r_max);
    }
    let n_slices = if a.is_time_dependent() { a.slice_count() } else { time.slice_count() };
    let mut sup = 0.0_f64;
    for center_slice in 0..n_slices {
        let s = time.time(center_slice);
        for center_cell in 0..grid.cell_count() {
            let y = grid.center(center_cell);
            for &rho in &radii {
                let cube = ParabolicCube::backward(y, s, rho)?;
                let cells = cube.cells_in(&grid);
                if cells.is_empty() {
                    continue;
                }
                let slices: Vec<usize> =
                    (0..n_slices).filter(|&m| cube.contains_time(time.time(m))).collect();
                if slices.is_empty() {
                    continue;
                }
                let mut dev_sum = 0.0;
                for &m in &slices {
                    let mut mean = SymTensor { xx: 0.0, yy: 0.0, xy: 0.0 };
                    for &c in &cells {
                        mean = mean.add(&a.at(c, m));
                    }
                    mean = mean.scale(1.0 / cells.len() as f64);
                    for &c in &cells {
                        dev_sum += a.at(c, m).sub(&mean).frobenius_sq(grid.dim());
                    }
                }
                sup = math::max(sup, dev_sum / (cells.len() * slices.len()) as f64);
            }
        }
    }
    Ok(sup)
}

/// Level-set distribution sum and the integral that bounds it:
/// `sum_j (N^q - 1) delta^q N^{q(j-1)} |{M(f^2) > delta N^j}|` against
/// `int M(f^2)^q`. The inequality is layer-cake algebra, so it holds for
/// every field; both sides are returned so tests can assert it.
pub fn level_set_sum(
    f: &SpaceTimeField,
    delta: f64,
    n_factor: f64,
    q: f64,
    j_max: usize,
) -> Result<(f64, f64)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive"));
    }
    if !(n_factor > 1.0) || !(q > 1.0) {
        return Err(Error::InvalidParameter("need N > 1 and q > 1"));
    }
    let grid = f.grid();
    let time = f.time();
    let squared = SpaceTimeField::from_slices(
        *time,
        f.slices().iter().map(|s| s.map(|v| v * v)).collect::<Result<Vec<_>>>()?,
    )?;
    let cfg = MaximalConfig::dyadic(grid, time);
    let maximal = parabolic_maximal(&squared, Region::Whole, &cfg)?;
    let w = grid.cell_volume() * time.dt();
    let mut sum = 0.0;
    for j in 0..=j_max {
        let level = delta * math::powf(n_factor, j as f64);
        let mut measure = 0.0;
        for s in maximal.slices() {
            for &v in s.values() {
                if v > level {
                    measure += w;
                }
            }
        }
        let weight = (math::powf(n_factor, q) - 1.0)
            * math::powf(delta, q)
            * math::powf(n_factor, q * (j as f64 - 1.0));
        sum += weight * measure;
    }
    let mut bound = 0.0;
    for s in maximal.slices() {
        for &v in s.values() {
            bound += math::powf(v, q) * w;
        }
    }
    Ok((sum, bound))
}

/// Truncation-energy trace over shrinking nested cubes.
#[derive(Clone, Debug)]
pub struct DeGiorgiTrace {
    /// Target level `K`; the levels climb to it as `K (1 - 2^{-j})`.
    pub k_cap: f64,
    pub levels: Vec<f64>,
    /// Cube radii, the reference sequence `3 + 2^{-j-2}` rescaled by a
    /// factor `radius/4`.
    pub radii: Vec<f64>,
    /// `Y_j = || (w - k_j)^+ ||_{L^2}` over the j-th cube.
    pub energies: Vec<f64>,
    /// Parabolic Sobolev exponent `2(n+2)/n`.
    pub r_exponent: f64,
    /// Iteration gain `2 (1 - 2/r)`.
    pub mu: f64,
    /// Cutoff-slope constant, fixed at 1 for the piecewise-linear cutoffs.
    pub c1: f64,
    /// Energy constant `sqrt(8 Lambda C1^2 (1 + (1 + M0 + M1^2) Lambda^3 + theta^2))`.
    pub c2: f64,
}

/// Geometric factor of the truncation-energy recursion `Y_{j+1} <= A B^j Y_j^{1+mu}`.
pub const DEGIORGI_B: f64 = 16.0;

/// Measure the truncation energies of `w` on nested cubes shrinking inside
/// `cube`, against levels climbing to `k_cap`.
pub fn degiorgi_trace(
    w: &SpaceTimeField,
    cube: &ParabolicCube,
    k_cap: f64,
    lambda: f64,
    m0: f64,
    m1: f64,
    theta: f64,
    j_max: usize,
) -> Result<DeGiorgiTrace> {
    if !(k_cap > 0.0) {
        return Err(Error::InvalidParameter("level cap must be positive"));
    }
    let grid = w.grid();
    let time = w.time();
    let n = grid.dim();
    let r_exponent = 2.0 * (n as f64 + 2.0) / n as f64;
    let mu = 2.0 * (1.0 - 2.0 / r_exponent);
    let c1 = 1.0;
    let c2 = degiorgi_c2(lambda, m0, m1, theta);
    let scale = cube.radius / 4.0;
    let mut levels = Vec::with_capacity(j_max + 1);
    let mut radii = Vec::with_capacity(j_max + 1);
    let mut energies = Vec::with_capacity(j_max + 1);
    let vol_dt = grid.cell_volume() * time.dt();
    for j in 0..=j_max {
        let k_j = k_cap * (1.0 - math::powf(2.0, -(j as f64)));
        let r_j = (3.0 + math::powf(2.0, -(j as f64) - 2.0)) * scale;
        let sub = cube.with_radius(r_j)?;
        let cells = sub.cells_in(grid);
        let slices = sub.slices_in(time);
        if cells.is_empty() || slices.is_empty() {
            // Radii only shrink, so feasibility is monotone in j.
            return Err(Error::TooCoarse { max_feasible: j.saturating_sub(1) });
        }
        let mut acc = 0.0;
        for &m in &slices {
            let vals = w.slice(m).values();
            for &i in &cells {
                let excess = vals[i] - k_j;
                if excess > 0.0 {
                    acc += excess * excess * vol_dt;
                }
            }
        }
        levels.push(k_j);
        radii.push(r_j);
        energies.push(math::sqrt(acc));
    }
    Ok(DeGiorgiTrace { k_cap, levels, radii, energies, r_exponent, mu, c1, c2 })
}

/// The energy constant of the truncation estimate with unit cutoff slope:
/// `C2 = sqrt(8 Lambda (1 + (1 + M0 + M1^2) Lambda^3 + theta^2))`.
pub fn degiorgi_c2(lambda: f64, m0: f64, m1: f64, theta: f64) -> f64 {
    math::sqrt(8.0 * lambda * (1.0 + (1.0 + m0 + m1 * m1) * lambda * lambda * lambda + theta * theta))
}

/// The explicit level `K = ||w||_{L^2(Q)} 16^{1/mu^2} (32 C0 C2)^{1/mu}`
/// above which the truncation energies are guaranteed to die out.
pub fn degiorgi_k_formula(l2_norm: f64, mu: f64, c0: f64, c2: f64) -> f64 {
    l2_norm * math::powf(16.0, 1.0 / (mu * mu)) * math::powf(32.0 * c0 * c2, 1.0 / mu)
}

/// Smallness threshold `A^{-1/mu} B^{-1/mu^2}` of the fast-geometric
/// recursion `Y_{j+1} <= A B^j Y_j^{1+mu}`.
pub fn degiorgi_threshold(a: f64, mu: f64) -> f64 {
    math::powf(a, -1.0 / mu) * math::powf(DEGIORGI_B, -1.0 / (mu * mu))
}

/// Largest constant `A` consistent with the measured energies, i.e.
/// `max_j Y_{j+1} / (B^j Y_j^{1+mu})` over levels with `Y_j` above `floor`.
pub fn fit_recursion_constant(energies: &[f64], mu: f64, floor: f64) -> Option<f64> {
    let mut a: Option<f64> = None;
    for j in 0..energies.len().saturating_sub(1) {
        if energies[j] > floor {
            let denom = math::powf(DEGIORGI_B, j as f64) * math::powf(energies[j], 1.0 + mu);
            let cand = energies[j + 1] / denom;
            a = Some(match a {
                Some(prev) => math::max(prev, cand),
                None => cand,
            });
        }
    }
    a
}

/// Exponent ladder lifting integrability through alternating estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapLadder {
    pub n: usize,
    pub l1: f64,
    pub p0: f64,
    /// Terms `l_1, l_2, ...` while the recurrence is defined.
    pub terms: Vec<f64>,
    /// One-based index of the first term reaching `min(p0, n + 2)`.
    pub terminal: Option<usize>,
    /// Set when `(n + 2 - l_i)_+ = 0`: the next exponent range is unbounded.
    pub unbounded: bool,
}

/// Run the recurrence `l_{i+1} = l_i (n+1) / (n+2-l_i)` from `l_1` until it
/// reaches `min(p0, n+2)` or the positive-part denominator vanishes.
pub fn bootstrap_ladder(n: usize, l1: f64, p0: f64) -> Result<BootstrapLadder> {
    if n < 2 {
        return Err(Error::InvalidParameter("dimension must be at least 2"));
    }
    if !(l1 > 2.0) || !(p0 > n as f64) {
        return Err(Error::InvalidParameter("need l1 > 2 and p0 > n"));
    }
    let target = math::min(p0, n as f64 + 2.0);
    let mut terms = vec![l1];
    let mut terminal = None;
    let mut unbounded = false;
    for i in 1.. {
        let l = *terms.last().unwrap();
        if l >= target {
            terminal = Some(i);
        }
        if n as f64 + 2.0 - l <= 0.0 {
            unbounded = true;
        }
        if terminal.is_some() || unbounded || i > 200 {
            break;
        }
        terms.push(l * (n as f64 + 1.0) / (n as f64 + 2.0 - l));
    }
    Ok(BootstrapLadder { n, l1, p0, terms, terminal, unbounded })
}

/// Gain exponent `mu(q, n) = 2(q-1)/(qbar (q+1)) (2/n + 1)` with
/// `qbar = 2 + 4q/(n(q+1))`; strictly below 1 for every admissible pair.
pub fn mu_exponent(q: f64, n: usize) -> Result<f64> {
    if !(q > 1.0) || n == 0 {
        return Err(Error::InvalidParameter("need q > 1 and n >= 1"));
    }
    let nf = n as f64;
    let qbar = 2.0 + 4.0 * q / (nf * (q + 1.0));
    Ok(2.0 * (q - 1.0) / (qbar * (q + 1.0)) * (2.0 / nf + 1.0))
}

/// Two-parameter scaling `u'(x,t) = u(s x, s^2 t)/s` with
/// `lambda' = lambda s`, `theta' = theta s`. Realized as an exact cell-index
/// relabeling onto the grid with extents divided by `s`, so `s` is restricted
/// to integer refinement or coarsening factors.
pub fn scale_transform(
    u: &SpaceTimeField,
    params: &ModelParams,
    s: f64,
) -> Result<(SpaceTimeField, ModelParams)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter("scale factor must be positive"));
    }
    let integral = math::abs(s - math::round(s)) < 1e-12 && math::round(s) >= 1.0;
    let reciprocal = math::abs(1.0 / s - math::round(1.0 / s)) < 1e-12 && math::round(1.0 / s) >= 1.0;
    if !integral && !reciprocal {
        return Err(Error::InvalidParameter("scale factor must be k or 1/k"));
    }
    let grid = u.grid();
    let time = u.time();
    let new_grid = match grid.dim() {
        1 => {
            let (lo, hi) = grid.extent(0);
            Grid::line(lo / s, hi / s, grid.cells(0))?
        }
        _ => {
            let (lx, hx) = grid.extent(0);
            let (ly, hy) = grid.extent(1);
            Grid::rect((lx / s, hx / s), (ly / s, hy / s), grid.cells(0), grid.cells(1))?
        }
    };
    let new_time = TimeAxis::span(time.t0() / (s * s), time.t_end() / (s * s), time.steps())?;
    let slices = u
        .slices()
        .iter()
        .map(|f| Field::from_values(new_grid, f.values().iter().map(|&v| v / s).collect()))
        .collect::<Result<Vec<_>>>()?;
    let scaled = SpaceTimeField::from_slices(new_time, slices)?;
    let new_params = ModelParams::new(
        params.alpha(),
        params.lambda() * s,
        params.theta() * s,
        params.ellipticity(),
    )?;
    Ok((scaled, new_params))
}

/// Ratio of the tail gradient integral to the scale-invariant data term:
/// `int_{[tbar, T]} |grad u|^p  /  [ (theta/lambda v ||u||_{L^2})^p + int |c|^p ]`.
pub fn estimate_ratio(
    u: &SpaceTimeField,
    params: &ModelParams,
    c: &SpaceTimeField,
    p: f64,
    t_bar: f64,
) -> Result<f64> {
    if !(p > 2.0) {
        return Err(Error::InvalidParameter("exponent must exceed 2"));
    }
    let time = u.time();
    if !(t_bar > time.t0() && t_bar < time.t_end()) {
        return Err(Error::InvalidParameter("tail start outside (t0, T)"));
    }
    if !u.same_shape(c) {
        return Err(Error::ShapeMismatch("estimate ratio fields"));
    }
    let grid = u.grid();
    let w = grid.cell_volume() * time.dt();
    let mut numerator = 0.0;
    for m in 1..time.slice_count() {
        if time.time(m) < t_bar {
            continue;
        }
        let grads = cell_gradient(u.slice(m));
        for g in &grads {
            let mut g2 = 0.0;
            for d in 0..grid.dim() {
                g2 += g[d] * g[d];
            }
            numerator += math::powf(math::sqrt(g2), p) * w;
        }
    }
    let u_l2 = lp_norm(u, 2.0, Region::Whole)?;
    let data = math::max(params.theta() / params.lambda(), u_l2);
    let c_term = math::powf(lp_norm(c, p, Region::Whole)?, p);
    Ok(numerator / (math::powf(data, p) + c_term))
}

/// Ratio of the peak squared face gradient on the inner cube to the mean
/// squared face gradient on the outer cube. Both-zero degenerates to 0 by
/// convention; a zero denominator alone is an error.
pub fn w1infty_ratio(v: &SpaceTimeField, inner: &ParabolicCube, outer: &ParabolicCube) -> Result<f64> {
    let grid = v.grid();
    if !outer.contains_cube(inner, grid.dim()) {
        return Err(Error::InvalidParameter("inner cube not contained in outer"));
    }
    let collect = |cube: &ParabolicCube| -> (f64, f64, usize) {
        let mut peak = 0.0_f64;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for &m in &cube.slices_in(v.time()) {
            for axis in 0..grid.dim() {
                let g = face_gradient(v.slice(m), axis);
                for (face, &gv) in g.iter().enumerate() {
                    if cube.contains_point(grid.dim(), face_position(grid, axis, face)) {
                        peak = math::max(peak, gv * gv);
                        sum_sq += gv * gv;
                        count += 1;
                    }
                }
            }
        }
        (peak, sum_sq, count)
    };
    let (peak_inner, _, _) = collect(inner);
    let (_, outer_sum, outer_count) = collect(outer);
    if outer_count == 0 {
        return Err(Error::EmptyRegion);
    }
    let mean = outer_sum / outer_count as f64;
    if mean == 0.0 {
        if peak_inner == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::DegenerateRatio);
    }
    Ok(peak_inner / mean)
}

/// Numeric calibration of the parabolic Sobolev embedding constant: maximize
/// `||g||_{L^r} / (max_t ||g(.,t)||_{L^2} + ||grad g||_{L^2})` over a basis
/// of compactly supported bump fields on the cylinder.
pub fn calibrate_sobolev_constant(grid: &Grid, time: &TimeAxis) -> Result<f64> {
    let n = grid.dim();
    let r = 2.0 * (n as f64 + 2.0) / n as f64;
    let bump = |xi: f64| -> f64 {
        if math::abs(xi) >= 1.0 {
            0.0
        } else {
            let c = libm::cos(core::f64::consts::FRAC_PI_2 * xi);
            c * c
        }
    };
    let t_mid = 0.5 * (time.t0() + time.t_end());
    let t_half = 0.5 * (time.t_end() - time.t0());
    let mut best = 0.0_f64;
    for &width in &[0.25, 0.5, 1.0] {
        for &anchor in &[0.35, 0.5, 0.65] {
            let g = SpaceTimeField::from_fn(*grid, *time, |x, t| {
                let mut prof = bump((t - t_mid) / (width * t_half));
                for d in 0..n {
                    let (lo, hi) = grid.extent(d);
                    let c = lo + anchor * (hi - lo);
                    let w = 0.5 * width * (hi - lo);
                    prof *= bump((x[d] - c) / w);
                }
                prof
            })?;
            let num = lp_norm(&g, r, Region::Whole)?;
            let mut sup_l2 = 0.0;
            for s in g.slices() {
                sup_l2 = math::max(sup_l2, lp_norm_field(s, 2.0, Region::Whole)?);
            }
            let grad_l2 = math::sqrt(crate::mesh::grad_sq_st_integral(&g, Region::Whole));
            let denom = sup_l2 + grad_l2;
            if denom > 0.0 {
                best = math::max(best, num / denom);
            }
        }
    }
    Ok(best)
}
