//! Evaluation of named analytic profiles on a grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sktlab_core::{Field, Grid, Result as CoreResult};

use crate::config::{ProfileSpec, TensorSpec};
use sktlab_core::mesh::{SymTensor, TensorField};

/// Evaluate a profile; `seed_mix` is folded into random profiles so distinct
/// scenarios in a sweep draw distinct fields while staying reproducible.
pub fn evaluate(spec: &ProfileSpec, grid: &Grid, seed_mix: u64) -> CoreResult<Field> {
    match spec {
        ProfileSpec::Constant { value } => Ok(Field::constant(*grid, *value)),
        ProfileSpec::Bump { center, width, amplitude, floor } => {
            let c = [
                center.first().copied().unwrap_or(0.0),
                center.get(1).copied().unwrap_or(0.0),
            ];
            let w = *width;
            Field::from_fn(*grid, |x| {
                let mut d2 = 0.0;
                for d in 0..grid.dim() {
                    d2 += (x[d] - c[d]) * (x[d] - c[d]);
                }
                let r = d2.sqrt() / w;
                if r >= 1.0 {
                    *floor
                } else {
                    let b = (std::f64::consts::FRAC_PI_2 * r).cos();
                    floor + amplitude * b * b
                }
            })
        }
        ProfileSpec::Checkerboard { base, amplitude } => Field::from_fn(*grid, |x| {
            let ix = ((x[0] - grid.extent(0).0) / grid.spacing(0) - 0.5).round() as usize;
            let iy = if grid.dim() == 2 {
                ((x[1] - grid.extent(1).0) / grid.spacing(1) - 0.5).round() as usize
            } else {
                0
            };
            if (ix + iy) % 2 == 0 {
                base + amplitude
            } else {
                base - amplitude
            }
        }),
        ProfileSpec::Linear { offset, gradient } => Field::from_fn(*grid, |x| {
            let mut v = *offset;
            for d in 0..grid.dim() {
                v += gradient.get(d).copied().unwrap_or(0.0) * x[d];
            }
            v
        }),
        ProfileSpec::Random { min, max, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(seed_mix));
            let values = (0..grid.cell_count()).map(|_| rng.gen_range(*min..*max)).collect();
            Field::from_values(*grid, values)
        }
    }
}

/// Build the scalar-model diffusion coefficient; the declared ellipticity
/// constant must admit the produced eigenvalues.
pub fn tensor(spec: &TensorSpec, grid: &Grid, ellipticity: f64) -> CoreResult<TensorField> {
    match spec {
        TensorSpec::Identity => Ok(TensorField::identity(*grid)),
        TensorSpec::Diagonal { xx, yy } => {
            let (xx, yy) = (*xx, *yy);
            TensorField::from_fn(*grid, ellipticity, move |_| SymTensor::diagonal(xx, yy))
        }
        TensorSpec::Oscillatory { base, amplitude } => {
            let (base, amplitude) = (*base, *amplitude);
            TensorField::from_fn(*grid, ellipticity, move |x| {
                let ix = ((x[0] - grid.extent(0).0) / grid.spacing(0) - 0.5).round() as usize;
                let iy = if grid.dim() == 2 {
                    ((x[1] - grid.extent(1).0) / grid.spacing(1) - 0.5).round() as usize
                } else {
                    0
                };
                let sign = if (ix + iy) % 2 == 0 { 1.0 } else { -1.0 };
                SymTensor::isotropic(base + sign * amplitude)
            })
        }
    }
}
