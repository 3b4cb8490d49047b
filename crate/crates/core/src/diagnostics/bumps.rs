//! Compactly supported `C^2` fields that vanish on both clamped layers.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{gradient, Grid, ScalarField};

/// Wendland's `(1 - r)^4 (4 r + 1)` on `r < 1`.
pub fn wendland(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        let s = 1.0 - r;
        s * s * s * s * (4.0 * r + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BumpShape {
    /// `wendland(|x - c| / r)`.
    Radial { radius: f64 },
    /// `prod_d wendland(|x_d - c_d| / r_d)`.
    Tensor { radii: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub centre: [f64; 2],
    pub shape: BumpShape,
}

impl Bump {
    pub fn eval(&self, x: [f64; 2], dim: usize) -> f64 {
        match self.shape {
            BumpShape::Radial { radius } => {
                let r2: f64 = (0..dim).map(|d| (x[d] - self.centre[d]).powi(2)).sum();
                wendland(r2.sqrt() / radius)
            }
            BumpShape::Tensor { radii } => (0..dim)
                .map(|d| wendland((x[d] - self.centre[d]).abs() / radii[d]))
                .product(),
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> ScalarField {
        let dim = grid.dim();
        ScalarField::from_fn(grid.clone(), |x| self.eval(x, dim)).expect("finite bump")
    }
}

fn check_room(grid: &Grid) -> Result<()> {
    if grid.nodes_per_axis().iter().any(|&n| n < 7) {
        return Err(Error::InvalidGrid("bump families need at least 7 nodes per axis".into()));
    }
    Ok(())
}

/// Centre in `[3h, L - 3h]` per axis and the largest per-axis radius that keeps
/// the support off the clamped layers.
fn draw_centre(grid: &Grid, rng: &mut ChaCha8Rng) -> ([f64; 2], [f64; 2]) {
    let mut c = [0.0; 2];
    let mut room = [f64::INFINITY; 2];
    for d in 0..grid.dim() {
        let (l, h) = (grid.extent()[d], grid.spacing()[d]);
        c[d] = 3.0 * h + (l - 6.0 * h) * rng.random::<f64>();
        room[d] = (c[d] - h).min(l - h - c[d]);
    }
    (c, room)
}

fn draw_radius(room: f64, h: f64, rng: &mut ChaCha8Rng) -> f64 {
    let lo = (2.0 * h).min(room);
    lo + (room - lo) * rng.random::<f64>()
}

/// Radial bumps with deterministic centres and radii.
pub fn radial_family(grid: &Grid, count: usize, seed: u64) -> Result<Vec<Bump>> {
    check_room(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    Ok((0..count)
        .map(|_| {
            let (centre, room) = draw_centre(grid, &mut rng);
            let room = room[..dim].iter().copied().fold(f64::INFINITY, f64::min);
            let radius = draw_radius(room, grid.h_min(), &mut rng);
            Bump {
                centre,
                shape: BumpShape::Radial { radius },
            }
        })
        .collect())
}

/// Tensor-product bumps with independent per-axis radii.
pub fn tensor_family(grid: &Grid, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Bump>> {
    check_room(grid)?;
    Ok((0..count)
        .map(|_| {
            let (centre, room) = draw_centre(grid, rng);
            let mut radii = [1.0; 2];
            for d in 0..grid.dim() {
                radii[d] = draw_radius(room[d], grid.spacing()[d], rng);
            }
            Bump {
                centre,
                shape: BumpShape::Tensor { radii },
            }
        })
        .collect())
}

/// `max(|phi|_inf, ||D phi||_inf)` with the grid gradient.
pub fn w1_inf_norm(phi: &ScalarField) -> f64 {
    let dim = phi.grid().dim();
    gradient(phi)
        .iter()
        .zip(phi.values())
        .map(|(g, v)| {
            let slope = g[..dim].iter().map(|c| c * c).sum::<f64>().sqrt();
            slope.max(v.abs())
        })
        .fold(0.0, f64::max)
}
