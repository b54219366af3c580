use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::manifold::{Field, ManifoldGrid};

/// Gaussian noise filtered to Fourier modes with `|m_d| <= kmax`, scaled so
/// that `max |u| = 1`.
pub fn band_limited<R: Rng + ?Sized>(grid: &Arc<ManifoldGrid>, rng: &mut R, kmax: usize) -> Field {
    let noise: Vec<f64> = (0..grid.node_count())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let smooth = grid.low_pass(&noise, kmax);
    let peak = smooth.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if peak > 0.0 { 1.0 / peak } else { 1.0 };
    Field::from_raw(grid, smooth.into_iter().map(|x| x * scale).collect())
}
