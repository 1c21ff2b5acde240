//! Calibration fields with known wave front sets.

use crate::quantum::{SpaceTimeField, SpatialGrid, C64};

/// `exp(-t²/0.1 - x²/2)` on `[-1, 1] × [-8, 8)`; smooth, so its wave front set is empty.
pub fn gaussian_field() -> SpaceTimeField {
    let g = SpatialGrid::new(8.0, 512).expect("fixed grid");
    SpaceTimeField::from_fn(-1.0, 1.0, 2048, g, |t, x| C64::new((-(t * t) / 0.1 - x * x / 2.0).exp(), 0.0))
}

/// `χ(t,x) exp(i(xξ₀/h₀ + tτ₀/h₀²))` on `[-0.5, 0.5] × [-8, 8)`, with `(τ₀, ξ₀)` on the unit circle.
pub fn oscillatory_field(h0: f64, tau0: f64, xi0: f64) -> SpaceTimeField {
    let g = SpatialGrid::new(8.0, 1024).expect("fixed grid");
    SpaceTimeField::from_fn(-0.5, 0.5, 1024, g, |t, x| {
        let env = (-(t * t) / (2.0 * 0.04 * 0.04) - x * x / 2.0).exp();
        C64::from_polar(env, x * xi0 / h0 + t * tau0 / (h0 * h0))
    })
}
