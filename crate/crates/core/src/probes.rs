//! Seeded random test-function suites.
//!
//! All randomness in the laboratory flows from one 64-bit seed through a
//! counter-based generator, so every property suite is reproducible
//! bit-for-bit across runs and platforms.

use crate::grid::{GridFunction, RadialGrid};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub struct ProbeSuite {
    rng: ChaCha8Rng,
}

impl ProbeSuite {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Amplitude, center and width of one random bump.
    pub fn bump_params(&mut self) -> (f64, f64, f64) {
        let a = self.rng.gen_range(0.5..2.0);
        let c = self.rng.gen_range(0.5..12.0);
        let s = self.rng.gen_range(0.3..3.0);
        (a, c, s)
    }

    /// A smooth velocity-like profile: sum of two bumps carrying the factor
    /// r (vanishes at the origin) and pinned to zero at R_max.
    pub fn velocity_profile(&mut self, grid: &Arc<RadialGrid>) -> GridFunction {
        let (a1, c1, s1) = self.bump_params();
        let (a2, c2, s2) = self.bump_params();
        let mut f = GridFunction::from_fn(grid, |r| {
            a1 * r * (-((r - c1) / s1).powi(2)).exp() + a2 * r * (-((r - c2) / s2).powi(2)).exp()
        });
        let n = grid.len();
        f.values[0] = 0.0;
        f.values[n - 1] = 0.0;
        f
    }

    /// A plain Gaussian bump for the interpolation-inequality suite.
    pub fn gaussian_bump(&mut self, grid: &Arc<RadialGrid>) -> GridFunction {
        let (a, c, s) = self.bump_params();
        GridFunction::from_fn(grid, |r| a * (-((r - c) / s).powi(2)).exp())
    }
}

/// Dense deterministic parameter scan of the interpolation-ratio landscape:
/// a 10 x 10 x 10 lattice over bump center, width, and the mixing weight of
/// an r-carrying component.  Returns the largest lhs/rhs ratio seen.
pub fn gn_lattice_bound(
    grid: &Arc<RadialGrid>,
    k: f64,
    alpha: f64,
    beta: f64,
) -> crate::Result<f64> {
    let mut worst: f64 = 0.0;
    for ic in 0..10 {
        let c = 0.2 + 1.6 * ic as f64;
        for is in 0..10 {
            let s = 0.15 * 1.45f64.powi(is);
            for im in 0..10 {
                let t = im as f64 / 9.0;
                let f = GridFunction::from_fn(grid, |r| {
                    let e = (-((r - c) / s).powi(2)).exp();
                    (1.0 - t) * e + t * r * e / (1.0 + c)
                });
                let chk = crate::energy::gn_check(&f, k, alpha, beta)?;
                worst = worst.max(chk.ratio);
            }
        }
    }
    Ok(worst)
}
