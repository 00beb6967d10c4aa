//! The explicit hydrostatic background profile.
//!
//! With entropy constant A = 2*pi/9 and adiabatic exponent 6/5 the
//! self-gravitating balance dp/dr + (4*pi*rho/r^2) int_0^r rho s^2 ds = 0
//! is solved exactly by rho0(r) = (1+r^2)^(-5/2).  All coefficient fields
//! are sampled from closed forms, never differenced, so the eigenproblem
//! coefficients carry no avoidable discretization error.

use crate::grid::{cumulative_r2, panel_r2, GridFunction, RadialGrid};
use crate::{gravity, Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Entropy constant A = 2*pi/9.
pub const ENTROPY_A: f64 = 2.0 * PI / 9.0;
/// Adiabatic exponent gamma = 6/5.
pub const GAMMA: f64 = 1.2;
/// A * gamma = 4*pi/15, the coefficient of the pressure-gradient term.
pub const A_GAMMA: f64 = 4.0 * PI / 15.0;

/// Background density at radius r.
pub fn rho0(r: f64) -> f64 {
    (1.0 + r * r).powf(-2.5)
}

/// Closed-form derivative of the background density.
pub fn drho0(r: f64) -> f64 {
    -5.0 * r * (1.0 + r * r).powf(-3.5)
}

/// Closed-form steady potential gradient 4*pi*r / (3 (1+r^2)^{3/2}).
pub fn phi0_r(r: f64) -> f64 {
    4.0 * PI * r / (3.0 * (1.0 + r * r).powf(1.5))
}

/// The hydrostatic steady state sampled on a grid.
#[derive(Debug)]
pub struct SteadyState {
    pub a: f64,
    pub gamma: f64,
    pub rho0: GridFunction,
    pub drho0: GridFunction,
    pub p0: GridFunction,
    pub phi0_r: GridFunction,
    pub grid: Arc<RadialGrid>,
}

/// Sample the hydrostatic profile on `grid`.
pub fn build_steady_state(grid: &Arc<RadialGrid>) -> SteadyState {
    debug_assert!((ENTROPY_A * GAMMA - A_GAMMA).abs() < 1e-15);
    let rho = GridFunction::from_fn(grid, rho0);
    let drho = GridFunction::from_fn(grid, drho0);
    let p0 = GridFunction::from_fn(grid, |r| ENTROPY_A * rho0(r).powf(GAMMA));
    let phi = GridFunction::from_fn(grid, phi0_r);
    SteadyState {
        a: ENTROPY_A,
        gamma: GAMMA,
        rho0: rho,
        drho0: drho,
        p0,
        phi0_r: phi,
        grid: Arc::clone(grid),
    }
}

impl SteadyState {
    /// Residual of the hydrostatic balance in the equivalent form
    /// A*gamma*rho0^(gamma-2)*rho0' + phi0_r.
    ///
    /// With the analytic potential gradient the residual vanishes to
    /// round-off; pass `quadrature_gravity = true` to use the cumulative
    /// enclosed-mass solve instead, which leaves an O(h^2) residual.
    pub fn hydrostatic_residual(&self, quadrature_gravity: bool) -> GridFunction {
        let grid = &self.grid;
        let phi = if quadrature_gravity {
            gravity::potential_gradient(&self.rho0).phi_r
        } else {
            self.phi0_r.clone()
        };
        let mut vals = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            let r = grid.nodes[i];
            let rho = self.rho0.values[i];
            vals[i] = A_GAMMA * rho.powf(GAMMA - 2.0) * self.drho0.values[i] + phi.values[i];
            if r == 0.0 {
                // both terms vanish at the regular center
                vals[i] = 0.0;
            }
        }
        GridFunction {
            grid: Arc::clone(grid),
            values: vals,
        }
    }

    /// Enclosed mass m(r) = 4*pi int_0^r rho0 s^2 ds by cumulative quadrature.
    pub fn enclosed_mass(&self, r: f64) -> Result<f64> {
        if !(0.0..=self.grid.r_max).contains(&r) {
            return Err(Error::OutOfDomain(r));
        }
        let cum = cumulative_r2(&self.rho0);
        // locate the panel containing r and close it with the same
        // moment-exact rule on the partial panel
        let nodes = &self.grid.nodes;
        let k = match nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(k) => return Ok(4.0 * PI * cum.values[k]),
            Err(k) => k,
        };
        let partial = panel_r2(nodes[k - 1], r, self.rho0.values[k - 1], rho0(r));
        Ok(4.0 * PI * (cum.values[k - 1] + partial))
    }
}

/// Closed-form enclosed mass 4*pi*r^3 / (3 (1+r^2)^{3/2}).
pub fn enclosed_mass_exact(r: f64) -> f64 {
    4.0 * PI * r.powi(3) / (3.0 * (1.0 + r * r).powf(1.5))
}
