//! Full perturbed evolution, eigenmode seeding and escape times.
//!
//! The perturbation form of the system is evolved in polar coordinates:
//!
//!   sigma_t + (1/r^2)(r^2 (rho0+sigma) u)_r = 0
//!   u_t + u u_r + d/dr[ h(rho0+sigma) - h(rho0) ] + phi_r(sigma) = 0
//!
//! with the enthalpy h(rho) = (4pi/3) rho^{1/5}, whose derivative reproduces
//! (4pi/15) rho^{-4/5} rho_r.  Writing the pressure term as an enthalpy
//! difference subtracts the steady balance analytically, so the discrete
//! steady state is a fixed point to round-off.  The discrete gradient is the
//! summation-by-parts adjoint of the conservative mass flux, which pins the
//! growth of every numerical mode at the physical rate sqrt(mu0) and
//! telescopes the discrete mass exactly.

use crate::eigen::EigenPair;
use crate::gravity::{neutrality_defect, potential_gradient};
use crate::grid::{ddr, div_flux, grad_pair, GridFunction};
use crate::linear::{weighted_norm, Weight};
use crate::steady::{SteadyState, A_GAMMA};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Time slice of the perturbed flow.
#[derive(Debug, Clone)]
pub struct FluidState {
    pub t: f64,
    /// Density perturbation sigma.
    pub sigma: GridFunction,
    /// Radial velocity; u(0) = u(R_max) = 0.
    pub u: GridFunction,
}

impl FluidState {
    pub fn new(t: f64, sigma: GridFunction, u: GridFunction) -> Result<Self> {
        if u.values[0] != 0.0 {
            return Err(Error::InvalidArgument("u(0) must vanish".into()));
        }
        Ok(Self { t, sigma, u })
    }

    /// Extremes of (rho0 + sigma)/rho0 over the grid.
    pub fn guard_ratios(&self, ss: &SteadyState) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.sigma.grid.len() {
            let ratio = (ss.rho0.values[i] + self.sigma.values[i]) / ss.rho0.values[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        (lo, hi)
    }

    /// The standing positivity assumption 9/10 <= (rho0+sigma)/rho0 <= 11/10.
    pub fn guard_ok(&self, ss: &SteadyState) -> bool {
        let (lo, hi) = self.guard_ratios(ss);
        lo >= 0.9 && hi <= 1.1
    }

    /// Conserved discrete mass: sum of sigma over the conservative cell
    /// volumes (the functional the flux form telescopes exactly).
    pub fn mass(&self) -> f64 {
        let grid = &self.sigma.grid;
        (0..grid.len())
            .map(|i| grid.volumes[i] * self.sigma.values[i])
            .sum()
    }
}

/// The energy measure sqrt(E00) is driven by: E00 = int (rho0+sigma) u^2
/// + (4pi/15)(rho0+sigma)^{-4/5} sigma^2 dx with dx = 4 pi r^2 dr.
pub fn e00(state: &FluidState, ss: &SteadyState) -> f64 {
    let grid = &state.sigma.grid;
    let mut s = 0.0;
    for i in 0..grid.len() {
        let r = grid.nodes[i];
        let rho = ss.rho0.values[i] + state.sigma.values[i];
        s += grid.weights[i]
            * r
            * r
            * (A_GAMMA * rho.powf(-0.8) * state.sigma.values[i] * state.sigma.values[i]
                + rho * state.u.values[i] * state.u.values[i]);
    }
    4.0 * PI * s
}

fn rhs_unchecked(
    state_sigma: &[f64],
    state_u: &[f64],
    ss: &SteadyState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = &ss.grid;
    let n = grid.len();
    let mut rho = vec![0.0; n];
    for i in 0..n {
        rho[i] = ss.rho0.values[i] + state_sigma[i];
        if rho[i] <= 0.0 {
            return Err(Error::GuardViolated {
                t: f64::NAN,
                r: grid.nodes[i],
            });
        }
    }
    // continuity: conservative flux of r^2 rho u, sealed outer boundary
    let div = div_flux(grid, &rho, state_u, 0.0);
    let dsigma: Vec<f64> = div.iter().map(|d| -d).collect();

    // momentum: enthalpy-difference gradient (well balanced) + self-gravity
    let chi: Vec<f64> = (0..n)
        .map(|i| 4.0 * PI / 3.0 * (rho[i].powf(0.2) - ss.rho0.values[i].powf(0.2)))
        .collect();
    let press = grad_pair(grid, &rho, &chi);
    let sigma_f = GridFunction {
        grid: Arc::clone(grid),
        values: state_sigma.to_vec(),
    };
    let grav = potential_gradient(&sigma_f);
    let u_f = GridFunction {
        grid: Arc::clone(grid),
        values: state_u.to_vec(),
    };
    let du_dr = ddr(&u_f);
    let mut du = vec![0.0; n];
    for i in 1..n - 1 {
        du[i] = -state_u[i] * du_dr.values[i] - press[i] - grav.phi_r.values[i];
    }
    Ok((dsigma, du))
}

/// Time derivatives of (sigma, u).  Errors with `GuardViolated` when the
/// input state already sits outside the positivity window.
pub fn nonlinear_rhs(state: &FluidState, ss: &SteadyState) -> Result<(GridFunction, GridFunction)> {
    if !state.guard_ok(ss) {
        return Err(Error::GuardViolated {
            t: state.t,
            r: worst_guard_radius(state, ss),
        });
    }
    let (ds, du) = rhs_unchecked(&state.sigma.values, &state.u.values, ss)?;
    let grid = &state.sigma.grid;
    Ok((
        GridFunction {
            grid: Arc::clone(grid),
            values: ds,
        },
        GridFunction {
            grid: Arc::clone(grid),
            values: du,
        },
    ))
}

fn worst_guard_radius(state: &FluidState, ss: &SteadyState) -> f64 {
    let grid = &state.sigma.grid;
    let mut worst = 0.0;
    let mut at = 0.0;
    for i in 0..grid.len() {
        let dev = (state.sigma.values[i] / ss.rho0.values[i]).abs();
        if dev > worst {
            worst = dev;
            at = grid.nodes[i];
        }
    }
    at
}

/// Seed the flow with delta times the normalized growing mode.
///
/// The pair (phi0, psi0) is rescaled jointly so that
/// (16 pi^2 / 15)(|phi0|_{V0}^2 + |psi0|_{W0}^2) = 1, and then
/// sigma = delta phi0, u = delta psi0.  With that normalization
/// sqrt(E00)(0) = delta up to O(delta) weight shifts.
pub fn seed_initial_data(pair: &EigenPair, delta: f64, ss: &SteadyState) -> Result<FluidState> {
    if delta < 0.0 {
        return Err(Error::InvalidArgument(format!("delta = {delta} < 0")));
    }
    let scale = delta / seed_norm(pair);
    let grid = &pair.psi0.grid;
    let sigma = GridFunction {
        grid: Arc::clone(grid),
        values: pair.phi0.values.iter().map(|v| scale * v).collect(),
    };
    let mut u_vals: Vec<f64> = pair.psi0.values.iter().map(|v| scale * v).collect();
    u_vals[0] = 0.0;
    let n = u_vals.len();
    u_vals[n - 1] = 0.0;
    let u = GridFunction {
        grid: Arc::clone(grid),
        values: u_vals,
    };
    let state = FluidState { t: 0.0, sigma, u };
    if !state.guard_ok(ss) {
        return Err(Error::GuardViolated {
            t: 0.0,
            r: worst_guard_radius(&state, ss),
        });
    }
    Ok(state)
}

/// Norm of the raw mode pair in the seed normalization.
pub fn seed_norm(pair: &EigenPair) -> f64 {
    let nphi = weighted_norm(&pair.phi0, Weight::V0);
    let npsi = weighted_norm(&pair.psi0, Weight::W0);
    (16.0 * PI * PI / 15.0 * (nphi * nphi + npsi * npsi)).sqrt()
}

/// CFL-limited step for a state: cfl * min over cells of width/(|u| + c),
/// with c^2 = A*gamma*(rho0+sigma)^{gamma-1} and the origin half-cell
/// counted at its own width.
pub fn cfl_dt(state: &FluidState, ss: &SteadyState, cfl: f64) -> f64 {
    let grid = &ss.grid;
    let n = grid.len();
    let mut dt = f64::INFINITY;
    for k in 0..n - 1 {
        let width = if k == 0 {
            grid.nodes[1] / 2.0
        } else {
            grid.spacing(k)
        };
        let c = (A_GAMMA
            * (ss.rho0.values[k] + state.sigma.values[k])
                .max(ss.rho0.values[k + 1] + state.sigma.values[k + 1])
                .powf(0.2))
        .sqrt();
        let speed = state.u.values[k].abs().max(state.u.values[k + 1].abs()) + c;
        dt = dt.min(width / speed);
    }
    cfl * dt
}

/// Controls for [`evolve`].
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// CFL number in (0, 0.9].
    pub cfl: f64,
    /// Stop time.
    pub t_max: f64,
    /// Record one sample every this many steps.
    pub stride: usize,
    /// Stop as soon as sqrt(E00) crosses this threshold.
    pub theta: Option<f64>,
    /// Fourth-difference velocity filter coefficient (0 disables; the
    /// filter acts on u only so the mass telescoping stays exact).
    pub filter_coeff: f64,
    /// Keep full field snapshots at every sample (for energy diagnostics).
    pub store_fields: bool,
    /// March with this fixed step instead of the per-step CFL scan, so
    /// stored samples sit at a uniform stride (needed by the backward
    /// differences of the energy report).  The caller is responsible for
    /// keeping it within the CFL bound; the guard keeps the sound speed
    /// within a few percent of its initial profile.
    pub fixed_dt: Option<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            cfl: 0.8,
            t_max: 10.0,
            stride: 20,
            theta: None,
            filter_coeff: 0.0,
            store_fields: false,
            fixed_dt: None,
        }
    }
}

/// One sampled record of a nonlinear run.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub sqrt_e00: f64,
    pub guard_min_ratio: f64,
    pub guard_max_ratio: f64,
    /// Drift of the conserved discrete mass relative to t = 0.
    pub mass_defect: f64,
    pub phi_r_at_rmax: f64,
}

/// Full field snapshot stored when `store_fields` is on.
#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub t: f64,
    pub sigma: Vec<f64>,
    pub u: Vec<f64>,
    pub sigma_t: Vec<f64>,
    pub u_t: Vec<f64>,
}

/// Outcome of a nonlinear run.
#[derive(Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub snapshots: Vec<FieldSnapshot>,
    pub final_state: FluidState,
    /// Time of the guard trip, if one ended the run.
    pub guard_tripped: Option<f64>,
    /// Linear-interpolated threshold crossing, if requested and reached.
    pub crossing: Option<f64>,
    pub max_sqrt_e00: f64,
    /// Set when the perturbation carries non-negligible enclosed mass at
    /// R_max, a hint that the box has been outgrown.
    pub truncation_flag: bool,
}

/// March (sigma, u) with the classical four-stage explicit step under an
/// acoustic CFL constraint.  The run ends at `t_max`, at a guard trip
/// (partial trajectory returned, not an error), or at the threshold event.
pub fn evolve(init: &FluidState, ss: &SteadyState, opts: &EvolveOptions) -> Result<Trajectory> {
    if !(opts.cfl > 0.0 && opts.cfl <= 0.9) {
        return Err(Error::InvalidArgument(format!(
            "cfl = {} outside (0, 0.9]",
            opts.cfl
        )));
    }
    let grid = &ss.grid;
    let n = grid.len();
    // effective widths for the CFL scan; the origin cell counts with its
    // half width, which is what actually limits the explicit step there
    let mut widths = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        widths.push(grid.spacing(k));
    }
    widths[0] = grid.nodes[1] / 2.0;

    let mut sigma = init.sigma.values.clone();
    let mut u = init.u.values.clone();
    let mut t = init.t;
    let mass0: f64 = (0..n).map(|i| grid.volumes[i] * sigma[i]).sum();

    let make_state = |t: f64, sigma: &Vec<f64>, u: &Vec<f64>| FluidState {
        t,
        sigma: GridFunction {
            grid: Arc::clone(grid),
            values: sigma.clone(),
        },
        u: GridFunction {
            grid: Arc::clone(grid),
            values: u.clone(),
        },
    };

    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    let mut max_sqrt_e00: f64;
    let mut guard_tripped = None;
    let mut crossing = None;

    let record = |t: f64,
                  sigma: &Vec<f64>,
                  u: &Vec<f64>,
                  samples: &mut Vec<TrajectorySample>,
                  snapshots: &mut Vec<FieldSnapshot>|
     -> Result<f64> {
        let state = make_state(t, sigma, u);
        let (lo, hi) = state.guard_ratios(ss);
        let se = e00(&state, ss).sqrt();
        let pg = potential_gradient(&state.sigma);
        samples.push(TrajectorySample {
            t,
            sqrt_e00: se,
            guard_min_ratio: lo,
            guard_max_ratio: hi,
            mass_defect: (state.mass() - mass0).abs(),
            phi_r_at_rmax: pg.phi_r.values[n - 1],
        });
        if opts.store_fields {
            let (st, ut) = rhs_unchecked(sigma, u, ss)?;
            snapshots.push(FieldSnapshot {
                t,
                sigma: sigma.clone(),
                u: u.clone(),
                sigma_t: st,
                u_t: ut,
            });
        }
        Ok(se)
    };

    let mut prev_t = t;
    let mut prev_e = {
        let s = record(t, &sigma, &u, &mut samples, &mut snapshots)?;
        max_sqrt_e00 = s;
        s
    };
    if let Some(theta) = opts.theta {
        if prev_e >= theta {
            // threshold already met at start: crossing convention T = 0
            let state = make_state(t, &sigma, &u);
            return Ok(Trajectory {
                samples,
                snapshots,
                truncation_flag: false,
                final_state: state,
                guard_tripped: None,
                crossing: Some(t),
                max_sqrt_e00,
            });
        }
    }

    let mut step: usize = 0;
    while t < opts.t_max {
        let mut dt = match opts.fixed_dt {
            Some(dt0) => dt0,
            None => {
                // acoustic CFL from the current state
                let mut dt = f64::INFINITY;
                for k in 0..n - 1 {
                    let c = (A_GAMMA
                        * (ss.rho0.values[k] + sigma[k])
                            .max(ss.rho0.values[k + 1] + sigma[k + 1])
                            .powf(0.2))
                    .sqrt();
                    let speed = u[k].abs().max(u[k + 1].abs()) + c;
                    dt = dt.min(widths[k] / speed);
                }
                dt * opts.cfl
            }
        };
        if t + dt > opts.t_max {
            dt = opts.t_max - t;
        }

        let stage = |s: &Vec<f64>, w: &Vec<f64>| rhs_unchecked(s, w, ss);
        let comb = |a: &Vec<f64>, k: &Vec<f64>, h: f64| -> Vec<f64> {
            a.iter().zip(k).map(|(x, d)| x + h * d).collect()
        };
        let (k1s, k1u) = stage(&sigma, &u)?;
        let (k2s, k2u) = stage(&comb(&sigma, &k1s, 0.5 * dt), &comb(&u, &k1u, 0.5 * dt))?;
        let (k3s, k3u) = stage(&comb(&sigma, &k2s, 0.5 * dt), &comb(&u, &k2u, 0.5 * dt))?;
        let (k4s, k4u) = stage(&comb(&sigma, &k3s, dt), &comb(&u, &k3u, dt))?;
        for i in 0..n {
            sigma[i] += dt / 6.0 * (k1s[i] + 2.0 * k2s[i] + 2.0 * k3s[i] + k4s[i]);
            u[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
        }
        if opts.filter_coeff > 0.0 {
            filter4(&mut u, opts.filter_coeff);
            u[0] = 0.0;
            u[n - 1] = 0.0;
        }
        t += dt;
        step += 1;

        // guard check every step
        let state = make_state(t, &sigma, &u);
        if !state.guard_ok(ss) {
            guard_tripped = Some(t);
            let _ = record(t, &sigma, &u, &mut samples, &mut snapshots)?;
            break;
        }
        // threshold scan every step, sampled records at the stride
        let se = e00(&state, ss).sqrt();
        max_sqrt_e00 = max_sqrt_e00.max(se);
        if step % opts.stride.max(1) == 0 || t >= opts.t_max {
            let _ = record(t, &sigma, &u, &mut samples, &mut snapshots)?;
        }
        if let Some(theta) = opts.theta {
            if se >= theta {
                let tc = prev_t + (t - prev_t) * (theta - prev_e) / (se - prev_e);
                crossing = Some(tc.max(0.0));
                if step % opts.stride.max(1) != 0 {
                    let _ = record(t, &sigma, &u, &mut samples, &mut snapshots)?;
                }
                break;
            }
        }
        prev_t = t;
        prev_e = se;
    }

    let final_state = make_state(t, &sigma, &u);
    let sig_abs = GridFunction {
        grid: Arc::clone(grid),
        values: final_state.sigma.values.iter().map(|v| v.abs()).collect(),
    };
    let total_abs = neutrality_defect(&sig_abs);
    let enc_boundary = potential_gradient(&final_state.sigma).enclosed.values[n - 1].abs();
    let truncation_flag = enc_boundary > 1e-6 * total_abs.max(1e-300);
    Ok(Trajectory {
        samples,
        snapshots,
        final_state,
        guard_tripped,
        crossing,
        max_sqrt_e00,
        truncation_flag,
    })
}

fn filter4(f: &mut [f64], coeff: f64) {
    let n = f.len();
    let orig = f.to_vec();
    for i in 2..n - 2 {
        let d4 = orig[i - 2] - 4.0 * orig[i - 1] + 6.0 * orig[i] - 4.0 * orig[i + 1] + orig[i + 2];
        f[i] -= coeff * d4;
    }
}

/// Escape-time measurement for one seed amplitude.
#[derive(Debug, Clone)]
pub struct EscapeResult {
    pub delta: f64,
    pub theta: f64,
    /// First time sqrt(E00) >= theta, by linear interpolation between steps;
    /// `None` if neither reached by `t_max` nor before a guard trip.
    pub t_escape: Option<f64>,
    pub guard_tripped: bool,
    pub max_sqrt_e00: f64,
    pub truncation_flag: bool,
}

/// Seed with amplitude delta and march until sqrt(E00) crosses theta.
pub fn escape_time(
    pair: &EigenPair,
    ss: &SteadyState,
    delta: f64,
    theta: f64,
    t_max: f64,
    cfl: f64,
) -> Result<EscapeResult> {
    if !(delta > 0.0) || delta > theta {
        return Err(Error::InvalidArgument(format!(
            "need 0 < delta <= theta, got delta = {delta}, theta = {theta}"
        )));
    }
    let init = seed_initial_data(pair, delta, ss)?;
    let opts = EvolveOptions {
        cfl,
        t_max,
        stride: 50,
        theta: Some(theta),
        ..Default::default()
    };
    let traj = evolve(&init, ss, &opts)?;
    Ok(EscapeResult {
        delta,
        theta,
        t_escape: traj.crossing,
        guard_tripped: traj.guard_tripped.is_some(),
        max_sqrt_e00: traj.max_sqrt_e00,
        truncation_flag: traj.truncation_flag,
    })
}
