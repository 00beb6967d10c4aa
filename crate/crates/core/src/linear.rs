//! Linearized dynamics and growth-rate measurement.
//!
//! Two equivalent tracks are evolved.  The second-order wave form
//! W0 Psi_tt = L0 Psi reuses the symmetric pencil and a leapfrog step, so
//! the discrete energy identity (W0 Psi_t, Psi_t) - (L0 Psi, Psi) = const
//! holds up to a bounded O(dt^2) band.  The first-order pair
//!
//!   Phi_t = -(1/r^2)(r^2 rho0 Psi)_r
//!   Psi_t = -(4pi/15)(rho0^{-4/5} Phi)_r - (4pi/r^2) int_0^r Phi s^2 ds
//!
//! uses the conservative divergence and its summation-by-parts adjoint, the
//! same operators the nonlinear solver linearizes to, which keeps the
//! measured growth rate of every solution at or below sqrt(mu0).

use crate::eigen::EigenPencil;
use crate::gravity::potential_gradient;
use crate::grid::{ddr, div_flux, grad_pair, GridFunction};
use crate::linalg::{line_fit, tridiag_mul};
use crate::steady::{SteadyState, A_GAMMA};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// Weight selector for [`weighted_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// W0 = (15/4pi) r^2 rho0.
    W0,
    /// W_l = (15/4pi) r^2 rho0^{1+l}, l <= 0.
    Wl(f64),
    /// V0 = r^2 (1+r^2)^2, the density-side symmetrizer weight.
    V0,
}

impl std::str::FromStr for Weight {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w0" => Ok(Weight::W0),
            "v0" => Ok(Weight::V0),
            other => {
                if let Some(l) = other.strip_prefix("wl:") {
                    let l: f64 = l
                        .parse()
                        .map_err(|_| Error::UnknownWeight(other.to_string()))?;
                    Ok(Weight::Wl(l))
                } else {
                    Err(Error::UnknownWeight(other.to_string()))
                }
            }
        }
    }
}

/// Evaluate the selected weight function at radius r.
pub fn weight_at(which: Weight, r: f64) -> f64 {
    let u = 1.0 + r * r;
    match which {
        Weight::W0 => 15.0 / (4.0 * PI) * r * r * u.powf(-2.5),
        Weight::Wl(l) => 15.0 / (4.0 * PI) * r * r * u.powf(-2.5 * (1.0 + l)),
        Weight::V0 => r * r * u * u,
    }
}

/// Weighted norm sqrt(int W f^2 dr).
pub fn weighted_norm(f: &GridFunction, which: Weight) -> f64 {
    let grid = &f.grid;
    let mut s = 0.0;
    for i in 0..grid.len() {
        let w = weight_at(which, grid.nodes[i]);
        s += grid.weights[i] * w * f.values[i] * f.values[i];
    }
    s.sqrt()
}

/// The positive functional P_f = int r^2 (1+r^2)^{-3} f_r^2 dr
///                             + 2 int (1+r^2)^{-4} f^2 dr.
pub fn p_functional(f: &GridFunction) -> f64 {
    let grid = &f.grid;
    let df = ddr(f);
    let mut s = 0.0;
    for i in 0..grid.len() {
        let r = grid.nodes[i];
        let u = 1.0 + r * r;
        s += grid.weights[i]
            * (r * r * u.powi(-3) * df.values[i] * df.values[i]
                + 2.0 * u.powi(-4) * f.values[i] * f.values[i]);
    }
    s
}

/// State of the linearized system: velocity perturbation Psi, its time
/// derivative (wave track), and density perturbation Phi (first-order track).
#[derive(Debug, Clone)]
pub struct LinearState {
    pub t: f64,
    pub psi: GridFunction,
    pub psi_t: GridFunction,
    pub phi_lin: GridFunction,
}

impl LinearState {
    pub fn new(t: f64, psi: GridFunction, psi_t: GridFunction, phi_lin: GridFunction) -> Result<Self> {
        if psi.values[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "Psi must vanish at the origin node".into(),
            ));
        }
        Ok(Self { t, psi, psi_t, phi_lin })
    }
}

/// Time derivatives (Phi_t, Psi_t) of the first-order linearized pair.
///
/// This is the exact Frechet derivative of the nonlinear right-hand side at
/// the steady state: the continuity part reuses the conservative divergence
/// and the momentum part its summation-by-parts adjoint, so that
/// nonlinear_rhs(delta * (Phi, Psi)) / delta converges to this field with an
/// O(delta) remainder and no O(h) mismatch.
pub fn linear_rhs(state: &LinearState, ss: &SteadyState) -> (GridFunction, GridFunction) {
    let grid = &state.psi.grid;
    let n = grid.len();
    let outer = grid.nodes[n - 1] * grid.nodes[n - 1]
        * ss.rho0.values[n - 1]
        * state.psi.values[n - 1];
    let div = div_flux(grid, &ss.rho0.values, &state.psi.values, outer);
    let dphi = GridFunction {
        grid: Arc::clone(grid),
        values: div.iter().map(|d| -d).collect(),
    };

    // chi = (4pi/15) rho0^{-4/5} Phi, the linearized enthalpy perturbation
    let chi: Vec<f64> = (0..n)
        .map(|i| A_GAMMA * ss.rho0.values[i].powf(-0.8) * state.phi_lin.values[i])
        .collect();
    let press = grad_pair(grid, &ss.rho0.values, &chi);
    let grav = potential_gradient(&state.phi_lin);
    let mut dpsi = vec![0.0; n];
    for i in 1..n - 1 {
        dpsi[i] = -press[i] - grav.phi_r.values[i];
    }
    // origin limit 0; the outer node follows the one-sided expanded form
    // (the evolution pins it to zero anyway)
    let dchi = ddr(&GridFunction {
        grid: Arc::clone(grid),
        values: chi,
    });
    dpsi[n - 1] = -dchi.values[n - 1] - grav.phi_r.values[n - 1];
    (
        dphi,
        GridFunction {
            grid: Arc::clone(grid),
            values: dpsi,
        },
    )
}

/// One sampled record of a wave-equation run.
#[derive(Debug, Clone)]
pub struct WaveSample {
    pub t: f64,
    pub norm_psi_w0: f64,
    pub norm_psit_w0: f64,
    pub p_psi: f64,
    /// One entry per configured l, same order as `WaveTrajectory::l_values`.
    pub norms_wl: Vec<f64>,
    /// (W0 Psi_t, Psi_t), the kinetic part of the energy identity.
    pub kinetic: f64,
    /// (L0 Psi, Psi), the potential part of the energy identity.
    pub potential: f64,
}

/// Sampled output of [`evolve_wave`].
#[derive(Debug)]
pub struct WaveTrajectory {
    pub samples: Vec<WaveSample>,
    pub l_values: Vec<f64>,
    pub dt: f64,
}

/// Largest absolute eigenvalue of M^{-1} K by power iteration.
pub fn wave_lambda_max(pencil: &EigenPencil) -> f64 {
    let m = pencil.size();
    let mut v: Vec<f64> = (0..m).map(|i| (0.613 * i as f64).sin() + 0.2).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut lam = 1.0;
    for _ in 0..80 {
        let kv = tridiag_mul(&pencil.diag, &pencil.off, &v);
        let bv: Vec<f64> = kv.iter().zip(&pencil.mass).map(|(a, m)| a / m).collect();
        lam = norm(&bv) / norm(&v);
        let s = norm(&bv);
        v = bv.iter().map(|a| a / s).collect();
    }
    lam
}

/// Largest stable leapfrog step: dt^2 lambda_max <= 3.6 (10% margin below
/// the exact bound 4).
pub fn stable_dt(pencil: &EigenPencil) -> f64 {
    (3.6 / wave_lambda_max(pencil)).sqrt()
}

/// Evolve the wave form W0 Psi_tt = L0 Psi from `init` for time `t_end`
/// with a leapfrog (velocity Verlet) step, sampling every `stride` steps.
pub fn evolve_wave(
    pencil: &EigenPencil,
    init: &LinearState,
    t_end: f64,
    dt: f64,
    stride: usize,
    l_values: &[f64],
) -> Result<WaveTrajectory> {
    let dt_max = stable_dt(pencil);
    if dt > dt_max {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt:.3e} exceeds the stability bound {dt_max:.3e}"
        )));
    }
    let stride = stride.max(1);
    let mut u = pencil.restrict(&init.psi);
    let mut v = pencil.restrict(&init.psi_t);
    let accel = |u: &[f64]| -> Vec<f64> {
        let ku = tridiag_mul(&pencil.diag, &pencil.off, u);
        ku.iter().zip(&pencil.mass).map(|(k, m)| k / m).collect()
    };
    let steps = (t_end / dt).ceil() as usize;
    let mut samples = Vec::with_capacity(steps / stride + 2);
    let mut a = accel(&u);
    let record = |t: f64, u: &[f64], v: &[f64], samples: &mut Vec<WaveSample>| {
        let psi = pencil.embed(u);
        let psit = pencil.embed(v);
        let kinetic = pencil.i_form(v);
        let potential = pencil.q_form(u);
        samples.push(WaveSample {
            t,
            norm_psi_w0: weighted_norm(&psi, Weight::W0),
            norm_psit_w0: weighted_norm(&psit, Weight::W0),
            p_psi: p_functional(&psi),
            norms_wl: l_values
                .iter()
                .map(|&l| weighted_norm(&psi, Weight::Wl(l)))
                .collect(),
            kinetic,
            potential,
        });
    };
    record(0.0, &u, &v, &mut samples);
    let initial_scale = samples[0].norm_psi_w0 + samples[0].norm_psit_w0;
    for step in 1..=steps {
        for i in 0..u.len() {
            v[i] += 0.5 * dt * a[i];
            u[i] += dt * v[i];
        }
        a = accel(&u);
        for i in 0..u.len() {
            v[i] += 0.5 * dt * a[i];
        }
        if step % stride == 0 || step == steps {
            let t = step as f64 * dt;
            record(t, &u, &v, &mut samples);
            let last = samples.last().unwrap();
            if last.norm_psi_w0 + last.norm_psit_w0 > 1e12 * initial_scale.max(1e-300) {
                return Err(Error::InstabilityDetected(1e12));
            }
        }
    }
    Ok(WaveTrajectory {
        samples,
        l_values: l_values.to_vec(),
        dt,
    })
}

/// Fitted exponential rate of a norm history over a time window.
///
/// Returns the least-squares slope of ln(norm) against t over the samples
/// falling in [t_lo, t_hi], together with the rms fit residual.
pub fn measured_growth_rate(
    times: &[f64],
    norms: &[f64],
    t_lo: f64,
    t_hi: f64,
) -> Result<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &n) in times.iter().zip(norms) {
        if t >= t_lo && t <= t_hi {
            if n <= 0.0 {
                return Err(Error::DegenerateInput(
                    "nonpositive norm in the fit window".into(),
                ));
            }
            xs.push(t);
            ys.push(n.ln());
        }
    }
    if xs.len() < 10 {
        return Err(Error::DegenerateInput(format!(
            "only {} samples in the fit window, need 10",
            xs.len()
        )));
    }
    let (_a, slope, res) = line_fit(&xs, &ys);
    Ok((slope, res))
}

/// Default fit window: the last third of the run, where transients from
/// non-principal modes have decayed in relative weight.
pub fn late_window(t_end: f64) -> (f64, f64) {
    (t_end * 2.0 / 3.0, t_end)
}

/// One sampled record of a first-order linearized run.
#[derive(Debug, Clone)]
pub struct LinearSample {
    pub t: f64,
    pub norm_phi_v0: f64,
    pub norm_psi_w0: f64,
    /// Linearized energy 4pi int [(4pi/15) rho0^{-4/5} Phi^2 + rho0 Psi^2] r^2 dr.
    pub e00_lin: f64,
}

/// Evolve the first-order pair (Phi, Psi) with a classical four-stage
/// explicit step, velocity pinned at both boundary nodes.
pub fn evolve_first_order(
    ss: &SteadyState,
    init: &LinearState,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<(Vec<LinearSample>, LinearState)> {
    let grid = &init.psi.grid;
    let n = grid.len();
    let stride = stride.max(1);
    let mut phi = init.phi_lin.values.clone();
    let mut psi = init.psi.values.clone();
    psi[0] = 0.0;
    psi[n - 1] = 0.0;
    let steps = (t_end / dt).ceil() as usize;
    let rhs = |phi: &Vec<f64>, psi: &Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        let state = LinearState {
            t: 0.0,
            psi: GridFunction {
                grid: Arc::clone(grid),
                values: psi.clone(),
            },
            psi_t: GridFunction::zeros(grid),
            phi_lin: GridFunction {
                grid: Arc::clone(grid),
                values: phi.clone(),
            },
        };
        let (dphi, dpsi) = linear_rhs(&state, ss);
        let mut dpsi = dpsi.values;
        dpsi[0] = 0.0;
        dpsi[n - 1] = 0.0;
        (dphi.values, dpsi)
    };
    let e00_lin = |phi: &[f64], psi: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let r = grid.nodes[i];
            let rho = ss.rho0.values[i];
            s += grid.weights[i]
                * r
                * r
                * (A_GAMMA * rho.powf(-0.8) * phi[i] * phi[i] + rho * psi[i] * psi[i]);
        }
        4.0 * PI * s
    };
    let mut samples = Vec::new();
    let record = |t: f64, phi: &Vec<f64>, psi: &Vec<f64>, out: &mut Vec<LinearSample>| {
        let phi_f = GridFunction {
            grid: Arc::clone(grid),
            values: phi.clone(),
        };
        let psi_f = GridFunction {
            grid: Arc::clone(grid),
            values: psi.clone(),
        };
        out.push(LinearSample {
            t,
            norm_phi_v0: weighted_norm(&phi_f, Weight::V0),
            norm_psi_w0: weighted_norm(&psi_f, Weight::W0),
            e00_lin: e00_lin(phi, psi),
        });
    };
    record(0.0, &phi, &psi, &mut samples);
    for step in 1..=steps {
        let (k1p, k1u) = rhs(&phi, &psi);
        let half = |a: &Vec<f64>, k: &Vec<f64>, h: f64| -> Vec<f64> {
            a.iter().zip(k).map(|(x, d)| x + h * d).collect()
        };
        let (k2p, k2u) = rhs(&half(&phi, &k1p, 0.5 * dt), &half(&psi, &k1u, 0.5 * dt));
        let (k3p, k3u) = rhs(&half(&phi, &k2p, 0.5 * dt), &half(&psi, &k2u, 0.5 * dt));
        let (k4p, k4u) = rhs(&half(&phi, &k3p, dt), &half(&psi, &k3u, dt));
        for i in 0..n {
            phi[i] += dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
            psi[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
        }
        if step % stride == 0 || step == steps {
            record(step as f64 * dt, &phi, &psi, &mut samples);
        }
    }
    let final_state = LinearState {
        t: steps as f64 * dt,
        psi: GridFunction {
            grid: Arc::clone(grid),
            values: psi,
        },
        psi_t: GridFunction::zeros(grid),
        phi_lin: GridFunction {
            grid: Arc::clone(grid),
            values: phi,
        },
    };
    Ok((samples, final_state))
}
