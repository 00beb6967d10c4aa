//! Symmetrizer-weighted energies and related diagnostics.
//!
//! For each weight index l <= 0 the instant energy sums squared temporal
//! derivatives against the symmetrizer pair
//! ((4pi/15)(rho0+sigma)^{-4/5+l}, (rho0+sigma)^{1+l}):
//!
//!   E_l^j = int [ (4pi/15) rho^{-4/5+l} (dt^j sigma)^2
//!               + rho^{1+l} (dt^j u)^2 ] dx,      dx = 4 pi r^2 dr,
//!
//! and the total energy adds spatial and mixed derivatives with the
//! exponent shift +i/5 per spatial order.  First time derivatives come
//! exactly from the flow's right-hand side; second and third use
//! second-order backward differences of stored first-derivative levels.

use crate::gravity::potential_gradient;
use crate::grid::{cumulative, ddr, GridFunction};
use crate::nonlinear::{nonlinear_rhs, FluidState};
use crate::steady::{SteadyState, A_GAMMA, ENTROPY_A};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::sync::Arc;

/// The diagonal symmetrizer pair sampled on the grid for one weight index.
#[derive(Debug)]
pub struct SymmetrizerWeights {
    pub l: f64,
    /// (4pi/15) (rho0+sigma)^{-4/5+l} at each node.
    pub density_weight: Vec<f64>,
    /// (rho0+sigma)^{1+l} at each node.
    pub velocity_weight: Vec<f64>,
}

impl SymmetrizerWeights {
    pub fn build(state: &FluidState, ss: &SteadyState, l: f64) -> Self {
        let n = ss.grid.len();
        let mut dw = vec![0.0; n];
        let mut vw = vec![0.0; n];
        for i in 0..n {
            let rho = ss.rho0.values[i] + state.sigma.values[i];
            dw[i] = A_GAMMA * rho.powf(-0.8 + l);
            vw[i] = rho.powf(1.0 + l);
        }
        Self {
            l,
            density_weight: dw,
            velocity_weight: vw,
        }
    }
}

/// A short history of states and their exact first time derivatives at a
/// uniform stride, enough to difference out second and third derivatives.
#[derive(Debug)]
pub struct TimeLevels {
    /// Uniform spacing between stored levels.
    pub stride_dt: f64,
    /// Most recent level last.
    levels: Vec<Level>,
}

#[derive(Debug)]
struct Level {
    t: f64,
    sigma: Vec<f64>,
    u: Vec<f64>,
    sigma_t: Vec<f64>,
    u_t: Vec<f64>,
}

impl TimeLevels {
    pub fn new(stride_dt: f64) -> Self {
        Self {
            stride_dt,
            levels: Vec::new(),
        }
    }

    /// Record a state; the first derivatives are evaluated exactly.
    pub fn push(&mut self, state: &FluidState, ss: &SteadyState) -> Result<()> {
        let (st, ut) = nonlinear_rhs(state, ss)?;
        self.levels.push(Level {
            t: state.t,
            sigma: state.sigma.values.clone(),
            u: state.u.values.clone(),
            sigma_t: st.values,
            u_t: ut.values,
        });
        if self.levels.len() > 4 {
            self.levels.remove(0);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn current_time(&self) -> f64 {
        self.levels.last().map(|l| l.t).unwrap_or(0.0)
    }

    pub fn current_state(&self, ss: &SteadyState) -> FluidState {
        let l = self.levels.last().expect("no stored levels");
        FluidState {
            t: l.t,
            sigma: GridFunction {
                grid: Arc::clone(&ss.grid),
                values: l.sigma.clone(),
            },
            u: GridFunction {
                grid: Arc::clone(&ss.grid),
                values: l.u.clone(),
            },
        }
    }

    /// j-th time derivative of (sigma, u) at the newest level.
    /// j = 0 and 1 are exact; j = 2, 3 difference the stored sigma_t/u_t.
    pub fn time_derivative(&self, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.levels.len();
        let need = match j {
            0 | 1 => 1,
            2 => 3,
            3 => 4,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "time derivative order {j} > 3"
                )))
            }
        };
        if m < need {
            return Err(Error::InsufficientHistory { need, have: m });
        }
        let cur = &self.levels[m - 1];
        let h = self.stride_dt;
        let combine = |field: fn(&Level) -> &Vec<f64>, coeffs: &[f64], scale: f64| -> Vec<f64> {
            let n = cur.sigma.len();
            let mut out = vec![0.0; n];
            for (k, &c) in coeffs.iter().enumerate() {
                let lev = field(&self.levels[m - 1 - k]);
                for i in 0..n {
                    out[i] += c * lev[i];
                }
            }
            out.iter_mut().for_each(|v| *v *= scale);
            out
        };
        match j {
            0 => Ok((cur.sigma.clone(), cur.u.clone())),
            1 => Ok((cur.sigma_t.clone(), cur.u_t.clone())),
            2 => Ok((
                combine(|l| &l.sigma_t, &[3.0, -4.0, 1.0], 1.0 / (2.0 * h)),
                combine(|l| &l.u_t, &[3.0, -4.0, 1.0], 1.0 / (2.0 * h)),
            )),
            _ => Ok((
                combine(|l| &l.sigma_t, &[2.0, -5.0, 4.0, -1.0], 1.0 / (h * h)),
                combine(|l| &l.u_t, &[2.0, -5.0, 4.0, -1.0], 1.0 / (h * h)),
            )),
        }
    }
}

fn weighted_integral(ss: &SteadyState, dw: &[f64], vw: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let grid = &ss.grid;
    let mut s = 0.0;
    for i in 0..grid.len() {
        let r = grid.nodes[i];
        s += grid.weights[i] * r * r * (dw[i] * a[i] * a[i] + vw[i] * b[i] * b[i]);
    }
    4.0 * PI * s
}

/// Instant energies E_l^0 .. E_l^{j_max} at the newest stored level.
pub fn instant_energy(
    levels: &TimeLevels,
    ss: &SteadyState,
    l: f64,
    j_max: usize,
) -> Result<Vec<f64>> {
    if j_max > 3 {
        return Err(Error::InvalidArgument(format!("j_max = {j_max} > 3")));
    }
    let state = levels.current_state(ss);
    let w = SymmetrizerWeights::build(&state, ss, l);
    let mut out = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let (ds, du) = levels.time_derivative(j)?;
        out.push(weighted_integral(
            ss,
            &w.density_weight,
            &w.velocity_weight,
            &ds,
            &du,
        ));
    }
    Ok(out)
}

/// The full total-energy table Etilde_l^{j,i} for 0 <= i <= j <= j_max.
///
/// Entry (j, i) applies i discrete radial derivatives to the (j-i)-th time
/// derivative and shifts both weight exponents by +i/5.  The i = 0 column
/// is produced by the same evaluation as [`instant_energy`], so
/// Etilde_l^{j,0} = E_l^j holds identically.
pub fn total_energy(
    levels: &TimeLevels,
    ss: &SteadyState,
    l: f64,
    j_max: usize,
) -> Result<Vec<Vec<f64>>> {
    if j_max > 3 {
        return Err(Error::InvalidArgument(format!("j_max = {j_max} > 3")));
    }
    let grid = &ss.grid;
    let state = levels.current_state(ss);
    let mut table = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let mut row = Vec::with_capacity(j + 1);
        for i in 0..=j {
            let (mut ds, mut du) = levels.time_derivative(j - i)?;
            for _ in 0..i {
                ds = ddr(&GridFunction {
                    grid: Arc::clone(grid),
                    values: ds,
                })
                .values;
                du = ddr(&GridFunction {
                    grid: Arc::clone(grid),
                    values: du,
                })
                .values;
            }
            let shift = i as f64 / 5.0;
            let n = grid.len();
            let mut dw = vec![0.0; n];
            let mut vw = vec![0.0; n];
            for idx in 0..n {
                let rho = ss.rho0.values[idx] + state.sigma.values[idx];
                dw[idx] = A_GAMMA * rho.powf(-0.8 + l + shift);
                vw[idx] = rho.powf(1.0 + l + shift);
            }
            row.push(weighted_integral(ss, &dw, &vw, &ds, &du));
        }
        table.push(row);
    }
    Ok(table)
}

/// Physical energy of the full flow rho = rho0 + sigma:
///
///   E = 4pi int [ (1/2) rho u^2 + 5 A rho^{6/5} ] r^2 dr
///     + (1/2) 4pi int rho Phi r^2 dr,
///
/// with Phi integrated inward from the monopole closure -m(R_max)/R_max.
pub fn physical_energy(state: &FluidState, ss: &SteadyState) -> f64 {
    let grid = &ss.grid;
    let n = grid.len();
    let rho_total = GridFunction {
        grid: Arc::clone(grid),
        values: (0..n)
            .map(|i| ss.rho0.values[i] + state.sigma.values[i])
            .collect(),
    };
    let pg = potential_gradient(&rho_total);
    let cum = cumulative(&pg.phi_r);
    let m_total = 4.0 * PI * pg.enclosed.values[n - 1];
    let phi_outer = -m_total / grid.r_max;
    let mut s = 0.0;
    for i in 0..n {
        let r = grid.nodes[i];
        let rho = rho_total.values[i];
        let phi = phi_outer - (cum.values[n - 1] - cum.values[i]);
        s += grid.weights[i]
            * r
            * r
            * (0.5 * rho * state.u.values[i] * state.u.values[i]
                + 5.0 * ENTROPY_A * rho.powf(1.2)
                + 0.5 * rho * phi);
    }
    4.0 * PI * s
}

/// The six max-norm smallness quantities
/// |sigma/rho|, |sigma_t/rho|, |sigma_r/rho^{9/10}|, |u/rho^{1/10}|,
/// |u_t/rho^{1/10}|, |u_r| with rho = rho0 + sigma.
pub fn smallness_monitor(state: &FluidState, ss: &SteadyState) -> Result<[f64; 6]> {
    let (st, ut) = nonlinear_rhs(state, ss)?;
    let ds = ddr(&state.sigma);
    let du = ddr(&state.u);
    let n = ss.grid.len();
    let mut sup = [0.0f64; 6];
    for i in 0..n {
        let rho = ss.rho0.values[i] + state.sigma.values[i];
        sup[0] = sup[0].max((state.sigma.values[i] / rho).abs());
        sup[1] = sup[1].max((st.values[i] / rho).abs());
        sup[2] = sup[2].max((ds.values[i] / rho.powf(0.9)).abs());
        sup[3] = sup[3].max((state.u.values[i] / rho.powf(0.1)).abs());
        sup[4] = sup[4].max((ut.values[i] / rho.powf(0.1)).abs());
        sup[5] = sup[5].max(du.values[i].abs());
    }
    Ok(sup)
}

/// Default smallness threshold for the total-energy triple in the
/// [`EnergyReport`] flag.
pub const THETA1_DEFAULT: f64 = 1e-2;

/// All weighted energies of one time slice: the instant family E_l^j, the
/// total tables Etilde_l^{j,i}, the physical energy, and the smallness
/// suprema with the triple-sum flag.
#[derive(Debug)]
pub struct EnergyReport {
    pub t: f64,
    pub l_values: Vec<f64>,
    /// instant[l_index][j] = E_l^j, 0 <= j <= 3.
    pub instant: Vec<Vec<f64>>,
    /// total[l_index][j][i] = Etilde_l^{j,i}, 0 <= i <= j <= 3.
    pub total: Vec<Vec<Vec<f64>>>,
    pub physical: f64,
    pub smallness: [f64; 6],
    /// Whether Etilde_{-6/5} + Etilde_{-7/5} + Etilde_{-8/5} <= theta1.
    pub theta1_check: bool,
}

/// The weight-index grid of the standard report: a 3/10-spaced chain from
/// 0 down to -3 merged with the smallness triple {-6/5, -7/5, -8/5}.
pub fn report_l_grid() -> Vec<f64> {
    let mut ls: Vec<f64> = (0..=10).map(|k| (-(3 * k as i64)) as f64 / 10.0).collect();
    for l in [-1.4, -1.6] {
        ls.push(l);
    }
    ls.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ls
}

/// Evaluate every energy diagnostic at the newest stored level.
pub fn energy_report(
    levels: &TimeLevels,
    ss: &SteadyState,
    l_values: &[f64],
    theta1: f64,
) -> Result<EnergyReport> {
    let state = levels.current_state(ss);
    let mut instant = Vec::with_capacity(l_values.len());
    let mut total = Vec::with_capacity(l_values.len());
    for &l in l_values {
        instant.push(instant_energy(levels, ss, l, 3)?);
        total.push(total_energy(levels, ss, l, 3)?);
    }
    let mut triple = 0.0;
    for &l in &[-1.2, -1.4, -1.6] {
        let table = total_energy(levels, ss, l, 3)?;
        triple += table.iter().flat_map(|row| row.iter()).sum::<f64>();
    }
    Ok(EnergyReport {
        t: levels.current_time(),
        l_values: l_values.to_vec(),
        instant,
        total,
        physical: physical_energy(&state, ss),
        smallness: smallness_monitor(&state, ss)?,
        theta1_check: triple <= theta1,
    })
}

/// Result of one weighted interpolation-inequality evaluation.
#[derive(Debug, Clone, Copy)]
pub struct GnCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// lhs/rhs, defined as 0 when both sides vanish.
    pub ratio: f64,
}

/// Weighted interpolation check with weight family (1+r^2)^e:
///
///   lhs = int (1+r^2)^k f^4 r^2 dr
///   rhs = (int (1+r^2)^a f_r^2 r^2 dr)^{3/2} (int (1+r^2)^b f^2 r^2 dr)^{1/2}
///       + (int (1+r^2)^a f^2 r^2 dr)^{3/2} (int (1+r^2)^b f^2 r^2 dr)^{1/2}
///
/// subject to the exponent balance (3/2) a + (1/2) b = k that makes both
/// sides carry the same weight degree.
pub fn gn_check(f: &GridFunction, k: f64, alpha: f64, beta: f64) -> Result<GnCheck> {
    if (1.5 * alpha + 0.5 * beta - k).abs() > 1e-12 {
        return Err(Error::ExponentConstraint(format!(
            "(3/2){alpha} + (1/2){beta} != {k}"
        )));
    }
    let grid = &f.grid;
    let df = ddr(f);
    let mut lhs = 0.0;
    let mut grad2 = 0.0;
    let mut fa2 = 0.0;
    let mut fb2 = 0.0;
    for i in 0..grid.len() {
        let r = grid.nodes[i];
        let u = 1.0 + r * r;
        let wght = grid.weights[i] * r * r;
        let f2 = f.values[i] * f.values[i];
        lhs += wght * u.powf(k) * f2 * f2;
        grad2 += wght * u.powf(alpha) * df.values[i] * df.values[i];
        fa2 += wght * u.powf(alpha) * f2;
        fb2 += wght * u.powf(beta) * f2;
    }
    let rhs = grad2.powf(1.5) * fb2.sqrt() + fa2.powf(1.5) * fb2.sqrt();
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(GnCheck { lhs, rhs, ratio })
}
