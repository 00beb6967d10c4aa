//! Acceptance suite: the ten quantitative gates of the laboratory, one
//! pass/fail line each.  Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; the test fails if any criterion fails.

use eplab_core::eigen::{
    assemble_pencil, largest_eigenpair, moment_table, rayleigh_quotient, sign_definite,
    weighted_growth_bound, EigenPair,
};
use eplab_core::energy::{gn_check, instant_energy, physical_energy, total_energy, TimeLevels};
use eplab_core::grid::{make_grid, GridFunction, Stretch};
use eplab_core::linalg::line_fit;
use eplab_core::linear::{
    evolve_first_order, evolve_wave, late_window, measured_growth_rate, stable_dt, LinearState,
};
use eplab_core::nonlinear::{evolve, seed_initial_data, EvolveOptions, FluidState};
use eplab_core::probes::{gn_lattice_bound, ProbeSuite};
use eplab_core::steady::{build_steady_state, SteadyState};
use std::f64::consts::PI;
use std::time::Instant;

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
    seconds: f64,
    budget: Option<f64>,
}

fn solve(r_max: f64, n: usize) -> (SteadyState, EigenPair) {
    let g = make_grid(r_max, n, Stretch::Default).unwrap();
    let ss = build_steady_state(&g);
    let pencil = assemble_pencil(&ss).unwrap();
    let pair = largest_eigenpair(&pencil, &ss).unwrap();
    (ss, pair)
}

/// Node budget for a doubled box at matched nodes-per-length.
fn doubled_box_n(r_max: f64, n: usize) -> usize {
    let ratio = ((2.0 * r_max / 5.0).ln() / (r_max / 5.0).ln()).max(1.0);
    (n as f64 * ratio).ceil() as usize
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// 1. Trial-function anchor at R_max = 200, N = 4000.
fn criterion1() -> (bool, String) {
    let g = make_grid(200.0, 4000, Stretch::Default).unwrap();
    let ss = build_steady_state(&g);
    let psi = GridFunction::from_fn(&g, |r| r.sqrt());
    let (q, i) = rayleigh_quotient(&psi, &ss).unwrap();
    let q_ok = rel(q, 5.0 / 48.0) < 1e-3;

    // the I integrand decays like r^-2, so at R = 200 the truncated
    // antiderivative is the honest reference; the infinite-domain constant
    // 5/(2pi) is certified on a box large enough to hold its tail
    let u: f64 = 1.0 + 200.0f64 * 200.0;
    let i_oracle_200 = 15.0 / (4.0 * PI) * (2.0 / 3.0 - u.powf(-0.5) + u.powf(-1.5) / 3.0);
    let i_trunc_ok = rel(i, i_oracle_200) < 1e-3;

    let g2 = make_grid(2000.0, 20000, Stretch::Default).unwrap();
    let ss2 = build_steady_state(&g2);
    let psi2 = GridFunction::from_fn(&g2, |r| r.sqrt());
    let (q2, i2) = rayleigh_quotient(&psi2, &ss2).unwrap();
    let i_inf_ok = rel(i2, 5.0 / (2.0 * PI)) < 1e-3;
    let q2_ok = rel(q2, 5.0 / 48.0) < 1e-3;

    // hence mu0 >= pi/24; Q(sqrt r) > 0 is the sign that drives the bound.
    // An antiderivative convention that doubles both integrals would print
    // 23/8 - 8/3 here instead; the quadrature confirms 5/48.
    let (_ss, pair) = solve(200.0, 4000);
    let bound_ok = pair.mu0 >= PI / 24.0 && q > 0.0 && q / i <= pair.mu0;
    let ok = q_ok && i_trunc_ok && i_inf_ok && q2_ok && bound_ok;
    (
        ok,
        format!(
            "Q = {q:.6} (5/48 = {:.6}), I(200) = {i:.6} (truncated oracle {i_oracle_200:.6}), \
             I(2000) = {i2:.6} (5/(2pi) = {:.6}), mu0 = {:.6} >= pi/24 = {:.6}",
            5.0 / 48.0,
            5.0 / (2.0 * PI),
            pair.mu0,
            PI / 24.0
        ),
    )
}

// 2. Eigensolve convergence: Richardson order, box doubling, residual,
//    nodelessness, origin fit.
fn criterion2() -> (bool, String) {
    let mu: Vec<f64> = [1000usize, 2000, 4000]
        .iter()
        .map(|&n| solve(100.0, n).1.mu0)
        .collect();
    let d1 = (mu[0] - mu[1]).abs();
    let d2 = (mu[1] - mu[2]).abs();
    let order = (d1 / d2).log2();
    let order_ok = (1.7..=2.3).contains(&order);
    let four_digits_ok = d2 / mu[2] <= 1e-4;

    let (_, pair) = solve(100.0, 2000);
    let n2 = doubled_box_n(100.0, 2000);
    let (_, pair_big) = solve(200.0, n2);
    let box_ok = rel(pair_big.mu0, pair.mu0) <= 1e-4;
    let residual_ok = pair.residual_norm <= 1e-8;
    let g = &pair.psi0.grid;
    let x: Vec<f64> = pair.psi0.values[1..g.len() - 1].to_vec();
    let nodeless_ok = sign_definite(&x);

    // origin fit psi0/r = a + b r^2 over the first 8 interior nodes;
    // every deviation from a is bounded by C r^2 with C from the fit
    let xs: Vec<f64> = (1..=8).map(|i| g.nodes[i] * g.nodes[i]).collect();
    let ys: Vec<f64> = (1..=8).map(|i| pair.psi0.values[i] / g.nodes[i]).collect();
    let (a, b, rms) = line_fit(&xs, &ys);
    // the bound carries the fit's own rms as floor; a contamination by the
    // second indicial root (psi ~ r^-2) would overshoot it by orders
    let c_bound = 2.0 * b.abs();
    let fit_ok = (0..8).all(|k| (ys[k] - a).abs() <= c_bound * xs[k] + 4.0 * rms);

    let ok = order_ok && four_digits_ok && box_ok && residual_ok && nodeless_ok && fit_ok;
    (
        ok,
        format!(
            "mu0 = {:.8}, Richardson order {order:.2}, N-doubling shift {:.2e}, \
             box-doubling shift {:.2e}, residual {:.1e}, origin fit |psi0/r - {a:.4}| <= {c_bound:.3} r^2 + {:.1e}",
            mu[2],
            d2 / mu[2],
            rel(pair_big.mu0, pair.mu0),
            pair.residual_norm,
            4.0 * rms
        ),
    )
}

// 3. Hydrostatic balance: quadrature-residual refinement and steady
//    persistence in the nonlinear solver.
fn criterion3() -> (bool, String) {
    let mut errs = Vec::new();
    for &n in &[1000usize, 2000, 4000] {
        let g = make_grid(100.0, n, Stretch::Default).unwrap();
        let ss = build_steady_state(&g);
        errs.push(ss.hydrostatic_residual(true).max_abs());
    }
    let (r1, r2) = (errs[0] / errs[1], errs[1] / errs[2]);
    let refine_ok = r1 >= 3.5 && r2 >= 3.5;

    let g = make_grid(100.0, 2000, Stretch::Default).unwrap();
    let ss = build_steady_state(&g);
    let init = FluidState {
        t: 0.0,
        sigma: GridFunction::zeros(&g),
        u: GridFunction::zeros(&g),
    };
    let opts = EvolveOptions {
        t_max: 10.0,
        stride: 500,
        ..Default::default()
    };
    let traj = evolve(&init, &ss, &opts).unwrap();
    let drift = traj.final_state.sigma.max_abs();
    let persist_ok = drift <= 1e-10 && traj.guard_tripped.is_none();
    (
        refine_ok && persist_ok,
        format!(
            "residual ratios {r1:.2}, {r2:.2} (need >= 3.5); max|sigma(t=10)| = {drift:.2e}"
        ),
    )
}

// 4. Sharp linear rate: eigenmode fit within 1%, dominance over 20 random
//    seeds in W0 and W_l, weighted eigenvalues below mu0.
fn criterion4() -> (bool, String) {
    let g = make_grid(100.0, 2000, Stretch::Default).unwrap();
    let ss = build_steady_state(&g);
    let pencil = assemble_pencil(&ss).unwrap();
    let pair = largest_eigenpair(&pencil, &ss).unwrap();
    let lam = pair.sqrt_mu0();
    let dt = stable_dt(&pencil);
    let (lo, hi) = late_window(8.0);

    let psi_t0 = GridFunction::new(
        &g,
        pair.psi0.values.iter().map(|v| lam * v).collect(),
    )
    .unwrap();
    let init = LinearState {
        t: 0.0,
        psi: pair.psi0.clone(),
        psi_t: psi_t0,
        phi_lin: GridFunction::zeros(&g),
    };
    let traj = evolve_wave(&pencil, &init, 8.0, dt, 8, &[]).unwrap();
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let norms: Vec<f64> = traj.samples.iter().map(|s| s.norm_psit_w0).collect();
    let (rate, _) = measured_growth_rate(&times, &norms, lo, hi).unwrap();
    let eigen_ok = (rate - lam).abs() / lam < 0.01;

    let mut probes = ProbeSuite::new(2024);
    let mut worst_w0 = f64::NEG_INFINITY;
    let mut worst_wl = f64::NEG_INFINITY;
    for _ in 0..20 {
        let psi = probes.velocity_profile(&g);
        let init = LinearState {
            t: 0.0,
            psi,
            psi_t: GridFunction::zeros(&g),
            phi_lin: GridFunction::zeros(&g),
        };
        let traj = evolve_wave(&pencil, &init, 8.0, dt, 8, &[-1.0, -2.0]).unwrap();
        let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        let w0: Vec<f64> = traj.samples.iter().map(|s| s.norm_psit_w0).collect();
        let (r0, _) = measured_growth_rate(&times, &w0, lo, hi).unwrap();
        worst_w0 = worst_w0.max(r0);
        for li in 0..2 {
            let wl: Vec<f64> = traj.samples.iter().map(|s| s.norms_wl[li]).collect();
            let (rl, _) = measured_growth_rate(&times, &wl, lo, hi).unwrap();
            worst_wl = worst_wl.max(rl);
        }
    }
    let dominance_ok = worst_w0 <= lam * 1.01 && worst_wl <= lam * 1.01;

    let mu_m1 = weighted_growth_bound(&pencil, &ss, -1.0, 1e-3).unwrap();
    let mu_m2 = weighted_growth_bound(&pencil, &ss, -2.0, 1e-3).unwrap();
    let weighted_ok = mu_m1 < pair.mu0 && mu_m2 < pair.mu0;
    (
        eigen_ok && dominance_ok && weighted_ok,
        format!(
            "eigenmode rate {rate:.6} vs sqrt(mu0) {lam:.6}; max seed rate W0 {worst_w0:.6}, \
             W_l {worst_wl:.6} (bound {:.6}); mu_-1 = {mu_m1:.6}, mu_-2 = {mu_m2:.6} < mu0",
            lam * 1.01
        ),
    )
}

// 5. Escape-time law: slope of T vs ln(1/delta) within 10% of 1/sqrt(mu0),
//    no guard trips before crossing, mass defect <= 1e-12 throughout.
fn criterion5() -> (bool, String) {
    let (ss, pair) = solve(100.0, 2000);
    let lam = pair.sqrt_mu0();
    let deltas = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
    let theta = 1e-2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut worst_mass: f64 = 0.0;
    let mut guard_trips = 0;
    for &delta in &deltas {
        let init = seed_initial_data(&pair, delta, &ss).unwrap();
        let opts = EvolveOptions {
            cfl: 0.8,
            t_max: 40.0,
            stride: 50,
            theta: Some(theta),
            ..Default::default()
        };
        let traj = evolve(&init, &ss, &opts).unwrap();
        if traj.guard_tripped.is_some() {
            guard_trips += 1;
        }
        for s in &traj.samples {
            worst_mass = worst_mass.max(s.mass_defect);
        }
        if let Some(t) = traj.crossing {
            xs.push((1.0 / delta).ln());
            ys.push(t);
        }
    }
    let all_crossed = xs.len() == deltas.len();
    let (_b, slope, _res) = line_fit(&xs, &ys);
    let slope_ok = (slope * lam - 1.0).abs() < 0.10;
    // monotone escape across the scan
    let monotone = ys.windows(2).all(|w| w[1] > w[0]);
    let ok = all_crossed && slope_ok && guard_trips == 0 && worst_mass <= 1e-12 && monotone;
    (
        ok,
        format!(
            "slope {slope:.5} vs 1/sqrt(mu0) {:.5} ({:.2}%); guard trips {guard_trips}; \
             max mass defect {worst_mass:.1e}",
            1.0 / lam,
            (slope * lam - 1.0).abs() * 100.0
        ),
    )
}

// 6. Linear/nonlinear consistency at delta = 1e-5 up to t = 3.
fn criterion6() -> (bool, String) {
    let (ss, pair) = solve(100.0, 2000);
    let g = &pair.psi0.grid;
    let lam = pair.sqrt_mu0();
    let delta = 1e-5;
    let init = seed_initial_data(&pair, delta, &ss).unwrap();
    let opts = EvolveOptions {
        t_max: 3.0,
        stride: 20,
        ..Default::default()
    };
    let traj = evolve(&init, &ss, &opts).unwrap();

    // first-order linear track from the same fields
    let lin_init = LinearState {
        t: 0.0,
        psi: init.u.clone(),
        psi_t: GridFunction::zeros(g),
        phi_lin: init.sigma.clone(),
    };
    let dt0 = 0.4 * g.min_width() / eplab_core::steady::A_GAMMA.sqrt();
    let steps = (3.0 / dt0).ceil();
    let dt = 3.0 / steps;
    let (lin_samples, _fin) = evolve_first_order(&ss, &lin_init, 3.0, dt, steps as usize).unwrap();
    let lin_final = lin_samples.last().unwrap();
    let nl_final = traj.samples.last().unwrap();
    let t_match = (nl_final.t - lin_final.t).abs() < 1e-9;
    let ratio = nl_final.sqrt_e00 / lin_final.e00_lin.sqrt();
    let consistency_ok = t_match && (ratio - 1.0).abs() < 0.02;

    // d/dt ln E00 against 2 sqrt(mu0)
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let es: Vec<f64> = traj.samples.iter().map(|s| s.sqrt_e00 * s.sqrt_e00).collect();
    let (rate, _) = measured_growth_rate(&times, &es, 0.5, 3.0).unwrap();
    let rate_ok = (rate - 2.0 * lam).abs() / (2.0 * lam) < 0.02;
    (
        consistency_ok && rate_ok,
        format!(
            "sqrt(E00)_nl / sqrt(E00)_lin at t=3: {ratio:.5}; d/dt ln E00 = {rate:.5} vs 2 sqrt(mu0) = {:.5}",
            2.0 * lam
        ),
    )
}

// 7. Energy bookkeeping identities, physical-energy anchor and drift.
fn criterion7() -> (bool, String) {
    let (ss, pair) = solve(100.0, 2000);
    let g = &pair.psi0.grid;
    let init = seed_initial_data(&pair, 1e-4, &ss).unwrap();
    let opts = EvolveOptions {
        t_max: 1.0,
        stride: 20,
        store_fields: true,
        ..Default::default()
    };
    let traj = evolve(&init, &ss, &opts).unwrap();
    let snaps = &traj.snapshots[traj.snapshots.len() - 4..];
    let mut lv = TimeLevels::new(snaps[1].t - snaps[0].t);
    for s in snaps {
        let st = FluidState {
            t: s.t,
            sigma: GridFunction::new(g, s.sigma.clone()).unwrap(),
            u: GridFunction::new(g, s.u.clone()).unwrap(),
        };
        lv.push(&st, &ss).unwrap();
    }
    // the l-grid of the report: {0, -0.3, ..., -3.0} plus the smallness triple
    let mut l_grid: Vec<f64> = (0..=10).map(|k| -0.3 * k as f64).collect();
    l_grid.extend([-1.2, -1.4, -1.6]);
    let mut identities_ok = true;
    for &l in &l_grid {
        let e = instant_energy(&lv, &ss, l, 3).unwrap();
        let t = total_energy(&lv, &ss, l, 3).unwrap();
        let identical = (0..=3).all(|j| t[j][0] == e[j]);
        let e_sum: f64 = e.iter().sum();
        let t_sum: f64 = t.iter().flat_map(|r| r.iter()).sum();
        identities_ok = identities_ok
            && identical
            && e_sum <= t_sum * (1.0 + 1e-12)
            && e.iter().all(|&x| x >= 0.0);
    }

    let steady = FluidState {
        t: 0.0,
        sigma: GridFunction::zeros(g),
        u: GridFunction::zeros(g),
    };
    let e_base = physical_energy(&steady, &ss);
    let anchor_ok = rel(e_base, PI.powi(3) / 9.0) < 1e-4;

    let run_init = seed_initial_data(&pair, 1e-3, &ss).unwrap();
    let e_start = physical_energy(&run_init, &ss);
    let opts = EvolveOptions {
        t_max: 4.0,
        stride: 1000,
        ..Default::default()
    };
    let run = evolve(&run_init, &ss, &opts).unwrap();
    let e_end = physical_energy(&run.final_state, &ss);
    let drift = (e_end - e_start).abs() / e_start.abs();
    let drift_ok = drift <= 1e-3 && run.guard_tripped.is_none();
    (
        identities_ok && anchor_ok && drift_ok,
        format!(
            "Etilde^(j,0) = E^j identically over {} weights; E(rho0) = {e_base:.6} vs pi^3/9 = {:.6} \
             ({:.1e} rel); drift over t=4 run: {drift:.2e}",
            l_grid.len(),
            PI.powi(3) / 9.0,
            rel(e_base, PI.powi(3) / 9.0)
        ),
    )
}

// 8. Moment bounds: M_n, D_n finite and box-stable for n <= 6.
fn criterion8() -> (bool, String) {
    let (_, pair) = solve(100.0, 2000);
    let rows = moment_table(&pair.psi0, 6).unwrap();
    let n2 = doubled_box_n(100.0, 2000);
    let (_, pair_big) = solve(200.0, n2);
    let rows_big = moment_table(&pair_big.psi0, 6).unwrap();
    let mut ok = true;
    let mut worst = 0.0f64;
    for (a, b) in rows.iter().zip(&rows_big) {
        ok = ok && a.m_n.is_finite() && a.d_n.is_finite();
        let dm = rel(b.m_n, a.m_n);
        let dd = rel(b.d_n, a.d_n);
        worst = worst.max(dm).max(dd);
        ok = ok && dm <= 0.01 && dd <= 0.01;
    }
    (
        ok,
        format!(
            "M_n, D_n finite for n <= 6; worst box-doubling shift {worst:.2e} (bound 1e-2)"
        ),
    )
}

// 9. Weighted interpolation-inequality suite.
fn criterion9() -> (bool, String) {
    let g = make_grid(40.0, 800, Stretch::Default).unwrap();
    let bound = gn_lattice_bound(&g, 0.0, 0.0, 0.0).unwrap();
    let mut probes = ProbeSuite::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = probes.gaussian_bump(&g);
        let c = gn_check(&f, 0.0, 0.0, 0.0).unwrap();
        worst = worst.max(c.ratio);
    }
    let suite_ok = worst <= 2.0 * bound;
    // exact edge cases
    let zero = gn_check(&GridFunction::zeros(&g), 0.0, 0.0, 0.0).unwrap();
    let zero_ok = zero.lhs == 0.0 && zero.rhs == 0.0 && zero.ratio == 0.0;
    let f = GridFunction::from_fn(&g, |r| (-(r - 2.0) * (r - 2.0)).exp());
    let a = gn_check(&f, 0.0, 0.0, 0.0).unwrap();
    let f5 = GridFunction::new(&g, f.values.iter().map(|v| 5.0 * v).collect()).unwrap();
    let b = gn_check(&f5, 0.0, 0.0, 0.0).unwrap();
    let homog_ok = (b.ratio - a.ratio).abs() <= 1e-12 * a.ratio
        && rel(b.lhs, 625.0 * a.lhs) < 1e-12
        && rel(b.rhs, 625.0 * a.rhs) < 1e-12;
    (
        suite_ok && zero_ok && homog_ok,
        format!(
            "max random ratio {worst:.5} <= 2 x lattice bound {:.5}; zero and homogeneity exact",
            2.0 * bound
        ),
    )
}

// 10. Determinism: repeated `check` runs and repeated CSV emissions are
//     byte-identical.
fn criterion10() -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_eplab");
    let tmp = std::env::temp_dir().join(format!("eplab-acc-{}", std::process::id()));
    let run_check = || {
        std::process::Command::new(bin)
            .arg("check")
            .output()
            .expect("failed to run eplab")
    };
    let a = run_check();
    let b = run_check();
    let check_ok = a.status.code() == Some(0)
        && b.status.code() == Some(0)
        && a.stdout == b.stdout
        && !a.stdout.is_empty();

    let run_eigen = |dir: &std::path::Path| {
        let st = std::process::Command::new(bin)
            .args(["--out", dir.to_str().unwrap(), "--n", "600", "eigen"])
            .output()
            .expect("failed to run eplab");
        assert!(st.status.success());
        std::fs::read(dir.join("eigenpair.csv")).unwrap()
    };
    let csv1 = run_eigen(&tmp.join("a"));
    let csv2 = run_eigen(&tmp.join("b"));
    let csv_ok = csv1 == csv2 && !csv1.is_empty();
    let _ = std::fs::remove_dir_all(&tmp);
    (
        check_ok && csv_ok,
        format!(
            "check exit 0 with byte-identical stdout ({} bytes); eigen CSV byte-identical ({} bytes)",
            a.stdout.len(),
            csv1.len()
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: Vec<(usize, fn() -> (bool, String), Option<f64>)> = vec![
        (1, criterion1, Some(5.0)),
        (2, criterion2, Some(30.0)),
        (3, criterion3, None),
        (4, criterion4, Some(120.0)),
        (5, criterion5, Some(600.0)),
        (6, criterion6, None),
        (7, criterion7, None),
        (8, criterion8, None),
        (9, criterion9, None),
        (10, criterion10, None),
    ];
    let mut outcomes = Vec::new();
    for (id, f, budget) in criteria {
        let start = Instant::now();
        let (passed, detail) = f();
        let seconds = start.elapsed().as_secs_f64();
        outcomes.push(Outcome {
            id,
            passed,
            detail,
            seconds,
            budget,
        });
    }
    let mut failed = 0;
    for o in &outcomes {
        let time_ok = o.budget.map(|b| o.seconds < b).unwrap_or(true);
        let ok = o.passed && time_ok;
        if !ok {
            failed += 1;
        }
        let budget = o
            .budget
            .map(|b| format!(" (runtime {:.1}s, budget {b:.0}s)", o.seconds))
            .unwrap_or_else(|| format!(" (runtime {:.1}s)", o.seconds));
        println!(
            "criterion {:2}: {}{budget} - {}",
            o.id,
            if ok { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
