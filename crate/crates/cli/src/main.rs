//! Command-line front door for the instability laboratory.
//!
//! Subcommands: `eigen` (growing-mode solve + CSV), `linear` (wave-equation
//! rate measurement), `nonlinear` (single seeded run), `escape-scan`
//! (amplitude sweep + slope fit), `check` (full invariant suite).
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
//! 3 property-suite failure.

mod config;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use eplab_core::eigen::{assemble_pencil, largest_eigenpair, origin_slope};
use eplab_core::grid::make_grid;
use eplab_core::linalg::{line_fit, slope_stderr};
use eplab_core::linear::{
    evolve_wave, late_window, measured_growth_rate, stable_dt, LinearState,
};
use eplab_core::nonlinear::{escape_time, evolve, seed_initial_data, EvolveOptions};
use eplab_core::report::{fmt_f64, CsvTable};
use eplab_core::steady::build_steady_state;
use eplab_core::{EigenPair, GridFunction, SteadyState};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "eplab", about = "Radial polytrope instability laboratory", version)]
struct Cli {
    /// Path to a key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the random test-function suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Truncation radius override.
    #[arg(long, global = true)]
    rmax: Option<f64>,
    /// Node count override.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the growing mode and export (r, psi0, phi0).
    Eigen,
    /// Evolve the linearized wave equation from the eigenmode seed and fit
    /// the growth rate.
    Linear {
        /// Evolution time.
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Run one seeded nonlinear trajectory.
    Nonlinear {
        /// Seed amplitude.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        cfl: Option<f64>,
    },
    /// Sweep seed amplitudes and fit T_escape against ln(1/delta).
    EscapeScan {
        /// Comma-separated amplitudes (strictly decreasing).
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        cfl: Option<f64>,
    },
    /// Run the deterministic invariant/property suite.
    Check,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match ExperimentConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return 1;
                }
            },
            Err(e) => {
                eprintln!("cannot read config {}: {e}", path.display());
                return 1;
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(rmax) = cli.rmax {
        cfg.r_max = rmax;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return 1;
    }

    let result = match &cli.command {
        Command::Eigen => cmd_eigen(&cfg),
        Command::Linear { tmax } => cmd_linear(&cfg, tmax.unwrap_or(8.0)),
        Command::Nonlinear { delta, tmax, cfl } => cmd_nonlinear(
            &cfg,
            *delta,
            tmax.unwrap_or(cfg.t_max),
            cfl.unwrap_or(cfg.cfl),
        ),
        Command::EscapeScan {
            deltas,
            theta,
            tmax,
            cfl,
        } => {
            let mut cfg = cfg.clone();
            if let Some(list) = deltas {
                match list.split(',').map(|s| s.trim().parse::<f64>()).collect() {
                    Ok(v) => cfg.deltas = v,
                    Err(e) => {
                        eprintln!("config error: cannot parse --deltas: {e}");
                        return 1;
                    }
                }
            }
            if let Some(t) = theta {
                cfg.theta = *t;
            }
            if let Some(t) = tmax {
                cfg.t_max = *t;
            }
            if let Some(c) = cfl {
                cfg.cfl = *c;
            }
            if let Err(e) = cfg.validate() {
                eprintln!("{e}");
                return 1;
            }
            cmd_escape_scan(&cfg)
        }
        Command::Check => return cmd_check(&cfg),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("numerical failure: {e}");
            2
        }
    }
}

fn solve_mode(r_max: f64, n: usize, cfg: &ExperimentConfig) -> eplab_core::Result<(SteadyState, EigenPair)> {
    let grid = make_grid(r_max, n, cfg.stretch)?;
    let ss = build_steady_state(&grid);
    let pencil = assemble_pencil(&ss)?;
    let pair = largest_eigenpair(&pencil, &ss)?;
    Ok((ss, pair))
}

/// Node count giving a doubled box the same nodes-per-length budget.
fn doubled_box_n(r_max: f64, n: usize) -> usize {
    let ratio = ((2.0 * r_max / 5.0).ln() / (r_max / 5.0).ln()).max(1.0);
    (n as f64 * ratio).ceil() as usize
}

fn cmd_eigen(cfg: &ExperimentConfig) -> eplab_core::Result<()> {
    let t0 = Instant::now();
    let (ss, pair) = solve_mode(cfg.r_max, cfg.n, cfg)?;
    let grid = &ss.grid;
    let mut table = CsvTable::new(&["r", "psi0", "phi0"]);
    table.preamble.push(format!(
        "mu0={} sqrt_mu0={} rmax={} n={}",
        fmt_f64(pair.mu0),
        fmt_f64(pair.sqrt_mu0()),
        fmt_f64(cfg.r_max),
        cfg.n
    ));
    for i in 0..grid.len() {
        table.push_row(vec![
            grid.nodes[i],
            pair.psi0.values[i],
            pair.phi0.values[i],
        ]);
    }
    let path = cfg.out_dir.join("eigenpair.csv");
    table.write_to(&path).map_err(io_err)?;

    // truncation insensitivity report at 2 R_max
    let n2 = doubled_box_n(cfg.r_max, cfg.n);
    let (_ss2, pair2) = solve_mode(2.0 * cfg.r_max, n2, cfg)?;
    let fit = origin_slope(&pair.psi0);
    println!("eigen: mu0 = {}", fmt_f64(pair.mu0));
    println!("eigen: sqrt_mu0 = {}", fmt_f64(pair.sqrt_mu0()));
    println!(
        "eigen: lower bound pi/24 = {} (satisfied: {})",
        fmt_f64(PI / 24.0),
        pair.mu0 >= PI / 24.0
    );
    println!("eigen: residual = {:.3e}", pair.residual_norm);
    println!("eigen: origin slope a = {}", fmt_f64(fit.slope));
    println!(
        "eigen: mu0 at 2 R_max = {} (relative shift {:.3e})",
        fmt_f64(pair2.mu0),
        (pair2.mu0 - pair.mu0).abs() / pair.mu0
    );
    println!("eigen: wrote {}", path.display());
    eprintln!("eigen: wall clock {:.3} s", t0.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_linear(cfg: &ExperimentConfig, t_max: f64) -> eplab_core::Result<()> {
    let t0 = Instant::now();
    let grid = make_grid(cfg.r_max, cfg.n, cfg.stretch)?;
    let ss = build_steady_state(&grid);
    let pencil = assemble_pencil(&ss)?;
    let pair = largest_eigenpair(&pencil, &ss)?;
    let lam = pair.sqrt_mu0();
    let psi_t0 = GridFunction {
        grid: Arc::clone(&grid),
        values: pair.psi0.values.iter().map(|v| lam * v).collect(),
    };
    let init = LinearState {
        t: 0.0,
        psi: pair.psi0.clone(),
        psi_t: psi_t0,
        phi_lin: GridFunction::zeros(&grid),
    };
    let dt = cfg.dt_factor * stable_dt(&pencil);
    let stride = ((t_max / dt) as usize / 400).max(1);
    let traj = evolve_wave(&pencil, &init, t_max, dt, stride, &cfg.l_values)?;
    let mut cols = vec![
        "t".to_string(),
        "norm_Psi_W0".to_string(),
        "norm_Psit_W0".to_string(),
        "P_Psi".to_string(),
    ];
    for l in &cfg.l_values {
        cols.push(format!("norm_Psi_Wl_{l}"));
    }
    let mut table = CsvTable {
        columns: cols,
        ..Default::default()
    };
    for s in &traj.samples {
        let mut row = vec![s.t, s.norm_psi_w0, s.norm_psit_w0, s.p_psi];
        row.extend(&s.norms_wl);
        table.rows.push(row);
    }
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let norms: Vec<f64> = traj.samples.iter().map(|s| s.norm_psit_w0).collect();
    let (lo, hi) = late_window(t_max);
    let (rate, res) = measured_growth_rate(&times, &norms, lo, hi)?;
    table.footers.push(format!("rate={}", fmt_f64(rate)));
    table.footers.push(format!("fit_residual={}", fmt_f64(res)));
    table.footers.push(format!("sqrt_mu0={}", fmt_f64(lam)));
    let path = cfg.out_dir.join("linear_trajectory.csv");
    table.write_to(&path).map_err(io_err)?;
    println!("linear: fitted rate = {}", fmt_f64(rate));
    println!("linear: sqrt_mu0 = {}", fmt_f64(lam));
    println!(
        "linear: relative deviation = {:.3e}",
        (rate - lam).abs() / lam
    );
    println!("linear: wrote {}", path.display());
    eprintln!("linear: wall clock {:.3} s", t0.elapsed().as_secs_f64());
    Ok(())
}

fn write_trajectory_csv(
    traj: &eplab_core::nonlinear::Trajectory,
    path: &Path,
) -> std::io::Result<()> {
    let mut table = CsvTable::new(&[
        "t",
        "sqrtE00",
        "guard_min_ratio",
        "guard_max_ratio",
        "mass_defect",
        "phi_r_at_Rmax",
    ]);
    for s in &traj.samples {
        table.push_row(vec![
            s.t,
            s.sqrt_e00,
            s.guard_min_ratio,
            s.guard_max_ratio,
            s.mass_defect,
            s.phi_r_at_rmax,
        ]);
    }
    if let Some(t) = traj.guard_tripped {
        table.footers.push(format!("guard_tripped_at={}", fmt_f64(t)));
    }
    if let Some(t) = traj.crossing {
        table.footers.push(format!("threshold_crossing={}", fmt_f64(t)));
    }
    table
        .footers
        .push(format!("truncation_flag={}", traj.truncation_flag));
    table.write_to(path)
}

fn cmd_nonlinear(cfg: &ExperimentConfig, delta: f64, t_max: f64, cfl: f64) -> eplab_core::Result<()> {
    let t0 = Instant::now();
    let (ss, pair) = solve_mode(cfg.r_max, cfg.n, cfg)?;
    let init = seed_initial_data(&pair, delta, &ss)?;
    // freeze the step at the initial CFL value so the stored samples sit at
    // a uniform stride for the energy differencing; the guard keeps the
    // sound speed within ~1% of its initial profile
    let dt = eplab_core::nonlinear::cfl_dt(&init, &ss, cfl);
    let opts = EvolveOptions {
        cfl,
        t_max,
        stride: 20,
        theta: Some(cfg.theta),
        filter_coeff: cfg.filter_coeff,
        store_fields: true,
        fixed_dt: Some(dt),
    };
    let traj = evolve(&init, &ss, &opts)?;
    let path = cfg.out_dir.join("nonlinear_trajectory.csv");
    write_trajectory_csv(&traj, &path).map_err(io_err)?;
    let energy_path = cfg.out_dir.join("energy_trajectory.csv");
    write_energy_csv(&traj, &ss, &energy_path)?;
    println!("nonlinear: wrote {}", energy_path.display());
    println!("nonlinear: delta = {}", fmt_f64(delta));
    match traj.crossing {
        Some(t) => println!("nonlinear: threshold crossing at t = {}", fmt_f64(t)),
        None => println!("nonlinear: no threshold crossing by t_max"),
    }
    if let Some(t) = traj.guard_tripped {
        println!("nonlinear: guard tripped at t = {}", fmt_f64(t));
    }
    println!("nonlinear: max sqrt(E00) = {}", fmt_f64(traj.max_sqrt_e00));
    println!("nonlinear: truncation flag = {}", traj.truncation_flag);
    println!("nonlinear: wrote {}", path.display());
    eprintln!("nonlinear: wall clock {:.3} s", t0.elapsed().as_secs_f64());
    Ok(())
}

/// Energy CSV: one row per uniformly spaced sample once enough history is
/// stored for the third time derivatives; columns are t, E_l^j for every
/// (l, j) pair of the standard weight grid, the physical energy, the six
/// smallness suprema, and the triple-sum flag.
fn write_energy_csv(
    traj: &eplab_core::nonlinear::Trajectory,
    ss: &SteadyState,
    path: &Path,
) -> eplab_core::Result<()> {
    use eplab_core::energy::{energy_report, report_l_grid, TimeLevels, THETA1_DEFAULT};
    let l_grid = report_l_grid();
    let mut columns = vec!["t".to_string()];
    for &l in &l_grid {
        for j in 0..=3 {
            columns.push(format!("E_l{l}_j{j}"));
        }
    }
    columns.push("physE".into());
    for name in [
        "sup_sigma_rel",
        "sup_sigma_t_rel",
        "sup_dsigma_w",
        "sup_u_w",
        "sup_u_t_w",
        "sup_du",
    ] {
        columns.push(name.into());
    }
    columns.push("theta1_ok".into());
    let mut table = CsvTable {
        columns,
        ..Default::default()
    };
    let snaps = &traj.snapshots;
    if snaps.len() >= 4 {
        let stride_dt = snaps[1].t - snaps[0].t;
        let grid = &ss.grid;
        let mut levels = TimeLevels::new(stride_dt);
        let mut prev_t: Option<f64> = None;
        for s in snaps {
            // the run may end on a clamped or event step; keep the uniform part
            if let Some(p) = prev_t {
                if (s.t - p - stride_dt).abs() > 1e-9 * stride_dt.max(1e-300) {
                    break;
                }
            }
            prev_t = Some(s.t);
            let state = eplab_core::FluidState {
                t: s.t,
                sigma: GridFunction::new(grid, s.sigma.clone())?,
                u: GridFunction::new(grid, s.u.clone())?,
            };
            levels.push(&state, ss)?;
            if levels.len() < 4 {
                continue;
            }
            let report = energy_report(&levels, ss, &l_grid, THETA1_DEFAULT)?;
            let mut row = vec![report.t];
            for li in 0..l_grid.len() {
                for j in 0..=3 {
                    row.push(report.instant[li][j]);
                }
            }
            row.push(report.physical);
            row.extend(report.smallness);
            row.push(if report.theta1_check { 1.0 } else { 0.0 });
            table.push_row(row);
        }
    }
    table.write_to(path).map_err(io_err)
}

struct ScanOutcome {
    results: Vec<eplab_core::nonlinear::EscapeResult>,
    slope: f64,
    stderr: f64,
    mu0: f64,
}

fn run_scan(
    cfg: &ExperimentConfig,
    r_max: f64,
    n: usize,
) -> eplab_core::Result<ScanOutcome> {
    let (ss, pair) = solve_mode(r_max, n, cfg)?;
    let threads: usize = std::env::var("EPLAB_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
        .max(1);
    let deltas = cfg.deltas.clone();
    let mut slots: Vec<Option<eplab_core::Result<eplab_core::nonlinear::EscapeResult>>> =
        (0..deltas.len()).map(|_| None).collect();
    let ss_ref = &ss;
    let pair_ref = &pair;
    let theta = cfg.theta;
    let t_max = cfg.t_max;
    let cfl = cfg.cfl;
    // independent jobs pulled from a shared counter; every job is
    // single-threaded and deterministic, and results merge in delta order,
    // so output bytes do not depend on the worker count
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let next_ref = &next;
        let deltas_ref = &deltas;
        let mut handles = Vec::new();
        for _ in 0..threads.min(deltas.len()) {
            handles.push(scope.spawn(move || {
                let mut local = Vec::new();
                loop {
                    let i = next_ref.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= deltas_ref.len() {
                        break;
                    }
                    let r = escape_time(pair_ref, ss_ref, deltas_ref[i], theta, t_max, cfl);
                    local.push((i, r));
                }
                local
            }));
        }
        let mut collected = Vec::new();
        for h in handles {
            collected.extend(h.join().expect("scan worker panicked"));
        }
        for (i, r) in collected {
            slots[i] = Some(r);
        }
    });

    let mut results = Vec::with_capacity(deltas.len());
    for slot in slots {
        results.push(slot.expect("scan job missing")?);
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &results {
        if let Some(t) = r.t_escape {
            xs.push((1.0 / r.delta).ln());
            ys.push(t);
        }
    }
    if xs.len() < 2 {
        return Err(eplab_core::Error::ConvergenceFailure(
            "fewer than two escape crossings in the scan".into(),
        ));
    }
    let (_b, slope, _res) = line_fit(&xs, &ys);
    let stderr = slope_stderr(&xs, &ys);
    Ok(ScanOutcome {
        results,
        slope,
        stderr,
        mu0: pair.mu0,
    })
}

fn write_scan_csv(out: &ScanOutcome, path: &Path) -> std::io::Result<()> {
    let mut table = CsvTable::new(&["delta", "T_escape"]);
    for r in &out.results {
        table.push_row(vec![r.delta, r.t_escape.unwrap_or(f64::NAN)]);
    }
    table.footers.push(format!("slope={}", fmt_f64(out.slope)));
    table.footers.push(format!("stderr={}", fmt_f64(out.stderr)));
    table.footers.push(format!("mu0={}", fmt_f64(out.mu0)));
    table.write_to(path)
}

fn cmd_escape_scan(cfg: &ExperimentConfig) -> eplab_core::Result<()> {
    let t0 = Instant::now();
    let scan = run_scan(cfg, cfg.r_max, cfg.n)?;
    let path = cfg.out_dir.join("escape_scan.csv");
    write_scan_csv(&scan, &path).map_err(io_err)?;
    let lam = scan.mu0.sqrt();
    println!("escape-scan: mu0 = {}", fmt_f64(scan.mu0));
    println!(
        "escape-scan: slope = {} +/- {}",
        fmt_f64(scan.slope),
        fmt_f64(scan.stderr)
    );
    println!("escape-scan: 1/sqrt(mu0) = {}", fmt_f64(1.0 / lam));
    println!(
        "escape-scan: relative slope deviation = {:.4e}",
        (scan.slope * lam - 1.0).abs()
    );
    for r in &scan.results {
        let t = r
            .t_escape
            .map(|t| fmt_f64(t))
            .unwrap_or_else(|| "none".into());
        println!(
            "escape-scan: delta = {} T = {} guard_tripped = {} truncation = {}",
            fmt_f64(r.delta),
            t,
            r.guard_tripped,
            r.truncation_flag
        );
    }
    println!("escape-scan: wrote {}", path.display());
    if cfg.truncation_check {
        let n2 = doubled_box_n(cfg.r_max, cfg.n);
        let scan2 = run_scan(cfg, 2.0 * cfg.r_max, n2)?;
        let path2 = cfg.out_dir.join("escape_scan_2rmax.csv");
        write_scan_csv(&scan2, &path2).map_err(io_err)?;
        println!(
            "escape-scan: slope at 2 R_max = {} (shift {:.3e})",
            fmt_f64(scan2.slope),
            (scan2.slope - scan.slope).abs() / scan.slope.abs()
        );
        println!("escape-scan: wrote {}", path2.display());
    }
    eprintln!(
        "escape-scan: wall clock {:.3} s",
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_check(cfg: &ExperimentConfig) -> i32 {
    let t0 = Instant::now();
    let check_cfg = eplab_core::check::CheckConfig {
        r_max: cfg.r_max,
        n: cfg.n.min(1000),
        seed: cfg.seed,
    };
    let results = eplab_core::check::run_all(&check_cfg);
    for r in &results {
        let tag = if r.passed { "ok  " } else { "FAIL" };
        println!("{tag} {:<32} {}", r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "check: {} passed, {} failed",
        results.len() - failed,
        failed
    );
    eprintln!("check: wall clock {:.3} s", t0.elapsed().as_secs_f64());
    if failed == 0 {
        0
    } else {
        3
    }
}

fn io_err(e: std::io::Error) -> eplab_core::Error {
    eplab_core::Error::InvalidArgument(format!("i/o failure: {e}"))
}
