//! Scenario orchestration: wiring configurations into grids, solvers, and
//! runs, and emitting the CSV / snapshot artifacts. All numeric output goes
//! through a 17-significant-digit formatter so reruns are byte-identical.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::sync::OnceLock;

use crate::cell::{self, HomTensor};
use crate::config::RunConfig;
use crate::diag;
use crate::error::{Error, Result};
use crate::grid::PerforatedGrid;
use crate::homog;
use crate::pnp::{
    self, AppPnpParams, DiffusionTensor, PnpSystem, ScaleMode, Trajectory, TransientOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Cell,
    Homog,
    Micro,
    Converge,
    AppPnpSweep,
    Check,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub threads: usize,
    pub allow_incompatible: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: None,
            threads: 1,
            allow_incompatible: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum LogLevel {
    Error,
    Info,
    Debug,
}

fn log_level() -> LogLevel {
    static LEVEL: OnceLock<LogLevel> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("PNP_LOG").as_deref() {
        Ok("debug") => LogLevel::Debug,
        Ok("info") => LogLevel::Info,
        _ => LogLevel::Error,
    })
}

fn info(msg: impl AsRef<str>) {
    if log_level() >= LogLevel::Info {
        eprintln!("[pnp] {}", msg.as_ref());
    }
}

/// 17 significant digits; enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a configuration document and applies the charge-compatibility
/// gate appropriate for the command. With `allow_incompatible` the gate is
/// skipped and downstream runs omit every potential solve.
pub fn parse_config(
    text: &str,
    base_dir: Option<&Path>,
    cmd: Command,
    allow_incompatible: bool,
) -> Result<RunConfig> {
    let cfg = crate::config::parse(text, base_dir)?;
    if allow_incompatible || cfg.species.is_empty() {
        return Ok(cfg);
    }
    let mut gates: Vec<(f64, f64)> = Vec::new();
    match cmd {
        Command::Micro | Command::AppPnpSweep => {
            gates.push(cfg.micro_compatibility(cfg.geometry.epsilon)?);
        }
        Command::Homog => {
            gates.push(cfg.macro_compatibility()?);
        }
        Command::Converge => {
            for &eps in &cfg.converge_epsilons {
                gates.push(cfg.micro_compatibility(eps)?);
            }
            gates.push(cfg.macro_compatibility()?);
        }
        Command::Cell | Command::Check => {}
    }
    for (residual, scale) in gates {
        let tol = 1e-9 * scale;
        if residual.abs() > tol {
            return Err(Error::CompatibilityViolation {
                residual: residual.abs(),
                tol,
            });
        }
    }
    Ok(cfg)
}

/// Runs a subcommand; returns the number of failed checks (nonzero only for
/// `check`).
pub fn orchestrate(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<usize> {
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("config.toml"), &cfg.source_text)?;
    match cmd {
        Command::Cell => {
            run_cell(cfg, &out_dir)?;
            Ok(0)
        }
        Command::Micro => {
            run_micro(cfg, &out_dir, opts)?;
            Ok(0)
        }
        Command::Homog => {
            run_homog(cfg, &out_dir, opts)?;
            Ok(0)
        }
        Command::Converge => {
            run_converge(cfg, &out_dir, opts)?;
            Ok(0)
        }
        Command::AppPnpSweep => {
            run_app_sweep(cfg, &out_dir, opts)?;
            Ok(0)
        }
        Command::Check => run_check(cfg, &out_dir),
    }
}

fn tensor_csv_row(n: usize, ht: &HomTensor) -> String {
    format!(
        "{n},{},{},{},{},{},{},{}\n",
        fmt_f64(ht.a[0][0]),
        fmt_f64(ht.a[0][1]),
        fmt_f64(ht.a[1][0]),
        fmt_f64(ht.a[1][1]),
        fmt_f64(ht.fluid_fraction),
        ht.total_iterations(),
        fmt_f64(ht.max_residual()),
    )
}

const TENSOR_HEADER: &str = "N,A11,A12,A21,A22,fluid_fraction,iterations,residual\n";

fn run_cell(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let mut csv = String::from(TENSOR_HEADER);
    let r = cfg.geometry.cell_resolution;
    let mut ladder: Vec<usize> = [r / 4, r / 2, r]
        .into_iter()
        .filter(|&n| n >= 8 && n % 2 == 0)
        .collect();
    ladder.dedup();
    if cfg.geometry.mask_text.is_some() {
        ladder = vec![r]; // custom masks carry a fixed resolution
    }
    for n in ladder {
        let unit = cfg.unit_cell(n)?;
        let ht = cell::effective_tensor(&unit)?;
        ht.validate()?;
        csv.push_str(&tensor_csv_row(unit.resolution(), &ht));
        info(format!("cell N={n}: A11 = {}", ht.a[0][0]));
    }
    fs::write(out_dir.join("tensor.csv"), csv)?;
    Ok(())
}

fn micro_system(cfg: &RunConfig, grid: Arc<PerforatedGrid>, app: AppPnpParams, solve_potential: bool) -> Result<PnpSystem> {
    let species = cfg.sample_species(&grid)?;
    let eps = grid.epsilon();
    let mut system = PnpSystem::new(
        grid,
        species,
        DiffusionTensor::Identity,
        app,
        cfg.boundary_charge(),
        ScaleMode::Micro { eps },
        None,
        solve_potential,
    )?;
    system.gummel_tol = cfg.solver.gummel_tol;
    Ok(system)
}

fn transient_opts(cfg: &RunConfig) -> TransientOptions {
    TransientOptions {
        t_end: cfg.time.t_end,
        dt: cfg.time.dt,
        output_stride: cfg.time.output_stride,
    }
}

fn run_micro(cfg: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<()> {
    let grid = cfg.micro_grid(cfg.geometry.epsilon)?;
    let system = micro_system(cfg, Arc::clone(&grid), cfg.app, !opts.allow_incompatible)?;
    info(format!(
        "micro run: eps = {}, {} fluid cells",
        grid.epsilon(),
        grid.fluid_cell_count()
    ));
    let traj = pnp::run_transient(&system, &transient_opts(cfg))?;
    write_trajectory(out_dir, &cfg.scenario, &grid, &traj)?;
    Ok(())
}

fn macro_setup(cfg: &RunConfig, solve_potential: bool) -> Result<(Arc<PerforatedGrid>, HomTensor, homog::MacroModel)> {
    let unit = cfg.unit_cell(cfg.geometry.cell_resolution)?;
    let ht = cell::effective_tensor(&unit)?;
    ht.validate()?;
    let grid = cfg.macro_grid()?;
    let species = cfg.sample_species(&grid)?;
    let model = homog::build_macro_model(
        Arc::clone(&grid),
        &ht,
        cfg.boundary_charge(),
        species,
        cfg.app,
        solve_potential,
    )?;
    Ok((grid, ht, model))
}

fn run_homog(cfg: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<()> {
    let (grid, ht, mut model) = macro_setup(cfg, !opts.allow_incompatible)?;
    model.system.gummel_tol = cfg.solver.gummel_tol;
    info(format!(
        "homog run: A11 = {}, |Y^f| = {}",
        ht.a[0][0], ht.fluid_fraction
    ));
    let traj = pnp::run_transient(&model.system, &transient_opts(cfg))?;

    // two-scale consistency of the separable corrector on the final snapshot
    let final_c = &traj.states.last().unwrap().c[0];
    let grad = homog::macro_gradient(final_c, grid.side_cells());
    let max_grad = grad.iter().fold((0.0f64, 0.0f64), |m, g| {
        (m.0.max(g.0.abs()), m.1.max(g.1.abs()))
    });
    let residual = homog::two_scale_model_residual(&ht.cell_solutions, max_grad);
    if residual > 1e-6 {
        return Err(Error::validation(format!(
            "two-scale cell-equation residual {residual} exceeds the discretization tolerance"
        )));
    }

    let mut csv = String::from(TENSOR_HEADER);
    csv.push_str(&tensor_csv_row(cfg.geometry.cell_resolution, &ht));
    fs::write(out_dir.join("tensor.csv"), csv)?;
    write_trajectory(out_dir, &cfg.scenario, &grid, &traj)?;
    Ok(())
}

struct ConvergeRow {
    eps: f64,
    err_c: Vec<f64>,
    err_phi: f64,
    corrected_gradient_error: f64,
    plain_gradient_error: f64,
    pairing_test_value: f64,
}

fn converge_member(
    cfg: &RunConfig,
    eps: f64,
    macro_traj: &Trajectory,
    macro_n: usize,
    ht: &HomTensor,
    solve_potential: bool,
) -> Result<ConvergeRow> {
    let grid = cfg.micro_grid(eps)?;
    let system = micro_system(cfg, Arc::clone(&grid), cfg.app, solve_potential)?;
    let traj = pnp::run_transient(&system, &transient_opts(cfg))?;

    let n_species = cfg.species.len();
    let mut err_c = Vec::with_capacity(n_species);
    for i in 0..n_species {
        let fine: Vec<Vec<f64>> = traj.states.iter().map(|s| s.c[i].clone()).collect();
        let coarse: Vec<Vec<f64>> = macro_traj.states.iter().map(|s| s.c[i].clone()).collect();
        err_c.push(diag::error_l1l2(
            &traj.times,
            &fine,
            &grid,
            &macro_traj.times,
            &coarse,
            macro_n,
        )?);
    }
    let fine_phi: Vec<Vec<f64>> = traj.states.iter().map(|s| s.phi.clone()).collect();
    let coarse_phi: Vec<Vec<f64>> = macro_traj.states.iter().map(|s| s.phi.clone()).collect();
    let err_phi = diag::error_l1l2(
        &traj.times,
        &fine_phi,
        &grid,
        &macro_traj.times,
        &coarse_phi,
        macro_n,
    )?;

    // corrector quality on the potential at the final output time
    let phi_eps = &traj.states.last().unwrap().phi;
    let phi0 = &macro_traj.states.last().unwrap().phi;
    let corr = homog::reconstruct_corrector(phi0, macro_n, &ht.cell_solutions, eps, &grid, false)?;
    let grad_eps = homog::perforated_gradient(&grid, phi_eps);
    let h2 = grid.spacing() * grid.spacing();
    let mut corrected = 0.0;
    let mut plain = 0.0;
    for c in 0..grid.fluid_cell_count() {
        let ge = grad_eps[c];
        let gc = corr.gradient[c];
        let g0 = corr.macro_gradient[c];
        corrected += ((ge.0 - gc.0).powi(2) + (ge.1 - gc.1).powi(2)) * h2;
        plain += ((ge.0 - g0.0).powi(2) + (ge.1 - g0.1).powi(2)) * h2;
    }

    let c_fine = &traj.states.last().unwrap().c[0];
    let pairing = homog::two_scale_pairing(
        c_fine,
        |_, y| (2.0 * std::f64::consts::PI * y.0).sin(),
        eps,
        &grid,
    )?;

    Ok(ConvergeRow {
        eps,
        err_c,
        err_phi,
        corrected_gradient_error: corrected.sqrt(),
        plain_gradient_error: plain.sqrt(),
        pairing_test_value: pairing,
    })
}

fn run_converge(cfg: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<()> {
    let solve_potential = !opts.allow_incompatible;
    let (grid, ht, mut model) = macro_setup(cfg, solve_potential)?;
    model.system.gummel_tol = cfg.solver.gummel_tol;
    let macro_n = grid.side_cells();
    info("converge: running macroscopic reference");
    let macro_traj = pnp::run_transient(&model.system, &transient_opts(cfg))?;

    let mut rows: Vec<ConvergeRow> = Vec::new();
    if opts.threads > 1 {
        let results: Vec<Result<ConvergeRow>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for &eps in &cfg.converge_epsilons {
                let macro_traj = &macro_traj;
                let ht = &ht;
                handles.push(scope.spawn(move || {
                    converge_member(cfg, eps, macro_traj, macro_n, ht, solve_potential)
                }));
            }
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for r in results {
            rows.push(r?);
        }
    } else {
        for &eps in &cfg.converge_epsilons {
            info(format!("converge: micro member eps = {eps}"));
            rows.push(converge_member(cfg, eps, &macro_traj, macro_n, &ht, solve_potential)?);
        }
    }
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));

    let mut csv = String::from("epsilon");
    for i in 0..cfg.species.len() {
        csv.push_str(&format!(",err_l1l2_c{}", i + 1));
    }
    csv.push_str(",err_l1l2_phi,corrected_gradient_error,plain_gradient_error,pairing_test_value\n");
    for row in &rows {
        csv.push_str(&fmt_f64(row.eps));
        for e in &row.err_c {
            csv.push(',');
            csv.push_str(&fmt_f64(*e));
        }
        csv.push_str(&format!(
            ",{},{},{},{}\n",
            fmt_f64(row.err_phi),
            fmt_f64(row.corrected_gradient_error),
            fmt_f64(row.plain_gradient_error),
            fmt_f64(row.pairing_test_value),
        ));
    }
    fs::write(out_dir.join("converge.csv"), csv)?;
    Ok(())
}

fn run_app_sweep(cfg: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<()> {
    let grid = cfg.micro_grid(cfg.geometry.epsilon)?;
    let solve_potential = !opts.allow_incompatible;
    let baseline_sys = micro_system(
        cfg,
        Arc::clone(&grid),
        AppPnpParams { eta: 0.0, p: cfg.app.p },
        solve_potential,
    )?;
    info("app sweep: running eta = 0 baseline");
    let baseline = pnp::run_transient(&baseline_sys, &transient_opts(cfg))?;

    let mut csv = String::from("eta");
    for i in 0..cfg.species.len() {
        csv.push_str(&format!(",err_l1l2_c{}", i + 1));
    }
    csv.push('\n');
    let mut etas = cfg.sweep_etas.clone();
    etas.sort_by(|a, b| b.total_cmp(a));
    for &eta in &etas {
        info(format!("app sweep: eta = {eta}"));
        let sys = micro_system(
            cfg,
            Arc::clone(&grid),
            AppPnpParams { eta, p: cfg.app.p },
            solve_potential,
        )?;
        let traj = pnp::run_transient(&sys, &transient_opts(cfg))?;
        csv.push_str(&fmt_f64(eta));
        for i in 0..cfg.species.len() {
            let mut total = 0.0;
            for j in 1..traj.times.len() {
                let dt = traj.times[j] - traj.times[j - 1];
                let h2 = grid.spacing() * grid.spacing();
                let mut l2 = 0.0;
                for (a, b) in traj.states[j].c[i].iter().zip(&baseline.states[j].c[i]) {
                    l2 += (a - b).powi(2) * h2;
                }
                total += dt * l2.sqrt();
            }
            csv.push(',');
            csv.push_str(&fmt_f64(total));
        }
        csv.push('\n');
    }
    fs::write(out_dir.join("eta_sweep.csv"), csv)?;
    Ok(())
}

// --- trajectory artifacts ---------------------------------------------

fn expand_full(grid: &PerforatedGrid, field: &[f64]) -> Vec<f64> {
    let nx = grid.side_cells();
    let mut full = vec![0.0; nx * nx];
    for (c, &v) in field.iter().enumerate() {
        let (ix, iy) = grid.cell_coords(c);
        full[iy * nx + ix] = v;
    }
    full
}

fn write_snapshot(
    dir: &Path,
    run: &str,
    field: &str,
    step: usize,
    grid: &PerforatedGrid,
    values: &[f64],
    t: f64,
) -> Result<()> {
    let nx = grid.side_cells();
    let full = expand_full(grid, values);
    let mut text = format!("{nx} {nx} {} {}\n", fmt_f64(grid.spacing()), fmt_f64(t));
    for iy in 0..nx {
        let row: Vec<String> = (0..nx).map(|ix| fmt_f64(full[iy * nx + ix])).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    fs::write(dir.join(format!("{run}_{field}_{step}.dat")), text)?;
    Ok(())
}

pub fn write_trajectory(
    dir: &Path,
    run: &str,
    grid: &PerforatedGrid,
    traj: &Trajectory,
) -> Result<()> {
    let mut csv = String::from(
        "t,species,mass,entropy,dirichlet_energy,free_energy,compat_residual,gummel_iters\n",
    );
    for d in &traj.diagnostics {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(d.t),
            d.species + 1,
            fmt_f64(d.mass),
            fmt_f64(d.entropy),
            fmt_f64(d.dirichlet_energy),
            fmt_f64(d.free_energy),
            fmt_f64(d.compat_residual),
            d.gummel_iters,
        ));
    }
    fs::write(dir.join("diagnostics.csv"), csv)?;
    for (k, state) in traj.states.iter().enumerate() {
        let step = traj.steps[k];
        for (i, ci) in state.c.iter().enumerate() {
            write_snapshot(dir, run, &format!("c{}", i + 1), step, grid, ci, state.t)?;
        }
        write_snapshot(dir, run, "phi", step, grid, &state.phi, state.t)?;
    }
    Ok(())
}

// --- check -------------------------------------------------------------

struct DiagRead {
    t: f64,
    species: usize,
    mass: f64,
    entropy: f64,
    dirichlet_energy: f64,
    free_energy: f64,
    compat_residual: f64,
}

fn read_diagnostics(path: &Path) -> Result<Vec<DiagRead>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(Error::validation(format!(
                "diagnostics line {i} has {} columns, expected 8",
                parts.len()
            )));
        }
        let f = |k: usize| -> Result<f64> {
            parts[k]
                .parse()
                .map_err(|_| Error::validation(format!("bad float {:?} on line {i}", parts[k])))
        };
        rows.push(DiagRead {
            t: f(0)?,
            species: parts[1]
                .parse::<usize>()
                .map_err(|_| Error::validation("bad species index".to_string()))?
                - 1,
            mass: f(2)?,
            entropy: f(3)?,
            dirichlet_energy: f(4)?,
            free_energy: f(5)?,
            compat_residual: f(6)?,
        });
    }
    Ok(rows)
}

fn read_snapshot(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue; // header: nx ny h t
        }
        for tok in line.split_whitespace() {
            values.push(tok.parse().map_err(|_| {
                Error::validation(format!("bad float {tok:?} in {}", path.display()))
            })?);
        }
    }
    Ok(values)
}

fn snapshot_steps(dir: &Path, run: &str, field: &str) -> Result<Vec<usize>> {
    let mut steps = Vec::new();
    let prefix = format!("{run}_{field}_");
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix(&prefix) {
            if let Some(step) = rest.strip_suffix(".dat") {
                if let Ok(v) = step.parse::<usize>() {
                    steps.push(v);
                }
            }
        }
    }
    steps.sort_unstable();
    Ok(steps)
}

struct CheckOutcome {
    name: String,
    species: Option<usize>,
    passed: bool,
    worst: f64,
    threshold: f64,
}

fn run_check(cfg: &RunConfig, dir: &Path) -> Result<usize> {
    let diag_rows = read_diagnostics(&dir.join("diagnostics.csv"))?;
    if diag_rows.is_empty() {
        return Err(Error::validation("diagnostics.csv holds no rows"));
    }
    let n_species = cfg.species.len().max(
        diag_rows.iter().map(|d| d.species + 1).max().unwrap_or(1),
    );
    let mut outcomes: Vec<CheckOutcome> = Vec::new();

    // mass conservation per species, every recorded step
    for s in 0..n_species {
        let series: Vec<&DiagRead> = diag_rows.iter().filter(|d| d.species == s).collect();
        let m0 = series.first().map(|d| d.mass).unwrap_or(0.0);
        let mut worst = 0.0f64;
        for d in &series {
            worst = worst.max((d.mass - m0).abs() / m0.abs().max(1e-300));
        }
        outcomes.push(CheckOutcome {
            name: "mass_conservation".into(),
            species: Some(s),
            passed: worst < 1e-12,
            worst,
            threshold: 1e-12,
        });
    }

    // entropy bounded by its initial value plus the dissipation budget
    let d0 = diag_rows.first().map(|d| d.dirichlet_energy).unwrap_or(0.0);
    let e0_total: f64 = diag_rows
        .iter()
        .filter(|d| d.t == diag_rows[0].t)
        .map(|d| d.entropy)
        .sum();
    let steps_count = diag_rows.iter().filter(|d| d.species == 0).count();
    let budget = e0_total + 0.5 * d0 + 1e-8 * steps_count as f64 + 1e-12;
    for s in 0..n_species {
        let mut worst = f64::NEG_INFINITY;
        for d in diag_rows.iter().filter(|d| d.species == s) {
            worst = worst.max(d.entropy);
        }
        outcomes.push(CheckOutcome {
            name: "entropy_bound".into(),
            species: Some(s),
            passed: worst <= budget,
            worst,
            threshold: budget,
        });
    }

    // free-energy decay applies only without boundary charge
    if cfg.boundary_charge_is_zero() {
        let series: Vec<f64> = diag_rows
            .iter()
            .filter(|d| d.species == 0)
            .map(|d| d.free_energy)
            .collect();
        let mut worst = f64::NEG_INFINITY;
        let mut passed = true;
        for w in series.windows(2) {
            let rise = w[1] - w[0];
            worst = worst.max(rise);
            if rise > 1e-8 {
                passed = false;
            }
        }
        outcomes.push(CheckOutcome {
            name: "free_energy_decay".into(),
            species: None,
            passed,
            worst: if worst.is_finite() { worst } else { 0.0 },
            threshold: 1e-8,
        });
    }

    // charge-balance residual against the recorded masses
    {
        let mut worst = 0.0f64;
        let mut passed = true;
        let times: Vec<f64> = {
            let mut t: Vec<f64> = diag_rows.iter().map(|d| d.t).collect();
            t.dedup();
            t
        };
        for &t in &times {
            let rows: Vec<&DiagRead> = diag_rows.iter().filter(|d| d.t == t).collect();
            let scale: f64 = 1.0
                + rows
                    .iter()
                    .map(|d| {
                        let z = cfg.species.get(d.species).map(|s| s.z).unwrap_or(1);
                        (z as f64).abs() * d.mass.abs()
                    })
                    .sum::<f64>();
            let r = rows.first().map(|d| d.compat_residual.abs()).unwrap_or(0.0);
            worst = worst.max(r / scale);
            if r > 1e-9 * scale {
                passed = false;
            }
        }
        outcomes.push(CheckOutcome {
            name: "charge_compatibility".into(),
            species: None,
            passed,
            worst,
            threshold: 1e-9,
        });
    }

    // snapshot-based checks: positivity and the potential gauge
    let grid = if cfg.geometry.epsilon < 1.0 && has_micro_snapshots(cfg, dir)? {
        cfg.micro_grid(cfg.geometry.epsilon)?
    } else {
        cfg.macro_grid()?
    };
    let mut min_c = f64::INFINITY;
    for s in 0..n_species {
        let field = format!("c{}", s + 1);
        for step in snapshot_steps(dir, &cfg.scenario, &field)? {
            let values = read_snapshot(&dir.join(format!("{}_{field}_{step}.dat", cfg.scenario)))?;
            for v in values {
                min_c = min_c.min(v);
            }
        }
    }
    if min_c.is_finite() {
        outcomes.push(CheckOutcome {
            name: "positivity".into(),
            species: None,
            passed: min_c >= 0.0,
            worst: min_c,
            threshold: 0.0,
        });
    }
    let mut gauge_worst = 0.0f64;
    let mut gauge_seen = false;
    for step in snapshot_steps(dir, &cfg.scenario, "phi")? {
        let full = read_snapshot(&dir.join(format!("{}_phi_{step}.dat", cfg.scenario)))?;
        let nx = grid.side_cells();
        if full.len() != nx * nx {
            continue; // snapshot resolution does not match this geometry
        }
        gauge_seen = true;
        let mut sum = 0.0;
        let mut sup = 0.0f64;
        let mut count = 0usize;
        for iy in 0..nx {
            for ix in 0..nx {
                if grid.is_fluid(ix, iy) {
                    let v = full[iy * nx + ix];
                    sum += v;
                    sup = sup.max(v.abs());
                    count += 1;
                }
            }
        }
        if sup > 0.0 {
            gauge_worst = gauge_worst.max((sum / count as f64).abs() / sup);
        }
    }
    if gauge_seen {
        outcomes.push(CheckOutcome {
            name: "potential_gauge".into(),
            species: None,
            passed: gauge_worst <= 1e-12,
            worst: gauge_worst,
            threshold: 1e-12,
        });
    }

    let mut csv = String::from("check,species,status,worst,threshold\n");
    let mut failed = 0usize;
    for o in &outcomes {
        if !o.passed {
            failed += 1;
        }
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            o.name,
            o.species.map(|s| (s + 1).to_string()).unwrap_or_default(),
            if o.passed { "pass" } else { "fail" },
            fmt_f64(o.worst),
            fmt_f64(o.threshold),
        ));
    }
    fs::write(dir.join("check_report.csv"), csv)?;
    let mut stdout = std::io::stdout().lock();
    for o in &outcomes {
        let label = match o.species {
            Some(s) => format!("{} (species {})", o.name, s + 1),
            None => o.name.clone(),
        };
        writeln!(
            stdout,
            "{}: {label} (worst {:.3e}, threshold {:.3e})",
            if o.passed { "PASS" } else { "FAIL" },
            o.worst,
            o.threshold
        )?;
    }
    Ok(failed)
}

fn has_micro_snapshots(cfg: &RunConfig, dir: &Path) -> Result<bool> {
    // distinguish micro from macro runs by the stored phi resolution
    let steps = snapshot_steps(dir, &cfg.scenario, "phi")?;
    let Some(&first) = steps.first() else {
        return Ok(false);
    };
    let text = fs::read_to_string(dir.join(format!("{}_phi_{first}.dat", cfg.scenario)))?;
    let header = text.lines().next().unwrap_or_default();
    let nx: usize = header
        .split_whitespace()
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let m = (1.0 / cfg.geometry.epsilon).round() as usize;
    Ok(nx == m * cfg.geometry.cells_per_period)
}
