//! Macroscopic model assembly from cell-problem outputs, first-order
//! two-scale corrector reconstruction, and numerical two-scale pairings.

use std::sync::Arc;

use crate::cell::{cell_problem_residual, CellSolution, HomTensor};
use crate::diag::bilinear_sample;
use crate::error::{Error, Result};
use crate::grid::PerforatedGrid;
use crate::pnp::{
    AppPnpParams, BoundaryCharge, DiffusionTensor, PnpSystem, ScaleMode, SpeciesParams,
};

/// The effective model: tensor data plus the ready-to-run system on the
/// full unit square. The volumetric charge offset is the cell average of
/// the inclusion-boundary charge; the outer Neumann flux is scaled by the
/// fluid fraction.
pub struct MacroModel {
    pub tensor: [[f64; 2]; 2],
    pub fluid_fraction: f64,
    pub charge_offset: Vec<f64>,
    pub system: PnpSystem,
}

/// Builds the macroscopic run configuration: transport tensor `D_i * A`,
/// potential tensor `A`, volumetric source `sum z_i c_i + offset(x)`, and
/// outer Neumann data `xi2 / |Y^f|`. Species carry initial data already
/// sampled on `macro_grid`.
pub fn build_macro_model(
    macro_grid: Arc<PerforatedGrid>,
    ht: &HomTensor,
    bc: BoundaryCharge,
    species: Vec<SpeciesParams>,
    app: AppPnpParams,
    solve_potential: bool,
) -> Result<MacroModel> {
    let frac = ht.fluid_fraction;
    let BoundaryCharge { xi1, xi2 } = bc;
    let cell_grid = &ht.cell_solutions[0].grid;
    let nf = macro_grid.fluid_cell_count();
    let mut offset = vec![0.0; nf];
    for c in 0..nf {
        let x = macro_grid.cell_center(c);
        offset[c] = crate::cell::boundary_charge_average(cell_grid, &*xi1, x);
    }
    let macro_bc = BoundaryCharge {
        xi1: Box::new(|_, _| 0.0),
        xi2: Box::new(move |x| xi2(x) / frac),
    };
    let system = PnpSystem::new(
        macro_grid,
        species,
        DiffusionTensor::Tensor(ht.a),
        app,
        macro_bc,
        ScaleMode::Macro,
        Some(offset.clone()),
        solve_potential,
    )?;
    Ok(MacroModel {
        tensor: ht.a,
        fluid_fraction: frac,
        charge_offset: offset,
        system,
    })
}

/// Central-difference gradient of a full row-major `n x n` macro field,
/// one-sided at the outer boundary.
pub fn macro_gradient(field: &[f64], n: usize) -> Vec<(f64, f64)> {
    let h = 1.0 / n as f64;
    let mut g = vec![(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            let gx = if i == 0 {
                (field[j * n + 1] - field[j * n]) / h
            } else if i == n - 1 {
                (field[j * n + i] - field[j * n + i - 1]) / h
            } else {
                (field[j * n + i + 1] - field[j * n + i - 1]) / (2.0 * h)
            };
            let gy = if j == 0 {
                (field[n + i] - field[i]) / h
            } else if j == n - 1 {
                (field[j * n + i] - field[(j - 1) * n + i]) / h
            } else {
                (field[(j + 1) * n + i] - field[(j - 1) * n + i]) / (2.0 * h)
            };
            g[j * n + i] = (gx, gy);
        }
    }
    g
}

/// First-order two-scale reconstruction evaluated at the fine fluid-cell
/// centers.
pub struct CorrectorField {
    /// u0(x) + eps * sum_k d_k u0(x) w_k(x/eps)
    pub values: Vec<f64>,
    /// grad u0(x) + sum_k d_k u0(x) grad_y w_k(x/eps)
    pub gradient: Vec<(f64, f64)>,
    /// plain grad u0(x), for comparison against the corrected gradient
    pub macro_gradient: Vec<(f64, f64)>,
}

/// Reconstructs the corrector for a macro field `u0` (full row-major
/// `macro_n x macro_n`) on the fine perforated grid. `w_k` profiles are
/// sampled at the periodicity-cell coordinate by nearest cell; bilinear
/// sampling sits behind `bilinear_w` (off by default for determinism).
pub fn reconstruct_corrector(
    u0: &[f64],
    macro_n: usize,
    sols: &[CellSolution; 2],
    eps: f64,
    fine: &PerforatedGrid,
    bilinear_w: bool,
) -> Result<CorrectorField> {
    if (fine.epsilon() - eps).abs() > 1e-12 {
        return Err(Error::validation(format!(
            "epsilon mismatch: grid has {}, argument is {eps}",
            fine.epsilon()
        )));
    }
    if u0.len() != macro_n * macro_n {
        return Err(Error::validation("macro field length mismatch"));
    }
    let grad0 = macro_gradient(u0, macro_n);
    let gx0: Vec<f64> = grad0.iter().map(|g| g.0).collect();
    let gy0: Vec<f64> = grad0.iter().map(|g| g.1).collect();
    let wgrad: [Vec<(f64, f64)>; 2] = [sols[0].gradient(), sols[1].gradient()];

    let cell_grid = &sols[0].grid;
    let n_cell = cell_grid.resolution();
    let sample_w = |w: &[f64], y: (f64, f64)| -> f64 {
        if bilinear_w {
            sample_cell_bilinear(cell_grid, w, y)
        } else {
            nearest_fluid_value(cell_grid, w, y, n_cell)
        }
    };

    let nf = fine.fluid_cell_count();
    let mut values = vec![0.0; nf];
    let mut gradient = vec![(0.0, 0.0); nf];
    let mut macro_grad = vec![(0.0, 0.0); nf];
    for c in 0..nf {
        let (x, y) = fine.cell_center(c);
        let u = bilinear_sample(u0, macro_n, x, y);
        let g = (
            bilinear_sample(&gx0, macro_n, x, y),
            bilinear_sample(&gy0, macro_n, x, y),
        );
        let yc = fine.cell_coordinate(x, y);
        let mut val = u;
        let mut grad = g;
        for (k, sol) in sols.iter().enumerate() {
            let gk = if k == 0 { g.0 } else { g.1 };
            val += eps * gk * sample_w(&sol.w, yc);
            let (wx, wy) = nearest_fluid_gradient(cell_grid, &wgrad[k], yc, n_cell);
            grad.0 += gk * wx;
            grad.1 += gk * wy;
        }
        values[c] = val;
        gradient[c] = grad;
        macro_grad[c] = g;
    }
    Ok(CorrectorField {
        values,
        gradient,
        macro_gradient: macro_grad,
    })
}

fn nearest_cell_index(y: f64, n: usize) -> usize {
    ((y * n as f64).floor().max(0.0) as usize).min(n - 1)
}

fn nearest_fluid_value(grid: &crate::grid::CellGrid, w: &[f64], y: (f64, f64), n: usize) -> f64 {
    let (ix, iy) = (nearest_cell_index(y.0, n), nearest_cell_index(y.1, n));
    match grid.compact_index(ix, iy) {
        Some(c) => w[c],
        None => 0.0, // solid sample point: the corrector has no fluid value there
    }
}

fn nearest_fluid_gradient(
    grid: &crate::grid::CellGrid,
    g: &[(f64, f64)],
    y: (f64, f64),
    n: usize,
) -> (f64, f64) {
    let (ix, iy) = (nearest_cell_index(y.0, n), nearest_cell_index(y.1, n));
    match grid.compact_index(ix, iy) {
        Some(c) => g[c],
        None => (0.0, 0.0),
    }
}

fn sample_cell_bilinear(grid: &crate::grid::CellGrid, w: &[f64], y: (f64, f64)) -> f64 {
    // expand to the full lattice (solid cells as 0) and reuse the macro sampler
    let n = grid.resolution();
    let mut full = vec![0.0; n * n];
    for (c, &v) in w.iter().enumerate() {
        let (ix, iy) = grid.cell_coords(c);
        full[iy * n + ix] = v;
    }
    bilinear_sample(&full, n, y.0, y.1)
}

/// Per-cell gradient of a fluid field on a perforated grid by averaged
/// face-difference quotients, one-sided where a neighbor is solid or
/// outside the domain.
pub fn perforated_gradient(grid: &PerforatedGrid, field: &[f64]) -> Vec<(f64, f64)> {
    let nx = grid.side_cells();
    let h = grid.spacing();
    let mut g = vec![(0.0, 0.0); field.len()];
    for c in 0..field.len() {
        let (ix, iy) = grid.cell_coords(c);
        let neighbor = |jx: i64, jy: i64| -> Option<usize> {
            if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= nx as i64 {
                None
            } else {
                grid.compact_index(jx as usize, jy as usize)
            }
        };
        let avg = |lo: Option<usize>, hi: Option<usize>| -> f64 {
            let mut sum = 0.0;
            let mut cnt = 0;
            if let Some(l) = lo {
                sum += (field[c] - field[l]) / h;
                cnt += 1;
            }
            if let Some(r) = hi {
                sum += (field[r] - field[c]) / h;
                cnt += 1;
            }
            if cnt > 0 {
                sum / cnt as f64
            } else {
                0.0
            }
        };
        g[c] = (
            avg(neighbor(ix as i64 - 1, iy as i64), neighbor(ix as i64 + 1, iy as i64)),
            avg(neighbor(ix as i64, iy as i64 - 1), neighbor(ix as i64, iy as i64 + 1)),
        );
    }
    g
}

/// Midpoint quadrature of the two-scale pairing
/// `integral of u_eps(x) psi(x, x/eps) dx` over the fluid cells.
pub fn two_scale_pairing<F>(u_eps: &[f64], psi: F, eps: f64, grid: &PerforatedGrid) -> Result<f64>
where
    F: Fn((f64, f64), (f64, f64)) -> f64,
{
    if (grid.epsilon() - eps).abs() > 1e-12 {
        return Err(Error::validation(format!(
            "epsilon mismatch: grid has {}, argument is {eps}",
            grid.epsilon()
        )));
    }
    let h2 = grid.spacing() * grid.spacing();
    let mut acc = 0.0;
    for (c, &u) in u_eps.iter().enumerate() {
        let x = grid.cell_center(c);
        let y = grid.cell_coordinate(x.0, x.1);
        acc += u * psi(x, y) * h2;
    }
    Ok(acc)
}

/// Max-norm bound on the residual of the two-scale cell equation after
/// substituting the separable corrector: the per-direction cell residuals
/// scaled by the largest macroscopic gradient components.
pub fn two_scale_model_residual(sols: &[CellSolution; 2], max_grad: (f64, f64)) -> f64 {
    let r1 = cell_problem_residual(&sols[0]);
    let r2 = cell_problem_residual(&sols[1]);
    let m1 = r1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let m2 = r2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_grad.0.abs() * m1 + max_grad.1.abs() * m2
}
