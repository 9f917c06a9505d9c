//! Invariant monitors and error norms: the smooth cut-off constructor, the
//! entropy functional, discrete charge-compatibility residuals, trajectory
//! error norms, and the Dirichlet energy / mass quadratures.

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, PerforatedGrid};

/// 128-node Gauss-Legendre rule on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Smooth truncation equal to the identity below `K` and zero above
/// `2K + 4`, built by mollifying a piecewise-linear profile with a fixed
/// smooth bump of support radius 1/2.
///
/// The bump width fits inside the plateau of length 1 between K+1 and K+2
/// and inside the flat tail, so the defining windows hold exactly (up to
/// quadrature rounding) rather than approximately.
pub struct CutoffFunction {
    pub k: f64,
    /// (node, weight * bump, weight * bump') with the bump normalized under
    /// the same quadrature rule
    terms: Vec<(f64, f64, f64)>,
}

fn piecewise_profile(k: f64, r: f64) -> f64 {
    // extended linearly below zero so mollification reproduces the identity
    // near the origin
    if r < k + 1.0 {
        r
    } else if r <= k + 2.0 {
        k + 1.0
    } else if r <= 2.0 * k + 3.0 {
        -r + 2.0 * k + 3.0
    } else {
        0.0
    }
}

fn profile_slope(k: f64, r: f64) -> f64 {
    if r < k + 1.0 {
        1.0
    } else if r <= k + 2.0 {
        0.0
    } else if r <= 2.0 * k + 3.0 {
        -1.0
    } else {
        0.0
    }
}

impl CutoffFunction {
    pub fn new(k: f64) -> Result<CutoffFunction> {
        if !(k > 1.0) {
            return Err(Error::validation(format!(
                "cut-off height K must exceed 1, got {k}"
            )));
        }
        let n = 128;
        let (xs, ws) = gauss_legendre(n);
        // scale to [-1/2, 1/2]
        let mut raw = Vec::with_capacity(n);
        let mut z = 0.0;
        for i in 0..n {
            let s = 0.5 * xs[i];
            let w = 0.5 * ws[i];
            let u = 4.0 * s * s; // (2s)^2 < 1 strictly at interior nodes
            let bump = (-1.0 / (1.0 - u)).exp();
            let dbump = bump * (-8.0 * s / ((1.0 - u) * (1.0 - u)));
            raw.push((s, w * bump, w * dbump));
            z += w * bump;
        }
        let terms = raw
            .into_iter()
            .map(|(s, wb, wd)| (s, wb / z, wd / z))
            .collect();
        Ok(CutoffFunction { k, terms })
    }

    pub fn eval(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for &(s, wb, _) in &self.terms {
            acc += wb * piecewise_profile(self.k, r - s);
        }
        acc
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for &(s, wb, _) in &self.terms {
            acc += wb * profile_slope(self.k, r - s);
        }
        acc
    }

    pub fn second_deriv(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for &(s, _, wd) in &self.terms {
            acc += wd * profile_slope(self.k, r - s);
        }
        acc
    }
}

pub fn build_cutoff(k: f64) -> Result<CutoffFunction> {
    CutoffFunction::new(k)
}

/// sum over cells of (c log c - c + 1) * vol, with the integrand set to its
/// limit value 1 at c = 0 (evaluated by branch, not by limit arithmetic).
pub fn entropy_functional(c: &[f64], volumes: &[f64]) -> Result<f64> {
    debug_assert_eq!(c.len(), volumes.len());
    let mut acc = 0.0;
    for (&v, &vol) in c.iter().zip(volumes) {
        if v < 0.0 {
            return Err(Error::validation(format!(
                "entropy functional requires nonnegative concentrations, found {v}"
            )));
        }
        let integrand = if v == 0.0 { 1.0 } else { v * v.ln() - v + 1.0 };
        acc += integrand * vol;
    }
    Ok(acc)
}

pub fn mass(c: &[f64], volumes: &[f64]) -> f64 {
    c.iter().zip(volumes).map(|(&v, &vol)| v * vol).sum()
}

/// Face-quadrature Dirichlet energy over fluid-fluid faces.
pub fn dirichlet_energy(grid: &PerforatedGrid, phi: &[f64]) -> f64 {
    let h = grid.spacing();
    let mut e = 0.0;
    for f in grid.interior_faces() {
        let q = (phi[f.hi] - phi[f.lo]) / h;
        e += q * q * h * h;
    }
    e
}

/// Discrete charge-balance residual of the microscopic data:
/// volumetric charge + eps-scaled inclusion-boundary charge + outer charge.
pub fn compatibility_residual_micro<F1, F2>(
    grid: &PerforatedGrid,
    charges: &[i32],
    c0: &[Vec<f64>],
    xi1: F1,
    xi2: F2,
) -> f64
where
    F1: Fn((f64, f64), (f64, f64)) -> f64,
    F2: Fn((f64, f64)) -> f64,
{
    let h = grid.spacing();
    let h2 = h * h;
    let eps = grid.epsilon();
    let mut total = 0.0;
    for (z, ci) in charges.iter().zip(c0) {
        total += *z as f64 * ci.iter().sum::<f64>() * h2;
    }
    for f in grid.boundary_faces() {
        total += match f.kind {
            BoundaryKind::Inclusion => {
                let y = grid.cell_coordinate(f.center.0, f.center.1);
                eps * xi1(f.center, y) * h
            }
            BoundaryKind::Outer => xi2(f.center) * h,
        };
    }
    total
}

/// Macroscopic counterpart: species masses + volumetric offset + scaled
/// outer flux.
pub fn compatibility_residual_macro<F2>(
    grid: &PerforatedGrid,
    charges: &[i32],
    masses: &[f64],
    offset: &[f64],
    fluid_fraction: f64,
    xi2: F2,
) -> f64
where
    F2: Fn((f64, f64)) -> f64,
{
    let h = grid.spacing();
    let h2 = h * h;
    let mut total = 0.0;
    for (z, m) in charges.iter().zip(masses) {
        total += *z as f64 * m;
    }
    total += offset.iter().sum::<f64>() * h2;
    for f in grid.boundary_faces() {
        if f.kind == BoundaryKind::Outer {
            total += xi2(f.center) / fluid_fraction * h;
        }
    }
    total
}

/// Bilinear interpolation of a cell-centered field on the full `n x n`
/// macro grid, extrapolating linearly in the half-cell rim next to the
/// boundary (keeps affine fields exact everywhere).
pub fn bilinear_sample(field: &[f64], n: usize, x: f64, y: f64) -> f64 {
    let h = 1.0 / n as f64;
    let u = x / h - 0.5;
    let v = y / h - 0.5;
    let i0 = (u.floor().max(0.0) as usize).min(n - 2);
    let j0 = (v.floor().max(0.0) as usize).min(n - 2);
    let s = u - i0 as f64;
    let t = v - j0 as f64;
    let f00 = field[j0 * n + i0];
    let f10 = field[j0 * n + i0 + 1];
    let f01 = field[(j0 + 1) * n + i0];
    let f11 = field[(j0 + 1) * n + i0 + 1];
    (1.0 - s) * (1.0 - t) * f00 + s * (1.0 - t) * f10 + (1.0 - s) * t * f01 + s * t * f11
}

/// L^1-in-time, L^2-in-space distance between a fine trajectory (on the
/// fluid cells of `fine_grid`) and a macroscopic trajectory (full row-major
/// `macro_n x macro_n` fields, bilinearly sampled at the fine cell centers).
/// Time quadrature is the left-interval rule over the shared output times.
pub fn error_l1l2(
    fine_times: &[f64],
    fine: &[Vec<f64>],
    fine_grid: &PerforatedGrid,
    macro_times: &[f64],
    macro_fields: &[Vec<f64>],
    macro_n: usize,
) -> Result<f64> {
    if fine_times.len() != macro_times.len() || fine.len() != macro_fields.len() {
        return Err(Error::TimeGridMismatch(format!(
            "fine has {} outputs, macro has {}",
            fine_times.len(),
            macro_times.len()
        )));
    }
    for (a, b) in fine_times.iter().zip(macro_times) {
        if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
            return Err(Error::TimeGridMismatch(format!(
                "output times differ: {a} vs {b}"
            )));
        }
    }
    let h2 = fine_grid.spacing() * fine_grid.spacing();
    let nf = fine_grid.fluid_cell_count();
    let mut total = 0.0;
    for j in 1..fine_times.len() {
        let dt = fine_times[j] - fine_times[j - 1];
        let mut l2 = 0.0;
        for c in 0..nf {
            let (x, y) = fine_grid.cell_center(c);
            let diff = fine[j][c] - bilinear_sample(&macro_fields[j], macro_n, x, y);
            l2 += diff * diff * h2;
        }
        total += dt * l2.sqrt();
    }
    Ok(total)
}
