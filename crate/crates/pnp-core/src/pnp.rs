//! Transient multi-species drift-diffusion coupled to a pure-Neumann
//! potential equation, on a full or perforated grid.
//!
//! The spatial scheme is finite-volume with Scharfetter-Gummel exponentially
//! fitted face fluxes (positivity-preserving, mass-conservative, exact on
//! Boltzmann equilibria), backward Euler in time, and a Gummel fixed-point
//! loop between the potential and the transport solves. The regularized
//! (nonlinear-diffusion) variant enters as a linearized face coefficient.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Axis, BoundaryKind, PerforatedGrid};
use crate::sparse::{self, BandedLu, CsrMatrix, NullSpace, SolverConfig};

/// Systems at or below this size use the banded direct solve for transport;
/// it keeps the telescoping mass balance at machine precision where the
/// Krylov tolerance would not.
const DIRECT_TRANSPORT_LIMIT: usize = 20_000;

/// B(x) = x / (e^x - 1), the exponential-fitting kernel. Evaluated by series
/// near zero to avoid cancellation.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - 0.5 * x + x * x / 12.0 - x.powi(4) / 720.0
    } else {
        x / x.exp_m1()
    }
}

/// Scharfetter-Gummel face flux approximating -D (dc + c dpsi) across a face
/// of spacing `h`, with `psi` the dimensionless potential z * phi:
/// `(D/h) * (B(psi_r - psi_l) c_l - B(psi_l - psi_r) c_r)`.
pub fn sg_face_flux(c_l: f64, c_r: f64, psi_l: f64, psi_r: f64, d_face: f64, h: f64) -> f64 {
    let dp = psi_r - psi_l;
    (d_face / h) * (bernoulli(dp) * c_l - bernoulli(-dp) * c_r)
}

/// Diffusivity of one species: a constant or a (t, x) field.
pub enum Diffusivity {
    Constant(f64),
    Field(Box<dyn Fn(f64, (f64, f64)) -> f64 + Send + Sync>),
}

impl Diffusivity {
    pub fn sample(&self, t: f64, x: (f64, f64)) -> f64 {
        match self {
            Diffusivity::Constant(v) => *v,
            Diffusivity::Field(f) => f(t, x),
        }
    }
}

/// Per-species data: charge number, diffusivity with its declared bounds,
/// and the initial concentration sampled on the fluid cells.
pub struct SpeciesParams {
    pub z: i32,
    pub diffusivity: Diffusivity,
    /// declared bounds m <= D <= M
    pub d_bounds: (f64, f64),
    pub c0: Vec<f64>,
}

impl SpeciesParams {
    fn validate(&self, n_cells: usize) -> Result<()> {
        let (m, mm) = self.d_bounds;
        if !(m > 0.0 && mm >= m) {
            return Err(Error::validation(format!(
                "diffusivity bounds must satisfy 0 < m <= M, got [{m}, {mm}]"
            )));
        }
        if self.c0.len() != n_cells {
            return Err(Error::validation(
                "initial concentration length does not match the fluid cell count",
            ));
        }
        if let Some(neg) = self.c0.iter().find(|&&v| v < 0.0) {
            return Err(Error::validation(format!(
                "initial concentration must be nonnegative, found {neg}"
            )));
        }
        Ok(())
    }

    fn face_diffusivity(&self, t: f64, xl: (f64, f64), xr: (f64, f64)) -> Result<f64> {
        let dl = self.sample_checked(t, xl)?;
        let dr = self.sample_checked(t, xr)?;
        Ok(2.0 / (1.0 / dl + 1.0 / dr))
    }

    fn sample_checked(&self, t: f64, x: (f64, f64)) -> Result<f64> {
        let d = self.diffusivity.sample(t, x);
        let (m, mm) = self.d_bounds;
        if d < m - 1e-12 || d > mm + 1e-12 {
            return Err(Error::validation(format!(
                "diffusivity {d} at t={t}, x=({}, {}) violates declared bounds [{m}, {mm}]",
                x.0, x.1
            )));
        }
        Ok(d)
    }
}

/// Surface charge data: `xi1(x, y)` on inclusion boundaries (y is the
/// periodicity-cell coordinate) and `xi2(x)` on the outer boundary.
pub struct BoundaryCharge {
    pub xi1: Box<dyn Fn((f64, f64), (f64, f64)) -> f64 + Send + Sync>,
    pub xi2: Box<dyn Fn((f64, f64)) -> f64 + Send + Sync>,
}

impl BoundaryCharge {
    pub fn zero() -> Self {
        BoundaryCharge {
            xi1: Box::new(|_, _| 0.0),
            xi2: Box::new(|_| 0.0),
        }
    }
}

/// Parameters of the regularized diffusion c + eta c^p; eta = 0 recovers
/// the classical linear model.
#[derive(Debug, Clone, Copy)]
pub struct AppPnpParams {
    pub eta: f64,
    pub p: f64,
}

impl Default for AppPnpParams {
    fn default() -> Self {
        AppPnpParams { eta: 0.0, p: 4.0 }
    }
}

impl AppPnpParams {
    pub fn validate(&self) -> Result<()> {
        if self.eta < 0.0 {
            return Err(Error::validation(format!("eta must be >= 0, got {}", self.eta)));
        }
        if self.p < 4.0 {
            return Err(Error::validation(format!(
                "regularization exponent p must be >= 4, got {}",
                self.p
            )));
        }
        Ok(())
    }
}

/// Constant spatial diffusion tensor: identity at the microscopic scale,
/// the effective tensor at the macroscopic scale.
#[derive(Debug, Clone, Copy)]
pub enum DiffusionTensor {
    Identity,
    Tensor([[f64; 2]; 2]),
}

impl DiffusionTensor {
    fn axis_coeff(&self, axis: Axis) -> f64 {
        match (self, axis) {
            (DiffusionTensor::Identity, _) => 1.0,
            (DiffusionTensor::Tensor(a), Axis::X) => a[0][0],
            (DiffusionTensor::Tensor(a), Axis::Y) => a[1][1],
        }
    }

    fn cross_coeff(&self, axis: Axis) -> f64 {
        match (self, axis) {
            (DiffusionTensor::Identity, _) => 0.0,
            (DiffusionTensor::Tensor(a), Axis::X) => a[0][1],
            (DiffusionTensor::Tensor(a), Axis::Y) => a[1][0],
        }
    }
}

/// Micro runs scale the inclusion-boundary charge by epsilon; macro runs
/// have no inclusion faces and take the outer flux as provided.
#[derive(Debug, Clone, Copy)]
pub enum ScaleMode {
    Micro { eps: f64 },
    Macro,
}

/// Concentrations, potential, and time. Values live on the compact fluid
/// cells of the grid the state was produced on.
#[derive(Debug, Clone)]
pub struct PnpState {
    pub c: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub t: f64,
}

impl PnpState {
    /// Weighted mean of phi relative to its sup norm; the gauge invariant
    /// requires this below 1e-12.
    pub fn phi_mean_defect(&self, volumes_equal: bool) -> f64 {
        debug_assert!(volumes_equal);
        let n = self.phi.len() as f64;
        let mean = self.phi.iter().sum::<f64>() / n;
        let sup = self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup == 0.0 {
            0.0
        } else {
            mean.abs() / sup
        }
    }

    pub fn min_concentration(&self) -> f64 {
        self.c
            .iter()
            .flat_map(|ci| ci.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Pure-Neumann potential operator on a grid: the matrix is assembled once
/// (it does not change in time), the boundary-flux part of the right-hand
/// side is precomputed, and solves are warm-started CG with the mean-zero
/// gauge.
pub struct PoissonOperator {
    grid: Arc<PerforatedGrid>,
    matrix: CsrMatrix,
    boundary_rhs: Vec<f64>,
    weights: Vec<f64>,
    rel_tol: f64,
}

impl PoissonOperator {
    pub fn new(
        grid: Arc<PerforatedGrid>,
        tensor: DiffusionTensor,
        bc: &BoundaryCharge,
        mode: ScaleMode,
        rel_tol: f64,
    ) -> Result<PoissonOperator> {
        let nf = grid.fluid_cell_count();
        let h = grid.spacing();
        let nx = grid.side_cells();
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * nf);
        for f in grid.interior_faces() {
            let a_nn = tensor.axis_coeff(f.axis);
            trip.push((f.lo, f.lo, a_nn));
            trip.push((f.hi, f.hi, a_nn));
            trip.push((f.lo, f.hi, -a_nn));
            trip.push((f.hi, f.lo, -a_nn));
            let a_nt = tensor.cross_coeff(f.axis);
            if a_nt != 0.0 {
                // Tangential gradient at the face from the four diagonal
                // neighbors; skipped (consistently for both rows, which keeps
                // row and column sums zero) when the stencil is incomplete.
                let (ix, iy) = grid.cell_coords(f.lo);
                let stencil: Option<[usize; 4]> = match f.axis {
                    Axis::X => {
                        if iy == 0 || iy + 1 >= nx {
                            None
                        } else {
                            match (
                                grid.compact_index(ix, iy + 1),
                                grid.compact_index(ix + 1, iy + 1),
                                grid.compact_index(ix, iy - 1),
                                grid.compact_index(ix + 1, iy - 1),
                            ) {
                                (Some(a), Some(b), Some(c), Some(d)) => Some([a, b, c, d]),
                                _ => None,
                            }
                        }
                    }
                    Axis::Y => {
                        if ix == 0 || ix + 1 >= nx {
                            None
                        } else {
                            match (
                                grid.compact_index(ix + 1, iy),
                                grid.compact_index(ix + 1, iy + 1),
                                grid.compact_index(ix - 1, iy),
                                grid.compact_index(ix - 1, iy + 1),
                            ) {
                                (Some(a), Some(b), Some(c), Some(d)) => Some([a, b, c, d]),
                                _ => None,
                            }
                        }
                    }
                };
                if let Some([p1, p2, m1, m2]) = stencil {
                    let w = 0.25 * a_nt;
                    for (col, sgn) in [(p1, -1.0), (p2, -1.0), (m1, 1.0), (m2, 1.0)] {
                        trip.push((f.lo, col, sgn * w));
                        trip.push((f.hi, col, -sgn * w));
                    }
                }
            }
        }
        let matrix = CsrMatrix::from_triplets(nf, &trip)?.symmetrized();

        let mut boundary_rhs = vec![0.0; nf];
        for f in grid.boundary_faces() {
            let flux = match (mode, f.kind) {
                (ScaleMode::Micro { eps }, BoundaryKind::Inclusion) => {
                    let y = grid.cell_coordinate(f.center.0, f.center.1);
                    eps * (bc.xi1)(f.center, y)
                }
                (ScaleMode::Micro { .. }, BoundaryKind::Outer) => (bc.xi2)(f.center),
                (ScaleMode::Macro, BoundaryKind::Outer) => (bc.xi2)(f.center),
                (ScaleMode::Macro, BoundaryKind::Inclusion) => 0.0,
            };
            boundary_rhs[f.cell] += flux * h;
        }
        Ok(PoissonOperator {
            weights: vec![h * h; nf],
            grid,
            matrix,
            boundary_rhs,
            rel_tol,
        })
    }

    /// Total boundary-flux contribution to the charge balance.
    pub fn boundary_total(&self) -> f64 {
        self.boundary_rhs.iter().sum()
    }

    /// Solves -div(A grad phi) = charge with the prescribed Neumann fluxes.
    /// The right-hand side must satisfy the discrete compatibility condition
    /// to 1e-9 relative, or the solve is refused.
    pub fn solve(&self, charge: &[f64], warm: Option<&[f64]>) -> Result<(Vec<f64>, usize)> {
        let h2 = self.grid.spacing() * self.grid.spacing();
        let mut b: Vec<f64> = charge
            .iter()
            .zip(&self.boundary_rhs)
            .map(|(&q, &g)| q * h2 + g)
            .collect();
        let total: f64 = b.iter().sum();
        let scale: f64 = b.iter().map(|v| v.abs()).sum();
        // absolute floor: a right-hand side that is pure rounding noise
        // (e.g. exactly neutral charge) is compatible by construction
        if total.abs() > (1e-9 * scale).max(1e-13 * (1.0 + scale)) {
            return Err(Error::CompatibilityViolation {
                residual: total.abs() / scale.max(1e-300),
                tol: 1e-9,
            });
        }
        if scale > 0.0 {
            // remove the float-level defect so CG sees an exactly compatible rhs
            let shift = total / b.len() as f64;
            for v in b.iter_mut() {
                *v -= shift;
            }
        }
        let cfg = SolverConfig {
            rel_tol: self.rel_tol,
            null_space: NullSpace::Constants {
                weights: self.weights.clone(),
            },
            ..Default::default()
        };
        let rep = sparse::solve_spd_from(&self.matrix, &b, warm, &cfg)?;
        Ok((rep.x, rep.iterations))
    }
}

/// One-shot potential solve; assembles the operator and solves.
pub fn poisson_solve(
    grid: &Arc<PerforatedGrid>,
    tensor: DiffusionTensor,
    charge: &[f64],
    bc: &BoundaryCharge,
    mode: ScaleMode,
) -> Result<Vec<f64>> {
    let op = PoissonOperator::new(Arc::clone(grid), tensor, bc, mode, 1e-10)?;
    Ok(op.solve(charge, None)?.0)
}

/// Everything needed to advance the coupled system in time.
pub struct PnpSystem {
    pub grid: Arc<PerforatedGrid>,
    pub species: Vec<SpeciesParams>,
    pub tensor: DiffusionTensor,
    pub app: AppPnpParams,
    pub mode: ScaleMode,
    /// volumetric charge in addition to sum z_i c_i (the macroscopic model's
    /// cell-averaged boundary-charge term); per fluid cell
    pub charge_offset: Option<Vec<f64>>,
    /// None when potential solves are disabled (incompatible data accepted
    /// explicitly); the potential then stays zero
    poisson: Option<PoissonOperator>,
    pub gummel_tol: f64,
    pub gummel_max: usize,
    pub lin_rel_tol: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub gummel_iters: usize,
    pub dt_used: f64,
    pub halvings: usize,
}

impl PnpSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Arc<PerforatedGrid>,
        species: Vec<SpeciesParams>,
        tensor: DiffusionTensor,
        app: AppPnpParams,
        bc: BoundaryCharge,
        mode: ScaleMode,
        charge_offset: Option<Vec<f64>>,
        solve_potential: bool,
    ) -> Result<PnpSystem> {
        let nf = grid.fluid_cell_count();
        if species.is_empty() {
            return Err(Error::validation("at least one species is required"));
        }
        for sp in &species {
            sp.validate(nf)?;
        }
        app.validate()?;
        if let Some(off) = &charge_offset {
            if off.len() != nf {
                return Err(Error::validation("charge offset length mismatch"));
            }
        }
        let poisson = if solve_potential {
            Some(PoissonOperator::new(
                Arc::clone(&grid),
                tensor,
                &bc,
                mode,
                1e-10,
            )?)
        } else {
            None
        };
        Ok(PnpSystem {
            grid,
            species,
            tensor,
            app,
            mode,
            charge_offset,
            poisson,
            gummel_tol: 1e-8,
            gummel_max: 50,
            lin_rel_tol: 1e-12,
        })
    }

    pub fn fluid_cells(&self) -> usize {
        self.grid.fluid_cell_count()
    }

    fn charge_density(&self, c: &[Vec<f64>]) -> Vec<f64> {
        let nf = self.fluid_cells();
        let mut q = match &self.charge_offset {
            Some(off) => off.clone(),
            None => vec![0.0; nf],
        };
        for (sp, ci) in self.species.iter().zip(c) {
            let z = sp.z as f64;
            for (qi, &v) in q.iter_mut().zip(ci) {
                *qi += z * v;
            }
        }
        q
    }

    fn solve_potential(&self, c: &[Vec<f64>], warm: Option<&[f64]>) -> Result<Vec<f64>> {
        match &self.poisson {
            Some(op) => Ok(op.solve(&self.charge_density(c), warm)?.0),
            None => Ok(vec![0.0; self.fluid_cells()]),
        }
    }

    /// Initial state: sampled concentrations plus the self-consistent
    /// potential at t = 0.
    pub fn initial_state(&self) -> Result<PnpState> {
        let c: Vec<Vec<f64>> = self.species.iter().map(|s| s.c0.clone()).collect();
        let phi = self.solve_potential(&c, None)?;
        Ok(PnpState { c, phi, t: 0.0 })
    }

    /// Backward-Euler transport solve for one species against a frozen
    /// potential. Returns the new concentrations.
    fn transport_solve(
        &self,
        sp: &SpeciesParams,
        c_old: &[f64],
        c_lin: &[f64],
        phi: &[f64],
        dt: f64,
        t_next: f64,
    ) -> Result<Vec<f64>> {
        let grid = &self.grid;
        let nf = grid.fluid_cell_count();
        let h = grid.spacing();
        let h2_dt = h * h / dt;
        let z = sp.z as f64;
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(5 * nf);
        for i in 0..nf {
            trip.push((i, i, h2_dt));
        }
        for f in grid.interior_faces() {
            let xl = grid.cell_center(f.lo);
            let xr = grid.cell_center(f.hi);
            let mut d_face = sp.face_diffusivity(t_next, xl, xr)? * self.tensor.axis_coeff(f.axis);
            if self.app.eta > 0.0 {
                // linearized nonlinear diffusion: D (1 + eta p c^(p-1)) with
                // the upwind face concentration of the current iterate
                let (psi_l, psi_r) = (z * phi[f.lo], z * phi[f.hi]);
                let c_up = if psi_l > psi_r {
                    c_lin[f.lo]
                } else if psi_r > psi_l {
                    c_lin[f.hi]
                } else {
                    0.5 * (c_lin[f.lo] + c_lin[f.hi])
                };
                d_face *= 1.0 + self.app.eta * self.app.p * c_up.powf(self.app.p - 1.0);
            }
            let dpsi = z * (phi[f.hi] - phi[f.lo]);
            // outflow from lo into hi: d_face * (B(dpsi) c_lo - B(-dpsi) c_hi)
            let a_ll = d_face * bernoulli(dpsi);
            let a_lh = d_face * bernoulli(-dpsi);
            trip.push((f.lo, f.lo, a_ll));
            trip.push((f.lo, f.hi, -a_lh));
            trip.push((f.hi, f.lo, -a_ll));
            trip.push((f.hi, f.hi, a_lh));
        }
        let a = CsrMatrix::from_triplets(nf, &trip)?;
        let rhs: Vec<f64> = c_old.iter().map(|&v| v * h2_dt).collect();
        if nf <= DIRECT_TRANSPORT_LIMIT {
            let lu = BandedLu::factor(&a)?;
            Ok(lu.solve(&rhs))
        } else {
            let cfg = SolverConfig {
                rel_tol: self.lin_rel_tol,
                jacobi: true,
                ..Default::default()
            };
            match sparse::solve_nonsym_from(&a, &rhs, Some(c_old), &cfg) {
                Ok(rep) => Ok(rep.x),
                // stagnation this close to machine precision is benign if the
                // residual is already tiny; otherwise surface the error
                Err(Error::SolverNonConvergence { residual, .. }) if residual < 1e-10 => {
                    let rep = sparse::solve_nonsym_from(
                        &a,
                        &rhs,
                        Some(c_old),
                        &SolverConfig {
                            rel_tol: 1e-10,
                            jacobi: true,
                            ..Default::default()
                        },
                    )?;
                    Ok(rep.x)
                }
                Err(e) => Err(e),
            }
        }
    }

    fn gummel_attempt(&self, s: &PnpState, dt: f64) -> Result<Option<(PnpState, usize)>> {
        let t_next = s.t + dt;
        let mut c_iter = s.c.clone();
        let mut phi_prev: Option<Vec<f64>> = None;
        let mut warm = s.phi.clone();
        for it in 1..=self.gummel_max {
            let phi = self.solve_potential(&c_iter, Some(&warm))?;
            if let Some(prev) = &phi_prev {
                let diff = phi
                    .iter()
                    .zip(prev)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if diff < self.gummel_tol {
                    return Ok(Some((
                        PnpState {
                            c: c_iter,
                            phi,
                            t: t_next,
                        },
                        it,
                    )));
                }
            }
            let mut c_next = Vec::with_capacity(self.species.len());
            for (k, sp) in self.species.iter().enumerate() {
                c_next.push(self.transport_solve(sp, &s.c[k], &c_iter[k], &phi, dt, t_next)?);
            }
            c_iter = c_next;
            warm = phi.clone();
            phi_prev = Some(phi);
        }
        Ok(None)
    }

    /// Advances one implicit step. If the Gummel loop fails to converge the
    /// step is rejected and retried with dt halved, up to 10 times; the
    /// returned stats carry the dt actually taken.
    pub fn advance_step(&self, s: &PnpState, dt: f64) -> Result<(PnpState, StepStats)> {
        if !(dt > 0.0) {
            return Err(Error::validation(format!("dt must be positive, got {dt}")));
        }
        let mut dt_try = dt;
        for halvings in 0..=10 {
            if let Some((state, iters)) = self.gummel_attempt(s, dt_try)? {
                return Ok((
                    state,
                    StepStats {
                        gummel_iters: iters,
                        dt_used: dt_try,
                        halvings,
                    },
                ));
            }
            dt_try *= 0.5;
        }
        Err(Error::StepRejected {
            dt: dt_try,
            retries: 10,
        })
    }

    /// Per-species discrete mass, sum of c * h^2 over fluid cells.
    pub fn masses(&self, state: &PnpState) -> Vec<f64> {
        let h2 = self.grid.spacing() * self.grid.spacing();
        state
            .c
            .iter()
            .map(|ci| ci.iter().sum::<f64>() * h2)
            .collect()
    }

    /// Charge-balance residual at a state: the volumetric charge plus the
    /// precomputed boundary terms. Conserved masses keep this constant in
    /// time, so compatibility at t = 0 carries through the whole run.
    pub fn compatibility_residual(&self, state: &PnpState) -> f64 {
        let h2 = self.grid.spacing() * self.grid.spacing();
        let mut total: f64 = self
            .charge_density(&state.c)
            .iter()
            .map(|q| q * h2)
            .sum();
        if let Some(op) = &self.poisson {
            total += op.boundary_total();
        }
        total
    }

    /// A-weighted Dirichlet energy of the potential (face quadrature; the
    /// cross coupling of an anisotropic tensor is not included, which is
    /// harmless for the isotropic tensors this suite produces).
    pub fn dirichlet_energy(&self, phi: &[f64]) -> f64 {
        let h = self.grid.spacing();
        let mut e = 0.0;
        for f in self.grid.interior_faces() {
            let q = (phi[f.hi] - phi[f.lo]) / h;
            e += self.tensor.axis_coeff(f.axis) * q * q * h * h;
        }
        e
    }

    /// Discrete free energy: sum_i int c_i log c_i + (1/2) int A grad phi .
    /// grad phi. A diagnostic; it is non-increasing along steps when the
    /// boundary charge vanishes.
    pub fn free_energy(&self, state: &PnpState) -> f64 {
        let h2 = self.grid.spacing() * self.grid.spacing();
        let mut f = 0.0;
        for ci in &state.c {
            for &v in ci {
                if v > 0.0 {
                    f += v * v.ln() * h2;
                }
            }
        }
        f + 0.5 * self.dirichlet_energy(&state.phi)
    }
}

/// Per-step diagnostics row (one entry per species per accepted step).
#[derive(Debug, Clone)]
pub struct DiagSample {
    pub t: f64,
    pub species: usize,
    pub mass: f64,
    pub entropy: f64,
    pub dirichlet_energy: f64,
    pub free_energy: f64,
    pub compat_residual: f64,
    pub gummel_iters: usize,
}

/// States at output times plus the per-step diagnostics series.
pub struct Trajectory {
    pub times: Vec<f64>,
    /// accepted-step number of each stored state
    pub steps: Vec<usize>,
    pub states: Vec<PnpState>,
    pub diagnostics: Vec<DiagSample>,
}

#[derive(Debug, Clone, Copy)]
pub struct TransientOptions {
    pub t_end: f64,
    pub dt: f64,
    /// snapshot every this many accepted steps (and always at t = 0 and t_end)
    pub output_stride: usize,
}

/// Runs the transient problem, recording diagnostics every accepted step and
/// snapshots every `output_stride` steps.
pub fn run_transient(system: &PnpSystem, opts: &TransientOptions) -> Result<Trajectory> {
    if opts.t_end < 0.0 {
        return Err(Error::validation("t_end must be nonnegative"));
    }
    if !(opts.dt > 0.0) {
        return Err(Error::validation("dt must be positive"));
    }
    let stride = opts.output_stride.max(1);
    let mut state = system.initial_state()?;
    let mut traj = Trajectory {
        times: vec![0.0],
        steps: vec![0],
        states: vec![state.clone()],
        diagnostics: Vec::new(),
    };
    record_diagnostics(system, &state, 0, &mut traj.diagnostics);
    if opts.t_end == 0.0 {
        return Ok(traj);
    }
    let mut step = 0usize;
    while state.t < opts.t_end - 1e-12 * opts.t_end.max(1.0) {
        let dt = opts.dt.min(opts.t_end - state.t);
        let (next, stats) = system.advance_step(&state, dt)?;
        state = next;
        step += 1;
        record_diagnostics(system, &state, stats.gummel_iters, &mut traj.diagnostics);
        let done = state.t >= opts.t_end - 1e-12 * opts.t_end.max(1.0);
        if step % stride == 0 || done {
            traj.times.push(state.t);
            traj.steps.push(step);
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

fn record_diagnostics(
    system: &PnpSystem,
    state: &PnpState,
    gummel_iters: usize,
    out: &mut Vec<DiagSample>,
) {
    let h2 = system.grid.spacing() * system.grid.spacing();
    let dirichlet = system.dirichlet_energy(&state.phi);
    let free = system.free_energy(state);
    let compat = system.compatibility_residual(state);
    for (k, ci) in state.c.iter().enumerate() {
        let mass: f64 = ci.iter().sum::<f64>() * h2;
        let entropy: f64 = ci
            .iter()
            .map(|&v| if v > 0.0 { v * v.ln() - v + 1.0 } else { 1.0 } * h2)
            .sum();
        out.push(DiagSample {
            t: state.t,
            species: k,
            mass,
            entropy,
            dirichlet_energy: dirichlet,
            free_energy: free,
            compat_residual: compat,
            gummel_iters,
        });
    }
}
