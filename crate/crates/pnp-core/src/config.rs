//! Run-configuration schema: a TOML document with expression-valued fields,
//! validated into a [`RunConfig`] with explicit field-path error messages.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::cell;
use crate::diag;
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::grid::{CellGrid, InclusionSpec, PerforatedGrid};
use crate::pnp::{AppPnpParams, BoundaryCharge, Diffusivity, SpeciesParams};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u64>,
    scenario: Option<String>,
    geometry: Option<RawGeometry>,
    #[serde(default)]
    species: Vec<RawSpecies>,
    boundary_charge: Option<RawBoundaryCharge>,
    time: Option<RawTime>,
    app: Option<RawApp>,
    converge: Option<RawConverge>,
    solver: Option<RawSolver>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    inclusion: Option<String>,
    side: Option<f64>,
    radius: Option<f64>,
    mask_path: Option<String>,
    epsilon: Option<f64>,
    cells_per_period: Option<usize>,
    cell_resolution: Option<usize>,
    macro_resolution: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecies {
    z: Option<i64>,
    d: Option<toml::Value>,
    d_min: Option<f64>,
    d_max: Option<f64>,
    c0: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBoundaryCharge {
    xi1: Option<String>,
    xi2: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_end: Option<f64>,
    dt: Option<f64>,
    output_stride: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawApp {
    eta: Option<f64>,
    p: Option<f64>,
    sweep_etas: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConverge {
    epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    rel_tol: Option<f64>,
    gummel_tol: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

/// One species as configured: expressions still symbolic, sampled onto a
/// grid on demand.
pub struct SpeciesConfig {
    pub z: i32,
    pub d: Expr,
    pub d_bounds: (f64, f64),
    pub c0: Expr,
}

pub struct GeometryConfig {
    pub inclusion: InclusionSpec,
    /// mask text when inclusion is Custom
    pub mask_text: Option<String>,
    pub epsilon: f64,
    pub cells_per_period: usize,
    pub cell_resolution: usize,
    pub macro_resolution: usize,
}

pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
    pub output_stride: usize,
}

pub struct SolverTolerances {
    pub rel_tol: f64,
    pub gummel_tol: f64,
}

/// Fully validated run configuration.
pub struct RunConfig {
    pub scenario: String,
    pub geometry: GeometryConfig,
    pub species: Vec<SpeciesConfig>,
    pub xi1: Expr,
    pub xi2: Expr,
    pub time: TimeConfig,
    pub app: AppPnpParams,
    pub sweep_etas: Vec<f64>,
    pub converge_epsilons: Vec<f64>,
    pub solver: SolverTolerances,
    pub out_dir: PathBuf,
    /// original document, copied verbatim into the run directory
    pub source_text: String,
}

fn cfg_err<T>(path: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::config(path, message))
}

fn parse_expr(path: &str, text: &str, allowed: &[Var]) -> Result<Expr> {
    let e = Expr::parse(text)
        .map_err(|err| Error::config(path, err.to_string()))?;
    let all = [Var::X1, Var::X2, Var::Y1, Var::Y2, Var::T];
    for v in all {
        if !allowed.contains(&v) && e.uses(&[v]) {
            return cfg_err(path, format!("variable {v:?} is not available in this field"));
        }
    }
    Ok(e)
}

/// Parses and validates a configuration document. `base_dir` resolves
/// relative mask paths.
pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::config("<document>", e.to_string()))?;
    if let Some(v) = raw.schema_version {
        if v != SCHEMA_VERSION {
            return cfg_err(
                "schema_version",
                format!("unsupported schema version {v}, expected {SCHEMA_VERSION}"),
            );
        }
    }
    let scenario = raw.scenario.unwrap_or_else(|| "run".to_string());
    if scenario.is_empty() || !scenario.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return cfg_err("scenario", "scenario names use [A-Za-z0-9_-] only");
    }

    let g = raw.geometry.unwrap_or_default();
    let kind = g.inclusion.as_deref().unwrap_or("none");
    let mut mask_text = None;
    let inclusion = match kind {
        "none" => InclusionSpec::None,
        "centered_square" => {
            let side = match g.side {
                Some(s) => s,
                None => return cfg_err("geometry.side", "centered_square requires a side length"),
            };
            InclusionSpec::CenteredSquare { side }
        }
        "centered_disk" => {
            let radius = match g.radius {
                Some(r) => r,
                None => return cfg_err("geometry.radius", "centered_disk requires a radius"),
            };
            InclusionSpec::CenteredDisk { radius }
        }
        "mask_file" => {
            let rel = match &g.mask_path {
                Some(p) => PathBuf::from(p),
                None => return cfg_err("geometry.mask_path", "mask_file requires a path"),
            };
            let path = match (rel.is_absolute(), base_dir) {
                (true, _) => rel,
                (false, Some(dir)) => dir.join(rel),
                (false, None) => rel,
            };
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Error::config("geometry.mask_path", format!("cannot read {}: {e}", path.display()))
            })?;
            mask_text = Some(text);
            InclusionSpec::Custom
        }
        other => {
            return cfg_err(
                "geometry.inclusion",
                format!("unknown inclusion kind {other:?} (none | centered_square | centered_disk | mask_file)"),
            )
        }
    };
    inclusion
        .validate()
        .map_err(|e| Error::config("geometry", e.to_string()))?;

    let epsilon = g.epsilon.unwrap_or(0.25);
    let m = (1.0 / epsilon).round();
    if !(epsilon > 0.0) || m < 2.0 || (1.0 / epsilon - m).abs() > 1e-9 * m {
        return cfg_err(
            "geometry.epsilon",
            format!("epsilon must equal 1/M for integer M >= 2, got {epsilon}"),
        );
    }
    let cells_per_period = g.cells_per_period.unwrap_or(8);
    if cells_per_period < 8 || cells_per_period % 2 != 0 {
        return cfg_err(
            "geometry.cells_per_period",
            format!("must be even and >= 8, got {cells_per_period}"),
        );
    }
    let cell_resolution = g.cell_resolution.unwrap_or(64);
    if cell_resolution < 8 || cell_resolution % 2 != 0 {
        return cfg_err(
            "geometry.cell_resolution",
            format!("must be even and >= 8, got {cell_resolution}"),
        );
    }
    let macro_resolution = g.macro_resolution.unwrap_or(64);
    if macro_resolution < 16 || macro_resolution % 8 != 0 || macro_resolution > 4096 {
        return cfg_err(
            "geometry.macro_resolution",
            format!("must be a multiple of 8 in [16, 4096], got {macro_resolution}"),
        );
    }

    let mut species = Vec::with_capacity(raw.species.len());
    for (i, sp) in raw.species.iter().enumerate() {
        let z = match sp.z {
            Some(z) => z as i32,
            None => return cfg_err(&format!("species[{i}].z"), "missing charge number"),
        };
        let (d, constant): (Expr, Option<f64>) = match &sp.d {
            None => (Expr::Num(1.0), Some(1.0)),
            Some(toml::Value::Float(v)) => (Expr::Num(*v), Some(*v)),
            Some(toml::Value::Integer(v)) => (Expr::Num(*v as f64), Some(*v as f64)),
            Some(toml::Value::String(s)) => {
                let e = parse_expr(
                    &format!("species[{i}].d"),
                    s,
                    &[Var::X1, Var::X2, Var::T],
                )?;
                let constant = match e {
                    Expr::Num(v) => Some(v),
                    _ => None,
                };
                (e, constant)
            }
            Some(_) => {
                return cfg_err(
                    &format!("species[{i}].d"),
                    "diffusivity must be a number or an expression string",
                )
            }
        };
        let d_bounds = match (sp.d_min, sp.d_max, constant) {
            (Some(lo), Some(hi), _) => (lo, hi),
            (None, None, Some(v)) => (v, v),
            _ => {
                return cfg_err(
                    &format!("species[{i}].d_min"),
                    "non-constant diffusivity requires declared d_min and d_max bounds",
                )
            }
        };
        if !(d_bounds.0 > 0.0 && d_bounds.1 >= d_bounds.0) {
            return cfg_err(
                &format!("species[{i}].d_min"),
                format!("bounds must satisfy 0 < m <= M, got [{}, {}]", d_bounds.0, d_bounds.1),
            );
        }
        let c0_text = match &sp.c0 {
            Some(s) => s,
            None => return cfg_err(&format!("species[{i}].c0"), "missing initial concentration"),
        };
        let c0 = parse_expr(&format!("species[{i}].c0"), c0_text, &[Var::X1, Var::X2])?;
        species.push(SpeciesConfig { z, d, d_bounds, c0 });
    }

    let bcraw = raw.boundary_charge.unwrap_or_default();
    let xi1 = parse_expr(
        "boundary_charge.xi1",
        bcraw.xi1.as_deref().unwrap_or("0"),
        &[Var::X1, Var::X2, Var::Y1, Var::Y2],
    )?;
    let xi2 = parse_expr(
        "boundary_charge.xi2",
        bcraw.xi2.as_deref().unwrap_or("0"),
        &[Var::X1, Var::X2],
    )?;

    let traw = raw.time.unwrap_or_default();
    let time = TimeConfig {
        t_end: traw.t_end.unwrap_or(0.1),
        dt: traw.dt.unwrap_or(1e-3),
        output_stride: traw.output_stride.unwrap_or(10),
    };
    if time.t_end < 0.0 {
        return cfg_err("time.t_end", "must be nonnegative");
    }
    if !(time.dt > 0.0) {
        return cfg_err("time.dt", "must be positive");
    }
    if time.output_stride == 0 {
        return cfg_err("time.output_stride", "must be at least 1");
    }

    let araw = raw.app.unwrap_or_default();
    let app = AppPnpParams {
        eta: araw.eta.unwrap_or(0.0),
        p: araw.p.unwrap_or(4.0),
    };
    app.validate().map_err(|e| Error::config("app", e.to_string()))?;
    let sweep_etas = araw.sweep_etas.unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
    for (i, eta) in sweep_etas.iter().enumerate() {
        if !(*eta > 0.0) {
            return cfg_err(&format!("app.sweep_etas[{i}]"), "sweep values must be positive");
        }
    }

    let craw = raw.converge.unwrap_or_default();
    let converge_epsilons = craw
        .epsilons
        .unwrap_or_else(|| vec![0.25, 0.125, 0.0625]);
    for (i, eps) in converge_epsilons.iter().enumerate() {
        let m = (1.0 / eps).round();
        if !(*eps > 0.0) || m < 2.0 || (1.0 / eps - m).abs() > 1e-9 * m {
            return cfg_err(
                &format!("converge.epsilons[{i}]"),
                format!("must equal 1/M for integer M >= 2, got {eps}"),
            );
        }
    }

    let sraw = raw.solver.unwrap_or_default();
    let solver = SolverTolerances {
        rel_tol: sraw.rel_tol.unwrap_or(1e-10),
        gummel_tol: sraw.gummel_tol.unwrap_or(1e-8),
    };
    if !(solver.rel_tol > 0.0 && solver.rel_tol < 1.0) {
        return cfg_err("solver.rel_tol", "must lie in (0, 1)");
    }
    if !(solver.gummel_tol > 0.0) {
        return cfg_err("solver.gummel_tol", "must be positive");
    }

    let out_dir = PathBuf::from(raw.output.unwrap_or_default().dir.unwrap_or_else(|| "out".into()));

    Ok(RunConfig {
        scenario,
        geometry: GeometryConfig {
            inclusion,
            mask_text,
            epsilon,
            cells_per_period,
            cell_resolution,
            macro_resolution,
        },
        species,
        xi1,
        xi2,
        time,
        app,
        sweep_etas,
        converge_epsilons,
        solver,
        out_dir,
        source_text: text.to_string(),
    })
}

impl RunConfig {
    /// Unit cell at the requested resolution (the stored mask for custom
    /// inclusions, which carries its own resolution).
    pub fn unit_cell(&self, resolution: usize) -> Result<Arc<CellGrid>> {
        let grid = match &self.geometry.mask_text {
            Some(text) => CellGrid::from_mask_text(text)?,
            None => CellGrid::build_unit_cell(resolution, self.geometry.inclusion)?,
        };
        Ok(Arc::new(grid))
    }

    pub fn micro_grid(&self, eps: f64) -> Result<Arc<PerforatedGrid>> {
        let m = (1.0 / eps).round() as usize;
        let unit = self.unit_cell(self.geometry.cells_per_period)?;
        Ok(Arc::new(PerforatedGrid::tile(m, &unit)?))
    }

    /// Full (unperforated) unit square at macro_resolution cells per side.
    pub fn macro_grid(&self) -> Result<Arc<PerforatedGrid>> {
        let n_c = 8;
        let m = self.geometry.macro_resolution / n_c;
        let unit = Arc::new(CellGrid::build_unit_cell(n_c, InclusionSpec::None)?);
        Ok(Arc::new(PerforatedGrid::tile(m, &unit)?))
    }

    /// Samples the species data onto a grid.
    pub fn sample_species(&self, grid: &PerforatedGrid) -> Result<Vec<SpeciesParams>> {
        let nf = grid.fluid_cell_count();
        let mut out = Vec::with_capacity(self.species.len());
        for sp in &self.species {
            let mut c0 = vec![0.0; nf];
            for (c, v) in c0.iter_mut().enumerate() {
                let (x1, x2) = grid.cell_center(c);
                *v = sp.c0.eval(&Env {
                    x1,
                    x2,
                    ..Default::default()
                });
            }
            let d_expr = sp.d.clone();
            let diffusivity = match d_expr {
                Expr::Num(v) => Diffusivity::Constant(v),
                e => Diffusivity::Field(Box::new(move |t, x: (f64, f64)| {
                    e.eval(&Env {
                        x1: x.0,
                        x2: x.1,
                        t,
                        ..Default::default()
                    })
                })),
            };
            out.push(SpeciesParams {
                z: sp.z,
                diffusivity,
                d_bounds: sp.d_bounds,
                c0,
            });
        }
        Ok(out)
    }

    pub fn boundary_charge(&self) -> BoundaryCharge {
        let xi1 = self.xi1.clone();
        let xi2 = self.xi2.clone();
        BoundaryCharge {
            xi1: Box::new(move |x: (f64, f64), y: (f64, f64)| {
                xi1.eval(&Env {
                    x1: x.0,
                    x2: x.1,
                    y1: y.0,
                    y2: y.1,
                    t: 0.0,
                })
            }),
            xi2: Box::new(move |x: (f64, f64)| {
                xi2.eval(&Env {
                    x1: x.0,
                    x2: x.1,
                    ..Default::default()
                })
            }),
        }
    }

    /// Structural zero test for the boundary charge (the free-energy decay
    /// check only applies then); sampled on a fixed point set.
    pub fn boundary_charge_is_zero(&self) -> bool {
        for i in 0..17 {
            for j in 0..17 {
                let (a, b) = (i as f64 / 16.0, j as f64 / 16.0);
                let v1 = self.xi1.eval(&Env {
                    x1: a,
                    x2: b,
                    y1: b,
                    y2: a,
                    t: 0.0,
                });
                let v2 = self.xi2.eval(&Env {
                    x1: a,
                    x2: b,
                    ..Default::default()
                });
                if v1 != 0.0 || v2 != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Microscopic charge-balance residual of the configured data at `eps`.
    pub fn micro_compatibility(&self, eps: f64) -> Result<(f64, f64)> {
        let grid = self.micro_grid(eps)?;
        let species = self.sample_species(&grid)?;
        let charges: Vec<i32> = species.iter().map(|s| s.z).collect();
        let c0: Vec<Vec<f64>> = species.into_iter().map(|s| s.c0).collect();
        let bc = self.boundary_charge();
        let residual =
            diag::compatibility_residual_micro(&grid, &charges, &c0, &*bc.xi1, &*bc.xi2);
        let h2 = grid.spacing() * grid.spacing();
        let mut scale = 1.0f64;
        for (z, ci) in charges.iter().zip(&c0) {
            scale += (*z as f64).abs() * ci.iter().sum::<f64>() * h2;
        }
        Ok((residual, scale))
    }

    /// Macroscopic charge-balance residual (homogenized data).
    pub fn macro_compatibility(&self) -> Result<(f64, f64)> {
        let unit = self.unit_cell(self.geometry.cell_resolution)?;
        let grid = self.macro_grid()?;
        let species = self.sample_species(&grid)?;
        let charges: Vec<i32> = species.iter().map(|s| s.z).collect();
        let h2 = grid.spacing() * grid.spacing();
        let masses: Vec<f64> = species
            .iter()
            .map(|s| s.c0.iter().sum::<f64>() * h2)
            .collect();
        let bc = self.boundary_charge();
        let nf = grid.fluid_cell_count();
        let mut offset = vec![0.0; nf];
        for c in 0..nf {
            let x = grid.cell_center(c);
            offset[c] = cell::boundary_charge_average(&unit, &*bc.xi1, x);
        }
        let residual = diag::compatibility_residual_macro(
            &grid,
            &charges,
            &masses,
            &offset,
            unit.fluid_volume_fraction(),
            &*bc.xi2,
        );
        let mut scale = 1.0f64;
        for (z, m) in charges.iter().zip(&masses) {
            scale += (*z as f64).abs() * m;
        }
        Ok((residual, scale))
    }
}
