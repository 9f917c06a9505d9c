//! Cell-centered Cartesian grids with fluid masks: the unit periodicity
//! cell with a solid inclusion, and the macroscopic unit square perforated
//! by a periodic array of inclusions.
//!
//! Geometry is staircase (mask-based): a cell is solid iff its center lies
//! inside the inclusion. Smooth-boundary effects are absorbed into the
//! discretization error.

use crate::error::{Error, Result};

/// Solid inclusion carved out of the unit cell. `Custom` marks masks loaded
/// from a file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InclusionSpec {
    None,
    /// Axis-aligned square centered at (1/2, 1/2); side in (0, 1).
    CenteredSquare { side: f64 },
    /// Disk centered at (1/2, 1/2); radius in (0, 1/2).
    CenteredDisk { radius: f64 },
    Custom,
}

impl InclusionSpec {
    /// An inclusion whose closure is not strictly inside the open unit cell
    /// is rejected.
    pub fn validate(&self) -> Result<()> {
        match *self {
            InclusionSpec::None | InclusionSpec::Custom => Ok(()),
            InclusionSpec::CenteredSquare { side } => {
                if side > 0.0 && side < 1.0 {
                    Ok(())
                } else {
                    Err(Error::validation(format!(
                        "square side must lie strictly in (0, 1), got {side}"
                    )))
                }
            }
            InclusionSpec::CenteredDisk { radius } => {
                if radius > 0.0 && radius < 0.5 {
                    Ok(())
                } else {
                    Err(Error::validation(format!(
                        "disk radius must lie strictly in (0, 0.5), got {radius}"
                    )))
                }
            }
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            InclusionSpec::None | InclusionSpec::Custom => false,
            InclusionSpec::CenteredSquare { side } => {
                (x - 0.5).abs() < 0.5 * side && (y - 0.5).abs() < 0.5 * side
            }
            InclusionSpec::CenteredDisk { radius } => {
                let (dx, dy) = (x - 0.5, y - 0.5);
                dx * dx + dy * dy < radius * radius
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Discretized unit periodicity cell with a fluid mask.
#[derive(Debug, Clone)]
pub struct CellGrid {
    n: usize,
    h: f64,
    /// true = fluid; index iy * n + ix, rows from y = 0.
    mask: Vec<bool>,
    inclusion: InclusionSpec,
    /// compact fluid index per lattice cell, usize::MAX on solid cells
    compact: Vec<usize>,
    /// lattice index of each fluid cell
    fluid_cells: Vec<usize>,
}

/// Fluid-fluid face of the periodic unit cell, oriented from `lo` to `hi`
/// along `axis` (`hi` wraps to the opposite edge for the closing face).
#[derive(Debug, Clone, Copy)]
pub struct PeriodicFace {
    pub lo: usize,
    pub hi: usize,
    pub axis: Axis,
}

/// Internal face separating a fluid cell from a solid cell; `outward` is the
/// unit normal pointing from fluid into solid.
#[derive(Debug, Clone, Copy)]
pub struct SolidFace {
    /// compact index of the fluid cell
    pub fluid: usize,
    /// face midpoint in cell coordinates
    pub center: (f64, f64),
    pub outward: (f64, f64),
}

impl CellGrid {
    /// Builds the unit cell at resolution `n` (cells per side, even, >= 8).
    /// A cell is solid iff its center lies inside the inclusion.
    pub fn build_unit_cell(n: usize, inc: InclusionSpec) -> Result<CellGrid> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::validation(format!(
                "cell resolution must be even and at least 8, got {n}"
            )));
        }
        inc.validate()?;
        if matches!(inc, InclusionSpec::Custom) {
            return Err(Error::validation(
                "custom masks are built through CellGrid::from_mask_text",
            ));
        }
        let h = 1.0 / n as f64;
        let mut mask = vec![true; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = ((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h);
                if inc.contains(x, y) {
                    mask[iy * n + ix] = false;
                }
            }
        }
        Self::finish(n, mask, inc)
    }

    /// Parses the mask file format: line 1 is `N`, followed by `N` lines of
    /// `N` characters each, `F` fluid / `S` solid, rows from y = 0.
    pub fn from_mask_text(text: &str) -> Result<CellGrid> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::validation("empty mask file"))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("bad mask header line: {header:?}")))?;
        if n < 8 || n % 2 != 0 {
            return Err(Error::validation(format!(
                "mask resolution must be even and at least 8, got {n}"
            )));
        }
        let mut mask = vec![true; n * n];
        for iy in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::validation(format!("mask file ends at row {iy} of {n}")))?;
            let row = line.trim_end();
            if row.chars().count() != n {
                return Err(Error::validation(format!(
                    "mask row {iy} has {} characters, expected {n}",
                    row.chars().count()
                )));
            }
            for (ix, ch) in row.chars().enumerate() {
                mask[iy * n + ix] = match ch {
                    'F' => true,
                    'S' => false,
                    other => {
                        return Err(Error::validation(format!(
                            "mask row {iy} column {ix}: expected 'F' or 'S', got {other:?}"
                        )))
                    }
                };
            }
        }
        // solid cells touching the cell edge would violate the interior-closure requirement
        for i in 0..n {
            for idx in [i, (n - 1) * n + i, i * n, i * n + (n - 1)] {
                if !mask[idx] {
                    return Err(Error::validation(
                        "custom mask has solid cells on the cell boundary; the inclusion closure must stay inside the cell",
                    ));
                }
            }
        }
        Self::finish(n, mask, InclusionSpec::Custom)
    }

    fn finish(n: usize, mask: Vec<bool>, inclusion: InclusionSpec) -> Result<CellGrid> {
        let mut compact = vec![usize::MAX; n * n];
        let mut fluid_cells = Vec::new();
        for (i, &f) in mask.iter().enumerate() {
            if f {
                compact[i] = fluid_cells.len();
                fluid_cells.push(i);
            }
        }
        if fluid_cells.is_empty() {
            return Err(Error::geometry("mask has no fluid cells"));
        }
        let grid = CellGrid {
            n,
            h: 1.0 / n as f64,
            mask,
            inclusion,
            compact,
            fluid_cells,
        };
        if !grid.fluid_connected() {
            return Err(Error::geometry("fluid region is disconnected"));
        }
        Ok(grid)
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn inclusion(&self) -> InclusionSpec {
        self.inclusion
    }

    pub fn is_fluid(&self, ix: usize, iy: usize) -> bool {
        self.mask[iy * self.n + ix]
    }

    pub fn fluid_cell_count(&self) -> usize {
        self.fluid_cells.len()
    }

    /// Lattice (ix, iy) of a compact fluid index.
    pub fn cell_coords(&self, compact: usize) -> (usize, usize) {
        let full = self.fluid_cells[compact];
        (full % self.n, full / self.n)
    }

    /// Compact fluid index at a lattice position, if fluid.
    pub fn compact_index(&self, ix: usize, iy: usize) -> Option<usize> {
        let c = self.compact[iy * self.n + ix];
        (c != usize::MAX).then_some(c)
    }

    pub fn cell_center(&self, compact: usize) -> (f64, f64) {
        let (ix, iy) = self.cell_coords(compact);
        ((ix as f64 + 0.5) * self.h, (iy as f64 + 0.5) * self.h)
    }

    /// Fraction of the cell occupied by fluid: (#fluid cells) * h^2. Exact
    /// whenever the inclusion boundary is aligned with grid lines.
    pub fn fluid_volume_fraction(&self) -> f64 {
        self.fluid_cells.len() as f64 / (self.n * self.n) as f64
    }

    /// Flood fill over the 4-neighborhood (no wrap).
    fn fluid_connected(&self) -> bool {
        let n = self.n;
        let mut seen = vec![false; n * n];
        let start = self.fluid_cells[0];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0usize;
        while let Some(idx) = stack.pop() {
            count += 1;
            let (ix, iy) = (idx % n, idx / n);
            let push = |jx: usize, jy: usize, stack: &mut Vec<usize>, seen: &mut Vec<bool>| {
                let j = jy * n + jx;
                if self.mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if ix > 0 {
                push(ix - 1, iy, &mut stack, &mut seen);
            }
            if ix + 1 < n {
                push(ix + 1, iy, &mut stack, &mut seen);
            }
            if iy > 0 {
                push(ix, iy - 1, &mut stack, &mut seen);
            }
            if iy + 1 < n {
                push(ix, iy + 1, &mut stack, &mut seen);
            }
        }
        count == self.fluid_cells.len()
    }

    /// All fluid-fluid faces of the periodic cell, each listed once. The
    /// wrap face at the right/top edge connects back to column/row zero.
    pub fn periodic_fluid_faces(&self) -> Vec<PeriodicFace> {
        let n = self.n;
        let mut faces = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let Some(lo) = self.compact_index(ix, iy) else {
                    continue;
                };
                let jx = (ix + 1) % n;
                if let Some(hi) = self.compact_index(jx, iy) {
                    faces.push(PeriodicFace {
                        lo,
                        hi,
                        axis: Axis::X,
                    });
                }
                let jy = (iy + 1) % n;
                if let Some(hi) = self.compact_index(ix, jy) {
                    faces.push(PeriodicFace {
                        lo,
                        hi,
                        axis: Axis::Y,
                    });
                }
            }
        }
        faces
    }

    /// Staircase faces separating fluid from solid cells, with outward
    /// normals pointing into the solid.
    pub fn solid_faces(&self) -> Vec<SolidFace> {
        let n = self.n;
        let h = self.h;
        let mut faces = Vec::new();
        for iy in 0..n {
            for ix in 0..n {
                let Some(fluid) = self.compact_index(ix, iy) else {
                    continue;
                };
                let (cx, cy) = ((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h);
                let mut consider = |jx: i64, jy: i64, outward: (f64, f64)| {
                    // neighbors outside the cell never occur for valid inclusions
                    if jx < 0 || jy < 0 || jx >= n as i64 || jy >= n as i64 {
                        return;
                    }
                    if !self.mask[jy as usize * n + jx as usize] {
                        faces.push(SolidFace {
                            fluid,
                            center: (cx + 0.5 * h * outward.0, cy + 0.5 * h * outward.1),
                            outward,
                        });
                    }
                };
                consider(ix as i64 - 1, iy as i64, (-1.0, 0.0));
                consider(ix as i64 + 1, iy as i64, (1.0, 0.0));
                consider(ix as i64, iy as i64 - 1, (0.0, -1.0));
                consider(ix as i64, iy as i64 + 1, (0.0, 1.0));
            }
        }
        faces
    }

    /// Measure of the inclusion boundary. Exact formulas are used for the
    /// shipped shapes (the staircase perimeter of a disk does not converge
    /// to the smooth perimeter); custom masks fall back to the staircase
    /// count.
    pub fn inclusion_boundary_measure(&self) -> f64 {
        match self.inclusion {
            InclusionSpec::None => 0.0,
            InclusionSpec::CenteredDisk { radius } => 2.0 * std::f64::consts::PI * radius,
            InclusionSpec::CenteredSquare { .. } | InclusionSpec::Custom => {
                self.solid_faces().len() as f64 * self.h
            }
        }
    }
}

/// Which boundary a perforated-grid face belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Outer boundary of the unit square.
    Outer,
    /// Boundary of a solid inclusion.
    Inclusion,
}

/// Interior fluid-fluid face oriented from `lo` to `hi` along `axis`.
#[derive(Debug, Clone, Copy)]
pub struct InteriorFace {
    pub lo: usize,
    pub hi: usize,
    pub axis: Axis,
}

/// No-flux / Neumann face of the perforated domain.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace {
    /// compact index of the adjacent fluid cell
    pub cell: usize,
    pub kind: BoundaryKind,
    /// face midpoint in macroscopic coordinates
    pub center: (f64, f64),
    /// outward unit normal
    pub outward: (f64, f64),
}

/// The macroscopic unit square with an `m x m` array of scaled inclusions
/// removed. With the macroscopic domain fixed to the unit square, every
/// periodicity cell is interior, so all `m^2` inclusions are carved out.
#[derive(Debug, Clone)]
pub struct PerforatedGrid {
    eps: f64,
    m: usize,
    n_c: usize,
    nx: usize,
    h: f64,
    mask: Vec<bool>,
    compact: Vec<usize>,
    fluid_cells: Vec<usize>,
    interior_faces: Vec<InteriorFace>,
    boundary_faces: Vec<BoundaryFace>,
    inclusion: InclusionSpec,
}

impl PerforatedGrid {
    /// Builds the perforated grid for `eps = 1/m` with `n_c` cells per
    /// period (grid spacing `eps / n_c`).
    pub fn build(eps: f64, inc: InclusionSpec, n_c: usize) -> Result<PerforatedGrid> {
        if !(eps > 0.0) {
            return Err(Error::validation(format!("epsilon must be positive, got {eps}")));
        }
        let m_f = 1.0 / eps;
        let m = m_f.round() as usize;
        if m < 2 || (m_f - m as f64).abs() > 1e-9 * m_f {
            return Err(Error::validation(format!(
                "epsilon must equal 1/M for an integer M >= 2, got {eps}"
            )));
        }
        let unit = CellGrid::build_unit_cell(n_c, inc)?;
        Self::tile(m, &unit)
    }

    /// Tiles `m x m` copies of a unit-cell mask over the unit square.
    pub fn tile(m: usize, unit: &CellGrid) -> Result<PerforatedGrid> {
        let n_c = unit.resolution();
        if m < 2 {
            return Err(Error::validation("period count M must be at least 2"));
        }
        if m * n_c > 4096 {
            return Err(Error::validation(format!(
                "resolution overflow: M * n_c = {} exceeds the desk-scale cap 4096",
                m * n_c
            )));
        }
        let nx = m * n_c;
        let mut mask = vec![true; nx * nx];
        for iy in 0..nx {
            for ix in 0..nx {
                if !unit.is_fluid(ix % n_c, iy % n_c) {
                    mask[iy * nx + ix] = false;
                }
            }
        }
        let mut compact = vec![usize::MAX; nx * nx];
        let mut fluid_cells = Vec::new();
        for (i, &f) in mask.iter().enumerate() {
            if f {
                compact[i] = fluid_cells.len();
                fluid_cells.push(i);
            }
        }
        let h = 1.0 / nx as f64;
        let mut grid = PerforatedGrid {
            eps: 1.0 / m as f64,
            m,
            n_c,
            nx,
            h,
            mask,
            compact,
            fluid_cells,
            interior_faces: Vec::new(),
            boundary_faces: Vec::new(),
            inclusion: unit.inclusion(),
        };
        if !grid.fluid_connected() {
            return Err(Error::geometry("perforated fluid region is disconnected"));
        }
        grid.build_faces();
        Ok(grid)
    }

    fn fluid_connected(&self) -> bool {
        let nx = self.nx;
        let mut seen = vec![false; nx * nx];
        let Some(&start) = self.fluid_cells.first() else {
            return false;
        };
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0usize;
        while let Some(idx) = stack.pop() {
            count += 1;
            let (ix, iy) = (idx % nx, idx / nx);
            let push = |j: usize, seen: &mut Vec<bool>, stack: &mut Vec<usize>| {
                if self.mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if ix > 0 {
                push(idx - 1, &mut seen, &mut stack);
            }
            if ix + 1 < nx {
                push(idx + 1, &mut seen, &mut stack);
            }
            if iy > 0 {
                push(idx - nx, &mut seen, &mut stack);
            }
            if iy + 1 < nx {
                push(idx + nx, &mut seen, &mut stack);
            }
        }
        count == self.fluid_cells.len()
    }

    fn build_faces(&mut self) {
        let nx = self.nx;
        let h = self.h;
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        for iy in 0..nx {
            for ix in 0..nx {
                let Some(lo) = self.compact_index(ix, iy) else {
                    continue;
                };
                let (cx, cy) = ((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h);
                // +x neighbor
                if ix + 1 < nx {
                    match self.compact_index(ix + 1, iy) {
                        Some(hi) => interior.push(InteriorFace {
                            lo,
                            hi,
                            axis: Axis::X,
                        }),
                        None => boundary.push(BoundaryFace {
                            cell: lo,
                            kind: BoundaryKind::Inclusion,
                            center: (cx + 0.5 * h, cy),
                            outward: (1.0, 0.0),
                        }),
                    }
                } else {
                    boundary.push(BoundaryFace {
                        cell: lo,
                        kind: BoundaryKind::Outer,
                        center: (1.0, cy),
                        outward: (1.0, 0.0),
                    });
                }
                // -x side: only boundary faces (interior handled from the left cell)
                if ix == 0 {
                    boundary.push(BoundaryFace {
                        cell: lo,
                        kind: BoundaryKind::Outer,
                        center: (0.0, cy),
                        outward: (-1.0, 0.0),
                    });
                } else if self.compact_index(ix - 1, iy).is_none() {
                    boundary.push(BoundaryFace {
                        cell: lo,
                        kind: BoundaryKind::Inclusion,
                        center: (cx - 0.5 * h, cy),
                        outward: (-1.0, 0.0),
                    });
                }
                // +y neighbor
                if iy + 1 < nx {
                    match self.compact_index(ix, iy + 1) {
                        Some(hi) => interior.push(InteriorFace {
                            lo,
                            hi,
                            axis: Axis::Y,
                        }),
                        None => boundary.push(BoundaryFace {
                            cell: lo,
                            kind: BoundaryKind::Inclusion,
                            center: (cx, cy + 0.5 * h),
                            outward: (0.0, 1.0),
                        }),
                    }
                } else {
                    boundary.push(BoundaryFace {
                        cell: lo,
                        kind: BoundaryKind::Outer,
                        center: (cx, 1.0),
                        outward: (0.0, 1.0),
                    });
                }
                // -y side
                if iy == 0 {
                    boundary.push(BoundaryFace {
                        cell: lo,
                        kind: BoundaryKind::Outer,
                        center: (cx, 0.0),
                        outward: (0.0, -1.0),
                    });
                } else if self.compact_index(ix, iy - 1).is_none() {
                    boundary.push(BoundaryFace {
                        cell: lo,
                        kind: BoundaryKind::Inclusion,
                        center: (cx, cy - 0.5 * h),
                        outward: (0.0, -1.0),
                    });
                }
            }
        }
        self.interior_faces = interior;
        self.boundary_faces = boundary;
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn periods(&self) -> usize {
        self.m
    }

    pub fn cells_per_period(&self) -> usize {
        self.n_c
    }

    /// Cells per side of the full lattice.
    pub fn side_cells(&self) -> usize {
        self.nx
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn inclusion(&self) -> InclusionSpec {
        self.inclusion
    }

    pub fn fluid_cell_count(&self) -> usize {
        self.fluid_cells.len()
    }

    pub fn is_fluid(&self, ix: usize, iy: usize) -> bool {
        self.mask[iy * self.nx + ix]
    }

    pub fn compact_index(&self, ix: usize, iy: usize) -> Option<usize> {
        let c = self.compact[iy * self.nx + ix];
        (c != usize::MAX).then_some(c)
    }

    pub fn cell_coords(&self, compact: usize) -> (usize, usize) {
        let full = self.fluid_cells[compact];
        (full % self.nx, full / self.nx)
    }

    pub fn cell_center(&self, compact: usize) -> (f64, f64) {
        let (ix, iy) = self.cell_coords(compact);
        ((ix as f64 + 0.5) * self.h, (iy as f64 + 0.5) * self.h)
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn fluid_volume_fraction(&self) -> f64 {
        self.fluid_cells.len() as f64 / (self.nx * self.nx) as f64
    }

    /// Maps a macroscopic point to the periodicity-cell coordinate
    /// y = (x / eps) mod 1.
    pub fn cell_coordinate(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = (x / self.eps).rem_euclid(1.0);
        let fy = (y / self.eps).rem_euclid(1.0);
        (fx, fy)
    }
}
