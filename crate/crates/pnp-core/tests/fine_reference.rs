//! Space-time refinement oracle for the transient solver: the coarse run
//! (64^2, dt = 1e-3) is checked against a 4x-refined reference in space and
//! time (256^2, dt = 2.5e-4). The reference is produced by the same scheme
//! on a finer discretization, so agreement validates the coarse solution
//! against the continuum limit, not against itself.

use std::sync::Arc;

use pnp_core::diag::bilinear_sample;
use pnp_core::grid::{InclusionSpec, PerforatedGrid};
use pnp_core::pnp::{
    self, AppPnpParams, BoundaryCharge, DiffusionTensor, Diffusivity, PnpSystem, ScaleMode,
    SpeciesParams, TransientOptions,
};

fn blob_system(grid: Arc<PerforatedGrid>) -> PnpSystem {
    let nf = grid.fluid_cell_count();
    let blob = |cx: f64, cy: f64| -> Vec<f64> {
        (0..nf)
            .map(|c| {
                let (x, y) = grid.cell_center(c);
                0.1 + (-((x - cx).powi(2) + (y - cy).powi(2)) / 0.01).exp()
            })
            .collect()
    };
    let species = vec![
        SpeciesParams {
            z: 1,
            diffusivity: Diffusivity::Constant(1.0),
            d_bounds: (1.0, 1.0),
            c0: blob(0.35, 0.5),
        },
        SpeciesParams {
            z: -1,
            diffusivity: Diffusivity::Constant(1.0),
            d_bounds: (1.0, 1.0),
            c0: blob(0.65, 0.5),
        },
    ];
    let eps = grid.epsilon();
    PnpSystem::new(
        grid,
        species,
        DiffusionTensor::Identity,
        AppPnpParams::default(),
        BoundaryCharge::zero(),
        ScaleMode::Micro { eps },
        None,
        true,
    )
    .unwrap()
}

#[test]
fn coarse_run_matches_refined_reference() {
    let coarse_grid = Arc::new(PerforatedGrid::build(0.125, InclusionSpec::None, 8).unwrap());
    let fine_grid = Arc::new(PerforatedGrid::build(0.125, InclusionSpec::None, 32).unwrap());
    let t_end = 0.1;

    let coarse = pnp::run_transient(
        &blob_system(Arc::clone(&coarse_grid)),
        &TransientOptions {
            t_end,
            dt: 1e-3,
            output_stride: 100,
        },
    )
    .unwrap();
    let fine = pnp::run_transient(
        &blob_system(Arc::clone(&fine_grid)),
        &TransientOptions {
            t_end,
            dt: 2.5e-4,
            output_stride: 400,
        },
    )
    .unwrap();

    // compare the final positive-species field, sampling the reference at
    // the coarse centers
    let c_coarse = &coarse.states.last().unwrap().c[0];
    let c_fine = &fine.states.last().unwrap().c[0];
    let n_fine = fine_grid.side_cells();
    let h2 = coarse_grid.spacing() * coarse_grid.spacing();
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    for c in 0..coarse_grid.fluid_cell_count() {
        let (x, y) = coarse_grid.cell_center(c);
        let reference = bilinear_sample(c_fine, n_fine, x, y);
        diff2 += (c_coarse[c] - reference).powi(2) * h2;
        ref2 += reference * reference * h2;
    }
    let rel = (diff2 / ref2).sqrt();
    assert!(rel < 2e-2, "relative L2 deviation from the refined reference: {rel}");
    println!("coarse vs refined reference: relative L2 = {rel:.3e}");
}
