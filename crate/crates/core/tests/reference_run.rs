//! Qualitative features of the reference run that the plots are built on:
//! lobe positions after the drift, and how the transverse asymmetries react
//! to the field inhomogeneity.

use std::sync::OnceLock;

use sgsim_core::core_model::{initial_state, SimParams, Spin};
use sgsim_core::exact_evolution::{drift_time, evolve_in_magnet, free_drift};
use sgsim_core::observables::{
    asymmetry_maps, half_plane_moments, probability_density, RunPair,
};
use sgsim_core::oscillator_basis::coeffs_to_grid;

fn drifted_pair(params: &SimParams) -> RunPair {
    let td = drift_time(params).unwrap();
    let run = |m0: Spin| {
        let record = evolve_in_magnet(&initial_state(params, m0), params).unwrap();
        free_drift(&coeffs_to_grid(record.final_coeffs(), params), td, params)
    };
    RunPair::new(run(Spin::Up), run(Spin::Down)).unwrap()
}

fn reference_pair() -> &'static RunPair {
    static PAIR: OnceLock<RunPair> = OnceLock::new();
    PAIR.get_or_init(|| drifted_pair(&SimParams::new(0.5, 4.0, 4.0)))
}

#[test]
fn unpolarised_density_forms_lobes_at_the_design_positions() {
    let pair = reference_pair();
    let p0 = probability_density(pair);
    let (lower, upper) = half_plane_moments(&p0);
    let (lo, up) = (lower.unwrap(), upper.unwrap());
    // The textbook construction sends the spin projections to z = -/+z0.
    assert!((up.mean_z - 4.0).abs() < 0.5, "upper lobe at {:.3}", up.mean_z);
    assert!((lo.mean_z + 4.0).abs() < 0.5, "lower lobe at {:.3}", lo.mean_z);
    assert!((lo.weight - 0.5).abs() < 0.05);
    assert!((up.weight - 0.5).abs() < 0.05);
}

#[test]
fn transverse_asymmetries_develop_after_the_drift() {
    let maps = asymmetry_maps(reference_pair());
    assert!(maps.ax.max_abs() > 1e-4, "A_x stayed at {:.3e}", maps.ax.max_abs());
    assert!(maps.ay.max_abs() > 1e-4, "A_y stayed at {:.3e}", maps.ay.max_abs());
    assert!(maps.az.max_abs() > 0.01);
}

#[test]
fn transverse_asymmetry_shrinks_for_homogeneous_fields() {
    // Larger z0 means the beam explores a more homogeneous field, so the
    // x-polarisation signal fades and the setup approaches the textbook
    // z-only measurement.
    let reference = asymmetry_maps(reference_pair());
    let homogeneous = asymmetry_maps(&drifted_pair(&SimParams::new(0.5, 4.0, 16.0)));
    assert!(
        homogeneous.ax.max_abs() < 0.1 * reference.ax.max_abs(),
        "max|A_x| went from {:.3e} (z0=4) to {:.3e} (z0=16)",
        reference.ax.max_abs(),
        homogeneous.ax.max_abs()
    );
}
