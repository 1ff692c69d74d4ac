//! Reconstruction quality versus field inhomogeneity: as z0 grows at fixed
//! deflection the A_x basis map fades, so noise hurts the transverse
//! polarisation components more and more.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sgsim_core::core_model::{initial_state, PolarizationVector, SimParams, Spin};
use sgsim_core::exact_evolution::{drift_time, evolve_in_magnet, free_drift};
use sgsim_core::observables::RunPair;
use sgsim_core::oscillator_basis::coeffs_to_grid;
use sgsim_core::tomography::{predicted_density, reconstruct_polarization, AsymmetryBasis};

#[test]
fn px_reconstruction_degrades_monotonically_with_z0() {
    let injected = PolarizationVector::new(0.6, 0.0, 0.4);
    let mut errors = Vec::new();
    for z0 in [3.0, 4.0, 8.0] {
        let params = SimParams::new(0.5, 4.0, z0);
        let td = drift_time(&params).unwrap();
        let run = |m0: Spin| {
            let record = evolve_in_magnet(&initial_state(&params, m0), &params).unwrap();
            free_drift(&coeffs_to_grid(record.final_coeffs(), &params), td, &params)
        };
        let basis =
            AsymmetryBasis::from_run_pair(&RunPair::new(run(Spin::Up), run(Spin::Down)).unwrap());
        let clean = predicted_density(&basis, &injected).unwrap();
        let amplitude = 1e-3 * basis.p0.max_value();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..6 {
            let mut noisy = clean.clone();
            noisy
                .values
                .mapv_inplace(|v| v + amplitude * (2.0 * rng.random::<f64>() - 1.0));
            let rec = reconstruct_polarization(&noisy, &basis).unwrap();
            worst = worst.max((rec.polarization.x - injected.x).abs());
        }
        errors.push((z0, worst));
    }
    for pair in errors.windows(2) {
        assert!(
            pair[1].1 > pair[0].1,
            "p_x error should grow with z0: {errors:?}"
        );
    }
}
