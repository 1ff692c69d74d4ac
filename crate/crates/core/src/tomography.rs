//! Polarisation tomography: the forward model for the scatter-pattern
//! density of a polarised beam, and its least-squares inversion.
//!
//! The detected density of a beam with polarisation vector p is
//! `P(x,z) = P0 + (p_x A_x + p_y A_y + p_z A_z)/2`; because the three
//! asymmetry maps have independent spatial shapes, a recorded pattern
//! determines all three components of p.

use crate::core_model::{PolarizationVector, ScalarMap};
use crate::observables::{AsymmetryMaps, RunPair};
use crate::{Error, Result};

/// Condition number of the asymmetry normal matrix beyond which the fit is
/// refused.
pub const CONDITION_LIMIT: f64 = 1e8;

/// The unpolarised density and the three asymmetry maps on a common grid:
/// everything the forward model and the fit need.
#[derive(Clone, Debug)]
pub struct AsymmetryBasis {
    pub p0: ScalarMap,
    pub ax: ScalarMap,
    pub ay: ScalarMap,
    pub az: ScalarMap,
}

impl AsymmetryBasis {
    pub fn new(p0: ScalarMap, maps: AsymmetryMaps) -> Self {
        AsymmetryBasis { p0, ax: maps.ax, ay: maps.ay, az: maps.az }
    }

    /// Build the basis from the two coherent runs.
    pub fn from_run_pair(pair: &RunPair) -> Self {
        AsymmetryBasis::new(
            crate::observables::probability_density(pair),
            crate::observables::asymmetry_maps(pair),
        )
    }
}

/// Forward model: density seen by a detector for beam polarisation `p`.
pub fn predicted_density(basis: &AsymmetryBasis, p: &PolarizationVector) -> Result<ScalarMap> {
    p.validate()?;
    let mut out = basis.p0.clone();
    ndarray::azip!(
        (o in &mut out.values, ax in &basis.ax.values, ay in &basis.ay.values,
         az in &basis.az.values)
    {
        *o += 0.5 * (p.x * ax + p.y * ay + p.z * az);
    });
    Ok(out)
}

/// Result of a polarisation fit.
#[derive(Copy, Clone, Debug)]
pub struct Reconstruction {
    pub polarization: PolarizationVector,
    /// L2 norm of the misfit between the observed map and the fit.
    pub residual: f64,
    /// Condition number of the 3x3 asymmetry normal matrix.
    pub condition_number: f64,
    /// Fitted overall scale of the pattern; 1 when the observed map was
    /// already normalised and the 3-parameter fit was used.
    pub scale: f64,
    /// The raw fit left the unit sphere (no constraint is imposed); a
    /// diagnostic of the noise level.
    pub exceeded_unit_sphere: bool,
}

/// Linear least-squares fit of the polarisation vector to an observed
/// density map.
///
/// A normalised map (unit integral within 1e-6) is fit with the three
/// polarisation components; otherwise an overall scale is fit alongside
/// them, since the forward model only fixes the pattern up to
/// proportionality. Fails with a degenerate-basis error when the asymmetry
/// normal matrix cannot constrain some axis, as happens for a textbook-mode
/// basis whose A_x and A_y vanish identically.
pub fn reconstruct_polarization(
    observed: &ScalarMap,
    basis: &AsymmetryBasis,
) -> Result<Reconstruction> {
    if observed.grid != basis.p0.grid {
        return Err(Error::FrameMismatch(format!(
            "observed grid {:?} does not match basis grid {:?}",
            observed.grid, basis.p0.grid
        )));
    }
    let area = observed.grid.cell_area();
    let dot = |a: &ScalarMap, b: &ScalarMap| -> f64 {
        let mut acc = 0.0;
        ndarray::azip!((u in &a.values, v in &b.values) acc += u * v);
        acc * area
    };

    let half = |m: &ScalarMap| ScalarMap {
        grid: m.grid,
        values: m.values.mapv(|v| 0.5 * v),
    };
    let columns = [half(&basis.ax), half(&basis.ay), half(&basis.az)];

    let mut normal = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = dot(&columns[i], &columns[j]);
            normal[i][j] = v;
            normal[j][i] = v;
        }
    }
    let eigen = jacobi_eigenvalues_3x3(normal);
    let max_eig = eigen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_eig = eigen.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition_number = if min_eig > 0.0 { max_eig / min_eig } else { f64::INFINITY };
    if !condition_number.is_finite() || condition_number > CONDITION_LIMIT {
        let max_diag = normal.iter().enumerate().map(|(i, r)| r[i]).fold(0.0f64, f64::max);
        let axes = ['x', 'y', 'z']
            .into_iter()
            .enumerate()
            .filter(|(i, _)| normal[*i][*i] <= max_diag * 1e-12)
            .map(|(_, c)| c)
            .collect();
        return Err(Error::DegenerateBasis { condition_number, axes });
    }

    let normalised = (observed.integrate() - 1.0).abs() <= 1e-6;
    let (scale, p) = if normalised {
        let mut rhs = [0.0f64; 3];
        let diff = ScalarMap {
            grid: observed.grid,
            values: &observed.values - &basis.p0.values,
        };
        for i in 0..3 {
            rhs[i] = dot(&columns[i], &diff);
        }
        let sol = solve_linear::<3>(&mut normal.map(|r| r.to_vec()), &mut rhs.to_vec());
        (1.0, PolarizationVector::new(sol[0], sol[1], sol[2]))
    } else {
        // Fit observed ~ s P0 + q . A/2, then p = q / s.
        let mut m4 = vec![vec![0.0f64; 4]; 4];
        let mut rhs = vec![0.0f64; 4];
        m4[0][0] = dot(&basis.p0, &basis.p0);
        rhs[0] = dot(&basis.p0, observed);
        for i in 0..3 {
            let v = dot(&basis.p0, &columns[i]);
            m4[0][i + 1] = v;
            m4[i + 1][0] = v;
            rhs[i + 1] = dot(&columns[i], observed);
            for j in 0..3 {
                m4[i + 1][j + 1] = normal[i][j];
            }
        }
        let sol = solve_linear::<4>(&mut m4, &mut rhs);
        let s = sol[0];
        (s, PolarizationVector::new(sol[1] / s, sol[2] / s, sol[3] / s))
    };

    let fitted = {
        let mut f = basis.p0.clone();
        ndarray::azip!(
            (o in &mut f.values, ax in &columns[0].values, ay in &columns[1].values,
             az in &columns[2].values)
        {
            *o = scale * *o + scale * (p.x * ax + p.y * ay + p.z * az);
        });
        f
    };
    let mut miss = 0.0;
    ndarray::azip!((u in &observed.values, v in &fitted.values) miss += (u - v) * (u - v));
    let residual = (miss * area).sqrt();

    Ok(Reconstruction {
        polarization: p,
        residual,
        condition_number,
        scale,
        exceeded_unit_sphere: p.magnitude() > 1.0 + 1e-12,
    })
}

/// Gaussian elimination with partial pivoting for the tiny normal systems.
#[allow(clippy::needless_range_loop)]
fn solve_linear<const N: usize>(mat: &mut [Vec<f64>], rhs: &mut [f64]) -> [f64; N] {
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))
            .unwrap();
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..N {
            let factor = mat[row][col] / mat[col][col];
            for k in col..N {
                mat[row][k] -= factor * mat[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut out = [0.0f64; N];
    for row in (0..N).rev() {
        let mut acc = rhs[row];
        for k in row + 1..N {
            acc -= mat[row][k] * out[k];
        }
        out[row] = acc / mat[row][row];
    }
    out
}

/// Eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigenvalues_3x3(mut m: [[f64; 3]; 3]) -> [f64; 3] {
    for _ in 0..64 {
        let off = m[0][1].abs() + m[0][2].abs() + m[1][2].abs();
        let scale = (0..3).map(|i| m[i][i].abs()).fold(0.0f64, f64::max);
        if off <= scale * 1e-15 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if m[p][q].abs() <= scale * 1e-18 {
                continue;
            }
            let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
        }
    }
    [m[0][0], m[1][1], m[2][2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximations::coherent_state_wavefunction;
    use crate::core_model::{initial_state, SimParams, Spin};
    use crate::exact_evolution::free_drift;
    use crate::observables::{probability_density, textbook_asymmetry};
    use crate::oscillator_basis::coeffs_to_grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    /// A cheap basis with all three asymmetries active: coherent-state runs
    /// followed by a free drift (A_y only develops during free evolution).
    fn drifted_basis() -> &'static AsymmetryBasis {
        static BASIS: OnceLock<AsymmetryBasis> = OnceLock::new();
        BASIS.get_or_init(|| {
            let p = SimParams::new(0.5, 4.0, 4.0);
            let run = |m0| free_drift(&coherent_state_wavefunction(&p, 1.0, m0), 3.5, &p);
            let pair = RunPair::new(run(Spin::Up), run(Spin::Down)).unwrap();
            AsymmetryBasis::from_run_pair(&pair)
        })
    }

    #[test]
    fn predicted_density_limits() {
        let basis = drifted_basis();
        let unpolarised =
            predicted_density(basis, &PolarizationVector::new(0.0, 0.0, 0.0)).unwrap();
        let mut worst = 0.0f64;
        ndarray::azip!((u in &unpolarised.values, v in &basis.p0.values) {
            worst = worst.max((u - v).abs());
        });
        assert_eq!(worst, 0.0);

        let z_pol = predicted_density(basis, &PolarizationVector::new(0.0, 0.0, 1.0)).unwrap();
        let i = 31;
        let j = 119;
        assert_abs_diff_eq!(
            z_pol.values[(i, j)],
            basis.p0.values[(i, j)] + 0.5 * basis.az.values[(i, j)],
            epsilon = 1e-15
        );
    }

    #[test]
    fn predicted_density_stays_normalised_and_nonnegative() {
        let basis = drifted_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..12 {
            let v = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1.0);
            let scale = rng.random::<f64>() / norm;
            let p = PolarizationVector::new(v[0] * scale, v[1] * scale, v[2] * scale);
            let map = predicted_density(basis, &p).unwrap();
            assert_abs_diff_eq!(map.integrate(), 1.0, epsilon = 1e-4);
            let min = map.values.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > -1e-9, "density dipped to {min:.3e}");
        }
    }

    #[test]
    fn predicted_density_rejects_unphysical_polarisation() {
        let basis = drifted_basis();
        let err = predicted_density(basis, &PolarizationVector::new(0.9, 0.9, 0.9));
        assert!(matches!(err, Err(Error::Validation { field: "polarization", .. })));
    }

    #[test]
    fn reconstruction_round_trip_is_exact() {
        let basis = drifted_basis();
        let p = PolarizationVector::new(0.0, 0.0, 1.0);
        let observed = predicted_density(basis, &p).unwrap();
        let rec = reconstruct_polarization(&observed, basis).unwrap();
        assert_abs_diff_eq!(rec.polarization.x, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(rec.polarization.y, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(rec.polarization.z, 1.0, epsilon = 1e-8);
        assert!(rec.residual < 1e-10);
        assert_eq!(rec.scale, 1.0);
    }

    #[test]
    fn reconstruction_round_trip_random_polarisations() {
        let basis = drifted_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let v = [
                2.0 * rng.random::<f64>() - 1.0,
                2.0 * rng.random::<f64>() - 1.0,
                2.0 * rng.random::<f64>() - 1.0,
            ];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let shrink = if norm > 1.0 { rng.random::<f64>() / norm } else { 1.0 };
            let p = PolarizationVector::new(v[0] * shrink, v[1] * shrink, v[2] * shrink);
            let observed = predicted_density(basis, &p).unwrap();
            let rec = reconstruct_polarization(&observed, basis).unwrap();
            assert_abs_diff_eq!(rec.polarization.x, p.x, epsilon = 1e-8);
            assert_abs_diff_eq!(rec.polarization.y, p.y, epsilon = 1e-8);
            assert_abs_diff_eq!(rec.polarization.z, p.z, epsilon = 1e-8);
        }
    }

    #[test]
    fn reconstruction_handles_unnormalised_input_with_scale() {
        let basis = drifted_basis();
        let p = PolarizationVector::new(0.3, -0.2, 0.5);
        let mut observed = predicted_density(basis, &p).unwrap();
        observed.values.mapv_inplace(|v| 2.75 * v);
        let rec = reconstruct_polarization(&observed, basis).unwrap();
        assert_relative_eq!(rec.scale, 2.75, max_relative = 1e-8);
        assert_abs_diff_eq!(rec.polarization.x, p.x, epsilon = 1e-8);
        assert_abs_diff_eq!(rec.polarization.y, p.y, epsilon = 1e-8);
        assert_abs_diff_eq!(rec.polarization.z, p.z, epsilon = 1e-8);
    }

    #[test]
    fn reconstruction_tolerates_noise() {
        let basis = drifted_basis();
        let p = PolarizationVector::new(0.6, 0.0, 0.8);
        let clean = predicted_density(basis, &p).unwrap();
        let amplitude = 1e-3 * basis.p0.max_value();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..5 {
            let mut noisy = clean.clone();
            noisy.values.mapv_inplace(|v| v + amplitude * (2.0 * rng.random::<f64>() - 1.0));
            let rec = reconstruct_polarization(&noisy, basis).unwrap();
            assert_abs_diff_eq!(rec.polarization.x, p.x, epsilon = 0.05);
            assert_abs_diff_eq!(rec.polarization.y, p.y, epsilon = 0.05);
            assert_abs_diff_eq!(rec.polarization.z, p.z, epsilon = 0.05);
        }
    }

    #[test]
    fn textbook_basis_is_degenerate_in_x_and_y() {
        // A textbook-mode run conserves the spin projection, so its basis
        // carries A_x = A_y = 0: only p_z is observable.
        let params = SimParams::new(0.5, 4.0, 4.0);
        let pair = RunPair::new(
            coeffs_to_grid(&initial_state(&params, Spin::Up), &params),
            coeffs_to_grid(&initial_state(&params, Spin::Down), &params),
        )
        .unwrap();
        let p0 = probability_density(&pair);
        let az = textbook_asymmetry(&p0);
        let zeros = ScalarMap::zeros(p0.grid);
        let basis = AsymmetryBasis { p0: p0.clone(), ax: zeros.clone(), ay: zeros, az };

        let mut observed = p0.clone();
        // An x-polarisation signal the basis cannot represent.
        ndarray::azip!((o in &mut observed.values, a in &drifted_basis().ax.values) {
            *o += 0.3 * a;
        });
        match reconstruct_polarization(&observed, &basis) {
            Err(Error::DegenerateBasis { axes, .. }) => {
                assert!(axes.contains(&'x') && axes.contains(&'y'), "axes = {axes:?}");
            }
            other => panic!("expected degenerate basis, got {other:?}"),
        }
    }
}
