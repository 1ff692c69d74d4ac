//! Exact time evolution: the coupled ODE system for the oscillator-basis
//! coefficients, fixed-step RK4 through the magnet, and the spectral free
//! drift afterwards.

use ndarray::Array2;
use rustfft::FftPlanner;

use crate::core_model::{Grid, GridSpinor, ScalarMap, SimParams, SpinorCoeffs};
use crate::oscillator_basis::coeffs_to_grid;
use crate::{C64, Error, Result};

/// Snapshots are kept every this many RK4 steps by [`evolve_in_magnet`].
pub const DEFAULT_SNAPSHOT_STRIDE: usize = 20;

/// Norm drift beyond this aborts the integration.
pub const NORM_DRIFT_LIMIT: f64 = 1e-4;

/// Probability allowed in the top two basis shells before the truncation
/// warning fires.
pub const EDGE_OCCUPANCY_LIMIT: f64 = 1e-6;

/// Time derivatives of the coefficient matrices at time `t`.
///
/// Implements the coupled system obtained by writing the two-component
/// Schroedinger equation in ladder operators: the A-terms are the kinetic
/// energy (two-quantum hops plus the diagonal shell term), the S-terms the
/// linear z-potential within each component, and the phase-dressed
/// b/a-terms the transverse-field coupling that exchanges the spin
/// components. Out-of-range indices contribute zero. In textbook mode the
/// spin-exchange terms are dropped.
pub fn ode_rhs(t: f64, coeffs: &SpinorCoeffs, params: &SimParams) -> (Array2<C64>, Array2<C64>) {
    let n = coeffs.n_basis();
    let mut da = Array2::zeros((n, n));
    let mut db = Array2::zeros((n, n));
    rhs_into(t, &coeffs.a, &coeffs.b, params, &mut da, &mut db);
    (da, db)
}

fn rhs_into(
    t: f64,
    a: &Array2<C64>,
    b: &Array2<C64>,
    params: &SimParams,
    da: &mut Array2<C64>,
    db: &mut Array2<C64>,
) {
    let n_basis = a.nrows();
    let quarter_a = 0.25 * params.a;
    let s_over = params.s / (2.0 * std::f64::consts::SQRT_2);
    let coupling = !params.textbook_mode && params.s != 0.0;
    // Phases of the interaction picture that absorbed the constant field.
    let phase_down_up = C64::cis(-params.s * params.z0 * t); // multiplies b in da
    let phase_up_down = C64::cis(params.s * params.z0 * t); // multiplies a in db

    let sq: Vec<f64> = (0..=n_basis + 1).map(|k| (k as f64).sqrt()).collect();
    let i_unit = C64::new(0.0, 1.0);

    let at = |c: &Array2<C64>, n: isize, m: isize| -> C64 {
        if n < 0 || m < 0 || n >= n_basis as isize || m >= n_basis as isize {
            C64::new(0.0, 0.0)
        } else {
            c[(n as usize, m as usize)]
        }
    };

    for n in 0..n_basis {
        let ni = n as isize;
        for m in 0..n_basis {
            let mi = m as isize;
            // Kinetic part, identical for both components.
            let kinetic = |c: &Array2<C64>| -> C64 {
                at(c, ni + 2, mi) * (sq[n + 1] * sq[n + 2])
                    + at(c, ni - 2, mi) * (sq[n] * sq[n.saturating_sub(1)])
                    + at(c, ni, mi + 2) * (sq[m + 1] * sq[m + 2])
                    + at(c, ni, mi - 2) * (sq[m] * sq[m.saturating_sub(1)])
                    - c[(n, m)] * (2.0 * (n + m + 1) as f64)
            };
            let z_ladder = |c: &Array2<C64>| -> C64 {
                at(c, ni, mi + 1) * sq[m + 1] + at(c, ni, mi - 1) * sq[m]
            };
            let x_ladder = |c: &Array2<C64>| -> C64 {
                at(c, ni + 1, mi) * sq[n + 1] + at(c, ni - 1, mi) * sq[n]
            };

            let mut va = kinetic(a) * quarter_a + z_ladder(a) * s_over;
            let mut vb = kinetic(b) * quarter_a - z_ladder(b) * s_over;
            if coupling {
                va -= x_ladder(b) * phase_down_up * s_over;
                vb -= x_ladder(a) * phase_up_down * s_over;
            }
            da[(n, m)] = i_unit * va;
            db[(n, m)] = i_unit * vb;
        }
    }
}

/// History of one pass through the magnet.
#[derive(Clone, Debug)]
pub struct EvolutionRecord {
    /// Coefficient snapshots at the configured stride; the first is the
    /// initial state, the last the state at t = 1.
    pub snapshots: Vec<SpinorCoeffs>,
    /// Largest deviation of the norm from 1 seen along the trajectory.
    pub norm_drift: f64,
    /// Largest probability seen in the top two basis shells.
    pub max_edge_occupancy: f64,
    /// Set when `max_edge_occupancy` exceeds the documented 1e-6 monitor.
    pub truncation_warning: bool,
    /// Grid representation of the final state, filled by
    /// [`EvolutionRecord::finalize_on_grid`].
    pub final_grid: Option<GridSpinor>,
}

impl EvolutionRecord {
    pub fn final_coeffs(&self) -> &SpinorCoeffs {
        self.snapshots.last().expect("record holds at least the initial snapshot")
    }

    /// Sample the final state on the grid and optionally apply a free drift
    /// of the given duration; the result is stored and returned.
    pub fn finalize_on_grid(
        &mut self,
        params: &SimParams,
        drift_duration: Option<f64>,
    ) -> Result<&GridSpinor> {
        let mut grid_state = coeffs_to_grid(self.final_coeffs(), params);
        if let Some(td) = drift_duration {
            grid_state = free_drift(&grid_state, td, params);
        }
        self.final_grid = Some(grid_state);
        Ok(self.final_grid.as_ref().unwrap())
    }
}

/// Integrate the coefficient system from t = 0 to t = 1 with classic RK4,
/// keeping snapshots at [`DEFAULT_SNAPSHOT_STRIDE`].
///
/// The step count is `round(1/dt)`, so the requested step is adjusted to
/// divide the traversal exactly. Fails if the norm drifts by more than
/// [`NORM_DRIFT_LIMIT`].
pub fn evolve_in_magnet(initial: &SpinorCoeffs, params: &SimParams) -> Result<EvolutionRecord> {
    evolve_with_stride(initial, params, DEFAULT_SNAPSHOT_STRIDE)
}

pub fn evolve_with_stride(
    initial: &SpinorCoeffs,
    params: &SimParams,
    stride: usize,
) -> Result<EvolutionRecord> {
    params.validate()?;
    if (initial.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::validation(
            "initial",
            format!("initial state must have unit norm, got {}", initial.norm()),
        ));
    }
    if initial.n_basis() != params.n_basis {
        return Err(Error::validation(
            "initial",
            format!(
                "coefficient shape {} does not match n_basis {}",
                initial.n_basis(),
                params.n_basis
            ),
        ));
    }

    let n_steps = (1.0 / params.dt).round().max(1.0) as usize;
    let dt = 1.0 / n_steps as f64;
    let stride = stride.max(1);

    let mut state = initial.clone();
    state.t = 0.0;
    let n = params.n_basis;
    let zero = || Array2::<C64>::zeros((n, n));
    let (mut k1a, mut k1b) = (zero(), zero());
    let (mut k2a, mut k2b) = (zero(), zero());
    let (mut k3a, mut k3b) = (zero(), zero());
    let (mut k4a, mut k4b) = (zero(), zero());
    let (mut ta, mut tb) = (zero(), zero());

    let mut record = EvolutionRecord {
        snapshots: vec![state.clone()],
        norm_drift: 0.0,
        max_edge_occupancy: state.edge_occupancy(2),
        truncation_warning: false,
        final_grid: None,
    };

    let monitor = |record: &mut EvolutionRecord, state: &SpinorCoeffs| -> Result<()> {
        let drift = (state.norm() - 1.0).abs();
        record.norm_drift = record.norm_drift.max(drift);
        record.max_edge_occupancy = record.max_edge_occupancy.max(state.edge_occupancy(2));
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::IntegrationFailure { norm_drift: drift });
        }
        Ok(())
    };

    for step in 0..n_steps {
        let t = step as f64 * dt;

        rhs_into(t, &state.a, &state.b, params, &mut k1a, &mut k1b);
        stage(&mut ta, &state.a, &k1a, 0.5 * dt);
        stage(&mut tb, &state.b, &k1b, 0.5 * dt);
        rhs_into(t + 0.5 * dt, &ta, &tb, params, &mut k2a, &mut k2b);
        stage(&mut ta, &state.a, &k2a, 0.5 * dt);
        stage(&mut tb, &state.b, &k2b, 0.5 * dt);
        rhs_into(t + 0.5 * dt, &ta, &tb, params, &mut k3a, &mut k3b);
        stage(&mut ta, &state.a, &k3a, dt);
        stage(&mut tb, &state.b, &k3b, dt);
        rhs_into(t + dt, &ta, &tb, params, &mut k4a, &mut k4b);

        let w = dt / 6.0;
        ndarray::azip!((y in &mut state.a, &k1 in &k1a, &k2 in &k2a, &k3 in &k3a, &k4 in &k4a) {
            *y += (k1 + (k2 + k3) * 2.0 + k4) * w;
        });
        ndarray::azip!((y in &mut state.b, &k1 in &k1b, &k2 in &k2b, &k3 in &k3b, &k4 in &k4b) {
            *y += (k1 + (k2 + k3) * 2.0 + k4) * w;
        });
        state.t = (step + 1) as f64 * dt;

        if (step + 1).is_multiple_of(stride) || step + 1 == n_steps {
            monitor(&mut record, &state)?;
            record.snapshots.push(state.clone());
        }
    }
    record.truncation_warning = record.max_edge_occupancy > EDGE_OCCUPANCY_LIMIT;
    Ok(record)
}

/// tmp = base + scale * k
fn stage(tmp: &mut Array2<C64>, base: &Array2<C64>, k: &Array2<C64>, scale: f64) {
    ndarray::azip!((t in tmp, &y in base, &kv in k) *t = y + kv * scale);
}

/// Drift time after which the textbook m = -1/2 lobe reaches z = -z0:
/// t_d = 2 z0 / (S A) - 1/2.
pub fn drift_time(params: &SimParams) -> Result<f64> {
    if params.a * params.s == 0.0 {
        return Err(Error::UndefinedDrift);
    }
    Ok(2.0 * params.z0 / (params.s * params.a) - 0.5)
}

fn fft2_inplace(arr: &mut Array2<C64>, forward: bool) {
    let n = arr.nrows();
    debug_assert_eq!(n, arr.ncols());
    let mut planner = FftPlanner::new();
    let fft =
        if forward { planner.plan_fft_forward(n) } else { planner.plan_fft_inverse(n) };
    for mut row in arr.rows_mut() {
        fft.process(row.as_slice_mut().expect("rows are contiguous"));
    }
    let mut transposed = arr.t().as_standard_layout().into_owned();
    for mut row in transposed.rows_mut() {
        fft.process(row.as_slice_mut().expect("rows are contiguous"));
    }
    arr.assign(&transposed.t());
    if !forward {
        let scale = 1.0 / (n * n) as f64;
        arr.mapv_inplace(|v| v * scale);
    }
}

/// Angular wavenumber of FFT bin `i` on an axis with `n` samples of spacing
/// `dx` (wrap-around ordering).
fn fft_wavenumber(i: usize, n: usize, dx: f64) -> f64 {
    let k = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
    2.0 * std::f64::consts::PI * k / (n as f64 * dx)
}

/// Free evolution exp(-i h0 t_d) with h0 = (A/2)(px^2 + pz^2), applied
/// spectrally: Fourier transform, multiply by
/// exp(-i (A/2)(kx^2 + kz^2) t_d), transform back. Exactly unitary on the
/// grid. Flags the output when probability mass reaches the grid boundary.
pub fn free_drift(state: &GridSpinor, duration: f64, params: &SimParams) -> GridSpinor {
    let grid = state.grid;
    let n = grid.points;
    let dx = grid.dx();
    let mut out = state.clone();
    out.t += duration;

    for comp in [&mut out.up, &mut out.down] {
        fft2_inplace(comp, true);
        for ((i, j), v) in comp.indexed_iter_mut() {
            let kx = fft_wavenumber(i, n, dx);
            let kz = fft_wavenumber(j, n, dx);
            *v *= C64::cis(-0.5 * params.a * (kx * kx + kz * kz) * duration);
        }
        fft2_inplace(comp, false);
    }

    if out.boundary_mass(4) > 1e-3 {
        out.containment_warning = true;
    }
    out
}

/// Momentum-space probability density of a grid state, fft-shifted onto an
/// ascending k-grid (extent pi/dx).
pub fn momentum_density(state: &GridSpinor) -> ScalarMap {
    let n = state.grid.points;
    let dx = state.grid.dx();
    let k_grid = Grid { extent: std::f64::consts::PI / dx, points: n };
    let mut values = Array2::zeros((n, n));
    // |psi~(k)|^2 with the symmetric Fourier convention; the discrete
    // normalisation (dx^2 / 2pi)^2 makes the k-space integral equal the
    // position-space norm.
    let scale = (dx * dx / (2.0 * std::f64::consts::PI)).powi(2);
    for comp in [&state.up, &state.down] {
        let mut f = comp.clone();
        fft2_inplace(&mut f, true);
        for ((i, j), v) in f.indexed_iter() {
            let si = (i + n / 2) % n;
            let sj = (j + n / 2) % n;
            values[(si, sj)] += v.norm_sqr() * scale;
        }
    }
    ScalarMap { grid: k_grid, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::{initial_state, Spin};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rhs_kinetic_terms_from_ground_state() {
        // With only a_00 = 1 and S = 0 the printed system gives
        // da_00 = -i A/2 and da_20 = i (A/4) sqrt(2).
        let mut params = SimParams::new(0.5, 0.0, 4.0);
        params.n_basis = 6;
        let state = initial_state(&params, Spin::Up);
        let (da, _db) = ode_rhs(0.0, &state, &params);
        assert_abs_diff_eq!(da[(0, 0)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(da[(0, 0)].im, -0.25, epsilon = 1e-15); // -A/2
        assert_abs_diff_eq!(da[(2, 0)].im, 0.125 * 2.0f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(da[(0, 2)].im, 0.125 * 2.0f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(da[(1, 1)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rhs_coupling_term_from_ground_state() {
        // a_00 = 1, A = 0, S = 4, z0 = 4, t = 0: db_10 = -i S/(2 sqrt 2) = -i sqrt 2.
        let mut params = SimParams::new(0.0, 4.0, 4.0);
        params.n_basis = 6;
        let state = initial_state(&params, Spin::Up);
        let (_da, db) = ode_rhs(0.0, &state, &params);
        assert_abs_diff_eq!(db[(1, 0)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(db[(1, 0)].im, -(2.0f64.sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn rhs_is_skew_hermitian_on_random_states() {
        let mut params = SimParams::new(0.7, 3.0, 2.5);
        params.n_basis = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..8 {
            let mut state = SpinorCoeffs::zeros(params.n_basis);
            for c in [&mut state.a, &mut state.b] {
                c.mapv_inplace(|_| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
            }
            let norm = state.norm();
            state.a.mapv_inplace(|v| v / norm);
            state.b.mapv_inplace(|v| v / norm);
            let t = rng.random::<f64>();
            let (da, db) = ode_rhs(t, &state, &params);
            let mut inner = C64::new(0.0, 0.0);
            ndarray::azip!((&c in &state.a, &d in &da) inner += c.conj() * d);
            ndarray::azip!((&c in &state.b, &d in &db) inner += c.conj() * d);
            assert!(inner.re.abs() < 1e-12, "Re<c, rhs> = {:.3e}", inner.re);
        }
    }

    #[test]
    fn trivial_parameters_give_identity_evolution() {
        let mut params = SimParams::new(0.0, 0.0, 4.0);
        params.n_basis = 8;
        let initial = initial_state(&params, Spin::Up);
        let record = evolve_in_magnet(&initial, &params).unwrap();
        let fin = record.final_coeffs();
        assert_abs_diff_eq!((fin.a[(0, 0)] - 1.0).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fin.b.iter().map(|v| v.norm_sqr()).sum::<f64>(), 0.0);
        assert_eq!(record.norm_drift, 0.0);
    }

    #[test]
    fn snapshot_times_strictly_increase() {
        let mut params = SimParams::new(0.5, 2.0, 4.0);
        params.n_basis = 16;
        params.dt = 1e-2;
        let record = evolve_in_magnet(&initial_state(&params, Spin::Up), &params).unwrap();
        for pair in record.snapshots.windows(2) {
            assert!(pair[1].t > pair[0].t);
        }
        assert_eq!(record.snapshots.first().unwrap().t, 0.0);
        assert_relative_eq!(record.final_coeffs().t, 1.0);
    }

    #[test]
    fn step_halving_shows_fourth_order_convergence() {
        let mut params = SimParams::new(0.5, 2.0, 2.0);
        params.n_basis = 16;
        let run = |dt: f64| {
            let mut p = params.clone();
            p.dt = dt;
            evolve_in_magnet(&initial_state(&p, Spin::Up), &p).unwrap()
        };
        let coarse = run(1.0 / 125.0);
        let medium = run(1.0 / 250.0);
        let fine = run(1.0 / 500.0);
        let dist = |x: &EvolutionRecord, y: &EvolutionRecord| -> f64 {
            let (xa, ya) = (&x.final_coeffs().a, &y.final_coeffs().a);
            let (xb, yb) = (&x.final_coeffs().b, &y.final_coeffs().b);
            let mut d = 0.0;
            ndarray::azip!((u in xa, v in ya) d += (u - v).norm_sqr());
            ndarray::azip!((u in xb, v in yb) d += (u - v).norm_sqr());
            d.sqrt()
        };
        let ratio = dist(&coarse, &medium) / dist(&medium, &fine);
        assert!((12.0..=20.0).contains(&ratio), "convergence ratio {ratio:.2}");
    }

    #[test]
    fn textbook_mode_conserves_each_component() {
        let mut params = SimParams::new(0.5, 4.0, 4.0).with_textbook_mode(true);
        params.n_basis = 24;
        let record = evolve_in_magnet(&initial_state(&params, Spin::Up), &params).unwrap();
        for snap in &record.snapshots {
            assert_abs_diff_eq!(snap.component_norm_sq(Spin::Up), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(snap.component_norm_sq(Spin::Down), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn undersized_basis_raises_truncation_warning() {
        // Truncating the generator keeps it anti-Hermitian, so the norm
        // survives; the edge-occupancy monitor is what reports the damage.
        let mut params = SimParams::new(0.5, 4.0, 4.0);
        params.n_basis = 8;
        let record = evolve_in_magnet(&initial_state(&params, Spin::Up), &params).unwrap();
        assert!(record.truncation_warning);
        assert!(record.max_edge_occupancy > EDGE_OCCUPANCY_LIMIT);
        assert!(record.norm_drift < 1e-8);
    }

    #[test]
    fn drift_time_reference_values() {
        assert_relative_eq!(drift_time(&SimParams::new(0.5, 4.0, 4.0)).unwrap(), 3.5);
        assert_relative_eq!(drift_time(&SimParams::new(0.1, 20.0, 4.0)).unwrap(), 3.5);
        // 2 z0 = AS gives t_d = 1/2.
        assert_relative_eq!(drift_time(&SimParams::new(1.0, 4.0, 2.0)).unwrap(), 0.5);
        assert!(matches!(
            drift_time(&SimParams::new(0.0, 0.0, 4.0)),
            Err(Error::UndefinedDrift)
        ));
    }

    #[test]
    fn free_drift_zero_duration_is_identity() {
        let params = SimParams::new(0.5, 0.0, 4.0);
        let state = coeffs_to_grid(&initial_state(&params, Spin::Up), &params);
        let drifted = free_drift(&state, 0.0, &params);
        let mut worst = 0.0f64;
        ndarray::azip!((u in &state.up, v in &drifted.up) worst = worst.max((u - v).norm()));
        assert!(worst < 1e-12, "identity drift deviates by {worst:.3e}");
    }

    #[test]
    fn free_drift_spreads_gaussian_width() {
        let params = SimParams::new(0.5, 0.0, 4.0);
        let state = coeffs_to_grid(&initial_state(&params, Spin::Up), &params);
        for t in [0.5, 1.0, 2.0] {
            let drifted = free_drift(&state, t, &params);
            let density = drifted.density();
            let grid = drifted.grid;
            let (mut mass, mut var_x) = (0.0, 0.0);
            for ((i, _j), v) in density.values.indexed_iter() {
                let x = grid.coord(i);
                mass += v;
                var_x += x * x * v;
            }
            var_x /= mass;
            let width = (2.0 * var_x).sqrt();
            let expected = (1.0 + (params.a * t).powi(2)).sqrt();
            assert_abs_diff_eq!(width, expected, epsilon = 1e-6);
            assert_relative_eq!(drifted.norm(), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn free_drift_preserves_momentum_distribution() {
        let mut params = SimParams::new(0.5, 2.0, 4.0);
        params.n_basis = 24;
        let mut record = evolve_in_magnet(&initial_state(&params, Spin::Up), &params).unwrap();
        let before = record.finalize_on_grid(&params, None).unwrap().clone();
        let after = free_drift(&before, 1.7, &params);
        let p_before = momentum_density(&before);
        let p_after = momentum_density(&after);
        let mut worst = 0.0f64;
        ndarray::azip!((u in &p_before.values, v in &p_after.values) {
            worst = worst.max((u - v).abs());
        });
        assert!(worst < 1e-12, "momentum marginal changed by {worst:.3e}");
    }
}
