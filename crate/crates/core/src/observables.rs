//! Detection-plane observables: probability density, spin-flip measures,
//! focusing moments, exact-vs-approximate overlap, and the polarisation
//! asymmetry maps that feed the tomography module.

use ndarray::Array2;

use crate::core_model::{GridSpinor, ScalarMap, Spin, SpinorCoeffs};
use crate::{C64, Error, Result};

/// Final states of the two coherent runs (m0 = +1/2 and m0 = -1/2) on a
/// common grid, time and phase frame. Every asymmetry is bilinear in these
/// two amplitudes, so the pair carries the same information as a mixed
/// beam.
#[derive(Clone, Debug)]
pub struct RunPair {
    pub run_up: GridSpinor,
    pub run_down: GridSpinor,
}

impl RunPair {
    /// Bundle two runs, checking that they share geometry and time and that
    /// both carry unit norm within 1e-4.
    pub fn new(run_up: GridSpinor, run_down: GridSpinor) -> Result<Self> {
        if run_up.grid != run_down.grid {
            return Err(Error::FrameMismatch(format!(
                "grids differ: {:?} vs {:?}",
                run_up.grid, run_down.grid
            )));
        }
        if (run_up.t - run_down.t).abs() > 1e-12 {
            return Err(Error::FrameMismatch(format!(
                "times differ: {} vs {}",
                run_up.t, run_down.t
            )));
        }
        for (label, state) in [("m0 = +1/2", &run_up), ("m0 = -1/2", &run_down)] {
            let norm = state.norm();
            if (norm - 1.0).abs() > 1e-4 {
                return Err(Error::FrameMismatch(format!(
                    "run {label} has norm {norm:.6}, expected 1"
                )));
            }
        }
        Ok(RunPair { run_up, run_down })
    }

    pub fn run(&self, m0: Spin) -> &GridSpinor {
        match m0 {
            Spin::Up => &self.run_up,
            Spin::Down => &self.run_down,
        }
    }
}

/// Probability distribution of an initially unpolarised beam:
/// P0(x,z) = (1/2) Sum over components and initial projections of the
/// density.
pub fn probability_density(pair: &RunPair) -> ScalarMap {
    let grid = pair.run_up.grid;
    let mut values = Array2::zeros((grid.points, grid.points));
    for state in [&pair.run_up, &pair.run_down] {
        ndarray::azip!((d in &mut values, u in &state.up, v in &state.down) {
            *d += 0.5 * (u.norm_sqr() + v.norm_sqr());
        });
    }
    ScalarMap { grid, values }
}

/// Probability that a pure-m0 run leaves the magnet with the opposite spin
/// projection.
pub fn spin_flip_probability(final_state: &GridSpinor, m0: Spin) -> f64 {
    final_state.component_norm_sq(m0.flipped())
}

/// Pointwise density of the spin-flipped component of a pure-m0 run.
pub fn spin_flip_density(final_state: &GridSpinor, m0: Spin) -> ScalarMap {
    let values = final_state.component(m0.flipped()).mapv(|v| v.norm_sqr());
    ScalarMap { grid: final_state.grid, values }
}

/// First and second moments of one spin component.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Moments {
    /// Probability carried by the component.
    pub weight: f64,
    pub mean_x: f64,
    pub mean_z: f64,
    pub var_x: f64,
    pub var_z: f64,
}

/// Moments of both spin components; a component holding less than 1e-6 of
/// the probability reports no moments.
#[derive(Copy, Clone, Debug, Default)]
pub struct SpinorMoments {
    pub up: Option<Moments>,
    pub down: Option<Moments>,
}

const MOMENT_WEIGHT_FLOOR: f64 = 1e-6;

/// Per-component position moments of a grid state.
pub fn component_moments(state: &GridSpinor) -> SpinorMoments {
    let grid = state.grid;
    let mut out = SpinorMoments::default();
    for m in Spin::BOTH {
        let comp = state.component(m);
        let (mut w, mut sx, mut sz, mut sxx, mut szz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((i, j), v) in comp.indexed_iter() {
            let p = v.norm_sqr();
            let (x, z) = (grid.coord(i), grid.coord(j));
            w += p;
            sx += x * p;
            sz += z * p;
            sxx += x * x * p;
            szz += z * z * p;
        }
        let area = grid.cell_area();
        w *= area;
        if w < MOMENT_WEIGHT_FLOOR {
            continue;
        }
        let mean_x = sx * area / w;
        let mean_z = sz * area / w;
        let moments = Moments {
            weight: w,
            mean_x,
            mean_z,
            var_x: sxx * area / w - mean_x * mean_x,
            var_z: szz * area / w - mean_z * mean_z,
        };
        match m {
            Spin::Up => out.up = Some(moments),
            Spin::Down => out.down = Some(moments),
        }
    }
    out
}

/// Per-component moments straight from the oscillator coefficients, using
/// the ladder matrix elements; exact for states contained in the basis and
/// cheap enough to evaluate at every snapshot.
pub fn snapshot_moments(coeffs: &SpinorCoeffs) -> SpinorMoments {
    let mut out = SpinorMoments::default();
    for m in Spin::BOTH {
        let c = match m {
            Spin::Up => &coeffs.a,
            Spin::Down => &coeffs.b,
        };
        if let Some(moments) = coeff_moments(c) {
            match m {
                Spin::Up => out.up = Some(moments),
                Spin::Down => out.down = Some(moments),
            }
        }
    }
    out
}

fn coeff_moments(c: &Array2<C64>) -> Option<Moments> {
    let weight: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    if weight < MOMENT_WEIGHT_FLOOR {
        return None;
    }
    let n_basis = c.nrows();
    let sqrt2 = std::f64::consts::SQRT_2;
    // <q> = sqrt(2) Re Sum conj(c_{k+1}) sqrt(k+1) c_k along the axis,
    // <q^2> = Sum (k + 1/2)|c|^2 + Re Sum conj(c_{k+2}) sqrt((k+1)(k+2)) c_k.
    let (mut zx, mut zz) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let (mut qx, mut qz) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let (mut diag_x, mut diag_z) = (0.0, 0.0);
    for ((n, m), v) in c.indexed_iter() {
        let p = v.norm_sqr();
        diag_x += (n as f64 + 0.5) * p;
        diag_z += (m as f64 + 0.5) * p;
        if n + 1 < n_basis {
            zx += c[(n + 1, m)].conj() * ((n + 1) as f64).sqrt() * v;
        }
        if m + 1 < n_basis {
            zz += c[(n, m + 1)].conj() * ((m + 1) as f64).sqrt() * v;
        }
        if n + 2 < n_basis {
            qx += c[(n + 2, m)].conj() * (((n + 1) * (n + 2)) as f64).sqrt() * v;
        }
        if m + 2 < n_basis {
            qz += c[(n, m + 2)].conj() * (((m + 1) * (m + 2)) as f64).sqrt() * v;
        }
    }
    let mean_x = sqrt2 * zx.re / weight;
    let mean_z = sqrt2 * zz.re / weight;
    let x_sq = (diag_x + qx.re) / weight;
    let z_sq = (diag_z + qz.re) / weight;
    Some(Moments {
        weight,
        mean_x,
        mean_z,
        var_x: x_sq - mean_x * mean_x,
        var_z: z_sq - mean_z * mean_z,
    })
}

/// Moments of a scalar density restricted to the lower (z < 0) and upper
/// (z > 0) half planes, for lobe-by-lobe focusing comparisons. The z = 0
/// row belongs to neither half.
pub fn half_plane_moments(map: &ScalarMap) -> (Option<Moments>, Option<Moments>) {
    let grid = map.grid;
    let mut halves = [(0.0, 0.0, 0.0, 0.0, 0.0); 2]; // (w, sx, sz, sxx, szz)
    for ((i, j), &p) in map.values.indexed_iter() {
        let z = grid.coord(j);
        if z == 0.0 {
            continue;
        }
        let idx = if z < 0.0 { 0 } else { 1 };
        let x = grid.coord(i);
        let h = &mut halves[idx];
        h.0 += p;
        h.1 += x * p;
        h.2 += z * p;
        h.3 += x * x * p;
        h.4 += z * z * p;
    }
    let area = grid.cell_area();
    let build = |(w, sx, sz, sxx, szz): (f64, f64, f64, f64, f64)| -> Option<Moments> {
        let w = w * area;
        if w < MOMENT_WEIGHT_FLOOR {
            return None;
        }
        let mean_x = sx * area / w;
        let mean_z = sz * area / w;
        Some(Moments {
            weight: w,
            mean_x,
            mean_z,
            var_x: sxx * area / w - mean_x * mean_x,
            var_z: szz * area / w - mean_z * mean_z,
        })
    };
    (build(halves[0]), build(halves[1]))
}

/// Global-phase-insensitive overlap between an exact and an approximate
/// run pair at equal time:
/// O = (1/2) |Sum over m0 of <exact; m0 | approx; m0>|.
pub fn overlap(exact: &RunPair, approx: &RunPair) -> f64 {
    assert_eq!(exact.run_up.grid, approx.run_up.grid, "overlap requires a common grid");
    assert!(
        (exact.run_up.t - approx.run_up.t).abs() < 1e-9,
        "overlap requires a common time"
    );
    let mut total = C64::new(0.0, 0.0);
    for m0 in Spin::BOTH {
        let (ex, ap) = (exact.run(m0), approx.run(m0));
        let mut inner = C64::new(0.0, 0.0);
        ndarray::azip!((u in &ex.up, v in &ap.up) inner += u.conj() * v);
        ndarray::azip!((u in &ex.down, v in &ap.down) inner += u.conj() * v);
        total += inner * ex.grid.cell_area();
    }
    0.5 * total.norm()
}

/// 1 - O for each analytic approximation against the exact pair.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct OverlapDeficits {
    pub adiabatic: f64,
    pub pseudo_adiabatic: f64,
    pub coherent_state: f64,
    pub symmetrized: f64,
}

impl OverlapDeficits {
    /// The documented quality ordering: the deficit shrinks from adiabatic
    /// to pseudo-adiabatic to coherent-state to symmetrized.
    pub fn strictly_ordered(&self) -> bool {
        self.adiabatic > self.pseudo_adiabatic
            && self.pseudo_adiabatic > self.coherent_state
            && self.coherent_state > self.symmetrized
    }
}

/// Position-resolved polarisation asymmetries.
#[derive(Clone, Debug)]
pub struct AsymmetryMaps {
    pub ax: ScalarMap,
    pub ay: ScalarMap,
    pub az: ScalarMap,
}

/// Asymmetry maps from the two coherent runs:
/// A_i = Sum over m, m0, m0' of psi_m^{m0} (psi_m^{m0'})* <m0|sigma_i|m0'>
/// with the standard Pauli matrices in the (+1/2, -1/2) basis. A_z needs
/// only the diagonal densities; A_x and A_y are the real and imaginary
/// parts of twice the cross-run interference.
pub fn asymmetry_maps(pair: &RunPair) -> AsymmetryMaps {
    let grid = pair.run_up.grid;
    let shape = (grid.points, grid.points);
    let (mut ax, mut ay, mut az): (Array2<f64>, Array2<f64>, Array2<f64>) = (
        Array2::zeros(shape),
        Array2::zeros(shape),
        Array2::zeros(shape),
    );
    for ((i, j), ax) in ax.indexed_iter_mut() {
        let (uu, ud) = (pair.run_up.up[(i, j)], pair.run_up.down[(i, j)]);
        let (du, dd) = (pair.run_down.up[(i, j)], pair.run_down.down[(i, j)]);
        let cross = uu * du.conj() + ud * dd.conj();
        *ax = 2.0 * cross.re;
        ay[(i, j)] = 2.0 * cross.im;
        az[(i, j)] = uu.norm_sqr() + ud.norm_sqr() - du.norm_sqr() - dd.norm_sqr();
    }
    AsymmetryMaps {
        ax: ScalarMap { grid, values: ax },
        ay: ScalarMap { grid, values: ay },
        az: ScalarMap { grid, values: az },
    }
}

/// The textbook reference asymmetry: A_z = +2 P0 above the beam axis,
/// -2 P0 below, zero on the z = 0 grid line.
pub fn textbook_asymmetry(p0: &ScalarMap) -> ScalarMap {
    let grid = p0.grid;
    let mut values = p0.values.clone();
    for ((_i, j), v) in values.indexed_iter_mut() {
        let z = grid.coord(j);
        *v *= if z > 0.0 {
            2.0
        } else if z < 0.0 {
            -2.0
        } else {
            0.0
        };
    }
    ScalarMap { grid, values }
}

/// Scalar and map-valued summaries of a run, assembled piecewise by the
/// drivers; fields stay `None` when the run kind does not produce them.
#[derive(Clone, Debug, Default)]
pub struct ObservableReport {
    pub p0: Option<ScalarMap>,
    pub asymmetries: Option<AsymmetryMaps>,
    pub flip_density: Option<ScalarMap>,
    pub flip_up_to_down: Option<f64>,
    pub flip_down_to_up: Option<f64>,
    pub moments_run_up: Option<SpinorMoments>,
    pub moments_run_down: Option<SpinorMoments>,
    pub overlap_deficits: Option<OverlapDeficits>,
}
