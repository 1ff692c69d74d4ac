//! Harmonic-oscillator eigenfunctions, Gauss-Hermite projection quadrature,
//! and the transforms between coefficient space and grid space.
//!
//! The basis frequency is fixed at 1 in dimensionless units, so the initial
//! unit-width Gaussian is exactly the ground state phi_0(x) phi_0(z).

use ndarray::Array2;

use crate::core_model::{Grid, GridSpinor, SimParams, SpinorCoeffs};
use crate::C64;

/// Normalised oscillator eigenfunction
/// `phi_n(x) = (2^n n! sqrt(pi))^(-1/2) H_n(x) exp(-x^2/2)`,
/// evaluated by the three-term recurrence on the normalised functions
/// (stable where the raw Hermite polynomials would overflow near n = 40).
pub fn ho_eigenfunction(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// All of phi_0(x) .. phi_{n_max-1}(x) in one recurrence pass.
pub fn ho_eigenfunctions_upto(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max);
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n_max {
        out.push(cur);
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

/// Derivative phi_n'(x) = -x phi_n(x) + sqrt(2n) phi_{n-1}(x).
pub fn ho_eigenfunction_derivative(n: usize, x: f64) -> f64 {
    let lower = if n == 0 { 0.0 } else { (2.0 * n as f64).sqrt() * ho_eigenfunction(n - 1, x) };
    -x * ho_eigenfunction(n, x) + lower
}

/// Gauss-Hermite projection rule attached to a basis size.
///
/// `nodes` are the roots of H_M with M = 2 * n_basis; `weights` are the
/// *modified* weights `w_i exp(x_i^2) = 1 / (M phi_{M-1}(x_i)^2)`, so that
/// `integrate` applies directly to integrands that already carry their
/// Gaussian decay (products of basis functions). The rule integrates
/// polynomial-times-Gaussian integrands of degree up to 2M - 1 exactly.
#[derive(Clone, Debug)]
pub struct BasisSpec {
    pub n_basis: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BasisSpec {
    pub fn new(n_basis: usize) -> Self {
        let m = 2 * n_basis.max(1);
        let (nodes, weights) = gauss_hermite(m);
        BasisSpec { n_basis, nodes, weights }
    }

    /// Quadrature of `f` over the real line; exact when `f` is a polynomial
    /// of degree <= 2M - 1 times exp(-x^2).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes and modified weights of the M-point Gauss-Hermite rule.
///
/// Roots are located by a sign scan of phi_M (all M roots lie inside
/// |x| < sqrt(2M + 1)) followed by Newton polishing, using
/// phi_M'(x) = -x phi_M + sqrt(2M) phi_{M-1}. Symmetry is enforced
/// explicitly.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let bound = (2.0 * m as f64 + 1.0).sqrt();
    // Central root spacing is ~pi/sqrt(2M); sample several times finer.
    let step = 0.2 * std::f64::consts::PI / (2.0 * m as f64 + 1.0).sqrt();
    let eval = |x: f64| -> (f64, f64) {
        // (phi_M, phi_{M-1})
        let v = ho_eigenfunctions_upto(m + 1, x);
        (v[m], v[m - 1])
    };

    let mut roots = Vec::with_capacity(m);
    // Scan the positive half axis; pair up by symmetry afterwards.
    let mut x_prev = if m.is_multiple_of(2) { 0.0 } else { step * 0.5 };
    let mut f_prev = eval(x_prev).0;
    let mut x = x_prev + step;
    while x < bound + step && roots.len() < m / 2 {
        let f = eval(x).0;
        if f_prev == 0.0 {
            roots.push(x_prev);
        } else if f_prev.signum() != f.signum() {
            // Newton from the midpoint; falls back to bisection behaviour
            // because the bracket is narrow.
            let mut r = 0.5 * (x_prev + x);
            for _ in 0..60 {
                let (fm, fm1) = eval(r);
                let deriv = -r * fm + (2.0 * m as f64).sqrt() * fm1;
                let delta = fm / deriv;
                r -= delta;
                if delta.abs() < 1e-15 * r.abs().max(1.0) {
                    break;
                }
            }
            roots.push(r);
        }
        x_prev = x;
        f_prev = f;
        x += step;
    }
    assert_eq!(roots.len(), m / 2, "Gauss-Hermite scan missed roots for M = {m}");

    let mut nodes = Vec::with_capacity(m);
    for &r in roots.iter().rev() {
        nodes.push(-r);
    }
    if !m.is_multiple_of(2) {
        nodes.push(0.0);
    }
    nodes.extend(roots.iter().copied());

    let weights = nodes
        .iter()
        .map(|&x| {
            let phi = ho_eigenfunction(m - 1, x);
            1.0 / (m as f64 * phi * phi)
        })
        .collect();
    (nodes, weights)
}

/// Interaction-picture phases of the two spin components at time `t`:
/// spin-up carries exp(+i t S z0 / 2), spin-down the conjugate.
pub fn frame_phases(params: &SimParams, t: f64) -> (C64, C64) {
    let phase = 0.5 * t * params.s * params.z0;
    (C64::cis(phase), C64::cis(-phase))
}

/// Table phi_n(x_i) for every basis level over a grid axis; shape
/// (n_basis, points).
fn basis_table(n_basis: usize, grid: Grid) -> Array2<f64> {
    let mut table = Array2::zeros((n_basis, grid.points));
    for i in 0..grid.points {
        let values = ho_eigenfunctions_upto(n_basis, grid.coord(i));
        for n in 0..n_basis {
            table[(n, i)] = values[n];
        }
    }
    table
}

/// Sample the physical spinor on the grid:
/// up(x,z) = exp(+i t S z0/2) Sum a_nm phi_n(x) phi_m(z), and the mirrored
/// expression with the conjugate phase for the down component.
///
/// Sets the containment warning when the grid holds less of the state's
/// norm than 1 - 1e-4.
pub fn coeffs_to_grid(coeffs: &SpinorCoeffs, params: &SimParams) -> GridSpinor {
    assert_eq!(coeffs.n_basis(), params.n_basis, "coefficient shape must match n_basis");
    let grid = params.grid();
    let table = basis_table(params.n_basis, grid);
    let (phase_up, phase_down) = frame_phases(params, coeffs.t);

    let table_c = table.mapv(|v| C64::new(v, 0.0));
    let up = table_c.t().dot(&coeffs.a).dot(&table_c).mapv(|v| v * phase_up);
    let down = table_c.t().dot(&coeffs.b).dot(&table_c).mapv(|v| v * phase_down);

    let mut out = GridSpinor { grid, up, down, t: coeffs.t, containment_warning: false };
    let deficit = (coeffs.norm() - out.norm()).abs();
    if deficit > 1e-4 {
        out.containment_warning = true;
    }
    out
}

/// Result of projecting a grid state back onto the oscillator basis.
#[derive(Clone, Debug)]
pub struct Projection {
    pub coeffs: SpinorCoeffs,
    /// Relative L2 distance between the input and its reconstruction from
    /// the projected coefficients.
    pub residual: f64,
    /// Set when the residual exceeds 1e-3: the state has support beyond the
    /// basis (or beyond the grid).
    pub truncation_warning: bool,
}

/// Left-inverse of [`coeffs_to_grid`] up to basis truncation, using the
/// trapezoid rule on the grid; removes the interaction-picture phases so
/// the result lives in the same frame as the integrator coefficients.
pub fn grid_to_coeffs(state: &GridSpinor, params: &SimParams) -> Projection {
    let grid = state.grid;
    let table = basis_table(params.n_basis, grid).mapv(|v| C64::new(v, 0.0));
    let (phase_up, phase_down) = frame_phases(params, state.t);
    let area = C64::new(grid.cell_area(), 0.0);

    let a = table.dot(&state.up).dot(&table.t()).mapv(|v| v * area * phase_up.conj());
    let b = table.dot(&state.down).dot(&table.t()).mapv(|v| v * area * phase_down.conj());
    let coeffs = SpinorCoeffs { a, b, t: state.t };

    let rebuilt = coeffs_to_grid(&coeffs, params);
    let mut diff_sq = 0.0;
    ndarray::azip!((u in &state.up, v in &rebuilt.up) diff_sq += (u - v).norm_sqr());
    ndarray::azip!((u in &state.down, v in &rebuilt.down) diff_sq += (u - v).norm_sqr());
    let norm = state.norm().max(f64::MIN_POSITIVE);
    let residual = (diff_sq * grid.cell_area()).sqrt() / norm;

    Projection { coeffs, residual, truncation_warning: residual > 1e-3 }
}
