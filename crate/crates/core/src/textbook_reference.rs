//! Closed-form textbook predictions, kept in one place so comparisons of
//! "exact vs textbook" always go through the same interface.

use crate::core_model::SimParams;

/// Centre of the wave packet inside the magnet for spin projection `m`:
/// z_m(t) = (1/2) (S A) m t^2.
pub fn textbook_trajectory(t: f64, m: f64, params: &SimParams) -> f64 {
    0.5 * params.s * params.a * m * t * t
}

/// Centre of the packet after leaving the magnet and drifting freely for
/// `t_d`: z_m = (1/2 + t_d) (S A) m. With the canonical drift time this
/// lands the m = +/-1/2 lobes at z = +/-z0.
pub fn textbook_drift_position(t_d: f64, m: f64, params: &SimParams) -> f64 {
    (0.5 + t_d) * params.s * params.a * m
}

/// Small-angle semiclassical spin-flip estimate 1/(4 z0^2): the average of
/// sin(beta)^2 / 2 over the Gaussian packet, which depends only on the
/// inhomogeneity parameter.
pub fn semiclassical_spin_flip(z0: f64) -> f64 {
    1.0 / (4.0 * z0 * z0)
}
