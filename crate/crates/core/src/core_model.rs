//! Domain types: dimensionless parameters, spinor states in basis and grid
//! representation, and construction of the initial Gaussian packet.

use ndarray::Array2;

use crate::{C64, Error, Result};

/// Spin projection along the z-axis, the quantisation axis at the beam
/// centre.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    /// m = +1/2
    Up,
    /// m = -1/2
    Down,
}

impl Spin {
    /// Spin projection as a number, +1/2 or -1/2.
    pub fn projection(self) -> f64 {
        match self {
            Spin::Up => 0.5,
            Spin::Down => -0.5,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];
}

impl std::fmt::Display for Spin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Spin::Up => write!(f, "up"),
            Spin::Down => write!(f, "down"),
        }
    }
}

/// Dimensionless simulation parameters.
///
/// `a` is the adiabaticity parameter (interaction time over the natural
/// spreading time of the packet), `s` the separation parameter (field-induced
/// momentum kick over the quantum momentum width) and `z0` the distance, in
/// packet widths, from the beam centre to the point where the field vanishes.
/// The remaining fields configure the numerics.
#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    /// Adiabaticity parameter A.
    pub a: f64,
    /// Separation parameter S.
    pub s: f64,
    /// Inhomogeneity parameter z0; the field vanishes at (x=0, z=-z0).
    pub z0: f64,
    /// Oscillator levels per coordinate.
    pub n_basis: usize,
    /// Half-width of the square (x, z) grid, in packet widths.
    pub grid_extent: f64,
    /// Grid samples per axis.
    pub grid_points: usize,
    /// RK4 time step, in units of the traversal time.
    pub dt: f64,
    /// Drop the transverse Ix*x coupling, conserving the spin projection
    /// exactly (the divergence-violating textbook Hamiltonian).
    pub textbook_mode: bool,
}

pub const DEFAULT_N_BASIS: usize = 40;
pub const DEFAULT_GRID_POINTS: usize = 256;
pub const DEFAULT_DT: f64 = 1e-3;

impl SimParams {
    /// Parameters with the documented numerical defaults: 40 basis levels,
    /// dt = 1e-3, 256x256 grid over half-width max(3*z0, 12).
    pub fn new(a: f64, s: f64, z0: f64) -> Self {
        SimParams {
            a,
            s,
            z0,
            n_basis: DEFAULT_N_BASIS,
            grid_extent: default_grid_extent(z0),
            grid_points: DEFAULT_GRID_POINTS,
            dt: DEFAULT_DT,
            textbook_mode: false,
        }
    }

    /// Like [`SimParams::new`] but scales the basis size and time step up
    /// when the separation parameter is large. The deflected packet climbs
    /// to oscillator levels of order (S/2)^2/2, so the 40-level default is
    /// only adequate for moderate S; see [`recommended_n_basis`].
    pub fn recommended(a: f64, s: f64, z0: f64) -> Self {
        let mut p = SimParams::new(a, s, z0);
        p.n_basis = recommended_n_basis(a, s);
        p.dt = recommended_dt(a, s, z0).min(DEFAULT_DT);
        p
    }

    pub fn with_textbook_mode(mut self, on: bool) -> Self {
        self.textbook_mode = on;
        self
    }

    /// Check the documented invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || self.a < 0.0 {
            return Err(Error::validation("A", format!("must be >= 0, got {}", self.a)));
        }
        if !self.s.is_finite() || self.s < 0.0 {
            return Err(Error::validation("S", format!("must be >= 0, got {}", self.s)));
        }
        if self.a == 0.0 && self.s != 0.0 {
            return Err(Error::validation("A", "must be > 0 unless S = 0"));
        }
        if !self.z0.is_finite() || self.z0 <= 0.0 {
            return Err(Error::validation("z0", format!("must be > 0, got {}", self.z0)));
        }
        if self.n_basis < 2 {
            return Err(Error::validation("n_basis", format!("must be >= 2, got {}", self.n_basis)));
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::validation("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.grid_points < 8 {
            return Err(Error::validation(
                "grid_points",
                format!("must be >= 8, got {}", self.grid_points),
            ));
        }
        if !self.grid_extent.is_finite() || self.grid_extent <= 0.0 {
            return Err(Error::validation(
                "grid_extent",
                format!("must be > 0, got {}", self.grid_extent),
            ));
        }
        // Deflected packets must stay on-grid through the drift: the
        // textbook lobe ends at z0 + (A*S/2)(1 + t_d).
        if self.a * self.s > 0.0 {
            let t_d = 2.0 * self.z0 / (self.s * self.a) - 0.5;
            if t_d > 0.0 {
                let reach = self.z0 + 0.5 * self.a * self.s * (1.0 + t_d);
                if self.grid_extent <= reach {
                    return Err(Error::validation(
                        "grid_extent",
                        format!(
                            "must exceed z0 + (A*S/2)(1 + t_d) = {reach:.3} so deflected \
                             packets stay on-grid, got {}",
                            self.grid_extent
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Grid geometry implied by the parameters.
    pub fn grid(&self) -> Grid {
        Grid { extent: self.grid_extent, points: self.grid_points }
    }
}

pub fn default_grid_extent(z0: f64) -> f64 {
    (3.0 * z0).max(12.0)
}

/// Basis size that keeps the truncation tail of the deflected packet below
/// ~1e-8. The z-coherent state reaches mean occupancy
/// mu = ((S/2)^2 + (AS/4)^2) / 2; allow an eight-sigma Poisson margin.
pub fn recommended_n_basis(a: f64, s: f64) -> usize {
    let mu = (0.25 * s * s + (a * s / 4.0).powi(2) + 1.0) / 2.0;
    let n = (mu + 8.0 * mu.sqrt() + 12.0).ceil() as usize;
    n.max(DEFAULT_N_BASIS)
}

/// Step keeping the fastest populated phase below ~0.15 rad per step.
pub fn recommended_dt(a: f64, s: f64, z0: f64) -> f64 {
    let n = recommended_n_basis(a, s) as f64;
    let omega = 0.5 * s * (z0 + (2.0 * n).sqrt()) + a * n + 1.0;
    0.15 / omega
}

/// Laboratory-frame description of the apparatus, used only to derive the
/// dimensionless parameters. Any consistent unit system works as long as
/// `hbar` is supplied in the same units.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PhysicalParams {
    /// Particle mass M.
    pub mass: f64,
    /// Magnetic moment mu.
    pub magnetic_moment: f64,
    /// Field at the beam centre, B0.
    pub field_at_center: f64,
    /// Field gradient B1.
    pub field_gradient: f64,
    /// Initial packet width sigma.
    pub packet_width: f64,
    /// Magnet length L.
    pub magnet_length: f64,
    /// Longitudinal beam speed v_y; the traversal time is L / v_y.
    pub longitudinal_speed: f64,
}

/// Reduce laboratory quantities to the dimensionless triple
/// A = hbar*tau/(M sigma^2), S = mu*B1*tau*sigma/hbar, z0 = B0/(sigma*B1)
/// with tau = L/v_y. Numerical fields take the documented defaults.
pub fn params_from_physical(phys: &PhysicalParams, hbar: f64) -> Result<SimParams> {
    let fields: [(&'static str, f64); 8] = [
        ("mass", phys.mass),
        ("magnetic_moment", phys.magnetic_moment),
        ("field_at_center", phys.field_at_center),
        ("field_gradient", phys.field_gradient),
        ("packet_width", phys.packet_width),
        ("magnet_length", phys.magnet_length),
        ("longitudinal_speed", phys.longitudinal_speed),
        ("hbar", hbar),
    ];
    for (name, value) in fields {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::validation(name, format!("must be > 0, got {value}")));
        }
    }
    let tau = phys.magnet_length / phys.longitudinal_speed;
    let sigma = phys.packet_width;
    let a = hbar * tau / (phys.mass * sigma * sigma);
    let s = phys.magnetic_moment * phys.field_gradient * tau * sigma / hbar;
    let z0 = phys.field_at_center / (sigma * phys.field_gradient);
    let params = SimParams::new(a, s, z0);
    params.validate()?;
    Ok(params)
}

/// Square, uniformly spaced (x, z) grid centred on the beam axis.
///
/// Samples sit at `x_i = -extent + i * dx` with `dx = 2*extent/points`, so
/// the axis origin is a grid line (needed by the x = 0 spin-flip checks)
/// and the sampling is periodic-compatible for Fourier propagation.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Grid {
    pub extent: f64,
    pub points: usize,
}

impl Grid {
    pub fn dx(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.dx()
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_area(&self) -> f64 {
        let dx = self.dx();
        dx * dx
    }

    /// Index of the x = 0 grid line, if the point count makes it exact.
    pub fn origin_index(&self) -> Option<usize> {
        if self.points.is_multiple_of(2) { Some(self.points / 2) } else { None }
    }
}

/// Real-valued field sampled on a [`Grid`], e.g. a probability density or an
/// asymmetry map.
#[derive(Clone, Debug)]
pub struct ScalarMap {
    pub grid: Grid,
    pub values: Array2<f64>,
}

impl ScalarMap {
    pub fn zeros(grid: Grid) -> Self {
        ScalarMap { grid, values: Array2::zeros((grid.points, grid.points)) }
    }

    /// Trapezoid-rule integral over the grid.
    pub fn integrate(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Spinor state as coefficient matrices over the 2-D oscillator basis.
///
/// `a[(n, m)]` multiplies `phi_n(x) phi_m(z)` in the spin-up component and
/// `b` in the spin-down component, in the interaction picture of the
/// constant field (the `exp(+/- i t S z0 / 2)` phases are reattached when
/// the state is sampled on a grid).
#[derive(Clone, Debug)]
pub struct SpinorCoeffs {
    pub a: Array2<C64>,
    pub b: Array2<C64>,
    /// Dimensionless time of this snapshot.
    pub t: f64,
}

impl SpinorCoeffs {
    pub fn zeros(n_basis: usize) -> Self {
        SpinorCoeffs {
            a: Array2::zeros((n_basis, n_basis)),
            b: Array2::zeros((n_basis, n_basis)),
            t: 0.0,
        }
    }

    pub fn n_basis(&self) -> usize {
        self.a.nrows()
    }

    /// Total norm, Sum |a|^2 + |b|^2, square-rooted.
    pub fn norm(&self) -> f64 {
        (self.component_norm_sq(Spin::Up) + self.component_norm_sq(Spin::Down)).sqrt()
    }

    /// Probability carried by one spin component.
    pub fn component_norm_sq(&self, m: Spin) -> f64 {
        let c = match m {
            Spin::Up => &self.a,
            Spin::Down => &self.b,
        };
        c.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Probability in the top `shells` rows and columns of the coefficient
    /// matrices, the truncation-error monitor of the basis.
    pub fn edge_occupancy(&self, shells: usize) -> f64 {
        let n = self.n_basis();
        let lo = n.saturating_sub(shells);
        let mut mass = 0.0;
        for c in [&self.a, &self.b] {
            for ((i, j), v) in c.indexed_iter() {
                if i >= lo || j >= lo {
                    mass += v.norm_sqr();
                }
            }
        }
        mass
    }
}

/// Spinor wave-function sampled on an (x, z) grid, in the physical frame
/// (interaction-picture phases reattached).
#[derive(Clone, Debug)]
pub struct GridSpinor {
    pub grid: Grid,
    /// Amplitude of the m = +1/2 component; indexed `[(ix, iz)]`.
    pub up: Array2<C64>,
    /// Amplitude of the m = -1/2 component.
    pub down: Array2<C64>,
    /// Dimensionless time of this snapshot.
    pub t: f64,
    /// Set when the state is not safely contained on the grid (norm deficit
    /// at construction, or boundary leakage after a drift).
    pub containment_warning: bool,
}

impl GridSpinor {
    pub fn zeros(grid: Grid, t: f64) -> Self {
        let shape = (grid.points, grid.points);
        GridSpinor {
            grid,
            up: Array2::zeros(shape),
            down: Array2::zeros(shape),
            t,
            containment_warning: false,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.component_norm_sq(Spin::Up) + self.component_norm_sq(Spin::Down)).sqrt()
    }

    pub fn component(&self, m: Spin) -> &Array2<C64> {
        match m {
            Spin::Up => &self.up,
            Spin::Down => &self.down,
        }
    }

    pub fn component_norm_sq(&self, m: Spin) -> f64 {
        self.component(m).iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    /// Pointwise probability density summed over spin components.
    pub fn density(&self) -> ScalarMap {
        let mut values = Array2::zeros((self.grid.points, self.grid.points));
        ndarray::azip!((d in &mut values, u in &self.up, v in &self.down) {
            *d = u.norm_sqr() + v.norm_sqr();
        });
        ScalarMap { grid: self.grid, values }
    }

    /// Probability mass in the outermost `band` grid lines on every edge.
    pub fn boundary_mass(&self, band: usize) -> f64 {
        let n = self.grid.points;
        let mut mass = 0.0;
        for c in [&self.up, &self.down] {
            for ((i, j), v) in c.indexed_iter() {
                if i < band || j < band || i >= n - band || j >= n - band {
                    mass += v.norm_sqr();
                }
            }
        }
        mass * self.grid.cell_area()
    }
}

/// Beam polarisation vector; the density matrix is
/// rho = (1 + p_x sigma_x + p_y sigma_y + p_z sigma_z) / 2.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PolarizationVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PolarizationVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        PolarizationVector { x, y, z }
    }

    pub fn magnitude(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// A physical density matrix requires |p| <= 1.
    pub fn validate(&self) -> Result<()> {
        if self.magnitude() > 1.0 + 1e-12 {
            return Err(Error::validation(
                "polarization",
                format!("|p| = {:.6} exceeds 1", self.magnitude()),
            ));
        }
        Ok(())
    }
}

/// Initial state: the unit-width Gaussian ground state with a definite spin
/// projection `m0`. In the matched oscillator basis this is a single unit
/// coefficient at (0, 0).
pub fn initial_state(params: &SimParams, m0: Spin) -> SpinorCoeffs {
    let mut state = SpinorCoeffs::zeros(params.n_basis);
    match m0 {
        Spin::Up => state.a[(0, 0)] = C64::new(1.0, 0.0),
        Spin::Down => state.b[(0, 0)] = C64::new(1.0, 0.0),
    }
    state
}
