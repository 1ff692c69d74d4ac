//! Run configuration: JSON schema, defaults, and merging of command-line
//! overrides.

use serde::{Deserialize, Serialize};
use sgsim_core::approximations::Approximation;
use sgsim_core::core_model::{
    default_grid_extent, recommended_dt, recommended_n_basis, SimParams, Spin,
    DEFAULT_DT, DEFAULT_GRID_POINTS,
};

use crate::CliError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Evolve,
    Approximate,
    Compare,
    Asymmetry,
    Tomography,
    Sweep,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum M0Selection {
    Up,
    Down,
    Both,
}

impl M0Selection {
    /// The run whose maps (flip density, trajectory) are reported when only
    /// one can be.
    pub fn primary(self) -> Spin {
        match self {
            M0Selection::Down => Spin::Down,
            _ => Spin::Up,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SweepHold {
    /// Keep the product A*S at the base configuration's value.
    As,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Only the adiabaticity parameter can be swept.
    pub axis: String,
    pub values: Vec<f64>,
    #[serde(default = "default_hold")]
    pub hold: SweepHold,
}

fn default_hold() -> SweepHold {
    SweepHold::None
}

/// The JSON document accepted by `--config` and mirrored by the CLI flags.
/// Unknown keys are rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    pub z0: Option<f64>,
    pub kind: Option<RunKind>,
    pub n_basis: Option<usize>,
    pub grid_extent: Option<f64>,
    pub grid_points: Option<usize>,
    pub dt: Option<f64>,
    pub textbook_mode: Option<bool>,
    pub m0: Option<M0Selection>,
    pub drift: Option<bool>,
    pub snapshot_stride: Option<usize>,
    pub out: Option<String>,
    pub approximation: Option<String>,
    pub observed: Option<String>,
    pub synthetic_p: Option<[f64; 3]>,
    pub sweep: Option<SweepSpec>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config does not match the schema: {e}")))
    }

    /// Later (command-line) values win over earlier (file) values.
    pub fn merge(mut self, over: RawConfig) -> RawConfig {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if over.$field.is_some() { self.$field = over.$field; })*
            };
        }
        take!(
            a, s, z0, kind, n_basis, grid_extent, grid_points, dt, textbook_mode, m0, drift,
            snapshot_stride, out, approximation, observed, synthetic_p, sweep
        );
        self
    }
}

/// Fully resolved configuration: every default applied, ready to run and to
/// echo into summary.json.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub z0: f64,
    pub kind: RunKind,
    pub n_basis: usize,
    pub grid_extent: f64,
    pub grid_points: usize,
    pub dt: f64,
    pub textbook_mode: bool,
    pub m0: M0Selection,
    pub drift: bool,
    pub snapshot_stride: usize,
    pub out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic_p: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// True when n_basis/dt were not given explicitly and may be rescaled
    /// per sweep point.
    #[serde(skip)]
    pub auto_sizing: bool,
}

impl RunConfig {
    pub fn resolve(raw: RawConfig) -> Result<RunConfig, CliError> {
        let missing: Vec<&str> = [("A", raw.a), ("S", raw.s), ("z0", raw.z0)]
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "missing required keys {}",
                missing.join(", ")
            )));
        }
        let (a, s, z0) = (raw.a.unwrap(), raw.s.unwrap(), raw.z0.unwrap());
        let kind = raw.kind.unwrap_or(RunKind::Evolve);

        let auto_sizing = raw.n_basis.is_none() && raw.dt.is_none();
        let n_basis = raw.n_basis.unwrap_or_else(|| recommended_n_basis(a, s));
        let dt = raw.dt.unwrap_or_else(|| recommended_dt(a, s, z0).min(DEFAULT_DT));

        let drift = raw.drift.unwrap_or(match kind {
            RunKind::Evolve | RunKind::Approximate | RunKind::Asymmetry | RunKind::Tomography => {
                true
            }
            RunKind::Compare | RunKind::Sweep => false,
        });

        let approximation = match (&raw.approximation, kind) {
            (Some(name), _) => {
                parse_approximation(name)?;
                Some(name.clone())
            }
            (None, RunKind::Approximate) => Some("symmetrized".to_string()),
            (None, _) => None,
        };

        if kind == RunKind::Sweep {
            let sweep = raw
                .sweep
                .as_ref()
                .ok_or_else(|| CliError::Config("kind = sweep requires a sweep block".into()))?;
            if sweep.axis != "A" {
                return Err(CliError::Config(format!(
                    "sweep.axis must be \"A\", got {:?}",
                    sweep.axis
                )));
            }
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values must be nonempty".into()));
            }
            if sweep.values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(CliError::Config("sweep.values must be positive".into()));
            }
        }
        if kind == RunKind::Tomography
            && raw.observed.is_some() == raw.synthetic_p.is_some()
        {
            return Err(CliError::Config(
                "kind = tomography requires exactly one of `observed` (a CSV path) or \
                 `synthetic_p` (a polarisation vector)"
                    .into(),
            ));
        }

        let config = RunConfig {
            a,
            s,
            z0,
            kind,
            n_basis,
            grid_extent: raw.grid_extent.unwrap_or_else(|| default_grid_extent(z0)),
            grid_points: raw.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            dt,
            textbook_mode: raw.textbook_mode.unwrap_or(false),
            m0: raw.m0.unwrap_or(M0Selection::Both),
            drift,
            snapshot_stride: raw.snapshot_stride.unwrap_or(20),
            out: raw.out.unwrap_or_else(|| "out".to_string()),
            approximation,
            observed: raw.observed,
            synthetic_p: raw.synthetic_p,
            sweep: raw.sweep,
            auto_sizing,
        };
        config.params().validate().map_err(CliError::from)?;
        Ok(config)
    }

    pub fn params(&self) -> SimParams {
        SimParams {
            a: self.a,
            s: self.s,
            z0: self.z0,
            n_basis: self.n_basis,
            grid_extent: self.grid_extent,
            grid_points: self.grid_points,
            dt: self.dt,
            textbook_mode: self.textbook_mode,
        }
    }

    /// Parameters for one sweep point; n_basis and dt follow the point when
    /// they were not pinned explicitly.
    pub fn sweep_point_params(&self, a: f64, s: f64) -> SimParams {
        let mut p = self.params();
        p.a = a;
        p.s = s;
        if self.auto_sizing {
            p.n_basis = recommended_n_basis(a, s);
            p.dt = recommended_dt(a, s, self.z0).min(DEFAULT_DT);
        }
        p
    }

    pub fn approximation_kind(&self) -> Result<Approximation, CliError> {
        parse_approximation(self.approximation.as_deref().unwrap_or("symmetrized"))
    }
}

pub fn parse_approximation(name: &str) -> Result<Approximation, CliError> {
    Approximation::ALL
        .into_iter()
        .find(|a| a.label() == name)
        .ok_or_else(|| {
            CliError::Config(format!(
                "unknown approximation {name:?}; expected one of adiabatic, pseudo_adiabatic, \
                 coherent_state, symmetrized"
            ))
        })
}
