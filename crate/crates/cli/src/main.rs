//! `sgsim`: propagate a spin-1/2 Gaussian packet through an inhomogeneous
//! magnet and export the measurement observables.
//!
//! Configuration comes from a JSON file (`--config`) and/or flags that
//! mirror the config keys; flags win. Artifacts land in the output
//! directory: `summary.json` plus long-format CSV maps.

use clap::Parser;
use serde::Serialize;

mod config;
mod output;
mod runner;

use config::{M0Selection, RawConfig, RunKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] sgsim_core::Error),
}

impl CliError {
    /// Exit codes: 2 for validation problems, 3 for numerical failures.
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(core) => match core {
                sgsim_core::Error::Validation { .. }
                | sgsim_core::Error::UndefinedDrift
                | sgsim_core::Error::FrameMismatch(_) => 2,
                sgsim_core::Error::IntegrationFailure { .. }
                | sgsim_core::Error::DegenerateBasis { .. } => 3,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            _ => "numerical",
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sgsim",
    version,
    about = "Stern-Gerlach wave-packet simulator: exact spectral evolution, analytic \
             approximations, spin-flip and focusing observables, polarisation tomography"
)]
struct Cli {
    /// JSON configuration file; flags below override its values.
    #[arg(long)]
    config: Option<std::path::PathBuf>,

    /// Adiabaticity parameter A.
    #[arg(long = "A", allow_negative_numbers = true)]
    a: Option<f64>,

    /// Separation parameter S.
    #[arg(long = "S", allow_negative_numbers = true)]
    s: Option<f64>,

    /// Inhomogeneity parameter z0 (field vanishes at z = -z0).
    #[arg(long, allow_negative_numbers = true)]
    z0: Option<f64>,

    /// Run kind.
    #[arg(long, value_enum)]
    kind: Option<RunKind>,

    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<String>,

    /// Oscillator levels per coordinate (default: 40, scaled up for large S).
    #[arg(long)]
    n_basis: Option<usize>,

    /// Grid samples per axis (default: 256).
    #[arg(long)]
    grid_points: Option<usize>,

    /// Grid half-width in packet widths (default: max(3 z0, 12)).
    #[arg(long)]
    grid_extent: Option<f64>,

    /// RK4 step in traversal-time units (default: 1e-3, shrunk for large S).
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,

    /// Drop the transverse coupling (spin projection conserved exactly).
    #[arg(long)]
    textbook_mode: Option<bool>,

    /// Initial spin projection(s) to run.
    #[arg(long, value_enum)]
    m0: Option<M0Selection>,

    /// Apply the free drift after the magnet (default depends on kind).
    #[arg(long)]
    drift: Option<bool>,

    /// Keep a coefficient snapshot every this many RK4 steps (default: 20).
    #[arg(long)]
    snapshot_stride: Option<usize>,

    /// Approximation for kind = approximate: adiabatic, pseudo_adiabatic,
    /// coherent_state or symmetrized (default).
    #[arg(long)]
    approximation: Option<String>,

    /// Observed density map (CSV) to fit, for kind = tomography.
    #[arg(long)]
    observed: Option<String>,

    /// Synthesise the observed map from this polarisation, e.g. "0.6,0,0.8".
    #[arg(long, value_parser = parse_triple)]
    synthetic_p: Option<Triple>,
}

#[derive(Clone, Copy, Debug)]
struct Triple([f64; 3]);

fn parse_triple(text: &str) -> Result<Triple, String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated numbers".into());
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
    }
    Ok(Triple(out))
}

impl Cli {
    fn overrides(&self) -> RawConfig {
        RawConfig {
            a: self.a,
            s: self.s,
            z0: self.z0,
            kind: self.kind,
            n_basis: self.n_basis,
            grid_extent: self.grid_extent,
            grid_points: self.grid_points,
            dt: self.dt,
            textbook_mode: self.textbook_mode,
            m0: self.m0,
            drift: self.drift,
            snapshot_stride: self.snapshot_stride,
            out: self.out.clone(),
            approximation: self.approximation.clone(),
            observed: self.observed.clone(),
            synthetic_p: self.synthetic_p.map(|t| t.0),
            sweep: None,
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    error: ErrorBody<'a>,
}

fn real_main() -> Result<(), CliError> {
    let cli = Cli::parse();
    let file_config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            RawConfig::from_json(&text)?
        }
        None => RawConfig::default(),
    };
    let resolved = config::RunConfig::resolve(file_config.merge(cli.overrides()))?;
    let summary = runner::run(&resolved)?;
    println!(
        "wrote {}/summary.json ({} run, {:.2} s)",
        resolved.out,
        serde_json::to_value(resolved.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        summary.wall_time_s
    );
    Ok(())
}

fn main() {
    if let Err(err) = real_main() {
        let envelope =
            ErrorEnvelope { error: ErrorBody { kind: err.kind(), message: err.to_string() } };
        eprintln!("{}", serde_json::to_string(&envelope).unwrap_or_else(|_| err.to_string()));
        std::process::exit(err.exit_code());
    }
}
