//! Executes a resolved configuration and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use sgsim_core::approximations::Approximation;
use sgsim_core::core_model::{
    initial_state, GridSpinor, PolarizationVector, ScalarMap, SimParams, Spin, SpinorCoeffs,
};
use sgsim_core::exact_evolution::{drift_time, evolve_with_stride, free_drift};
use sgsim_core::observables::{
    asymmetry_maps, overlap, probability_density, snapshot_moments, spin_flip_density,
    spin_flip_probability, Moments, OverlapDeficits, RunPair, SpinorMoments,
};
use sgsim_core::oscillator_basis::coeffs_to_grid;
use sgsim_core::textbook_reference::semiclassical_spin_flip;
use sgsim_core::tomography::{predicted_density, reconstruct_polarization, AsymmetryBasis};

use crate::config::{M0Selection, RunConfig, RunKind, SweepHold};
use crate::output::{read_map, write_json, write_map};
use crate::CliError;

#[derive(Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub grid: GridEcho,
    pub results: Results,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
pub struct GridEcho {
    pub extent: f64,
    pub points: usize,
    pub spacing: f64,
}

#[derive(Serialize, Default)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_up_to_down: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_down_to_up: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semiclassical_flip: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_warning: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub containment_warning: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments_run_up: Option<MomentsPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments_run_down: Option<MomentsPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_deficits: Option<DeficitsOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymmetry_peaks: Option<AsymmetryPeaks>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographyOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepPointOut>>,
}

#[derive(Serialize, Copy, Clone)]
pub struct MomentsOut {
    pub weight: f64,
    pub mean_x: f64,
    pub mean_z: f64,
    pub var_x: f64,
    pub var_z: f64,
}

impl From<Moments> for MomentsOut {
    fn from(m: Moments) -> Self {
        MomentsOut {
            weight: m.weight,
            mean_x: m.mean_x,
            mean_z: m.mean_z,
            var_x: m.var_x,
            var_z: m.var_z,
        }
    }
}

#[derive(Serialize, Copy, Clone)]
pub struct MomentsPair {
    pub up: Option<MomentsOut>,
    pub down: Option<MomentsOut>,
}

impl From<SpinorMoments> for MomentsPair {
    fn from(m: SpinorMoments) -> Self {
        MomentsPair { up: m.up.map(Into::into), down: m.down.map(Into::into) }
    }
}

#[derive(Serialize, Copy, Clone)]
pub struct DeficitsOut {
    pub adiabatic: f64,
    pub pseudo_adiabatic: f64,
    pub coherent_state: f64,
    pub symmetrized: f64,
    /// True when the documented quality ordering holds strictly.
    pub ordered: bool,
}

impl From<OverlapDeficits> for DeficitsOut {
    fn from(d: OverlapDeficits) -> Self {
        DeficitsOut {
            adiabatic: d.adiabatic,
            pseudo_adiabatic: d.pseudo_adiabatic,
            coherent_state: d.coherent_state,
            symmetrized: d.symmetrized,
            ordered: d.strictly_ordered(),
        }
    }
}

#[derive(Serialize, Copy, Clone)]
pub struct AsymmetryPeaks {
    pub max_abs_ax: f64,
    pub max_abs_ay: f64,
    pub max_abs_az: f64,
}

#[derive(Serialize, Clone)]
pub struct TomographyOut {
    pub polarization: [f64; 3],
    pub residual: f64,
    pub condition_number: f64,
    pub scale: f64,
    pub exceeded_unit_sphere: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub injected_polarization: Option<[f64; 3]>,
}

#[derive(Serialize, Copy, Clone)]
pub struct SweepPointOut {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub n_basis: usize,
    pub dt: f64,
    pub adiabatic: f64,
    pub pseudo_adiabatic: f64,
    pub coherent_state: f64,
    pub symmetrized: f64,
}

struct ExactRun {
    snapshots: Vec<SpinorCoeffs>,
    flip: f64,
    norm_drift: f64,
    truncation_warning: bool,
    grid_state: GridSpinor,
}

fn run_exact(params: &SimParams, m0: Spin, stride: usize) -> Result<ExactRun, CliError> {
    let record = evolve_with_stride(&initial_state(params, m0), params, stride)?;
    let grid_state = coeffs_to_grid(record.final_coeffs(), params);
    Ok(ExactRun {
        flip: record.final_coeffs().component_norm_sq(m0.flipped()),
        norm_drift: record.norm_drift,
        truncation_warning: record.truncation_warning,
        grid_state,
        snapshots: record.snapshots,
    })
}

/// The two initial projections evolve independently; run them on separate
/// threads.
fn run_exact_pair(
    params: &SimParams,
    stride: usize,
) -> Result<(ExactRun, ExactRun), CliError> {
    std::thread::scope(|scope| {
        let up = scope.spawn(|| run_exact(params, Spin::Up, stride));
        let down = scope.spawn(|| run_exact(params, Spin::Down, stride));
        let join = |h: std::thread::ScopedJoinHandle<'_, Result<ExactRun, CliError>>| {
            h.join().unwrap_or_else(|_| Err(CliError::Io("worker thread panicked".into())))
        };
        Ok((join(up)?, join(down)?))
    })
}

fn requested_drift(config: &RunConfig, params: &SimParams) -> Result<Option<f64>, CliError> {
    if config.drift {
        Ok(Some(drift_time(params)?))
    } else {
        Ok(None)
    }
}

fn apply_drift(state: &GridSpinor, td: Option<f64>, params: &SimParams) -> GridSpinor {
    match td {
        Some(td) => free_drift(state, td, params),
        None => state.clone(),
    }
}

fn write_trajectory(path: &Path, runs: &[(Spin, &[SpinorCoeffs])]) -> Result<(), CliError> {
    use std::io::Write;
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "t,run,component,weight,mean_x,mean_z,var_x,var_z")?;
        for (m0, snapshots) in runs {
            for snap in *snapshots {
                let moments = snapshot_moments(snap);
                for (component, m) in [("up", moments.up), ("down", moments.down)] {
                    if let Some(m) = m {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{},{}",
                            snap.t, m0, component, m.weight, m.mean_x, m.mean_z, m.var_x, m.var_z
                        )?;
                    }
                }
            }
        }
        w.flush()
    })()
    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run(config: &RunConfig) -> Result<Summary, CliError> {
    let start = Instant::now();
    let out_dir = PathBuf::from(&config.out);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let params = config.params();

    let mut results = Results {
        semiclassical_flip: Some(semiclassical_spin_flip(params.z0)),
        ..Results::default()
    };

    match config.kind {
        RunKind::Evolve => run_evolve(config, &params, &out_dir, &mut results)?,
        RunKind::Approximate => run_approximate(config, &params, &out_dir, &mut results)?,
        RunKind::Compare => run_compare(config, &params, &out_dir, &mut results)?,
        RunKind::Asymmetry => run_asymmetry(config, &params, &out_dir, &mut results)?,
        RunKind::Tomography => run_tomography(config, &params, &out_dir, &mut results)?,
        RunKind::Sweep => run_sweep(config, &out_dir, &mut results)?,
    }

    let summary = Summary {
        config: config.clone(),
        grid: GridEcho {
            extent: params.grid_extent,
            points: params.grid_points,
            spacing: params.grid().dx(),
        },
        results,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn run_evolve(
    config: &RunConfig,
    params: &SimParams,
    out_dir: &Path,
    results: &mut Results,
) -> Result<(), CliError> {
    let td = requested_drift(config, params)?;
    results.drift_time = td;
    let stride = config.snapshot_stride;

    match config.m0 {
        M0Selection::Both => {
            let (up, down) = run_exact_pair(params, stride)?;
            let final_up = apply_drift(&up.grid_state, td, params);
            let final_down = apply_drift(&down.grid_state, td, params);
            results.flip_up_to_down = Some(up.flip);
            results.flip_down_to_up = Some(down.flip);
            results.norm_drift = Some(up.norm_drift.max(down.norm_drift));
            results.truncation_warning = Some(up.truncation_warning || down.truncation_warning);
            results.containment_warning =
                Some(final_up.containment_warning || final_down.containment_warning);
            results.moments_run_up = Some(component_pair(&final_up));
            results.moments_run_down = Some(component_pair(&final_down));
            let primary = match config.m0.primary() {
                Spin::Up => &final_up,
                Spin::Down => &final_down,
            };
            write_map(
                &out_dir.join("flip_density.csv"),
                &spin_flip_density(primary, config.m0.primary()),
            )?;
            let pair = RunPair::new(final_up, final_down)?;
            write_map(&out_dir.join("p0.csv"), &probability_density(&pair))?;
            write_trajectory(
                &out_dir.join("trajectory.csv"),
                &[(Spin::Up, &up.snapshots), (Spin::Down, &down.snapshots)],
            )?;
        }
        single => {
            let m0 = single.primary();
            let run = run_exact(params, m0, stride)?;
            let final_state = apply_drift(&run.grid_state, td, params);
            match m0 {
                Spin::Up => results.flip_up_to_down = Some(run.flip),
                Spin::Down => results.flip_down_to_up = Some(run.flip),
            }
            results.norm_drift = Some(run.norm_drift);
            results.truncation_warning = Some(run.truncation_warning);
            results.containment_warning = Some(final_state.containment_warning);
            let moments = Some(component_pair(&final_state));
            match m0 {
                Spin::Up => results.moments_run_up = moments,
                Spin::Down => results.moments_run_down = moments,
            }
            write_map(
                &out_dir.join("flip_density.csv"),
                &spin_flip_density(&final_state, m0),
            )?;
            write_trajectory(&out_dir.join("trajectory.csv"), &[(m0, &run.snapshots)])?;
        }
    }
    Ok(())
}

fn component_pair(state: &GridSpinor) -> MomentsPair {
    sgsim_core::observables::component_moments(state).into()
}

fn run_approximate(
    config: &RunConfig,
    params: &SimParams,
    out_dir: &Path,
    results: &mut Results,
) -> Result<(), CliError> {
    let approx = config.approximation_kind()?;
    let td = requested_drift(config, params)?;
    results.drift_time = td;
    results.approximation = Some(approx.label().to_string());

    let up = apply_drift(&approx.evaluate(params, 1.0, Spin::Up), td, params);
    let down = apply_drift(&approx.evaluate(params, 1.0, Spin::Down), td, params);
    results.flip_up_to_down = Some(spin_flip_probability(&up, Spin::Up));
    results.flip_down_to_up = Some(spin_flip_probability(&down, Spin::Down));
    results.containment_warning = Some(up.containment_warning || down.containment_warning);
    results.moments_run_up = Some(component_pair(&up));
    results.moments_run_down = Some(component_pair(&down));

    let primary = match config.m0.primary() {
        Spin::Up => &up,
        Spin::Down => &down,
    };
    write_map(
        &out_dir.join("flip_density.csv"),
        &spin_flip_density(primary, config.m0.primary()),
    )?;
    let pair = RunPair::new(up, down)?;
    write_map(&out_dir.join("p0.csv"), &probability_density(&pair))?;
    Ok(())
}

fn exact_pair_for_overlap(params: &SimParams, stride: usize) -> Result<(RunPair, Results), CliError> {
    let (up, down) = run_exact_pair(params, stride)?;
    let partial = Results {
        flip_up_to_down: Some(up.flip),
        flip_down_to_up: Some(down.flip),
        norm_drift: Some(up.norm_drift.max(down.norm_drift)),
        truncation_warning: Some(up.truncation_warning || down.truncation_warning),
        ..Results::default()
    };
    Ok((RunPair::new(up.grid_state, down.grid_state)?, partial))
}

fn deficits_against(exact: &RunPair, params: &SimParams) -> Result<OverlapDeficits, CliError> {
    let pair = |a: Approximation| -> Result<RunPair, CliError> {
        Ok(RunPair::new(
            a.evaluate(params, 1.0, Spin::Up),
            a.evaluate(params, 1.0, Spin::Down),
        )?)
    };
    Ok(OverlapDeficits {
        adiabatic: 1.0 - overlap(exact, &pair(Approximation::Adiabatic)?),
        pseudo_adiabatic: 1.0 - overlap(exact, &pair(Approximation::PseudoAdiabatic)?),
        coherent_state: 1.0 - overlap(exact, &pair(Approximation::CoherentState)?),
        symmetrized: 1.0 - overlap(exact, &pair(Approximation::Symmetrized)?),
    })
}

fn run_compare(
    config: &RunConfig,
    params: &SimParams,
    out_dir: &Path,
    results: &mut Results,
) -> Result<(), CliError> {
    let (exact, partial) = exact_pair_for_overlap(params, config.snapshot_stride)?;
    results.flip_up_to_down = partial.flip_up_to_down;
    results.flip_down_to_up = partial.flip_down_to_up;
    results.norm_drift = partial.norm_drift;
    results.truncation_warning = partial.truncation_warning;
    results.overlap_deficits = Some(deficits_against(&exact, params)?.into());
    write_map(&out_dir.join("p0.csv"), &probability_density(&exact))?;
    Ok(())
}

fn run_asymmetry(
    config: &RunConfig,
    params: &SimParams,
    out_dir: &Path,
    results: &mut Results,
) -> Result<(), CliError> {
    let td = requested_drift(config, params)?;
    results.drift_time = td;
    let (up, down) = run_exact_pair(params, config.snapshot_stride)?;
    results.flip_up_to_down = Some(up.flip);
    results.flip_down_to_up = Some(down.flip);
    results.norm_drift = Some(up.norm_drift.max(down.norm_drift));
    results.truncation_warning = Some(up.truncation_warning || down.truncation_warning);

    let final_up = apply_drift(&up.grid_state, td, params);
    let final_down = apply_drift(&down.grid_state, td, params);
    results.containment_warning =
        Some(final_up.containment_warning || final_down.containment_warning);
    results.moments_run_up = Some(component_pair(&final_up));
    results.moments_run_down = Some(component_pair(&final_down));
    write_map(
        &out_dir.join("flip_density.csv"),
        &spin_flip_density(&final_up, Spin::Up),
    )?;

    let pair = RunPair::new(final_up, final_down)?;
    let maps = asymmetry_maps(&pair);
    results.asymmetry_peaks = Some(AsymmetryPeaks {
        max_abs_ax: maps.ax.max_abs(),
        max_abs_ay: maps.ay.max_abs(),
        max_abs_az: maps.az.max_abs(),
    });
    write_map(&out_dir.join("p0.csv"), &probability_density(&pair))?;
    write_map(&out_dir.join("ax.csv"), &maps.ax)?;
    write_map(&out_dir.join("ay.csv"), &maps.ay)?;
    write_map(&out_dir.join("az.csv"), &maps.az)?;
    Ok(())
}

fn run_tomography(
    config: &RunConfig,
    params: &SimParams,
    out_dir: &Path,
    results: &mut Results,
) -> Result<(), CliError> {
    let td = requested_drift(config, params)?;
    results.drift_time = td;
    let (up, down) = run_exact_pair(params, config.snapshot_stride)?;
    results.norm_drift = Some(up.norm_drift.max(down.norm_drift));
    results.truncation_warning = Some(up.truncation_warning || down.truncation_warning);
    let pair = RunPair::new(
        apply_drift(&up.grid_state, td, params),
        apply_drift(&down.grid_state, td, params),
    )?;
    let basis = AsymmetryBasis::from_run_pair(&pair);
    write_map(&out_dir.join("p0.csv"), &basis.p0)?;
    write_map(&out_dir.join("ax.csv"), &basis.ax)?;
    write_map(&out_dir.join("ay.csv"), &basis.ay)?;
    write_map(&out_dir.join("az.csv"), &basis.az)?;

    let (observed, injected): (ScalarMap, Option<[f64; 3]>) = match (&config.observed, &config.synthetic_p) {
        (Some(path), None) => (read_map(Path::new(path), basis.p0.grid)?, None),
        (None, Some(p)) => {
            let vector = PolarizationVector::new(p[0], p[1], p[2]);
            (predicted_density(&basis, &vector)?, Some(*p))
        }
        _ => unreachable!("checked at config resolution"),
    };

    let rec = reconstruct_polarization(&observed, &basis)?;
    results.tomography = Some(TomographyOut {
        polarization: [rec.polarization.x, rec.polarization.y, rec.polarization.z],
        residual: rec.residual,
        condition_number: rec.condition_number,
        scale: rec.scale,
        exceeded_unit_sphere: rec.exceeded_unit_sphere,
        injected_polarization: injected,
    });
    Ok(())
}

fn run_sweep(config: &RunConfig, out_dir: &Path, results: &mut Results) -> Result<(), CliError> {
    let sweep = config.sweep.as_ref().expect("checked at config resolution");
    let base_product = config.a * config.s;
    let mut points = Vec::with_capacity(sweep.values.len());
    for &a in &sweep.values {
        let s = match sweep.hold {
            SweepHold::As => base_product / a,
            SweepHold::None => config.s,
        };
        let params = config.sweep_point_params(a, s);
        params.validate()?;
        let (exact, _) = exact_pair_for_overlap(&params, config.snapshot_stride)?;
        let d = deficits_against(&exact, &params)?;
        points.push(SweepPointOut {
            a,
            s,
            n_basis: params.n_basis,
            dt: params.dt,
            adiabatic: d.adiabatic,
            pseudo_adiabatic: d.pseudo_adiabatic,
            coherent_state: d.coherent_state,
            symmetrized: d.symmetrized,
        });
    }

    use std::io::Write;
    let path = out_dir.join("sweep.csv");
    let file = std::fs::File::create(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "A,S,n_basis,dt,adiabatic,pseudo_adiabatic,coherent_state,symmetrized")?;
        for p in &points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.a, p.s, p.n_basis, p.dt, p.adiabatic, p.pseudo_adiabatic, p.coherent_state,
                p.symmetrized
            )?;
        }
        w.flush()
    })()
    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;

    results.sweep = Some(points);
    Ok(())
}
