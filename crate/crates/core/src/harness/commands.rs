use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::kernel::{power_iteration, PowerIteration, TransitionModel};
use crate::pbs::{compare_to_model, run_pbs, ComparisonReport, PbsConfig, DEFAULT_PARTITIONS};
use crate::state_space::{
    cir, continuous_response, equilibrium_gain, pulse_response, StateSpaceError, Trajectory,
};
use crate::text::{fmt_real, fmt_sig12};

use super::csv::{write_cir_csv, write_pbs_csv, write_trajectory_csv};
use super::scenario::{Mode, Scenario, SweepSpec};
use super::HarnessError;

/// Pivot threshold for the equilibrium solve and power-iteration tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

fn with_output<F>(output: Option<&Path>, write: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match output {
        Some(path) => {
            let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(|e| HarnessError::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w).map_err(|e| HarnessError::io(Path::new("<stdout>"), e))
        }
    }
}

fn numerical(e: StateSpaceError) -> HarnessError {
    match e {
        StateSpaceError::SingularSystem { .. } => HarnessError::Numerical(e.to_string()),
        other => HarnessError::Invalid(other.to_string()),
    }
}

/// The analytical trajectory of a scenario.
///
/// `stride` controls how often full state vectors are kept; `None` keeps
/// only the first and last.
pub fn simulate(sc: &Scenario, stride: Option<usize>) -> Result<Trajectory, HarnessError> {
    let model = TransitionModel::from_config(&sc.cfg);
    let stride = stride.unwrap_or(sc.steps.max(1));
    let traj = match sc.mode {
        Mode::Pulse => pulse_response(&model, sc.u0, sc.steps, stride),
        Mode::Continuous => continuous_response(&model, sc.u0, sc.steps, stride),
    };
    traj.map_err(numerical)
}

pub fn cmd_run(
    scenario: &Path,
    output: Option<&Path>,
    stride: Option<usize>,
) -> Result<Trajectory, HarnessError> {
    let sc = Scenario::load(scenario)?;
    let traj = simulate(&sc, stride)?;
    with_output(output, |w| write_trajectory_csv(w, &traj))?;
    Ok(traj)
}

/// Writes `g[0..=K]` for the scenario's channel.
pub fn cmd_cir(scenario: &Path, output: Option<&Path>) -> Result<crate::state_space::Cir, HarnessError> {
    let sc = Scenario::load(scenario)?;
    let g = cir(&TransitionModel::from_config(&sc.cfg), sc.steps);
    with_output(output, |w| write_cir_csv(w, &g))?;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    /// `hᵀ(I−Q)⁻¹b`.
    pub gain: f64,
    /// `gain · u0`.
    pub output: f64,
}

impl Equilibrium {
    /// Two-line CSV, 12 significant digits.
    pub fn to_csv(&self) -> String {
        format!("gain,z_inf\n{},{}\n", fmt_sig12(self.gain), fmt_sig12(self.output))
    }
}

pub fn cmd_equilibrium(scenario: &Path, tol: f64) -> Result<Equilibrium, HarnessError> {
    let sc = Scenario::load(scenario)?;
    let gain = equilibrium_gain(&TransitionModel::from_config(&sc.cfg), tol).map_err(numerical)?;
    Ok(Equilibrium {
        gain,
        output: gain * sc.u0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbsOptions {
    /// Particles per release event; overrides the scenario's `particles`.
    pub particles: Option<u64>,
    pub seed: Option<u64>,
    pub partitions: usize,
}

impl Default for PbsOptions {
    fn default() -> Self {
        Self {
            particles: None,
            seed: None,
            partitions: DEFAULT_PARTITIONS,
        }
    }
}

/// Runs the particle oracle on a scenario's schedule and compares it with the model.
///
/// A pulse releases `particles` at step 0; continuous mode releases
/// `particles` every step. The analytical reference uses `u0 = particles`.
/// With an output path, the comparison is also written next to it as
/// `<stem>.report.csv`.
pub fn cmd_pbs(
    scenario: &Path,
    output: Option<&Path>,
    opts: PbsOptions,
) -> Result<ComparisonReport, HarnessError> {
    let sc = Scenario::load(scenario)?;
    let particles = opts
        .particles
        .or(sc.particles)
        .unwrap_or(sc.u0.round() as u64);
    if particles == 0 {
        return Err(HarnessError::Invalid(
            "`particles` must be at least 1".into(),
        ));
    }
    if opts.partitions == 0 {
        return Err(HarnessError::Invalid(
            "`partitions` must be at least 1".into(),
        ));
    }
    let seed = opts.seed.unwrap_or(sc.seed);
    let model = TransitionModel::from_config(&sc.cfg);
    let (mut cfg, traj) = match sc.mode {
        Mode::Pulse => (
            PbsConfig::pulse(particles, sc.steps, seed),
            pulse_response(&model, particles as f64, sc.steps, sc.steps.max(1)),
        ),
        Mode::Continuous => (
            PbsConfig::continuous(particles, sc.steps, seed),
            continuous_response(&model, particles as f64, sc.steps, sc.steps.max(1)),
        ),
    };
    cfg.partitions = opts.partitions;
    let traj = traj.map_err(numerical)?;
    let result = run_pbs(&model, &cfg).map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let report =
        compare_to_model(&result, &traj).map_err(|e| HarnessError::Invalid(e.to_string()))?;

    with_output(output, |w| write_pbs_csv(w, &result, model.dt()))?;
    if let Some(path) = output {
        let report_path = path.with_extension("report.csv");
        let text = format!(
            "metric,value\nsteps,{}\nmax_abs_residual,{}\nwithin_3sigma,{}\n",
            report.residuals.len(),
            fmt_real(report.max_abs_residual),
            fmt_real(report.within_3sigma)
        );
        fs::write(&report_path, text).map_err(|e| HarnessError::io(&report_path, e))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub peclet: f64,
    pub peak_z: f64,
    pub peak_k: usize,
    pub equilibrium_gain: f64,
}

/// Runs every sweep point and writes `<point>.csv` files plus `summary.csv`.
///
/// Nothing is written unless every point validates and solves.
pub fn cmd_sweep(sweep: &Path, out_dir: &Path, tol: f64) -> Result<Vec<SummaryRow>, HarnessError> {
    let spec = SweepSpec::load(sweep)?;
    let results = spec
        .points
        .par_iter()
        .zip(&spec.values)
        .map(|(sc, &value)| {
            let traj = simulate(sc, None)?;
            let gain = equilibrium_gain(&TransitionModel::from_config(&sc.cfg), tol)
                .map_err(|e| HarnessError::Numerical(format!("{}: {e}", sc.name)))?;
            let (peak_k, peak_z) = traj.peak();
            let row = SummaryRow {
                value,
                peclet: sc.cfg.peclet(),
                peak_z,
                peak_k,
                equilibrium_gain: gain,
            };
            Ok((traj, row))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    for (sc, (traj, _)) in spec.points.iter().zip(&results) {
        let path = out_dir.join(format!("{}.csv", sc.name));
        with_output(Some(&path), |w| write_trajectory_csv(w, traj))?;
    }
    let rows: Vec<SummaryRow> = results.into_iter().map(|(_, row)| row).collect();
    let summary = out_dir.join("summary.csv");
    with_output(Some(&summary), |w| {
        writeln!(w, "value,Pe,peak_z,peak_k,equilibrium_gain")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_real(r.value),
                fmt_real(r.peclet),
                fmt_real(r.peak_z),
                r.peak_k,
                fmt_real(r.equilibrium_gain)
            )?;
        }
        w.flush()
    })?;
    Ok(rows)
}

/// Power iteration on the scenario's `Q`; unconverged runs are flagged, not errors.
pub fn cmd_spectral(scenario: &Path, iters: usize, tol: f64) -> Result<PowerIteration, HarnessError> {
    let sc = Scenario::load(scenario)?;
    Ok(power_iteration(&TransitionModel::from_config(&sc.cfg), iters, tol))
}

/// Writes the scenario's `Q`, ψ, b and h as triplets.
pub fn cmd_dump(scenario: &Path, output: Option<&Path>) -> Result<(), HarnessError> {
    let sc = Scenario::load(scenario)?;
    let text = TransitionModel::from_config(&sc.cfg).to_triplets();
    with_output(output, |w| {
        w.write_all(text.as_bytes())?;
        w.flush()
    })
}
