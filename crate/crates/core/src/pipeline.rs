//! File-producing commands behind the CLI. Every command is a pure function
//! of the [`RunConfig`], so repeated runs write byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cavity::{self, FormulaMode};
use crate::config::{Prepared, RunConfig};
use crate::dynamics::{simulate_switching, window_metrics, ControlResponse, SwitchMetrics};
use crate::error::{Error, Result};
use crate::fit::{
    fit_least_squares, load_fit_data, nelder_mead, synthetic_data, FitMethod, FitParams, FitProblem, FitResult,
    NelderMeadOptions,
};
use crate::sweep::{sweep_2d, sweep_contrast_diagonal, SweepGrid};
use crate::units::ghz_to_rad_s;

fn out_dir(config: &RunConfig) -> Result<&Path> {
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir)
}

fn write_records(path: &Path, header: Vec<String>, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    write_records(path, header.iter().map(|h| h.to_string()).collect(), rows)
}

/// Gnuplot `nonuniform matrix` layout: the first row holds the column count
/// followed by the Δs axis, each later row starts with its Δc value.
fn write_matrix(path: &Path, xs: &[f64], ys: &[f64], values: &[Vec<f64>]) -> Result<()> {
    let header = std::iter::once(xs.len() as f64)
        .chain(xs.iter().copied())
        .map(|v| v.to_string())
        .collect();
    let rows = ys
        .iter()
        .zip(values)
        .map(|(y, row)| std::iter::once(*y).chain(row.iter().copied()).collect());
    write_records(path, header, rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Optical response versus signal detuning at the configured control detuning.
pub fn cmd_response(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let p = config.prepare()?;
    let dir = out_dir(config)?;
    let length = p.cavity.round_trip_length;
    let rows = config
        .sweep
        .response
        .values()
        .into_iter()
        .map(|ds| {
            let on = p.field.with_detunings(ghz_to_rad_s(ds), p.field.delta_c);
            let r = p.medium.phase_shift_response(&on, &on.control_off(), length, false)?;
            let cav = ControlResponse::from_medium(&p.medium, &p.cavity, &on, p.bias)?;
            let t = |phase: f64, survival: f64| {
                cavity::transmission(phase, &p.cavity.with_survival(survival), p.formula_mode).value
            };
            Ok(vec![
                ds,
                r.chi.re,
                r.chi.im,
                r.n.re,
                r.n.im,
                r.alpha,
                r.phase,
                r.phase_shift.unwrap_or(0.0),
                r.transmission_single_pass,
                t(cav.phase_off, cav.survival_off),
                t(cav.phase_on, cav.survival_on),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join("response.csv");
    write_csv(
        &path,
        &[
            "delta_s_ghz",
            "chi_re",
            "chi_im",
            "n_re",
            "n_im",
            "alpha_per_m",
            "phase_rad",
            "phase_shift_rad",
            "transmission_single_pass",
            "cavity_t_off",
            "cavity_t_on",
        ],
        rows,
    )?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
struct ContourLevel<'a> {
    level: f64,
    cells_above: usize,
    polylines: &'a [Vec<[f64; 2]>],
}

#[derive(Debug, Serialize)]
struct ContourFile<'a> {
    delta_s_axis_ghz: &'a [f64],
    delta_c_axis_ghz: &'a [f64],
    levels: Vec<ContourLevel<'a>>,
}

pub fn run_sweep2d(p: &Prepared, config: &RunConfig) -> Result<SweepGrid> {
    sweep_2d(
        &config.sweep.delta_s,
        &config.sweep.delta_c,
        &p.field,
        &p.medium,
        &p.cavity,
    )
}

/// Phase-shift and transmission maps over (Δs, Δc) with contour outlines.
pub fn cmd_sweep2d(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let p = config.prepare()?;
    let dir = out_dir(config)?;
    let grid = run_sweep2d(&p, config)?;
    let (xs, ys) = (&grid.delta_s_axis, &grid.delta_c_axis);
    let mut written = Vec::new();
    for (name, values) in [
        ("sweep2d_phase.csv", &grid.values_phase),
        ("sweep2d_transmission.csv", &grid.values_transmission),
        ("sweep2d_transmission_on.csv", &grid.transmission_on),
        ("sweep2d_transmission_off.csv", &grid.transmission_off),
    ] {
        let path = dir.join(name);
        write_matrix(&path, xs, ys, values)?;
        written.push(path);
    }
    let contours = grid.contours();
    let file = ContourFile {
        delta_s_axis_ghz: xs,
        delta_c_axis_ghz: ys,
        levels: contours
            .iter()
            .map(|c| ContourLevel {
                level: c.level,
                cells_above: c.mask.iter().flatten().filter(|&&m| m).count(),
                polylines: &c.polylines,
            })
            .collect(),
    };
    let path = dir.join("sweep2d_contours.json");
    write_json(&path, &file)?;
    written.push(path);
    Ok(written)
}

/// Steady-state switching figures of merit along Δc = Δs.
pub fn cmd_sweep1d(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let p = config.prepare()?;
    let dir = out_dir(config)?;
    let points = sweep_contrast_diagonal(&config.sweep.diagonal.values(), &p.field, &p.medium, &p.cavity, p.bias)?;
    let path = dir.join("sweep1d.csv");
    write_csv(
        &path,
        &[
            "detuning_ghz",
            "phase_shift_rad",
            "contrast",
            "t_on",
            "t_off",
            "r_on",
            "insertion_loss_db",
            "intracavity_loss",
        ],
        points.iter().map(|q| {
            vec![
                q.detuning_ghz,
                q.phase_shift,
                q.contrast,
                q.t_on,
                q.t_off,
                q.r_on,
                q.insertion_loss_db,
                q.intracavity_loss,
            ]
        }),
    )?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub modulation_rate_hz: f64,
    pub trace_file: String,
    pub metrics_file: String,
    pub metrics: SwitchMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsSummary {
    pub finesse: f64,
    pub ring_up_time_s: f64,
    pub peak_power_w: f64,
    pub intracavity_control_power_w: f64,
    pub rates: Vec<RateSummary>,
}

fn rate_label(rate: f64) -> String {
    format!("{}MHz", rate / 1e6)
}

/// Time-domain switching at every configured modulation rate.
pub fn cmd_dynamics(config: &RunConfig) -> Result<(DynamicsSummary, Vec<PathBuf>)> {
    let p = config.prepare()?;
    let dir = out_dir(config)?;
    let finesse = cavity::finesse(&p.cavity)?;
    let mut written = Vec::new();
    let mut rates = Vec::new();
    for train in &p.pulses {
        let duration = config.pulses.periods as f64 * train.period();
        let trace = simulate_switching(&p.cavity, &p.medium, &p.field, train, duration, p.dynamics)?;
        let metrics = window_metrics(&trace)?;
        let label = rate_label(train.modulation_rate);
        let trace_file = format!("dynamics_{label}_trace.csv");
        let metrics_file = format!("dynamics_{label}_metrics.json");
        let path = dir.join(&trace_file);
        write_csv(
            &path,
            &["t_s", "transmitted", "reflected", "control_on"],
            (0..trace.len()).map(|i| {
                vec![
                    trace.time(i),
                    trace.transmitted[i],
                    trace.reflected[i],
                    if trace.control_mask[i] { 1.0 } else { 0.0 },
                ]
            }),
        )?;
        written.push(path);
        let path = dir.join(&metrics_file);
        write_json(&path, &metrics)?;
        written.push(path);
        rates.push(RateSummary {
            modulation_rate_hz: train.modulation_rate,
            trace_file,
            metrics_file,
            metrics,
        });
    }
    let summary = DynamicsSummary {
        finesse,
        ring_up_time_s: cavity::ring_up_time(finesse, p.cavity.round_trip_length)?,
        peak_power_w: config.pulses.peak_power_w,
        intracavity_control_power_w: p.field.control_power,
        rates,
    };
    let path = dir.join("dynamics_summary.json");
    write_json(&path, &summary)?;
    written.push(path);
    Ok((summary, written))
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub nelder_mead: FitResult,
    pub grid_refine: FitResult,
    pub synthetic_truth: Option<FitParams>,
}

/// Two-parameter (T, P·𝓕) fit of diagonal contrast data by both optimizers.
///
/// Data come from `data_path`, else `fit.data_path`, else a seeded synthetic
/// set on the diagonal axis (also written out as `fit_data.csv`). Results are
/// written even when an optimizer stops on its iteration cap, and the call
/// then fails with [`Error::NotConverged`].
pub fn cmd_fit(config: &RunConfig, data_path: Option<&Path>) -> Result<(FitOutcome, Vec<PathBuf>)> {
    let p = config.prepare()?;
    let dir = out_dir(config)?;
    let model = p.contrast_model();
    let mut written = Vec::new();
    let (data, synthetic_truth) = match data_path.or(config.fit.data_path.as_deref()) {
        Some(path) => (load_fit_data(path)?, None),
        None => {
            let s = &config.fit.synthetic;
            let truth = FitParams::new(s.temperature_k, s.intracavity_power_w);
            let data = synthetic_data(
                &model,
                truth,
                &config.sweep.diagonal.values(),
                s.noise_sigma,
                config.seed,
            )?;
            let path = dir.join("fit_data.csv");
            write_csv(
                &path,
                &["detuning_ghz", "contrast"],
                data.iter().map(|&(d, c)| vec![d, c]),
            )?;
            written.push(path);
            (data, Some(truth))
        }
    };
    let problem = FitProblem {
        data,
        initial: config.fit.initial,
        bounds: config.fit.bounds,
        model,
    };
    let options = NelderMeadOptions {
        max_iterations: config.fit.max_iterations,
        ..NelderMeadOptions::default()
    };
    problem.validate()?;
    let nelder_mead = nelder_mead(&problem, &options)?;
    let grid_refine = fit_least_squares(&problem, FitMethod::GridRefine)?;
    for (name, result) in [
        ("fit_nelder_mead.json", &nelder_mead),
        ("fit_grid_refine.json", &grid_refine),
    ] {
        let path = dir.join(name);
        write_json(&path, result)?;
        written.push(path);
    }

    let detunings = config.sweep.diagonal.values();
    let nm_curve = problem.model.curve(nelder_mead.best_params, &detunings)?;
    let grid_curve = problem.model.contrasts(grid_refine.best_params, &detunings)?;
    let path = dir.join("fit_curve.csv");
    write_csv(
        &path,
        &[
            "detuning_ghz",
            "contrast_nelder_mead",
            "contrast_grid_refine",
            "insertion_loss_db",
            "intracavity_loss",
        ],
        nm_curve
            .iter()
            .zip(&grid_curve)
            .map(|(q, g)| vec![q.detuning_ghz, q.contrast, *g, q.insertion_loss_db, q.intracavity_loss]),
    )?;
    written.push(path);

    if let Some(stuck) = [&nelder_mead, &grid_refine].into_iter().find(|r| !r.converged) {
        return Err(Error::NotConverged {
            iterations: stuck.iterations,
        });
    }
    Ok((
        FitOutcome {
            nelder_mead,
            grid_refine,
            synthetic_truth,
        },
        written,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct CavityInfo {
    pub finesse: f64,
    pub round_trip_amplitude: f64,
    pub round_trip_time_s: f64,
    pub free_spectral_range_hz: f64,
    pub bandwidth_hz: f64,
    pub ring_up_time_s: f64,
    pub formula_mode: FormulaMode,
    pub resonant_transmission: f64,
    pub resonant_reflection: f64,
    pub resonant_intracavity_loss: f64,
    pub peak_power_w: f64,
    pub peak_power_times_finesse_w: f64,
}

/// Derived cavity quantities for the configured mirrors and losses.
pub fn cavity_info(config: &RunConfig) -> Result<CavityInfo> {
    let p = config.prepare()?;
    let c = &p.cavity;
    let finesse = cavity::finesse(c)?;
    let t = cavity::transmission(0.0, c, p.formula_mode).value;
    let r = cavity::reflection(0.0, c);
    Ok(CavityInfo {
        finesse,
        round_trip_amplitude: c.round_trip_amplitude(),
        round_trip_time_s: c.round_trip_time(),
        free_spectral_range_hz: c.free_spectral_range(),
        bandwidth_hz: cavity::bandwidth(c)?,
        ring_up_time_s: cavity::ring_up_time(finesse, c.round_trip_length)?,
        formula_mode: p.formula_mode,
        resonant_transmission: t,
        resonant_reflection: r,
        resonant_intracavity_loss: 1.0 - t - r,
        peak_power_w: config.pulses.peak_power_w,
        peak_power_times_finesse_w: config.pulses.peak_power_w * finesse,
    })
}
