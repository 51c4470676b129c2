//! Two-parameter least-squares fit of vapor temperature and intra-cavity
//! control power to a contrast-versus-detuning curve.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{BiasPolicy, RingCavity};
use crate::doppler::DopplerSettings;
use crate::error::{Error, Result};
use crate::medium::{AtomicMedium, FieldConfig, LadderAtom, VaporCell, TEMPERATURE_RANGE_K};
use crate::sweep::{sweep_contrast_diagonal, DiagonalPoint};

pub const MIN_DATA_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    #[serde(rename = "temperature_k")]
    pub temperature: f64,
    #[serde(rename = "intracavity_power_w")]
    pub intracavity_power: f64,
}

impl FitParams {
    pub fn new(temperature: f64, intracavity_power: f64) -> Self {
        Self {
            temperature,
            intracavity_power,
        }
    }

    fn to_array(self) -> [f64; 2] {
        [self.temperature, self.intracavity_power]
    }

    fn from_array(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub temperature_k: [f64; 2],
    pub intracavity_power_w: [f64; 2],
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            temperature_k: [300.0, 400.0],
            intracavity_power_w: [0.05, 2.0],
        }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<()> {
        for (key, [lo, hi]) in [
            ("fit.bounds.temperature_k", self.temperature_k),
            ("fit.bounds.intracavity_power_w", self.intracavity_power_w),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(
                    key,
                    format!("need finite lower < upper (got [{lo}, {hi}])"),
                ));
            }
        }
        let (tmin, tmax) = TEMPERATURE_RANGE_K;
        let [lo, hi] = self.temperature_k;
        if lo <= tmin || hi >= tmax {
            return Err(Error::config(
                "fit.bounds.temperature_k",
                format!("must lie inside ({tmin}, {tmax}) K (got [{lo}, {hi}])"),
            ));
        }
        if self.intracavity_power_w[0] < 0.0 {
            return Err(Error::config(
                "fit.bounds.intracavity_power_w",
                format!("lower bound must be >= 0 (got {})", self.intracavity_power_w[0]),
            ));
        }
        Ok(())
    }

    fn lower(&self) -> [f64; 2] {
        [self.temperature_k[0], self.intracavity_power_w[0]]
    }

    fn span(&self) -> [f64; 2] {
        [
            self.temperature_k[1] - self.temperature_k[0],
            self.intracavity_power_w[1] - self.intracavity_power_w[0],
        ]
    }

    fn unit_coords(&self, p: FitParams) -> [f64; 2] {
        let (lo, span, a) = (self.lower(), self.span(), p.to_array());
        [(a[0] - lo[0]) / span[0], (a[1] - lo[1]) / span[1]]
    }

    fn params_at(&self, u: [f64; 2]) -> FitParams {
        let (lo, span) = (self.lower(), self.span());
        FitParams::from_array([lo[0] + u[0] * span[0], lo[1] + u[1] * span[1]])
    }

    pub fn contains(&self, p: FitParams) -> bool {
        let [t0, t1] = self.temperature_k;
        let [p0, p1] = self.intracavity_power_w;
        (t0..=t1).contains(&p.temperature) && (p0..=p1).contains(&p.intracavity_power)
    }
}

/// Everything held fixed during a fit. The cell temperature and field power
/// are replaced by the fit parameters on each evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastModel {
    pub atom: LadderAtom,
    pub cell: VaporCell,
    pub field: FieldConfig,
    pub cavity: RingCavity,
    pub doppler: DopplerSettings,
    pub bias: BiasPolicy,
}

impl ContrastModel {
    pub fn curve(&self, params: FitParams, detunings_ghz: &[f64]) -> Result<Vec<DiagonalPoint>> {
        let cell = VaporCell {
            temperature: params.temperature,
            ..self.cell
        };
        let medium = AtomicMedium::new(self.atom, cell, self.doppler)?;
        let field = self.field.with_control_power(params.intracavity_power);
        sweep_contrast_diagonal(detunings_ghz, &field, &medium, &self.cavity, self.bias)
    }

    pub fn contrasts(&self, params: FitParams, detunings_ghz: &[f64]) -> Result<Vec<f64>> {
        Ok(self.curve(params, detunings_ghz)?.iter().map(|p| p.contrast).collect())
    }
}

/// Measured `(detuning_ghz, contrast)` pairs with `Δ_c = Δ_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub data: Vec<(f64, f64)>,
    pub initial: FitParams,
    pub bounds: Bounds,
    pub model: ContrastModel,
}

impl FitProblem {
    pub fn validate(&self) -> Result<()> {
        if self.data.len() < MIN_DATA_POINTS {
            return Err(Error::config(
                "fit.data",
                format!("need at least {MIN_DATA_POINTS} points (got {})", self.data.len()),
            ));
        }
        if self.data.iter().any(|(d, c)| !d.is_finite() || !c.is_finite()) {
            return Err(Error::config("fit.data", "contains non-finite values"));
        }
        self.bounds.validate()?;
        if !self.bounds.contains(self.initial) {
            return Err(Error::config(
                "fit.initial",
                format!(
                    "({}, {}) lies outside the bounds",
                    self.initial.temperature, self.initial.intracavity_power
                ),
            ));
        }
        Ok(())
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.0).collect()
    }

    /// Sum of squared contrast residuals.
    pub fn objective(&self, params: FitParams) -> Result<f64> {
        let model = self.model.contrasts(params, &self.detunings())?;
        Ok(model.iter().zip(&self.data).map(|(m, (_, c))| (m - c).powi(2)).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    NelderMead,
    GridRefine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub method: FitMethod,
    pub best_params: FitParams,
    pub residual_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Final grid spacing `[K, W]` of the grid search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fine_cell: Option<[f64; 2]>,
    /// Best vertex after each simplex iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param_trace: Option<Vec<FitParams>>,
}

pub fn fit_least_squares(problem: &FitProblem, method: FitMethod) -> Result<FitResult> {
    problem.validate()?;
    match method {
        FitMethod::NelderMead => nelder_mead(problem, &NelderMeadOptions::default()),
        FitMethod::GridRefine => grid_refine(problem, &GridOptions::default()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Simplex size in unit-box coordinates below which the search stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 500,
            initial_step: 0.05,
        }
    }
}

/// Reflect a unit-box coordinate back inside `[0, 1]`.
fn fold(x: f64) -> f64 {
    let y = if x < 0.0 {
        -x
    } else if x > 1.0 {
        2.0 - x
    } else {
        x
    };
    y.clamp(0.0, 1.0)
}

/// Bounded Nelder–Mead in the unit box spanned by the bounds.
pub fn nelder_mead(problem: &FitProblem, options: &NelderMeadOptions) -> Result<FitResult> {
    problem.validate()?;
    let bounds = &problem.bounds;
    let mut evaluations = 0usize;
    let mut eval = |u: [f64; 2]| -> Result<f64> {
        evaluations += 1;
        problem.objective(bounds.params_at(u))
    };
    let x0 = bounds.unit_coords(problem.initial);
    let step = |x: f64| {
        if x + options.initial_step <= 1.0 {
            x + options.initial_step
        } else {
            x - options.initial_step
        }
    };
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    for u in [x0, [step(x0[0]), x0[1]], [x0[0], step(x0[1])]] {
        simplex.push((u, eval(u)?));
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|v| distance(v.0, simplex[0].0))
            .fold(0.0, f64::max);
        if size < options.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid = midpoint(simplex[0].0, simplex[1].0);
        let worst = simplex[2];
        let toward = |t: f64| {
            let p = [
                centroid[0] + t * (worst.0[0] - centroid[0]),
                centroid[1] + t * (worst.0[1] - centroid[1]),
            ];
            [fold(p[0]), fold(p[1])]
        };
        let reflected = toward(-1.0);
        let fr = eval(reflected)?;
        if fr < simplex[0].1 {
            let expanded = toward(-2.0);
            let fe = eval(expanded)?;
            simplex[2] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 { toward(-0.5) } else { toward(0.5) };
            let fc = eval(contracted)?;
            if fc < fr.min(worst.1) {
                simplex[2] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let u = midpoint(best, v.0);
                    *v = (u, eval(u)?);
                }
            }
        }
        let best = simplex
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("three vertices");
        trace.push(bounds.params_at(best.0));
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    if !converged {
        log::warn!("Nelder–Mead stopped after {iterations} iterations without reaching tolerance");
    }
    Ok(FitResult {
        method: FitMethod::NelderMead,
        best_params: bounds.params_at(simplex[0].0),
        residual_norm: simplex[0].1,
        iterations,
        evaluations,
        converged,
        fine_cell: None,
        param_trace: Some(trace),
    })
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Points per axis at every level, ends included.
    pub points: usize,
    pub refinements: usize,
    /// Cell shrink factor per refinement.
    pub shrink: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points: 20,
            refinements: 2,
            shrink: 5.0,
        }
    }
}

/// Exhaustive grid search with successive zoomed grids around the best
/// node, finished by a quadratic fit over the 3×3 neighbourhood of the
/// final best node.
pub fn grid_refine(problem: &FitProblem, options: &GridOptions) -> Result<FitResult> {
    problem.validate()?;
    if options.points < 3 || !(options.shrink > 1.0) {
        return Err(Error::config(
            "fit.grid",
            "need >= 3 points per axis and a shrink factor > 1",
        ));
    }
    let bounds = &problem.bounds;
    let n = options.points;
    let mut lo = [0.0, 0.0];
    let mut hi = [1.0, 1.0];
    let mut cell = [1.0 / (n - 1) as f64; 2];
    let mut evaluations = 0usize;
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for level in 0..=options.refinements {
        if level > 0 {
            let half = [1.9 * cell[0], 1.9 * cell[1]];
            cell = [cell[0] / options.shrink, cell[1] / options.shrink];
            for k in 0..2 {
                lo[k] = (best.0[k] - half[k]).max(0.0);
                hi[k] = (best.0[k] + half[k]).min(1.0);
            }
        }
        let axes: Vec<Vec<f64>> = (0..2)
            .map(|k| {
                let m = ((hi[k] - lo[k]) / cell[k]).round().max(1.0) as usize;
                (0..=m)
                    .map(|i| if i == m { hi[k] } else { lo[k] + i as f64 * cell[k] })
                    .collect()
            })
            .collect();
        let nodes: Vec<[f64; 2]> = axes[0]
            .iter()
            .flat_map(|&x| axes[1].iter().map(move |&y| [x, y]))
            .collect();
        let values: Vec<f64> = nodes
            .par_iter()
            .map(|&u| problem.objective(bounds.params_at(u)))
            .collect::<Result<_>>()?;
        evaluations += nodes.len();
        for (u, v) in nodes.into_iter().zip(values) {
            if v < best.1 {
                best = (u, v);
            }
        }
    }

    let (polished, extra) = quadratic_polish(problem, best, cell)?;
    evaluations += extra;
    let span = bounds.span();
    Ok(FitResult {
        method: FitMethod::GridRefine,
        best_params: bounds.params_at(polished.0),
        residual_norm: polished.1,
        iterations: options.refinements + 1,
        evaluations,
        converged: true,
        fine_cell: Some([cell[0] * span[0], cell[1] * span[1]]),
        param_trace: None,
    })
}

/// Least-squares quadratic through the 3×3 stencil around `centre`; its
/// stationary point replaces the centre only if it is a minimum inside the
/// stencil with a lower objective.
fn quadratic_polish(problem: &FitProblem, centre: ([f64; 2], f64), cell: [f64; 2]) -> Result<(([f64; 2], f64), usize)> {
    let bounds = &problem.bounds;
    let offsets: Vec<(f64, f64)> = (-1..=1)
        .flat_map(|i| (-1..=1).map(move |j| (i as f64, j as f64)))
        .collect();
    let inside = |a: f64, b: f64| {
        let u = [centre.0[0] + a * cell[0], centre.0[1] + b * cell[1]];
        (0.0..=1.0).contains(&u[0]) && (0.0..=1.0).contains(&u[1])
    };
    if !offsets.iter().all(|&(a, b)| inside(a, b)) {
        return Ok((centre, 0));
    }
    let values: Vec<f64> = offsets
        .par_iter()
        .map(|&(a, b)| {
            if a == 0.0 && b == 0.0 {
                Ok(centre.1)
            } else {
                problem.objective(bounds.params_at([centre.0[0] + a * cell[0], centre.0[1] + b * cell[1]]))
            }
        })
        .collect::<Result<_>>()?;
    let mut evaluations = 8;
    // f ≈ c + gx·a + gy·b + ½(hxx·a² + 2hxy·ab + hyy·b²) on the stencil a, b ∈ {−1, 0, 1}.
    let at = |a: i32, b: i32| values[((a + 1) * 3 + (b + 1)) as usize];
    let mean_over = |a: i32| (at(a, -1) + at(a, 0) + at(a, 1)) / 3.0;
    let mean_over_b = |b: i32| (at(-1, b) + at(0, b) + at(1, b)) / 3.0;
    let gx = (mean_over(1) - mean_over(-1)) / 2.0;
    let gy = (mean_over_b(1) - mean_over_b(-1)) / 2.0;
    let hxx = mean_over(1) - 2.0 * mean_over(0) + mean_over(-1);
    let hyy = mean_over_b(1) - 2.0 * mean_over_b(0) + mean_over_b(-1);
    let hxy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / 4.0;
    let det = hxx * hyy - hxy * hxy;
    if !(hxx > 0.0 && det > 0.0) {
        return Ok((centre, evaluations));
    }
    let a = -(hyy * gx - hxy * gy) / det;
    let b = -(hxx * gy - hxy * gx) / det;
    if a.abs() > 1.0 || b.abs() > 1.0 {
        return Ok((centre, evaluations));
    }
    let u = [centre.0[0] + a * cell[0], centre.0[1] + b * cell[1]];
    let value = problem.objective(bounds.params_at(u))?;
    evaluations += 1;
    Ok((if value < centre.1 { (u, value) } else { centre }, evaluations))
}

/// Model contrasts at `truth` on `detunings_ghz`, plus Gaussian noise of
/// standard deviation `noise_sigma` drawn from a seeded generator.
pub fn synthetic_data(
    model: &ContrastModel,
    truth: FitParams,
    detunings_ghz: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let clean = model.contrasts(truth, detunings_ghz)?;
    if noise_sigma == 0.0 {
        return Ok(detunings_ghz.iter().copied().zip(clean).collect());
    }
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::config("fit.noise_sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(detunings_ghz
        .iter()
        .zip(clean)
        .map(|(&d, c)| (d, c + normal.sample(&mut rng)))
        .collect())
}

#[derive(Debug, Deserialize)]
struct DataRow {
    detuning_ghz: f64,
    contrast: f64,
}

/// Reads a `detuning_ghz,contrast` CSV.
pub fn load_fit_data(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["detuning_ghz", "contrast"] {
        return Err(Error::Data {
            path: path.to_path_buf(),
            message: format!(
                "expected header `detuning_ghz,contrast`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    reader
        .deserialize::<DataRow>()
        .map(|row| {
            row.map(|r| (r.detuning_ghz, r.contrast))
                .map_err(|e| csv_error(path, e))
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}
