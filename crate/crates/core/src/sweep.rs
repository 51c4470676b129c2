//! Detuning maps and contrast curves.
//!
//! Axes are ordinary frequencies in GHz. Matrices are stored row-major with
//! rows following the control detuning and columns the signal detuning.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{BiasPolicy, RingCavity};
use crate::dynamics::{ControlResponse, SwitchMetrics};
use crate::error::{Error, Result};
use crate::medium::{AtomicMedium, FieldConfig};
use crate::units::ghz_to_rad_s;

/// Transmission levels outlined on detuning maps.
pub const CONTOUR_LEVELS: [f64; 3] = [0.5, 0.8, 0.95];

/// Uniform axis from `start_ghz` to `stop_ghz` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub points: usize,
}

impl AxisRange {
    pub fn new(start_ghz: f64, stop_ghz: f64, points: usize) -> Self {
        Self {
            start_ghz,
            stop_ghz,
            points,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if self.points < 2 {
            return Err(Error::config(
                format!("{key}.points"),
                format!("must be >= 2 (got {})", self.points),
            ));
        }
        if !(self.start_ghz < self.stop_ghz) || !self.start_ghz.is_finite() || !self.stop_ghz.is_finite() {
            return Err(Error::config(
                format!("{key}.stop_ghz"),
                format!("must exceed start_ghz = {} (got {})", self.start_ghz, self.stop_ghz),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop_ghz - self.start_ghz) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.stop_ghz
                } else {
                    self.start_ghz + step * i as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub delta_s_axis: Vec<f64>,
    pub delta_c_axis: Vec<f64>,
    /// Control-induced phase shift Δφ (rad), unwrapped.
    pub values_phase: Vec<Vec<f64>>,
    /// Worse of the two single-pass transmissions, so a point is marked
    /// transparent only if the signal passes in both switch states.
    pub values_transmission: Vec<Vec<f64>>,
    pub transmission_on: Vec<Vec<f64>>,
    pub transmission_off: Vec<Vec<f64>>,
}

/// Threshold mask and outline of one transmission level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub level: f64,
    pub mask: Vec<Vec<bool>>,
    /// Polylines in `(delta_s_ghz, delta_c_ghz)`; closed ones repeat their first point.
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Phase shift and single-pass transmission over a signal × control detuning grid.
pub fn sweep_2d(
    delta_s: &AxisRange,
    delta_c: &AxisRange,
    field: &FieldConfig,
    medium: &AtomicMedium,
    cavity: &RingCavity,
) -> Result<SweepGrid> {
    delta_s.validate("sweep.delta_s")?;
    delta_c.validate("sweep.delta_c")?;
    let xs = delta_s.values();
    let ys = delta_c.values();
    let length = cavity.round_trip_length;

    // With the control off the response does not depend on the control detuning.
    let off: Vec<_> = xs
        .par_iter()
        .map(|&x| {
            let f = field.control_off().with_detunings(ghz_to_rad_s(x), field.delta_c);
            medium.response(&f, length)
        })
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<(f64, f64)>> = ys
        .par_iter()
        .map(|&y| {
            xs.iter()
                .zip(&off)
                .map(|(&x, r_off)| {
                    let on = field.with_detunings(ghz_to_rad_s(x), ghz_to_rad_s(y));
                    let r_on = medium.response(&on, length)?;
                    let shift = medium.atom().k_s() * medium.cell().length * (r_on.n.re - r_off.n.re);
                    Ok((shift, r_on.transmission_single_pass))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let off_row: Vec<f64> = off.iter().map(|r| r.transmission_single_pass).collect();
    let values_phase = rows.iter().map(|row| row.iter().map(|p| p.0).collect()).collect();
    let transmission_on: Vec<Vec<f64>> = rows.iter().map(|row| row.iter().map(|p| p.1).collect()).collect();
    let values_transmission = transmission_on
        .iter()
        .map(|row| row.iter().zip(&off_row).map(|(a, b)| a.min(*b)).collect())
        .collect();
    Ok(SweepGrid {
        delta_s_axis: xs,
        delta_c_axis: ys,
        values_phase,
        values_transmission,
        transmission_on,
        transmission_off: vec![off_row; delta_c.points],
    })
}

impl SweepGrid {
    pub fn mask(&self, level: f64) -> Vec<Vec<bool>> {
        self.values_transmission
            .iter()
            .map(|row| row.iter().map(|&v| v > level).collect())
            .collect()
    }

    pub fn contours(&self) -> Vec<Contour> {
        CONTOUR_LEVELS
            .iter()
            .map(|&level| Contour {
                level,
                mask: self.mask(level),
                polylines: self.polylines(level),
            })
            .collect()
    }

    /// Marching-squares outline of `values_transmission = level`.
    pub fn polylines(&self, level: f64) -> Vec<Vec<[f64; 2]>> {
        let v = &self.values_transmission;
        let inside = |i: usize, j: usize| v[i][j] > level;
        let mut links: BTreeMap<Edge, Vec<Edge>> = BTreeMap::new();
        let mut link = |a: Edge, b: Edge| {
            links.entry(a).or_default().push(b);
            links.entry(b).or_default().push(a);
        };
        for i in 0..self.delta_c_axis.len() - 1 {
            for j in 0..self.delta_s_axis.len() - 1 {
                let bottom = Edge::Row(i, j);
                let top = Edge::Row(i + 1, j);
                let left = Edge::Col(i, j);
                let right = Edge::Col(i, j + 1);
                let corners = [inside(i, j), inside(i, j + 1), inside(i + 1, j + 1), inside(i + 1, j)];
                let cut = [
                    (corners[0] != corners[1], bottom),
                    (corners[1] != corners[2], right),
                    (corners[2] != corners[3], top),
                    (corners[3] != corners[0], left),
                ];
                let crossed: Vec<Edge> = cut.iter().filter(|c| c.0).map(|c| c.1).collect();
                match crossed.len() {
                    2 => link(crossed[0], crossed[1]),
                    4 => {
                        let centre = (v[i][j] + v[i][j + 1] + v[i + 1][j + 1] + v[i + 1][j]) / 4.0;
                        if (centre > level) == corners[0] {
                            link(bottom, right);
                            link(top, left);
                        } else {
                            link(left, bottom);
                            link(right, top);
                        }
                    }
                    _ => {}
                }
            }
        }
        self.chain(links, level)
    }

    fn chain(&self, mut links: BTreeMap<Edge, Vec<Edge>>, level: f64) -> Vec<Vec<[f64; 2]>> {
        let mut out = Vec::new();
        let starts: Vec<Edge> = links
            .iter()
            .filter(|(_, n)| n.len() == 1)
            .map(|(e, _)| *e)
            .chain(links.keys().copied())
            .collect();
        for start in starts {
            if links.get(&start).is_none_or(Vec::is_empty) {
                continue;
            }
            let mut path = vec![start];
            let mut current = start;
            while let Some(next) = links.get_mut(&current).and_then(Vec::pop) {
                if let Some(back) = links.get_mut(&next) {
                    if let Some(k) = back.iter().position(|e| *e == current) {
                        back.remove(k);
                    }
                }
                path.push(next);
                current = next;
            }
            out.push(path.into_iter().map(|e| self.edge_point(e, level)).collect());
        }
        out
    }

    fn edge_point(&self, edge: Edge, level: f64) -> [f64; 2] {
        let v = &self.values_transmission;
        let xs = &self.delta_s_axis;
        let ys = &self.delta_c_axis;
        let lerp = |a: f64, b: f64, va: f64, vb: f64| a + (b - a) * (level - va) / (vb - va);
        match edge {
            Edge::Row(i, j) => [lerp(xs[j], xs[j + 1], v[i][j], v[i][j + 1]), ys[i]],
            Edge::Col(i, j) => [xs[j], lerp(ys[i], ys[i + 1], v[i][j], v[i + 1][j])],
        }
    }
}

/// Grid edge crossed by a contour: `Row(i, j)` joins `(i, j)`–`(i, j+1)`,
/// `Col(i, j)` joins `(i, j)`–`(i+1, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    Row(usize, usize),
    Col(usize, usize),
}

/// 4-connected components of `mask`, each as a list of `(row, col)` cells.
pub fn connected_regions(mask: &[Vec<bool>]) -> Vec<Vec<(usize, usize)>> {
    let rows = mask.len();
    let cols = mask.first().map_or(0, Vec::len);
    let mut seen = vec![vec![false; cols]; rows];
    let mut regions = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if !mask[i][j] || seen[i][j] {
                continue;
            }
            let mut region = Vec::new();
            let mut queue = VecDeque::from([(i, j)]);
            seen[i][j] = true;
            while let Some((a, b)) = queue.pop_front() {
                region.push((a, b));
                let neighbours = [(a.wrapping_sub(1), b), (a + 1, b), (a, b.wrapping_sub(1)), (a, b + 1)];
                for (p, q) in neighbours {
                    if p < rows && q < cols && mask[p][q] && !seen[p][q] {
                        seen[p][q] = true;
                        queue.push_back((p, q));
                    }
                }
            }
            regions.push(region);
        }
    }
    regions
}

/// One point of a contrast-versus-detuning curve with `Δ_c = Δ_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagonalPoint {
    pub detuning_ghz: f64,
    pub phase_shift: f64,
    pub contrast: f64,
    pub t_on: f64,
    pub t_off: f64,
    pub r_on: f64,
    pub insertion_loss_db: f64,
    pub intracavity_loss: f64,
}

/// Steady-state switching contrast along the diagonal `Δ_c = Δ_s`.
pub fn sweep_contrast_diagonal(
    detuning_axis: &[f64],
    field: &FieldConfig,
    medium: &AtomicMedium,
    cavity: &RingCavity,
    bias: BiasPolicy,
) -> Result<Vec<DiagonalPoint>> {
    detuning_axis
        .par_iter()
        .map(|&d| diagonal_point(d, field, medium, cavity, bias))
        .collect()
}

fn diagonal_point(
    detuning_ghz: f64,
    field: &FieldConfig,
    medium: &AtomicMedium,
    cavity: &RingCavity,
    bias: BiasPolicy,
) -> Result<DiagonalPoint> {
    let w = ghz_to_rad_s(detuning_ghz);
    let on = field.with_detunings(w, w);
    let response = ControlResponse::from_medium(medium, cavity, &on, bias)?;
    let (off_levels, on_levels) = response.steady_state(cavity);
    let m = SwitchMetrics::from_levels(on_levels.transmitted, off_levels.transmitted, on_levels.reflected, None)?;
    let phase_shift = medium.phase_shift(&on, &on.control_off(), cavity.round_trip_length, false)?;
    Ok(DiagonalPoint {
        detuning_ghz,
        phase_shift,
        contrast: m.contrast,
        t_on: m.t_on,
        t_off: m.t_off,
        r_on: m.r_on,
        insertion_loss_db: m.insertion_loss_db,
        intracavity_loss: m.intracavity_loss,
    })
}
