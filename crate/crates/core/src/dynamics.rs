//! Time-domain switching of the ring cavity.
//!
//! The circulating field just after beamsplitter 1 obeys the round-trip map
//!
//! `E(t) = t₁·E_in + r₁·r₂·√η(t)·e^{iφ(t)}·E(t − t_rt)`
//!
//! with the atomic phase and survival following the control envelope
//! instantaneously. The trace is sampled on a grid finer than one round trip;
//! delayed samples between grid points are linearly interpolated.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::{finesse, reflection, ring_up_time, transmission, BiasPolicy, FormulaMode, RingCavity};
use crate::error::{Error, Result};
use crate::medium::{AtomicMedium, FieldConfig};

/// 10–90% span of a linear ramp as a fraction of the full ramp.
const EDGE_FRACTION: f64 = 0.8;

/// Square control modulation with linear edges. Each period starts with the
/// control off and ends with it on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPulseTrain {
    /// Hz
    pub modulation_rate: f64,
    pub duty: f64,
    /// On-time per period (s); overrides `duty` when set.
    pub pulse_duration: Option<f64>,
    /// Control power before cavity enhancement (W). Reporting only: the on
    /// level of the simulation is the field's intra-cavity power.
    pub peak_power: f64,
    /// 10–90% edge of the envelope (s).
    pub edge_time: f64,
}

impl Default for ControlPulseTrain {
    fn default() -> Self {
        Self {
            modulation_rate: 2e6,
            duty: 0.5,
            pulse_duration: None,
            peak_power: 25e-3,
            edge_time: 1e-9,
        }
    }
}

impl ControlPulseTrain {
    pub fn new(modulation_rate: f64, duty: f64) -> Result<Self> {
        let p = Self {
            modulation_rate,
            duty,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_rate(mut self, modulation_rate: f64) -> Self {
        self.modulation_rate = modulation_rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.modulation_rate > 0.0 && self.modulation_rate.is_finite()) {
            return Err(Error::config(
                "pulses.modulation_rates_hz",
                format!("must be > 0 (got {})", self.modulation_rate),
            ));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::config(
                "pulses.duty",
                format!("must lie in (0, 1) (got {})", self.duty),
            ));
        }
        if !(self.peak_power >= 0.0) {
            return Err(Error::config(
                "pulses.peak_power_w",
                format!("must be >= 0 (got {})", self.peak_power),
            ));
        }
        if !(self.edge_time >= 0.0) {
            return Err(Error::config(
                "pulses.edge_time_s",
                format!("must be >= 0 (got {})", self.edge_time),
            ));
        }
        let on = self.on_duration();
        let period = self.period();
        if !(on > 0.0 && on < period) {
            return Err(Error::config(
                "pulses.pulse_duration_s",
                format!("must lie in (0, {period}) for this rate (got {on})"),
            ));
        }
        let ramp = self.ramp_duration();
        if ramp >= on || ramp >= period - on {
            return Err(Error::config(
                "pulses.edge_time_s",
                format!(
                    "edge {} too long for {on} s on / {} s off windows",
                    self.edge_time,
                    period - on
                ),
            ));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.modulation_rate
    }

    pub fn on_duration(&self) -> f64 {
        self.pulse_duration.unwrap_or(self.duty * self.period())
    }

    fn ramp_duration(&self) -> f64 {
        self.edge_time / EDGE_FRACTION
    }

    /// Envelope in `[0, 1]`. Half-maximum points are `on_duration` apart.
    pub fn envelope(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let period = self.period();
        let ramp = self.ramp_duration();
        let start = period - self.on_duration() - 0.5 * ramp;
        let k = (t / period).floor();
        let local = t - k * period;
        // Falling edge of the previous period's pulse spills into this one.
        if k >= 1.0 && local < 0.5 * ramp {
            return 0.5 - local / ramp;
        }
        if local >= period - 0.5 * ramp {
            return 1.0 - (local - (period - 0.5 * ramp)) / ramp;
        }
        if local < start {
            0.0
        } else if local < start + ramp {
            (local - start) / ramp
        } else {
            1.0
        }
    }
}

/// Cavity-side effect of the two control states: total round-trip phase
/// (rad) and round-trip intensity survival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlResponse {
    pub phase_off: f64,
    pub phase_on: f64,
    pub survival_off: f64,
    pub survival_on: f64,
}

impl ControlResponse {
    /// Phases and survivals for `field` (on) and the same field with the
    /// control off. Atomic absorption multiplies the cavity survival.
    pub fn from_medium(
        medium: &AtomicMedium,
        cavity: &RingCavity,
        field: &FieldConfig,
        bias: BiasPolicy,
    ) -> Result<Self> {
        let off = field.control_off();
        let length = cavity.round_trip_length;
        let response_off = medium.response(&off, length)?;
        let response_on = medium.phase_shift_response(field, &off, length, false)?;
        let shift = response_on.phase_shift.unwrap_or(0.0);
        let (phase_off, phase_on) = bias.cavity_phases(response_off.phase, shift, cavity.bias_phase);
        Ok(Self {
            phase_off,
            phase_on,
            survival_off: cavity.eta * response_off.transmission_single_pass,
            survival_on: cavity.eta * response_on.transmission_single_pass,
        })
    }

    /// Steady-state ports `(off, on)` in self-consistent mode.
    pub fn steady_state(&self, cavity: &RingCavity) -> (PortLevels, PortLevels) {
        let level = |phase: f64, survival: f64| {
            let c = cavity.with_survival(survival);
            PortLevels {
                transmitted: transmission(phase, &c, FormulaMode::SelfConsistent).value,
                reflected: reflection(phase, &c),
            }
        };
        (
            level(self.phase_off, self.survival_off),
            level(self.phase_on, self.survival_on),
        )
    }

    fn at(&self, envelope: f64) -> (f64, f64) {
        (
            self.phase_off + envelope * (self.phase_on - self.phase_off),
            self.survival_off + envelope * (self.survival_on - self.survival_off),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PortLevels {
    pub transmitted: f64,
    pub reflected: f64,
}

/// Output intensities normalised to the input signal power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeTrace {
    pub dt: f64,
    pub transmitted: Vec<f64>,
    pub reflected: Vec<f64>,
    pub control_mask: Vec<bool>,
    /// Cavity ring-up time used for the default transient guard (s).
    pub ring_up_time: f64,
}

impl TimeTrace {
    pub fn len(&self) -> usize {
        self.transmitted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmitted.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DynamicsSettings {
    /// Sample interval (s); defaults to an eighth of the round-trip time.
    pub dt: Option<f64>,
    pub bias: BiasPolicy,
}

/// Switching trace for `field_base` pulsed by `pulses` over `duration` seconds.
pub fn simulate_switching(
    cavity: &RingCavity,
    medium: &AtomicMedium,
    field_base: &FieldConfig,
    pulses: &ControlPulseTrain,
    duration: f64,
    settings: DynamicsSettings,
) -> Result<TimeTrace> {
    let response = ControlResponse::from_medium(medium, cavity, field_base, settings.bias)?;
    simulate_with_response(cavity, &response, pulses, duration, settings.dt)
}

/// Round-trip iteration for a given on/off cavity response.
pub fn simulate_with_response(
    cavity: &RingCavity,
    response: &ControlResponse,
    pulses: &ControlPulseTrain,
    duration: f64,
    dt: Option<f64>,
) -> Result<TimeTrace> {
    pulses.validate()?;
    for s in [response.survival_off, response.survival_on] {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain(format!("round-trip survival {s} outside (0, 1]")));
        }
    }
    let t_rt = cavity.round_trip_time();
    let dt = dt.unwrap_or(t_rt / 8.0);
    if !(dt > 0.0) || dt > t_rt / 4.0 * (1.0 + 1e-12) {
        return Err(Error::config(
            "pulses.dt_s",
            format!("must lie in (0, {:e}] (a quarter round trip); got {dt:e}", t_rt / 4.0),
        ));
    }
    if !(duration >= 2.0 * pulses.period() * (1.0 - 1e-12)) {
        return Err(Error::Precondition(format!(
            "duration {duration:e} s covers fewer than two modulation periods ({:e} s)",
            pulses.period()
        )));
    }

    let samples = (duration / dt).round() as usize;
    let delay = t_rt / dt;
    let delay = if (delay - delay.round()).abs() < 1e-9 {
        delay.round()
    } else {
        delay
    };
    let whole = delay.floor() as usize;
    let frac = delay - whole as f64;

    let r1 = cavity.r1;
    let t1 = cavity.t1;
    let t2_sq = cavity.t2 * cavity.t2;
    let gain = |survival: f64| cavity.r2 * survival.sqrt();
    let initial = {
        let a = r1 * gain(response.survival_off);
        Complex64::new(t1, 0.0) / (Complex64::new(1.0, 0.0) - a * Complex64::cis(response.phase_off))
    };

    let mut field = Vec::with_capacity(samples);
    let delayed = |field: &[Complex64], n: usize| -> Complex64 {
        let at = |k: isize| if k < 0 { initial } else { field[k as usize] };
        let k = n as isize - whole as isize;
        if frac == 0.0 {
            at(k)
        } else {
            at(k) * (1.0 - frac) + at(k - 1) * frac
        }
    };

    let mut trace = TimeTrace {
        dt,
        transmitted: Vec::with_capacity(samples),
        reflected: Vec::with_capacity(samples),
        control_mask: Vec::with_capacity(samples),
        ring_up_time: ring_up_time(finesse(cavity)?, cavity.round_trip_length)?,
    };
    for n in 0..samples {
        let envelope = pulses.envelope(n as f64 * dt);
        let (phase, survival) = response.at(envelope);
        let returned = gain(survival) * Complex64::cis(phase) * delayed(&field, n);
        let circulating = t1 + r1 * returned;
        field.push(circulating);
        trace.transmitted.push(t2_sq * survival * circulating.norm_sqr());
        trace.reflected.push((t1 * returned - r1).norm_sqr());
        trace.control_mask.push(envelope >= 0.5);
    }
    Ok(trace)
}

/// Mean 10–90% rise time over all off→on transitions.
///
/// For each transition the port whose level rises is used. The swing runs
/// from the lowest sample of the preceding off window to the highest sample
/// of the on window, so the opposite control edge at either end does not
/// distort the reference levels.
pub fn rise_time(trace: &TimeTrace) -> Result<f64> {
    let all = runs(&trace.control_mask);
    let mut total = 0.0;
    let mut count = 0usize;
    let mut transitions = 0usize;
    for pair in all.windows(2) {
        let [(false, off_start, off_end), (true, on_start, on_end)] = *pair else {
            continue;
        };
        transitions += 1;
        let off = off_start..off_end;
        let on = on_start..on_end;
        let t_gain = late_mean(&trace.transmitted, &on) - late_mean(&trace.transmitted, &off);
        let r_gain = late_mean(&trace.reflected, &on) - late_mean(&trace.reflected, &off);
        let ys = if t_gain >= r_gain {
            &trace.transmitted
        } else {
            &trace.reflected
        };
        let (from, y0) = extremum(ys, off, |a, b| a < b);
        let (to, y1) = extremum(ys, on, |a, b| a > b);
        if y1 <= y0 {
            continue;
        }
        // Ringing after the previous falling edge can cross the low level, so
        // take the last low crossing before the first high one.
        let Some(hi) = crossing(ys, from, to + 1, y0 + 0.9 * (y1 - y0)).first().copied() else {
            continue;
        };
        if let Some(lo) = crossing(ys, from, hi.ceil() as usize + 1, y0 + 0.1 * (y1 - y0))
            .last()
            .copied()
        {
            total += (hi - lo) * trace.dt;
            count += 1;
        }
    }
    if transitions == 0 {
        return Err(Error::Precondition("trace has no off→on transition".into()));
    }
    if count == 0 {
        return Err(Error::Undefined("no transition produced a rising port".into()));
    }
    Ok(total / count as f64)
}

/// Mean over the second half of `range`.
fn late_mean(ys: &[f64], range: &Range<usize>) -> f64 {
    let half = &ys[range.start + range.len() / 2..range.end];
    half.iter().sum::<f64>() / half.len() as f64
}

/// First index in `range` whose value beats all others under `better`.
fn extremum(ys: &[f64], range: Range<usize>, better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (range.start, ys[range.start]);
    for i in range {
        if better(ys[i], best.1) {
            best = (i, ys[i]);
        }
    }
    best
}

/// Fractional sample indices where `ys` rises through `level` in `[from, to)`.
fn crossing(ys: &[f64], from: usize, to: usize, level: f64) -> Vec<f64> {
    (from + 1..to.min(ys.len()))
        .filter_map(|k| {
            let (a, b) = (ys[k - 1], ys[k]);
            (a < level && b >= level).then(|| (k - 1) as f64 + (level - a) / (b - a))
        })
        .collect()
}

/// Eye-diagram figures of merit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchMetrics {
    pub contrast: f64,
    pub extinction_db: f64,
    pub insertion_loss_db: f64,
    pub intracavity_loss: f64,
    pub rise_time_s: Option<f64>,
    pub t_on: f64,
    pub t_off: f64,
    pub r_on: f64,
}

impl SwitchMetrics {
    /// Metrics from mean port levels.
    pub fn from_levels(t_on: f64, t_off: f64, r_on: f64, rise_time_s: Option<f64>) -> Result<Self> {
        let sum = t_on + t_off;
        if sum == 0.0 {
            return Err(Error::Undefined("contrast undefined: T_on + T_off = 0".into()));
        }
        Ok(Self {
            contrast: (t_on - t_off) / sum,
            extinction_db: 10.0 * (t_on / t_off).log10(),
            insertion_loss_db: -10.0 * t_on.log10(),
            intracavity_loss: 1.0 - (t_on + r_on),
            rise_time_s,
            t_on,
            t_off,
            r_on,
        })
    }
}

/// Default transient guard: three ring-up times, but never more than a tenth
/// of the shortest window so short pulses keep a settled core.
pub fn default_guard(trace: &TimeTrace) -> f64 {
    let shortest = runs(&trace.control_mask)
        .into_iter()
        .map(|(_, start, end)| end - start)
        .min()
        .unwrap_or(0);
    (3.0 * trace.ring_up_time).min(0.1 * shortest as f64 * trace.dt)
}

pub fn window_metrics(trace: &TimeTrace) -> Result<SwitchMetrics> {
    window_metrics_with_guard(trace, default_guard(trace))
}

/// Pools samples of every on and off window, skipping the first `guard`
/// seconds after each transition.
pub fn window_metrics_with_guard(trace: &TimeTrace, guard: f64) -> Result<SwitchMetrics> {
    let skip = (guard / trace.dt).ceil() as usize;
    let mut on = (0.0, 0.0, 0usize);
    let mut off = (0.0, 0usize);
    for (state, start, end) in runs(&trace.control_mask) {
        let first = if start == 0 { 0 } else { start + skip };
        for i in first..end {
            if state {
                on.0 += trace.transmitted[i];
                on.1 += trace.reflected[i];
                on.2 += 1;
            } else {
                off.0 += trace.transmitted[i];
                off.1 += 1;
            }
        }
    }
    if on.2 == 0 || off.1 == 0 {
        return Err(Error::Precondition(
            "trace needs at least one settled on window and one settled off window".into(),
        ));
    }
    let n_on = on.2 as f64;
    SwitchMetrics::from_levels(on.0 / n_on, off.0 / off.1 as f64, on.1 / n_on, rise_time(trace).ok())
}

/// Maximal runs `(state, start, end)` of the mask.
fn runs(mask: &[bool]) -> Vec<(bool, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=mask.len() {
        if i == mask.len() || mask[i] != mask[start] {
            out.push((mask[start], start, i));
            start = i;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_half_maximum_spacing_matches_on_duration() {
        let p = ControlPulseTrain {
            pulse_duration: Some(42e-9),
            edge_time: 4e-9,
            ..ControlPulseTrain::default().with_rate(12e6)
        };
        p.validate().unwrap();
        let period = p.period();
        assert_eq!(p.envelope(0.0), 0.0);
        let rise = period - 42e-9;
        assert!((p.envelope(rise) - 0.5).abs() < 1e-9);
        assert!((p.envelope(period) - 0.5).abs() < 1e-9);
        assert_eq!(p.envelope(rise + 20e-9), 1.0);
        assert!((p.envelope(period + 1e-9) - (0.5 - 1e-9 / 5e-9)).abs() < 1e-9);
    }

    #[test]
    fn runs_split_the_mask() {
        let mask = [false, false, true, true, false, true];
        assert_eq!(
            runs(&mask),
            vec![(false, 0, 2), (true, 2, 4), (false, 4, 5), (true, 5, 6)]
        );
    }

    #[test]
    fn pulse_validation_names_keys() {
        match ControlPulseTrain::new(2e6, 1.0) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "pulses.duty"),
            other => panic!("{other:?}"),
        }
        match ControlPulseTrain::new(-1.0, 0.5) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "pulses.modulation_rates_hz"),
            other => panic!("{other:?}"),
        }
    }
}
