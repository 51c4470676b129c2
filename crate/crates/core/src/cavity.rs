//! Two-port ring cavity in steady state.
//!
//! The signal enters through beamsplitter 1, circulates past beamsplitter 2
//! (transmitted port) and the vapor cell, and the remainder leaves beamsplitter 1
//! again (reflected port). All beamsplitter coefficients are field amplitudes;
//! `eta` is the round-trip intensity survival excluding the beamsplitters.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{wrap_phase, C};

/// How survival enters the transmitted-port formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormulaMode {
    /// `t₁²t₂²η / (1 + r₁²r₂²η − 2r₁r₂η·cos φ)`, survival on both terms.
    Airy,
    /// `t₁²t₂²η / |1 − r₁r₂√η·e^{iφ}|²`, from a single amplitude round trip.
    #[default]
    SelfConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingCavity {
    pub r1: f64,
    pub r2: f64,
    pub t1: f64,
    pub t2: f64,
    pub eta: f64,
    /// m
    pub round_trip_length: f64,
    /// Piezo offset φ₀ (rad), used by [`BiasPolicy::Fixed`].
    pub bias_phase: f64,
}

impl RingCavity {
    pub fn new(r1: f64, r2: f64, t1: f64, t2: f64, eta: f64, round_trip_length: f64, bias_phase: f64) -> Result<Self> {
        let c = Self {
            r1,
            r2,
            t1,
            t2,
            eta,
            round_trip_length,
            bias_phase,
        };
        c.validate()?;
        Ok(c)
    }

    /// Build from intensity coefficients `r_i²`, `t_i²`.
    pub fn from_power_coefficients(
        r1_sq: f64,
        r2_sq: f64,
        t1_sq: f64,
        t2_sq: f64,
        eta: f64,
        round_trip_length: f64,
        bias_phase: f64,
    ) -> Result<Self> {
        for (key, v) in [
            ("cavity.r1_sq", r1_sq),
            ("cavity.r2_sq", r2_sq),
            ("cavity.t1_sq", t1_sq),
            ("cavity.t2_sq", t2_sq),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1] (got {v})")));
            }
        }
        Self::new(
            r1_sq.sqrt(),
            r2_sq.sqrt(),
            t1_sq.sqrt(),
            t2_sq.sqrt(),
            eta,
            round_trip_length,
            bias_phase,
        )
    }

    /// Lossless symmetric beamsplitters with reflectivity `r_sq`.
    pub fn symmetric(r_sq: f64, eta: f64, round_trip_length: f64) -> Result<Self> {
        Self::from_power_coefficients(r_sq, r_sq, 1.0 - r_sq, 1.0 - r_sq, eta, round_trip_length, 0.0)
    }

    /// Lossless symmetric cavity (η = 1) whose finesse equals `target`.
    pub fn symmetric_for_finesse(target: f64, round_trip_length: f64) -> Result<Self> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::Domain(format!("finesse must be > 0 (got {target})")));
        }
        // π√a/(1 − a) = F is a quadratic in s = √a: F s² + π s − F = 0.
        let s = (-PI + (PI * PI + 4.0 * target * target).sqrt()) / (2.0 * target);
        let a = s * s;
        Self::symmetric(a, 1.0, round_trip_length)
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("cavity.r1_sq", "cavity.t1_sq", self.r1, self.t1),
            ("cavity.r2_sq", "cavity.t2_sq", self.r2, self.t2),
        ];
        for (rk, tk, r, t) in pairs {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(rk, format!("amplitude must lie in [0, 1] (got {r})")));
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config(tk, format!("amplitude must lie in [0, 1] (got {t})")));
            }
            let sum = r * r + t * t;
            if sum > 1.0 + 1e-12 {
                return Err(Error::config(rk, format!("r² + t² must be <= 1 (got {sum})")));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(
                "cavity.eta",
                format!("must lie in (0, 1] (got {})", self.eta),
            ));
        }
        if !(self.round_trip_length > 0.0 && self.round_trip_length.is_finite()) {
            return Err(Error::config(
                "cavity.round_trip_length_m",
                format!("must be > 0 (got {})", self.round_trip_length),
            ));
        }
        if !self.bias_phase.is_finite() {
            return Err(Error::config("cavity.bias_phase_rad", "must be finite"));
        }
        Ok(())
    }

    /// Same cavity with a different round-trip survival. Used to fold the
    /// single-pass atomic transmission into `eta`.
    pub fn with_survival(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Amplitude round-trip factor `a = r₁r₂√η`.
    pub fn round_trip_amplitude(&self) -> f64 {
        self.r1 * self.r2 * self.eta.sqrt()
    }

    /// Amplitude gain from beamsplitter 1 back to beamsplitter 1, excluding `r₁`.
    pub(crate) fn return_gain(&self) -> f64 {
        self.r2 * self.eta.sqrt()
    }

    pub fn round_trip_time(&self) -> f64 {
        self.round_trip_length / C
    }

    pub fn free_spectral_range(&self) -> f64 {
        C / self.round_trip_length
    }

    pub fn is_lossless(&self) -> bool {
        self.eta == 1.0
            && (self.r1 * self.r1 + self.t1 * self.t1 - 1.0).abs() < 1e-12
            && (self.r2 * self.r2 + self.t2 * self.t2 - 1.0).abs() < 1e-12
    }
}

impl Default for RingCavity {
    fn default() -> Self {
        Self::symmetric(0.8, 0.83, 0.3331).expect("default cavity is valid")
    }
}

/// Transmitted-port intensity. `capped` is set when the raw value had to be
/// clipped into `[0, 1]` (near-unity round-trip factor on resonance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub value: f64,
    pub capped: bool,
}

pub fn transmission(phi: f64, cavity: &RingCavity, mode: FormulaMode) -> Transmission {
    let RingCavity {
        r1, r2, t1, t2, eta, ..
    } = *cavity;
    let numerator = t1 * t1 * t2 * t2 * eta;
    let denominator = match mode {
        // 1 + x²η − 2xη·cos φ with x = r1·r2, regrouped so nothing cancels near φ = 0.
        FormulaMode::Airy => {
            let x = r1 * r2;
            (1.0 - x).powi(2) + (eta - 1.0) * x * (x - 2.0) + 4.0 * x * eta * (0.5 * phi).sin().powi(2)
        }
        FormulaMode::SelfConsistent => round_trip_denominator(phi, cavity),
    };
    let raw = numerator / denominator;
    if raw.is_finite() && (0.0..=1.0).contains(&raw) {
        return Transmission {
            value: raw,
            capped: false,
        };
    }
    log::warn!("transmission {raw} at phase {phi} outside [0, 1] (denominator {denominator:e}); capped");
    Transmission {
        value: if raw.is_nan() || raw < 0.0 { 0.0 } else { 1.0 },
        capped: true,
    }
}

fn round_trip_denominator(phi: f64, cavity: &RingCavity) -> f64 {
    // |1 − a·e^{iφ}|² = (1 − a)² + 4a·sin²(φ/2)
    let a = cavity.round_trip_amplitude();
    (1.0 - a).powi(2) + 4.0 * a * (0.5 * phi).sin().powi(2)
}

/// Reflected-port intensity from the self-consistent field model.
pub fn reflection(phi: f64, cavity: &RingCavity) -> f64 {
    let RingCavity { r1, t1, .. } = *cavity;
    let e = Complex64::cis(phi);
    let g = cavity.return_gain();
    let num = (r1 - (r1 * r1 + t1 * t1) * g * e).norm_sqr();
    num / round_trip_denominator(phi, cavity)
}

/// `𝓕 = π√a / (1 − a)`.
pub fn finesse(cavity: &RingCavity) -> Result<f64> {
    let a = cavity.round_trip_amplitude();
    if a >= 1.0 {
        return Err(Error::Domain(format!(
            "round-trip factor {a} >= 1 has no finite finesse"
        )));
    }
    Ok(PI * a.sqrt() / (1.0 - a))
}

/// Field ring-up time `𝓕·L/c`.
pub fn ring_up_time(finesse: f64, round_trip_length: f64) -> Result<f64> {
    if !(finesse > 0.0 && round_trip_length > 0.0) {
        return Err(Error::Domain(format!(
            "ring-up time needs positive finesse and length (got {finesse}, {round_trip_length})"
        )));
    }
    Ok(finesse * round_trip_length / C)
}

/// Linewidth `FSR/𝓕` in Hz.
pub fn bandwidth(cavity: &RingCavity) -> Result<f64> {
    bandwidth_for(finesse(cavity)?, cavity.round_trip_length)
}

pub fn bandwidth_for(finesse: f64, round_trip_length: f64) -> Result<f64> {
    if !(finesse > 0.0 && round_trip_length > 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth needs positive finesse and length (got {finesse}, {round_trip_length})"
        )));
    }
    Ok(C / round_trip_length / finesse)
}

/// Where the cavity resonance sits relative to the two control states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BiasPolicy {
    /// Re-bias per detuning so the control-on state is resonant: the switch
    /// passes the signal while the control is on.
    #[default]
    ControlOnResonant,
    /// Re-bias per detuning so the control-off state is resonant.
    ControlOffResonant,
    /// Keep the configured `bias_phase`.
    Fixed,
}

impl BiasPolicy {
    /// Total round-trip phases `(off, on)` seen by the cavity, reduced to
    /// `(−π, π]` where a fixed bias is involved.
    pub fn cavity_phases(self, phase_off: f64, phase_shift: f64, bias_phase: f64) -> (f64, f64) {
        match self {
            BiasPolicy::ControlOnResonant => (-phase_shift, 0.0),
            BiasPolicy::ControlOffResonant => (0.0, phase_shift),
            BiasPolicy::Fixed => {
                let off = wrap_phase(wrap_phase(phase_off) + bias_phase);
                (off, wrap_phase(off + phase_shift))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finesse_inverse_round_trips() {
        let c = RingCavity::symmetric_for_finesse(18.0, 0.3331).unwrap();
        assert!((finesse(&c).unwrap() - 18.0).abs() < 1e-12);
        assert!(c.is_lossless());
    }

    #[test]
    fn validation_names_the_key() {
        match RingCavity::from_power_coefficients(0.8, 0.8, 0.3, 0.2, 1.0, 0.3, 0.0) {
            Err(Error::Config { key, message }) => {
                assert_eq!(key, "cavity.r1_sq");
                assert!(message.contains("<= 1"));
            }
            other => panic!("{other:?}"),
        }
        match RingCavity::symmetric(0.8, 0.0, 0.3) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "cavity.eta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unit_round_trip_factor_caps_instead_of_blowing_up() {
        let c = RingCavity::symmetric(1.0, 1.0, 0.3).unwrap();
        let t = transmission(0.0, &c, FormulaMode::SelfConsistent);
        assert!(t.capped);
        assert!((0.0..=1.0).contains(&t.value));
        assert!(matches!(finesse(&c), Err(Error::Domain(_))));
    }

    #[test]
    fn bias_policies_place_the_resonance() {
        assert_eq!(BiasPolicy::ControlOnResonant.cavity_phases(5.0, 2.0, 0.0), (-2.0, 0.0));
        assert_eq!(BiasPolicy::ControlOffResonant.cavity_phases(5.0, 2.0, 0.0), (0.0, 2.0));
        let (off, on) = BiasPolicy::Fixed.cavity_phases(4.0 * PI, 0.5, 0.25);
        assert!((off - 0.25).abs() < 1e-12 && (on - 0.75).abs() < 1e-12);
    }
}
