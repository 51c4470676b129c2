//! Weak-signal response of the warm-vapor 5S₁/₂ → 5P₃/₂ → 5D₅/₂ ladder.
//!
//! The signal field probes the lower transition; a strong control field
//! dresses the upper one. Each level is collapsed to a single effective
//! transition and the control Rabi frequency is taken uniform along the
//! cell at its focal value.
//!
//! Sign convention: fields vary as `exp(i(kz − ωt))`, so a passive medium has
//! `Im χ ≥ 0`, `Im n ≥ 0`, and the intensity absorption coefficient is
//! `α = 2κ·Im n ≥ 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::AtomConstants;
use crate::doppler::{DopplerIntegrator, DopplerSettings, LadderLine};
use crate::error::{Error, Result};
use crate::units::{wrap_phase, C, EPS0, HBAR, KB, TORR};

/// Validity window of the liquid-phase vapor-pressure correlation (K).
pub const TEMPERATURE_RANGE_K: (f64, f64) = (273.0, 500.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaporPressure {
    pub coeffs: [f64; 4],
}

impl VaporPressure {
    pub fn new(coeffs: [f64; 4]) -> Self {
        Self { coeffs }
    }

    /// Saturated vapor pressure (Pa).
    pub fn pressure(&self, temperature: f64) -> Result<f64> {
        check_temperature(temperature)?;
        let [a, b, c, d] = self.coeffs;
        let t = temperature;
        let log10_torr = a + b / t + c * t + d * t.log10();
        Ok(10f64.powf(log10_torr) * TORR)
    }

    /// Number density from the ideal-gas law (m⁻³).
    pub fn density(&self, temperature: f64) -> Result<f64> {
        Ok(self.pressure(temperature)? / (KB * temperature))
    }
}

fn check_temperature(t: f64) -> Result<()> {
    let (lo, hi) = TEMPERATURE_RANGE_K;
    if !(t > lo && t < hi) {
        return Err(Error::Domain(format!(
            "temperature {t} K outside the vapor-pressure model window ({lo} K, {hi} K)"
        )));
    }
    Ok(())
}

/// Rb number density at `temperature` (K) from the default constants table.
pub fn vapor_density(temperature: f64) -> Result<f64> {
    LadderAtom::rb87().vapor_pressure.density(temperature)
}

/// Three-level ladder: wavelengths (m), population decay rates (rad/s),
/// dipole moments (C·m), atomic mass (kg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderAtom {
    pub lambda_s: f64,
    pub lambda_c: f64,
    pub gamma_e: f64,
    pub gamma_d: f64,
    pub dipole_ge: f64,
    pub dipole_ed: f64,
    pub mass: f64,
    pub vapor_pressure: VaporPressure,
}

impl LadderAtom {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda_s: f64,
        lambda_c: f64,
        gamma_e: f64,
        gamma_d: f64,
        dipole_ge: f64,
        dipole_ed: f64,
        mass: f64,
        vapor_pressure: VaporPressure,
    ) -> Result<Self> {
        let positive = [
            ("atom.lambda_s_m", lambda_s),
            ("atom.lambda_c_m", lambda_c),
            ("atom.gamma_e_rad_s", gamma_e),
            ("atom.gamma_d_rad_s", gamma_d),
            ("atom.dipole_ge_Cm", dipole_ge),
            ("atom.dipole_ed_Cm", dipole_ed),
            ("atom.mass_kg", mass),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be > 0 (got {v})")));
            }
        }
        if lambda_c >= lambda_s {
            return Err(Error::config(
                "atom.lambda_c_m",
                format!("must be < lambda_s_m = {lambda_s} (got {lambda_c})"),
            ));
        }
        Ok(Self {
            lambda_s,
            lambda_c,
            gamma_e,
            gamma_d,
            dipole_ge,
            dipole_ed,
            mass,
            vapor_pressure,
        })
    }

    pub fn rb87() -> Self {
        AtomConstants::rb87()
            .to_atom()
            .expect("embedded constants satisfy the atom invariants")
    }

    /// Signal wave number κ = 2π/λ_s.
    pub fn k_s(&self) -> f64 {
        2.0 * PI / self.lambda_s
    }

    pub fn k_c(&self) -> f64 {
        2.0 * PI / self.lambda_c
    }

    /// Most probable speed √(2k_BT/m).
    pub fn thermal_speed(&self, temperature: f64) -> f64 {
        (2.0 * KB * temperature / self.mass).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaporCell {
    /// Optical path through the vapor (m).
    pub length: f64,
    /// K
    pub temperature: f64,
    /// Extra homogeneous dephasing added to both coherences (rad/s).
    pub extra_dephasing: f64,
}

impl VaporCell {
    pub fn new(length: f64, temperature: f64, extra_dephasing: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::config("cell.length_m", format!("must be > 0 (got {length})")));
        }
        let (lo, hi) = TEMPERATURE_RANGE_K;
        if !(temperature > lo && temperature < hi) {
            return Err(Error::config(
                "cell.temperature_k",
                format!("must lie in ({lo}, {hi}) (got {temperature})"),
            ));
        }
        if !(extra_dephasing >= 0.0 && extra_dephasing.is_finite()) {
            return Err(Error::config(
                "cell.extra_dephasing_rad_s",
                format!("must be >= 0 (got {extra_dephasing})"),
            ));
        }
        Ok(Self {
            length,
            temperature,
            extra_dephasing,
        })
    }
}

impl Default for VaporCell {
    fn default() -> Self {
        Self {
            length: 0.05,
            temperature: 332.0,
            extra_dephasing: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    #[serde(rename = "co")]
    CoPropagating,
    #[default]
    #[serde(rename = "counter")]
    CounterPropagating,
}

/// Signal and control settings. Detunings in rad/s, power is the
/// intra-cavity control power (W), waist is the 1/e² intensity radius (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub delta_s: f64,
    pub delta_c: f64,
    pub control_power: f64,
    pub beam_waist: f64,
    pub geometry: Geometry,
}

impl FieldConfig {
    pub fn new(delta_s: f64, delta_c: f64, control_power: f64, beam_waist: f64, geometry: Geometry) -> Result<Self> {
        let f = Self {
            delta_s,
            delta_c,
            control_power,
            beam_waist,
            geometry,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.control_power >= 0.0 && self.control_power.is_finite()) {
            return Err(Error::config(
                "field.control_power_w",
                format!("must be >= 0 (got {})", self.control_power),
            ));
        }
        if !(self.beam_waist > 0.0 && self.beam_waist.is_finite()) {
            return Err(Error::config(
                "field.beam_waist_m",
                format!("must be > 0 (got {})", self.beam_waist),
            ));
        }
        if !(self.delta_s.is_finite() && self.delta_c.is_finite()) {
            return Err(Error::config("field.delta_s_ghz", "detunings must be finite"));
        }
        Ok(())
    }

    pub fn with_control_power(mut self, power: f64) -> Self {
        self.control_power = power;
        self
    }

    pub fn with_detunings(mut self, delta_s: f64, delta_c: f64) -> Self {
        self.delta_s = delta_s;
        self.delta_c = delta_c;
        self
    }

    pub fn control_off(self) -> Self {
        self.with_control_power(0.0)
    }
}

/// Peak Rabi frequency (rad/s) of a Gaussian control beam of total power
/// `power` (W) and 1/e² waist `waist` (m) on a transition with dipole
/// `dipole` (C·m).
pub fn rabi_frequency(power: f64, waist: f64, dipole: f64) -> Result<f64> {
    if !(waist > 0.0) {
        return Err(Error::Domain(format!("beam waist must be > 0 (got {waist})")));
    }
    if !(power >= 0.0) {
        return Err(Error::Domain(format!("control power must be >= 0 (got {power})")));
    }
    let peak_intensity = 2.0 * power / (PI * waist * waist);
    let field = (2.0 * peak_intensity / (C * EPS0)).sqrt();
    Ok(dipole * field / HBAR)
}

fn coupling_strength(atom: &LadderAtom, density: f64) -> f64 {
    density * atom.dipole_ge * atom.dipole_ge / (HBAR * EPS0)
}

/// Susceptibility of atoms at rest. Reduces to the two-level Lorentzian
/// when `omega_c` is zero.
pub fn susceptibility_stationary(
    delta_s: f64,
    delta_c: f64,
    omega_c: f64,
    atom: &LadderAtom,
    density: f64,
    cell: &VaporCell,
) -> Complex64 {
    ladder_line(
        atom,
        cell,
        density,
        delta_s,
        delta_c,
        omega_c,
        Geometry::CounterPropagating,
    )
    .at_velocity(0.0)
}

fn ladder_line(
    atom: &LadderAtom,
    cell: &VaporCell,
    density: f64,
    delta_s: f64,
    delta_c: f64,
    omega_c: f64,
    geometry: Geometry,
) -> LadderLine {
    let q = match geometry {
        Geometry::CounterPropagating => atom.k_s() - atom.k_c(),
        Geometry::CoPropagating => atom.k_s() + atom.k_c(),
    };
    LadderLine {
        strength: coupling_strength(atom, density),
        gamma_ge: atom.gamma_e / 2.0 + cell.extra_dephasing,
        gamma_gd: atom.gamma_d / 2.0 + cell.extra_dephasing,
        delta_s,
        delta_c,
        dressing: omega_c * omega_c / 4.0,
        k_s: atom.k_s(),
        q,
    }
}

/// Doppler-averaged susceptibility for one field configuration.
pub fn susceptibility_doppler(
    config: &FieldConfig,
    atom: &LadderAtom,
    cell: &VaporCell,
    settings: DopplerSettings,
) -> Result<Complex64> {
    AtomicMedium::new(*atom, *cell, settings)?.susceptibility(config)
}

/// Complex optical response of the cell for one field configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpticalResponse {
    pub chi: Complex64,
    pub n: Complex64,
    /// Intensity absorption coefficient (1/m).
    pub alpha: f64,
    /// Round-trip phase `κ[(Re n − 1)L_v + L_c]` (rad).
    pub phase: f64,
    /// Control-induced phase, set only by [`AtomicMedium::phase_shift_response`].
    pub phase_shift: Option<f64>,
    pub transmission_single_pass: f64,
}

/// Atom, cell and velocity averager bundled for repeated evaluation.
#[derive(Debug, Clone)]
pub struct AtomicMedium {
    atom: LadderAtom,
    cell: VaporCell,
    density: f64,
    doppler: DopplerIntegrator,
}

impl AtomicMedium {
    pub fn new(atom: LadderAtom, cell: VaporCell, settings: DopplerSettings) -> Result<Self> {
        let density = atom.vapor_pressure.density(cell.temperature)?;
        Self::with_density(atom, cell, density, settings)
    }

    /// Medium with an explicit number density instead of the vapor-pressure value.
    pub fn with_density(atom: LadderAtom, cell: VaporCell, density: f64, settings: DopplerSettings) -> Result<Self> {
        if !(density >= 0.0 && density.is_finite()) {
            return Err(Error::Domain(format!("number density must be >= 0 (got {density})")));
        }
        Ok(Self {
            atom,
            cell,
            density,
            doppler: DopplerIntegrator::new(settings)?,
        })
    }

    pub fn atom(&self) -> &LadderAtom {
        &self.atom
    }

    pub fn cell(&self) -> &VaporCell {
        &self.cell
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn doppler_settings(&self) -> DopplerSettings {
        self.doppler.settings()
    }

    pub fn control_rabi(&self, field: &FieldConfig) -> Result<f64> {
        rabi_frequency(field.control_power, field.beam_waist, self.atom.dipole_ed)
    }

    pub fn susceptibility(&self, field: &FieldConfig) -> Result<Complex64> {
        let omega = self.control_rabi(field)?;
        let line = ladder_line(
            &self.atom,
            &self.cell,
            self.density,
            field.delta_s,
            field.delta_c,
            omega,
            field.geometry,
        );
        let u = self.atom.thermal_speed(self.cell.temperature);
        Ok(self.doppler.average(&line, u))
    }

    pub fn response(&self, field: &FieldConfig, round_trip_length: f64) -> Result<OpticalResponse> {
        let chi = self.susceptibility(field)?;
        Ok(self.response_from_chi(chi, round_trip_length))
    }

    fn response_from_chi(&self, chi: Complex64, round_trip_length: f64) -> OpticalResponse {
        let kappa = self.atom.k_s();
        let n = (Complex64::new(1.0, 0.0) + chi).sqrt();
        let alpha = 2.0 * kappa * n.im;
        OpticalResponse {
            chi,
            n,
            alpha,
            phase: kappa * ((n.re - 1.0) * self.cell.length + round_trip_length),
            phase_shift: None,
            transmission_single_pass: (-alpha * self.cell.length).exp(),
        }
    }

    /// Δφ = φ(on) − φ(off). `off` must equal `on` except for zero control power.
    pub fn phase_shift(&self, on: &FieldConfig, off: &FieldConfig, round_trip_length: f64, wrap: bool) -> Result<f64> {
        Ok(self
            .phase_shift_response(on, off, round_trip_length, wrap)?
            .phase_shift
            .expect("set by phase_shift_response"))
    }

    /// Control-on response with `phase_shift` populated.
    pub fn phase_shift_response(
        &self,
        on: &FieldConfig,
        off: &FieldConfig,
        round_trip_length: f64,
        wrap: bool,
    ) -> Result<OpticalResponse> {
        if off.control_power != 0.0 {
            return Err(Error::Precondition(format!(
                "control-off configuration has control power {} W",
                off.control_power
            )));
        }
        if on.with_control_power(0.0) != *off {
            return Err(Error::Precondition(
                "on/off configurations differ in more than the control power".into(),
            ));
        }
        let r_on = self.response(on, round_trip_length)?;
        let r_off = self.response(off, round_trip_length)?;
        // Phases share the κ·L_c offset; difference the index directly.
        let raw = self.atom.k_s() * self.cell.length * (r_on.n.re - r_off.n.re);
        Ok(OpticalResponse {
            phase_shift: Some(if wrap { wrap_phase(raw) } else { raw }),
            ..r_on
        })
    }
}

/// Free-function form of [`AtomicMedium::response`].
pub fn optical_response(
    config: &FieldConfig,
    atom: &LadderAtom,
    cell: &VaporCell,
    settings: DopplerSettings,
    round_trip_length: f64,
) -> Result<OpticalResponse> {
    AtomicMedium::new(*atom, *cell, settings)?.response(config, round_trip_length)
}

/// Free-function form of [`AtomicMedium::phase_shift`] (raw, unwrapped).
pub fn phase_shift(
    config_on: &FieldConfig,
    config_off: &FieldConfig,
    atom: &LadderAtom,
    cell: &VaporCell,
    settings: DopplerSettings,
    round_trip_length: f64,
) -> Result<f64> {
    AtomicMedium::new(*atom, *cell, settings)?.phase_shift(config_on, config_off, round_trip_length, false)
}
