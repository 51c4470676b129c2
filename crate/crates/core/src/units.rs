//! Physical constants and unit conversions.
//!
//! Detunings cross every external boundary (config files, CSV columns, CLI
//! flags) as ordinary frequencies in GHz. Internally every detuning, rate and
//! Rabi frequency is an angular frequency in rad/s. The factor 2π is applied
//! here and nowhere else.

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant (J/K).
pub const KB: f64 = 1.380_649e-23;
/// One torr in pascal.
pub const TORR: f64 = 101_325.0 / 760.0;

/// Ordinary frequency in GHz to angular frequency in rad/s.
#[inline]
pub fn ghz_to_rad_s(ghz: f64) -> f64 {
    2.0 * PI * 1e9 * ghz
}

/// Angular frequency in rad/s to ordinary frequency in GHz.
#[inline]
pub fn rad_s_to_ghz(rad_s: f64) -> f64 {
    rad_s / (2.0 * PI * 1e9)
}

/// Ordinary frequency in MHz to angular frequency in rad/s.
#[inline]
pub fn mhz_to_rad_s(mhz: f64) -> f64 {
    2.0 * PI * 1e6 * mhz
}

/// Wrap an angle to (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = phi.rem_euclid(two_pi);
    if w > PI {
        w -= two_pi;
    }
    w
}
