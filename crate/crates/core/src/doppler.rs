//! Maxwell–Boltzmann velocity averaging.
//!
//! Two schemes are provided:
//!
//! * [`DopplerScheme::PoleExpansion`] (default) writes the velocity-resolved
//!   ladder susceptibility as a sum of simple poles in the velocity and
//!   averages each pole exactly against the Gaussian using the Faddeeva
//!   function. The Faddeeva function is evaluated with Weideman's rational
//!   expansion whose order is the `nodes` setting.
//! * [`DopplerScheme::GaussHermite`] applies `nodes`-point Gauss–Hermite
//!   quadrature directly to the velocity integrand. It is accurate far from
//!   the one-photon resonance but cannot resolve the natural-linewidth
//!   Lorentzian (≈1% of the Doppler width at room temperature) near it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest node count accepted by either scheme.
pub const MIN_NODES: usize = 8;

/// Default node count.
pub const DEFAULT_NODES: usize = 64;

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DopplerScheme {
    #[default]
    PoleExpansion,
    GaussHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DopplerSettings {
    pub scheme: DopplerScheme,
    pub nodes: usize,
}

impl Default for DopplerSettings {
    fn default() -> Self {
        Self {
            scheme: DopplerScheme::PoleExpansion,
            nodes: DEFAULT_NODES,
        }
    }
}

impl DopplerSettings {
    pub fn new(scheme: DopplerScheme, nodes: usize) -> Self {
        Self { scheme, nodes }
    }
}

/// Faddeeva function `w(z) = exp(−z²) erfc(−iz)` by Weideman's N-term
/// rational expansion, accurate to ~1e-15 in the closed upper half plane
/// for N ≥ 40.
#[derive(Debug, Clone)]
pub struct Faddeeva {
    coeffs: Vec<f64>,
    l: f64,
}

impl Faddeeva {
    pub fn new(order: usize) -> Self {
        let n = order.max(1);
        let m = 2 * n;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        // Samples of f(t) = exp(-t²)(L² + t²) at t = L tan(θ/2), θ_k = kπ/M.
        let samples: Vec<(f64, f64)> = (-(m as i64) + 1..m as i64)
            .map(|k| {
                let theta = k as f64 * PI / m as f64;
                let t = l * (theta / 2.0).tan();
                (theta, (-t * t).exp() * (l * l + t * t))
            })
            .collect();
        let coeffs = (1..=n)
            .map(|j| {
                samples
                    .iter()
                    .map(|&(theta, f)| f * (j as f64 * theta).cos())
                    .sum::<f64>()
                    / (2 * m) as f64
            })
            .collect();
        Self { coeffs, l }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// w(z). Lower-half-plane arguments use `w(z) = 2exp(−z²) − w(−z)`,
    /// which overflows for large |Im z|; the averaging code never needs it.
    pub fn w(&self, z: Complex64) -> Complex64 {
        if z.im < 0.0 {
            return 2.0 * (-z * z).exp() - self.w_upper(-z);
        }
        self.w_upper(z)
    }

    fn w_upper(&self, z: Complex64) -> Complex64 {
        let i = Complex64::i();
        let lz = self.l - i * z;
        let big_z = (self.l + i * z) / lz;
        let p = self
            .coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * big_z + a);
        2.0 * p / (lz * lz) + 1.0 / (SQRT_PI * lz)
    }

    /// w'(z) = −2z·w(z) + 2i/√π.
    pub fn w_prime(&self, z: Complex64) -> Complex64 {
        -2.0 * z * self.w(z) + Complex64::new(0.0, 2.0 / SQRT_PI)
    }
}

/// Gauss–Hermite nodes and weights for the weight function exp(−x²).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Velocity-dependent ladder susceptibility
/// `χ(v) = iC / (γ₁ − iΔ_s(v) + W / (γ₂ − i(Δ_s(v) + Δ_c(v))))`
/// with `Δ_s(v) = Δ_s − k_s v` and `Δ_s(v) + Δ_c(v) = Δ_s + Δ_c − q v`.
/// `q` is `k_s − k_c` for counter-propagating beams and `k_s + k_c` for
/// co-propagating beams.
#[derive(Debug, Clone, Copy)]
pub struct LadderLine {
    pub strength: f64,
    pub gamma_ge: f64,
    pub gamma_gd: f64,
    pub delta_s: f64,
    pub delta_c: f64,
    /// Ω_c² / 4.
    pub dressing: f64,
    pub k_s: f64,
    pub q: f64,
}

impl LadderLine {
    pub fn at_velocity(&self, v: f64) -> Complex64 {
        let i = Complex64::i();
        let d1 = self.gamma_ge - i * (self.delta_s - self.k_s * v);
        let d2 = self.gamma_gd - i * (self.delta_s + self.delta_c - self.q * v);
        i * self.strength / (d1 + self.dressing / d2)
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Poles(Faddeeva),
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

/// Prepared velocity averager. Construction does the O(N²) set-up work, so
/// build one and reuse it across a detuning grid.
#[derive(Debug, Clone)]
pub struct DopplerIntegrator {
    settings: DopplerSettings,
    kernel: Kernel,
}

impl DopplerIntegrator {
    pub fn new(settings: DopplerSettings) -> Result<Self> {
        if settings.nodes < MIN_NODES {
            return Err(Error::config(
                "field.doppler_nodes",
                format!("must be >= {MIN_NODES} (got {})", settings.nodes),
            ));
        }
        let kernel = match settings.scheme {
            DopplerScheme::PoleExpansion => Kernel::Poles(Faddeeva::new(settings.nodes)),
            DopplerScheme::GaussHermite => {
                let (nodes, weights) = gauss_hermite(settings.nodes);
                Kernel::Quadrature { nodes, weights }
            }
        };
        Ok(Self { settings, kernel })
    }

    pub fn settings(&self) -> DopplerSettings {
        self.settings
    }

    /// Average of `line` over a Maxwell–Boltzmann distribution
    /// `exp(−v²/u²) / (u√π)` with most probable speed `u`.
    pub fn average(&self, line: &LadderLine, u: f64) -> Complex64 {
        if u <= 0.0 {
            return line.at_velocity(0.0);
        }
        match &self.kernel {
            Kernel::Quadrature { nodes, weights } => {
                nodes
                    .iter()
                    .zip(weights)
                    .map(|(&x, &w)| w * line.at_velocity(u * x))
                    .sum::<Complex64>()
                    / SQRT_PI
            }
            Kernel::Poles(fad) => average_poles(fad, line, u),
        }
    }
}

/// ⟨1/(v − z)⟩ over the Maxwell–Boltzmann distribution.
fn mean_inverse(fad: &Faddeeva, z: Complex64, u: f64) -> Complex64 {
    if z.im >= 0.0 {
        Complex64::i() * SQRT_PI * fad.w(z / u) / u
    } else {
        mean_inverse(fad, z.conj(), u).conj()
    }
}

/// ⟨1/(v − z)²⟩ = d/dz ⟨1/(v − z)⟩.
fn mean_inverse_sq(fad: &Faddeeva, z: Complex64, u: f64) -> Complex64 {
    if z.im >= 0.0 {
        Complex64::i() * SQRT_PI * fad.w_prime(z / u) / (u * u)
    } else {
        mean_inverse_sq(fad, z.conj(), u).conj()
    }
}

fn average_poles(fad: &Faddeeva, line: &LadderLine, u: f64) -> Complex64 {
    let i = Complex64::i();
    let c = i * line.strength;
    // D1 = a1 + b1 v, D2 = a2 + b2 v
    let a1 = Complex64::new(line.gamma_ge, -line.delta_s);
    let b1 = i * line.k_s;
    let a2 = Complex64::new(line.gamma_gd, -(line.delta_s + line.delta_c));
    let b2 = i * line.q;

    if line.dressing == 0.0 {
        // χ = c / (b1 (v − z)), z = −a1/b1
        let z = -a1 / b1;
        return c / b1 * mean_inverse(fad, z, u);
    }

    // χ = c (a2 + b2 v) / (A v² + B v + C0)
    let qa = b1 * b2;
    let qb = a1 * b2 + a2 * b1;
    let qc = a1 * a2 + line.dressing;

    if qa.norm() == 0.0 {
        let z = -qc / qb;
        return c * a2 / qb * mean_inverse(fad, z, u);
    }

    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let s = if (qb.conj() * disc).re >= 0.0 {
        -(qb + disc) / 2.0
    } else {
        -(qb - disc) / 2.0
    };
    let z1 = s / qa;
    let z2 = qc / s;
    let gap = z1 - z2;
    let scale = z1.norm().max(z2.norm());

    if gap.norm() <= 1e-5 * scale {
        // Near-double pole: c/A · [b2/(v − z) + (a2 + b2 z)/(v − z)²]
        let z = 0.5 * (z1 + z2);
        return c / qa * (b2 * mean_inverse(fad, z, u) + (a2 + b2 * z) * mean_inverse_sq(fad, z, u));
    }

    let r1 = (a2 + b2 * z1) / gap;
    let r2 = -(a2 + b2 * z2) / gap;
    c / qa * (r1 * mean_inverse(fad, z1, u) + r2 * mean_inverse(fad, z2, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_weights_sum_to_sqrt_pi() {
        for n in [8, 20, 64, 128] {
            let (x, w) = gauss_hermite(n);
            let s: f64 = w.iter().sum();
            assert!((s - SQRT_PI).abs() < 1e-12, "n={n}: {s}");
            // second moment ∫x² e^{-x²} = √π/2
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            assert!((m2 - SQRT_PI / 2.0).abs() < 1e-11, "n={n}: {m2}");
            assert!(x.windows(2).all(|p| p[0] > p[1]));
        }
    }

    #[test]
    fn hermite_integrates_polynomials_exactly() {
        // ∫ x⁶ e^{-x²} dx = 15√π/8
        let (x, w) = gauss_hermite(8);
        let m6: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((m6 - 15.0 * SQRT_PI / 8.0).abs() < 1e-12);
    }

    #[test]
    fn faddeeva_special_values() {
        let f = Faddeeva::new(64);
        assert!((f.w(Complex64::new(0.0, 0.0)) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // w(x) for real x has real part exp(-x²)
        for x in [0.3, 1.0, 2.5, 7.0] {
            let w = f.w(Complex64::new(x, 0.0));
            assert!((w.re - (-x * x).exp()).abs() < 1e-14, "x={x}");
        }
        // asymptotics: w(z) ≈ i/(√π z) for large |z|
        let z = Complex64::new(1.0e4, 1.0);
        let asym = Complex64::i() / (SQRT_PI * z);
        assert!(((f.w(z) - asym) / asym).norm() < 1e-7);
    }

    #[test]
    fn node_count_below_minimum_is_rejected() {
        let err = DopplerIntegrator::new(DopplerSettings::new(DopplerScheme::GaussHermite, 7));
        assert!(matches!(err, Err(Error::Config { .. })));
        assert!(DopplerIntegrator::new(DopplerSettings::new(DopplerScheme::PoleExpansion, 8)).is_ok());
    }
}
