//! Run configuration: one JSON document with unit-suffixed keys, every block
//! optional and defaulted, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cavity::{BiasPolicy, FormulaMode, RingCavity};
use crate::constants::AtomConstants;
use crate::doppler::{DopplerScheme, DopplerSettings, DEFAULT_NODES};
use crate::dynamics::{ControlPulseTrain, DynamicsSettings};
use crate::error::{Error, Result};
use crate::fit::{Bounds, ContrastModel, FitParams};
use crate::medium::{AtomicMedium, FieldConfig, Geometry, LadderAtom, VaporCell};
use crate::sweep::AxisRange;
use crate::units::ghz_to_rad_s;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomBlock {
    /// Replacement constants table; the built-in ⁸⁷Rb table when absent.
    pub constants_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellBlock {
    pub length_m: f64,
    pub temperature_k: f64,
    pub extra_dephasing_rad_s: f64,
    /// Overrides the vapor-pressure density when set.
    pub number_density_m3: Option<f64>,
}

impl Default for CellBlock {
    fn default() -> Self {
        Self {
            length_m: 0.05,
            temperature_k: 332.0,
            extra_dephasing_rad_s: 0.0,
            number_density_m3: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldBlock {
    pub delta_s_ghz: f64,
    pub delta_c_ghz: f64,
    /// Intra-cavity control power P·𝓕.
    pub control_power_w: f64,
    pub beam_waist_m: f64,
    pub geometry: Geometry,
    pub doppler_scheme: DopplerScheme,
    pub doppler_nodes: usize,
}

impl Default for FieldBlock {
    fn default() -> Self {
        Self {
            delta_s_ghz: -0.65,
            delta_c_ghz: -0.65,
            control_power_w: 0.5,
            beam_waist_m: 100e-6,
            geometry: Geometry::CounterPropagating,
            doppler_scheme: DopplerScheme::default(),
            doppler_nodes: DEFAULT_NODES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityBlock {
    pub r1_sq: f64,
    pub r2_sq: f64,
    pub t1_sq: f64,
    pub t2_sq: f64,
    pub eta: f64,
    pub round_trip_length_m: f64,
    pub bias_phase_rad: f64,
    pub formula_mode: FormulaMode,
    pub bias_policy: BiasPolicy,
}

impl Default for CavityBlock {
    fn default() -> Self {
        Self {
            r1_sq: 0.8,
            r2_sq: 0.8,
            t1_sq: 0.2,
            t2_sq: 0.2,
            eta: 0.83,
            round_trip_length_m: 0.3331,
            bias_phase_rad: 0.0,
            formula_mode: FormulaMode::default(),
            bias_policy: BiasPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulsesBlock {
    pub modulation_rates_hz: Vec<f64>,
    pub duty: f64,
    pub pulse_duration_s: Option<f64>,
    pub peak_power_w: f64,
    pub edge_time_s: f64,
    /// Simulated length in modulation periods.
    pub periods: usize,
    pub dt_s: Option<f64>,
}

impl Default for PulsesBlock {
    fn default() -> Self {
        Self {
            modulation_rates_hz: vec![2e6, 4e6, 12e6],
            duty: 0.5,
            pulse_duration_s: None,
            peak_power_w: 25e-3,
            edge_time_s: 1e-9,
            periods: 4,
            dt_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub delta_s: AxisRange,
    pub delta_c: AxisRange,
    pub diagonal: AxisRange,
    /// Signal-detuning axis of the response scan.
    pub response: AxisRange,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            delta_s: AxisRange::new(-3.0, 3.0, 200),
            delta_c: AxisRange::new(-3.0, 3.0, 200),
            diagonal: AxisRange::new(-3.0, 3.0, 121),
            response: AxisRange::new(-3.0, 3.0, 601),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBlock {
    pub temperature_k: f64,
    pub intracavity_power_w: f64,
    pub noise_sigma: f64,
}

impl Default for SyntheticBlock {
    fn default() -> Self {
        Self {
            temperature_k: 332.0,
            intracavity_power_w: 0.5,
            noise_sigma: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitBlock {
    /// `detuning_ghz,contrast` CSV; synthetic data on the diagonal axis when absent.
    pub data_path: Option<PathBuf>,
    pub initial: FitParams,
    pub bounds: Bounds,
    pub synthetic: SyntheticBlock,
    /// Nelder–Mead iteration cap.
    pub max_iterations: usize,
}

impl Default for FitBlock {
    fn default() -> Self {
        Self {
            data_path: None,
            initial: FitParams::new(333.15, 0.45),
            bounds: Bounds::default(),
            synthetic: SyntheticBlock::default(),
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomBlock,
    pub cell: CellBlock,
    pub field: FieldBlock,
    pub cavity: CavityBlock,
    pub pulses: PulsesBlock,
    pub sweep: SweepBlock,
    pub fit: FitBlock,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            atom: AtomBlock::default(),
            cell: CellBlock::default(),
            field: FieldBlock::default(),
            cavity: CavityBlock::default(),
            pulses: PulsesBlock::default(),
            sweep: SweepBlock::default(),
            fit: FitBlock::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Everything a pipeline needs, built and validated from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub atom: LadderAtom,
    pub cell: VaporCell,
    pub medium: AtomicMedium,
    pub field: FieldConfig,
    pub cavity: RingCavity,
    pub doppler: DopplerSettings,
    pub bias: BiasPolicy,
    pub formula_mode: FormulaMode,
    pub pulses: Vec<ControlPulseTrain>,
    pub dynamics: DynamicsSettings,
}

impl Prepared {
    pub fn contrast_model(&self) -> ContrastModel {
        ContrastModel {
            atom: self.atom,
            cell: self.cell,
            field: self.field,
            cavity: self.cavity,
            doppler: self.doppler,
            bias: self.bias,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with `path` (if any) and then with `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(Self::default())?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: Value = serde_json::from_str(&text).map_err(|e| Error::config("<file>", e.to_string()))?;
            merge(&mut value, file, "")?;
        }
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| Error::config(unknown_key(&e.to_string()), e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        let mut base = serde_json::to_value(Self::default())?;
        merge(&mut base, value, "")?;
        serde_json::from_value(base).map_err(|e| Error::config(unknown_key(&e.to_string()), e.to_string()))
    }

    /// Validates every block and builds the domain objects.
    pub fn prepare(&self) -> Result<Prepared> {
        let constants = match &self.atom.constants_path {
            Some(p) => AtomConstants::load(p)?,
            None => AtomConstants::rb87(),
        };
        let atom = constants.to_atom()?;
        let c = &self.cell;
        let cell = VaporCell::new(c.length_m, c.temperature_k, c.extra_dephasing_rad_s)?;
        let f = &self.field;
        let doppler = DopplerSettings::new(f.doppler_scheme, f.doppler_nodes);
        let medium = match c.number_density_m3 {
            Some(n) if !(n >= 0.0 && n.is_finite()) => {
                return Err(Error::config(
                    "cell.number_density_m3",
                    format!("must be >= 0 (got {n})"),
                ))
            }
            Some(n) => AtomicMedium::with_density(atom, cell, n, doppler)?,
            None => AtomicMedium::new(atom, cell, doppler)?,
        };
        let field = FieldConfig::new(
            ghz_to_rad_s(f.delta_s_ghz),
            ghz_to_rad_s(f.delta_c_ghz),
            f.control_power_w,
            f.beam_waist_m,
            f.geometry,
        )?;
        let k = &self.cavity;
        let cavity = RingCavity::from_power_coefficients(
            k.r1_sq,
            k.r2_sq,
            k.t1_sq,
            k.t2_sq,
            k.eta,
            k.round_trip_length_m,
            k.bias_phase_rad,
        )?;
        crate::cavity::finesse(&cavity)
            .map_err(|_| Error::config("cavity.eta", "round-trip factor r1·r2·√eta must be < 1".to_string()))?;

        let p = &self.pulses;
        if p.modulation_rates_hz.is_empty() {
            return Err(Error::config("pulses.modulation_rates_hz", "needs at least one rate"));
        }
        if p.periods < 2 {
            return Err(Error::config(
                "pulses.periods",
                format!("must be >= 2 (got {})", p.periods),
            ));
        }
        let pulses = p
            .modulation_rates_hz
            .iter()
            .map(|&rate| {
                let train = ControlPulseTrain {
                    modulation_rate: rate,
                    duty: p.duty,
                    pulse_duration: p.pulse_duration_s,
                    peak_power: p.peak_power_w,
                    edge_time: p.edge_time_s,
                };
                train.validate()?;
                Ok(train)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(dt) = p.dt_s {
            let limit = cavity.round_trip_time() / 4.0;
            if !(dt > 0.0 && dt <= limit) {
                return Err(Error::config(
                    "pulses.dt_s",
                    format!("must lie in (0, {limit:e}] (got {dt:e})"),
                ));
            }
        }

        self.sweep.delta_s.validate("sweep.delta_s")?;
        self.sweep.delta_c.validate("sweep.delta_c")?;
        self.sweep.diagonal.validate("sweep.diagonal")?;
        self.sweep.response.validate("sweep.response")?;

        self.fit.bounds.validate()?;
        if !self.fit.bounds.contains(self.fit.initial) {
            return Err(Error::config("fit.initial", "must lie within fit.bounds"));
        }
        if self.fit.max_iterations == 0 {
            return Err(Error::config("fit.max_iterations", "must be >= 1"));
        }
        let s = &self.fit.synthetic;
        if !(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite()) {
            return Err(Error::config(
                "fit.synthetic.noise_sigma",
                format!("must be >= 0 (got {})", s.noise_sigma),
            ));
        }
        if !self
            .fit
            .bounds
            .contains(FitParams::new(s.temperature_k, s.intracavity_power_w))
        {
            return Err(Error::config("fit.synthetic", "truth must lie within fit.bounds"));
        }

        Ok(Prepared {
            atom,
            cell,
            medium,
            field,
            cavity,
            doppler,
            bias: k.bias_policy,
            formula_mode: k.formula_mode,
            pulses,
            dynamics: DynamicsSettings {
                dt: p.dt_s,
                bias: k.bias_policy,
            },
        })
    }
}

/// Deep-merges `patch` into `base`, rejecting keys absent from `base`.
fn merge(base: &mut Value, patch: Value, prefix: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                match b.get_mut(&k) {
                    Some(slot @ Value::Object(_)) if v.is_object() => merge(slot, v, &path)?,
                    Some(slot) => *slot = v,
                    None => return Err(Error::config(path, "unknown key")),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and
/// taken as a string otherwise.
fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let parsed = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut slot = &mut *root;
    for part in key.split('.') {
        slot = match slot {
            Value::Object(map) => map.get_mut(part).ok_or_else(|| Error::config(key, "unknown key"))?,
            _ => return Err(Error::config(key, "unknown key")),
        };
    }
    *slot = parsed;
    Ok(())
}

/// Best-effort field name from a serde error message.
fn unknown_key(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<config>".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_prepare() {
        let p = RunConfig::default().prepare().unwrap();
        assert_eq!(p.pulses.len(), 3);
        assert_eq!(p.bias, BiasPolicy::ControlOnResonant);
    }

    #[test]
    fn overrides_parse_json_or_strings() {
        let c = RunConfig::load(
            None,
            &[
                "cell.temperature_k=340".into(),
                "field.geometry=co".into(),
                "pulses.modulation_rates_hz=[1e6]".into(),
                "fit.bounds.temperature_k=[310, 350]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.cell.temperature_k, 340.0);
        assert_eq!(c.field.geometry, Geometry::CoPropagating);
        assert_eq!(c.pulses.modulation_rates_hz, vec![1e6]);
        assert_eq!(c.fit.bounds.temperature_k, [310.0, 350.0]);
    }

    #[test]
    fn unknown_keys_are_named() {
        match RunConfig::load(None, &["cell.temprature_k=340".into()]) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "cell.temprature_k"),
            other => panic!("{other:?}"),
        }
        match RunConfig::from_json(r#"{"cavity": {"eta": 0.9, "finesse": 18}}"#) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "cavity.finesse"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_names_key_and_bound() {
        let c = RunConfig::load(None, &["cavity.eta=1.5".into()]).unwrap();
        match c.prepare() {
            Err(Error::Config { key, message }) => {
                assert_eq!(key, "cavity.eta");
                assert!(message.contains("(0, 1]"));
            }
            other => panic!("{other:?}"),
        }
        let c = RunConfig::load(None, &["field.doppler_nodes=4".into()]).unwrap();
        match c.prepare() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "field.doppler_nodes"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_is_a_config_error() {
        assert!(matches!(
            RunConfig::load(None, &["cell.temperature_k=hot".into()]),
            Err(Error::Config { .. })
        ));
    }
}
