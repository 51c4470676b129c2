//! Versioned atomic constants table.
//!
//! The default table for ⁸⁷Rb ships in `data/rb87_constants.json` and is
//! compiled into the library. A replacement table with the same schema can be
//! loaded at run time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{LadderAtom, VaporPressure};

const RB87_JSON: &str = include_str!("../data/rb87_constants.json");

/// On-disk schema. Vapor-pressure coefficients `[a, b, c, d]` give
/// `log₁₀(P / torr) = a + b/T + c·T + d·log₁₀(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub lambda_s_m: f64,
    pub lambda_c_m: f64,
    pub gamma_e_rad_s: f64,
    pub gamma_d_rad_s: f64,
    #[serde(rename = "dipole_ge_Cm")]
    pub dipole_ge_cm: f64,
    #[serde(rename = "dipole_ed_Cm")]
    pub dipole_ed_cm: f64,
    pub mass_kg: f64,
    pub vapor_pressure_coeffs: [f64; 4],
}

impl AtomConstants {
    pub fn rb87() -> Self {
        serde_json::from_str(RB87_JSON).expect("embedded constants table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_atom(&self) -> Result<LadderAtom> {
        LadderAtom::new(
            self.lambda_s_m,
            self.lambda_c_m,
            self.gamma_e_rad_s,
            self.gamma_d_rad_s,
            self.dipole_ge_cm,
            self.dipole_ed_cm,
            self.mass_kg,
            VaporPressure::new(self.vapor_pressure_coeffs),
        )
    }
}
