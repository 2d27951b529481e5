use serde::{Deserialize, Serialize};

use super::fuel::FuelSupplyParams;
use crate::error::{FdiError, Result};

/// Physical constants and component map coefficients of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    /// Gas constant, kJ/(kg K).
    pub gas_constant: f64,
    /// Plenum volume between compressor and turbine, m^3.
    pub compressor_volume: f64,
    /// Plenum volume between turbine and nozzle, m^3.
    pub turbine_volume: f64,
    /// Shaft polar moment of inertia, kg m^2.
    pub shaft_inertia: f64,
    pub heat_capacity_ratio: f64,
    /// Specific heat at constant pressure, kJ/(kg K).
    pub specific_heat: f64,
    /// Lower heating value of the fuel, kJ/kg.
    pub fuel_heating_value: f64,
    /// Combustor total pressure recovery (turbine inlet / compressor exit).
    pub combustor_pressure_ratio: f64,
    /// Air mass flow at reference speed, kg/s.
    pub reference_mass_flow: f64,
    /// Ambient pressure, kPa.
    pub ambient_pressure: f64,
    /// Ambient temperature, K.
    pub ambient_temperature: f64,
    pub compressor_efficiency: f64,
    pub turbine_efficiency: f64,
    pub combustion_efficiency: f64,
    /// Reference shaft speed, rpm.
    pub reference_speed: f64,
    /// Fractional loss of corrected compressor flow per unit of pressure ratio above one.
    pub compressor_flow_slope: f64,
    /// Choked turbine flow parameter, kg K^0.5 / (s kPa).
    pub turbine_flow_parameter: f64,
    /// Effective nozzle throat area, m^2.
    pub nozzle_area: f64,
    /// Fuel density used to convert L/hr into kg/s, kg/L.
    pub fuel_density: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            gas_constant: 0.287,
            compressor_volume: 0.24,
            turbine_volume: 0.36,
            shaft_inertia: 3.2e-4,
            heat_capacity_ratio: 1.4,
            specific_heat: 1.075,
            fuel_heating_value: 43_000.0,
            combustor_pressure_ratio: 0.96,
            reference_mass_flow: 0.5,
            ambient_pressure: 101.0,
            ambient_temperature: 300.0,
            compressor_efficiency: 0.75,
            turbine_efficiency: 0.80,
            combustion_efficiency: 0.98,
            reference_speed: 78_000.0,
            compressor_flow_slope: 0.05,
            turbine_flow_parameter: 0.03887,
            nozzle_area: 3.49e-3,
            fuel_density: 0.8,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("R", self.gas_constant),
            ("V1", self.compressor_volume),
            ("V2", self.turbine_volume),
            ("I", self.shaft_inertia),
            ("cp", self.specific_heat),
            ("LHV", self.fuel_heating_value),
            ("m_ref", self.reference_mass_flow),
            ("P1", self.ambient_pressure),
            ("T1", self.ambient_temperature),
            ("N_ref", self.reference_speed),
            ("turbine_flow_param", self.turbine_flow_parameter),
            ("nozzle_area", self.nozzle_area),
            ("fuel_density", self.fuel_density),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(FdiError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        let g = self.heat_capacity_ratio;
        if !(g > 1.0 && g < 2.0) {
            return Err(FdiError::InvalidParams(format!("gamma must lie in (1, 2), got {g}")));
        }
        let s = self.combustor_pressure_ratio;
        if !(s > 0.0 && s <= 1.0) {
            return Err(FdiError::InvalidParams(format!("sigma_cc must lie in (0, 1], got {s}")));
        }
        for (name, e) in [
            ("eta_c", self.compressor_efficiency),
            ("eta_t", self.turbine_efficiency),
            ("eta_cc", self.combustion_efficiency),
        ] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(FdiError::InvalidParams(format!("{name} must lie in (0, 1], got {e}")));
            }
        }
        if !(self.compressor_flow_slope.is_finite() && self.compressor_flow_slope >= 0.0) {
            return Err(FdiError::InvalidParams("compressor_flow_slope must be >= 0".into()));
        }
        Ok(())
    }

    /// (gamma - 1) / gamma
    pub fn isentropic_exponent(&self) -> f64 {
        (self.heat_capacity_ratio - 1.0) / self.heat_capacity_ratio
    }

    /// Converts a volumetric fuel flow in L/hr to kg/s.
    pub fn fuel_mass_flow(&self, litres_per_hour: f64) -> f64 {
        litres_per_hour * self.fuel_density / 3600.0
    }
}

/// Parses a flat `key = value` parameter file.
///
/// Blank lines and `#` comments are ignored. Keys not present keep their
/// defaults. Engine keys use the conventional symbols (`R`, `V1`, `V2`, `I`,
/// `gamma`, `cp`, `LHV`, `sigma_cc`, `m_ref`, `P1`, `T1`, `eta_c`, `eta_t`,
/// `eta_cc`, `N_ref`) plus `compressor_flow_slope`, `turbine_flow_param`,
/// `nozzle_area` and `fuel_density`; fuel supply keys are prefixed `fss_`.
pub fn parse_param_config(text: &str) -> Result<(EngineParams, FuelSupplyParams)> {
    let mut engine = EngineParams::default();
    let mut fuel = FuelSupplyParams::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| FdiError::ConfigParse {
            line: line_no,
            detail: format!("expected key=value, got '{line}'"),
        })?;
        let key = key.trim();
        let value: f64 = value.trim().parse().map_err(|_| FdiError::ConfigParse {
            line: line_no,
            detail: format!("value for '{key}' is not a number"),
        })?;
        let slot = match key {
            "R" => &mut engine.gas_constant,
            "V1" => &mut engine.compressor_volume,
            "V2" => &mut engine.turbine_volume,
            "I" => &mut engine.shaft_inertia,
            "gamma" => &mut engine.heat_capacity_ratio,
            "cp" => &mut engine.specific_heat,
            "LHV" => &mut engine.fuel_heating_value,
            "sigma_cc" => &mut engine.combustor_pressure_ratio,
            "m_ref" => &mut engine.reference_mass_flow,
            "P1" => &mut engine.ambient_pressure,
            "T1" => &mut engine.ambient_temperature,
            "eta_c" => &mut engine.compressor_efficiency,
            "eta_t" => &mut engine.turbine_efficiency,
            "eta_cc" => &mut engine.combustion_efficiency,
            "N_ref" => &mut engine.reference_speed,
            "compressor_flow_slope" => &mut engine.compressor_flow_slope,
            "turbine_flow_param" => &mut engine.turbine_flow_parameter,
            "nozzle_area" => &mut engine.nozzle_area,
            "fuel_density" => &mut engine.fuel_density,
            "fss_gain" => &mut fuel.gain,
            "fss_tau" => &mut fuel.time_constant,
            "fss_theta" => &mut fuel.dead_time,
            "fss_min" => &mut fuel.min_flow,
            "fss_max" => &mut fuel.max_flow,
            other => {
                return Err(FdiError::ConfigParse {
                    line: line_no,
                    detail: format!("unknown key '{other}'"),
                })
            }
        };
        *slot = value;
    }
    engine.validate()?;
    fuel.validate()?;
    Ok((engine, fuel))
}
