use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::params::EngineParams;
use crate::error::{FdiError, Result};

/// Dynamic state of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    /// Compressor exit pressure, kPa.
    pub p2: f64,
    /// Turbine exit pressure, kPa.
    pub p4: f64,
    /// Shaft speed, rpm.
    pub speed: f64,
}

impl EngineState {
    pub fn new(p2: f64, p4: f64, speed: f64) -> Self {
        Self { p2, p4, speed }
    }

    pub fn is_valid(&self, params: &EngineParams) -> bool {
        self.p2.is_finite()
            && self.p4.is_finite()
            && self.speed.is_finite()
            && self.p2 >= params.ambient_pressure
            && self.p4 >= params.ambient_pressure
            && self.speed > 0.0
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p2, self.p4, self.speed]
    }

    pub(crate) fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Everything one pass of the component relations yields for a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationConditions {
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t5: f64,
    pub p3: f64,
    pub p5: f64,
    /// Compressor air flow, kg/s.
    pub compressor_flow: f64,
    /// Turbine gas flow, kg/s.
    pub turbine_flow: f64,
    /// Nozzle gas flow, kg/s.
    pub nozzle_flow: f64,
    /// Power absorbed by the compressor, kJ/s.
    pub compressor_power: f64,
    /// Power delivered by the turbine, kJ/s.
    pub turbine_power: f64,
    /// Rate of change of compressor exit temperature, K/s.
    pub dt2_dt: f64,
    /// Rate of change of turbine exit temperature, K/s.
    pub dt4_dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDerivative {
    /// kPa/s
    pub dp2_dt: f64,
    /// kPa/s
    pub dp4_dt: f64,
    /// rpm/s
    pub dspeed_dt: f64,
}

impl StateDerivative {
    pub fn is_finite(&self) -> bool {
        self.dp2_dt.is_finite() && self.dp4_dt.is_finite() && self.dspeed_dt.is_finite()
    }

    pub(crate) fn to_array(self) -> [f64; 3] {
        [self.dp2_dt, self.dp4_dt, self.dspeed_dt]
    }
}

/// (60 / 2 pi)^2: converts angular kinetic energy rates to rpm units.
const RPM_FACTOR: f64 = (60.0 / (2.0 * PI)) * (60.0 / (2.0 * PI));

/// Minimum admissible value of `1 - feedback` when resolving the
/// temperature-rate terms of the plenum equations.
const MIN_PLENUM_DENOMINATOR: f64 = 1e-3;

/// Algebraic relations and their partial derivatives at one state.
struct Components {
    t2: f64,
    t3: f64,
    t4: f64,
    t5: f64,
    p3: f64,
    p5: f64,
    mc: f64,
    mt: f64,
    mn: f64,
    wc: f64,
    wt: f64,
    dt2_dp2: f64,
    dt4_dp2: f64,
    dt4_dp4: f64,
    dt4_dspeed: f64,
}

fn components(state: &EngineState, fuel_rate: f64, p: &EngineParams) -> Result<Components> {
    let EngineState { p2, p4, speed } = *state;
    if !(p2.is_finite() && p4.is_finite() && speed.is_finite()) {
        return Err(FdiError::Domain {
            station: "state",
            detail: format!("non-finite state p2={p2} p4={p4} N={speed}"),
        });
    }
    if !(fuel_rate.is_finite() && fuel_rate >= 0.0) {
        return Err(FdiError::Domain {
            station: "combustor",
            detail: format!("fuel rate must be finite and >= 0, got {fuel_rate}"),
        });
    }
    if speed <= 0.0 {
        return Err(FdiError::Domain {
            station: "shaft",
            detail: format!("shaft speed must be positive, got {speed}"),
        });
    }
    let k = p.isentropic_exponent();
    let g = p.heat_capacity_ratio;
    let cp = p.specific_heat;

    // compressor
    let pr_c = p2 / p.ambient_pressure;
    if pr_c < 1.0 {
        return Err(FdiError::Domain {
            station: "compressor (station 2)",
            detail: format!("pressure ratio {pr_c:.6} < 1"),
        });
    }
    let t1 = p.ambient_temperature;
    let t2 = t1 * (1.0 + (pr_c.powf(k) - 1.0) / p.compressor_efficiency);
    let dt2_dp2 = t1 * k * pr_c.powf(k - 1.0) / (p.compressor_efficiency * p.ambient_pressure);
    let speed_ratio = speed / p.reference_speed;
    let flow_factor = 1.0 - p.compressor_flow_slope * (pr_c - 1.0);
    if flow_factor <= 0.0 {
        return Err(FdiError::Domain {
            station: "compressor (station 2)",
            detail: format!("pressure ratio {pr_c:.4} beyond the compressor flow map"),
        });
    }
    let mc = p.reference_mass_flow * speed_ratio * flow_factor;
    let dmc_dp2 = -p.reference_mass_flow * speed_ratio * p.compressor_flow_slope / p.ambient_pressure;
    let dmc_dspeed = mc / speed;
    let wc = mc * cp * (t2 - t1);

    // combustor: fuel energy heats the compressor delivery flow plus the fuel
    let heat = fuel_rate * p.fuel_heating_value * p.combustion_efficiency;
    let total_flow = mc + fuel_rate;
    let t3 = (heat + mc * cp * t2) / (total_flow * cp);
    let dt3_dt2 = mc / total_flow;
    let dt3_dmc = (t2 - t3) / total_flow;
    let dt3_dp2 = dt3_dt2 * dt2_dp2 + dt3_dmc * dmc_dp2;
    let dt3_dspeed = dt3_dmc * dmc_dspeed;
    let p3 = p.combustor_pressure_ratio * p2;

    // turbine (choked flow parameter)
    let mt = p.turbine_flow_parameter * p3 / t3.sqrt();
    // no expansion (and no work) once the exit pressure reaches the inlet pressure
    let raw_pr_t = p4 / p3;
    let pr_t = raw_pr_t.min(1.0);
    let expansion = 1.0 - p.turbine_efficiency * (1.0 - pr_t.powf(k));
    let t4 = t3 * expansion;
    let wt = mt * cp * (t3 - t4);
    let dt4_dp4 = if raw_pr_t < 1.0 {
        t3 * p.turbine_efficiency * k * pr_t.powf(k - 1.0) / p3
    } else {
        0.0
    };
    let dt4_dp3 = -dt4_dp4 * pr_t;
    let dt4_dp2 = expansion * dt3_dp2 + dt4_dp3 * p.combustor_pressure_ratio;
    let dt4_dspeed = expansion * dt3_dspeed;

    // nozzle: compressible flow from p4/t4 to ambient with choking
    if p4 < p.ambient_pressure {
        return Err(FdiError::Domain {
            station: "nozzle (station 5)",
            detail: format!("turbine exit pressure {p4:.4} kPa below ambient"),
        });
    }
    let critical = (2.0 / (g + 1.0)).powf(g / (g - 1.0));
    let back = (p.ambient_pressure / p4).max(critical);
    let flow_function = (2.0 * g / (g - 1.0) * (back.powf(2.0 / g) - back.powf((g + 1.0) / g)))
        .max(0.0)
        .sqrt();
    let mn = p.nozzle_area * (p4 * 1e3) / (p.gas_constant * 1e3 * t4).sqrt() * flow_function;
    let p5 = (p4 * critical).max(p.ambient_pressure);
    let t5 = t4 * (p5 / p4).powf(k);

    Ok(Components {
        t2,
        t3,
        t4,
        t5,
        p3,
        p5,
        mc,
        mt,
        mn,
        wc,
        wt,
        dt2_dp2,
        dt4_dp2,
        dt4_dp4,
        dt4_dspeed,
    })
}

fn shaft_acceleration(speed: f64, turbine_power: f64, compressor_power: f64, inertia: f64) -> Result<f64> {
    if speed == 0.0 {
        return Err(FdiError::Singularity("shaft speed is zero in the power balance".into()));
    }
    // kJ/s -> W so the result is rpm/s with inertia in kg m^2
    Ok(RPM_FACTOR * (turbine_power - compressor_power) * 1e3 / (inertia * speed))
}

/// Evaluates the component relations for `state` at the given fuel flow
/// (kg/s).
///
/// The temperature rates `dt2_dt` and `dt4_dt` are obtained by the chain
/// rule through the compressor and turbine relations. Because the plenum
/// equations contain those rates themselves, the pressure rates are
/// resolved in closed form first; `state_derivatives` applied to the result
/// reproduces them.
pub fn evaluate_components(state: &EngineState, fuel_rate: f64, params: &EngineParams) -> Result<StationConditions> {
    let c = components(state, fuel_rate, params)?;
    let r = params.gas_constant;

    let dspeed = shaft_acceleration(state.speed, c.wt, c.wc, params.shaft_inertia)?;

    let gain2 = r / params.compressor_volume;
    let denom2 = 1.0 - gain2 * c.mc * c.dt2_dp2;
    if denom2 < MIN_PLENUM_DENOMINATOR {
        return Err(FdiError::Singularity(format!(
            "compressor plenum temperature feedback {:.4} >= 1",
            1.0 - denom2
        )));
    }
    let dp2 = gain2 * (c.mc - c.mt) * c.t2 / denom2;
    let dt2_dt = c.dt2_dp2 * dp2;

    let gain4 = r / params.turbine_volume;
    let denom4 = 1.0 - gain4 * c.mt * c.dt4_dp4;
    if denom4 < MIN_PLENUM_DENOMINATOR {
        return Err(FdiError::Singularity(format!(
            "turbine plenum temperature feedback {:.4} >= 1",
            1.0 - denom4
        )));
    }
    let known = c.dt4_dp2 * dp2 + c.dt4_dspeed * dspeed;
    let dp4 = gain4 * ((c.mt - c.mn) * c.t4 + c.mt * known) / denom4;
    let dt4_dt = known + c.dt4_dp4 * dp4;

    Ok(StationConditions {
        t2: c.t2,
        t3: c.t3,
        t4: c.t4,
        t5: c.t5,
        p3: c.p3,
        p5: c.p5,
        compressor_flow: c.mc,
        turbine_flow: c.mt,
        nozzle_flow: c.mn,
        compressor_power: c.wc,
        turbine_power: c.wt,
        dt2_dt,
        dt4_dt,
    })
}

/// Plenum mass balances and shaft power balance, as written:
///
/// ```text
/// dP2/dt = R/V1 [ (mc - mt) T2 + mc dT2/dt ]
/// dP4/dt = R/V2 [ (mt - mn) T4 + mt dT4/dt ]
/// dN/dt  = 1/N (60/2pi)^2 (Wt - Wc) / I
/// ```
///
/// The bracketed `m dT/dt` term mixes units the same way the source
/// equations do; it is kept verbatim.
pub fn state_derivatives(
    state: &EngineState,
    stations: &StationConditions,
    params: &EngineParams,
) -> Result<StateDerivative> {
    let r = params.gas_constant;
    let dp2_dt = r / params.compressor_volume
        * ((stations.compressor_flow - stations.turbine_flow) * stations.t2
            + stations.compressor_flow * stations.dt2_dt);
    let dp4_dt = r / params.turbine_volume
        * ((stations.turbine_flow - stations.nozzle_flow) * stations.t4 + stations.turbine_flow * stations.dt4_dt);
    let dspeed_dt = shaft_acceleration(
        state.speed,
        stations.turbine_power,
        stations.compressor_power,
        params.shaft_inertia,
    )?;
    Ok(StateDerivative {
        dp2_dt,
        dp4_dt,
        dspeed_dt,
    })
}
