//! Single-spool turbojet model.
//!
//! The engine is reduced to three states: compressor-exit pressure `p2`,
//! turbine-exit pressure `p4` and shaft speed. Their rates follow the
//! plenum mass balances and the shaft power balance; everything else
//! (temperatures, flows, powers) comes from algebraic component relations
//! evaluated in one pass from the state and the fuel flow.
//!
//! Units: pressures kPa, temperatures K, mass flows kg/s, powers kJ/s,
//! shaft speed rpm, fuel supply output L/hr.

mod fuel;
mod integrate;
mod model;
mod params;
mod simulate;

pub use fuel::{FuelSupply, FuelSupplyParams};
pub use integrate::{derivative, integrate_step, relative_derivative_norm, steady_state};
pub use model::{evaluate_components, state_derivatives, EngineState, StateDerivative, StationConditions};
pub use params::{parse_param_config, EngineParams};
pub use simulate::{CommandProfile, InitialCondition, Record, Simulator, Trajectory, TRAJECTORY_HEADER};
