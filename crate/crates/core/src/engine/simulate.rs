use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fuel::{FuelSupply, FuelSupplyParams};
use super::integrate::{integrate_step, steady_state};
use super::model::{evaluate_components, EngineState};
use super::params::EngineParams;
use crate::error::{FdiError, Result};
use crate::faults::{
    add_measurement_noise, apply_actuator_fault, apply_sensor_fault, FaultKind, FaultSchedule, FaultTarget,
};
use crate::signals::{Signal, SIGNAL_COUNT};

pub const TRAJECTORY_HEADER: [&str; SIGNAL_COUNT + 1] = [
    "t", "mf", "P1", "T1", "P2", "T2", "P3", "T3", "P4", "T4", "P5", "T5", "N",
];

/// Pulse command (0..1 of full fuel) as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CommandProfile {
    Constant(f64),
    Step {
        before: f64,
        after: f64,
        at: f64,
    },
    /// Linear interpolation between `(t, command)` knots sorted by time,
    /// held constant outside the knot range.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl CommandProfile {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            CommandProfile::Constant(c) => *c,
            CommandProfile::Step { before, after, at } => {
                if t < *at {
                    *before
                } else {
                    *after
                }
            }
            CommandProfile::PiecewiseLinear(knots) => {
                let Some(first) = knots.first() else { return 0.0 };
                if t <= first.0 {
                    return first.1;
                }
                for w in knots.windows(2) {
                    let (t0, c0) = w[0];
                    let (t1, c1) = w[1];
                    if t <= t1 {
                        if t1 <= t0 {
                            return c1;
                        }
                        return c0 + (c1 - c0) * (t - t0) / (t1 - t0);
                    }
                }
                knots[knots.len() - 1].1
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let CommandProfile::PiecewiseLinear(knots) = self {
            if knots.is_empty() {
                return Err(FdiError::InvalidParams("command profile has no knots".into()));
            }
            if knots.windows(2).any(|w| w[1].0 < w[0].0) {
                return Err(FdiError::InvalidParams(
                    "command profile knots must be time-ordered".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// Engine and fuel supply settled at the command of `t = 0`.
    Settled,
    /// Engine and fuel supply settled at another command level.
    SettledAt(f64),
    /// Explicit engine state with the fuel supply settled at `command`.
    State { engine: EngineState, command: f64 },
}

/// One sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    /// Readings as reported by the instrumentation (faults and noise applied).
    pub measured: [f64; SIGNAL_COUNT],
    /// Physical values of the same signals.
    pub truth: [f64; SIGNAL_COUNT],
    pub state: EngineState,
    /// Fuel flow actually reaching the combustor, L/hr.
    pub delivered_fuel: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes `t,mf,P1,...,N` rows with six decimals.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", TRAJECTORY_HEADER.join(","))?;
        for r in &self.records {
            let mut line = format!("{:.6}", r.t);
            for v in r.measured {
                line.push_str(&format!(",{v:.6}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Engine plus fuel supply, ready to produce trajectories.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Simulator {
    pub engine: EngineParams,
    pub fuel: FuelSupplyParams,
}

impl Simulator {
    pub fn new(engine: EngineParams, fuel: FuelSupplyParams) -> Result<Self> {
        engine.validate()?;
        fuel.validate()?;
        Ok(Self { engine, fuel })
    }

    /// Simulates from a settled start; see [`Simulator::simulate_from`].
    pub fn simulate(
        &self,
        profile: &CommandProfile,
        duration: f64,
        dt: f64,
        faults: &FaultSchedule,
        seed: u64,
    ) -> Result<Trajectory> {
        self.simulate_from(InitialCondition::Settled, profile, duration, dt, faults, seed)
    }

    /// Produces `floor(duration / dt)` samples at `t = 0, dt, 2 dt, ...`.
    ///
    /// Each sample records the engine at `t` with the fuel flow delivered at
    /// `t`; the fuel supply then consumes the command at `t` and the engine
    /// advances one RK4 step with that fuel held. The reported fuel flow is
    /// the fuel supply output; actuator faults only alter what is delivered.
    pub fn simulate_from(
        &self,
        initial: InitialCondition,
        profile: &CommandProfile,
        duration: f64,
        dt: f64,
        faults: &FaultSchedule,
        seed: u64,
    ) -> Result<Trajectory> {
        profile.validate()?;
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(FdiError::InvalidParams(format!(
                "duration must be >= 0, got {duration}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FdiError::InvalidParams(format!("dt must be > 0, got {dt}")));
        }
        let n = (duration / dt + 1e-9).floor() as usize;
        if n == 0 {
            return Ok(Trajectory {
                dt,
                records: Vec::new(),
            });
        }
        let p = &self.engine;
        let (start_command, explicit_state) = match initial {
            InitialCondition::Settled => (profile.at(0.0), None),
            InitialCondition::SettledAt(c) => (c, None),
            InitialCondition::State { engine, command } => (command, Some(engine)),
        };
        let mut fss = FuelSupply::with_initial_command(self.fuel, dt, start_command)?;
        let mut state = match explicit_state {
            Some(s) => s,
            None => steady_state(p.fuel_mass_flow(fss.output()), p)?,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut latched: Option<f64> = None;
        let mut records = Vec::with_capacity(n);

        for i in 0..n {
            let t = i as f64 * dt;
            let reported = fss.output();
            let delivered = match faults.active_for(FaultTarget::FuelActuator, t) {
                Some(spec) => {
                    let held = match spec.kind {
                        FaultKind::ActuatorLockInPlace => *latched.get_or_insert(reported),
                        _ => reported,
                    };
                    apply_actuator_fault(reported, held, spec, t)?
                }
                None => {
                    latched = None;
                    reported
                }
            };
            let fuel_rate = p.fuel_mass_flow(delivered);
            let st = evaluate_components(&state, fuel_rate, p).map_err(|e| FdiError::IntegrationBlowup {
                t,
                dt,
                detail: e.to_string(),
            })?;

            let mut truth = [0.0; SIGNAL_COUNT];
            truth[Signal::FuelFlow.index()] = reported;
            truth[Signal::P1.index()] = p.ambient_pressure;
            truth[Signal::T1.index()] = p.ambient_temperature;
            truth[Signal::P2.index()] = state.p2;
            truth[Signal::T2.index()] = st.t2;
            truth[Signal::P3.index()] = st.p3;
            truth[Signal::T3.index()] = st.t3;
            truth[Signal::P4.index()] = state.p4;
            truth[Signal::T4.index()] = st.t4;
            truth[Signal::P5.index()] = st.p5;
            truth[Signal::T5.index()] = st.t5;
            truth[Signal::N.index()] = state.speed;

            let mut measured = truth;
            for sig in Signal::ALL {
                let idx = sig.index();
                if let Some(spec) = faults.active_for(FaultTarget::Sensor(sig), t) {
                    measured[idx] = apply_sensor_fault(measured[idx], truth[idx], spec, t)?;
                }
                if !sig.is_ambient() {
                    measured[idx] = add_measurement_noise(measured[idx], faults.noise_level(), &mut rng);
                }
            }
            records.push(Record {
                t,
                measured,
                truth,
                state,
                delivered_fuel: delivered,
            });

            if i + 1 < n {
                fss.step(profile.at(t));
                state = integrate_step(&state, fuel_rate, dt, p).map_err(|e| match e {
                    FdiError::IntegrationBlowup { detail, .. } => FdiError::IntegrationBlowup { t, dt, detail },
                    other => other,
                })?;
            }
        }
        Ok(Trajectory { dt, records })
    }
}
