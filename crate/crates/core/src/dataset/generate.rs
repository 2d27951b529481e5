use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::engine::{CommandProfile, Simulator};
use crate::error::{FdiError, Result};
use crate::faults::{FaultKind, FaultSchedule, FaultSpec, FaultTarget};
use crate::signals::Signal;
use crate::util::derive_seed;

/// Dataset presets.
///
/// `FD001` covers fuel actuator faults, `FD002` single sensor faults on four
/// channels. `T2` and `T3` are the binary single-sensor cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    FD001,
    FD002,
    T2,
    T3,
}

/// What goes wrong in a faulty run of a given class.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FaultClass {
    name: &'static str,
    kind: FaultKind,
    target: FaultTarget,
    magnitude: (f64, f64),
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::FD001, Scenario::FD002, Scenario::T2, Scenario::T3];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FD001 => "FD001",
            Scenario::FD002 => "FD002",
            Scenario::T2 => "T2",
            Scenario::T3 => "T3",
        }
    }

    fn fault_classes(self) -> Vec<FaultClass> {
        let sensor_bias = |name, signal, lo, hi| FaultClass {
            name,
            kind: FaultKind::SensorBias,
            target: FaultTarget::Sensor(signal),
            magnitude: (lo, hi),
        };
        match self {
            Scenario::FD001 => vec![
                FaultClass {
                    name: "LockInPlace",
                    kind: FaultKind::ActuatorLockInPlace,
                    target: FaultTarget::FuelActuator,
                    magnitude: (0.0, 0.0),
                },
                FaultClass {
                    name: "Bias",
                    kind: FaultKind::ActuatorOffset,
                    target: FaultTarget::FuelActuator,
                    magnitude: (0.05, 0.15),
                },
            ],
            Scenario::FD002 => vec![
                sensor_bias("T2", Signal::T2, 0.03, 0.06),
                sensor_bias("T3", Signal::T3, 0.03, 0.06),
                sensor_bias("T5", Signal::T5, 0.03, 0.06),
                sensor_bias("P2", Signal::P2, 0.03, 0.06),
            ],
            Scenario::T2 => vec![FaultClass {
                name: "T2",
                kind: FaultKind::SensorGain,
                target: FaultTarget::Sensor(Signal::T2),
                magnitude: (0.05, 0.05),
            }],
            Scenario::T3 => vec![sensor_bias("T3", Signal::T3, 0.04, 0.06)],
        }
    }

    pub fn class_names(self) -> Vec<String> {
        std::iter::once("Healthy")
            .chain(self.fault_classes().iter().map(|c| c.name))
            .map(String::from)
            .collect()
    }

    pub fn default_train_runs(self) -> u32 {
        match self {
            Scenario::FD001 => 10,
            _ => 20,
        }
    }

    pub fn default_test_runs(self) -> u32 {
        match self {
            Scenario::FD001 => 3,
            _ => 5,
        }
    }

    /// Fault target of each class; `None` for the healthy class.
    pub fn class_targets(self) -> Vec<Option<FaultTarget>> {
        std::iter::once(None)
            .chain(self.fault_classes().iter().map(|c| Some(c.target)))
            .collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = FdiError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FdiError::Configuration(format!("unknown scenario '{s}' (expected FD001, FD002, T2 or T3)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub scenario: Scenario,
    pub n_runs: u32,
    /// Run id of the first run; test sets start after the training runs.
    pub first_run: u32,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub noise_level: f64,
    pub simulator: Simulator,
}

impl GenerationConfig {
    pub fn new(scenario: Scenario, n_runs: u32, duration: f64, dt: f64, seed: u64) -> Self {
        Self {
            scenario,
            n_runs,
            first_run: 0,
            duration,
            dt,
            seed,
            noise_level: FaultSchedule::default().noise_level(),
            simulator: Simulator::default(),
        }
    }
}

/// Everything drawn at random for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub run_id: u32,
    pub class: usize,
    pub profile: CommandProfile,
    pub schedule: FaultSchedule,
    pub noise_seed: u64,
}

/// Draws the command profile, fault class, magnitude and window of a run.
///
/// The class cycles through the scenario's classes with the run id. The
/// command ramps linearly across the operating range. Actuator faults
/// start between 40% and 80% of the run and persist; sensor faults occupy a
/// window of 20% to 60% of the run starting no earlier than 10% and ending
/// no later than 80%.
pub fn plan_run(scenario: Scenario, run_id: u32, duration: f64, seed: u64, noise_level: f64) -> Result<RunPlan> {
    let run_seed = derive_seed(seed, u64::from(run_id));
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let classes = scenario.fault_classes();
    let class = run_id as usize % (classes.len() + 1);

    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let start = rng.random_range(0.60..0.68);
    let end = rng.random_range(0.92..1.0);
    let profile = CommandProfile::PiecewiseLinear(vec![(0.0, start), (duration, end)]);

    let mut specs = Vec::new();
    if class > 0 {
        let fc = classes[class - 1];
        let magnitude = draw(&mut rng, fc.magnitude);
        let (t_start, t_end) = if fc.kind.is_sensor() {
            let length = rng.random_range(0.2..0.6) * duration;
            let onset = rng.random_range(0.1 * duration..0.8 * duration - length);
            (onset, onset + length)
        } else {
            (rng.random_range(0.4 * duration..0.8 * duration), duration)
        };
        specs.push(FaultSpec::new(fc.kind, fc.target, magnitude, t_start, t_end)?);
    }
    Ok(RunPlan {
        run_id,
        class,
        profile,
        schedule: FaultSchedule::new(specs, noise_level)?,
        noise_seed: derive_seed(run_seed, 1),
    })
}

fn simulate_run(cfg: &GenerationConfig, run_id: u32) -> Result<Vec<Sample>> {
    let plan = plan_run(cfg.scenario, run_id, cfg.duration, cfg.seed, cfg.noise_level)?;
    let traj = cfg
        .simulator
        .simulate(&plan.profile, cfg.duration, cfg.dt, &plan.schedule, plan.noise_seed)?;
    Ok(traj
        .records
        .iter()
        .map(|r| Sample {
            features: r.measured,
            label: if plan.schedule.active_faults(r.t).is_empty() {
                0
            } else {
                plan.class
            },
            t: r.t,
            run_id,
        })
        .collect())
}

/// Generates runs `first_run .. first_run + n_runs` in parallel.
pub fn generate_runs(cfg: &GenerationConfig) -> Result<Dataset> {
    if cfg.n_runs == 0 {
        return Err(FdiError::Configuration("n_runs must be >= 1".into()));
    }
    let runs: Vec<Vec<Sample>> = (cfg.first_run..cfg.first_run + cfg.n_runs)
        .into_par_iter()
        .map(|run_id| {
            simulate_run(cfg, run_id).map_err(|e| FdiError::Run {
                run_id,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Dataset::new(runs.concat(), cfg.scenario.class_names(), cfg.scenario.name())
}

pub fn generate_dataset(scenario: Scenario, n_runs: u32, duration: f64, dt: f64, seed: u64) -> Result<Dataset> {
    generate_runs(&GenerationConfig::new(scenario, n_runs, duration, dt, seed))
}
