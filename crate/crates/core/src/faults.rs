//! Time-windowed fault injection.
//!
//! Sensor faults corrupt a reading without touching the engine; actuator
//! faults change the fuel flow actually delivered to the combustor. All
//! windows are half-open, `[t_start, t_end)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FdiError, Result};
use crate::signals::Signal;

pub const DEFAULT_NOISE_LEVEL: f64 = 0.02;
pub const MAX_MAGNITUDE: f64 = 0.5;
pub const OFFSET_RANGE: (f64, f64) = (0.05, 0.15);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    /// Reading shifted by `magnitude` times the healthy nominal value.
    SensorBias,
    /// Reading scaled by `1 + magnitude`.
    SensorGain,
    /// Delivered fuel flow frozen at its value at fault onset.
    ActuatorLockInPlace,
    /// Delivered fuel flow amplified by `1 + magnitude`.
    ActuatorOffset,
}

impl FaultKind {
    pub fn is_sensor(self) -> bool {
        matches!(self, FaultKind::SensorBias | FaultKind::SensorGain)
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::SensorBias => "SensorBias",
            FaultKind::SensorGain => "SensorGain",
            FaultKind::ActuatorLockInPlace => "ActuatorLockInPlace",
            FaultKind::ActuatorOffset => "ActuatorOffset",
        }
    }
}

impl FromStr for FaultKind {
    type Err = FdiError;

    fn from_str(s: &str) -> Result<Self> {
        [
            FaultKind::SensorBias,
            FaultKind::SensorGain,
            FaultKind::ActuatorLockInPlace,
            FaultKind::ActuatorOffset,
        ]
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| FdiError::Schedule(format!("unknown fault kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultTarget {
    Sensor(Signal),
    FuelActuator,
}

impl fmt::Display for FaultTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultTarget::Sensor(s) => f.write_str(s.name()),
            FaultTarget::FuelActuator => f.write_str("FSS"),
        }
    }
}

impl FromStr for FaultTarget {
    type Err = FdiError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("FSS") || s.eq_ignore_ascii_case("fuel_actuator") {
            return Ok(FaultTarget::FuelActuator);
        }
        s.parse::<Signal>()
            .map(FaultTarget::Sensor)
            .map_err(|_| FdiError::Schedule(format!("unknown fault target '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: FaultTarget,
    /// Fractional magnitude, e.g. 0.05 for +5 %.
    pub magnitude: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl FaultSpec {
    pub fn new(kind: FaultKind, target: FaultTarget, magnitude: f64, t_start: f64, t_end: f64) -> Result<Self> {
        let spec = Self {
            kind,
            target,
            magnitude,
            t_start,
            t_end,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sensor(kind: FaultKind, signal: Signal, magnitude: f64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(kind, FaultTarget::Sensor(signal), magnitude, t_start, t_end)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start < self.t_end) {
            return Err(FdiError::Schedule(format!(
                "window must satisfy t_start < t_end, got [{}, {})",
                self.t_start, self.t_end
            )));
        }
        if !(self.magnitude.is_finite() && self.magnitude.abs() <= MAX_MAGNITUDE) {
            return Err(FdiError::Schedule(format!(
                "magnitude {} outside [-{MAX_MAGNITUDE}, {MAX_MAGNITUDE}]",
                self.magnitude
            )));
        }
        match (self.kind.is_sensor(), self.target) {
            (true, FaultTarget::FuelActuator) => {
                return Err(FdiError::Schedule(format!(
                    "{} cannot target the fuel actuator",
                    self.kind.name()
                )))
            }
            (false, FaultTarget::Sensor(s)) => {
                return Err(FdiError::Schedule(format!(
                    "{} cannot target sensor {s}",
                    self.kind.name()
                )))
            }
            _ => {}
        }
        if self.kind == FaultKind::ActuatorOffset && !(OFFSET_RANGE.0..=OFFSET_RANGE.1).contains(&self.magnitude) {
            return Err(FdiError::Schedule(format!(
                "actuator offset magnitude {} outside [{}, {}]",
                self.magnitude, OFFSET_RANGE.0, OFFSET_RANGE.1
            )));
        }
        Ok(())
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    fn overlaps(&self, other: &FaultSpec) -> bool {
        self.t_start < other.t_end && other.t_start < self.t_end
    }
}

/// Corrupts one sensor reading. `nominal` is the healthy value of the
/// signal at the current operating point and scales the bias.
pub fn apply_sensor_fault(value: f64, nominal: f64, spec: &FaultSpec, t: f64) -> Result<f64> {
    if !spec.kind.is_sensor() {
        return Err(FdiError::FaultMisuse(format!(
            "{} applied to a sensor reading",
            spec.kind.name()
        )));
    }
    if !spec.is_active(t) {
        return Ok(value);
    }
    Ok(match spec.kind {
        FaultKind::SensorGain => value * (1.0 + spec.magnitude),
        _ => value + spec.magnitude * nominal,
    })
}

/// Fuel flow delivered by a faulty actuator, L/hr. `last_healthy_flow` is
/// the flow latched at fault onset.
pub fn apply_actuator_fault(commanded_flow: f64, last_healthy_flow: f64, spec: &FaultSpec, t: f64) -> Result<f64> {
    if spec.kind.is_sensor() {
        return Err(FdiError::FaultMisuse(format!(
            "{} applied to the fuel actuator",
            spec.kind.name()
        )));
    }
    if !spec.is_active(t) {
        return Ok(commanded_flow);
    }
    Ok(match spec.kind {
        FaultKind::ActuatorLockInPlace => last_healthy_flow,
        _ => commanded_flow * (1.0 + spec.magnitude),
    })
}

/// Adds zero-mean Gaussian noise whose two-sigma band is `noise_level`
/// of the instantaneous magnitude.
pub fn add_measurement_noise<R: Rng + ?Sized>(value: f64, noise_level: f64, rng: &mut R) -> f64 {
    if noise_level <= 0.0 {
        return value;
    }
    let sigma = 0.5 * noise_level * value.abs();
    let z: f64 = StandardNormal.sample(rng);
    value + sigma * z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    specs: Vec<FaultSpec>,
    noise_level: f64,
}

impl Default for FaultSchedule {
    fn default() -> Self {
        Self {
            specs: Vec::new(),
            noise_level: DEFAULT_NOISE_LEVEL,
        }
    }
}

impl FaultSchedule {
    /// Validates every spec and rejects overlapping windows on one target.
    pub fn new(specs: Vec<FaultSpec>, noise_level: f64) -> Result<Self> {
        if !(noise_level.is_finite() && noise_level >= 0.0) {
            return Err(FdiError::Schedule(format!(
                "noise level must be >= 0, got {noise_level}"
            )));
        }
        for s in &specs {
            s.validate()?;
        }
        for (i, a) in specs.iter().enumerate() {
            for b in &specs[i + 1..] {
                if a.target == b.target && a.overlaps(b) {
                    return Err(FdiError::Schedule(format!(
                        "overlapping faults on {}: [{}, {}) and [{}, {})",
                        a.target, a.t_start, a.t_end, b.t_start, b.t_end
                    )));
                }
            }
        }
        Ok(Self { specs, noise_level })
    }

    /// No faults and no noise.
    pub fn noiseless() -> Self {
        Self {
            specs: Vec::new(),
            noise_level: 0.0,
        }
    }

    pub fn specs(&self) -> &[FaultSpec] {
        &self.specs
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Specs whose window contains `t`, in schedule order.
    pub fn active_faults(&self, t: f64) -> Vec<&FaultSpec> {
        self.specs.iter().filter(|s| s.is_active(t)).collect()
    }

    pub fn active_for(&self, target: FaultTarget, t: f64) -> Option<&FaultSpec> {
        self.specs.iter().find(|s| s.target == target && s.is_active(t))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut specs = Vec::new();
        let mut noise = DEFAULT_NOISE_LEVEL;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |detail: String| FdiError::ConfigParse { line: idx + 1, detail };
            if let Some(v) = line.strip_prefix("noise=") {
                noise = v.trim().parse().map_err(|_| err(format!("bad noise level '{v}'")))?;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(err(format!(
                    "expected kind,target,magnitude,t_start,t_end, got '{line}'"
                )));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("'{s}' is not a number")));
            specs.push(FaultSpec {
                kind: fields[0].parse()?,
                target: fields[1].parse()?,
                magnitude: num(fields[2])?,
                t_start: num(fields[3])?,
                t_end: num(fields[4])?,
            });
        }
        Self::new(specs, noise)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("noise={}\n", self.noise_level);
        for s in &self.specs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.kind.name(),
                s.target,
                s.magnitude,
                s.t_start,
                s.t_end
            ));
        }
        out
    }
}
