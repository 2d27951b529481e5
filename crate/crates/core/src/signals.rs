//! The twelve monitored signals, in the fixed column order used by every
//! trajectory, dataset and model file.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::FdiError;

pub const SIGNAL_COUNT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Signal {
    /// Fuel flow reported by the fuel supply system, L/hr.
    FuelFlow,
    /// Ambient pressure, kPa.
    P1,
    /// Ambient temperature, K.
    T1,
    /// Compressor exit pressure, kPa.
    P2,
    /// Compressor exit temperature, K.
    T2,
    /// Turbine inlet pressure, kPa.
    P3,
    /// Turbine inlet temperature, K.
    T3,
    /// Turbine exit pressure, kPa.
    P4,
    /// Turbine exit temperature, K.
    T4,
    /// Nozzle exit pressure, kPa.
    P5,
    /// Nozzle exit temperature, K.
    T5,
    /// Shaft speed, rpm.
    N,
}

impl Signal {
    pub const ALL: [Signal; SIGNAL_COUNT] = [
        Signal::FuelFlow,
        Signal::P1,
        Signal::T1,
        Signal::P2,
        Signal::T2,
        Signal::P3,
        Signal::T3,
        Signal::P4,
        Signal::T4,
        Signal::P5,
        Signal::T5,
        Signal::N,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Signal::FuelFlow => "mf",
            Signal::P1 => "P1",
            Signal::T1 => "T1",
            Signal::P2 => "P2",
            Signal::T2 => "T2",
            Signal::P3 => "P3",
            Signal::T3 => "T3",
            Signal::P4 => "P4",
            Signal::T4 => "T4",
            Signal::P5 => "P5",
            Signal::T5 => "T5",
            Signal::N => "N",
        }
    }

    /// Ambient conditions are reference constants of the test cell, not
    /// instrumented channels, so they carry no measurement noise.
    pub fn is_ambient(self) -> bool {
        matches!(self, Signal::P1 | Signal::T1)
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Signal {
    type Err = FdiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Signal::ALL
            .iter()
            .copied()
            .find(|sig| sig.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FdiError::InvalidParams(format!("unknown signal '{s}'")))
    }
}

pub fn signal_names() -> Vec<String> {
    Signal::ALL.iter().map(|s| s.name().to_string()).collect()
}
