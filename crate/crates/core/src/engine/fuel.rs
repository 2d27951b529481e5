use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{FdiError, Result};

/// First-order-plus-dead-time surrogate for the fuel supply servo chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelSupplyParams {
    /// Steady-state gain, L/hr per unit pulse command.
    pub gain: f64,
    /// Time constant, s.
    pub time_constant: f64,
    /// Transport delay, s.
    pub dead_time: f64,
    /// Lower saturation bound, L/hr.
    pub min_flow: f64,
    /// Upper saturation bound, L/hr.
    pub max_flow: f64,
}

impl Default for FuelSupplyParams {
    fn default() -> Self {
        // full command delivers the maximum flow
        Self {
            gain: 16.0,
            time_constant: 0.8,
            dead_time: 0.2,
            min_flow: 0.0,
            max_flow: 16.0,
        }
    }
}

impl FuelSupplyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_constant.is_finite() && self.time_constant > 0.0) {
            return Err(FdiError::InvalidParams(format!(
                "fuel supply time constant must be > 0, got {}",
                self.time_constant
            )));
        }
        if !(self.dead_time.is_finite() && self.dead_time >= 0.0) {
            return Err(FdiError::InvalidParams(format!(
                "fuel supply dead time must be >= 0, got {}",
                self.dead_time
            )));
        }
        if !(self.gain.is_finite() && self.min_flow.is_finite() && self.max_flow.is_finite())
            || self.min_flow > self.max_flow
        {
            return Err(FdiError::InvalidParams(
                "fuel supply bounds must satisfy min <= max".into(),
            ));
        }
        Ok(())
    }
}

/// Discrete-time state of the fuel supply: the command delay line and the
/// current output.
///
/// The lag is discretised exactly under a zero-order hold, so a step
/// response sampled at multiples of `dt` lies on the continuous curve
/// `K (1 - exp(-(t - theta) / tau))`. The dead time is rounded to a whole
/// number of samples.
#[derive(Debug, Clone)]
pub struct FuelSupply {
    params: FuelSupplyParams,
    dt: f64,
    decay: f64,
    delay_line: VecDeque<f64>,
    output: f64,
}

impl FuelSupply {
    /// Creates a supply at rest with zero command history and zero output.
    pub fn new(params: FuelSupplyParams, dt: f64) -> Result<Self> {
        Self::with_initial_command(params, dt, 0.0)
    }

    /// Creates a supply already settled at `command`.
    pub fn with_initial_command(params: FuelSupplyParams, dt: f64, command: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FdiError::InvalidParams(format!("dt must be > 0, got {dt}")));
        }
        let delay_samples = (params.dead_time / dt).round() as usize;
        let command = sanitize(command);
        let output = (params.gain * command).clamp(params.min_flow, params.max_flow);
        Ok(Self {
            params,
            dt,
            decay: (-dt / params.time_constant).exp(),
            delay_line: std::iter::repeat_n(command, delay_samples).collect(),
            output,
        })
    }

    pub fn output(&self) -> f64 {
        self.output
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &FuelSupplyParams {
        &self.params
    }

    /// Steady-state flow for a constant command, L/hr.
    pub fn steady_flow(&self, command: f64) -> f64 {
        (self.params.gain * sanitize(command)).clamp(self.params.min_flow, self.params.max_flow)
    }

    /// Advances one sample with the given pulse command and returns the new
    /// fuel flow in L/hr.
    pub fn step(&mut self, command: f64) -> f64 {
        let command = sanitize(command);
        let delayed = if self.delay_line.is_empty() {
            command
        } else {
            self.delay_line.push_back(command);
            self.delay_line.pop_front().unwrap_or(command)
        };
        let target = self.params.gain * delayed;
        let next = self.decay * self.output + (1.0 - self.decay) * target;
        self.output = next.clamp(self.params.min_flow, self.params.max_flow);
        self.output
    }
}

fn sanitize(command: f64) -> f64 {
    if command.is_finite() {
        command.max(0.0)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_command_stays_zero() {
        let mut fss = FuelSupply::new(FuelSupplyParams::default(), 0.1).unwrap();
        for _ in 0..100 {
            assert_eq!(fss.step(0.0), 0.0);
        }
    }

    #[test]
    fn unit_step_matches_analytic_response() {
        let params = FuelSupplyParams {
            gain: 10.0,
            max_flow: 100.0,
            ..FuelSupplyParams::default()
        };
        let dt = 0.1;
        let mut fss = FuelSupply::new(params, dt).unwrap();
        // y(n dt) after n steps
        let mut y = vec![fss.output()];
        for _ in 0..40 {
            y.push(fss.step(1.0));
        }
        for (n, yn) in y.iter().enumerate() {
            let t = n as f64 * dt;
            if t < params.dead_time - 1e-9 {
                assert!(yn.abs() < 1e-12, "t={t} y={yn}");
            } else {
                let expected = 10.0 * (1.0 - (-(t - params.dead_time) / params.time_constant).exp());
                assert_relative_eq!(*yn, expected, epsilon = 1e-9);
            }
        }
        // t = theta + tau
        assert_relative_eq!(y[10], 0.632 * 10.0, epsilon = 0.01);
    }

    #[test]
    fn saturation_pins_output() {
        let mut fss = FuelSupply::new(FuelSupplyParams::default(), 0.1).unwrap();
        let mut last = 0.0;
        for _ in 0..200 {
            last = fss.step(3.0);
            assert!(last <= 16.0);
        }
        assert_eq!(last, 16.0);
    }

    #[test]
    fn settled_supply_holds_its_level() {
        let mut fss = FuelSupply::with_initial_command(FuelSupplyParams::default(), 0.1, 0.7).unwrap();
        let y0 = fss.output();
        for _ in 0..50 {
            assert_relative_eq!(fss.step(0.7), y0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_dt_and_tau() {
        assert!(FuelSupply::new(FuelSupplyParams::default(), 0.0).is_err());
        let bad = FuelSupplyParams {
            time_constant: 0.0,
            ..FuelSupplyParams::default()
        };
        assert!(FuelSupply::new(bad, 0.1).is_err());
    }
}
