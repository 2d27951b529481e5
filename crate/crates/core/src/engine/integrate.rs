use super::model::{evaluate_components, state_derivatives, EngineState, StateDerivative};
use super::params::EngineParams;
use crate::error::{FdiError, Result};

pub const MAX_STEP: f64 = 0.1;

const STEADY_TOLERANCE: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 60;
const MARCH_DT: f64 = 0.05;
const MARCH_MAX_TIME: f64 = 400.0;

/// State derivative at `state` for a fuel flow in kg/s.
pub fn derivative(state: &EngineState, fuel_rate: f64, params: &EngineParams) -> Result<StateDerivative> {
    let stations = evaluate_components(state, fuel_rate, params)?;
    state_derivatives(state, &stations, params)
}

/// Largest per-state derivative relative to the state magnitude, 1/s.
pub fn relative_derivative_norm(state: &EngineState, d: &StateDerivative) -> f64 {
    state
        .to_array()
        .iter()
        .zip(d.to_array())
        .map(|(x, dx)| (dx / x).abs())
        .fold(0.0, f64::max)
}

/// Advances the state by one classical RK4 step with the fuel flow held
/// constant over the step.
pub fn integrate_step(state: &EngineState, fuel_rate: f64, dt: f64, params: &EngineParams) -> Result<EngineState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(FdiError::InvalidParams(format!(
            "dt must lie in (0, {MAX_STEP}], got {dt}"
        )));
    }
    let blowup = |detail: String| FdiError::IntegrationBlowup {
        t: f64::NAN,
        dt,
        detail,
    };
    let f = |s: [f64; 3]| -> Result<[f64; 3]> {
        derivative(&EngineState::from_array(s), fuel_rate, params)
            .map(|d| d.to_array())
            .map_err(|e| blowup(format!("stage evaluation at {s:?}: {e}")))
    };
    let x = state.to_array();
    let k1 = f(x)?;
    let k2 = f(axpy(&x, 0.5 * dt, &k1))?;
    let k3 = f(axpy(&x, 0.5 * dt, &k2))?;
    let k4 = f(axpy(&x, dt, &k3))?;
    let mut next = [0.0; 3];
    for i in 0..3 {
        next[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = EngineState::from_array(next);
    if !next.is_valid(params) {
        return Err(blowup(format!(
            "state left the admissible region: {state:?} -> {next:?} (k1={k1:?})"
        )));
    }
    Ok(next)
}

fn axpy(x: &[f64; 3], a: f64, y: &[f64; 3]) -> [f64; 3] {
    [x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]]
}

fn residual(x: &[f64; 3], fuel_rate: f64, params: &EngineParams) -> Result<[f64; 3]> {
    let d = derivative(&EngineState::from_array(*x), fuel_rate, params)?.to_array();
    Ok([d[0] / x[0], d[1] / x[1], d[2] / x[2]])
}

fn norm(r: &[f64; 3]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Equilibrium state for a constant fuel flow (kg/s).
///
/// Damped Newton iteration on the relative derivative, with a numerical
/// Jacobian and backtracking. When Newton stalls from the initial guess the
/// search falls back to marching the dynamics forward and restarts Newton
/// from there.
pub fn steady_state(fuel_rate: f64, params: &EngineParams) -> Result<EngineState> {
    params.validate()?;
    if !(fuel_rate.is_finite() && fuel_rate > 0.0) {
        return Err(FdiError::InvalidParams(format!(
            "fuel rate must be > 0, got {fuel_rate}"
        )));
    }
    let guess = initial_guess(fuel_rate, params);
    match newton(guess, fuel_rate, params) {
        Ok(s) => Ok(s),
        Err(_) => {
            let marched = march(guess, fuel_rate, params)?;
            newton(marched, fuel_rate, params)
        }
    }
}

fn initial_guess(fuel_rate: f64, params: &EngineParams) -> [f64; 3] {
    // Rough power-law fit of the default map's operating line, scaled to the
    // reference conditions. Only needs to land inside Newton's basin.
    let lph = fuel_rate * 3600.0 / params.fuel_density;
    let p1 = params.ambient_pressure;
    let p2 = p1 * (1.0 + 0.125 * lph).max(1.2);
    let p4 = p1 * 1.06;
    let speed = params.reference_speed * (0.058 * lph).clamp(0.3, 1.2);
    [p2, p4, speed]
}

fn newton(start: [f64; 3], fuel_rate: f64, params: &EngineParams) -> Result<EngineState> {
    let mut x = start;
    let mut r = residual(&x, fuel_rate, params)?;
    let mut rn = norm(&r);
    for _ in 0..NEWTON_MAX_ITER {
        if rn < STEADY_TOLERANCE {
            return Ok(EngineState::from_array(x));
        }
        let jac = jacobian(&x, fuel_rate, params)?;
        let dx = solve3(&jac, &[-r[0], -r[1], -r[2]])
            .ok_or_else(|| FdiError::Numerical("singular Jacobian in steady-state search".into()))?;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-6 {
            let trial = axpy(&x, step, &dx);
            if let Ok(rt) = residual(&trial, fuel_rate, params) {
                let tn = norm(&rt);
                if tn.is_finite() && tn < rn {
                    x = trial;
                    r = rt;
                    rn = tn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn < STEADY_TOLERANCE {
        Ok(EngineState::from_array(x))
    } else {
        Err(FdiError::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual: rn,
        })
    }
}

fn march(start: [f64; 3], fuel_rate: f64, params: &EngineParams) -> Result<[f64; 3]> {
    let mut s = EngineState::from_array(start);
    let steps = (MARCH_MAX_TIME / MARCH_DT) as usize;
    let mut last = f64::INFINITY;
    for _ in 0..steps {
        s = integrate_step(&s, fuel_rate, MARCH_DT, params).map_err(|_| FdiError::NoConvergence {
            iterations: 0,
            residual: last,
        })?;
        let d = derivative(&s, fuel_rate, params)?;
        last = relative_derivative_norm(&s, &d);
        if last < 1e-6 {
            break;
        }
    }
    Ok(s.to_array())
}

fn jacobian(x: &[f64; 3], fuel_rate: f64, params: &EngineParams) -> Result<[[f64; 3]; 3]> {
    let mut j = [[0.0; 3]; 3];
    for col in 0..3 {
        let h = 1e-6 * x[col].abs().max(1.0);
        let mut xp = *x;
        let mut xm = *x;
        xp[col] += h;
        xm[col] -= h;
        let rp = residual(&xp, fuel_rate, params)?;
        let rm = residual(&xm, fuel_rate, params)?;
        for row in 0..3 {
            j[row][col] = (rp[row] - rm[row]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// Gaussian elimination with partial pivoting.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][3] - s) / m[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
