//! Explicit Runge–Kutta integration of `dy/dt = f(t, y)` on flat state
//! vectors: classical RK4 with a fixed step, and Dormand–Prince 5(4) with a
//! PI step-size controller.
//!
//! Both methods land exactly on every requested output time; no dense
//! output is used, so samples are as accurate as interior steps.

use serde::{Deserialize, Serialize};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with step at most `dt`.
    Rk4Fixed { dt: f64 },
    /// Embedded 5(4) pair; `tol` is used as both absolute and relative
    /// tolerance.
    Adaptive { tol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Adaptive { tol: 1e-10 }
    }
}

impl Method {
    pub fn validate(&self) -> crate::Result<()> {
        let (name, v) = match self {
            Method::Rk4Fixed { dt } => ("dt", *dt),
            Method::Adaptive { tol } => ("tol", *tol),
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(crate::Error::Invalid(format!("{name} must be positive, got {v}")))
        }
    }
}

/// Returned by the per-step observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Termination {
    Completed,
    /// The observer asked to stop at time `t`.
    Stopped {
        t: f64,
    },
    /// The adaptive step fell below the underflow threshold at `t`.
    StepUnderflow {
        t: f64,
    },
    /// The state stopped being finite at `t`.
    NonFinite {
        t: f64,
    },
    /// The step budget ran out at `t`.
    StepLimit {
        t: f64,
    },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

/// States at the output times reached, plus how integration ended.
#[derive(Debug, Clone)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub termination: Termination,
    /// Time and state at the last accepted step (differs from the last
    /// sample when integration stopped between outputs).
    pub last_t: f64,
    pub last_state: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

/// Tuning knobs shared by both methods.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub method: Method,
    /// Abort when the adaptive step drops below `underflow · |t_end − t0|`.
    pub underflow: f64,
    pub max_steps: usize,
}

impl Options {
    pub fn new(method: Method) -> Self {
        Self { method, underflow: 1e-14, max_steps: 50_000_000 }
    }
}

/// Integrates from `(t0, y0)` through the monotone sequence `outputs`
/// (all on the same side of `t0`). `observer` sees every accepted step.
pub fn solve<F, O>(mut rhs: F, t0: f64, y0: &[f64], outputs: &[f64], opts: &Options, mut observer: O) -> Solution
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]) -> Control,
{
    let mut sol = Solution {
        times: Vec::with_capacity(outputs.len()),
        states: Vec::with_capacity(outputs.len()),
        termination: Termination::Completed,
        last_t: t0,
        last_state: y0.to_vec(),
        accepted: 0,
        rejected: 0,
    };
    let Some(&t_end) = outputs.last() else {
        return sol;
    };
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut stepper = Stepper::new(y0.len());
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h_adapt = initial_step(&opts.method, span);
    let mut err_prev: f64 = 1e-4;

    for &target in outputs {
        while (target - t) * dir > 0.0 {
            if sol.accepted >= opts.max_steps {
                sol.termination = Termination::StepLimit { t };
                return finish(sol, t, y);
            }
            let remaining = (target - t).abs();
            match opts.method {
                Method::Rk4Fixed { dt } => {
                    // equal substeps that land on the target
                    let n = (remaining / dt - 1e-9).ceil().max(1.0);
                    let h = if n <= 1.0 { remaining } else { remaining / n };
                    stepper.rk4(&mut rhs, t, &y, h * dir);
                    y.copy_from_slice(&stepper.out);
                    t = if n <= 1.0 { target } else { t + h * dir };
                    sol.accepted += 1;
                }
                Method::Adaptive { tol } => {
                    let h = h_adapt.min(remaining);
                    if h < opts.underflow * span.max(f64::MIN_POSITIVE) && h < remaining {
                        sol.termination = Termination::StepUnderflow { t };
                        return finish(sol, t, y);
                    }
                    let err = stepper.dopri(&mut rhs, t, &y, h * dir, tol);
                    if err <= 1.0 {
                        y.copy_from_slice(&stepper.out);
                        t = if h == remaining { target } else { t + h * dir };
                        sol.accepted += 1;
                        let factor = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                        h_adapt = h * factor.clamp(0.2, 5.0);
                        err_prev = err.max(1e-4);
                    } else {
                        sol.rejected += 1;
                        let factor = if err.is_finite() { 0.9 * err.powf(-1.0 / 5.0) } else { 0.1 };
                        h_adapt = h * factor.clamp(0.1, 0.9);
                        continue;
                    }
                }
            }
            if y.iter().any(|v| !v.is_finite()) {
                sol.termination = Termination::NonFinite { t };
                return finish(sol, t, y);
            }
            if observer(t, &y) == Control::Stop {
                sol.termination = Termination::Stopped { t };
                return finish(sol, t, y);
            }
        }
        sol.times.push(t);
        sol.states.push(y.clone());
    }
    finish(sol, t, y)
}

fn finish(mut sol: Solution, t: f64, y: Vec<f64>) -> Solution {
    sol.last_t = t;
    sol.last_state = y;
    sol
}

fn initial_step(method: &Method, span: f64) -> f64 {
    match method {
        Method::Rk4Fixed { dt } => *dt,
        Method::Adaptive { tol } => (span * 1e-3).max(f64::MIN_POSITIVE) * (tol / 1e-10).powf(0.2).min(1.0),
    }
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

struct Stepper {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    out: Vec<f64>,
}

impl Stepper {
    fn new(dim: usize) -> Self {
        Self { k: vec![vec![0.0; dim]; 7], tmp: vec![0.0; dim], out: vec![0.0; dim] }
    }

    fn rk4<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &[f64], h: f64) {
        let dim = y.len();
        rhs(t, y, &mut self.k[0]);
        for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..dim {
                self.tmp[i] = y[i] + frac * h * self.k[stage - 1][i];
            }
            rhs(t + frac * h, &self.tmp, &mut self.k[stage]);
        }
        for i in 0..dim {
            self.out[i] = y[i] + h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }

    /// One Dormand–Prince step; returns the scaled RMS error estimate.
    fn dopri<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &[f64], h: f64, tol: f64) -> f64 {
        let dim = y.len();
        rhs(t, y, &mut self.k[0]);
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            rhs(t + C[s] * h, &self.tmp, &mut self.k[s]);
        }
        // stage 7 is evaluated at the 5th-order solution
        self.out.copy_from_slice(&self.tmp);
        let mut sum = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * self.k[s][i];
            }
            let scale = tol + tol * y[i].abs().max(self.out[i].abs());
            sum += (h * e / scale).powi(2);
        }
        (sum / dim.max(1) as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -y[0];
        dy[1] = y[0] - 0.5 * y[1];
    }

    fn exact(t: f64) -> [f64; 2] {
        let a = (-t).exp();
        [a, 2.0 * ((-0.5 * t).exp() - a) + (-0.5 * t).exp()]
    }

    #[test]
    fn adaptive_hits_output_times_and_tolerance() {
        let outs = [0.3, 1.0, 2.5, 7.0];
        let sol = solve(decay, 0.0, &[1.0, 1.0], &outs, &Options::new(Method::Adaptive { tol: 1e-11 }), |_, _| {
            Control::Continue
        });
        assert!(sol.termination.is_completed());
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert!(outs.contains(t));
            let e = exact(*t);
            assert!((y[0] - e[0]).abs() < 1e-9 && (y[1] - e[1]).abs() < 1e-9, "{t} {y:?} {e:?}");
        }
    }

    #[test]
    fn rk4_error_shrinks_at_fourth_order() {
        let err = |dt: f64| {
            let sol = solve(decay, 0.0, &[1.0, 1.0], &[2.0], &Options::new(Method::Rk4Fixed { dt }), |_, _| {
                Control::Continue
            });
            (sol.states[0][1] - exact(2.0)[1]).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn backward_integration_and_observer_stop() {
        let sol = solve(decay, 2.0, &exact(2.0), &[0.0], &Options::new(Method::Adaptive { tol: 1e-12 }), |_, _| {
            Control::Continue
        });
        assert!((sol.states[0][0] - 1.0).abs() < 1e-9);
        let stopped = solve(decay, 0.0, &[1.0, 1.0], &[10.0], &Options::new(Method::Adaptive { tol: 1e-8 }), |_, y| {
            if y[0] < 0.5 {
                Control::Stop
            } else {
                Control::Continue
            }
        });
        assert!(matches!(stopped.termination, Termination::Stopped { .. }));
        assert!(stopped.times.is_empty());
        assert!(stopped.last_state[0] < 0.5);
    }

    #[test]
    fn blow_up_reports_underflow() {
        let sol = solve(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            0.0,
            &[1.0],
            &[2.0],
            &Options::new(Method::Adaptive { tol: 1e-10 }),
            |_, _| Control::Continue,
        );
        match sol.termination {
            Termination::StepUnderflow { t } | Termination::NonFinite { t } => assert!((t - 1.0).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
    }
}
