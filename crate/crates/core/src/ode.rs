//! Explicit Runge–Kutta integrators for small dense ODE systems.
//!
//! Two schemes: classical fixed-step RK4 and Dormand–Prince 5(4) with
//! PI-free step control. Both report the state at a list of stop times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("stop times must be monotone away from the initial time")]
    BadStops,
}

impl OdeError {
    /// Last time the state was known to be good.
    pub fn last_good(&self) -> Option<f64> {
        match self {
            OdeError::NonFinite { t } | OdeError::StepUnderflow { t } | OdeError::MaxSteps { t, .. } => {
                Some(*t)
            }
            OdeError::BadStops => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Rk4 { dt: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45 { rtol: 1e-10, atol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    2_000_000
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { method: Method::default(), max_steps: default_max_steps() }
    }
}

impl OdeConfig {
    pub fn rk4(dt: f64) -> Self {
        Self { method: Method::Rk4 { dt }, ..Self::default() }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self { method: Method::Rk45 { rtol, atol }, ..Self::default() }
    }
}

/// Integrates `y' = f(t, y)` from `t0` and returns the state at each of `stops`.
///
/// `stops` must be monotone in the direction away from `t0`; a stop equal to `t0` returns `y0`.
pub fn solve<F>(mut f: F, t0: f64, y0: &[f64], stops: &[f64], cfg: &OdeConfig) -> Result<Vec<Vec<f64>>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dir = stops
        .iter()
        .map(|&s| s - t0)
        .find(|d| *d != 0.0)
        .map(f64::signum)
        .unwrap_or(1.0);
    let mut prev = t0;
    for &s in stops {
        if (s - prev) * dir < 0.0 || !s.is_finite() {
            return Err(OdeError::BadStops);
        }
        prev = s;
    }

    let mut stepper = Stepper::new(y0.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h_guess: Option<f64> = None;
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(stops.len());
    for &stop in stops {
        match cfg.method {
            Method::Rk4 { dt } => {
                let span = stop - t;
                if span != 0.0 {
                    let n = (span.abs() / dt).ceil().max(1.0) as usize;
                    let h = span / n as f64;
                    for i in 0..n {
                        stepper.rk4(&mut f, t, &mut y, h);
                        t = if i + 1 == n { stop } else { t + h };
                        if y.iter().any(|v| !v.is_finite()) {
                            return Err(OdeError::NonFinite { t });
                        }
                        steps += 1;
                        if steps > cfg.max_steps {
                            return Err(OdeError::MaxSteps { t, max_steps: cfg.max_steps });
                        }
                    }
                }
            }
            Method::Rk45 { rtol, atol } => {
                while (stop - t) * dir > 0.0 {
                    let remaining = stop - t;
                    let mut h = match h_guess {
                        Some(h) => h,
                        None => stepper.initial_step(&mut f, t, &y, dir, rtol, atol),
                    };
                    let last = h.abs() >= remaining.abs();
                    if last {
                        h = remaining;
                    }
                    let (err, ok_finite) = stepper.dopri(&mut f, t, &y, h, rtol, atol);
                    steps += 1;
                    if steps > cfg.max_steps {
                        return Err(OdeError::MaxSteps { t, max_steps: cfg.max_steps });
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if ok_finite && err <= 1.0 {
                        t = if last { stop } else { t + h };
                        y.copy_from_slice(&stepper.y_new);
                        // The clipped last step says nothing about the natural step size.
                        if !last || h_guess.is_none() {
                            h_guess = Some(h * factor);
                        }
                    } else {
                        let shrink = if ok_finite { factor.min(0.9) } else { 0.25 };
                        let h_new = h * shrink;
                        if h_new.abs() <= 1e-14 * t.abs().max(1.0) {
                            return Err(if ok_finite {
                                OdeError::StepUnderflow { t }
                            } else {
                                OdeError::NonFinite { t }
                            });
                        }
                        h_guess = Some(h_new);
                    }
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Convenience wrapper for a single end time.
pub fn solve_to<F>(f: F, t0: f64, y0: &[f64], t1: f64, cfg: &OdeConfig) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    Ok(solve(f, t0, y0, &[t1], cfg)?.pop().expect("one stop"))
}

struct Stepper {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

// Dormand–Prince 5(4) tableau.
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
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl Stepper {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }

    fn rk4<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, f: &mut F, t: f64, y: &mut [f64], h: f64) {
        let n = y.len();
        f(t, y, &mut self.k[0]);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k[0][i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k[1]);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k[1][i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k[2]);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k[2][i];
        }
        f(t + h, &self.tmp, &mut self.k[3]);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
    }

    /// One trial step; returns the scaled error norm and whether the result is finite.
    fn dopri<F: FnMut(f64, &[f64], &mut [f64])>(
        &mut self,
        f: &mut F,
        t: f64,
        y: &[f64],
        h: f64,
        rtol: f64,
        atol: f64,
    ) -> (f64, bool) {
        let n = y.len();
        f(t, y, &mut self.k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let (head, tail) = self.k.split_at_mut(s);
            let _ = head;
            f(t + C[s] * h, &self.tmp, &mut tail[0]);
        }
        let mut sum = 0.0;
        let mut finite = true;
        for i in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * self.k[s][i];
                lo += B4[s] * self.k[s][i];
            }
            let yn = y[i] + h * hi;
            self.y_new[i] = yn;
            if !yn.is_finite() {
                finite = false;
            }
            let sc = atol + rtol * y[i].abs().max(yn.abs());
            let e = h * (hi - lo) / sc;
            sum += e * e;
        }
        let err = (sum / n.max(1) as f64).sqrt();
        if !err.is_finite() {
            return (f64::INFINITY, false);
        }
        (err, finite)
    }

    fn initial_step<F: FnMut(f64, &[f64], &mut [f64])>(
        &mut self,
        f: &mut F,
        t: f64,
        y: &[f64],
        dir: f64,
        rtol: f64,
        atol: f64,
    ) -> f64 {
        let n = y.len().max(1) as f64;
        f(t, y, &mut self.k[0]);
        let scale = |v: f64| atol + rtol * v.abs();
        let d0 = (y.iter().map(|v| (v / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (y.iter().zip(&self.k[0]).map(|(v, k)| (k / scale(*v)).powi(2)).sum::<f64>() / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        for i in 0..y.len() {
            self.tmp[i] = y[i] + dir * h0 * self.k[0][i];
        }
        f(t + dir * h0, &self.tmp, &mut self.k[1]);
        let d2 = (y
            .iter()
            .zip(self.k[1].iter().zip(&self.k[0]))
            .map(|(v, (k1, k0))| ((k1 - k0) / scale(*v)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        dir * (100.0 * h0).min(h1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn rk45_harmonic_oscillator() {
        let stops = [0.5, 1.0, 10.0];
        let out = solve(oscillator, 0.0, &[1.0, 0.0], &stops, &OdeConfig::default()).unwrap();
        for (s, y) in stops.iter().zip(&out) {
            assert!((y[0] - s.cos()).abs() < 1e-9, "{s}: {}", y[0] - s.cos());
            assert!((y[1] + s.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_integration() {
        let y = solve_to(oscillator, 1.0, &[1.0f64.cos(), -1.0f64.sin()], -2.0, &OdeConfig::default()).unwrap();
        assert!((y[0] - (-2.0f64).cos()).abs() < 1e-9);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |dt: f64| {
            let y = solve_to(oscillator, 0.0, &[1.0, 0.0], 2.0, &OdeConfig::rk4(dt)).unwrap();
            (y[0] - 2.0f64.cos()).abs()
        };
        let ratio = err(0.05) / err(0.025);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn stop_at_start_returns_initial_state() {
        let out = solve(oscillator, 0.3, &[2.0, 1.0], &[0.3, 0.3], &OdeConfig::default()).unwrap();
        assert_eq!(out, vec![vec![2.0, 1.0], vec![2.0, 1.0]]);
    }

    #[test]
    fn non_monotone_stops_rejected() {
        let r = solve(oscillator, 0.0, &[1.0, 0.0], &[1.0, 0.5], &OdeConfig::default());
        assert_eq!(r.unwrap_err(), OdeError::BadStops);
    }

    #[test]
    fn blow_up_is_reported() {
        let r = solve_to(|_, y, dy| dy[0] = y[0] * y[0], 0.0, &[1.0], 2.0, &OdeConfig::default());
        let e = r.unwrap_err();
        assert!(e.last_good().unwrap() < 1.0 + 1e-6, "{e:?}");
    }
}
