//! Cubic Langevin diffusion `dX = (c1 X - c3 X^3) dt + s X dB` integrated
//! by the tamed Euler–Maruyama scheme
//!
//! ```text
//! X += mu(X) h / (1 + h |mu(X)|) + s X sqrt(h) xi
//! ```
//!
//! Taming bounds the drift increment by one unit per step, which keeps the
//! explicit scheme stable under the superlinear drift.

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::rng::PathRng;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest admissible `dt * max(|c1|, s^2)`.
pub const STABILITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct LangevinCubicModel<T> {
    pub c1: T,
    pub c3: T,
    pub s: T,
}

impl<T: Scalar> Default for LangevinCubicModel<T> {
    fn default() -> Self {
        Self {
            c1: T::lit(1.5),
            c3: T::one(),
            s: T::one(),
        }
    }
}

impl<T: Scalar> LangevinCubicModel<T> {
    pub fn new(c1: T, c3: T, s: T) -> Result<Self> {
        if !(c3 > T::zero()) {
            return Err(Error::InvalidModel(format!("c3 must be positive (got {c3})")));
        }
        Ok(Self { c1, c3, s })
    }

    pub fn drift(&self, x: T) -> T {
        self.c1 * x - self.c3 * x * x * x
    }

    pub fn check_step(&self, dt: T) -> Result<()> {
        let scale = self.c1.abs().max(self.s * self.s);
        if !(dt > T::zero()) || dt * scale > T::lit(STABILITY_LIMIT) {
            return Err(Error::Precondition(format!(
                "dt = {dt} too large for the tamed scheme: need dt * max(|c1|, s^2) <= {STABILITY_LIMIT}"
            )));
        }
        Ok(())
    }

    /// One tamed step of size `h` with standard normal `xi`.
    #[inline]
    pub fn step(&self, x: T, h: T, sqrt_h: T, xi: T) -> T {
        let mu = self.drift(x);
        x + mu * h / (T::one() + h * mu.abs()) + self.s * x * sqrt_h * xi
    }

    /// Integrates to each sorted record time, using equal sub-steps no
    /// larger than `dt` inside every segment. Once the state stops being
    /// finite the remaining values are NaN and the path is flagged diverged.
    pub fn integrate(&self, x: T, dt: T, record_times: &[T], rng: &mut PathRng) -> (Vec<T>, bool) {
        let mut state = x;
        let mut t_prev = T::zero();
        let mut diverged = false;
        let mut out = Vec::with_capacity(record_times.len());
        for &r in record_times {
            let span = r - t_prev;
            if span > T::zero() && !diverged {
                let steps = (span / dt - T::lit(1e-9)).ceil().max(T::one());
                let h = span / steps;
                let sqrt_h = h.sqrt();
                let n = steps.to_usize().unwrap_or(usize::MAX);
                for _ in 0..n {
                    let xi = T::lit(rng.normal());
                    state = self.step(state, h, sqrt_h, xi);
                }
                if !state.is_finite() {
                    diverged = true;
                }
            }
            t_prev = r;
            out.push(if diverged { T::nan() } else { state });
        }
        (out, diverged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinPath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub diverged: bool,
}

pub fn simulate_langevin<T: Scalar>(
    model: &LangevinCubicModel<T>,
    x: T,
    cfg: &SimConfig<T>,
    path_index: u64,
) -> Result<LangevinPath<T>> {
    cfg.validate()?;
    model.check_step(cfg.dt)?;
    let times = cfg.record_times();
    let mut rng = PathRng::new(cfg.master_seed, path_index);
    let (values, diverged) = model.integrate(x, cfg.dt, &times, &mut rng);
    Ok(LangevinPath { times, values, diverged })
}
