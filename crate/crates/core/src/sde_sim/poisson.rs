//! Cubic drift driven by a unit-rate Poisson process with state-dependent
//! jump size:
//!
//! ```text
//! dX = (a X - b X^3) dt + sigma(X_-) dN_t
//! ```
//!
//! Jump times are exact (cumulative unit exponentials) and the state
//! follows the closed-form flow between jumps, so paths carry no
//! discretisation error.

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::flow::exact_cubic_flow;
use super::rng::PathRng;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Built-in bounded Lipschitz jump-size functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields, bound = "T: Scalar")]
pub enum SigmaSpec<T> {
    Constant { c: T },
    /// `c0 + c1 sin(x)`.
    Sinusoidal { c0: T, c1: T },
}

impl<T: Scalar> SigmaSpec<T> {
    pub fn eval(&self, x: T) -> T {
        match *self {
            SigmaSpec::Constant { c } => c,
            SigmaSpec::Sinusoidal { c0, c1 } => c0 + c1 * x.sin(),
        }
    }

    /// Smallest valid Lipschitz constant.
    pub fn natural_lipschitz(&self) -> T {
        match *self {
            SigmaSpec::Constant { .. } => T::zero(),
            SigmaSpec::Sinusoidal { c1, .. } => c1.abs(),
        }
    }
}

/// Probe grid used to check the global bounds on sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            min: -50.0,
            max: 50.0,
            count: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PoissonCubicModel<T> {
    pub a: T,
    pub b: T,
    pub sigma: SigmaSpec<T>,
    /// Lower bound of sigma.
    pub m: T,
    /// Upper bound of sigma.
    #[serde(rename = "M")]
    pub big_m: T,
    pub lip_sigma: T,
}

impl<T: Scalar> PoissonCubicModel<T> {
    pub fn new(a: T, b: T, sigma: SigmaSpec<T>, m: T, big_m: T, lip_sigma: T) -> Result<Self> {
        Self::with_probe(a, b, sigma, m, big_m, lip_sigma, ProbeGrid::default())
    }

    pub fn with_probe(a: T, b: T, sigma: SigmaSpec<T>, m: T, big_m: T, lip_sigma: T, probe: ProbeGrid) -> Result<Self> {
        let model = Self {
            a,
            b,
            sigma,
            m,
            big_m,
            lip_sigma,
        };
        let problems = model.violations(probe);
        if problems.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(problems.join("; ")))
        }
    }

    /// All invariant violations, checked on the probe grid.
    pub fn violations(&self, probe: ProbeGrid) -> Vec<String> {
        let mut out = Vec::new();
        let zero = T::zero();
        if !(self.a > zero) {
            out.push(format!("a must be positive (got {})", self.a));
        }
        if !(self.b > zero) {
            out.push(format!("b must be positive (got {})", self.b));
        }
        if !(self.m > zero) {
            out.push(format!("m must be positive (got {})", self.m));
        }
        if !(self.m < self.big_m) {
            out.push(format!("need m < M (got m = {}, M = {})", self.m, self.big_m));
        }
        if !(self.lip_sigma >= zero) {
            out.push(format!("lip_sigma must be nonnegative (got {})", self.lip_sigma));
        }
        if probe.count < 2 || !(probe.max > probe.min) {
            out.push("probe grid needs count >= 2 and max > min".into());
            return out;
        }
        let tol = T::lit(1e-12);
        let xs: Vec<T> = (0..probe.count)
            .map(|i| T::lit(probe.min + (probe.max - probe.min) * i as f64 / (probe.count - 1) as f64))
            .collect();
        let vals: Vec<T> = xs.iter().map(|x| self.sigma.eval(*x)).collect();
        if let Some(i) = vals.iter().position(|v| *v < self.m - tol) {
            out.push(format!("sigma({}) = {} violates the lower bound m = {}", xs[i], vals[i], self.m));
        }
        if let Some(i) = vals.iter().position(|v| *v > self.big_m + tol) {
            out.push(format!("sigma({}) = {} violates the upper bound M = {}", xs[i], vals[i], self.big_m));
        }
        'lip: for stride in [1usize, 7, 101, 997] {
            for i in 0..xs.len().saturating_sub(stride) {
                let j = i + stride;
                let lhs = (vals[i] - vals[j]).abs();
                let rhs = self.lip_sigma * (xs[i] - xs[j]).abs();
                if lhs > rhs + tol {
                    out.push(format!(
                        "|sigma({}) - sigma({})| = {} exceeds lip_sigma * |x - y| = {}",
                        xs[i], xs[j], lhs, rhs
                    ));
                    break 'lip;
                }
            }
        }
        out
    }

    pub fn equilibrium(&self) -> T {
        (self.a / self.b).sqrt()
    }

    pub fn flow(&self, x: T, t: T) -> T {
        exact_cubic_flow(x, t, self.a, self.b)
    }

    /// Post-jump state.
    pub fn jump(&self, x: T) -> T {
        x + self.sigma.eval(x)
    }

    /// Deterministic path for given jump times, observed at sorted
    /// `record_times`. A jump at exactly a record time is included.
    pub fn evolve(&self, x: T, jump_times: &[T], record_times: &[T]) -> Vec<T> {
        let mut state = x;
        let mut t_state = T::zero();
        let mut jumps = jump_times.iter().peekable();
        record_times
            .iter()
            .map(|&r| {
                while let Some(&&tau) = jumps.peek() {
                    if tau > r {
                        break;
                    }
                    state = self.jump(self.flow(state, tau - t_state));
                    t_state = tau;
                    jumps.next();
                }
                self.flow(state, r - t_state)
            })
            .collect()
    }
}

/// Jump times of a unit-rate Poisson process on `[0, horizon]`.
pub fn draw_jump_times<T: Scalar>(rng: &mut PathRng, horizon: T) -> Vec<T> {
    let horizon = horizon.to_f64_lossy();
    let mut times = Vec::new();
    let mut t = rng.exp1();
    while t <= horizon {
        times.push(T::lit(t));
        t += rng.exp1();
    }
    times
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonPath<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub jump_times: Vec<T>,
}

/// One path reproducible from `(cfg.master_seed, path_index)`.
pub fn simulate_poisson_cubic<T: Scalar>(
    model: &PoissonCubicModel<T>,
    x: T,
    cfg: &SimConfig<T>,
    path_index: u64,
) -> Result<PoissonPath<T>> {
    cfg.validate()?;
    let times = cfg.record_times();
    let mut rng = PathRng::new(cfg.master_seed, path_index);
    let jump_times = draw_jump_times(&mut rng, cfg.horizon);
    let values = model.evolve(x, &jump_times, &times);
    Ok(PoissonPath {
        times,
        values,
        jump_times,
    })
}
