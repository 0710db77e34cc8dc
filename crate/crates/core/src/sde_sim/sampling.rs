//! Model-agnostic Monte Carlo sampling of transition laws.

use rayon::prelude::*;

use super::config::{SimConfig, TrajectoryBatch};
use super::langevin::LangevinCubicModel;
use super::poisson::{draw_jump_times, PoissonCubicModel};
use super::rng::{derive_seed, PathRng};
use crate::chain_oracle::FiniteChain;
use crate::error::{domain, Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::scalar::Scalar;

/// Salt separating the Cesàro time draws from the path streams.
const CESARO_SALT: u64 = 0xc35a_20a1;

/// Numerical controls a model may need when producing a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    pub ode_tolerance: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            ode_tolerance: 1e-9,
        }
    }
}

impl<T: Scalar> From<&SimConfig<T>> for StepControl {
    fn from(c: &SimConfig<T>) -> Self {
        Self {
            dt: c.dt.to_f64_lossy(),
            ode_tolerance: c.ode_tolerance.to_f64_lossy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPath {
    pub values: Vec<f64>,
    pub jump_times: Vec<f64>,
    pub diverged: bool,
}

/// A real-valued Markov process that can be sampled path by path.
///
/// Paths started from different points with the same `PathRng` use the same
/// underlying randomness (same jump clock, same Brownian increments, same
/// uniforms), which is what the paired defect estimators rely on.
pub trait MarkovModel: Send + Sync {
    fn id(&self) -> String;

    /// Values at the sorted `times`, all `>= 0`.
    fn path(&self, x: f64, times: &[f64], ctl: &StepControl, rng: &mut PathRng) -> Result<ModelPath>;

    fn distance(&self, x: f64, y: f64) -> f64 {
        (x - y).abs()
    }

    /// Checks that `ctl` is usable before fanning out.
    fn check(&self, _ctl: &StepControl) -> Result<()> {
        Ok(())
    }
}

impl<T: Scalar> MarkovModel for PoissonCubicModel<T> {
    fn id(&self) -> String {
        "poisson_cubic".into()
    }

    fn path(&self, x: f64, times: &[f64], _ctl: &StepControl, rng: &mut PathRng) -> Result<ModelPath> {
        let horizon = times.last().copied().unwrap_or(0.0);
        let jumps: Vec<T> = draw_jump_times(rng, T::lit(horizon));
        let rec: Vec<T> = times.iter().map(|t| T::lit(*t)).collect();
        let values = self.evolve(T::lit(x), &jumps, &rec);
        Ok(ModelPath {
            values: values.into_iter().map(Scalar::to_f64_lossy).collect(),
            jump_times: jumps.into_iter().map(Scalar::to_f64_lossy).collect(),
            diverged: false,
        })
    }
}

impl<T: Scalar> MarkovModel for LangevinCubicModel<T> {
    fn id(&self) -> String {
        "langevin_cubic".into()
    }

    fn path(&self, x: f64, times: &[f64], ctl: &StepControl, rng: &mut PathRng) -> Result<ModelPath> {
        let rec: Vec<T> = times.iter().map(|t| T::lit(*t)).collect();
        let (values, diverged) = self.integrate(T::lit(x), T::lit(ctl.dt), &rec, rng);
        Ok(ModelPath {
            values: values.into_iter().map(Scalar::to_f64_lossy).collect(),
            jump_times: Vec::new(),
            diverged,
        })
    }

    fn check(&self, ctl: &StepControl) -> Result<()> {
        self.check_step(T::lit(ctl.dt))
    }
}

/// A finite chain run as a piecewise-constant process on `[0, inf)`:
/// the state at time `s` is the chain after `ceil(s)` steps, so the time
/// average over `(0, t]` equals the discrete Cesàro average of
/// `P^1, ..., P^t`. States are encoded as the reals `0, 1, ..., n-1`.
#[derive(Debug, Clone)]
pub struct ChainModel {
    chain: FiniteChain<f64>,
    cdf: Vec<Vec<f64>>,
}

impl ChainModel {
    pub fn new(chain: FiniteChain<f64>) -> Self {
        let cdf = (0..chain.n_states())
            .map(|x| {
                chain
                    .row(x)
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self { chain, cdf }
    }

    pub fn chain(&self) -> &FiniteChain<f64> {
        &self.chain
    }

    fn state_of(&self, x: f64) -> Result<usize> {
        let s = x.round();
        if (x - s).abs() > 1e-9 || s < 0.0 || s as usize >= self.chain.n_states() {
            return domain(format!("{x} is not a state of the chain"));
        }
        Ok(s as usize)
    }

    fn next(&self, x: usize, u: f64) -> usize {
        let row = &self.cdf[x];
        // Zero-probability states are never selected.
        let mut y = row.partition_point(|c| *c <= u);
        if y >= row.len() {
            y = (0..row.len()).rev().find(|&j| self.chain.entry(x, j) > 0.0).unwrap_or(x);
        }
        y
    }
}

impl MarkovModel for ChainModel {
    fn id(&self) -> String {
        "finite_chain".into()
    }

    fn path(&self, x: f64, times: &[f64], _ctl: &StepControl, rng: &mut PathRng) -> Result<ModelPath> {
        let mut state = self.state_of(x)?;
        let mut steps = 0u64;
        let mut values = Vec::with_capacity(times.len());
        for &t in times {
            let target = (t - 1e-12).ceil().max(0.0) as u64;
            while steps < target {
                state = self.next(state, rng.uniform());
                steps += 1;
            }
            values.push(state as f64);
        }
        Ok(ModelPath {
            values,
            jump_times: Vec::new(),
            diverged: false,
        })
    }

    fn distance(&self, x: f64, y: f64) -> f64 {
        match (self.state_of(x), self.state_of(y)) {
            (Ok(a), Ok(b)) => self.chain.distance(a, b),
            _ => f64::INFINITY,
        }
    }
}

/// `n` independent paths from `x` observed at `times`; path `i` uses stream
/// `(master_seed, i)`. Output order is the path order regardless of
/// scheduling.
pub fn sample_paths<M: MarkovModel + ?Sized>(
    model: &M,
    x: f64,
    times: &[f64],
    n: usize,
    master_seed: u64,
    ctl: &StepControl,
) -> Result<Vec<ModelPath>> {
    if n == 0 {
        return domain("need at least one path");
    }
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("observation times must be nonnegative and strictly increasing");
    }
    model.check(ctl)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| model.path(x, times, ctl, &mut PathRng::new(master_seed, i)))
        .collect()
}

/// Simulates a full batch as described by `cfg`.
pub fn simulate_batch<M: MarkovModel + ?Sized>(model: &M, x: f64, cfg: &SimConfig<f64>) -> Result<TrajectoryBatch> {
    cfg.validate()?;
    let times = cfg.record_times();
    let paths = sample_paths(model, x, &times, cfg.n_paths, cfg.master_seed, &cfg.into())?;
    let has_jumps = paths.iter().any(|p| !p.jump_times.is_empty());
    Ok(TrajectoryBatch {
        model_id: model.id(),
        x0: x,
        record_times: times,
        master_seed: cfg.master_seed,
        diverged: paths.iter().map(|p| p.diverged).collect(),
        jump_times: has_jumps.then(|| paths.iter().map(|p| p.jump_times.clone()).collect()),
        values: paths.into_iter().map(|p| p.values).collect(),
    })
}

/// Monte Carlo surrogate of a transition law, with the number of diverged
/// paths that were left out of the measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LawSample {
    pub measure: EmpiricalMeasure<f64>,
    pub diverged: usize,
}

fn collect_law(values: Vec<(f64, bool)>) -> Result<LawSample> {
    let diverged = values.iter().filter(|(_, d)| *d).count();
    let kept: Vec<f64> = values.into_iter().filter(|(_, d)| !*d).map(|(v, _)| v).collect();
    if kept.is_empty() {
        return Err(Error::Precondition("every sampled path diverged".into()));
    }
    Ok(LawSample {
        measure: EmpiricalMeasure::new(kept)?,
        diverged,
    })
}

/// Endpoints at time `t` of `n` paths from `x`.
pub fn sample_law<M: MarkovModel + ?Sized>(
    model: &M,
    x: f64,
    t: f64,
    n: usize,
    master_seed: u64,
    ctl: &StepControl,
) -> Result<LawSample> {
    let paths = sample_paths(model, x, &[t], n, master_seed, ctl)?;
    collect_law(paths.into_iter().map(|p| (p.values[0], p.diverged)).collect())
}

/// Samples of the Cesàro law `(1/t) int_0^t P_s(x, .) ds`: path `i` is
/// observed at an independent uniform time in `(0, t)`.
pub fn sample_cesaro_law<M: MarkovModel + ?Sized>(
    model: &M,
    x: f64,
    t: f64,
    n: usize,
    master_seed: u64,
    ctl: &StepControl,
) -> Result<LawSample> {
    if !(t > 0.0) {
        return domain("Cesàro horizon must be positive");
    }
    if n == 0 {
        return domain("need at least one path");
    }
    model.check(ctl)?;
    let time_seed = derive_seed(master_seed, &[CESARO_SALT]);
    let values = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let u = t * PathRng::new(time_seed, i).uniform();
            let u = if u > 0.0 { u } else { t * 0.5f64.powi(53) };
            model
                .path(x, &[u], ctl, &mut PathRng::new(master_seed, i))
                .map(|p| (p.values[0], p.diverged))
        })
        .collect::<Result<Vec<_>>>()?;
    collect_law(values)
}
