use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum Record<T> {
    Endpoint,
    Grid(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimConfig<T> {
    pub horizon: T,
    /// Step of the diffusion scheme.
    pub dt: T,
    /// Local error tolerance of the adaptive coupling integrator.
    pub ode_tolerance: T,
    pub n_paths: usize,
    pub master_seed: u64,
    pub record: Record<T>,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(horizon: T, dt: T, n_paths: usize, master_seed: u64) -> Self {
        Self {
            horizon,
            dt,
            ode_tolerance: T::lit(1e-9),
            n_paths,
            master_seed,
            record: Record::Endpoint,
        }
    }

    pub fn with_record(mut self, record: Record<T>) -> Self {
        self.record = record;
        self
    }

    pub fn with_ode_tolerance(mut self, tol: T) -> Self {
        self.ode_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > T::zero()) {
            return domain(format!("horizon must be positive (got {})", self.horizon));
        }
        if !(self.dt > T::zero()) || self.dt > self.horizon {
            return domain(format!("need 0 < dt <= horizon (got dt = {})", self.dt));
        }
        if !(self.ode_tolerance > T::zero()) {
            return domain("ode_tolerance must be positive");
        }
        if self.n_paths == 0 {
            return domain("n_paths must be at least 1");
        }
        if let Record::Grid(times) = &self.record {
            if times.is_empty() {
                return domain("record grid is empty");
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return domain("record times must be strictly increasing");
            }
            if times[0] < T::zero() || times[times.len() - 1] > self.horizon {
                return domain("record times must lie in [0, horizon]");
            }
        }
        Ok(())
    }

    pub fn record_times(&self) -> Vec<T> {
        match &self.record {
            Record::Endpoint => vec![self.horizon],
            Record::Grid(t) => t.clone(),
        }
    }
}

/// A batch of simulated paths observed on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub model_id: String,
    pub x0: f64,
    pub record_times: Vec<f64>,
    pub master_seed: u64,
    /// `values[path][time]`; NaN after divergence.
    pub values: Vec<Vec<f64>>,
    /// Per-path jump times (Poisson-driven models only).
    pub jump_times: Option<Vec<Vec<f64>>>,
    pub diverged: Vec<bool>,
}

impl TrajectoryBatch {
    pub fn n_paths(&self) -> usize {
        self.values.len()
    }

    pub fn diverged_count(&self) -> usize {
        self.diverged.iter().filter(|d| **d).count()
    }

    /// Finite values at one record index.
    pub fn column(&self, time_index: usize) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.diverged)
            .filter(|(_, d)| !**d)
            .map(|(v, _)| v[time_index])
            .collect()
    }

    /// Long-format CSV `path_index,time,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["path_index", "time", "value"])?;
        for (i, row) in self.values.iter().enumerate() {
            for (t, v) in self.record_times.iter().zip(row) {
                wtr.write_record([i.to_string(), format!("{t:.16e}"), format!("{v:.16e}")])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}
