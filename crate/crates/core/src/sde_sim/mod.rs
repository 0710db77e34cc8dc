//! Simulators for the Poisson-driven and Brownian cubic models.

pub mod config;
pub mod flow;
pub mod langevin;
pub mod poisson;
pub mod rng;
pub mod sampling;

pub use config::{Record, SimConfig, TrajectoryBatch};
pub use flow::{equilibrium, exact_cubic_flow, flow_entry_time, flow_time_to_reach};
pub use langevin::{simulate_langevin, LangevinCubicModel, LangevinPath};
pub use poisson::{draw_jump_times, simulate_poisson_cubic, PoissonCubicModel, PoissonPath, ProbeGrid, SigmaSpec};
pub use rng::{derive_seed, PathRng};
pub use sampling::{
    sample_cesaro_law, sample_law, sample_paths, simulate_batch, ChainModel, LawSample, MarkovModel, ModelPath,
    StepControl,
};
