//! Numerical toolkit for checking asymptotic stability of Markov-Feller
//! semigroups: measure distances, an exact finite-chain oracle, simulators
//! for cubic jump and diffusion models, a feedback coupling, and estimators
//! for eventual continuity and lower-bound conditions.

// Negated comparisons are used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chain_oracle;
pub mod coupling;
pub mod criteria;
pub mod error;
pub mod measures;
pub mod scalar;
pub mod sde_sim;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FiniteChainF64 = chain_oracle::FiniteChain<f64>;
pub type FiniteChainF32 = chain_oracle::FiniteChain<f32>;
pub type FiniteMeasureF64 = measures::FiniteMeasure<f64>;
pub type FiniteMeasureF32 = measures::FiniteMeasure<f32>;
pub type EmpiricalMeasureF64 = measures::EmpiricalMeasure<f64>;
pub type EmpiricalMeasureF32 = measures::EmpiricalMeasure<f32>;
pub type PoissonCubicModelF64 = sde_sim::PoissonCubicModel<f64>;
pub type LangevinCubicModelF64 = sde_sim::LangevinCubicModel<f64>;
