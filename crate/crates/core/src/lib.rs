//! Downlink power allocation between a cloud RAN and a macro/pico/femto HetNet.
//!
//! The control unit (steering every remote radio head) and each HetNet base
//! station choose per-subcarrier powers under a fixed budget. This crate samples
//! networks and Rayleigh channels, evaluates rates, and solves the game three
//! ways: Nash equilibrium by damped best-response dynamics, the
//! cognitive-hierarchy equilibrium by a one-pass level recursion, and an
//! equal-power baseline. [`experiments`] drives Monte Carlo sweeps to CSV.
//!
//! All numerics are generic over [`Scalar`]; the aliases below fix `f64`.

pub mod channel;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod num;
pub mod oracle;
pub mod rates;
pub mod scenario;
pub mod seed;
pub mod solvers;

pub use error::{Error, Result};
pub use num::Scalar;

pub type Scenario = scenario::Scenario<f64>;
pub type Deployment = scenario::Deployment<f64>;
pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type Network = rates::Network<f64>;
pub type PowerProfile = rates::PowerProfile<f64>;
pub type EquilibriumResult = equilibrium::EquilibriumResult<f64>;
pub type LevelStrategyTable = equilibrium::LevelStrategyTable<f64>;
pub type SolverOptions = solvers::SolverOptions<f64>;
pub type NeOptions = equilibrium::NeOptions<f64>;

pub type Scenario32 = scenario::Scenario<f32>;
pub type Network32 = rates::Network<f32>;
