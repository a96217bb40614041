//! Online gradient control for bi-level coordination of distributed
//! devices under time-varying feasible sets.
//!
//! The crate is generic over the scalar type through [`scalar::Real`]
//! (`f32` and `f64` both qualify); the aliases below fix `f64` for the
//! common case.

pub mod cli;
pub mod devices;
pub mod geometry;
pub mod grid;
mod linalg;
pub mod oco;
pub mod scalar;
pub mod sim;

pub use scalar::Real;

pub type FeasibleSet64 = geometry::FeasibleSet<f64>;
pub type CostFunction64 = oco::CostFunction<f64>;
pub type BoundConstants64 = oco::BoundConstants<f64>;
pub type Scenario64 = sim::Scenario<f64>;
pub type EpisodeLog64 = sim::EpisodeLog<f64>;

pub type FeasibleSet32 = geometry::FeasibleSet<f32>;
pub type CostFunction32 = oco::CostFunction<f32>;
