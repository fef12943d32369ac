//! Smoothing models for correlated multi-item value distributions, the adversarial
//! constructions that stress them, and evaluators for the mechanisms that sell
//! against them (posted prices, lottery menus, LP-optimal menus, single-item
//! auctions with correlated bidders).
//!
//! Everything is deterministic given an explicit seed: randomness enters only
//! through [`rng`] streams, and every stochastic quantity is a deterministic
//! function of `(input, noise)`.

pub mod analysis;
pub mod bundle;
pub mod constructions;
pub mod distributions;
pub mod geometry;
pub mod logscale;
pub mod mechanisms;
pub mod perturbation;
pub mod report;
pub mod rng;

pub use distributions::{DiscreteDistribution, JointDiscreteDistribution, SmoothedDistribution};
pub use geometry::{AxisBox, CartesianPoint, PolarPoint};
pub use logscale::LogScaled;
pub use mechanisms::menu::Menu;
pub use perturbation::{NoiseVector, PerturbationModel};
