//! Simulation, analysis and caching optimization for cache-assisted
//! coordinated multi-point (CoMP) content delivery in clustered
//! device-to-device networks.
//!
//! Devices form a Thomas cluster process: cluster centers are a homogeneous
//! Poisson point process and members are Gaussian-scattered around them. A
//! client at the origin requests a file; active devices of its own cluster
//! that cache the file transmit jointly, while active devices of every other
//! cluster interfere.
//!
//! * [`geometry`] samples the point process and provides distance laws.
//! * [`channel`] draws faded signal and interference powers.
//! * [`simulator`] estimates rate coverage and offloading gain by Monte Carlo.
//! * [`analytics`] evaluates the exact, bounded and approximated expressions.
//! * [`caching`] builds popularity profiles and caching vectors.
//! * [`optimizer`] solves the two offloading-gain maximization problems.

pub mod analytics;
pub mod caching;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod optimizer;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
