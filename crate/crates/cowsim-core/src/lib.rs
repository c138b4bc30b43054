//! Analysis of intercept-and-resend attacks on coherent-one-way QKD built
//! from unambiguous state discrimination with imperfect equipment.
//!
//! The crate computes the expected gain, QBER and monitoring visibilities
//! of the attacked system in closed form, cross-checks them with an
//! independent recursion evaluator and a round-level Monte Carlo
//! simulation, and searches the parameter space for the region where the
//! attack stays inside the acceptance thresholds of the legitimate users.

pub mod feasibility;
pub mod mc;
pub mod metrics;
pub mod model;
pub mod usd;
