//! Core numerics for particle measures that drift adversarially against a
//! fixed predictive model.
//!
//! The library simulates the explicit Euler dynamic
//! `x <- x + gamma * grad_x U(theta, x)` for a pointwise utility `U` chosen
//! per setting (squared-error or logistic), tracks how particle directions
//! align with the two distinguished unit directions of the model pair, and
//! exposes the two-dimensional reduction of the logistic dynamic together
//! with its certificate quantities (a Lyapunov ratio, envelope bounds, and a
//! basin check). On top of that sit the finite-sample learner game and the
//! packaged high-dimensional benchmark experiments.
//!
//! The crate is `no_std`-compatible (with `alloc`); everything that touches
//! files, threads, or a terminal lives in the companion CLI crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

mod error;
mod math;

pub mod dynamics;
pub mod experiment;
pub mod game;
pub mod linalg;
pub mod objectives;
pub mod rng;
pub mod scalar;

pub use error::Error;
pub use linalg::{Subspace, Vector};
pub use objectives::{ModelPair, Setting};
