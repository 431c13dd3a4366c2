//! Surrogate-assisted optimal control of ODE systems.
//!
//! Full-order solves of a parameterized control problem are collected into a
//! snapshot matrix, compressed with proper orthogonal decomposition, and the
//! mode amplitudes are interpolated over the parameter box with spline radial
//! basis functions. The resulting surrogate replaces the ODE solver inside an
//! augmented-Lagrangian optimizer, and an outer loop shrinks the parameter box
//! around the incumbent until surrogate and full model agree.
//!
//! The crate is `no_std` with `alloc`. The default `std` feature adds
//! parallel snapshot assembly and wall-clock timings.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bench;
pub mod error;
pub mod integrator;
pub mod optimizer;
pub mod pod;
pub mod problem;
pub mod rbf;
pub mod refine;
pub mod sampling;
pub mod snapshot;
pub mod surrogate;
mod timing;

pub use error::{Error, Result};
