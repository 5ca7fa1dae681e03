//! Equilibrium Kawasaki dynamics of interacting particles in continuum,
//! its diffusive scaling limit, and desk-scale numerical verification of
//! the generator convergence on smooth cylinder functions.

pub mod cli;
pub mod config;
pub mod cylinder;
pub mod diffusion;
pub mod kcalculus;
pub mod error;
pub mod genlab;
pub mod gibbs;
pub mod kawasaki;
pub mod potential;
pub mod quad;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
