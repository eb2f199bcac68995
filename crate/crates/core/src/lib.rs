//! Numerical analysis of SEIR epidemic models.
//!
//! States of the four-compartment models are ordered `(S, E, I, R)`; the
//! backward-bifurcation model uses `(x1, x2, x3, x4)`.

pub mod bifurcation;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod model;
pub mod sensitivity;
pub mod stability;

pub use error::{Error, Result};
pub use model::{
    BackwardModelParams, ClassicalSeirParams, DynamicalSystem, ModifiedParam, ModifiedSeirParams,
    StateVector,
};
