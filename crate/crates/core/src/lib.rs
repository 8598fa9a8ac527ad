//! Sparse doubly-nonnegative (DNN) relaxations of polynomial optimization
//! problems with binary, box and complementarity constraints, solved by a
//! bisection-projection loop whose lower bounds are certified by an explicit
//! dual witness.
//!
//! Pipeline: [`instances::PopInstance`] → [`relaxation::assemble`] →
//! [`solver::bp_solve`].

pub mod cones;
pub mod error;
pub mod instances;
pub mod polyalg;
pub mod relaxation;
pub mod rhobound;
pub mod rng;
pub mod solver;
pub mod sparsity;

pub use error::{Error, Result};
