//! Maslov-type indices of symplectic paths relative to a boundary matrix, Galerkin
//! oracles for dual Morse indices, and detection/confirmation of bifurcations in
//! parametrized Hamiltonian boundary value problems.

pub mod brake;
pub mod bvp;
pub mod dual_action;
pub mod dual_morse;
pub mod error;
pub mod family;
pub mod index;
pub mod scan;
pub mod symplectic;

pub use error::{Error, Result};
